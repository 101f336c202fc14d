#include "pamlab/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "pamlab/errors.hpp"
#include "pamlab/random.hpp"

namespace pamlab {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool in_half_space(const Wavevector& k, int d) {
  for (int i = 0; i < d; ++i) {
    if (k[i] > 0) return true;
    if (k[i] < 0) return false;
  }
  return false;
}
}  // namespace

double eigenvalue(const TorusSpec& spec, const Wavevector& k) {
  double lam = 0.0;
  for (int i = 0; i < spec.d; ++i) {
    const double q = kTwoPi * k[i] / spec.length(i);
    lam += q * q;
  }
  return lam;
}

SpectralBasis::SpectralBasis(TorusSpec spec, int kmax) : spec_(std::move(spec)), kmax_(kmax) {
  spec_.validate();
  if (kmax_ < 0) throw InvalidConfig("truncation.kmax must be >= 0");
  const double m0 = spec_.volume();
  modes_.push_back(Mode{ModeIndex{}, 0.0, 1.0 / std::sqrt(m0)});
  const int hi2 = spec_.d >= 2 ? kmax_ : 0;
  const int hi3 = spec_.d >= 3 ? kmax_ : 0;
  const double pair_norm = std::sqrt(2.0 / m0);
  for (int k1 = -kmax_; k1 <= kmax_; ++k1)
    for (int k2 = -hi2; k2 <= hi2; ++k2)
      for (int k3 = -hi3; k3 <= hi3; ++k3) {
        const Wavevector k{k1, k2, k3};
        if (!in_half_space(k, spec_.d)) continue;
        const double lam = eigenvalue(spec_, k);
        modes_.push_back(Mode{ModeIndex{k, false}, lam, pair_norm});
        modes_.push_back(Mode{ModeIndex{k, true}, lam, pair_norm});
      }
  std::stable_sort(modes_.begin(), modes_.end(),
                   [](const Mode& a, const Mode& b) { return a.lambda < b.lambda; });
}

double SpectralBasis::eigenfunction(std::size_t n, const Point& x) const {
  const Mode& m = modes_[n];
  double theta = 0.0;
  for (int i = 0; i < spec_.d; ++i) theta += kTwoPi * m.index.k[i] * x[i] / spec_.length(i);
  if (m.lambda == 0.0) return m.norm;
  return m.norm * (m.index.sine ? std::sin(theta) : std::cos(theta));
}

void SpectralBasis::evaluate_all(const Point& x, std::span<double> out) const {
  const std::size_t width = static_cast<std::size_t>(2 * kmax_ + 1);
  std::vector<std::complex<double>> table(static_cast<std::size_t>(spec_.d) * width);
  for (int a = 0; a < spec_.d; ++a) {
    const double theta = kTwoPi * x[a] / spec_.length(a);
    for (int k = -kmax_; k <= kmax_; ++k)
      table[a * width + static_cast<std::size_t>(k + kmax_)] = std::polar(1.0, theta * k);
  }
  for (std::size_t n = 0; n < modes_.size(); ++n) {
    const Mode& m = modes_[n];
    std::complex<double> z = 1.0;
    for (int a = 0; a < spec_.d; ++a)
      z *= table[a * width + static_cast<std::size_t>(m.index.k[a] + kmax_)];
    if (m.lambda == 0.0) {
      out[n] = m.norm;
    } else {
      out[n] = m.norm * (m.index.sine ? z.imag() : z.real());
    }
  }
}

std::vector<double> SpectralBasis::heat_factors(double t) const {
  std::vector<double> f(modes_.size());
  for (std::size_t n = 0; n < modes_.size(); ++n) f[n] = std::exp(-0.5 * modes_[n].lambda * t);
  return f;
}

double heat_kernel(const TorusSpec& spec, int kmax, double t, const Point& x, const Point& y) {
  if (!(t > 0.0)) throw DomainError("heat kernel requires t > 0");
  const Point delta = spec.displacement(x, y);
  return 1.0 / spec.volume() +
         half_lattice_cosine_sum(spec, kmax, delta,
                                 [t](double lam) { return std::exp(-0.5 * lam * t); });
}

double heat_kernel(const SpectralBasis& basis, double t, const Point& x, const Point& y) {
  return heat_kernel(basis.spec(), basis.kmax(), t, x, y);
}

double gaussian_term(const TorusSpec& spec, double t, double dist2) {
  return std::pow(kTwoPi * t, -0.5 * spec.d) * std::exp(-dist2 / (2.0 * t));
}

namespace {
double shell_bound(const TorusSpec& spec, double t, int n) {
  if (n < 1) return std::numeric_limits<double>::infinity();
  const double r = (n - 0.5) * spec.min_length();
  const double count = std::pow(2.0 * n + 1.0, spec.d) - std::pow(2.0 * n - 1.0, spec.d);
  return count * gaussian_term(spec, t, r * r);
}
}  // namespace

int images_required(const TorusSpec& spec, double t, double tol) {
  int n = 1;
  while (shell_bound(spec, t, n) >= tol) ++n;
  return n;
}

double heat_kernel_images(const TorusSpec& spec, double t, const Point& x, const Point& y,
                          int n_images) {
  if (!(t > 0.0)) throw DomainError("heat kernel requires t > 0");
  const double tail = shell_bound(spec, t, n_images);
  if (!(tail < 1e-14))
    throw ToleranceNotMet("image sum needs more than " + std::to_string(n_images) + " shells",
                          tail);
  // |delta| makes the sum bit-for-bit symmetric in (x, y).
  Point delta = spec.displacement(x, y);
  for (double& c : delta) c = std::abs(c);
  const int n2 = spec.d >= 2 ? n_images : 0;
  const int n3 = spec.d >= 3 ? n_images : 0;
  double sum = 0.0;
  for (int v1 = -n_images; v1 <= n_images; ++v1)
    for (int v2 = -n2; v2 <= n2; ++v2)
      for (int v3 = -n3; v3 <= n3; ++v3) {
        const int v[3] = {v1, v2, v3};
        double r2 = 0.0;
        for (int i = 0; i < spec.d; ++i) {
          const double c = delta[i] + v[i] * spec.length(i);
          r2 += c * c;
        }
        sum += std::exp(-r2 / (2.0 * t));
      }
  return std::pow(kTwoPi * t, -0.5 * spec.d) * sum;
}

double heat_kernel_images(const TorusSpec& spec, double t, const Point& x, const Point& y) {
  return heat_kernel_images(spec, t, x, y, images_required(spec, t));
}

double gaussian_bound_kernel(const TorusSpec& spec, double t, const Point& x, const Point& y,
                             double c_heat) {
  if (!(t > 0.0)) throw DomainError("comparison kernel requires t > 0");
  return gaussian_term(spec, t, spec.distance2(x, y)) + c_heat * std::min(t, 1.0);
}

namespace {
Point random_point(const TorusSpec& spec, CounterRng& rng) {
  Point p{0.0, 0.0, 0.0};
  for (int i = 0; i < spec.d; ++i) p[i] = rng.uniform() * spec.length(i);
  return p;
}

template <class F>
void sample_heat_triples(const TorusSpec& spec, std::size_t n, std::uint64_t seed, double t_min,
                         double t_max, F&& f) {
  CounterRng rng(stream_key(seed, 0x4ea7));
  const double lo = std::log(t_min);
  const double hi = std::log(t_max);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::exp(lo + (hi - lo) * rng.uniform());
    const Point x = random_point(spec, rng);
    const Point y = random_point(spec, rng);
    f(t, x, y);
  }
}
}  // namespace

HeatConstantFit fit_heat_constant(const TorusSpec& spec, std::size_t n_samples, std::uint64_t seed,
                                  double t_min, double t_max) {
  HeatConstantFit fit;
  fit.samples = n_samples;
  fit.large_time_limit = 1.0 / spec.volume();
  double best = 0.0;
  sample_heat_triples(spec, n_samples, seed, t_min, t_max,
                      [&](double t, const Point& x, const Point& y) {
                        const double p = heat_kernel_images(spec, t, x, y);
                        const double g = gaussian_term(spec, t, spec.distance2(x, y));
                        best = std::max(best, (p - g) / std::min(t, 1.0));
                      });
  // Structured pass: a log grid in t against per-axis offsets from 0 to
  // half the side, which contains the cut locus where P_t - G_t peaks.
  const int m = spec.d == 3 ? 4 : 8;
  const int n_t = 256;
  int combos = 1;
  for (int i = 0; i < spec.d; ++i) combos *= m + 1;
  for (int it = 0; it < n_t; ++it) {
    const double t = t_min * std::pow(t_max / t_min, it / (n_t - 1.0));
    for (int c = 0; c < combos; ++c) {
      Point y{0.0, 0.0, 0.0};
      for (int i = 0, r = c; i < spec.d; ++i, r /= m + 1) y[i] = 0.5 * spec.length(i) * (r % (m + 1)) / m;
      const double p = heat_kernel_images(spec, t, Point{0.0, 0.0, 0.0}, y);
      const double g = gaussian_term(spec, t, spec.distance2(Point{0.0, 0.0, 0.0}, y));
      best = std::max(best, (p - g) / std::min(t, 1.0));
    }
  }
  fit.sample_max = best;
  fit.c_heat = std::max(best, fit.large_time_limit);
  return fit;
}

double heat_bound_excess(const TorusSpec& spec, double c_heat, std::size_t n_samples,
                         std::uint64_t seed, double t_min, double t_max) {
  double worst = -std::numeric_limits<double>::infinity();
  sample_heat_triples(spec, n_samples, seed, t_min, t_max,
                      [&](double t, const Point& x, const Point& y) {
                        const double p = heat_kernel_images(spec, t, x, y);
                        worst = std::max(worst, p - gaussian_bound_kernel(spec, t, x, y, c_heat));
                      });
  return worst;
}

double SpectralField::evaluate(const Point& x) const {
  std::vector<double> phi(basis->size());
  basis->evaluate_all(x, phi);
  double s = 0.0;
  for (std::size_t n = 0; n < phi.size(); ++n) s += coeffs[n] * phi[n];
  return s;
}

double SpectralField::norm2() const {
  double s = 0.0;
  for (double a : coeffs) s += a * a;
  return s;
}

void heat_flow(const SpectralBasis& basis, double t, std::span<double> coeffs) {
  for (std::size_t n = 0; n < coeffs.size(); ++n) coeffs[n] *= std::exp(-0.5 * basis.lambda(n) * t);
}

namespace {
std::vector<int> grid_dims(const SpectralBasis& basis, int grid_factor) {
  if (grid_factor < 1) throw InvalidConfig("truncation.grid_factor must be >= 1");
  int n = std::max(4, 2 * grid_factor * basis.kmax());
  if (n % 2) ++n;
  return std::vector<int>(static_cast<std::size_t>(basis.spec().d), n);
}
}  // namespace

GridTransform::GridTransform(std::shared_ptr<const SpectralBasis> basis, int grid_factor)
    : basis_(std::move(basis)), dims_(grid_dims(*basis_, grid_factor)), fft_(dims_) {
  const TorusSpec& spec = basis_->spec();
  const int d = spec.d;
  cell_volume_ = spec.volume() / static_cast<double>(fft_.real_size());
  const std::size_t last = static_cast<std::size_t>(dims_.back() / 2 + 1);
  auto flat = [&](const Wavevector& k) {
    std::size_t idx = 0;
    for (int a = 0; a < d - 1; ++a) {
      const int n = dims_[static_cast<std::size_t>(a)];
      idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(((k[a] % n) + n) % n);
    }
    return idx * last + static_cast<std::size_t>(k[d - 1]);
  };
  slots_.resize(basis_->size());
  for (std::size_t n = 0; n < basis_->size(); ++n) {
    Wavevector k = basis_->modes()[n].index.k;
    Wavevector mk{-k[0], -k[1], -k[2]};
    Slot s;
    if (k[d - 1] > 0) {
      s.index = flat(k);
    } else if (k[d - 1] < 0) {
      s.index = flat(mk);
      s.conj = true;
    } else {
      s.index = flat(k);
      if (basis_->modes()[n].lambda != 0.0) {
        s.mirror = flat(mk);
        s.has_mirror = true;
      }
    }
    slots_[n] = s;
  }
}

Point GridTransform::grid_point(std::size_t flat) const {
  const TorusSpec& spec = basis_->spec();
  Point p{0.0, 0.0, 0.0};
  for (int a = spec.d - 1; a >= 0; --a) {
    const std::size_t n = static_cast<std::size_t>(dims_[static_cast<std::size_t>(a)]);
    p[a] = static_cast<double>(flat % n) * spec.length(a) / static_cast<double>(n);
    flat /= n;
  }
  return p;
}

GridTransform::Workspace GridTransform::workspace() const {
  return Workspace{std::vector<std::complex<double>>(fft_.complex_size()),
                   std::vector<std::complex<double>>(fft_.complex_size())};
}

void GridTransform::synthesize(std::span<const double> coeffs, std::span<double> grid,
                               Workspace& ws) const {
  const double m0 = basis_->spec().volume();
  const double pair = 1.0 / std::sqrt(2.0 * m0);
  std::fill(ws.spectrum.begin(), ws.spectrum.end(), std::complex<double>(0.0, 0.0));
  const auto& modes = basis_->modes();
  for (std::size_t n = 0; n < slots_.size(); ++n) {
    const Slot& s = slots_[n];
    if (modes[n].lambda == 0.0) {
      ws.spectrum[s.index] += coeffs[n] / std::sqrt(m0);
      continue;
    }
    std::complex<double> c = modes[n].index.sine ? std::complex<double>(0.0, -coeffs[n] * pair)
                                                 : std::complex<double>(coeffs[n] * pair, 0.0);
    ws.spectrum[s.index] += s.conj ? std::conj(c) : c;
    if (s.has_mirror) ws.spectrum[s.mirror] += std::conj(c);
  }
  fft_.backward(ws.spectrum.data(), grid.data(), ws.scratch.data());
}

void GridTransform::analyze(std::span<const double> grid, std::span<double> coeffs,
                            Workspace& ws) const {
  const double m0 = basis_->spec().volume();
  fft_.forward(grid.data(), ws.spectrum.data());
  const double inv = 1.0 / static_cast<double>(fft_.real_size());
  const double pair = std::sqrt(2.0 * m0) * inv;
  const auto& modes = basis_->modes();
  for (std::size_t n = 0; n < slots_.size(); ++n) {
    const Slot& s = slots_[n];
    std::complex<double> c = ws.spectrum[s.index];
    if (s.conj) c = std::conj(c);
    if (modes[n].lambda == 0.0) {
      coeffs[n] = c.real() * std::sqrt(m0) * inv;
    } else {
      coeffs[n] = modes[n].index.sine ? -c.imag() * pair : c.real() * pair;
    }
  }
}

}  // namespace pamlab
