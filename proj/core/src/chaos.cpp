#include "pamlab/chaos.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "pamlab/errors.hpp"
#include "pamlab/fft.hpp"
#include "pamlab/geometry.hpp"
#include "pamlab/manifold.hpp"
#include "pamlab/random.hpp"

namespace pamlab {

namespace {
using cplx = std::complex<double>;
using Compact = std::vector<cplx>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMaxAxes = 6;

// Fourier coefficients |k_a| <= kmax of a real field on a periodic grid,
// stored compactly as the matching slots of the half spectrum.
struct Lattice {
  std::vector<int> dims;
  std::vector<double> lengths;
  std::unique_ptr<RealFft> fft;
  std::vector<std::size_t> slot;
  std::vector<std::array<int, kMaxAxes>> wave;
  std::vector<double> eval_weight;  // 1 on the k_last = 0 plane, 2 elsewhere

  Lattice(std::vector<int> dims_in, std::vector<double> lengths_in, int kmax)
      : dims(std::move(dims_in)), lengths(std::move(lengths_in)) {
    const std::size_t axes = dims.size();
    std::size_t total = 1;
    for (int n : dims) total *= static_cast<std::size_t>(n);
    if (total > (std::size_t{1} << 26))
      throw InvalidConfig("chaos grid too large; reduce chaos.kmax");
    fft = std::make_unique<RealFft>(dims);
    const std::size_t half = fft->complex_size();
    std::vector<std::size_t> extent(dims.begin(), dims.end());
    extent.back() = static_cast<std::size_t>(dims.back() / 2 + 1);
    std::vector<std::size_t> idx(axes, 0);
    for (std::size_t flat = 0; flat < half; ++flat) {
      std::size_t rem = flat;
      for (std::size_t a = axes; a-- > 0;) {
        idx[a] = rem % extent[a];
        rem /= extent[a];
      }
      std::array<int, kMaxAxes> k{};
      bool keep = true;
      for (std::size_t a = 0; a < axes; ++a) {
        const int i = static_cast<int>(idx[a]);
        const int n = dims[a];
        const int ka = (a + 1 == axes || i < n / 2) ? i : i - n;
        if (std::abs(ka) > kmax || 2 * std::abs(ka) >= n) keep = false;
        k[a] = ka;
      }
      if (!keep) continue;
      slot.push_back(flat);
      wave.push_back(k);
      eval_weight.push_back(k[axes - 1] == 0 ? 1.0 : 2.0);
    }
  }

  std::size_t size() const { return slot.size(); }
  std::size_t real_size() const { return fft->real_size(); }

  double lambda(std::size_t e, std::size_t first, std::size_t count) const {
    double s = 0.0;
    for (std::size_t a = first; a < first + count; ++a) {
      const double q = kTwoPi * wave[e][a] / lengths[a];
      s += q * q;
    }
    return s;
  }

  double evaluate(const Compact& c, const double* x) const {
    double s = 0.0;
    for (std::size_t e = 0; e < c.size(); ++e) {
      double theta = 0.0;
      for (std::size_t a = 0; a < dims.size(); ++a) theta += kTwoPi * wave[e][a] * x[a] / lengths[a];
      s += eval_weight[e] * (c[e].real() * std::cos(theta) - c[e].imag() * std::sin(theta));
    }
    return s;
  }

  struct Buffers {
    std::vector<cplx> full, scratch;
    std::vector<double> phys;
  };
  Buffers buffers() const {
    return Buffers{std::vector<cplx>(fft->complex_size()), std::vector<cplx>(fft->complex_size()),
                   std::vector<double>(fft->real_size())};
  }

  void to_physical(const Compact& c, Buffers& b) const {
    std::fill(b.full.begin(), b.full.end(), cplx{});
    for (std::size_t e = 0; e < c.size(); ++e) b.full[slot[e]] = c[e];
    fft->backward(b.full.data(), b.phys.data(), b.scratch.data());
  }

  Compact from_physical(Buffers& b) const {
    fft->forward(b.phys.data(), b.full.data());
    const double inv = 1.0 / static_cast<double>(fft->real_size());
    Compact out(size());
    for (std::size_t e = 0; e < size(); ++e) out[e] = b.full[slot[e]] * inv;
    return out;
  }
};

// int_0^h e^{-mu s} ds and int_0^h s e^{-mu s} ds.
void exponential_moments(double mu, double h, double& a0, double& a1) {
  const double x = mu * h;
  if (x < 1e-3) {
    a0 = h * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
    a1 = h * h * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
  } else {
    const double e = std::exp(-x);
    a0 = (1.0 - e) / mu;
    a1 = (1.0 - e * (1.0 + x)) / (mu * mu);
  }
}

// levels[n][m]: F_n at node m, with F_n = int e^{(t-s)A} P_K[F_{n-1}(s) mult] ds.
std::vector<std::vector<Compact>> march(const Lattice& lat, const std::vector<double>& rates,
                                        const std::vector<double>& mult,
                                        const std::function<Compact(double)>& level0,
                                        const std::vector<double>& nodes, int n_max) {
  const std::size_t n_nodes = nodes.size();
  std::vector<std::vector<Compact>> levels(static_cast<std::size_t>(n_max) + 1,
                                           std::vector<Compact>(n_nodes));
  auto buf = lat.buffers();
  auto source = [&](const Compact& prev) {
    lat.to_physical(prev, buf);
    for (std::size_t j = 0; j < buf.phys.size(); ++j) buf.phys[j] *= mult[j];
    return lat.from_physical(buf);
  };
  levels[0][0] = level0(nodes[0]);
  std::vector<Compact> src(levels.size());
  for (int n = 1; n <= n_max; ++n) {
    levels[n][0] = Compact(lat.size());
    src[n] = source(levels[n - 1][0]);
  }
  for (std::size_t m = 0; m + 1 < n_nodes; ++m) {
    const double h = nodes[m + 1] - nodes[m];
    levels[0][m + 1] = level0(nodes[m + 1]);
    for (int n = 1; n <= n_max; ++n) {
      Compact next_src = source(levels[n - 1][m + 1]);
      Compact& out = levels[n][m + 1];
      const Compact& cur = levels[n][m];
      out.resize(lat.size());
      for (std::size_t e = 0; e < lat.size(); ++e) {
        double a0, a1;
        exponential_moments(rates[e], h, a0, a1);
        out[e] = std::exp(-rates[e] * h) * cur[e] + next_src[e] * a0 -
                 (next_src[e] - src[n][e]) * (a1 / h);
      }
      src[n] = std::move(next_src);
    }
  }
  return levels;
}

// Truncated G_{alpha,rho}(w) on the d-dimensional grid of `lat`.
std::vector<double> covariance_on_grid(const TorusSpec& spec, const NoiseParams& params,
                                       const Lattice& lat) {
  const double m0 = spec.volume();
  Compact g(lat.size());
  for (std::size_t e = 0; e < lat.size(); ++e) {
    const double lam = lat.lambda(e, 0, static_cast<std::size_t>(spec.d));
    g[e] = lam == 0.0 ? params.rho / m0 : std::pow(lam, -params.alpha) / m0;
  }
  auto buf = lat.buffers();
  lat.to_physical(g, buf);
  return buf.phys;
}

std::vector<int> product_grid(const TorusSpec& spec, int kmax, int grid_factor) {
  return std::vector<int>(static_cast<std::size_t>(spec.d), std::max(4, 2 * grid_factor * kmax));
}
}  // namespace

// ---------------------------------------------------------------------------

struct IteratedKernels::Impl {
  std::unique_ptr<Lattice> lattice;
  std::vector<std::vector<Compact>> levels;
  int d = 1;
};

IteratedKernels::IteratedKernels(const TorusSpec& spec, const NoiseParams& params, const Point& x0,
                                 const Point& x0p, double t_final, const ChaosConfig& cfg)
    : impl_(std::make_unique<Impl>()), n_max_(cfg.n_max) {
  spec.validate();
  if (cfg.n_max < 0 || cfg.kmax < 1 || cfg.time_nodes < 2)
    throw InvalidConfig("chaos config needs n_max >= 0, kmax >= 1, time_nodes >= 2");
  if (!(t_final > 0.0)) throw DomainError("L_n needs t > 0");
  const int d = spec.d;
  impl_->d = d;
  const std::vector<int> one = product_grid(spec, cfg.kmax, cfg.grid_factor);
  std::vector<int> dims = one;
  dims.insert(dims.end(), one.begin(), one.end());
  std::vector<double> lengths = spec.lengths;
  lengths.insert(lengths.end(), spec.lengths.begin(), spec.lengths.end());
  impl_->lattice = std::make_unique<Lattice>(dims, lengths, cfg.kmax);
  const Lattice& lat = *impl_->lattice;

  // G(z' - z) on the pair grid.
  Lattice single(one, spec.lengths, cfg.kmax);
  const std::vector<double> g = covariance_on_grid(spec, params, single);
  std::vector<double> mult(lat.real_size());
  const std::size_t half_axes = static_cast<std::size_t>(d);
  std::size_t per_point = 1;
  for (int n : one) per_point *= static_cast<std::size_t>(n);
  for (std::size_t flat = 0; flat < mult.size(); ++flat) {
    std::size_t za = flat / per_point, zb = flat % per_point;
    std::size_t gi = 0;
    std::array<std::size_t, 3> ia{}, ib{};
    for (std::size_t a = half_axes; a-- > 0;) {
      const auto n = static_cast<std::size_t>(one[a]);
      ia[a] = za % n;
      za /= n;
      ib[a] = zb % n;
      zb /= n;
    }
    for (std::size_t a = 0; a < half_axes; ++a) {
      const auto n = static_cast<std::size_t>(one[a]);
      gi = gi * n + (ib[a] + n - ia[a]) % n;
    }
    mult[flat] = g[gi];
  }

  std::vector<double> rates(lat.size());
  Compact phase(lat.size());
  const double inv_m0_sq = 1.0 / (spec.volume() * spec.volume());
  const Point a0 = spec.wrap(x0), a1 = spec.wrap(x0p);
  for (std::size_t e = 0; e < lat.size(); ++e) {
    rates[e] = 0.5 * (lat.lambda(e, 0, half_axes) + lat.lambda(e, half_axes, half_axes));
    double theta = 0.0;
    for (std::size_t a = 0; a < half_axes; ++a) {
      theta += kTwoPi * lat.wave[e][a] * a0[a] / spec.lengths[a];
      theta += kTwoPi * lat.wave[e][a + half_axes] * a1[a] / spec.lengths[a];
    }
    phase[e] = std::polar(inv_m0_sq, -theta);
  }
  auto level0 = [&](double t) {
    Compact c(lat.size());
    for (std::size_t e = 0; e < lat.size(); ++e) c[e] = std::exp(-rates[e] * t) * phase[e];
    return c;
  };
  const auto m_nodes = static_cast<std::size_t>(cfg.time_nodes);
  times_.resize(m_nodes + 1);
  for (std::size_t m = 0; m <= m_nodes; ++m) {
    const double r = static_cast<double>(m) / static_cast<double>(m_nodes);
    times_[m] = t_final * r * r;
  }
  impl_->levels = march(lat, rates, mult, level0, times_, cfg.n_max);
}

IteratedKernels::~IteratedKernels() = default;
IteratedKernels::IteratedKernels(IteratedKernels&&) noexcept = default;
IteratedKernels& IteratedKernels::operator=(IteratedKernels&&) noexcept = default;

std::size_t IteratedKernels::node(double t) const {
  std::size_t best = 0;
  for (std::size_t m = 1; m < times_.size(); ++m)
    if (std::abs(times_[m] - t) < std::abs(times_[best] - t)) best = m;
  return best;
}

double IteratedKernels::evaluate(int n, std::size_t node, const Point& x, const Point& xp) const {
  if (n < 0 || n > n_max_) throw DomainError("chaos level out of range");
  double pt[kMaxAxes] = {};
  for (int a = 0; a < impl_->d; ++a) {
    pt[a] = x[a];
    pt[a + impl_->d] = xp[a];
  }
  return impl_->lattice->evaluate(impl_->levels[static_cast<std::size_t>(n)].at(node), pt);
}

SeriesValue k_beta_truncated(const IteratedKernels& kernels, std::size_t node, const Point& x,
                             const Point& xp, double beta) {
  SeriesValue out;
  double b2n = 1.0;
  for (int n = 0; n <= kernels.n_max(); ++n) {
    out.terms.push_back(b2n * kernels.evaluate(n, node, x, xp));
    out.value += out.terms.back();
    b2n *= beta * beta;
  }
  if (out.terms.size() >= 2) {
    const double prev = out.terms[out.terms.size() - 2];
    const double last = out.terms.back();
    const double ratio = prev != 0.0 ? std::abs(last / prev) : 0.0;
    if (ratio >= 1.0)
      throw Nonconvergence("chaos terms stopped decreasing at n_max; raise n_max or reduce t beta^2",
                           ratio);
    out.tail = std::abs(last) * ratio / (1.0 - ratio);
  }
  return out;
}

UniformChaos uniform_second_moment(const TorusSpec& spec, const NoiseParams& params, double c,
                                   const std::vector<double>& times, int kmax, int n_max,
                                   double dt, int grid_factor) {
  spec.validate();
  if (times.empty()) throw InvalidConfig("no observation times");
  if (!(dt > 0.0)) throw InvalidConfig("chaos time step must be positive");
  const double t_max = *std::max_element(times.begin(), times.end());
  const auto steps = static_cast<std::size_t>(std::ceil(t_max / dt - 1e-9));
  std::vector<double> nodes(steps + 1);
  for (std::size_t m = 0; m <= steps; ++m) nodes[m] = static_cast<double>(m) * dt;

  const Lattice lat(product_grid(spec, kmax, grid_factor), spec.lengths, kmax);
  const std::vector<double> g = covariance_on_grid(spec, params, lat);
  std::vector<double> rates(lat.size());
  std::size_t zero = lat.size();
  for (std::size_t e = 0; e < lat.size(); ++e) {
    rates[e] = lat.lambda(e, 0, static_cast<std::size_t>(spec.d));
    if (rates[e] == 0.0) zero = e;
  }
  auto level0 = [&](double) {
    Compact c0(lat.size());
    c0[zero] = c * c;
    return c0;
  };
  const auto levels = march(lat, rates, g, level0, nodes, n_max);

  UniformChaos out;
  const double origin[kMaxAxes] = {};
  for (double t : times) {
    const auto m = static_cast<std::size_t>(std::llround(t / dt));
    if (std::abs(nodes[m] - t) > 1e-9 * std::max(1.0, t))
      throw InvalidConfig("observation time is not a multiple of the chaos time step");
    out.times.push_back(nodes[m]);
    std::vector<double> terms;
    double b2n = 1.0, total = 0.0;
    for (int n = 0; n <= n_max; ++n) {
      terms.push_back(b2n * lat.evaluate(levels[static_cast<std::size_t>(n)][m], origin));
      total += terms.back();
      b2n *= params.beta * params.beta;
    }
    double tail = 0.0;
    if (terms.size() >= 2 && terms[terms.size() - 2] != 0.0) {
      const double r = std::abs(terms.back() / terms[terms.size() - 2]);
      tail = r < 1.0 ? std::abs(terms.back()) * r / (1.0 - r) : std::numeric_limits<double>::infinity();
    }
    out.terms.push_back(terms);
    out.second_moment.push_back(total);
    out.tail.push_back(tail);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Singular pair integrals

struct SingularPairIntegral::Impl {
  std::unique_ptr<RealFft> fft;
};

namespace {
// Gauss-Legendre nodes and weights mapped to [-1/2, 1/2].
template <int N>
std::vector<std::pair<double, double>> legendre_rule() {
  using rule = boost::math::quadrature::gauss<double, N>;
  std::vector<std::pair<double, double>> r;
  const auto& x = rule::abscissa();
  const auto& w = rule::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.emplace_back(0.5 * x[i], 0.5 * w[i]);
    if (x[i] != 0.0) r.emplace_back(-0.5 * x[i], 0.5 * w[i]);
  }
  return r;
}

// int over the box [c - h/2, c + h/2] of |minimal image of w|^p, Gauss-Legendre
// with `order` points per axis.
double box_power_integral(const TorusSpec& spec, const Point& centre, const Point& h, double p,
                          int order) {
  static const auto rule3 = legendre_rule<3>();
  static const auto rule10 = legendre_rule<10>();
  static const auto rule12 = legendre_rule<12>();
  const auto& rule = order <= 3 ? rule3 : order <= 10 ? rule10 : rule12;
  const int d = spec.d;
  double sum = 0.0;
  std::array<std::size_t, 3> i{0, 0, 0};
  const std::size_t n = rule.size();
  const std::size_t n1 = d >= 2 ? n : 1, n2 = d >= 3 ? n : 1;
  for (i[0] = 0; i[0] < n; ++i[0])
    for (i[1] = 0; i[1] < n1; ++i[1])
      for (i[2] = 0; i[2] < n2; ++i[2]) {
        Point w{0.0, 0.0, 0.0};
        double wt = 1.0;
        for (int a = 0; a < d; ++a) {
          w[a] = centre[a] + h[a] * rule[i[a]].first;
          wt *= rule[i[a]].second * h[a];
        }
        const double r2 = spec.distance2(Point{0.0, 0.0, 0.0}, w);
        sum += wt * std::pow(r2, 0.5 * p);
      }
  return sum;
}

// int over [-h/2, h/2]^d of |w|^p, by self-similarity on a 3^d subdivision.
double central_cell_integral(int d, const Point& h, double p) {
  if (d == 1) return 2.0 * std::pow(0.5 * h[0], p + 1.0) / (p + 1.0);
  // Unit-aspect cells only scale exactly; anisotropic cells use a graded
  // sum of shells.
  const bool square = std::abs(h[0] - h[1]) < 1e-14 * h[0] &&
                      (d < 3 || std::abs(h[0] - h[2]) < 1e-14 * h[0]);
  TorusSpec big{d, std::vector<double>(static_cast<std::size_t>(d), 1e6)};
  if (square) {
    const Point sub{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    double outer = 0.0;
    std::array<int, 3> o{0, 0, 0};
    const int r1 = d >= 2 ? 1 : 0, r2 = d >= 3 ? 1 : 0;
    for (o[0] = -1; o[0] <= 1; ++o[0])
      for (o[1] = -r1; o[1] <= r1; ++o[1])
        for (o[2] = -r2; o[2] <= r2; ++o[2]) {
          if (o[0] == 0 && o[1] == 0 && o[2] == 0) continue;
          const Point c{o[0] / 3.0, o[1] / 3.0, o[2] / 3.0};
          outer += box_power_integral(big, c, sub, p, 12);
        }
    const double unit = outer / (1.0 - std::pow(3.0, -(p + d)));
    return unit * std::pow(h[0], p + d);
  }
  // Nested boxes shrinking by 3 until the remainder is negligible.
  double sum = 0.0;
  Point cur = h;
  for (int level = 0; level < 60; ++level) {
    const Point sub{cur[0] / 3.0, cur[1] / 3.0, cur[2] / 3.0};
    std::array<int, 3> o{0, 0, 0};
    const int r1 = d >= 2 ? 1 : 0, r2 = d >= 3 ? 1 : 0;
    for (o[0] = -1; o[0] <= 1; ++o[0])
      for (o[1] = -r1; o[1] <= r1; ++o[1])
        for (o[2] = -r2; o[2] <= r2; ++o[2]) {
          if (o[0] == 0 && o[1] == 0 && o[2] == 0) continue;
          const Point c{o[0] * sub[0], o[1] * sub[1], o[2] * sub[2]};
          sum += box_power_integral(big, c, sub, p, 12);
        }
    cur = sub;
  }
  return sum;
}
}  // namespace

SingularPairIntegral::SingularPairIntegral(const TorusSpec& spec, std::vector<int> points,
                                           double power)
    : impl_(std::make_unique<Impl>()), spec_(spec), points_(std::move(points)) {
  spec.validate();
  if (points_.size() != static_cast<std::size_t>(spec.d))
    throw InvalidConfig("grid needs one size per axis");
  if (!(power + spec.d > 0.0)) throw DomainError("power weight is not locally integrable");
  impl_->fft = std::make_unique<RealFft>(points_);
  Point h{1.0, 1.0, 1.0};
  cell_volume_ = 1.0;
  for (int a = 0; a < spec.d; ++a) {
    h[a] = spec.length(a) / points_[static_cast<std::size_t>(a)];
    cell_volume_ *= h[a];
  }
  const std::size_t n = impl_->fft->real_size();
  weights_.resize(n);
  const double centre_w = central_cell_integral(spec.d, h, power);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t rem = flat;
    Point c{0.0, 0.0, 0.0};
    int reach = 0;
    for (int a = spec.d; a-- > 0;) {
      const int na = points_[static_cast<std::size_t>(a)];
      int j = static_cast<int>(rem % static_cast<std::size_t>(na));
      rem /= static_cast<std::size_t>(na);
      if (j > na / 2) j -= na;
      c[a] = j * h[a];
      reach = std::max(reach, std::abs(j));
    }
    if (reach == 0) {
      weights_[flat] = centre_w;
    } else if (spec.d == 1 && 2 * reach < points_[0]) {
      const double lo = std::abs(c[0]) - 0.5 * h[0], hi = std::abs(c[0]) + 0.5 * h[0];
      weights_[flat] = (std::pow(hi, power + 1.0) - std::pow(lo, power + 1.0)) / (power + 1.0);
    } else {
      weights_[flat] = box_power_integral(spec, c, h, power, reach <= 4 ? 10 : 3);
    }
  }
}

SingularPairIntegral::~SingularPairIntegral() = default;

Point SingularPairIntegral::grid_point(std::size_t flat) const {
  Point x{0.0, 0.0, 0.0};
  for (int a = spec_.d; a-- > 0;) {
    const auto na = static_cast<std::size_t>(points_[static_cast<std::size_t>(a)]);
    x[a] = static_cast<double>(flat % na) * spec_.length(a) / static_cast<double>(na);
    flat /= na;
  }
  return x;
}

double SingularPairIntegral::integrate(const std::vector<double>& u,
                                       const std::vector<double>& v) const {
  const RealFft& fft = *impl_->fft;
  std::vector<cplx> uh(fft.complex_size()), vh(fft.complex_size()), scratch(fft.complex_size());
  fft.forward(u.data(), uh.data());
  fft.forward(v.data(), vh.data());
  for (std::size_t k = 0; k < uh.size(); ++k) uh[k] = std::conj(uh[k]) * vh[k];
  std::vector<double> corr(fft.real_size());
  fft.backward(uh.data(), corr.data(), scratch.data());
  const double scale = cell_volume_ / static_cast<double>(fft.real_size());
  double s = 0.0;
  for (std::size_t m = 0; m < corr.size(); ++m) s += corr[m] * weights_[m];
  return s * scale;
}

double SingularPairIntegral::total_weight() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

// ---------------------------------------------------------------------------
// k1, k2

namespace {
std::vector<int> resolving_grid(const TorusSpec& spec, double sigma, const BoundConfig& cfg) {
  std::vector<int> pts;
  for (int a = 0; a < spec.d; ++a) {
    int n = static_cast<int>(std::ceil(cfg.points_per_width * spec.length(a) / sigma));
    n = std::max(n, cfg.min_points);
    n += n % 2;
    pts.push_back(n);
  }
  return pts;
}

Point random_point(const TorusSpec& spec, CounterRng& rng) {
  Point p{0.0, 0.0, 0.0};
  for (int i = 0; i < spec.d; ++i) p[i] = rng.uniform() * spec.length(i);
  return p;
}

void check_power_regime(const TorusSpec& spec, const NoiseParams& params) {
  if (!(params.alpha < 0.5 * spec.d)) throw DomainError("bound functions need alpha < d/2");
}
}  // namespace

BoundSample k1(const TorusSpec& spec, const NoiseParams& params, double s, const BoundConfig& cfg) {
  check_power_regime(spec, params);
  if (!(s > 0.0)) throw DomainError("k1 needs s > 0");
  const SingularPairIntegral quad(spec, resolving_grid(spec, std::sqrt(s), cfg),
                                  2.0 * params.alpha - spec.d);
  auto field = [&](const Point& x) {
    std::vector<double> u(quad.size());
    for (std::size_t j = 0; j < u.size(); ++j)
      u[j] = gaussian_bound_kernel(spec, s, x, quad.grid_point(j), cfg.c_heat);
    return u;
  };
  BoundSample out;
  const auto u0 = field(Point{0.0, 0.0, 0.0});
  out.diagonal_value = quad.integrate(u0, u0);
  out.value = out.diagonal_value;
  for (std::size_t i = 0; i < cfg.sup_samples; ++i) {
    CounterRng rng(stream_key(cfg.seed, i, 0x6b31));
    const auto u = field(random_point(spec, rng));
    const auto v = field(random_point(spec, rng));
    out.value = std::max(out.value, quad.integrate(u, v));
  }
  return out;
}

double bridge_gaussian(const TorusSpec& spec, double t, double s, const Point& x0, const Point& x,
                       const Point& z) {
  if (!(s > 0.0 && t > s)) throw DomainError("bridge weight needs 0 < s < t");
  const double var = s * (t - s) / t;
  // Concentrates a fraction s/t of the way from x towards x0.
  const double f = bridge_functional(spec, s / t, z, x, x0);
  return std::pow(kTwoPi * var, -0.5 * spec.d) * std::exp(-f / (2.0 * var));
}

BoundSample k2(const TorusSpec& spec, const NoiseParams& params, double s, const BoundConfig& cfg) {
  check_power_regime(spec, params);
  if (!(s > 0.0)) throw DomainError("k2 needs s > 0");
  const SingularPairIntegral quad(spec, resolving_grid(spec, std::sqrt(0.5 * s), cfg),
                                  2.0 * params.alpha - spec.d);
  auto field = [&](double t, const Point& x0, const Point& x) {
    std::vector<double> u(quad.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
      const Point z = quad.grid_point(j);
      u[j] = bridge_gaussian(spec, t, s, x0, x, z) +
             gaussian_term(spec, t - s, spec.distance2(x0, z)) +
             gaussian_term(spec, s, spec.distance2(z, x)) + cfg.c_heat;
    }
    return u;
  };
  BoundSample out;
  out.value = -std::numeric_limits<double>::infinity();
  const std::size_t nt = std::max<std::size_t>(cfg.t_points, 1);
  for (std::size_t it = 0; it < nt; ++it) {
    const double t = nt == 1 ? 2.0 * s
                             : 2.0 * s * std::pow(1e3, static_cast<double>(it) / (nt - 1.0));
    auto consider = [&](double v) {
      if (v > out.value) {
        out.value = v;
        out.best_t = t;
      }
    };
    const Point o{0.0, 0.0, 0.0};
    const auto u0 = field(t, o, o);
    const double diag = quad.integrate(u0, u0);
    out.diagonal_value = std::max(out.diagonal_value, diag);
    consider(diag);
    for (std::size_t i = 0; i < cfg.sup_samples; ++i) {
      CounterRng rng(stream_key(cfg.seed, i, 0x6b32));
      const Point x0 = random_point(spec, rng), x = random_point(spec, rng);
      const auto u = field(t, x0, x);
      // Coincident pairs x0 = x0', x = x' and a fully random tuple.
      consider(quad.integrate(u, u));
      const Point y0 = random_point(spec, rng), y = random_point(spec, rng);
      consider(quad.integrate(u, field(t, y0, y)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tables and fits

PowerLawFit fit_offset_power_law(const std::vector<double>& s, const std::vector<double>& k) {
  if (s.size() != k.size() || s.size() < 3) throw InvalidConfig("power-law fit needs >= 3 samples");
  for (double v : k)
    if (!(v > 0.0)) throw DomainError("power-law fit needs positive values");
  std::vector<double> ls, lk;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ls.push_back(std::log(s[i]));
    lk.push_back(std::log(k[i]));
  }
  PowerLawFit best;
  best.loglog_slope = least_squares_line(ls, lk).slope;
  // For fixed e, A and B solve a relative least-squares problem; e is scanned
  // then refined by golden section.
  auto solve = [&](double e, double& a, double& b) {
    double saa = 0, sab = 0, sbb = 0, sa = 0, sb = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double w = 1.0 / (k[i] * k[i]);
      const double p = std::pow(s[i], e);
      saa += w;
      sab += w * p;
      sbb += w * p * p;
      sa += w * k[i];
      sb += w * k[i] * p;
    }
    const double det = saa * sbb - sab * sab;
    a = (sa * sbb - sb * sab) / det;
    b = (saa * sb - sab * sa) / det;
    if (!(det > 0.0) || a < 0.0 || b < 0.0) {
      // Best single-term fits.
      const double a_only = sa / saa, b_only = sb / sbb;
      double ra = 0, rb = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        ra += std::pow(std::log(k[i] / a_only), 2);
        rb += std::pow(std::log(k[i] / (b_only * std::pow(s[i], e))), 2);
      }
      if (ra <= rb) {
        a = a_only;
        b = 0.0;
      } else {
        a = 0.0;
        b = b_only;
      }
    }
    double r = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double m = a + b * std::pow(s[i], e);
      r += std::pow(lk[i] - std::log(m), 2);
    }
    return r;
  };
  double e_best = -0.5, r_best = std::numeric_limits<double>::infinity();
  const int scan = 600;
  for (int i = 0; i <= scan; ++i) {
    const double e = -3.0 + 2.999 * i / scan;
    double a, b;
    const double r = solve(e, a, b);
    if (r < r_best) {
      r_best = r;
      e_best = e;
    }
  }
  double lo = std::max(-3.0, e_best - 0.01), hi = std::min(-1e-4, e_best + 0.01);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
    double a, b;
    if (solve(m1, a, b) < solve(m2, a, b)) hi = m2;
    else lo = m1;
  }
  best.exponent = 0.5 * (lo + hi);
  const double r = solve(best.exponent, best.offset, best.coefficient);
  best.rms_log_residual = std::sqrt(r / static_cast<double>(s.size()));
  if (best.coefficient == 0.0) best.exponent = 0.0;
  return best;
}

double BoundFunctionTable::value(double x) const {
  if (s.empty()) throw InvalidConfig("empty bound-function table");
  if (s.size() == 1) return k[0];
  if (x <= s.front()) {
    const double e = std::log(k[1] / k[0]) / std::log(s[1] / s[0]);
    return k[0] * std::pow(x / s[0], e);
  }
  if (x >= s.back()) return k.back();
  const auto it = std::upper_bound(s.begin(), s.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - s.begin()) - 1;
  const double w = std::log(x / s[i]) / std::log(s[i + 1] / s[i]);
  return std::exp((1.0 - w) * std::log(k[i]) + w * std::log(k[i + 1]));
}

void BoundFunctionTable::refit() {
  std::vector<double> fs, f1, f2, fk;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] > fit_s_max * (1.0 + 1e-12)) continue;
    fs.push_back(s[i]);
    fk.push_back(k[i]);
    if (!k1.empty()) f1.push_back(k1[i]);
    if (!k2.empty()) f2.push_back(k2[i]);
  }
  if (fs.size() >= 3) {
    fit_k = fit_offset_power_law(fs, fk);
    if (!f1.empty()) fit_k1 = fit_offset_power_law(fs, f1);
    if (!f2.empty()) fit_k2 = fit_offset_power_law(fs, f2);
  }
  bound_constant = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    bound_constant = std::max(bound_constant, k[i] / (1.0 + std::pow(s[i], fit_k.exponent)));
}

BoundFunctionTable BoundFunctionTable::from_samples(std::vector<double> s, std::vector<double> k) {
  BoundFunctionTable t;
  t.s = std::move(s);
  t.k = std::move(k);
  for (std::size_t i = 1; i < t.s.size(); ++i)
    if (!(t.s[i] > t.s[i - 1])) throw InvalidConfig("bound-function s grid must increase");
  t.refit();
  return t;
}

BoundFunctionTable build_bound_table(const TorusSpec& spec, const NoiseParams& params,
                                     const std::vector<double>& s_grid, const BoundConfig& cfg) {
  BoundFunctionTable t;
  t.s = s_grid;
  for (double s : s_grid) {
    t.k1.push_back(k1(spec, params, s, cfg).value);
    t.k2.push_back(k2(spec, params, s, cfg).value);
    t.k.push_back(t.k1.back() + t.k2.back());
  }
  t.refit();
  return t;
}

namespace {
// int_a^b k(s) g(s) ds for the interpolated table, split at the samples.
template <class G>
double integrate_table(const BoundFunctionTable& table, double a, double b, G&& g,
                       double rate_hint = 0.0) {
  using boost::math::quadrature::gauss;
  if (!(b > a)) return 0.0;
  std::vector<double> cuts{a};
  for (double x : table.s)
    if (x > a && x < b) cuts.push_back(x);
  cuts.push_back(b);
  auto f = [&](double x) { return table.value(x) * g(x); };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    if (lo < table.s.front()) {
      boost::math::quadrature::tanh_sinh<double> ts;
      total += ts.integrate(f, lo, hi);
      continue;
    }
    const int pieces = std::clamp(static_cast<int>(std::ceil(rate_hint * (hi - lo))), 1, 2000);
    const double w = (hi - lo) / pieces;
    for (int p = 0; p < pieces; ++p) total += gauss<double, 10>::integrate(f, lo + p * w, lo + (p + 1) * w);
  }
  return total;
}

// Hat-function weights of k e^{-gamma s} on the grid s_i = i dt.
void hat_weights(const BoundFunctionTable& table, double dt, std::size_t steps, double gamma,
                 std::vector<double>& left, std::vector<double>& right) {
  left.assign(steps + 1, 0.0);
  right.assign(steps + 1, 0.0);
  for (std::size_t i = 0; i < steps; ++i) {
    const double a = static_cast<double>(i) * dt, b = a + dt;
    right[i] = integrate_table(
        table, a, b, [&](double x) { return (b - x) / dt * std::exp(-gamma * x); }, gamma);
    left[i + 1] = integrate_table(
        table, a, b, [&](double x) { return (x - a) / dt * std::exp(-gamma * x); }, gamma);
  }
}

// One convolution level: out(t_j) = sum_i w_i^{(j)} prev(t_{j-i}).
void convolve(const std::vector<double>& prev, const std::vector<double>& left,
              const std::vector<double>& right, std::vector<double>& out) {
  const std::size_t n = prev.size();
  out.assign(n, 0.0);
  for (std::size_t j = 1; j < n; ++j) {
    double s = right[0] * prev[j] + left[j] * prev[0];
    for (std::size_t i = 1; i < j; ++i) s += (left[i] + right[i]) * prev[j - i];
    out[j] = s;
  }
}
}  // namespace

std::vector<std::vector<double>> h_n_table(const BoundFunctionTable& table, int n_max, double dt,
                                           std::size_t steps) {
  if (n_max < 1 || !(dt > 0.0) || steps < 1) throw InvalidConfig("h_n table needs n_max, dt, steps > 0");
  std::vector<double> left, right;
  hat_weights(table, dt, steps, 0.0, left, right);
  std::vector<std::vector<double>> h(static_cast<std::size_t>(n_max) + 1);
  h[0].assign(steps + 1, 1.0);
  for (int n = 1; n <= n_max; ++n) {
    convolve(h[static_cast<std::size_t>(n) - 1], left, right, h[static_cast<std::size_t>(n)]);
    const auto& row = h[static_cast<std::size_t>(n)];
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] < row[j - 1] - 1e-10 * std::abs(row[j - 1]))
        throw InternalConsistency("h_" + std::to_string(n) + " decreases at t = " +
                                  std::to_string(static_cast<double>(j) * dt));
  }
  return h;
}

double laplace_transform(const BoundFunctionTable& table, double gamma) {
  if (!(gamma > 0.0)) return std::numeric_limits<double>::infinity();
  const double last = table.s.back();
  double v = integrate_table(table, 0.0, last, [&](double x) { return std::exp(-gamma * x); }, gamma);
  v += table.k.back() * std::exp(-gamma * last) / gamma;
  return v;
}

double theta_threshold(const BoundFunctionTable& table, double lambda) {
  if (table.s.size() >= 2) {
    const double e = std::log(table.k[1] / table.k[0]) / std::log(table.s[1] / table.s[0]);
    if (!(e > -1.0))
      throw DalangViolated("bound function is not integrable at 0: Laplace transform diverges");
  }
  if (!(lambda > 0.0)) return 0.0;
  const double target = 1.0 / (lambda * lambda);
  double lo = 1.0, hi = 1.0;
  if (laplace_transform(table, 1.0) < target) {
    while (laplace_transform(table, lo) < target) {
      lo *= 0.5;
      if (lo < 1e-300) return 0.0;
    }
    hi = 2.0 * lo;
  } else {
    while (laplace_transform(table, hi) >= target) {
      hi *= 2.0;
      if (hi > 1e15) throw DalangViolated("Laplace transform stays above 1/lambda^2");
    }
    lo = 0.5 * hi;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (laplace_transform(table, mid) < target) hi = mid;
    else lo = mid;
  }
  return hi;
}

GrowthBoundCheck check_growth_bound(const BoundFunctionTable& table, double lambda, double t_end,
                                    double fit_until, double dt) {
  GrowthBoundCheck out;
  out.theta = theta_threshold(table, lambda);
  out.rate = 1.1 * out.theta;
  out.fit_until = fit_until;
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  // Work with e^{-theta t} h_n, which satisfies the same recursion with
  // k(s) e^{-theta s}; the sums then stay O(1).
  const double gamma = out.theta;
  std::vector<double> left, right;
  hat_weights(table, dt, steps, gamma, left, right);
  std::vector<double> term(steps + 1), next, sum(steps + 1);
  for (std::size_t j = 0; j <= steps; ++j) term[j] = std::exp(-gamma * dt * static_cast<double>(j));
  sum = term;
  const double l2 = lambda * lambda;
  std::size_t n = 0;
  for (; n < 200000; ++n) {
    convolve(term, left, right, next);
    double tmax = 0.0, smin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= steps; ++j) {
      next[j] *= l2;
      sum[j] += next[j];
      tmax = std::max(tmax, next[j]);
      smin = std::min(smin, sum[j]);
    }
    term.swap(next);
    if (tmax < 1e-17 * smin) break;
  }
  if (n == 200000) throw Nonconvergence("H_lambda partial sums did not settle", 1.0);
  out.terms = n + 1;
  out.t.resize(steps + 1);
  out.log_h.resize(steps + 1);
  double c = 0.0;
  for (std::size_t j = 0; j <= steps; ++j) {
    const double t = dt * static_cast<double>(j);
    out.t[j] = t;
    out.log_h[j] = std::log(sum[j]) + gamma * t;
    if (t <= fit_until + 1e-12) c = std::max(c, out.log_h[j] - out.rate * t);
  }
  out.constant = std::exp(c);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j <= steps; ++j) worst = std::max(worst, out.log_h[j] - out.rate * out.t[j] - c);
  out.max_ratio = std::exp(worst);
  out.holds = worst <= 1e-12;
  return out;
}

IteratedBoundFit fit_iterated_bound(const TorusSpec& spec, const NoiseParams& params,
                                    const BoundFunctionTable& table, double c_heat,
                                    std::size_t n_tuples, std::uint64_t seed, double t_lo,
                                    double t_hi, const ChaosConfig& cfg) {
  if (!(t_lo > 0.0 && t_hi >= t_lo)) throw InvalidConfig("tuple times need 0 < t_lo <= t_hi");
  if (cfg.n_max < 1) throw InvalidConfig("chaos.n_max must be >= 1");
  const std::size_t h_steps = 2000;
  const double h_dt = t_hi / static_cast<double>(h_steps);
  const auto h = h_n_table(table, cfg.n_max, h_dt, h_steps);
  auto h_at = [&](int n, double t) {
    const double u = std::min(t / h_dt, static_cast<double>(h_steps));
    const auto j = std::min(static_cast<std::size_t>(u), h_steps - 1);
    const double w = u - static_cast<double>(j);
    return (1.0 - w) * h[static_cast<std::size_t>(n)][j] + w * h[static_cast<std::size_t>(n)][j + 1];
  };
  IteratedBoundFit fit;
  for (std::size_t i = 0; i < n_tuples; ++i) {
    CounterRng rng(stream_key(seed, i, 0x1b0));
    IteratedBoundTuple tp;
    tp.x0 = random_point(spec, rng);
    tp.x = random_point(spec, rng);
    tp.x0p = random_point(spec, rng);
    tp.xp = random_point(spec, rng);
    // The per-tuple constant peaks at small t, so t follows the additive
    // golden-ratio sequence from t_lo: every sample covers the lower edge.
    const double frac = std::fmod(static_cast<double>(i) * 0.6180339887498949, 1.0);
    tp.t = t_lo + (t_hi - t_lo) * frac;
    IteratedKernels kernels(spec, params, tp.x0, tp.x0p, tp.t, cfg);
    const std::size_t m = kernels.times().size() - 1;
    const double gg = gaussian_bound_kernel(spec, tp.t, tp.x0, tp.x, c_heat) *
                      gaussian_bound_kernel(spec, tp.t, tp.x0p, tp.xp, c_heat);
    for (int n = 0; n <= cfg.n_max; ++n) {
      tp.kernel.push_back(kernels.evaluate(n, m, tp.x, tp.xp));
      tp.envelope.push_back(gg * h_at(n, tp.t));
      if (n >= 1) {
        const double r = std::max(tp.kernel.back(), 0.0) / (std::ldexp(1.0, n) * tp.envelope.back());
        tp.constant.push_back(std::pow(r, 1.0 / n));
      }
    }
    fit.tuples.push_back(std::move(tp));
  }
  fit.constant = iterated_bound_constant(fit, fit.tuples.size());
  return fit;
}

double iterated_bound_constant(const IteratedBoundFit& fit, std::size_t n) {
  double c = 0.0;
  for (std::size_t i = 0; i < std::min(n, fit.tuples.size()); ++i)
    for (double v : fit.tuples[i].constant) c = std::max(c, v);
  return c;
}

}  // namespace pamlab
