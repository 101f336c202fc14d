#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "pamlab/fft.hpp"
#include "pamlab/torus.hpp"

namespace pamlab {

using Wavevector = std::array<int, 3>;

struct ModeIndex {
  Wavevector k{0, 0, 0};
  bool sine = false;
};

struct Mode {
  ModeIndex index;
  double lambda = 0.0;
  double norm = 0.0;  // sup of |phi_n|: 1/sqrt(m0) or sqrt(2/m0)
};

double eigenvalue(const TorusSpec& spec, const Wavevector& k);

// Truncated Laplace-Beltrami eigenbasis on a flat torus: every k in the box
// |k_i| <= kmax, one cosine and one sine mode per +-k pair, sorted by
// eigenvalue.
class SpectralBasis {
 public:
  SpectralBasis(TorusSpec spec, int kmax);

  const TorusSpec& spec() const { return spec_; }
  int kmax() const { return kmax_; }
  std::size_t size() const { return modes_.size(); }
  const std::vector<Mode>& modes() const { return modes_; }
  double lambda(std::size_t n) const { return modes_[n].lambda; }

  double eigenfunction(std::size_t n, const Point& x) const;
  // out[n] = phi_n(x) for every mode.
  void evaluate_all(const Point& x, std::span<double> out) const;
  // e^{-lambda_n t / 2}
  std::vector<double> heat_factors(double t) const;

 private:
  TorusSpec spec_;
  int kmax_;
  std::vector<Mode> modes_;
};

// Iterates the half lattice {k != 0, |k_i| <= kmax, first nonzero k_i > 0}
// and returns (2/m0) * sum weight(lambda_k) cos(2 pi k . delta / L), i.e. the
// non-constant part of sum_n weight(lambda_n) phi_n(x) phi_n(y) with
// delta = y - x.
template <class Weight>
double half_lattice_cosine_sum(const TorusSpec& spec, int kmax, const Point& delta,
                               Weight&& weight);

double heat_kernel(const TorusSpec& spec, int kmax, double t, const Point& x, const Point& y);
double heat_kernel(const SpectralBasis& basis, double t, const Point& x, const Point& y);

// Wrapped-Gaussian lattice sum over |v_i| <= n_images. Throws ToleranceNotMet
// when the outermost shell could contribute more than 1e-14.
double heat_kernel_images(const TorusSpec& spec, double t, const Point& x, const Point& y,
                          int n_images);
int images_required(const TorusSpec& spec, double t, double tol = 1e-14);
double heat_kernel_images(const TorusSpec& spec, double t, const Point& x, const Point& y);

double gaussian_term(const TorusSpec& spec, double t, double dist2);
double gaussian_bound_kernel(const TorusSpec& spec, double t, const Point& x, const Point& y,
                             double c_heat);

struct HeatConstantFit {
  double c_heat = 0.0;
  double sample_max = 0.0;  // largest ratio seen in the sample
  double large_time_limit = 0.0;
  std::size_t samples = 0;
};

// Smallest C with P_t <= Gaussian + C (t ^ 1) over a random (t, x, y) sample
// plus a grid of t against per-axis offsets up to the cut locus,
// t log-uniform in [t_min, t_max]; the t -> infinity limit 1/m0 is included.
HeatConstantFit fit_heat_constant(const TorusSpec& spec, std::size_t n_samples,
                                  std::uint64_t seed, double t_min = 1e-3, double t_max = 10.0);
// Largest P_t - G_t over a fresh sample; <= 0 means the bound holds.
double heat_bound_excess(const TorusSpec& spec, double c_heat, std::size_t n_samples,
                         std::uint64_t seed, double t_min = 1e-3, double t_max = 10.0);

struct SpectralField {
  std::shared_ptr<const SpectralBasis> basis;
  std::vector<double> coeffs;

  double evaluate(const Point& x) const;
  double norm2() const;
};

// Heat flow in coefficient space: a_n <- e^{-lambda_n t/2} a_n.
void heat_flow(const SpectralBasis& basis, double t, std::span<double> coeffs);

// Uniform tensor grid with 2 * grid_factor * kmax points per axis (at least
// 4), used for pointwise products.
class GridTransform {
 public:
  GridTransform(std::shared_ptr<const SpectralBasis> basis, int grid_factor = 2);

  const SpectralBasis& basis() const { return *basis_; }
  int points(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
  std::size_t grid_size() const { return fft_.real_size(); }
  Point grid_point(std::size_t flat) const;
  double cell_volume() const { return cell_volume_; }

  struct Workspace {
    std::vector<std::complex<double>> spectrum;
    std::vector<std::complex<double>> scratch;
  };
  Workspace workspace() const;

  void synthesize(std::span<const double> coeffs, std::span<double> grid, Workspace& ws) const;
  // Projection of grid values onto the truncated basis (exact for
  // trigonometric polynomials of degree < points - kmax).
  void analyze(std::span<const double> grid, std::span<double> coeffs, Workspace& ws) const;

 private:
  struct Slot {
    std::size_t index = 0;
    bool conj = false;
    std::size_t mirror = 0;
    bool has_mirror = false;
  };
  std::shared_ptr<const SpectralBasis> basis_;
  std::vector<int> dims_;
  RealFft fft_;
  std::vector<Slot> slots_;
  double cell_volume_ = 0.0;
};

// ---------------------------------------------------------------------------

template <class Weight>
double half_lattice_cosine_sum(const TorusSpec& spec, int kmax, const Point& delta,
                               Weight&& weight) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double sum = 0.0;
  if (spec.d == 1) {
    const double theta = two_pi * delta[0] / spec.length(0);
    const std::complex<double> step = std::polar(1.0, theta);
    std::complex<double> z = 1.0;
    for (int k = 1; k <= kmax; ++k) {
      if ((k & 255) == 0) {
        z = std::polar(1.0, theta * k);
      } else {
        z *= step;
      }
      const double q = two_pi * k / spec.length(0);
      sum += weight(q * q) * z.real();
    }
  } else {
    const std::size_t width = static_cast<std::size_t>(kmax) + 1;
    std::vector<std::complex<double>> table(3 * width);
    std::array<double, 3> scale{};
    for (int a = 0; a < spec.d; ++a) {
      const double theta = two_pi * delta[a] / spec.length(a);
      for (int k = 0; k <= kmax; ++k) table[a * width + k] = std::polar(1.0, theta * k);
      scale[a] = (two_pi / spec.length(a)) * (two_pi / spec.length(a));
    }
    auto phase = [&](int a, int k) {
      const auto& z = table[a * width + static_cast<std::size_t>(k < 0 ? -k : k)];
      return k < 0 ? std::conj(z) : z;
    };
    const int k3max = spec.d == 3 ? kmax : 0;
    for (int k1 = 0; k1 <= kmax; ++k1) {
      for (int k2 = (k1 == 0 ? 0 : -kmax); k2 <= kmax; ++k2) {
        const std::complex<double> z12 = phase(0, k1) * phase(1, k2);
        const double l12 = scale[0] * k1 * k1 + scale[1] * k2 * k2;
        const int k3lo = (k1 == 0 && k2 == 0) ? 1 : -k3max;
        if (spec.d == 2) {
          if (k1 == 0 && k2 == 0) continue;
          sum += weight(l12) * z12.real();
          continue;
        }
        for (int k3 = k3lo; k3 <= k3max; ++k3) {
          const double lam = l12 + scale[2] * k3 * k3;
          sum += weight(lam) * (z12 * phase(2, k3)).real();
        }
      }
    }
  }
  return 2.0 * sum / spec.volume();
}

}  // namespace pamlab
