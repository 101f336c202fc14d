#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "pamlab/covariance.hpp"
#include "pamlab/torus.hpp"

namespace pamlab {

struct ChaosConfig {
  int n_max = 3;
  int kmax = 32;         // Galerkin truncation of heat kernels and covariance
  int grid_factor = 2;   // product grid has 2 * grid_factor * kmax points per axis
  int time_nodes = 200;  // graded nodes t (m / M)^2 per march
};

// Iterated kernels L_n(t, x0, x, x0', x') for fixed starting points, all
// levels n <= n_max and all (x, x'), on the graded time grid up to t_final.
// Heat kernels and G_{alpha,rho} are truncated to |k_i| <= kmax; the source
// of each level is linear in time between nodes and the heat flow is exact.
class IteratedKernels {
 public:
  IteratedKernels(const TorusSpec& spec, const NoiseParams& params, const Point& x0,
                  const Point& x0p, double t_final, const ChaosConfig& cfg = {});
  ~IteratedKernels();
  IteratedKernels(IteratedKernels&&) noexcept;
  IteratedKernels& operator=(IteratedKernels&&) noexcept;

  const std::vector<double>& times() const { return times_; }
  int n_max() const { return n_max_; }
  // Index of the node nearest to t.
  std::size_t node(double t) const;
  double evaluate(int n, std::size_t node, const Point& x, const Point& xp) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::vector<double> times_;
  int n_max_ = 0;
};

struct SeriesValue {
  double value = 0.0;
  double tail = 0.0;
  std::vector<double> terms;  // beta^{2n} L_n
};

// sum_{n <= n_max} beta^{2n} L_n with a geometric tail from the last ratio;
// throws Nonconvergence when that ratio is >= 1.
SeriesValue k_beta_truncated(const IteratedKernels& kernels, std::size_t node, const Point& x,
                             const Point& xp, double beta);

// Second moment for uniform initial data c: E[u(t,x)^2] = sum_n beta^{2n}
// l_n(t, 0), where l_n(t, w) = c^2 iint L_n(t, z0, z, z0', z + w) dz0 dz0'
// depends on the separation only. Uses the same Galerkin truncation as the
// solver with the given kmax.
struct UniformChaos {
  std::vector<double> times;
  // terms[i][n] = beta^{2n} l_n(times[i], 0)
  std::vector<std::vector<double>> terms;
  std::vector<double> second_moment;
  std::vector<double> tail;  // geometric tail estimate of the omitted levels
};
UniformChaos uniform_second_moment(const TorusSpec& spec, const NoiseParams& params, double c,
                                   const std::vector<double>& times, int kmax, int n_max,
                                   double dt, int grid_factor = 2);

// ---------------------------------------------------------------------------
// Bound functions

struct BoundConfig {
  double c_heat = 0.0;           // C_H, normally from fit_heat_constant
  std::size_t sup_samples = 8;   // random argument tuples besides the structured ones
  std::size_t t_points = 7;      // log grid of t in [2s, 2000 s] for k2
  double points_per_width = 4.0; // grid points per Gaussian standard deviation
  int min_points = 64;
  std::uint64_t seed = 1;
};

struct BoundSample {
  double value = 0.0;
  double diagonal_value = 0.0;  // x = x' (k1) or all four points equal (k2)
  double best_t = 0.0;          // k2 only
};

// sup_{x,x'} iint G_s(x,z) G_s(x',z') d(z,z')^{2 alpha - d} over sampled pairs
// plus x = x'.
BoundSample k1(const TorusSpec& spec, const NoiseParams& params, double s, const BoundConfig& cfg);

// sup over a log grid of t >= 2s and sampled tuples of iint R d^{2 alpha - d},
// R = (Xi + f + C_H)(Xi' + f' + C_H). A lower bound on the true sup.
BoundSample k2(const TorusSpec& spec, const NoiseParams& params, double s, const BoundConfig& cfg);

// Xi_{t,x0,x}(s, z): the Gaussian part of the bridge weight.
double bridge_gaussian(const TorusSpec& spec, double t, double s, const Point& x0, const Point& x,
                       const Point& z);

// int_{M x M} u(z) v(z') d(z, z')^p dz dz' for u, v sampled on the uniform
// grid with `points` per axis. Cells near the diagonal use exact cell
// integrals of the power weight.
class SingularPairIntegral {
 public:
  SingularPairIntegral(const TorusSpec& spec, std::vector<int> points, double power);
  ~SingularPairIntegral();

  const std::vector<int>& points() const { return points_; }
  std::size_t size() const { return weights_.size(); }
  Point grid_point(std::size_t flat) const;
  double integrate(const std::vector<double>& u, const std::vector<double>& v) const;
  // int_M d(0, w)^p dw from the same weights.
  double total_weight() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  TorusSpec spec_;
  std::vector<int> points_;
  std::vector<double> weights_;
  double cell_volume_ = 0.0;
};

// Exponent of the singular part: least squares of log k = log(A + B s^e)
// with A, B >= 0 over the given samples.
struct PowerLawFit {
  double exponent = 0.0;
  double offset = 0.0;       // A
  double coefficient = 0.0;  // B
  double loglog_slope = 0.0; // plain log-log slope, for reference
  double rms_log_residual = 0.0;
};
PowerLawFit fit_offset_power_law(const std::vector<double>& s, const std::vector<double>& k);

struct BoundFunctionTable {
  std::vector<double> s;
  std::vector<double> k1;
  std::vector<double> k2;
  std::vector<double> k;  // k1 + k2
  // Fits over s <= fit_s_max.
  double fit_s_max = 1e-2;
  PowerLawFit fit_k1, fit_k2, fit_k;
  // Smallest C with k(s) <= C (1 + s^e) on the samples, e = fit_k.exponent.
  double bound_constant = 0.0;

  // Log-log interpolation; below the first sample the first-interval slope
  // is extended, above the last the value is held constant.
  double value(double s) const;
  void refit();

  static BoundFunctionTable from_samples(std::vector<double> s, std::vector<double> k);
};

BoundFunctionTable build_bound_table(const TorusSpec& spec, const NoiseParams& params,
                                     const std::vector<double>& s_grid, const BoundConfig& cfg);

// h_1 = int_0^t k, h_n = int_0^t h_{n-1}(t-s) k(s) ds on a uniform grid from
// 0 with step dt; h_0 = 1. Product trapezoid: h_{n-1} is linear between
// nodes and k is integrated exactly against the hat functions. Throws
// InternalConsistency if some h_n decreases by more than 1e-10 relative.
// Returns rows n = 0..n_max.
std::vector<std::vector<double>> h_n_table(const BoundFunctionTable& table, int n_max, double dt,
                                           std::size_t steps);

// Laplace transform int_0^inf e^{-gamma t} k(t) dt.
double laplace_transform(const BoundFunctionTable& table, double gamma);

// theta = inf{gamma > 0 : Laplace(gamma) < 1 / lambda^2}.
double theta_threshold(const BoundFunctionTable& table, double lambda);

struct GrowthBoundCheck {
  double theta = 0.0;
  double rate = 0.0;        // 1.1 theta
  double constant = 0.0;    // C fitted on [0, fit_until]
  double fit_until = 0.0;
  double max_ratio = 0.0;   // max H(t) / (C e^{rate t}) over the whole grid
  std::size_t terms = 0;
  std::vector<double> t;
  std::vector<double> log_h;  // log H_lambda(t)
  bool holds = false;
};

// Partial sums of H_lambda = sum lambda^{2n} h_n on [0, t_end] until the
// terms drop below 1e-17 of the sum, then fits C on [0, fit_until] and
// checks H <= C e^{1.1 theta t} on all of [0, t_end].
GrowthBoundCheck check_growth_bound(const BoundFunctionTable& table, double lambda, double t_end,
                                    double fit_until, double dt);

struct IteratedBoundTuple {
  Point x0{}, x{}, x0p{}, xp{};
  double t = 0.0;
  std::vector<double> kernel;     // L_n, n = 0..n_max
  std::vector<double> envelope;   // G_t(x0, x) G_t(x0', x') h_n(t)
  std::vector<double> constant;   // (L_n / (2^n envelope_n))^{1/n}, n >= 1
};

struct IteratedBoundFit {
  double constant = 0.0;  // smallest C with L_n <= (2C)^n envelope_n for all tuples, n >= 1
  std::vector<IteratedBoundTuple> tuples;
};

// Random tuples (x0, x, x0', x') uniform, drawn from counter streams keyed
// by tuple index so that a larger sample extends a smaller one; tuple i has
// t = t_lo + (t_hi - t_lo) frac(i / golden ratio). h_n comes from the table by linear interpolation.
IteratedBoundFit fit_iterated_bound(const TorusSpec& spec, const NoiseParams& params,
                                    const BoundFunctionTable& table, double c_heat,
                                    std::size_t n_tuples, std::uint64_t seed, double t_lo,
                                    double t_hi, const ChaosConfig& cfg = {});
// Same fit restricted to the first n tuples of an existing sample.
double iterated_bound_constant(const IteratedBoundFit& fit, std::size_t n);

}  // namespace pamlab
