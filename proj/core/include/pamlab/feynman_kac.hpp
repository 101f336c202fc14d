#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pamlab/covariance.hpp"
#include "pamlab/random.hpp"
#include "pamlab/torus.hpp"

namespace pamlab {

// Two independent Brownian motions (generator Laplacian / 2) from a common
// start, advanced with exact Gaussian increments and wrapped into the cell.
// Draws depend only on (seed, pair index).
class BrownianPair {
 public:
  BrownianPair(const TorusSpec& spec, const Point& start, double dt, std::uint64_t seed,
               std::uint64_t pair);
  void advance();
  const Point& first() const { return a_; }
  const Point& second() const { return b_; }

 private:
  const TorusSpec* spec_;
  double sd_;
  CounterRng rng_;
  Point a_, b_;
};

struct PathEnsemble {
  TorusSpec spec;
  Point start{};
  double dt = 0.0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  // first[p][k], second[p][k]: positions of pair p at time k dt
  std::vector<std::vector<Point>> first, second;
};

// Materialised ensemble (small runs and tests). Requires dt <= t_final / 100.
PathEnsemble simulate_pairs(const TorusSpec& spec, const Point& x, double t_final, double dt,
                            std::size_t pairs, std::uint64_t seed);

// G_{alpha,rho} truncated to |k_i| <= kmax, evaluated exactly.
double truncated_covariance(const TorusSpec& spec, int kmax, const NoiseParams& params,
                            const Point& x, const Point& y);

struct FkConfig {
  double dt = 1e-3;
  std::size_t pairs = 100000;
  std::uint64_t seed = 1;
  int kmax = 16;        // covariance truncation along the paths
  unsigned threads = 0;
  std::size_t batches = 16;  // for between-batch confidence intervals
};

struct FkPoint {
  double t = 0.0;
  double estimate = 0.0;
  double stderr_of_mean = 0.0;
  double ess = 0.0;
  bool low_ess = false;       // ESS < 100
  double mean_exponent = 0.0; // mean of int_0^t G(B_s, B'_s) ds
  double jensen_floor = 0.0;  // eps^2 exp(beta^2 mean_exponent)
  std::vector<double> batch_estimates;
};

struct FkCurve {
  std::vector<FkPoint> points;
  double epsilon = 0.0;
};

// E_x[f(B_t) f(B'_t) exp(beta^2 int_0^t G(B_s, B'_s) ds)] with the time
// integral by the trapezoid rule. f must satisfy f >= epsilon > 0. Throws
// InternalConsistency if an estimate falls below its Jensen floor.
FkCurve fk_second_moment(const TorusSpec& spec, const NoiseParams& params,
                         const std::function<double(const Point&)>& f, double epsilon,
                         const Point& x, const std::vector<double>& times, const FkConfig& cfg);

struct GrowthRate {
  double c_hat = 0.0;
  double ci = 0.0;        // 95% half-width from between-batch spread
  double reference = 0.0; // beta^2 rho / m0
  std::size_t points = 0;
};

// Slope of log E[u^2] against t over the curve points with t in
// [t_lo, t_hi]. Throws UnreliableFit if the log-curve drops by more than
// three standard errors between consecutive points.
GrowthRate growth_rate(const FkCurve& curve, double t_lo, double t_hi, double reference);

// sum_{n>=1} lambda_n^{-(alpha+1)} phi_n(x)^2 with tail bound; throws
// TruncationInsufficient if the tail exceeds 1% of the value.
struct DiagonalValue {
  double value = 0.0;
  double tail = 0.0;
};
DiagonalValue g_alpha_plus_one_diagonal(const TorusSpec& spec, int kmax, double alpha,
                                        const Point& x);

struct Estimate1 {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
};

// Monte Carlo of E int_0^T G_alpha(B_s, B'_s) ds with G_alpha truncated to
// kmax (no constant mode).
Estimate1 time_integrated_covariance(const TorusSpec& spec, double alpha, int kmax,
                                     const Point& x, double t_final, double dt, std::size_t pairs,
                                     std::uint64_t seed, unsigned threads = 0);

}  // namespace pamlab
