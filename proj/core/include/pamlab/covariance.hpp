#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pamlab/torus.hpp"

namespace pamlab {

enum class Regime { bounded, logarithmic, power };

const char* regime_name(Regime r);

struct NoiseParams {
  double alpha = 0.3;
  double rho = 1.0;
  double beta = 1.0;

  // alpha > (d-2)/2
  bool dalang(int d) const;
  Regime regime(int d) const;
};

struct KernelValue {
  double value = 0.0;
  double tail = 0.0;  // truncation or quadrature error estimate
  bool divergent = false;
};

// sum_{n>=1} lambda_n^{-alpha} phi_n(x) phi_n(y) over the box |k_i| <= kmax.
// The tail is an Abel-summation bound in d = 1 off the diagonal, an
// integral bound on the diagonal when alpha > d/2, and a half-truncation
// difference otherwise (infinite on the diagonal when alpha <= d/2).
KernelValue g_alpha_spectral(const TorusSpec& spec, int kmax, double alpha, const Point& x,
                             const Point& y);

struct IntegralControls {
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
  unsigned max_depth = 18;
  // Heat time at which the image sum hands over to the spectral sum; <= 0
  // selects 0.5 * min_length^2.
  double t_switch = 0.0;
};

// 1/Gamma(alpha) int_0^inf s^{alpha-1} (e^{-s Laplacian}(x,y) - 1/m0) ds, with
// the image sum below t_switch and the spectral sum above. On the diagonal
// with alpha <= d/2 the result is flagged divergent.
KernelValue g_alpha_integral(const TorusSpec& spec, double alpha, const Point& x, const Point& y,
                             const IntegralControls& ctl = {});

double g_alpha_rho(const TorusSpec& spec, int kmax, const NoiseParams& params, const Point& x,
                   const Point& y);

// Leading constant of the power-law singularity of the flat-space Riesz
// kernel, c r^{2 alpha - d}, for alpha < d/2.
double riesz_constant(int d, double alpha);

enum class KernelMethod { spectral, integral };

struct ExponentFit {
  double slope = 0.0;
  double slope_stderr = 0.0;
  // Exponent from the log-spaced differences G(r_{i+1}) - G(r_i), which
  // cancels any additive constant in G.
  double difference_slope = 0.0;
  double max_tail_ratio = 0.0;
  std::vector<double> radii;
  std::vector<double> values;
};

// Least-squares slope of log G_alpha(x, x + r e_1) against log r on n_points
// log-spaced radii. The spectral method throws TruncationInsufficient if the
// tail at r_min exceeds 5% of the value.
ExponentFit estimate_singularity_exponent(const TorusSpec& spec, int kmax, double alpha,
                                          double r_min, double r_max, std::size_t n_points,
                                          KernelMethod method = KernelMethod::spectral);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};
LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pamlab
