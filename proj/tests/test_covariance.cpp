#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pamlab/covariance.hpp"
#include "pamlab/errors.hpp"
#include "pamlab/random.hpp"

using namespace pamlab;
using std::numbers::pi;

namespace {
// Closed forms on the unit circle: G_1 and G_2 are Bernoulli polynomials in
// the wrapped separation u in [0, 1).
double g1_closed(double u) { return 0.5 * (u * u - u + 1.0 / 6.0); }
double g2_closed(double u) {
  const double b4 = u * u * u * u - 2 * u * u * u + u * u - 1.0 / 30.0;
  return -b4 / 24.0;
}
// Hurwitz zeta by Euler-Maclaurin; valid for any real sigma != 1.
double hurwitz_zeta(double sigma, double u) {
  const int n = 30;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += std::pow(k + u, -sigma);
  const double a = n + u;
  sum += std::pow(a, 1.0 - sigma) / (sigma - 1.0) + 0.5 * std::pow(a, -sigma);
  const double bernoulli[] = {1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730};
  double rising = sigma;  // sigma (sigma+1) ... (sigma+2j-2)
  double fact = 2.0;      // (2j)!
  for (int j = 1; j <= 6; ++j) {
    sum += bernoulli[j - 1] / fact * rising * std::pow(a, -sigma - 2 * j + 1);
    rising *= (sigma + 2 * j - 1) * (sigma + 2 * j);
    fact *= (2 * j + 1) * (2 * j + 2);
  }
  return sum;
}

// sum_k 2 (2 pi k)^{-2 alpha} cos(2 pi k u) through Hurwitz's formula.
double g_alpha_closed(double alpha, double u) {
  const double s = 2 * alpha;
  return (hurwitz_zeta(1 - s, u) + hurwitz_zeta(1 - s, 1 - u)) / (2 * std::tgamma(s) * std::cos(pi * s / 2));
}
}  // namespace

TEST_CASE("Hurwitz oracle reproduces the Bernoulli forms") {
  for (double u : {0.1, 0.37, 0.5}) {
    CHECK(g_alpha_closed(1.0, u) == doctest::Approx(g1_closed(u)).epsilon(1e-12));
    CHECK(g_alpha_closed(2.0, u) == doctest::Approx(g2_closed(u)).epsilon(1e-9));
  }
}

TEST_CASE("diagonal values on the unit circle") {
  const TorusSpec s = TorusSpec::unit(1);
  const Point x{0.42, 0, 0};
  const KernelValue g1 = g_alpha_spectral(s, 4000000, 1.0, x, x);
  CHECK(std::abs(g1.value - 1.0 / 12.0) <= 1e-6);
  const KernelValue g2 = g_alpha_spectral(s, 200, 2.0, x, x);
  CHECK(std::abs(g2.value - 1.0 / 720.0) <= 1e-8);
  CHECK(g_alpha_integral(s, 1.0, x, x).value == doctest::Approx(1.0 / 12.0).epsilon(1e-9));
  NoiseParams p{1.0, 1.0, 1.0};
  CHECK(g_alpha_rho(s, 4000000, p, x, x) == doctest::Approx(13.0 / 12.0).epsilon(1e-6));
}

TEST_CASE("Bernoulli closed forms off the diagonal") {
  const TorusSpec s = TorusSpec::unit(1);
  for (double u : {0.05, 0.2, 0.5, 0.81}) {
    CHECK(g_alpha_spectral(s, 200000, 1.0, {0, 0, 0}, {u, 0, 0}).value ==
          doctest::Approx(g1_closed(u)).epsilon(1e-6));
    CHECK(g_alpha_spectral(s, 400, 2.0, {0, 0, 0}, {u, 0, 0}).value ==
          doctest::Approx(g2_closed(u)).epsilon(1e-9));
  }
}

TEST_CASE("integral and spectral representations agree") {
  const TorusSpec s = TorusSpec::unit(1);
  // The truncated spectral sum converges like kmax^{-2 alpha}, so both
  // representations are held against the closed form: the integral to
  // 1e-6 and the spectral sum to within its own tail bound.
  CounterRng rng(21);
  double worst = 0.0, worst_spectral = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Point x{rng.uniform(), 0, 0}, y{rng.uniform(), 0, 0};
    double u = y[0] - x[0];
    u -= std::floor(u);
    if (s.distance(x, y) < 1e-3) continue;
    const double exact = g_alpha_closed(0.4, u);
    const KernelValue a = g_alpha_spectral(s, 1 << 16, 0.4, x, y);
    const KernelValue b = g_alpha_integral(s, 0.4, x, y);
    worst = std::max(worst, std::abs(b.value - exact));
    worst_spectral = std::max(worst_spectral, std::abs(a.value - exact) / a.tail);
  }
  CHECK(worst < 1e-6);
  CHECK(worst_spectral <= 1.0);

  TorusSpec s2;
  s2.d = 2;
  s2.lengths = {1.0, 1.3};
  const Point x{0.1, 0.2, 0}, y{0.45, 0.9, 0};
  CHECK(g_alpha_integral(s2, 1.5, x, y).value ==
        doctest::Approx(g_alpha_spectral(s2, 256, 1.5, x, y).value).epsilon(1e-6));
}

TEST_CASE("kernel symmetry, zero mean and divergence flag") {
  const TorusSpec s = TorusSpec::unit(1);
  const Point x{0.13, 0, 0}, y{0.71, 0, 0};
  CHECK(g_alpha_spectral(s, 500, 0.7, x, y).value == g_alpha_spectral(s, 500, 0.7, y, x).value);
  // int G_alpha(x, y) dy = 0 on a grid that integrates every retained mode exactly.
  const int m = 4096;
  double sum = 0.0;
  for (int i = 0; i < m; ++i) sum += g_alpha_spectral(s, 1000, 0.8, x, {(i + 0.5) / m, 0, 0}).value;
  CHECK(std::abs(sum / m) < 1e-10);
  NoiseParams p{0.8, 2.5, 1.0};
  double sum_rho = 0.0;
  for (int i = 0; i < m; ++i) sum_rho += g_alpha_rho(s, 1000, p, x, {(i + 0.5) / m, 0, 0});
  CHECK(sum_rho / m == doctest::Approx(2.5).epsilon(1e-10));
  CHECK(g_alpha_integral(s, 0.3, x, x).divergent);
  CHECK(g_alpha_spectral(s, 100, 0.3, x, x).divergent);
}

TEST_CASE("Dalang flag and regimes") {
  CHECK(NoiseParams{0.1, 1, 1}.dalang(1));
  CHECK(NoiseParams{0.01, 1, 1}.dalang(2));
  CHECK_FALSE(NoiseParams{0.0, 1, 1}.dalang(2));
  CHECK_FALSE(NoiseParams{0.5, 1, 1}.dalang(3));
  CHECK(NoiseParams{0.6, 1, 1}.regime(1) == Regime::bounded);
  CHECK(NoiseParams{0.5, 1, 1}.regime(1) == Regime::logarithmic);
  CHECK(NoiseParams{0.3, 1, 1}.regime(1) == Regime::power);
}

TEST_CASE("singularity exponent d = 2") {
  TorusSpec s = TorusSpec::unit(2);
  const ExponentFit f = estimate_singularity_exponent(s, 0, 0.6, 1e-3, 1e-2, 8, KernelMethod::integral);
  CHECK(f.slope == doctest::Approx(-0.8).epsilon(0.05 / 0.8));
}

TEST_CASE("log regime drifts toward zero slope") {
  const TorusSpec s = TorusSpec::unit(1);
  const ExponentFit near = estimate_singularity_exponent(s, 1 << 16, 0.5, 1e-3, 1e-2, 8);
  const ExponentFit far = estimate_singularity_exponent(s, 1 << 16, 0.5, 1e-2, 1e-1, 8);
  CHECK(near.slope < 0.0);
  CHECK(std::abs(near.slope) < std::abs(far.slope));
  // G against -log r is linear with a positive slope.
  std::vector<double> lr, g;
  for (std::size_t i = 0; i < near.radii.size(); ++i) {
    lr.push_back(-std::log(near.radii[i]));
    g.push_back(near.values[i]);
  }
  CHECK(least_squares_line(lr, g).slope > 0.0);
}

TEST_CASE("least squares line") {
  const LineFit f = least_squares_line({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.slope_stderr == doctest::Approx(0.0));
}
