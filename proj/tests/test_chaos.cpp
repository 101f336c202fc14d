#include <doctest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numbers>

#include "pamlab/chaos.hpp"
#include "pamlab/errors.hpp"
#include "pamlab/geometry.hpp"
#include "pamlab/manifold.hpp"
#include "pamlab/random.hpp"

using namespace pamlab;
using std::numbers::pi;

namespace {
const NoiseParams kReference{0.3, 1.0, 0.5};

BoundFunctionTable constant_table(double c) {
  return BoundFunctionTable::from_samples({1e-4, 1e-2, 1.0, 100.0}, {c, c, c, c});
}

BoundFunctionTable power_table(double e) {
  std::vector<double> s, k;
  for (int i = 0; i <= 40; ++i) {
    s.push_back(std::pow(10.0, -6.0 + 0.2 * i));
    k.push_back(std::pow(s.back(), e));
  }
  return BoundFunctionTable::from_samples(s, k);
}
}  // namespace

TEST_CASE("iterated kernels: level zero, symmetry, positivity") {
  const TorusSpec s = TorusSpec::unit(1);
  ChaosConfig cfg;
  cfg.kmax = 24;
  cfg.time_nodes = 120;
  const Point x0{0.1, 0, 0}, x0p{0.35, 0, 0};
  IteratedKernels L(s, kReference, x0, x0p, 0.2, cfg);
  IteratedKernels swapped(s, kReference, x0p, x0, 0.2, cfg);
  const std::size_t m = L.node(0.2);
  CHECK(L.times()[m] == doctest::Approx(0.2));
  CounterRng rng(3);
  for (int i = 0; i < 10; ++i) {
    const Point x{rng.uniform(), 0, 0}, xp{rng.uniform(), 0, 0};
    CHECK(L.evaluate(0, m, x, xp) ==
          doctest::Approx(heat_kernel(s, 24, 0.2, x0, x) * heat_kernel(s, 24, 0.2, x0p, xp)).epsilon(1e-12));
    for (int n = 0; n <= 3; ++n) {
      CHECK(L.evaluate(n, m, x, xp) > 0.0);
      CHECK(L.evaluate(n, m, x, xp) == doctest::Approx(swapped.evaluate(n, m, xp, x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("iterated kernels converge under refinement") {
  const TorusSpec s = TorusSpec::unit(1);
  ChaosConfig coarse;
  coarse.kmax = 32;
  coarse.time_nodes = 200;
  ChaosConfig fine = coarse;
  fine.kmax = 64;
  fine.time_nodes = 400;
  const Point x0{0.1, 0, 0}, x0p{0.3, 0, 0}, x{0.2, 0, 0}, xp{0.25, 0, 0};
  IteratedKernels a(s, NoiseParams{0.3, 1.0, 1.0}, x0, x0p, 0.2, coarse);
  IteratedKernels b(s, NoiseParams{0.3, 1.0, 1.0}, x0, x0p, 0.2, fine);
  const double la = a.evaluate(1, a.node(0.2), x, xp), lb = b.evaluate(1, b.node(0.2), x, xp);
  CHECK(std::abs(la - lb) < 0.01 * lb);

  const SeriesValue quiet = k_beta_truncated(a, a.node(0.2), x, xp, 0.0);
  CHECK(quiet.value == a.evaluate(0, a.node(0.2), x, xp));
  const SeriesValue v = k_beta_truncated(a, a.node(0.2), x, xp, 1.0);
  for (std::size_t n = 1; n < v.terms.size(); ++n) CHECK(v.terms[n] < v.terms[n - 1]);
  CHECK(v.tail >= 0.0);
}

TEST_CASE("uniform data: first level in closed form") {
  const TorusSpec s = TorusSpec::unit(1);
  const NoiseParams p{0.3, 1.0, 0.5};
  const int kmax = 16;
  const auto uc = uniform_second_moment(s, p, 1.0, {0.1, 0.2, 0.5}, kmax, 3, 1e-4);
  for (std::size_t i = 0; i < uc.times.size(); ++i) {
    const double t = uc.times[i];
    double l1 = p.rho * t;
    for (int k = 1; k <= kmax; ++k) {
      const double lam = 4 * pi * pi * k * k;
      l1 += 2 * std::pow(lam, -p.alpha) * (1 - std::exp(-lam * t)) / lam;
    }
    CHECK(uc.terms[i][0] == doctest::Approx(1.0));
    CHECK(uc.terms[i][1] == doctest::Approx(p.beta * p.beta * l1).epsilon(1e-9));
    CHECK(uc.second_moment[i] > 1.0);
  }
  // rho only: l_n(t) = (rho t)^n / n!
  const auto flat = uniform_second_moment(s, NoiseParams{50.0, 2.0, 1.0}, 1.0, {0.3}, 4, 3, 1e-4);
  CHECK(flat.terms[0][2] == doctest::Approx(std::pow(0.6, 2) / 2).epsilon(1e-4));
  CHECK(flat.terms[0][3] == doctest::Approx(std::pow(0.6, 3) / 6).epsilon(1e-4));
}

TEST_CASE("h_n for constant and power-law k") {
  const auto one = h_n_table(constant_table(1.0), 4, 1e-3, 2000);
  for (std::size_t j : {100u, 1000u, 2000u}) {
    const double t = j * 1e-3;
    CHECK(one[0][j] == 1.0);
    CHECK(one[1][j] == doctest::Approx(t).epsilon(1e-12));
    CHECK(one[2][j] == doctest::Approx(t * t / 2).epsilon(1e-10));
    CHECK(one[3][j] == doctest::Approx(t * t * t / 6).epsilon(1e-6));
    CHECK(one[4][j] == doctest::Approx(std::pow(t, 4) / 24).epsilon(1e-6));
  }
  // k(s) = s^{-0.2}: h_n(t) = t^{0.8 n} Gamma(0.8)^n / Gamma(0.8 n + 1).
  const auto h = h_n_table(power_table(-0.2), 3, 1e-3, 1000);
  for (int n = 1; n <= 3; ++n) {
    const double exact = std::pow(std::tgamma(0.8), n) / std::tgamma(0.8 * n + 1.0);
    CHECK(h[n][1000] == doctest::Approx(exact).epsilon(1e-4));
  }
  CHECK(h[2][1000] == doctest::Approx(boost::math::beta(1.8, 0.8) / 0.8).epsilon(1e-4));
}

TEST_CASE("theta threshold") {
  CHECK(laplace_transform(constant_table(2.0), 4.0) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(theta_threshold(constant_table(2.0), 1.5) == doctest::Approx(2.0 * 2.25).epsilon(1e-6));
  const auto tab = power_table(-0.2);
  double prev = theta_threshold(tab, 1.0);
  for (double lambda : {0.5, 0.1, 0.01}) {
    const double th = theta_threshold(tab, lambda);
    CHECK(th < prev);
    prev = th;
  }
  CHECK(prev < 1e-3);
  const GrowthBoundCheck g = check_growth_bound(constant_table(1.0), 1.0, 3.0, 1.5, 1e-3);
  CHECK(g.theta == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(g.holds);
  CHECK(g.log_h.back() == doctest::Approx(3.0).epsilon(1e-4));
}

TEST_CASE("offset power law fit") {
  std::vector<double> s, k;
  for (int i = 0; i <= 8; ++i) {
    s.push_back(std::pow(10.0, -4.0 + 0.25 * i));
    k.push_back(30.0 + 4.0 * std::pow(s.back(), -0.4));
  }
  const PowerLawFit f = fit_offset_power_law(s, k);
  CHECK(f.exponent == doctest::Approx(-0.4).epsilon(1e-3));
  CHECK(f.offset == doctest::Approx(30.0).epsilon(1e-2));
  CHECK(f.loglog_slope > -0.4);
}

TEST_CASE("singular pair integral weights") {
  const double p = -0.4;
  // Cell quadrature away from the diagonal is second order in the grid step.
  const double exact1 = 2.0 * std::pow(0.5, p + 1) / (p + 1);
  const double e64 = std::abs(SingularPairIntegral(TorusSpec::unit(1), {64}, p).total_weight() - exact1);
  const double e128 = std::abs(SingularPairIntegral(TorusSpec::unit(1), {128}, p).total_weight() - exact1);
  CHECK(e128 < 5e-6 * exact1);
  CHECK(e64 / e128 > 3.5);
  // d = 2: polar integral over the unit cell.
  const double q = -0.8;
  SingularPairIntegral two(TorusSpec::unit(2), {64, 64}, q);
  SingularPairIntegral two_fine(TorusSpec::unit(2), {128, 128}, q);
  const int n = 20000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double th = (i + 0.5) * (pi / 4) / n;
    acc += std::pow(2 * std::cos(th), -(q + 2));
  }
  const double exact = 8.0 / (q + 2) * acc * (pi / 4) / n;
  const double f64 = std::abs(two.total_weight() - exact), f128 = std::abs(two_fine.total_weight() - exact);
  CHECK(f128 < 1e-5 * exact);
  CHECK(f64 / f128 > 3.5);
  std::vector<double> ones(two.size(), 1.0);
  CHECK(two.integrate(ones, ones) == doctest::Approx(two.total_weight()).epsilon(1e-12));
}

TEST_CASE("bound functions k1 and k2") {
  const TorusSpec s = TorusSpec::unit(1);
  BoundConfig cfg;
  cfg.c_heat = fit_heat_constant(s, 2000, 1).c_heat;
  const BoundSample small = k1(s, kReference, 1e-3, cfg);
  CHECK(small.value >= small.diagonal_value);
  CHECK(small.diagonal_value >= 0.99 * small.value);
  const double a = k1(s, kReference, 10.0, cfg).value, b = k1(s, kReference, 100.0, cfg).value;
  CHECK(a / b == doctest::Approx(1.0).epsilon(0.05));
  std::vector<double> big;
  for (double x : {1.0, 10.0, 100.0}) big.push_back(k2(s, kReference, x, cfg).value);
  CHECK(*std::max_element(big.begin(), big.end()) < 2.0 * *std::min_element(big.begin(), big.end()));
  CHECK(big[2] <= big[0]);
  CHECK_THROWS_AS(k1(s, NoiseParams{0.6, 1.0, 1.0}, 0.1, cfg), DomainError);
}

TEST_CASE("bridge Gaussian concentrates near the geodesic point") {
  const TorusSpec sp = TorusSpec::unit(1);
  const double s = 1e-3, t = 4e-3;
  const Point x0{0.6, 0, 0}, x{0.2, 0, 0};
  const auto geo = enumerate_geodesics(sp, x, x0, 2 * sp.diameter());
  const Point centre = geo.front().at(sp, x, s / t);
  const int n = 200000;
  double total = 0.0, near = 0.0;
  for (int i = 0; i < n; ++i) {
    const Point z{(i + 0.5) / n, 0, 0};
    const double v = bridge_gaussian(sp, t, s, x0, x, z);
    total += v;
    if (sp.distance(z, centre) <= 4 * std::sqrt(s)) near += v;
  }
  CHECK(near / total > 0.99);
  CHECK(total / n == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("iterated bound sample extends") {
  const TorusSpec s = TorusSpec::unit(1);
  ChaosConfig cfg;
  cfg.kmax = 12;
  cfg.time_nodes = 60;
  const auto tab = power_table(-0.2);
  const auto small = fit_iterated_bound(s, kReference, tab, 3.7, 2, 9, 0.05, 0.5, cfg);
  const auto large = fit_iterated_bound(s, kReference, tab, 3.7, 4, 9, 0.05, 0.5, cfg);
  CHECK(small.tuples[1].t == large.tuples[1].t);
  CHECK(iterated_bound_constant(large, 2) == small.constant);
  CHECK(large.constant >= small.constant);
  CHECK(large.constant > 0.0);
  CHECK(std::isfinite(large.constant));
}
