#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pamlab/errors.hpp"
#include "pamlab/feynman_kac.hpp"
#include "pamlab/manifold.hpp"
#include "pamlab/parallel.hpp"
#include "pamlab/random.hpp"

using namespace pamlab;
using std::numbers::pi;

TEST_CASE("path marginals match the heat kernel") {
  const TorusSpec s = TorusSpec::unit(1);
  const Point x{0.3, 0, 0};
  const auto e = simulate_pairs(s, x, 0.05, 5e-4, 20000, 3);
  REQUIRE(e.first[0].size() == e.steps + 1);
  // Histogram against cell integrals of P_t; chi-square per degree of freedom.
  const int bins = 20;
  std::vector<double> counts(bins, 0.0);
  for (const auto& path : e.first) counts[std::min(bins - 1, static_cast<int>(path.back()[0] * bins))] += 1;
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    double p = 0.0;
    for (int q = 0; q < 50; ++q) p += heat_kernel_images(s, 0.05, x, {(b + (q + 0.5) / 50) / bins, 0, 0}) / (50.0 * bins);
    const double expected = p * e.first.size();
    chi2 += (counts[b] - expected) * (counts[b] - expected) / expected;
  }
  CHECK(chi2 / bins < 2.0);
}

TEST_CASE("eigenfunction means decay at rate lambda / 2") {
  const TorusSpec s = TorusSpec::unit(1);
  SpectralBasis basis(s, 3);
  const Point x{0.17, 0, 0};
  const double t = 0.01;
  const auto e = simulate_pairs(s, x, t, 1e-4, 20000, 5);
  MomentSum cross;
  for (std::size_t n = 0; n < 5; ++n) {
    MomentSum m;
    for (const auto& path : e.first) m.add(basis.eigenfunction(n, path.back()));
    const double exact = basis.eigenfunction(n, x) * std::exp(-0.5 * basis.lambda(n) * t);
    CHECK(std::abs(m.mean() - exact) <= 3.0 * m.standard_error() + 1e-15);
  }
  for (std::size_t p = 0; p < e.first.size(); ++p)
    cross.add(basis.eigenfunction(1, e.first[p].back()) * basis.eigenfunction(1, e.second[p].back()));
  const double product = std::pow(basis.eigenfunction(1, x), 2) * std::exp(-basis.lambda(1) * t);
  CHECK(std::abs(cross.mean() - product) <= 3.0 * cross.standard_error());
  CHECK_THROWS_AS(simulate_pairs(s, x, 0.01, 1e-3, 10, 1), InvalidConfig);
}

TEST_CASE("beta = 0 gives exactly one") {
  const TorusSpec s = TorusSpec::unit(1);
  FkConfig cfg;
  cfg.pairs = 500;
  cfg.dt = 1e-2;
  const auto one = [](const Point&) { return 1.0; };
  const FkCurve c = fk_second_moment(s, NoiseParams{0.3, 1.0, 0.0}, one, 1.0, {0.2, 0, 0}, {1.0, 2.0, 3.0}, cfg);
  for (const auto& p : c.points) {
    CHECK(p.estimate == 1.0);
    CHECK(p.stderr_of_mean == 0.0);
  }
  const GrowthRate g = growth_rate(c, 1.0, 3.0, 0.0);
  CHECK(g.c_hat == 0.0);
}

TEST_CASE("Jensen floor and exponential-moment guard") {
  const TorusSpec s = TorusSpec::unit(1);
  FkConfig cfg;
  cfg.pairs = 2000;
  cfg.dt = 1e-2;
  cfg.kmax = 8;
  const auto f = [](const Point& p) { return 1.0 + 0.5 * std::cos(2 * pi * p[0]); };
  const FkCurve c = fk_second_moment(s, NoiseParams{0.3, 1.0, 0.5}, f, 0.5, {0.2, 0, 0}, {1.0, 2.0}, cfg);
  for (const auto& p : c.points) {
    CHECK(p.estimate >= p.jensen_floor);
    CHECK(p.ess > 100.0);
  }
  CHECK_THROWS_AS(fk_second_moment(s, NoiseParams{0.3, 1.0, 3.0}, f, 0.5, {0.2, 0, 0}, {10.0}, cfg), InvalidConfig);
}

TEST_CASE("rho = 0 has a bounded exponent") {
  const TorusSpec s = TorusSpec::unit(1);
  FkConfig cfg;
  cfg.pairs = 4000;
  cfg.dt = 2e-2;
  cfg.kmax = 8;
  const auto one = [](const Point&) { return 1.0; };
  const FkCurve c = fk_second_moment(s, NoiseParams{0.8, 0.0, 0.5}, one, 1.0, {0.2, 0, 0}, {2, 3, 4, 5, 6}, cfg);
  const GrowthRate g = growth_rate(c, 2.0, 6.0, 0.0);
  CHECK(std::abs(g.c_hat) <= g.ci);
}

TEST_CASE("diagonal of G_{alpha+1}") {
  const TorusSpec s = TorusSpec::unit(1);
  CHECK(g_alpha_plus_one_diagonal(s, 400, 1.0, {0.3, 0, 0}).value == doctest::Approx(1.0 / 720).epsilon(1e-8));
  CounterRng rng(2);
  const double ref = g_alpha_plus_one_diagonal(s, 400, 0.3, {0, 0, 0}).value;
  for (int i = 0; i < 10; ++i) CHECK(std::abs(g_alpha_plus_one_diagonal(s, 400, 0.3, {rng.uniform(), 0, 0}).value - ref) < 1e-10);
  CHECK_THROWS_AS(g_alpha_plus_one_diagonal(s, 2, 0.3, {0, 0, 0}), TruncationInsufficient);
}

TEST_CASE("time-integrated covariance matches its spectral form") {
  // E int_0^T G_alpha(B_s, B'_s) ds = sum lambda^{-alpha} phi^2 (1 - e^{-lambda T}) / lambda,
  // which tends to G_{alpha+1}(x, x) as T grows.
  const TorusSpec s = TorusSpec::unit(1);
  const double alpha = 0.3, T = 1.0;
  const int kmax = 8;
  const Point x{0.4, 0, 0};
  double exact = 0.0;
  for (int k = 1; k <= kmax; ++k) {
    const double lam = 4 * pi * pi * k * k;
    exact += 2 * std::pow(lam, -alpha) * (1 - std::exp(-lam * T)) / lam;
  }
  const Estimate1 mc = time_integrated_covariance(s, alpha, kmax, x, T, 1e-3, 4000, 6);
  CHECK(std::abs(mc.mean - exact) <= 3.0 * mc.stderr_of_mean + 2e-3 * exact);
  const double limit = g_alpha_plus_one_diagonal(s, 4000, alpha, x).value;
  CHECK(exact < limit);
  CHECK(exact > 0.95 * limit);
}

TEST_CASE("truncated covariance") {
  const TorusSpec s = TorusSpec::unit(1);
  const NoiseParams p{1.0, 1.0, 1.0};
  CHECK(truncated_covariance(s, 100000, p, {0.2, 0, 0}, {0.2, 0, 0}) == doctest::Approx(13.0 / 12).epsilon(1e-6));
}
