#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pamlab/errors.hpp"
#include "pamlab/manifold.hpp"
#include "pamlab/random.hpp"
#include "pamlab/torus.hpp"

using namespace pamlab;
using std::numbers::pi;

namespace {
TorusSpec torus(std::vector<double> lengths) {
  TorusSpec s;
  s.d = static_cast<int>(lengths.size());
  s.lengths = std::move(lengths);
  return s;
}

Point random_point(const TorusSpec& spec, CounterRng& rng) {
  Point p{0, 0, 0};
  for (int i = 0; i < spec.d; ++i) p[i] = rng.uniform() * spec.length(i);
  return p;
}

// Brute-force minimum over the 3^d neighbouring lattice shifts.
double brute_distance(const TorusSpec& spec, const Point& x, const Point& y) {
  double best = 1e300;
  const int r2 = spec.d >= 2 ? 1 : 0, r3 = spec.d >= 3 ? 1 : 0;
  for (int a = -1; a <= 1; ++a)
    for (int b = -r2; b <= r2; ++b)
      for (int c = -r3; c <= r3; ++c) {
        const int v[3] = {a, b, c};
        double s = 0.0;
        for (int i = 0; i < spec.d; ++i) {
          const double w = y[i] - x[i] + v[i] * spec.length(i);
          s += w * w;
        }
        best = std::min(best, s);
      }
  return std::sqrt(best);
}
}  // namespace

TEST_CASE("derived torus quantities") {
  const TorusSpec s = torus({1.0, 2.0});
  CHECK(s.volume() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.injectivity_radius() == doctest::Approx(0.5));
  CHECK(s.delta() == doctest::Approx(0.0625));
  CHECK(s.diameter() == doctest::Approx(std::sqrt(0.25 + 1.0)));
  CHECK_THROWS_AS(torus({1.0, -1.0}).validate(), InvalidConfig);
  TorusSpec bad;
  bad.d = 4;
  bad.lengths = {1, 1, 1, 1};
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
}

TEST_CASE("distances") {
  const TorusSpec s1 = TorusSpec::unit(1);
  CHECK(s1.distance({0.1, 0, 0}, {0.9, 0, 0}) == doctest::Approx(0.2).epsilon(1e-14));
  const TorusSpec s2 = TorusSpec::unit(2);
  CHECK(s2.distance({0, 0, 0}, {0.5, 0.5, 0}) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  const TorusSpec s3 = torus({1.0, 1.3, 0.7});
  CounterRng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Point x = random_point(s3, rng), y = random_point(s3, rng);
    CHECK(s3.distance(x, x) == 0.0);
    CHECK(s3.distance(x, y) == doctest::Approx(brute_distance(s3, x, y)).epsilon(1e-13));
    CHECK(s3.distance(x, y) == s3.distance(y, x));
    CHECK(s3.distance(x, y) <= s3.diameter() + 1e-14);
  }
}

TEST_CASE("eigenvalues and basis") {
  CHECK(eigenvalue(TorusSpec::unit(1), {1, 0, 0}) == doctest::Approx(4 * pi * pi));
  CHECK(eigenvalue(torus({1.0, 2.0}), {1, 1, 0}) == doctest::Approx(5 * pi * pi));
  SpectralBasis b0(TorusSpec::unit(1), 0);
  REQUIRE(b0.size() == 1);
  CHECK(b0.lambda(0) == 0.0);
  CHECK(b0.eigenfunction(0, {0.37, 0, 0}) == doctest::Approx(1.0));

  // The smallest nonzero eigenvalue of a fine periodic finite-difference
  // Laplacian approaches 4 pi^2.
  const int n = 2000;
  const double h = 1.0 / n;
  const double fd = (2.0 - 2.0 * std::cos(2 * pi * h)) / (h * h);
  CHECK(fd == doctest::Approx(4 * pi * pi).epsilon(1e-5));

  // Orthonormality by grid quadrature (exact for trigonometric polynomials).
  const TorusSpec s = torus({1.0, 1.5});
  SpectralBasis b(s, 3);
  const int m = 16;
  std::vector<std::vector<double>> phi(b.size(), std::vector<double>(m * m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const Point x{i * 1.0 / m, j * 1.5 / m, 0};
      for (std::size_t k = 0; k < b.size(); ++k) phi[k][i * m + j] = b.eigenfunction(k, x);
    }
  const double cell = s.volume() / (m * m);
  double worst = 0.0;
  for (std::size_t a = 0; a < b.size(); ++a)
    for (std::size_t c = 0; c < b.size(); ++c) {
      double sum = 0.0;
      for (int q = 0; q < m * m; ++q) sum += phi[a][q] * phi[c][q];
      worst = std::max(worst, std::abs(sum * cell - (a == c ? 1.0 : 0.0)));
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("heat kernel oracles") {
  const TorusSpec s = TorusSpec::unit(1);
  const Point x{0.3, 0, 0};
  CHECK(heat_kernel(s, 64, 0.1, x, x) == doctest::Approx(heat_kernel_images(s, 0.1, x, x)).epsilon(1e-8));
  CHECK(heat_kernel_images(s, 0.01, x, x) == doctest::Approx(1.0 / std::sqrt(2 * pi * 0.01)).epsilon(1e-10));
  CHECK(heat_kernel(s, 16, 50.0, x, {0.8, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  const TorusSpec s2 = torus({1.0, 2.0});
  CHECK(heat_kernel(s2, 16, 80.0, {0.1, 0.2, 0}, {0.6, 1.7, 0}) == doctest::Approx(0.5).epsilon(1e-12));

  // Spectral and image sums agree for t in [0.05, 2], d = 1 and 2.
  for (const TorusSpec& sp : {TorusSpec::unit(1), torus({1.0, 1.3})}) {
    CounterRng rng(5);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double t = 0.05 + 1.95 * rng.uniform();
      const Point a = random_point(sp, rng), b = random_point(sp, rng);
      worst = std::max(worst, std::abs(heat_kernel(sp, 24, t, a, b) - heat_kernel_images(sp, t, a, b)));
      CHECK(heat_kernel_images(sp, t, a, b) == heat_kernel_images(sp, t, b, a));
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("heat kernel integrates to one") {
  const TorusSpec s = torus({1.0, 1.3});
  const int m = 64;
  for (double t : {0.02, 0.3}) {
    double sum = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        sum += heat_kernel_images(s, t, {0.2, 0.4, 0}, {i * 1.0 / m, j * 1.3 / m, 0});
    CHECK(sum * s.volume() / (m * m) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("Gaussian upper bound with fitted constant") {
  for (int d : {1, 2}) {
    const TorusSpec s = TorusSpec::unit(d);
    const HeatConstantFit fit = fit_heat_constant(s, 10000, 3);
    CHECK(fit.c_heat >= fit.large_time_limit);
    CHECK(heat_bound_excess(s, fit.c_heat, 10000, 4) <= 1e-12);
    const Point x{0.2, 0.7, 0};
    CHECK(gaussian_bound_kernel(s, 1.0, x, x, fit.c_heat) ==
          doctest::Approx(std::pow(2 * pi, -0.5 * d) + fit.c_heat));
  }
  const TorusSpec s = TorusSpec::unit(1);
  CHECK(gaussian_term(s, 1e-4, 0.25) < 1e-100);
}

TEST_CASE("grid transform round trip and Parseval") {
  const TorusSpec s = torus({1.0, 1.3});
  auto b = std::make_shared<const SpectralBasis>(s, 6);
  GridTransform g(b, 2);
  auto ws = g.workspace();
  CounterRng rng(9);
  std::vector<double> a(b->size()), grid(g.grid_size()), back(b->size());
  for (auto& c : a) c = rng.normal();
  g.synthesize(a, grid, ws);
  g.analyze(grid, back, ws);
  double err = 0.0, sq = 0.0, coef = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    err = std::max(err, std::abs(a[i] - back[i]));
    coef += a[i] * a[i];
  }
  for (double v : grid) sq += v * v;
  CHECK(err < 1e-12);
  CHECK(sq * g.cell_volume() == doctest::Approx(coef).epsilon(1e-12));
  // Synthesis agrees with direct evaluation at grid nodes.
  SpectralField f{b, a};
  for (std::size_t q = 0; q < grid.size(); q += 37)
    CHECK(grid[q] == doctest::Approx(f.evaluate(g.grid_point(q))).epsilon(1e-12));
}
