#include <doctest.h>

#include <cmath>

#include "pamlab/errors.hpp"
#include "pamlab/geometry.hpp"
#include "pamlab/random.hpp"

using namespace pamlab;

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
}  // namespace

TEST_CASE("geodesic enumeration on the circle") {
  const TorusSpec s = TorusSpec::unit(1);
  const auto half = enumerate_geodesics(s, {0, 0, 0}, {0.5, 0, 0}, 1.0);
  REQUIRE(half.size() == 2);
  CHECK(half[0].length == doctest::Approx(0.5));
  CHECK(half[1].length == doctest::Approx(0.5));
  CHECK(half[0].v[0] == -1);
  CHECK(half[1].v[0] == 0);
  const auto quarter = enumerate_geodesics(s, {0, 0, 0}, {0.25, 0, 0}, 1.0);
  REQUIRE(quarter.size() == 2);
  CHECK(quarter[0].length == doctest::Approx(0.25));
  CHECK(quarter[1].length == doctest::Approx(0.75));
}

TEST_CASE("geodesic lifts: endpoints and lengths") {
  const TorusSpec s = torus({1.0, 1.3});
  CounterRng rng(8);
  for (int i = 0; i < 50; ++i) {
    const Point x = random_point(s, rng), y = random_point(s, rng);
    const auto g = enumerate_geodesics(s, x, y, 2 * s.diameter());
    REQUIRE(!g.empty());
    CHECK(g.front().length == doctest::Approx(s.distance(x, y)).epsilon(1e-12));
    for (const auto& l : g) {
      CHECK(l.length >= s.distance(x, y) - 1e-12);
      CHECK(s.distance(l.at(s, x, 0.0), x) < 1e-12);
      CHECK(s.distance(l.at(s, x, 1.0), y) < 1e-12);
    }
  }
}

TEST_CASE("bridge functional identities") {
  const TorusSpec s = torus({1.0, 1.3});
  CounterRng rng(12);
  for (int i = 0; i < 200; ++i) {
    // Points well inside one cell so that all distances are unwrapped.
    Point x{0.3 + 0.2 * rng.uniform(), 0.4 + 0.2 * rng.uniform(), 0};
    Point y{0.3 + 0.2 * rng.uniform(), 0.4 + 0.2 * rng.uniform(), 0};
    Point z{0.3 + 0.2 * rng.uniform(), 0.4 + 0.2 * rng.uniform(), 0};
    const double a = rng.uniform();
    const Point w{x[0] + a * (y[0] - x[0]), x[1] + a * (y[1] - x[1]), 0};
    const double dz = (z[0] - w[0]) * (z[0] - w[0]) + (z[1] - w[1]) * (z[1] - w[1]);
    CHECK(bridge_functional(s, a, z, x, y) == doctest::Approx(dz).epsilon(1e-12).scale(1.0));
    CHECK(bridge_functional(s, a, w, x, y) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(bridge_functional(s, a, z, x, x) == doctest::Approx(s.distance2(z, x)).epsilon(1e-12));
    CHECK(bridge_functional(s, a, z, x, y) == doctest::Approx(bridge_functional(s, 1 - a, z, y, x)).epsilon(1e-12));
  }
  // On a wrapped minimizing geodesic the functional also vanishes.
  const Point x{0.9, 1.2, 0}, y{0.1, 0.1, 0};
  const auto g = enumerate_geodesics(s, x, y, 2 * s.diameter());
  CHECK(bridge_functional(s, 0.3, g.front().at(s, x, 0.3), x, y) == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(bridge_functional(s, 0.0, x, x, y), DomainError);
  CHECK_THROWS_AS(bridge_functional(s, 1.0, x, x, y), DomainError);
}

TEST_CASE("sausage assignment") {
  const TorusSpec s = TorusSpec::unit(1);
  const Point x{0, 0, 0}, y{0.5, 0, 0};
  const auto g = enumerate_geodesics(s, x, y, 1.0);
  const auto other = sausage_assignment(s, {0.75, 0, 0}, x, y, g);
  REQUIRE(other.size() == 1);
  CHECK(g[other[0]].v[0] == -1);
  const auto near = sausage_assignment(s, {0.25, 0, 0}, x, y, g);
  REQUIRE(near.size() == 1);
  CHECK(g[near[0]].v[0] == 0);

  // Near the midpoint of a unique minimizing geodesic: a single class.
  const TorusSpec s2 = torus({1.0, 1.3});
  const Point a{0.1, 0.2, 0}, b{0.3, 0.5, 0};
  const auto g2 = enumerate_geodesics(s2, a, b, 2 * s2.diameter());
  const auto mid = sausage_assignment(s2, {0.2, 0.35, 0}, a, b, g2);
  REQUIRE(mid.size() == 1);
  CHECK(mid[0] == 0);

  // Antipodal corner of x on the unit square: four minimizing x -> z lifts.
  const TorusSpec sq = TorusSpec::unit(2);
  const Point o{0, 0, 0}, far{0.5, 0.5, 0};
  CHECK(minimizing_classes(sq, o, far).size() == 4);
  const auto gs = enumerate_geodesics(sq, o, {0.2, 0.1, 0}, 2 * sq.diameter());
  CHECK(sausage_assignment(sq, far, o, {0.2, 0.1, 0}, gs).size() >= 2);
}

TEST_CASE("sausage inequality on random tuples") {
  for (const TorusSpec& s : {TorusSpec::unit(1), torus({1.0, 1.3})}) {
    for (auto mode : {SausageSampling::uniform, SausageSampling::near_cut_locus}) {
      const SausageReport r = verify_sausage_inequality(s, 5000, 17, mode);
      CHECK(r.samples == 5000);
      CHECK(r.violations == 0);
      CHECK(r.corollary_violations == 0);
      CHECK(r.max_violation <= 1e-10);
    }
  }
  const SausageReport cut = verify_sausage_inequality(torus({1.0, 1.3}), 5000, 17, SausageSampling::near_cut_locus);
  CHECK(cut.corollary_samples > 0);
}

TEST_CASE("geodesic counts are bounded") {
  const TorusSpec s = TorusSpec::unit(2);
  const auto a = geodesic_count_stats(s, 500, 4);
  const auto b = geodesic_count_stats(s, 1000, 4);
  CHECK(a.max_count == b.max_count);
  CHECK(a.max_count >= 2);
  CHECK(b.mean_count >= 1.0);
}
