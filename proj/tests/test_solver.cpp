#include <doctest.h>

#include <cmath>
#include <string>

#include "pamlab/errors.hpp"
#include "pamlab/manifold.hpp"
#include "pamlab/solver.hpp"

using namespace pamlab;

namespace {
std::shared_ptr<const SpectralBasis> basis(int d, int kmax) {
  return std::make_shared<const SpectralBasis>(TorusSpec::unit(d), kmax);
}
}  // namespace

TEST_CASE("homogeneous solution") {
  auto b = basis(1, 48);
  const auto uni = InitialCondition::uniform(1.0);
  CHECK(homogeneous_solution(*b, uni, 0.3, {0.2, 0, 0}) == doctest::Approx(1.0).epsilon(1e-15));
  const auto dirac = InitialCondition::dirac({0.25, 0, 0});
  CHECK(homogeneous_solution(*b, dirac, 0.05, {0.6, 0, 0}) ==
        doctest::Approx(heat_kernel_images(b->spec(), 0.05, {0.6, 0, 0}, {0.25, 0, 0})).epsilon(1e-10));
  CHECK(dirac.mass(*b) == doctest::Approx(1.0));
  CHECK(InitialCondition::uniform(3.0).mass(*b) == doctest::Approx(3.0));
  CHECK_THROWS_AS(homogeneous_solution(*b, dirac, 0.0, {0.6, 0, 0}), DomainError);
  // Mass conservation by grid quadrature.
  const int m = 512;
  double sum = 0.0;
  for (int i = 0; i < m; ++i) sum += homogeneous_solution(*b, dirac, 0.02, {(i + 0.5) / m, 0, 0});
  CHECK(sum / m == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("beta = 0 step is the exact heat flow") {
  auto b = basis(2, 5);
  const auto ic = InitialCondition::dirac({0.3, 0.6, 0});
  const TimeGrid grid = TimeGrid::uniform(0.2, 40);
  const auto traj = heat_trajectory(b, ic, grid);
  const auto a0 = ic.coefficients(*b);
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k)
    for (std::size_t n = 0; n < a0.size(); ++n)
      worst = std::max(worst, std::abs(traj[k][n] - a0[n] * std::exp(-0.5 * b->lambda(n) * grid.times[k])));
  CHECK(worst < 1e-12);

  NoiseParams quiet{0.3, 1.0, 0.0};
  SpectralField f{b, a0};
  NoiseIncrement incr{0, std::vector<double>(b->size(), 0.7)};
  const SpectralField g = step(f, incr, 0.01, quiet);
  for (std::size_t n = 0; n < a0.size(); ++n)
    CHECK(g.coeffs[n] == doctest::Approx(a0[n] * std::exp(-0.005 * b->lambda(n))).epsilon(1e-15));
}

TEST_CASE("zero state stays zero") {
  auto b = basis(1, 8);
  SpectralField f{b, std::vector<double>(b->size(), 0.0)};
  NoiseIncrement incr{0, std::vector<double>(b->size(), 1.3)};
  const SpectralField g = step(f, incr, 0.01, NoiseParams{0.3, 1.0, 2.0});
  for (double c : g.coeffs) CHECK(c == 0.0);
}

TEST_CASE("ensemble first moment equals heat flow") {
  auto b = basis(1, 16);
  const NoiseParams p{0.3, 1.0, 1.0};
  Observables obs;
  obs.probes = {{0.1, 0, 0}, {0.5, 0, 0}};
  obs.times = {0.05, 0.1};
  obs.pairs = {{0, 1}};
  const auto ic = InitialCondition::dirac({0.3, 0, 0});
  const auto s = run_ensemble(b, p, ic, TimeGrid::uniform(0.1, 100), 10000, 4, obs);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t q = 0; q < 2; ++q) {
      const Estimate& e = s.moments[t][q][0];
      CHECK(std::abs(e.mean - s.j0[t][q]) <= 4.0 * e.stderr_of_mean);
      CHECK(s.moments[t][q][1].mean >= e.mean * e.mean);
    }
  // The spatial mean of u is a martingale driven only by the constant mode.
  CHECK(std::abs(s.spatial_mean[1].mean - 1.0) <= 4.0 * s.spatial_mean[1].stderr_of_mean);
}

TEST_CASE("single step mean") {
  auto b = basis(1, 8);
  Observables obs;
  obs.probes = {{0.4, 0, 0}};
  obs.times = {0.01};
  const auto s = run_ensemble(b, NoiseParams{0.3, 1.0, 1.0}, InitialCondition::uniform(2.0),
                              TimeGrid::uniform(0.01, 1), 10000, 8, obs);
  CHECK(std::abs(s.moments[0][0][0].mean - 2.0) <= 3.0 * s.moments[0][0][0].stderr_of_mean);
}

TEST_CASE("beta = 0 ensemble has second moment J0 squared") {
  auto b = basis(2, 6);
  Observables obs;
  obs.probes = {{0.1, 0.2, 0}, {0.4, 0.9, 0}};
  obs.times = {0.04, 0.1};
  const auto s = run_ensemble(b, NoiseParams{0.3, 1.0, 0.0}, InitialCondition::dirac({0.5, 0.5, 0}),
                              TimeGrid::uniform(0.1, 10), 50, 1, obs);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t q = 0; q < 2; ++q) {
      const double j0 = s.j0[t][q];
      CHECK(std::abs(s.moments[t][q][1].mean - j0 * j0) <= 1e-12 * std::max(1.0, j0 * j0));
      CHECK(s.moments[t][q][0].stderr_of_mean == doctest::Approx(0.0));
    }
}

TEST_CASE("ensemble is independent of the worker count") {
  auto b = basis(1, 8);
  Observables obs;
  obs.probes = {{0.3, 0, 0}};
  obs.times = {0.1};
  EnsembleOptions one, many;
  one.threads = 1;
  many.threads = 4;
  many.chunk = 7;
  one.chunk = 7;
  const NoiseParams p{0.3, 1.0, 1.0};
  const auto a = run_ensemble(b, p, InitialCondition::uniform(1.0), TimeGrid::uniform(0.1, 20), 300, 2, obs, one);
  const auto c = run_ensemble(b, p, InitialCondition::uniform(1.0), TimeGrid::uniform(0.1, 20), 300, 2, obs, many);
  CHECK(a.moments[0][0][1].mean == c.moments[0][0][1].mean);
  CHECK(a.moments[0][0][2].stderr_of_mean == c.moments[0][0][2].stderr_of_mean);
}

TEST_CASE("Dalang condition and observation times") {
  auto b = basis(3, 2);
  Observables obs;
  obs.probes = {{0.1, 0.1, 0.1}};
  obs.times = {0.1};
  try {
    run_ensemble(b, NoiseParams{0.4, 1.0, 1.0}, InitialCondition::uniform(1.0), TimeGrid::uniform(0.1, 10), 4, 1, obs);
    FAIL("expected DalangViolated");
  } catch (const DalangViolated& e) {
    CHECK(std::string(e.what()).find("Dalang condition") != std::string::npos);
  }
  EnsembleOptions o;
  o.override_dalang = true;
  CHECK_NOTHROW(run_ensemble(b, NoiseParams{0.4, 1.0, 1.0}, InitialCondition::uniform(1.0),
                             TimeGrid::uniform(0.1, 10), 4, 1, obs, o));
  auto b1 = basis(1, 4);
  obs.probes = {{0.1, 0, 0}};
  obs.times = {0.015};
  CHECK_THROWS_AS(run_ensemble(b1, NoiseParams{}, InitialCondition::uniform(1.0), TimeGrid::uniform(0.1, 10), 4, 1, obs),
                  InvalidConfig);
  obs.times = {0.02};
  CHECK_THROWS_AS(run_ensemble(b1, NoiseParams{}, InitialCondition::dirac({0.1, 0, 0}), TimeGrid::uniform(0.1, 10), 4, 1, obs),
                  InvalidConfig);
}
