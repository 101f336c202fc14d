#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "pamlab/errors.hpp"
#include "pamlab/noise.hpp"
#include "pamlab/parallel.hpp"

using namespace pamlab;

namespace {
std::shared_ptr<const SpectralBasis> basis(int d, int kmax) {
  return std::make_shared<const SpectralBasis>(TorusSpec::unit(d), kmax);
}

std::vector<double> unit_vector(std::size_t n, std::size_t i) {
  std::vector<double> v(n, 0.0);
  v[i] = 1.0;
  return v;
}
}  // namespace

TEST_CASE("isometry on eigenfunctions") {
  auto b = basis(1, 6);
  const NoiseParams p{0.3, 2.0, 1.0};
  const TimeGrid grid = TimeGrid::uniform(1.0, 10);
  const std::size_t n_samples = 10000;
  const std::vector<std::size_t> modes{0, 1, 2, 5};
  std::vector<MomentSum> sq(modes.size());
  MomentSum cross;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto noise = sample_noise(b, p, grid, 77, s);
    std::vector<double> w;
    for (std::size_t m : modes) w.push_back(wiener_integral(noise, {unit_vector(b->size(), m)}));
    for (std::size_t i = 0; i < modes.size(); ++i) sq[i].add(w[i] * w[i]);
    cross.add(w[1] * w[2]);
  }
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::size_t m = modes[i];
    const double expected = m == 0 ? p.rho : std::pow(b->lambda(m), -p.alpha);
    CHECK(std::abs(sq[i].mean() - expected) <= 3.0 * sq[i].standard_error());
  }
  CHECK(std::abs(cross.mean()) <= 3.0 * cross.standard_error());
}

TEST_CASE("isometry prediction") {
  auto b = basis(2, 2);
  const NoiseParams p{0.5, 1.0, 1.0};
  const auto w = noise_weights(*b, p);
  CHECK(w[0] == 1.0);
  for (std::size_t n = 1; n < w.size(); ++n) CHECK(w[n] == doctest::Approx(std::pow(b->lambda(n), -0.5)));
  const TimeGrid grid = TimeGrid::uniform(0.5, 5);
  std::vector<double> psi(b->size(), 0.0);
  psi[0] = 2.0;
  psi[3] = 1.0;
  CHECK(isometry_variance(w, grid, {psi}) == doctest::Approx(0.5 * (4.0 + w[3])));
}

TEST_CASE("draws are keyed and reproducible") {
  auto small = basis(2, 3), large = basis(2, 6);
  const NoiseParams p{0.4, 1.0, 1.0};
  NoiseSampler a(small, p, 5), b(large, p, 5);
  std::vector<double> va(small->size()), vb(large->size()), vc(small->size());
  a.increment(3, 7, 0.01, va);
  a.increment(3, 7, 0.01, vc);
  b.increment(3, 7, 0.01, vb);
  CHECK(va == vc);
  // The same physical mode draws the same number at both truncations.
  for (std::size_t i = 0; i < small->size(); ++i) {
    const auto& m = small->modes()[i].index;
    for (std::size_t j = 0; j < large->size(); ++j) {
      const auto& n = large->modes()[j].index;
      if (m.k == n.k && m.sine == n.sine) CHECK(va[i] == vb[j]);
    }
    CHECK(a.increment(3, 7, 0.01, i) == va[i]);
  }
  a.increment(4, 7, 0.01, vc);
  CHECK(va != vc);
}

TEST_CASE("increments as grid fields") {
  auto b = basis(2, 4);
  GridTransform g(b, 2);
  NoiseIncrement zero{0, std::vector<double>(b->size(), 0.0)};
  for (double v : increment_as_field(g, zero)) CHECK(v == 0.0);
  NoiseIncrement single{0, unit_vector(b->size(), 7)};
  single.values[7] = 0.3;
  const auto field = increment_as_field(g, single);
  double worst = 0.0;
  for (std::size_t q = 0; q < field.size(); ++q)
    worst = std::max(worst, std::abs(field[q] - 0.3 * b->eigenfunction(7, g.grid_point(q))));
  CHECK(worst < 1e-12);
  const auto noise = sample_noise(b, NoiseParams{0.2, 1, 1}, TimeGrid::uniform(0.1, 1), 3);
  const auto f = increment_as_field(g, noise.increments[0]);
  double grid_sq = 0.0, coef_sq = 0.0;
  for (double v : f) grid_sq += v * v;
  for (double v : noise.increments[0].values) coef_sq += v * v;
  CHECK(grid_sq * g.cell_volume() == doctest::Approx(coef_sq).epsilon(1e-10));
}

TEST_CASE("noise dump round trip") {
  auto b = basis(2, 3);
  const auto noise = sample_noise(b, NoiseParams{0.4, 1, 1}, TimeGrid::uniform(0.2, 4), 99);
  const auto path = (std::filesystem::temp_directory_path() / "pamlab_noise_roundtrip.bin").string();
  write_noise_dump(path, noise, *b);
  CHECK(std::filesystem::file_size(path) == 8 + 16 + 4 * b->size() * 8);
  int d = 0, kmax = 0;
  const auto back = read_noise_dump(path, d, kmax);
  CHECK(d == 2);
  CHECK(kmax == 3);
  CHECK(back.seed == 99);
  REQUIRE(back.increments.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(back.increments[k].values == noise.increments[k].values);
  std::filesystem::remove(path);
}

TEST_CASE("time grid validation") {
  TimeGrid g;
  g.times = {0.0, 0.1, 0.1};
  CHECK_THROWS_AS(g.validate(), InvalidConfig);
  CHECK(TimeGrid::uniform(1.0, 4).dt(2) == doctest::Approx(0.25));
}
