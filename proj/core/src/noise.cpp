#include "pamlab/noise.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>

#include "pamlab/errors.hpp"
#include "pamlab/random.hpp"

namespace pamlab {

TimeGrid TimeGrid::uniform(double t_final, std::size_t steps) {
  if (!(t_final > 0.0) || steps == 0) throw InvalidConfig("time grid needs t_final > 0 and steps > 0");
  TimeGrid g;
  g.times.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    g.times[k] = t_final * static_cast<double>(k) / static_cast<double>(steps);
  return g;
}

void TimeGrid::validate() const {
  if (times.size() < 2) throw InvalidConfig("time grid needs at least two nodes");
  for (std::size_t k = 0; k + 1 < times.size(); ++k)
    if (!(times[k + 1] > times[k])) throw InvalidConfig("time grid must be strictly increasing");
}

std::vector<double> noise_weights(const SpectralBasis& basis, const NoiseParams& params) {
  if (params.alpha < 0.0) throw InvalidConfig("noise.alpha must be >= 0");
  if (params.rho < 0.0) throw InvalidConfig("noise.rho must be >= 0");
  std::vector<double> w(basis.size());
  for (std::size_t n = 0; n < w.size(); ++n) {
    const double lam = basis.lambda(n);
    w[n] = lam == 0.0 ? params.rho : std::pow(lam, -params.alpha);
  }
  return w;
}

std::uint64_t mode_key(const ModeIndex& m) {
  auto field = [](int k) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(k) & 0xFFFFFu); };
  return field(m.k[0]) | (field(m.k[1]) << 20) | (field(m.k[2]) << 40) |
         (static_cast<std::uint64_t>(m.sine) << 60);
}

NoiseSampler::NoiseSampler(std::shared_ptr<const SpectralBasis> basis, const NoiseParams& params,
                           std::uint64_t seed)
    : basis_(std::move(basis)), weights_(noise_weights(*basis_, params)), seed_(seed) {
  keys_.reserve(basis_->size());
  for (const Mode& m : basis_->modes()) keys_.push_back(mode_key(m.index));
}

void NoiseSampler::increment(std::uint64_t path, std::size_t step, double dt,
                             std::span<double> out) const {
  for (std::size_t n = 0; n < weights_.size(); ++n) out[n] = increment(path, step, dt, n);
}

double NoiseSampler::increment(std::uint64_t path, std::size_t step, double dt,
                               std::size_t mode) const {
  const double w = weights_[mode];
  if (w == 0.0) return 0.0;
  return std::sqrt(dt * w) * keyed_normal(stream_key(seed_, path, step, keys_[mode]));
}

NoiseRealization sample_noise(std::shared_ptr<const SpectralBasis> basis, const NoiseParams& params,
                              const TimeGrid& grid, std::uint64_t seed, std::uint64_t path) {
  grid.validate();
  NoiseSampler sampler(basis, params, seed);
  NoiseRealization out;
  out.seed = seed;
  out.grid = grid;
  out.increments.resize(grid.steps());
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    out.increments[k].step = k;
    out.increments[k].values.resize(basis->size());
    sampler.increment(path, k, grid.dt(k), out.increments[k].values);
  }
  return out;
}

std::vector<double> increment_as_field(const GridTransform& transform, const NoiseIncrement& incr) {
  std::vector<double> grid(transform.grid_size());
  auto ws = transform.workspace();
  transform.synthesize(incr.values, grid, ws);
  return grid;
}

namespace {
const std::vector<double>& psi_at(const std::vector<std::vector<double>>& psi, std::size_t k) {
  return psi.size() == 1 ? psi.front() : psi[k];
}
}  // namespace

double wiener_integral(const NoiseRealization& noise, const std::vector<std::vector<double>>& psi) {
  double s = 0.0;
  for (std::size_t k = 0; k < noise.increments.size(); ++k) {
    const auto& p = psi_at(psi, k);
    const auto& v = noise.increments[k].values;
    for (std::size_t n = 0; n < p.size(); ++n) s += p[n] * v[n];
  }
  return s;
}

double isometry_variance(const std::vector<double>& weights, const TimeGrid& grid,
                         const std::vector<std::vector<double>>& psi) {
  double s = 0.0;
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const auto& p = psi_at(psi, k);
    double q = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) q += weights[n] * p[n] * p[n];
    s += grid.dt(k) * q;
  }
  return s;
}

namespace {
template <class T>
void put_le(std::ofstream& out, T v) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.write(reinterpret_cast<const char*>(bits.data()), sizeof(T));
}

template <class T>
T get_le(std::ifstream& in) {
  std::array<unsigned char, sizeof(T)> bits{};
  in.read(reinterpret_cast<char*>(bits.data()), sizeof(T));
  if (!in) throw InvalidConfig("noise dump truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}
}  // namespace

void write_noise_dump(const std::string& path, const NoiseRealization& noise,
                      const SpectralBasis& basis) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidConfig("cannot open noise dump for writing: " + path);
  put_le<std::int32_t>(out, basis.spec().d);
  put_le<std::int32_t>(out, basis.kmax());
  put_le<std::uint64_t>(out, noise.increments.size());
  put_le<std::uint64_t>(out, noise.seed);
  for (const auto& inc : noise.increments)
    for (double v : inc.values) put_le<double>(out, v);
}

NoiseRealization read_noise_dump(const std::string& path, int& d, int& kmax) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open noise dump: " + path);
  d = get_le<std::int32_t>(in);
  kmax = get_le<std::int32_t>(in);
  const auto steps = get_le<std::uint64_t>(in);
  NoiseRealization out;
  out.seed = get_le<std::uint64_t>(in);
  const std::size_t modes = static_cast<std::size_t>(std::pow(2 * kmax + 1, d) + 0.5);
  out.increments.resize(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    out.increments[k].step = k;
    out.increments[k].values.resize(modes);
    for (auto& v : out.increments[k].values) v = get_le<double>(in);
  }
  return out;
}

}  // namespace pamlab
