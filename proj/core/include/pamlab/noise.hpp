#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pamlab/covariance.hpp"
#include "pamlab/manifold.hpp"

namespace pamlab {

struct TimeGrid {
  std::vector<double> times;

  static TimeGrid uniform(double t_final, std::size_t steps);
  void validate() const;  // strictly increasing, at least two nodes
  std::size_t steps() const { return times.size() - 1; }
  double dt(std::size_t k) const { return times[k + 1] - times[k]; }
};

// Spatial covariance weights per mode: rho on the constant mode and
// lambda_n^{-alpha} elsewhere (alpha = 0 gives truncated white noise).
std::vector<double> noise_weights(const SpectralBasis& basis, const NoiseParams& params);

// Keyed by wavevector and parity so that the same physical mode draws the
// same numbers at every truncation level.
std::uint64_t mode_key(const ModeIndex& m);

// Draws are pure functions of (seed, path, step, mode).
class NoiseSampler {
 public:
  NoiseSampler(std::shared_ptr<const SpectralBasis> basis, const NoiseParams& params,
               std::uint64_t seed);

  const SpectralBasis& basis() const { return *basis_; }
  const std::vector<double>& weights() const { return weights_; }

  // out[n] = sqrt(dt * w_n) * N(0,1)
  void increment(std::uint64_t path, std::size_t step, double dt, std::span<double> out) const;
  double increment(std::uint64_t path, std::size_t step, double dt, std::size_t mode) const;

 private:
  std::shared_ptr<const SpectralBasis> basis_;
  std::vector<double> weights_;
  std::vector<std::uint64_t> keys_;
  std::uint64_t seed_;
};

struct NoiseIncrement {
  std::size_t step = 0;
  std::vector<double> values;
};

struct NoiseRealization {
  std::uint64_t seed = 0;
  TimeGrid grid;
  std::vector<NoiseIncrement> increments;
};

NoiseRealization sample_noise(std::shared_ptr<const SpectralBasis> basis, const NoiseParams& params,
                              const TimeGrid& grid, std::uint64_t seed, std::uint64_t path = 0);

// Grid synthesis of an increment for pointwise products.
std::vector<double> increment_as_field(const GridTransform& transform, const NoiseIncrement& incr);

// W(psi) = sum_k sum_n psi_n(k) dW_n(k) for a step function psi given by
// per-step coefficient vectors (a single vector is reused for every step).
double wiener_integral(const NoiseRealization& noise, const std::vector<std::vector<double>>& psi);

// Isometry prediction sum_k dt_k <psi(k), psi(k)>_{alpha,rho}.
double isometry_variance(const std::vector<double>& weights, const TimeGrid& grid,
                         const std::vector<std::vector<double>>& psi);

// Little-endian layout: int32 d, int32 kmax, uint64 K (steps), uint64 seed,
// then K rows of N_modes float64 increments.
void write_noise_dump(const std::string& path, const NoiseRealization& noise,
                      const SpectralBasis& basis);
NoiseRealization read_noise_dump(const std::string& path, int& d, int& kmax);

}  // namespace pamlab
