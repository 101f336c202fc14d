#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "pamlab/covariance.hpp"
#include "pamlab/manifold.hpp"
#include "pamlab/noise.hpp"

namespace pamlab {

struct InitialCondition {
  enum class Kind { dirac, density, uniform };

  Kind kind = Kind::uniform;
  Point x0{0.0, 0.0, 0.0};
  std::vector<double> density;  // coefficients, Kind::density only
  double c = 1.0;               // Kind::uniform only

  static InitialCondition dirac(const Point& x0);
  static InitialCondition uniform(double c);
  static InitialCondition from_density(std::vector<double> coeffs);

  // Truncated eigen-moments: phi_n(x0) for a Dirac mass, c sqrt(m0) on the
  // constant mode for a uniform density.
  std::vector<double> coefficients(const SpectralBasis& basis) const;
  double mass(const SpectralBasis& basis) const;
};

// J_0(t, x) = int P_t(x, y) mu(dy).
double homogeneous_solution(const SpectralBasis& basis, const InitialCondition& ic, double t,
                            const Point& x);

// Exponential-Euler step with an Ito (pre-step) product:
//   a <- e^{-lambda dt/2} (a + beta * coeffs(u_grid * dW_grid)).
class Stepper {
 public:
  Stepper(std::shared_ptr<const SpectralBasis> basis, const NoiseParams& params,
          int grid_factor = 2);

  const GridTransform& transform() const { return transform_; }
  const NoiseParams& params() const { return params_; }

  struct Workspace {
    GridTransform::Workspace fft;
    std::vector<double> u_grid;
    std::vector<double> w_grid;
    std::vector<double> product;
  };
  Workspace workspace() const;

  // Caches e^{-lambda dt/2}; call for every dt before sharing across threads.
  void prepare(double dt) const;

  // Throws BlowUp on non-finite coefficients.
  void step(std::span<double> coeffs, std::span<const double> increment, double dt,
            Workspace& ws, std::size_t step_index = 0, std::uint64_t path = 0) const;

 private:
  std::shared_ptr<const SpectralBasis> basis_;
  NoiseParams params_;
  GridTransform transform_;
  mutable std::vector<std::pair<double, std::vector<double>>> factor_cache_;
  const std::vector<double>& factors(double dt) const;
};

SpectralField step(const SpectralField& state, const NoiseIncrement& incr, double dt,
                   const NoiseParams& params, int grid_factor = 2);

struct Observables {
  std::vector<Point> probes;
  std::vector<int> powers{1, 2, 4};
  // Index pairs into probes for E[u(t,x) u(t,x')].
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  // Requested observation times; each must coincide with a grid node.
  std::vector<double> times;
};

struct EnsembleOptions {
  int grid_factor = 2;
  bool override_dalang = false;
  unsigned threads = 0;
  std::size_t chunk = 64;
};

struct Estimate {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
};

struct EnsembleSummary {
  std::vector<double> times;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double t_min = 0.0;
  // moments[time][probe][power index]
  std::vector<std::vector<std::vector<Estimate>>> moments;
  // two_point[time][pair]
  std::vector<std::vector<Estimate>> two_point;
  // spatial mean of u, i.e. a_0 / sqrt(m0)
  std::vector<Estimate> spatial_mean;
  // J_0 at each probe, same indexing as moments without the power axis
  std::vector<std::vector<double>> j0;
};

// Streams observables over M i.i.d. paths. Dirac data only admits
// observation times >= 4 dt. Requires the Dalang condition unless
// overridden.
EnsembleSummary run_ensemble(std::shared_ptr<const SpectralBasis> basis, const NoiseParams& params,
                             const InitialCondition& ic, const TimeGrid& grid, std::size_t paths,
                             std::uint64_t seed, const Observables& obs,
                             const EnsembleOptions& opt = {});

// Deterministic beta = 0 trajectory at the grid nodes, for comparison with
// the analytic heat flow.
std::vector<std::vector<double>> heat_trajectory(std::shared_ptr<const SpectralBasis> basis,
                                                 const InitialCondition& ic, const TimeGrid& grid);

}  // namespace pamlab
