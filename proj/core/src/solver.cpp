#include "pamlab/solver.hpp"

#include <cmath>
#include <string>

#include "pamlab/errors.hpp"
#include "pamlab/parallel.hpp"

namespace pamlab {

InitialCondition InitialCondition::dirac(const Point& x0) {
  InitialCondition ic;
  ic.kind = Kind::dirac;
  ic.x0 = x0;
  return ic;
}

InitialCondition InitialCondition::uniform(double c) {
  InitialCondition ic;
  ic.kind = Kind::uniform;
  ic.c = c;
  return ic;
}

InitialCondition InitialCondition::from_density(std::vector<double> coeffs) {
  InitialCondition ic;
  ic.kind = Kind::density;
  ic.density = std::move(coeffs);
  return ic;
}

std::vector<double> InitialCondition::coefficients(const SpectralBasis& basis) const {
  std::vector<double> a(basis.size(), 0.0);
  switch (kind) {
    case Kind::dirac:
      basis.evaluate_all(basis.spec().wrap(x0), a);
      break;
    case Kind::uniform:
      a[0] = c * std::sqrt(basis.spec().volume());
      break;
    case Kind::density:
      if (density.size() != basis.size())
        throw InvalidConfig("density coefficients do not match the truncation");
      a = density;
      break;
  }
  return a;
}

double InitialCondition::mass(const SpectralBasis& basis) const {
  switch (kind) {
    case Kind::dirac: return 1.0;
    case Kind::uniform: return c * basis.spec().volume();
    case Kind::density: return density.at(0) * std::sqrt(basis.spec().volume());
  }
  return 0.0;
}

double homogeneous_solution(const SpectralBasis& basis, const InitialCondition& ic, double t,
                            const Point& x) {
  switch (ic.kind) {
    case InitialCondition::Kind::uniform:
      return ic.c;
    case InitialCondition::Kind::dirac:
      if (!(t > 0.0)) throw DomainError("J_0 of a Dirac mass needs t > 0");
      return heat_kernel(basis, t, x, ic.x0);
    case InitialCondition::Kind::density: {
      std::vector<double> a = ic.coefficients(basis);
      heat_flow(basis, t, a);
      std::vector<double> phi(basis.size());
      basis.evaluate_all(x, phi);
      double s = 0.0;
      for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * phi[n];
      return s;
    }
  }
  return 0.0;
}

Stepper::Stepper(std::shared_ptr<const SpectralBasis> basis, const NoiseParams& params,
                 int grid_factor)
    : basis_(basis), params_(params), transform_(std::move(basis), grid_factor) {}

Stepper::Workspace Stepper::workspace() const {
  const std::size_t n = transform_.grid_size();
  return Workspace{transform_.workspace(), std::vector<double>(n), std::vector<double>(n),
                   std::vector<double>(basis_->size())};
}

const std::vector<double>& Stepper::factors(double dt) const {
  for (const auto& [key, f] : factor_cache_)
    if (std::abs(key - dt) <= 1e-12 * dt) return f;
  factor_cache_.emplace_back(dt, basis_->heat_factors(dt));
  return factor_cache_.back().second;
}

void Stepper::prepare(double dt) const { (void)factors(dt); }

void Stepper::step(std::span<double> coeffs, std::span<const double> increment, double dt,
                   Workspace& ws, std::size_t step_index, std::uint64_t path) const {
  const std::vector<double>& f = factors(dt);
  if (params_.beta == 0.0) {
    for (std::size_t n = 0; n < coeffs.size(); ++n) coeffs[n] *= f[n];
    return;
  }
  transform_.synthesize(coeffs, ws.u_grid, ws.fft);
  transform_.synthesize(increment, ws.w_grid, ws.fft);
  for (std::size_t j = 0; j < ws.u_grid.size(); ++j) ws.u_grid[j] *= ws.w_grid[j];
  transform_.analyze(ws.u_grid, ws.product, ws.fft);
  const double beta = params_.beta;
  for (std::size_t n = 0; n < coeffs.size(); ++n) {
    const double a = f[n] * (coeffs[n] + beta * ws.product[n]);
    if (!std::isfinite(a))
      throw BlowUp("non-finite coefficient at step " + std::to_string(step_index) + ", path " +
                       std::to_string(path),
                   step_index, path);
    coeffs[n] = a;
  }
}

SpectralField step(const SpectralField& state, const NoiseIncrement& incr, double dt,
                   const NoiseParams& params, int grid_factor) {
  Stepper stepper(state.basis, params, grid_factor);
  auto ws = stepper.workspace();
  SpectralField out = state;
  stepper.step(out.coeffs, incr.values, dt, ws, incr.step);
  return out;
}

namespace {
std::vector<std::size_t> observation_steps(const TimeGrid& grid, const std::vector<double>& times,
                                           double t_min) {
  std::vector<std::size_t> idx;
  for (double t : times) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < grid.times.size(); ++k)
      if (std::abs(grid.times[k] - t) < std::abs(grid.times[best] - t)) best = k;
    if (std::abs(grid.times[best] - t) > 1e-9 * std::max(1.0, t))
      throw InvalidConfig("observation time " + std::to_string(t) + " is not a grid node");
    if (grid.times[best] < t_min)
      throw InvalidConfig("observation time " + std::to_string(t) +
                          " precedes the Dirac start-up layer t_min = " + std::to_string(t_min));
    idx.push_back(best);
  }
  return idx;
}

struct ChunkResult {
  // [time][probe][power], [time][pair], [time]
  std::vector<std::vector<std::vector<MomentSum>>> moments;
  std::vector<std::vector<MomentSum>> two_point;
  std::vector<MomentSum> spatial;
};
}  // namespace

EnsembleSummary run_ensemble(std::shared_ptr<const SpectralBasis> basis, const NoiseParams& params,
                             const InitialCondition& ic, const TimeGrid& grid, std::size_t paths,
                             std::uint64_t seed, const Observables& obs,
                             const EnsembleOptions& opt) {
  grid.validate();
  const int d = basis->spec().d;
  if (!params.dalang(d) && !opt.override_dalang)
    throw DalangViolated("noise.alpha = " + std::to_string(params.alpha) +
                         " violates the Dalang condition alpha > (d-2)/2 = " +
                         std::to_string(0.5 * (d - 2)));
  if (paths == 0) throw InvalidConfig("run.paths must be positive");

  EnsembleSummary out;
  out.paths = paths;
  out.seed = seed;
  out.t_min = ic.kind == InitialCondition::Kind::dirac ? 4.0 * grid.dt(0) : 0.0;
  const std::vector<std::size_t> obs_steps = observation_steps(grid, obs.times, out.t_min);
  for (std::size_t k : obs_steps) out.times.push_back(grid.times[k]);

  const std::size_t n_modes = basis->size();
  std::vector<std::vector<double>> phi(obs.probes.size(), std::vector<double>(n_modes));
  for (std::size_t p = 0; p < obs.probes.size(); ++p)
    basis->evaluate_all(basis->spec().wrap(obs.probes[p]), phi[p]);

  const Stepper stepper(basis, params, opt.grid_factor);
  NoiseSampler sampler(basis, params, seed);
  const std::vector<double> a0 = ic.coefficients(*basis);
  const double inv_sqrt_m0 = 1.0 / std::sqrt(basis->spec().volume());

  const std::size_t n_times = obs_steps.size();
  const std::size_t chunk = std::max<std::size_t>(1, opt.chunk);
  const std::size_t n_chunks = (paths + chunk - 1) / chunk;
  std::vector<ChunkResult> results(n_chunks);

  // The factor cache is not thread-safe; fill it before the workers start.
  for (std::size_t k = 0; k < grid.steps(); ++k) stepper.prepare(grid.dt(k));

  for_each_chunk(
      n_chunks,
      [&](std::size_t c) {
        ChunkResult& r = results[c];
        r.moments.assign(n_times, std::vector<std::vector<MomentSum>>(
                                      obs.probes.size(), std::vector<MomentSum>(obs.powers.size())));
        r.two_point.assign(n_times, std::vector<MomentSum>(obs.pairs.size()));
        r.spatial.assign(n_times, MomentSum{});
        auto ws = stepper.workspace();
        std::vector<double> a(n_modes), inc(n_modes), u(obs.probes.size());
        const std::size_t first = c * chunk;
        const std::size_t last = std::min(paths, first + chunk);
        for (std::size_t path = first; path < last; ++path) {
          a = a0;
          std::size_t next_obs = 0;
          auto record = [&](std::size_t ti) {
            for (std::size_t p = 0; p < obs.probes.size(); ++p) {
              double s = 0.0;
              for (std::size_t n = 0; n < n_modes; ++n) s += a[n] * phi[p][n];
              u[p] = s;
              for (std::size_t q = 0; q < obs.powers.size(); ++q)
                r.moments[ti][p][q].add(std::pow(s, obs.powers[q]));
            }
            for (std::size_t q = 0; q < obs.pairs.size(); ++q)
              r.two_point[ti][q].add(u[obs.pairs[q].first] * u[obs.pairs[q].second]);
            r.spatial[ti].add(a[0] * inv_sqrt_m0);
          };
          while (next_obs < n_times && obs_steps[next_obs] == 0) record(next_obs++);
          for (std::size_t k = 0; k < grid.steps() && next_obs < n_times; ++k) {
            const double dt = grid.dt(k);
            if (params.beta != 0.0) sampler.increment(path, k, dt, inc);
            stepper.step(a, inc, dt, ws, k, path);
            while (next_obs < n_times && obs_steps[next_obs] == k + 1) record(next_obs++);
          }
        }
      },
      opt.threads);

  out.moments.assign(n_times, std::vector<std::vector<Estimate>>(
                                  obs.probes.size(), std::vector<Estimate>(obs.powers.size())));
  out.two_point.assign(n_times, std::vector<Estimate>(obs.pairs.size()));
  out.spatial_mean.assign(n_times, Estimate{});
  out.j0.assign(n_times, std::vector<double>(obs.probes.size()));
  for (std::size_t ti = 0; ti < n_times; ++ti) {
    for (std::size_t p = 0; p < obs.probes.size(); ++p) {
      for (std::size_t q = 0; q < obs.powers.size(); ++q) {
        MomentSum m;
        for (const auto& r : results) m.merge(r.moments[ti][p][q]);
        out.moments[ti][p][q] = Estimate{m.mean(), m.standard_error()};
      }
      const double t = out.times[ti];
      out.j0[ti][p] = (t > 0.0 || ic.kind != InitialCondition::Kind::dirac)
                          ? homogeneous_solution(*basis, ic, t, obs.probes[p])
                          : 0.0;
    }
    for (std::size_t q = 0; q < obs.pairs.size(); ++q) {
      MomentSum m;
      for (const auto& r : results) m.merge(r.two_point[ti][q]);
      out.two_point[ti][q] = Estimate{m.mean(), m.standard_error()};
    }
    MomentSum m;
    for (const auto& r : results) m.merge(r.spatial[ti]);
    out.spatial_mean[ti] = Estimate{m.mean(), m.standard_error()};
  }
  return out;
}

std::vector<std::vector<double>> heat_trajectory(std::shared_ptr<const SpectralBasis> basis,
                                                 const InitialCondition& ic, const TimeGrid& grid) {
  grid.validate();
  NoiseParams quiet;
  quiet.beta = 0.0;
  Stepper stepper(basis, quiet);
  auto ws = stepper.workspace();
  std::vector<double> a = ic.coefficients(*basis);
  std::vector<double> zero(a.size(), 0.0);
  std::vector<std::vector<double>> out{a};
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    stepper.step(a, zero, grid.dt(k), ws, k);
    out.push_back(a);
  }
  return out;
}

}  // namespace pamlab
