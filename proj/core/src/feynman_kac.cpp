#include "pamlab/feynman_kac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pamlab/errors.hpp"
#include "pamlab/manifold.hpp"
#include "pamlab/parallel.hpp"

namespace pamlab {

BrownianPair::BrownianPair(const TorusSpec& spec, const Point& start, double dt,
                           std::uint64_t seed, std::uint64_t pair)
    : spec_(&spec),
      sd_(std::sqrt(dt)),
      rng_(stream_key(seed, pair, 0xb0)),
      a_(spec.wrap(start)),
      b_(spec.wrap(start)) {}

void BrownianPair::advance() {
  for (int i = 0; i < spec_->d; ++i) a_[i] += sd_ * rng_.normal();
  for (int i = 0; i < spec_->d; ++i) b_[i] += sd_ * rng_.normal();
  a_ = spec_->wrap(a_);
  b_ = spec_->wrap(b_);
}

PathEnsemble simulate_pairs(const TorusSpec& spec, const Point& x, double t_final, double dt,
                            std::size_t pairs, std::uint64_t seed) {
  spec.validate();
  if (!(dt > 0.0 && dt <= 1e-2 * t_final * (1.0 + 1e-12)))
    throw InvalidConfig("path time step must satisfy 0 < dt <= t_final / 100");
  PathEnsemble e;
  e.spec = spec;
  e.start = spec.wrap(x);
  e.dt = dt;
  e.steps = static_cast<std::size_t>(std::llround(t_final / dt));
  e.seed = seed;
  e.first.resize(pairs);
  e.second.resize(pairs);
  for (std::size_t p = 0; p < pairs; ++p) {
    BrownianPair bp(e.spec, x, dt, seed, p);
    e.first[p].reserve(e.steps + 1);
    e.second[p].reserve(e.steps + 1);
    e.first[p].push_back(bp.first());
    e.second[p].push_back(bp.second());
    for (std::size_t k = 0; k < e.steps; ++k) {
      bp.advance();
      e.first[p].push_back(bp.first());
      e.second[p].push_back(bp.second());
    }
  }
  return e;
}

double truncated_covariance(const TorusSpec& spec, int kmax, const NoiseParams& params,
                            const Point& x, const Point& y) {
  const double alpha = params.alpha;
  return params.rho / spec.volume() +
         half_lattice_cosine_sum(spec, kmax, spec.displacement(x, y),
                                 [alpha](double lam) { return std::pow(lam, -alpha); });
}

namespace {
struct PointSums {
  MomentSum value;      // f f' e^{beta^2 I}
  MomentSum weight;     // e^{beta^2 I}, for ESS
  MomentSum exponent;   // I
};
}  // namespace

FkCurve fk_second_moment(const TorusSpec& spec, const NoiseParams& params,
                         const std::function<double(const Point&)>& f, double epsilon,
                         const Point& x, const std::vector<double>& times, const FkConfig& cfg) {
  spec.validate();
  if (!(epsilon > 0.0)) throw InvalidConfig("Feynman-Kac needs f >= epsilon > 0");
  if (cfg.pairs < 2) throw InvalidConfig("Feynman-Kac needs at least two path pairs");
  if (times.empty()) throw InvalidConfig("no observation times");
  const double t_final = *std::max_element(times.begin(), times.end());
  if (!(cfg.dt > 0.0 && cfg.dt <= 1e-2 * t_final * (1.0 + 1e-12)))
    throw InvalidConfig("path time step must satisfy 0 < dt <= t_final / 100");
  std::vector<std::size_t> obs;
  for (double t : times) {
    const auto k = static_cast<std::size_t>(std::llround(t / cfg.dt));
    if (std::abs(static_cast<double>(k) * cfg.dt - t) > 1e-9 * std::max(1.0, t))
      throw InvalidConfig("observation time is not a multiple of the path time step");
    obs.push_back(k);
  }
  const std::size_t steps = *std::max_element(obs.begin(), obs.end());
  const double b2 = params.beta * params.beta;
  // The linear-growth sanity bound on the exponential moment.
  double g_max = truncated_covariance(spec, cfg.kmax, params, x, x);
  if (b2 * g_max * t_final > 20.0)
    throw InvalidConfig("beta^2 * max G * t_final exceeds 20; Monte Carlo variance unusable");

  const std::size_t n_chunks = std::min<std::size_t>(cfg.pairs, 16 * std::max<std::size_t>(cfg.batches, 1));
  std::vector<std::vector<PointSums>> sums(n_chunks, std::vector<PointSums>(obs.size()));
  for_each_chunk(
      n_chunks,
      [&](std::size_t c) {
        const std::size_t first = c * cfg.pairs / n_chunks;
        const std::size_t last = (c + 1) * cfg.pairs / n_chunks;
        for (std::size_t p = first; p < last; ++p) {
          BrownianPair bp(spec, x, cfg.dt, cfg.seed, p);
          double integral = 0.0;
          double g_prev = truncated_covariance(spec, cfg.kmax, params, bp.first(), bp.second());
          auto record = [&](std::size_t k) {
            for (std::size_t i = 0; i < obs.size(); ++i) {
              if (obs[i] != k) continue;
              const double w = std::exp(b2 * integral);
              sums[c][i].value.add(f(bp.first()) * f(bp.second()) * w);
              sums[c][i].weight.add(w);
              sums[c][i].exponent.add(integral);
            }
          };
          record(0);
          for (std::size_t k = 1; k <= steps; ++k) {
            bp.advance();
            const double g = truncated_covariance(spec, cfg.kmax, params, bp.first(), bp.second());
            integral += 0.5 * cfg.dt * (g_prev + g);
            g_prev = g;
            record(k);
          }
        }
      },
      cfg.threads);

  FkCurve curve;
  curve.epsilon = epsilon;
  const std::size_t batches = std::max<std::size_t>(1, std::min(cfg.batches, n_chunks));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    PointSums total;
    std::vector<MomentSum> per_batch(batches);
    for (std::size_t c = 0; c < n_chunks; ++c) {
      total.value.merge(sums[c][i].value);
      total.weight.merge(sums[c][i].weight);
      total.exponent.merge(sums[c][i].exponent);
      per_batch[c * batches / n_chunks].merge(sums[c][i].value);
    }
    FkPoint pt;
    pt.t = static_cast<double>(obs[i]) * cfg.dt;
    pt.estimate = total.value.mean();
    pt.stderr_of_mean = total.value.standard_error();
    const double sw = total.weight.sum, sw2 = total.weight.sum_sq;
    pt.ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
    pt.low_ess = pt.ess < 100.0;
    pt.mean_exponent = total.exponent.mean();
    pt.jensen_floor = epsilon * epsilon * std::exp(b2 * pt.mean_exponent);
    for (const auto& b : per_batch) pt.batch_estimates.push_back(b.mean());
    if (pt.estimate < pt.jensen_floor * (1.0 - 1e-12))
      throw InternalConsistency("Feynman-Kac estimate below its Jensen floor");
    curve.points.push_back(pt);
  }
  return curve;
}

GrowthRate growth_rate(const FkCurve& curve, double t_lo, double t_hi, double reference) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < curve.points.size(); ++i)
    if (curve.points[i].t >= t_lo - 1e-12 && curve.points[i].t <= t_hi + 1e-12) idx.push_back(i);
  if (idx.size() < 3) throw InvalidConfig("growth-rate window needs at least three curve points");
  GrowthRate out;
  out.reference = reference;
  out.points = idx.size();
  std::vector<double> t, y;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const FkPoint& p = curve.points[idx[k]];
    if (!(p.estimate > 0.0)) throw UnreliableFit("non-positive second-moment estimate");
    t.push_back(p.t);
    y.push_back(std::log(p.estimate));
    if (k > 0) {
      const FkPoint& q = curve.points[idx[k - 1]];
      const double drop = std::log(q.estimate) - y.back();
      const double se = std::hypot(q.stderr_of_mean / q.estimate, p.stderr_of_mean / p.estimate);
      if (drop > 3.0 * se && drop > 1e-14)
        throw UnreliableFit("log second moment decreases beyond its error bars");
    }
  }
  out.c_hat = least_squares_line(t, y).slope;
  // Spread of the slope across independent batches of paths.
  const std::size_t nb = curve.points[idx[0]].batch_estimates.size();
  MomentSum slopes;
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<double> yb;
    bool ok = true;
    for (std::size_t i : idx) {
      const double v = curve.points[i].batch_estimates[b];
      if (!(v > 0.0)) ok = false;
      yb.push_back(std::log(v));
    }
    if (ok) slopes.add(least_squares_line(t, yb).slope);
  }
  out.ci = slopes.count >= 2 ? 1.96 * slopes.standard_error() : std::numeric_limits<double>::infinity();
  return out;
}

DiagonalValue g_alpha_plus_one_diagonal(const TorusSpec& spec, int kmax, double alpha,
                                        const Point& x) {
  if (!(alpha + 1.0 > 0.5 * spec.d))
    throw DomainError("G_{alpha+1} is finite on the diagonal only for alpha + 1 > d/2");
  const KernelValue v = g_alpha_spectral(spec, kmax, alpha + 1.0, x, x);
  if (!(v.tail <= 0.01 * std::abs(v.value))) {
    const int need = static_cast<int>(
        std::ceil(kmax * std::pow(v.tail / (0.01 * std::abs(v.value)), 1.0 / (2.0 * (alpha + 1.0) - spec.d))));
    throw TruncationInsufficient("G_{alpha+1} tail exceeds 1% of the value", need);
  }
  return DiagonalValue{v.value, v.tail};
}

Estimate1 time_integrated_covariance(const TorusSpec& spec, double alpha, int kmax,
                                     const Point& x, double t_final, double dt, std::size_t pairs,
                                     std::uint64_t seed, unsigned threads) {
  NoiseParams p;
  p.alpha = alpha;
  p.rho = 0.0;
  const auto steps = static_cast<std::size_t>(std::llround(t_final / dt));
  const std::size_t n_chunks = std::min<std::size_t>(pairs, 64);
  std::vector<MomentSum> sums(n_chunks);
  for_each_chunk(
      n_chunks,
      [&](std::size_t c) {
        for (std::size_t q = c * pairs / n_chunks; q < (c + 1) * pairs / n_chunks; ++q) {
          BrownianPair bp(spec, x, dt, seed, q);
          double g_prev = truncated_covariance(spec, kmax, p, bp.first(), bp.second());
          double integral = 0.0;
          for (std::size_t k = 0; k < steps; ++k) {
            bp.advance();
            const double g = truncated_covariance(spec, kmax, p, bp.first(), bp.second());
            integral += 0.5 * dt * (g_prev + g);
            g_prev = g;
          }
          sums[c].add(integral);
        }
      },
      threads);
  MomentSum total;
  for (const auto& s : sums) total.merge(s);
  return Estimate1{total.mean(), total.standard_error()};
}

}  // namespace pamlab
