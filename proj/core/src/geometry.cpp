#include "pamlab/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "pamlab/errors.hpp"
#include "pamlab/random.hpp"

namespace pamlab {

Point GeodesicLift::at(const TorusSpec& spec, const Point& x, double a) const {
  Point p = x;
  for (int i = 0; i < spec.d; ++i) p[i] += a * direction[i];
  return spec.wrap(p);
}

std::vector<GeodesicLift> enumerate_geodesics(const TorusSpec& spec, const Point& x, const Point& y,
                                              double bound) {
  if (!(bound > 0.0)) throw DomainError("geodesic length bound must be positive");
  const Point xw = spec.wrap(x);
  const Point yw = spec.wrap(y);
  LatticeVector box{0, 0, 0};
  for (int i = 0; i < spec.d; ++i)
    box[i] = static_cast<int>(std::ceil(bound / spec.length(i))) + 1;
  std::vector<GeodesicLift> out;
  LatticeVector v{0, 0, 0};
  for (v[0] = -box[0]; v[0] <= box[0]; ++v[0])
    for (v[1] = -box[1]; v[1] <= box[1]; ++v[1])
      for (v[2] = -box[2]; v[2] <= box[2]; ++v[2]) {
        GeodesicLift g;
        g.v = v;
        for (int i = 0; i < spec.d; ++i) g.direction[i] = yw[i] - xw[i] + v[i] * spec.length(i);
        g.length = std::sqrt(norm2(g.direction, spec.d));
        if (g.length <= bound + 1e-12) out.push_back(g);
      }
  std::stable_sort(out.begin(), out.end(), [](const GeodesicLift& a, const GeodesicLift& b) {
    if (a.length != b.length) return a.length < b.length;
    return a.v < b.v;
  });
  return out;
}

double bridge_functional(const TorusSpec& spec, double a, const Point& z, const Point& x,
                         const Point& y) {
  if (!(a > 0.0 && a < 1.0)) throw DomainError("F_a needs a in (0, 1)");
  return (1.0 - a) * spec.distance2(x, z) + a * spec.distance2(z, y) -
         a * (1.0 - a) * spec.distance2(x, y);
}

std::vector<LatticeVector> minimizing_classes(const TorusSpec& spec, const Point& from,
                                              const Point& to, double tol) {
  const Point f = spec.wrap(from);
  const Point t = spec.wrap(to);
  std::array<int, 3> centre{0, 0, 0};
  for (int i = 0; i < spec.d; ++i)
    centre[i] = -static_cast<int>(std::nearbyint((t[i] - f[i]) / spec.length(i)));
  std::vector<std::pair<double, LatticeVector>> cand;
  LatticeVector off{0, 0, 0};
  const int r1 = spec.d >= 2 ? 1 : 0;
  const int r2 = spec.d >= 3 ? 1 : 0;
  for (off[0] = -1; off[0] <= 1; ++off[0])
    for (off[1] = -r1; off[1] <= r1; ++off[1])
      for (off[2] = -r2; off[2] <= r2; ++off[2]) {
        LatticeVector u{0, 0, 0};
        double len2 = 0.0;
        for (int i = 0; i < spec.d; ++i) {
          u[i] = centre[i] + off[i];
          const double c = t[i] - f[i] + u[i] * spec.length(i);
          len2 += c * c;
        }
        cand.emplace_back(std::sqrt(len2), u);
      }
  double best = cand.front().first;
  for (const auto& c : cand) best = std::min(best, c.first);
  std::vector<LatticeVector> out;
  for (const auto& c : cand)
    if (c.first <= best + tol) out.push_back(c.second);
  return out;
}

std::vector<std::size_t> sausage_assignment(const TorusSpec& spec, const Point& z, const Point& x,
                                            const Point& y,
                                            const std::vector<GeodesicLift>& geodesics) {
  const auto first = minimizing_classes(spec, x, z);
  const auto second = minimizing_classes(spec, z, y);
  std::vector<std::size_t> idx;
  for (const auto& u : first)
    for (const auto& w : second) {
      LatticeVector v{0, 0, 0};
      for (int i = 0; i < spec.d; ++i) v[i] = u[i] + w[i];
      auto it = std::find_if(geodesics.begin(), geodesics.end(),
                             [&](const GeodesicLift& g) { return g.v == v; });
      if (it == geodesics.end())
        throw InternalConsistency("composed homotopy class lies outside the enumerated geodesics");
      const auto k = static_cast<std::size_t>(it - geodesics.begin());
      if (std::find(idx.begin(), idx.end(), k) == idx.end()) idx.push_back(k);
    }
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {
Point random_point(const TorusSpec& spec, CounterRng& rng) {
  Point p{0.0, 0.0, 0.0};
  for (int i = 0; i < spec.d; ++i) p[i] = rng.uniform() * spec.length(i);
  return p;
}

// z near the cut locus of c: one coordinate at the antipode, jittered by
// at most 1e-3.
Point near_cut_locus(const TorusSpec& spec, const Point& c, CounterRng& rng) {
  Point z = random_point(spec, rng);
  const int axis = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(spec.d));
  z[axis] = c[axis] + 0.5 * spec.length(axis) + (2.0 * rng.uniform() - 1.0) * 1e-3;
  if (spec.d >= 2 && rng.uniform() < 0.25) {
    // Corner of the Voronoi cell: every axis antipodal.
    for (int i = 0; i < spec.d; ++i)
      z[i] = c[i] + 0.5 * spec.length(i) + (2.0 * rng.uniform() - 1.0) * 1e-3;
  }
  return spec.wrap(z);
}
}  // namespace

SausageReport verify_sausage_inequality(const TorusSpec& spec, std::size_t n_samples,
                                        std::uint64_t seed, SausageSampling mode, double tol) {
  spec.validate();
  SausageReport rep;
  const double bound = 2.0 * spec.diameter();
  const double delta = spec.delta();
  for (std::size_t s = 0; s < n_samples; ++s) {
    CounterRng rng(stream_key(seed, s, 0x5a5a));
    const Point x = random_point(spec, rng);
    const Point y = random_point(spec, rng);
    Point z;
    if (mode == SausageSampling::uniform) {
      z = random_point(spec, rng);
    } else {
      z = near_cut_locus(spec, rng.uniform() < 0.5 ? x : y, rng);
    }
    double a = rng.uniform();
    const auto geodesics = enumerate_geodesics(spec, x, y, bound);
    const auto idx = sausage_assignment(spec, z, x, y, geodesics);
    const double f = bridge_functional(spec, a, z, x, y);
    double worst = 0.0;
    double nearest = 1e300;
    for (std::size_t i : idx) {
      const double d2 = spec.distance2(z, geodesics[i].at(spec, x, a));
      worst = std::max(worst, d2);
      nearest = std::min(nearest, d2);
    }
    ++rep.samples;
    rep.max_geodesics = std::max(rep.max_geodesics, geodesics.size());
    if (idx.size() > 1) ++rep.multi_index_samples;
    const double excess = worst - f;
    if (excess > rep.max_violation) {
      rep.max_violation = excess;
      rep.worst = SausageWitness{x, y, z, a, f, worst};
    }
    if (excess > tol) ++rep.violations;
    if (nearest >= delta * delta) {
      ++rep.corollary_samples;
      if (f < delta * delta - tol) ++rep.corollary_violations;
    }
  }
  return rep;
}

GeodesicCountStats geodesic_count_stats(const TorusSpec& spec, std::size_t n_pairs,
                                        std::uint64_t seed) {
  GeodesicCountStats st;
  const double bound = 2.0 * spec.diameter();
  double total = 0.0;
  for (std::size_t s = 0; s < n_pairs; ++s) {
    CounterRng rng(stream_key(seed, s, 0x9e0));
    const Point x = random_point(spec, rng);
    const Point y = random_point(spec, rng);
    const std::size_t n = enumerate_geodesics(spec, x, y, bound).size();
    st.max_count = std::max(st.max_count, n);
    total += static_cast<double>(n);
  }
  st.pairs = n_pairs;
  st.mean_count = n_pairs ? total / static_cast<double>(n_pairs) : 0.0;
  return st;
}

}  // namespace pamlab
