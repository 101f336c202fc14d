#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pamlab/torus.hpp"

namespace pamlab {

using LatticeVector = std::array<int, 3>;

// Geodesic from x to y in the homotopy class v: the straight segment from x
// to y + v * L in the universal cover.
struct GeodesicLift {
  LatticeVector v{0, 0, 0};
  Point direction{0.0, 0.0, 0.0};  // y - x + v * L
  double length = 0.0;

  Point at(const TorusSpec& spec, const Point& x, double a) const;
};

// All classes with length <= bound (plus 1e-12), sorted by length. The box
// |v_i| <= ceil(bound / L_i) + 1 contains every such class.
std::vector<GeodesicLift> enumerate_geodesics(const TorusSpec& spec, const Point& x, const Point& y,
                                              double bound);

// F_a(z, x, y) = (1-a) d(x,z)^2 + a d(z,y)^2 - a(1-a) d(x,y)^2, which
// vanishes at the point a of the way along a minimizing geodesic x -> y.
double bridge_functional(const TorusSpec& spec, double a, const Point& z, const Point& x,
                         const Point& y);

// Minimizing classes of the lift x -> z (ties within tol on length).
std::vector<LatticeVector> minimizing_classes(const TorusSpec& spec, const Point& from,
                                              const Point& to, double tol = 1e-12);

// Indices into `geodesics` of the classes obtained by composing a
// minimizing x -> z lift with a minimizing z -> y lift. More than one index
// means z sits on a cut locus. Throws InternalConsistency if a composed
// class is missing from the list.
std::vector<std::size_t> sausage_assignment(const TorusSpec& spec, const Point& z, const Point& x,
                                            const Point& y,
                                            const std::vector<GeodesicLift>& geodesics);

struct SausageWitness {
  Point x{}, y{}, z{};
  double a = 0.0;
  double functional = 0.0;
  double bound = 0.0;
};

struct SausageReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  // Largest (max_i d(z, gamma_i(a))^2 - F_a); <= 0 when the inequality holds.
  double max_violation = -1e300;
  std::size_t corollary_samples = 0;  // z outside every restricted ball
  std::size_t corollary_violations = 0;
  std::size_t multi_index_samples = 0;
  std::size_t max_geodesics = 0;
  SausageWitness worst;
};

enum class SausageSampling { uniform, near_cut_locus };

// Uniform (x, y, z, a) or z placed within 1e-3 of a cut locus of x or y.
SausageReport verify_sausage_inequality(const TorusSpec& spec, std::size_t n_samples,
                                        std::uint64_t seed,
                                        SausageSampling mode = SausageSampling::uniform,
                                        double tol = 1e-10);

struct GeodesicCountStats {
  std::size_t pairs = 0;
  std::size_t max_count = 0;
  double mean_count = 0.0;
};

// N_{2 * diameter}(x, y) over random pairs.
GeodesicCountStats geodesic_count_stats(const TorusSpec& spec, std::size_t n_pairs,
                                        std::uint64_t seed);

}  // namespace pamlab
