#include "pamlab/torus.hpp"

#include <cmath>
#include <string>

#include "pamlab/errors.hpp"

namespace pamlab {

TorusSpec TorusSpec::unit(int dim) {
  return TorusSpec{dim, std::vector<double>(static_cast<std::size_t>(dim), 1.0)};
}

void TorusSpec::validate() const {
  if (d < 1 || d > 3) throw InvalidConfig("manifold.d must be 1, 2 or 3, got " + std::to_string(d));
  if (lengths.size() != static_cast<std::size_t>(d))
    throw InvalidConfig("manifold.lengths must have exactly d entries");
  for (double L : lengths)
    if (!(L > 0.0) || !std::isfinite(L)) throw InvalidConfig("manifold.lengths must be positive");
}

double TorusSpec::volume() const {
  double v = 1.0;
  for (int i = 0; i < d; ++i) v *= length(i);
  return v;
}

double TorusSpec::min_length() const {
  double m = length(0);
  for (int i = 1; i < d; ++i) m = std::min(m, length(i));
  return m;
}

double TorusSpec::diameter() const {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += 0.25 * length(i) * length(i);
  return std::sqrt(s);
}

Point TorusSpec::wrap(Point x) const {
  for (int i = 0; i < d; ++i) {
    const double L = length(i);
    double r = std::fmod(x[i], L);
    if (r < 0.0) r += L;
    if (r >= L) r -= L;
    x[i] = r;
  }
  for (int i = d; i < 3; ++i) x[i] = 0.0;
  return x;
}

Point TorusSpec::displacement(const Point& x, const Point& y) const {
  Point v{0.0, 0.0, 0.0};
  for (int i = 0; i < d; ++i) {
    const double L = length(i);
    double r = y[i] - x[i];
    r -= L * std::nearbyint(r / L);
    v[i] = r;
  }
  return v;
}

double TorusSpec::distance2(const Point& x, const Point& y) const {
  return norm2(displacement(x, y), d);
}

double TorusSpec::distance(const Point& x, const Point& y) const {
  return std::sqrt(distance2(x, y));
}

double norm2(const Point& v, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += v[i] * v[i];
  return s;
}

}  // namespace pamlab
