#pragma once

#include <array>
#include <vector>

namespace pamlab {

// Coordinates beyond the torus dimension are ignored and kept at zero.
using Point = std::array<double, 3>;

struct TorusSpec {
  int d = 1;
  std::vector<double> lengths{1.0};

  static TorusSpec unit(int dim);

  void validate() const;

  double length(int axis) const { return lengths[static_cast<std::size_t>(axis)]; }
  double volume() const;
  double min_length() const;
  double injectivity_radius() const { return 0.5 * min_length(); }
  double delta() const { return injectivity_radius() / 8.0; }
  double diameter() const;

  Point wrap(Point x) const;
  // Minimal-image representative of y - x, each component in [-L/2, L/2].
  Point displacement(const Point& x, const Point& y) const;
  double distance2(const Point& x, const Point& y) const;
  double distance(const Point& x, const Point& y) const;
};

double norm2(const Point& v, int d);

}  // namespace pamlab
