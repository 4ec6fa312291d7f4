#pragma once

#include <array>
#include <span>
#include <vector>

#include "mvpp/geometry.hpp"

namespace mvpp {

/// Delaunay triangulation of a planar point set (sweep-hull construction with
/// edge flips). Triangles are counter-clockwise. Points closer than 1e-12 to an
/// earlier point, and points lying exactly on the running convex hull, can be
/// skipped; `used` records which inputs made it into the triangulation.
struct Triangulation {
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> hull;
  std::vector<bool> used;
};

Triangulation delaunay(std::span<const Point> points);

}  // namespace mvpp
