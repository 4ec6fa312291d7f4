#include "mvpp/fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvpp/error.hpp"

namespace mvpp {

FemMatrices fem_matrices(const Mesh& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
  std::vector<Eigen::Triplet<double>> c_trip;
  std::vector<Eigen::Triplet<double>> g_trip;
  c_trip.reserve(mesh.triangles.size() * 3);
  g_trip.reserve(mesh.triangles.size() * 9);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Point p[3] = {mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
    const double area = 0.5 * orient(p[0], p[1], p[2]);
    if (!(area >= 1e-12)) throw InputError("fem: sliver or inverted triangle " + std::to_string(t));
    // Edge opposite vertex k.
    const Point e[3] = {p[2] - p[1], p[0] - p[2], p[1] - p[0]};
    for (int i = 0; i < 3; ++i) {
      c_trip.emplace_back(tri[i], tri[i], area / 3.0);
      for (int j = 0; j < 3; ++j) g_trip.emplace_back(tri[i], tri[j], dot(e[i], e[j]) / (4.0 * area));
    }
  }
  FemMatrices out;
  out.C.resize(n, n);
  out.G.resize(n, n);
  out.C.setFromTriplets(c_trip.begin(), c_trip.end());
  out.G.setFromTriplets(g_trip.begin(), g_trip.end());
  return out;
}

FemMatrices fem_matrices_1d(std::span<const double> knots) {
  const auto n = static_cast<Eigen::Index>(knots.size());
  if (n < 2) throw InputError("fem1d: need at least two knots");
  std::vector<Eigen::Triplet<double>> c_trip, g_trip;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = knots[i + 1] - knots[i];
    if (!(h > 0.0)) throw InputError("fem1d: knots must be strictly increasing");
    c_trip.emplace_back(i, i, h / 2.0);
    c_trip.emplace_back(i + 1, i + 1, h / 2.0);
    g_trip.emplace_back(i, i, 1.0 / h);
    g_trip.emplace_back(i + 1, i + 1, 1.0 / h);
    g_trip.emplace_back(i, i + 1, -1.0 / h);
    g_trip.emplace_back(i + 1, i, -1.0 / h);
  }
  FemMatrices out;
  out.C.resize(n, n);
  out.G.resize(n, n);
  out.C.setFromTriplets(c_trip.begin(), c_trip.end());
  out.G.setFromTriplets(g_trip.begin(), g_trip.end());
  return out;
}

RowSparseMatrix projector(const Mesh& mesh, std::span<const Point> points) {
  const TriangleLocator locator(mesh);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(points.size() * 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int t = locator.locate(points[i]);
    if (t < 0) {
      throw InputError("projector: point " + std::to_string(i) + " (" + std::to_string(points[i].x) + ", " +
                       std::to_string(points[i].y) + ") lies outside the mesh");
    }
    auto w = locator.barycentric(t, points[i]);
    double s = 0.0;
    for (double& v : w) {
      v = std::max(v, 0.0);
      s += v;
    }
    for (int k = 0; k < 3; ++k) {
      const double v = w[k] / s;
      if (v > 0.0) trip.emplace_back(static_cast<int>(i), mesh.triangles[t][k], v);
    }
  }
  RowSparseMatrix a(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(mesh.vertices.size()));
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

RowSparseMatrix projector_1d(std::span<const double> knots, std::span<const double> values) {
  const auto n = static_cast<Eigen::Index>(knots.size());
  if (n < 2) throw InputError("projector_1d: need at least two knots");
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const int row = static_cast<int>(i);
    if (!std::isfinite(v)) throw InputError("projector_1d: non-finite value at row " + std::to_string(i));
    if (v <= knots.front()) {
      trip.emplace_back(row, 0, 1.0);
      continue;
    }
    if (v >= knots.back()) {
      trip.emplace_back(row, static_cast<int>(n - 1), 1.0);
      continue;
    }
    const auto it = std::upper_bound(knots.begin(), knots.end(), v);
    const int hi = static_cast<int>(it - knots.begin());
    const int lo = hi - 1;
    const double t = (v - knots[lo]) / (knots[hi] - knots[lo]);
    if (t < 1.0) trip.emplace_back(row, lo, 1.0 - t);
    if (t > 0.0) trip.emplace_back(row, hi, t);
  }
  RowSparseMatrix a(static_cast<Eigen::Index>(values.size()), n);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

}  // namespace mvpp
