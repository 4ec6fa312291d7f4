#pragma once

#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "mvpp/geometry.hpp"

namespace mvpp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Piecewise-linear finite element matrices: lumped (diagonal) mass C and
/// stiffness G.
struct FemMatrices {
  SparseMatrix C;
  SparseMatrix G;
};

FemMatrices fem_matrices(const Mesh& mesh);

/// 1-D analogue on a sorted knot vector.
FemMatrices fem_matrices_1d(std::span<const double> knots);

/// Barycentric projector from mesh vertices to arbitrary points. Throws
/// InputError naming the first point that falls outside the mesh.
RowSparseMatrix projector(const Mesh& mesh, std::span<const Point> points);

/// Linear interpolation weights onto 1-D knots; values beyond either end clamp
/// to the nearest end knot.
RowSparseMatrix projector_1d(std::span<const double> knots, std::span<const double> values);

}  // namespace mvpp
