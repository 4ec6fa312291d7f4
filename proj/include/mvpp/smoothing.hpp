#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mvpp/geometry.hpp"

namespace mvpp {

/// Regular grid of square cells; cell (i, j) has centre
/// origin + ((i + 0.5) * cell, (j + 0.5) * cell).
struct GridSpec {
  Point origin;
  double cell = 1.0;
  int nx = 1;
  int ny = 1;

  /// Grid covering the window bounding box with `res` cells along its longer side.
  static GridSpec covering(const Window& window, int res);

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i); }
  Point centre(int i, int j) const { return {origin.x + (i + 0.5) * cell, origin.y + (j + 0.5) * cell}; }
  Point centre(std::size_t k) const { return centre(static_cast<int>(k % static_cast<std::size_t>(nx)), static_cast<int>(k / static_cast<std::size_t>(nx))); }
  /// Cell containing p, or -1 outside the grid.
  long locate(Point p) const;
  double cell_area() const { return cell * cell; }
};

/// Values on a grid with a mask of cells whose centre lies in the window. NaN
/// marks undefined cells (e.g. a risk ratio with a vanishing denominator).
struct GridField {
  GridSpec spec;
  std::vector<double> values;
  std::vector<bool> mask;
  /// Set when the field was produced from degenerate input (empty pattern).
  bool warning = false;
  std::string note;

  static GridField zeros(const GridSpec& spec, const Window& window);

  /// Value of the cell containing p (0 outside the grid).
  double value_at(Point p) const;
  /// Sum of value * cell area over masked, defined cells.
  double integral() const;
  double max_masked() const;
  std::size_t n_masked() const;
  std::size_t n_undefined() const;

  void write_csv(std::ostream& out) const;
  void write_ascii_grid(std::ostream& out) const;
};

/// Gaussian kernel intensity estimate with uniform edge correction: the raw sum
/// of kernels at x is divided by the kernel mass inside the window at x.
GridField kernel_intensity(std::span<const Point> points, double bandwidth, const GridSpec& grid,
                           const Window& window, unsigned threads = 1);

/// rho(x) = lambda_cases(x) / lambda_controls(x) with a shared bandwidth; cells
/// where the control intensity is below 1e-10 * n0 / |W| are left undefined.
GridField risk_ratio(std::span<const Point> cases, std::span<const Point> controls, double bandwidth,
                     const GridSpec& grid, const Window& window, unsigned threads = 1);

}  // namespace mvpp
