#include "mvpp/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

#include "mvpp/error.hpp"
#include "parallel.hpp"

namespace mvpp {

GridSpec GridSpec::covering(const Window& window, int res) {
  if (res < 1) throw InputError("grid: resolution must be positive");
  const Box& b = window.bbox();
  GridSpec g;
  g.cell = std::max(b.width(), b.height()) / res;
  g.nx = std::max(1, static_cast<int>(std::ceil(b.width() / g.cell - 1e-9)));
  g.ny = std::max(1, static_cast<int>(std::ceil(b.height() / g.cell - 1e-9)));
  // Centre the grid on the box.
  g.origin = {b.lo.x - 0.5 * (g.nx * g.cell - b.width()), b.lo.y - 0.5 * (g.ny * g.cell - b.height())};
  return g;
}

long GridSpec::locate(Point p) const {
  const double fx = (p.x - origin.x) / cell;
  const double fy = (p.y - origin.y) / cell;
  if (!(fx >= 0.0) || !(fy >= 0.0)) return -1;
  int i = static_cast<int>(fx);
  int j = static_cast<int>(fy);
  // The far edges belong to the last cell.
  if (i == nx && fx <= nx + 1e-9) i = nx - 1;
  if (j == ny && fy <= ny + 1e-9) j = ny - 1;
  if (i >= nx || j >= ny) return -1;
  return static_cast<long>(index(i, j));
}

GridField GridField::zeros(const GridSpec& spec, const Window& window) {
  if (!(spec.cell > 0.0) || spec.nx < 1 || spec.ny < 1) throw InputError("grid: invalid specification");
  GridField f;
  f.spec = spec;
  f.values.assign(spec.size(), 0.0);
  f.mask.resize(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) f.mask[k] = window.contains(spec.centre(k));
  return f;
}

double GridField::value_at(Point p) const {
  const long k = spec.locate(p);
  return k < 0 ? 0.0 : values[static_cast<std::size_t>(k)];
}

double GridField::integral() const {
  double s = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (mask[k] && std::isfinite(values[k])) s += values[k];
  return s * spec.cell_area();
}

double GridField::max_masked() const {
  double m = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (mask[k] && std::isfinite(values[k])) m = std::max(m, values[k]);
  return m;
}

std::size_t GridField::n_masked() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

std::size_t GridField::n_undefined() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (mask[k] && !std::isfinite(values[k])) ++n;
  return n;
}

void GridField::write_csv(std::ostream& out) const {
  out << "x,y,value\n" << std::setprecision(10);
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!mask[k]) continue;
    const Point c = spec.centre(k);
    out << c.x << ',' << c.y << ',';
    if (std::isfinite(values[k]))
      out << std::setprecision(12) << values[k] << std::setprecision(10);
    else
      out << "NA";
    out << '\n';
  }
}

void GridField::write_ascii_grid(std::ostream& out) const {
  constexpr double nodata = -9999.0;
  out << std::setprecision(12);
  out << "ncols " << spec.nx << "\nnrows " << spec.ny << "\nxllcorner " << spec.origin.x << "\nyllcorner "
      << spec.origin.y << "\ncellsize " << spec.cell << "\nNODATA_value " << nodata << '\n';
  for (int j = spec.ny - 1; j >= 0; --j) {
    for (int i = 0; i < spec.nx; ++i) {
      const std::size_t k = spec.index(i, j);
      const double v = mask[k] && std::isfinite(values[k]) ? values[k] : nodata;
      out << (i ? " " : "") << v;
    }
    out << '\n';
  }
}

namespace {

// Points bucketed by grid cell so each evaluation only visits nearby points.
struct Buckets {
  const GridSpec& g;
  std::vector<std::vector<std::size_t>> cells;

  Buckets(const GridSpec& grid, std::span<const Point> pts) : g(grid), cells(grid.size()) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Point p = pts[i];
      const int ci = std::clamp(static_cast<int>(std::floor((p.x - g.origin.x) / g.cell)), 0, g.nx - 1);
      const int cj = std::clamp(static_cast<int>(std::floor((p.y - g.origin.y) / g.cell)), 0, g.ny - 1);
      cells[g.index(ci, cj)].push_back(i);
    }
  }
};

}  // namespace

GridField kernel_intensity(std::span<const Point> points, double bandwidth, const GridSpec& grid,
                           const Window& window, unsigned threads) {
  if (!(bandwidth > 0.0)) throw InputError("kernel intensity: bandwidth must be positive");
  GridField f = GridField::zeros(grid, window);
  if (points.empty()) {
    f.warning = true;
    f.note = "empty pattern: intensity set to zero";
    return f;
  }
  // Slightly widened so cells exactly 4h away are treated alike on both sides.
  const double cut = 4.0 * bandwidth * (1.0 + 1e-12);
  const int reach = static_cast<int>(std::ceil(cut / grid.cell)) + 1;
  const double norm = 1.0 / (2.0 * std::numbers::pi * bandwidth * bandwidth);
  const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  const Buckets buckets(grid, points);

  detail::parallel_for(static_cast<std::size_t>(grid.ny), threads, [&](std::size_t row) {
    const int j = static_cast<int>(row);
    for (int i = 0; i < grid.nx; ++i) {
      const Point x = grid.centre(i, j);
      double raw = 0.0, mass = 0.0;
      for (int dj = -reach; dj <= reach; ++dj) {
        const int jj = j + dj;
        if (jj < 0 || jj >= grid.ny) continue;
        for (int di = -reach; di <= reach; ++di) {
          const int ii = i + di;
          if (ii < 0 || ii >= grid.nx) continue;
          const std::size_t c = grid.index(ii, jj);
          if (f.mask[c]) {
            const Point d = grid.centre(ii, jj) - x;
            const double r2 = d.x * d.x + d.y * d.y;
            if (r2 <= cut * cut) mass += norm * std::exp(-r2 * inv2h2);
          }
          for (std::size_t p : buckets.cells[c]) {
            const Point d = points[p] - x;
            const double r2 = d.x * d.x + d.y * d.y;
            if (r2 <= cut * cut) raw += norm * std::exp(-r2 * inv2h2);
          }
        }
      }
      mass *= grid.cell_area();
      f.values[grid.index(i, j)] = mass > 1e-12 ? raw / mass : 0.0;
    }
  });
  return f;
}

GridField risk_ratio(std::span<const Point> cases, std::span<const Point> controls, double bandwidth,
                     const GridSpec& grid, const Window& window, unsigned threads) {
  if (cases.empty() || controls.empty()) throw InputError("risk ratio: both patterns must be non-empty");
  const GridField num = kernel_intensity(cases, bandwidth, grid, window, threads);
  const GridField den = kernel_intensity(controls, bandwidth, grid, window, threads);
  GridField out = num;
  const double eps = 1e-10 * static_cast<double>(controls.size()) / window.area();
  std::size_t undefined = 0;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    if (den.values[k] < eps) {
      out.values[k] = std::numeric_limits<double>::quiet_NaN();
      if (out.mask[k]) ++undefined;
    } else {
      out.values[k] = num.values[k] / den.values[k];
    }
  }
  if (undefined > 0) out.note = std::to_string(undefined) + " cells undefined (control intensity below threshold)";
  return out;
}

}  // namespace mvpp
