#include "mvpp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include "mvpp/delaunay.hpp"
#include "mvpp/error.hpp"

namespace mvpp {

double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
double norm(Point a) { return std::hypot(a.x, a.y); }
double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }
double orient(Point a, Point b, Point c) { return cross(b - a, c - a); }

double signed_area(const Ring& ring) {
  double s = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

Ring clip_halfplane(const Ring& ring, Point normal, double offset) {
  Ring out;
  const std::size_t n = ring.size();
  if (n == 0) return out;
  out.reserve(n + 4);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    const double da = dot(normal, a) - offset;
    const double db = dot(normal, b) - offset;
    if (da <= 0.0) out.push_back(a);
    if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
      const double t = da / (da - db);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

namespace {

double segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

bool segments_cross(Point a, Point b, Point c, Point d) {
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 &&
         o4 != 0;
}

Ring normalize_ring(Ring ring, bool ccw) {
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  Ring cleaned;
  for (const auto& p : ring) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InputError("window: non-finite coordinate");
    if (cleaned.empty() || !(cleaned.back() == p)) cleaned.push_back(p);
  }
  while (cleaned.size() > 1 && cleaned.front() == cleaned.back()) cleaned.pop_back();
  if (cleaned.size() < 3) throw InputError("window: ring needs at least three distinct vertices");
  const double a = signed_area(cleaned);
  if (std::abs(a) <= 1e-14) throw InputError("window: degenerate ring (zero area)");
  if ((a > 0) != ccw) std::reverse(cleaned.begin(), cleaned.end());
  return cleaned;
}

void check_simple(const Ring& r, const char* what) {
  const std::size_t n = r.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_cross(r[i], r[(i + 1) % n], r[j], r[(j + 1) % n])) {
        std::ostringstream msg;
        msg << "window: " << what << " ring is self-intersecting (edges " << i << " and " << j << ")";
        throw InputError(msg.str());
      }
    }
  }
}

bool ring_contains(const Ring& r, Point p) {
  bool inside = false;
  const std::size_t n = r.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = r[i];
    const Point& b = r[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

double ring_distance(const Ring& r, Point p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.size(); ++i) d = std::min(d, segment_distance(p, r[i], r[(i + 1) % r.size()]));
  return d;
}

}  // namespace

Window::Window(Ring exterior, std::vector<Ring> holes) {
  exterior_ = normalize_ring(std::move(exterior), true);
  check_simple(exterior_, "exterior");
  for (auto& h : holes) {
    Ring hr = normalize_ring(std::move(h), false);
    check_simple(hr, "hole");
    for (const auto& p : hr) {
      if (!ring_contains(exterior_, p)) throw InputError("window: hole vertex outside the exterior ring");
    }
    holes_.push_back(std::move(hr));
  }
  area_ = signed_area(exterior_);
  for (const auto& h : holes_) area_ += signed_area(h);
  if (!(area_ > 0.0)) throw InputError("window: degenerate window (zero area)");
  bbox_ = {exterior_[0], exterior_[0]};
  for (const auto& p : exterior_) {
    bbox_.lo.x = std::min(bbox_.lo.x, p.x);
    bbox_.lo.y = std::min(bbox_.lo.y, p.y);
    bbox_.hi.x = std::max(bbox_.hi.x, p.x);
    bbox_.hi.y = std::max(bbox_.hi.y, p.y);
  }
}

Window Window::rectangle(double x0, double y0, double x1, double y1) {
  return Window(Ring{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

double Window::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < exterior_.size(); ++i)
    for (std::size_t j = i + 1; j < exterior_.size(); ++j) d = std::max(d, distance(exterior_[i], exterior_[j]));
  return d;
}

bool Window::contains(Point p) const {
  if (p.x < bbox_.lo.x - 1e-12 || p.x > bbox_.hi.x + 1e-12 || p.y < bbox_.lo.y - 1e-12 ||
      p.y > bbox_.hi.y + 1e-12)
    return false;
  if (distance_to_boundary(p) <= 1e-12) return true;
  if (!ring_contains(exterior_, p)) return false;
  for (const auto& h : holes_)
    if (ring_contains(h, p)) return false;
  return true;
}

double Window::distance_to_boundary(Point p) const {
  double d = ring_distance(exterior_, p);
  for (const auto& h : holes_) d = std::min(d, ring_distance(h, p));
  return d;
}

double Window::clipped_area(std::span<const Point> normals, std::span<const double> offsets) const {
  auto clip_all = [&](Ring r) {
    for (std::size_t k = 0; k < normals.size() && !r.empty(); ++k) r = clip_halfplane(r, normals[k], offsets[k]);
    return signed_area(r);
  };
  double a = clip_all(exterior_);
  for (const auto& h : holes_) a += clip_all(h);
  return a;
}

double Window::clipped_area(const Ring& convex) const {
  std::vector<Point> normals;
  std::vector<double> offsets;
  for (std::size_t i = 0; i < convex.size(); ++i) {
    const Point a = convex[i];
    const Point b = convex[(i + 1) % convex.size()];
    const Point nrm{b.y - a.y, a.x - b.x};
    normals.push_back(nrm);
    offsets.push_back(dot(nrm, a));
  }
  return clipped_area(normals, offsets);
}

int PointPattern::n_types() const {
  int k = -1;
  for (int m : marks) k = std::max(k, m);
  return k + 1;
}

std::size_t PointPattern::count(int mark) const {
  return static_cast<std::size_t>(std::count(marks.begin(), marks.end(), mark));
}

std::vector<Point> PointPattern::points_of(int mark) const {
  std::vector<Point> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (marks[i] == mark) out.push_back(points[i]);
  return out;
}

std::vector<std::size_t> PointPattern::indices_of(int mark) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (marks[i] == mark) out.push_back(i);
  return out;
}

int PointPattern::covariate_index(const std::string& name) const {
  for (std::size_t i = 0; i < covariate_names.size(); ++i)
    if (covariate_names[i] == name) return static_cast<int>(i);
  return -1;
}

void PointPattern::validate(const Window& window) const {
  if (marks.size() != points.size()) throw InputError("pattern: marks and points differ in length");
  if (covariates.cols() != static_cast<Eigen::Index>(covariate_names.size()) ||
      (covariates.cols() > 0 && covariates.rows() != static_cast<Eigen::Index>(points.size())))
    throw InputError("pattern: covariate matrix shape does not match");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (marks[i] < 0) throw InputError("pattern: negative mark at row " + std::to_string(i));
    if (!window.contains(points[i]))
      throw InputError("pattern: point " + std::to_string(i) + " lies outside the window");
  }
}

std::vector<double> distance_to_source(std::span<const Point> points, Point source) {
  std::vector<double> d(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d[i] = distance(points[i], source);
  return d;
}

double Mesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles) a += 0.5 * orient(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
  return a;
}

namespace {

void add_ring_points(const Ring& r, double spacing, std::vector<Point>& out) {
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Point a = r[i];
    const Point b = r[(i + 1) % r.size()];
    const int nseg = std::max(1, static_cast<int>(std::ceil(distance(a, b) / spacing - 1e-9)));
    for (int s = 0; s < nseg; ++s) out.push_back(a + (static_cast<double>(s) / nseg) * (b - a));
  }
}

template <class Keep>
void add_lattice(const Box& box, double h, Keep keep, std::vector<Point>& out) {
  const double dy = h * std::sqrt(3.0) / 2.0;
  const int rows = static_cast<int>(std::floor(box.height() / dy)) + 1;
  for (int r = 0; r <= rows; ++r) {
    const double y = box.lo.y + r * dy;
    const double x0 = box.lo.x + ((r % 2) ? 0.5 * h : 0.0);
    const int cols = static_cast<int>(std::floor((box.hi.x - x0) / h)) + 1;
    for (int c = 0; c <= cols; ++c) {
      const Point p{x0 + c * h, y};
      if (keep(p)) out.push_back(p);
    }
  }
}

struct PointKey {
  bool operator()(const Point& a, const Point& b) const {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  }
};

}  // namespace

Mesh build_mesh(const Window& window, double max_edge_inner, double outer_extension) {
  MeshOptions o;
  o.max_edge_inner = max_edge_inner;
  o.outer_extension = outer_extension;
  return build_mesh(window, o);
}

Mesh build_mesh(const Window& window, const MeshOptions& options) {
  const double h = options.max_edge_inner;
  if (!(h > 0.0) || !std::isfinite(h)) throw InputError("mesh: max_edge_inner must be positive");
  const double ext = options.outer_extension < 0.0 ? 0.2 * window.diameter() : options.outer_extension;
  const double big_h = h * std::max(1.0, options.outer_coarsening);

  std::vector<Point> pts;
  add_ring_points(window.exterior(), h, pts);
  for (const auto& hole : window.holes()) add_ring_points(hole, h, pts);
  add_lattice(window.bbox(), h,
              [&](Point p) { return window.contains(p) && window.distance_to_boundary(p) > 0.5 * h; }, pts);

  Box outer = window.bbox();
  if (ext > 0.0) {
    outer.lo = outer.lo - Point{ext, ext};
    outer.hi = outer.hi + Point{ext, ext};
    const Ring rect{outer.lo, {outer.hi.x, outer.lo.y}, outer.hi, {outer.lo.x, outer.hi.y}};
    add_ring_points(rect, big_h, pts);
    add_lattice(outer, big_h,
                [&](Point p) {
                  const double edge = std::min({p.x - outer.lo.x, outer.hi.x - p.x, p.y - outer.lo.y, outer.hi.y - p.y});
                  return edge > 0.5 * big_h && !window.contains(p) && window.distance_to_boundary(p) > 0.75 * big_h;
                },
                pts);
  }

  std::set<Point, PointKey> seen(pts.begin(), pts.end());
  pts.assign(seen.begin(), seen.end());

  std::vector<std::array<int, 3>> tris;
  for (int round = 0;; ++round) {
    const Triangulation tri = delaunay(pts);
    if (tri.triangles.empty()) throw InputError("mesh: triangulation failed (degenerate window)");
    tris.clear();
    std::vector<Point> midpoints;
    for (const auto& t : tri.triangles) {
      const Point c = (1.0 / 3.0) * (pts[t[0]] + pts[t[1]] + pts[t[2]]);
      const bool inner = window.contains(c);
      if (ext == 0.0 && !inner) continue;
      tris.push_back(t);
      if (!inner) continue;
      int longest = -1;
      double len = h * (1.0 + 1e-9);
      for (int k = 0; k < 3; ++k) {
        const double l = distance(pts[t[k]], pts[t[(k + 1) % 3]]);
        if (l > len) {
          len = l;
          longest = k;
        }
      }
      if (longest >= 0) midpoints.push_back(0.5 * (pts[t[longest]] + pts[t[(longest + 1) % 3]]));
    }
    if (midpoints.empty()) break;
    if (round >= options.max_refinement_rounds) throw NumericalError("mesh: refinement did not converge");
    std::size_t added = 0;
    for (const auto& m : midpoints) {
      if (seen.insert(m).second) {
        pts.push_back(m);
        ++added;
      }
    }
    if (added == 0) break;
  }

  Mesh mesh;
  std::vector<int> remap(pts.size(), -1);
  for (const auto& t : tris) {
    std::array<int, 3> nt{};
    for (int k = 0; k < 3; ++k) {
      int& r = remap[t[k]];
      if (r < 0) {
        r = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(pts[t[k]]);
      }
      nt[k] = r;
    }
    if (std::abs(orient(mesh.vertices[nt[0]], mesh.vertices[nt[1]], mesh.vertices[nt[2]])) < 2e-12)
      continue;
    mesh.triangles.push_back(nt);
  }
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  mesh.boundary.assign(mesh.vertices.size(), false);
  for (const auto& [e, c] : edge_count)
    if (c == 1) mesh.boundary[e.first] = mesh.boundary[e.second] = true;
  return mesh;
}

TriangleLocator::TriangleLocator(const Mesh& mesh) : mesh_(&mesh) {
  if (mesh.vertices.empty()) return;
  box_ = {mesh.vertices[0], mesh.vertices[0]};
  for (const auto& p : mesh.vertices) {
    box_.lo.x = std::min(box_.lo.x, p.x);
    box_.lo.y = std::min(box_.lo.y, p.y);
    box_.hi.x = std::max(box_.hi.x, p.x);
    box_.hi.y = std::max(box_.hi.y, p.y);
  }
  const double n = std::max<double>(1.0, std::sqrt(static_cast<double>(mesh.triangles.size())));
  nx_ = ny_ = std::max(1, static_cast<int>(n));
  cell_w_ = std::max(box_.width(), 1e-12) / nx_;
  cell_h_ = std::max(box_.height(), 1e-12) / ny_;
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const auto& tri = mesh.triangles[t];
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (int v : tri) {
      x0 = std::min(x0, mesh.vertices[v].x);
      y0 = std::min(y0, mesh.vertices[v].y);
      x1 = std::max(x1, mesh.vertices[v].x);
      y1 = std::max(y1, mesh.vertices[v].y);
    }
    const int i0 = std::clamp(static_cast<int>((x0 - box_.lo.x) / cell_w_) - 1, 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>((x1 - box_.lo.x) / cell_w_) + 1, 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>((y0 - box_.lo.y) / cell_h_) - 1, 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>((y1 - box_.lo.y) / cell_h_) + 1, 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(t);
  }
}

std::array<double, 3> TriangleLocator::barycentric(int tri, Point p) const {
  const auto& t = mesh_->triangles[tri];
  const Point a = mesh_->vertices[t[0]], b = mesh_->vertices[t[1]], c = mesh_->vertices[t[2]];
  const double area = orient(a, b, c);
  return {orient(p, b, c) / area, orient(a, p, c) / area, orient(a, b, p) / area};
}

int TriangleLocator::locate(Point p, double tol) const {
  if (buckets_.empty()) return -1;
  if (p.x < box_.lo.x - tol || p.x > box_.hi.x + tol || p.y < box_.lo.y - tol || p.y > box_.hi.y + tol)
    return -1;
  const int i = std::clamp(static_cast<int>((p.x - box_.lo.x) / cell_w_), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>((p.y - box_.lo.y) / cell_h_), 0, ny_ - 1);
  for (int t : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
    const auto w = barycentric(t, p);
    if (w[0] >= -tol && w[1] >= -tol && w[2] >= -tol) return t;
  }
  return -1;
}

VoronoiWeights voronoi_weights(std::span<const Point> points, const Window& window) {
  if (points.empty()) throw InputError("voronoi: empty point pattern");
  VoronoiWeights out;
  out.points.assign(points.begin(), points.end());
  const std::size_t n = out.points.size();

  std::set<Point, PointKey> taken;
  for (std::size_t i = 0; i < n; ++i) {
    Point p = out.points[i];
    int k = 0;
    while (!taken.insert(p).second) {
      ++k;
      const double ang = 2.399963229728653 * k;  // golden angle, deterministic spread
      p = out.points[i] + 1e-9 * Point{std::cos(ang), std::sin(ang)};
    }
    if (k > 0) {
      out.points[i] = p;
      ++out.n_perturbed;
    }
  }

  std::vector<std::vector<int>> nbr(n);
  const Triangulation tri = delaunay(out.points);
  if (tri.triangles.empty()) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) nbr[i].push_back(static_cast<int>(j));
  } else {
    for (const auto& t : tri.triangles)
      for (int k = 0; k < 3; ++k) {
        nbr[t[k]].push_back(t[(k + 1) % 3]);
        nbr[t[k]].push_back(t[(k + 2) % 3]);
      }
    for (std::size_t s = 0; s < n; ++s) {
      if (tri.used[s]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == s) continue;
        nbr[s].push_back(static_cast<int>(j));
        nbr[j].push_back(static_cast<int>(s));
      }
    }
  }

  out.areas.resize(static_cast<Eigen::Index>(n));
  std::vector<Point> normals;
  std::vector<double> offsets;
  for (std::size_t i = 0; i < n; ++i) {
    auto& nb = nbr[i];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    normals.clear();
    offsets.clear();
    const Point pi = out.points[i];
    for (int j : nb) {
      const Point pj = out.points[j];
      const Point nrm = pj - pi;
      normals.push_back(nrm);
      offsets.push_back(dot(nrm, 0.5 * (pi + pj)));
    }
    out.areas[static_cast<Eigen::Index>(i)] = std::max(0.0, window.clipped_area(normals, offsets));
  }
  return out;
}

Eigen::VectorXd dual_mesh_weights(const Mesh& mesh, const Window& window) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
  for (const auto& t : mesh.triangles) {
    const Ring tri{mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]};
    const double a = window.clipped_area(tri) / 3.0;
    for (int v : t) w[v] += a;
  }
  return w;
}

}  // namespace mvpp
