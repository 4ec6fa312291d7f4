#include "mvpp/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mvpp {
namespace {

constexpr double kEps = 1e-12;

// True when (p, q, r) turns counter-clockwise.
bool ccw(Point p, Point q, Point r) {
  return (q.y - p.y) * (r.x - q.x) - (q.x - p.x) * (r.y - q.y) < 0.0;
}

bool in_circle(Point a, Point b, Point c, Point p) {
  const double dx = a.x - p.x, dy = a.y - p.y;
  const double ex = b.x - p.x, ey = b.y - p.y;
  const double fx = c.x - p.x, fy = c.y - p.y;
  const double ap = dx * dx + dy * dy;
  const double bp = ex * ex + ey * ey;
  const double cp = fx * fx + fy * fy;
  return dx * (ey * cp - bp * fy) - dy * (ex * cp - bp * fx) + ap * (ex * fy - ey * fx) < 0.0;
}

double circumradius2(Point a, Point b, Point c) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double ex = c.x - a.x, ey = c.y - a.y;
  const double bl = dx * dx + dy * dy;
  const double cl = ex * ex + ey * ey;
  const double det = dx * ey - dy * ex;
  if (det == 0.0) return std::numeric_limits<double>::infinity();
  const double d = 0.5 / det;
  const double x = (ey * bl - dy * cl) * d;
  const double y = (dx * cl - ex * bl) * d;
  const double r = x * x + y * y;
  return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
}

Point circumcenter(Point a, Point b, Point c) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double ex = c.x - a.x, ey = c.y - a.y;
  const double bl = dx * dx + dy * dy;
  const double cl = ex * ex + ey * ey;
  const double d = 0.5 / (dx * ey - dy * ex);
  return {a.x + (ey * bl - dy * cl) * d, a.y + (dx * cl - ex * bl) * d};
}

double pseudo_angle(double dx, double dy) {
  const double p = dx / (std::abs(dx) + std::abs(dy));
  return (dy > 0.0 ? 3.0 - p : 1.0 + p) / 4.0;
}

class SweepHull {
 public:
  explicit SweepHull(std::span<const Point> pts) : pts_(pts) {}

  Triangulation run();

 private:
  int hash_key(Point p) const {
    const double a = pseudo_angle(p.x - center_.x, p.y - center_.y);
    return static_cast<int>(std::floor(a * hash_size_)) % hash_size_;
  }

  void link(int a, int b) {
    halfedges_[a] = b;
    if (b != -1) halfedges_[b] = a;
  }

  int add_triangle(int i0, int i1, int i2, int a, int b, int c) {
    const int t = static_cast<int>(triangles_.size());
    triangles_.push_back(i0);
    triangles_.push_back(i1);
    triangles_.push_back(i2);
    halfedges_.resize(triangles_.size(), -1);
    link(t, a);
    link(t + 1, b);
    link(t + 2, c);
    return t;
  }

  int legalize(int a);

  std::span<const Point> pts_;
  std::vector<int> triangles_;
  std::vector<int> halfedges_;
  std::vector<int> hull_prev_, hull_next_, hull_tri_, hull_hash_;
  std::vector<int> edge_stack_;
  int hull_start_ = 0;
  int hash_size_ = 1;
  Point center_;
};

int SweepHull::legalize(int a) {
  edge_stack_.clear();
  int ar = 0;
  while (true) {
    const int b = halfedges_[a];
    const int a0 = a - a % 3;
    ar = a0 + (a + 2) % 3;
    if (b == -1) {
      if (edge_stack_.empty()) break;
      a = edge_stack_.back();
      edge_stack_.pop_back();
      continue;
    }
    const int b0 = b - b % 3;
    const int al = a0 + (a + 1) % 3;
    const int bl = b0 + (b + 2) % 3;
    const int p0 = triangles_[ar];
    const int pr = triangles_[a];
    const int pl = triangles_[al];
    const int p1 = triangles_[bl];
    if (in_circle(pts_[p0], pts_[pr], pts_[pl], pts_[p1])) {
      triangles_[a] = p1;
      triangles_[b] = p0;
      const int hbl = halfedges_[bl];
      if (hbl == -1) {
        int e = hull_start_;
        do {
          if (hull_tri_[e] == bl) {
            hull_tri_[e] = a;
            break;
          }
          e = hull_prev_[e];
        } while (e != hull_start_);
      }
      link(a, hbl);
      link(b, halfedges_[ar]);
      link(ar, bl);
      const int br = b0 + (b + 1) % 3;
      if (edge_stack_.size() < 4096) edge_stack_.push_back(br);
    } else {
      if (edge_stack_.empty()) break;
      a = edge_stack_.back();
      edge_stack_.pop_back();
    }
  }
  return ar;
}

Triangulation SweepHull::run() {
  const int n = static_cast<int>(pts_.size());
  Triangulation out;
  out.used.assign(n, false);
  if (n < 3) return out;

  Box box{pts_[0], pts_[0]};
  for (const auto& p : pts_) {
    box.lo.x = std::min(box.lo.x, p.x);
    box.lo.y = std::min(box.lo.y, p.y);
    box.hi.x = std::max(box.hi.x, p.x);
    box.hi.y = std::max(box.hi.y, p.y);
  }
  const Point c{(box.lo.x + box.hi.x) / 2, (box.lo.y + box.hi.y) / 2};

  int i0 = 0, i1 = -1, i2 = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double d = distance(c, pts_[i]);
    if (d < best) {
      i0 = i;
      best = d;
    }
  }
  best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    if (i == i0) continue;
    const double d = distance(pts_[i0], pts_[i]);
    if (d < best && d > 0.0) {
      i1 = i;
      best = d;
    }
  }
  if (i1 < 0) return out;
  double min_radius = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    if (i == i0 || i == i1) continue;
    const double r = circumradius2(pts_[i0], pts_[i1], pts_[i]);
    if (r < min_radius) {
      i2 = i;
      min_radius = r;
    }
  }
  // All points collinear: no triangles.
  if (i2 < 0 || !std::isfinite(min_radius)) return out;

  if (ccw(pts_[i0], pts_[i1], pts_[i2])) std::swap(i1, i2);
  center_ = circumcenter(pts_[i0], pts_[i1], pts_[i2]);

  std::vector<double> dists(n);
  for (int i = 0; i < n; ++i) dists[i] = distance(pts_[i], center_);
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return dists[a] < dists[b]; });

  hash_size_ = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
  hull_prev_.assign(n, 0);
  hull_next_.assign(n, 0);
  hull_tri_.assign(n, 0);
  hull_hash_.assign(hash_size_, -1);
  triangles_.reserve(std::max(2 * n - 5, 1) * 3);
  halfedges_.reserve(triangles_.capacity());

  hull_start_ = i0;
  hull_next_[i0] = hull_prev_[i2] = i1;
  hull_next_[i1] = hull_prev_[i0] = i2;
  hull_next_[i2] = hull_prev_[i1] = i0;
  hull_tri_[i0] = 0;
  hull_tri_[i1] = 1;
  hull_tri_[i2] = 2;
  hull_hash_[hash_key(pts_[i0])] = i0;
  hull_hash_[hash_key(pts_[i1])] = i1;
  hull_hash_[hash_key(pts_[i2])] = i2;
  add_triangle(i0, i1, i2, -1, -1, -1);
  out.used[i0] = out.used[i1] = out.used[i2] = true;

  Point prev{};
  for (int k = 0; k < n; ++k) {
    const int i = ids[k];
    const Point p = pts_[i];
    if (k > 0 && std::abs(p.x - prev.x) <= kEps && std::abs(p.y - prev.y) <= kEps) continue;
    prev = p;
    if (i == i0 || i == i1 || i == i2) continue;

    int start = 0;
    const int key = hash_key(p);
    for (int j = 0; j < hash_size_; ++j) {
      start = hull_hash_[(key + j) % hash_size_];
      if (start != -1 && start != hull_next_[start]) break;
    }
    start = hull_prev_[start];
    int e = start;
    int q = 0;
    while (q = hull_next_[e], !ccw(p, pts_[e], pts_[q])) {
      e = q;
      if (e == start) {
        e = -1;
        break;
      }
    }
    if (e == -1) continue;
    out.used[i] = true;

    int t = add_triangle(e, i, hull_next_[e], -1, -1, hull_tri_[e]);
    hull_tri_[i] = legalize(t + 2);
    hull_tri_[e] = t;

    int nn = hull_next_[e];
    while (q = hull_next_[nn], ccw(p, pts_[nn], pts_[q])) {
      t = add_triangle(nn, i, q, hull_tri_[i], -1, hull_tri_[nn]);
      hull_tri_[i] = legalize(t + 2);
      hull_next_[nn] = nn;
      nn = q;
    }
    if (e == start) {
      while (q = hull_prev_[e], ccw(p, pts_[q], pts_[e])) {
        t = add_triangle(q, i, e, -1, hull_tri_[e], hull_tri_[q]);
        legalize(t + 2);
        hull_tri_[q] = t;
        hull_next_[e] = e;
        e = q;
      }
    }
    hull_start_ = hull_prev_[i] = e;
    hull_next_[e] = hull_prev_[nn] = i;
    hull_next_[i] = nn;
    hull_hash_[hash_key(p)] = i;
    hull_hash_[hash_key(pts_[e])] = e;
  }

  // Sweep-hull emits clockwise triangles; flip to counter-clockwise.
  out.triangles.reserve(triangles_.size() / 3);
  for (std::size_t t = 0; t < triangles_.size(); t += 3) {
    out.triangles.push_back({triangles_[t], triangles_[t + 2], triangles_[t + 1]});
  }
  int e = hull_start_;
  do {
    out.hull.push_back(e);
    e = hull_next_[e];
  } while (e != hull_start_);
  return out;
}

}  // namespace

Triangulation delaunay(std::span<const Point> points) { return SweepHull(points).run(); }

}  // namespace mvpp
