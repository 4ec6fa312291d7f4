#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mvpp {

/// Planar coordinate in kilometres.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

double dot(Point a, Point b);
double cross(Point a, Point b);
double norm(Point a);
double distance(Point a, Point b);

/// Twice the signed area of (a, b, c); positive when counter-clockwise.
double orient(Point a, Point b, Point c);

using Ring = std::vector<Point>;

/// Signed area of a ring (positive for counter-clockwise).
double signed_area(const Ring& ring);

/// Keeps the part of `ring` satisfying a.x*p.x + a.y*p.y <= c (Sutherland-Hodgman).
/// The signed area of the result equals the area of the intersection even for
/// non-convex input.
Ring clip_halfplane(const Ring& ring, Point normal, double offset);

/// Axis-aligned bounding box.
struct Box {
  Point lo;
  Point hi;

  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
};

/// Polygonal study region with optional holes. Rings are stored open (the
/// closing vertex is not repeated), exterior counter-clockwise and holes
/// clockwise.
class Window {
 public:
  explicit Window(Ring exterior, std::vector<Ring> holes = {});

  static Window rectangle(double x0, double y0, double x1, double y1);

  const Ring& exterior() const { return exterior_; }
  const std::vector<Ring>& holes() const { return holes_; }

  double area() const { return area_; }
  const Box& bbox() const { return bbox_; }
  double diameter() const;

  bool contains(Point p) const;
  /// Distance from p to the nearest window edge (exterior or hole).
  double distance_to_boundary(Point p) const;

  /// Area of the window intersected with the convex region given by half-planes
  /// normal_k . p <= offset_k.
  double clipped_area(std::span<const Point> normals, std::span<const double> offsets) const;
  /// Area of the window intersected with a counter-clockwise convex polygon.
  double clipped_area(const Ring& convex) const;

 private:
  Ring exterior_;
  std::vector<Ring> holes_;
  double area_ = 0.0;
  Box bbox_;
};

/// Event locations with type marks (0 = control, 1..K = diseases) and optional
/// per-point covariate columns.
struct PointPattern {
  std::vector<Point> points;
  std::vector<int> marks;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates;  // points.size() x covariate_names.size()

  std::size_t size() const { return points.size(); }
  int n_types() const;
  std::size_t count(int mark) const;
  std::vector<Point> points_of(int mark) const;
  std::vector<std::size_t> indices_of(int mark) const;
  int covariate_index(const std::string& name) const;

  /// Checks mark contiguity, covariate shape and that every point lies inside
  /// the window; throws InputError otherwise.
  void validate(const Window& window) const;
};

std::vector<double> distance_to_source(std::span<const Point> points, Point source);

/// Triangulated domain. Triangles are counter-clockwise vertex-index triples.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<bool> boundary;

  std::size_t n_vertices() const { return vertices.size(); }
  double area() const;
};

struct MeshOptions {
  double max_edge_inner = 0.5;
  /// Buffer width beyond the window; negative selects 20% of the window diameter.
  double outer_extension = -1.0;
  /// Outer triangle size relative to max_edge_inner.
  double outer_coarsening = 2.0;
  int max_refinement_rounds = 30;
};

Mesh build_mesh(const Window& window, const MeshOptions& options);
Mesh build_mesh(const Window& window, double max_edge_inner, double outer_extension);

/// Finds the triangle containing p; -1 when p is outside the mesh.
class TriangleLocator {
 public:
  explicit TriangleLocator(const Mesh& mesh);

  int locate(Point p, double tol = 1e-10) const;
  std::array<double, 3> barycentric(int tri, Point p) const;

 private:
  const Mesh* mesh_;
  Box box_;
  int nx_ = 1;
  int ny_ = 1;
  double cell_w_ = 1.0;
  double cell_h_ = 1.0;
  std::vector<std::vector<int>> buckets_;
};

struct VoronoiWeights {
  Eigen::VectorXd areas;
  /// Number of points nudged apart because they coincided with an earlier point.
  std::size_t n_perturbed = 0;
  /// Point coordinates after perturbation.
  std::vector<Point> points;
};

VoronoiWeights voronoi_weights(std::span<const Point> points, const Window& window);

/// Integration weights at mesh vertices: each triangle contributes one third of
/// its area inside the window to each of its vertices.
Eigen::VectorXd dual_mesh_weights(const Mesh& mesh, const Window& window);

}  // namespace mvpp
