#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mvpp/cli.hpp"
#include "mvpp/error.hpp"
#include "mvpp/io.hpp"
#include "mvpp/lgcp.hpp"
#include "mvpp/simulate.hpp"
#include "mvpp/smoothing.hpp"

namespace py = pybind11;
using namespace mvpp;

namespace {

std::vector<Point> to_points(const std::vector<std::pair<double, double>>& xy) {
  std::vector<Point> p;
  p.reserve(xy.size());
  for (const auto& [x, y] : xy) p.push_back({x, y});
  return p;
}

Eigen::MatrixXd grid_matrix(const GridField& g) {
  // Rows are y (bottom to top), NaN outside the window.
  Eigen::MatrixXd m(g.spec.ny, g.spec.nx);
  for (int j = 0; j < g.spec.ny; ++j)
    for (int i = 0; i < g.spec.nx; ++i) {
      const auto k = g.spec.index(i, j);
      m(j, i) = g.mask[k] ? g.values[k] : std::nan("");
    }
  return m;
}

py::dict fit_summary(const Window& window, const PointPattern& pattern, int model, const std::string& exposure,
                     const std::vector<std::pair<double, double>>& sources, double max_edge, unsigned threads) {
  ModelSpec spec;
  spec.model = model;
  spec.n_diseases = std::max(0, pattern.n_types() - 1);
  spec.exposure = parse_exposure(exposure);
  spec.sources = to_points(sources);
  spec.mesh.max_edge_inner = max_edge;
  FitOptions opts;
  opts.threads = threads;
  FitResult f;
  py::dict out;
  {
    py::gil_scoped_release release;
    const AssembledModel m = build_model(spec, pattern, window);
    f = fit(m.latent(), opts);
    py::gil_scoped_acquire acquire;
    py::dict effects;
    for (const auto& e : fixed_effects(f, m))
      effects[py::str(e.name)] = py::dict(py::arg("mean") = e.mean, py::arg("sd") = e.sd, py::arg("lower") = e.lower,
                                          py::arg("upper") = e.upper);
    out["fixed_effects"] = effects;
    out["mesh_vertices"] = m.mesh().n_vertices();
  }
  py::dict theta;
  for (std::size_t k = 0; k < f.theta_names.size(); ++k)
    theta[py::str(f.theta_names[k])] =
        py::make_tuple(f.theta_mode[static_cast<Eigen::Index>(k)], f.theta_sd[static_cast<Eigen::Index>(k)]);
  out["theta"] = theta;
  const Criteria& c = f.criteria;
  out["criteria"] = py::dict(py::arg("dic") = c.dic, py::arg("waic") = c.waic, py::arg("log_ml") = c.log_ml,
                             py::arg("p_d") = c.p_d, py::arg("p_waic") = c.p_waic,
                             py::arg("dic_reliable") = c.dic_reliable, py::arg("waic_reliable") = c.waic_reliable);
  out["outer_iterations"] = f.outer_iterations;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multivariate log-Gaussian Cox process case-control models";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConsistencyError>(m, "ConsistencyError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<Point>(m, "Point")
      .def(py::init<double, double>())
      .def_readwrite("x", &Point::x)
      .def_readwrite("y", &Point::y)
      .def("__repr__", [](const Point& p) { return "Point(" + format_number(p.x) + ", " + format_number(p.y) + ")"; });

  py::class_<Window>(m, "Window")
      .def(py::init([](const std::vector<std::pair<double, double>>& ext,
                       const std::vector<std::vector<std::pair<double, double>>>& holes) {
             std::vector<Ring> h;
             for (const auto& r : holes) h.push_back(to_points(r));
             return Window(to_points(ext), h);
           }),
           py::arg("exterior"), py::arg("holes") = std::vector<std::vector<std::pair<double, double>>>{})
      .def_static("rectangle", &Window::rectangle)
      .def_property_readonly("area", &Window::area)
      .def("contains", [](const Window& w, double x, double y) { return w.contains({x, y}); });

  py::class_<PointPattern>(m, "PointPattern")
      .def(py::init([](const std::vector<std::pair<double, double>>& xy, std::vector<int> marks) {
             PointPattern p;
             p.points = to_points(xy);
             p.marks = std::move(marks);
             p.covariates.resize(static_cast<Eigen::Index>(p.points.size()), 0);
             if (p.marks.size() != p.points.size()) throw InputError("marks and points differ in length");
             return p;
           }),
           py::arg("xy"), py::arg("marks"))
      .def("__len__", &PointPattern::size)
      .def("count", &PointPattern::count)
      .def_property_readonly("n_types", &PointPattern::n_types)
      .def_property_readonly("xy",
                             [](const PointPattern& p) {
                               Eigen::MatrixXd xy(static_cast<Eigen::Index>(p.size()), 2);
                               for (std::size_t i = 0; i < p.size(); ++i)
                                 xy.row(static_cast<Eigen::Index>(i)) << p.points[i].x, p.points[i].y;
                               return xy;
                             })
      .def_readonly("marks", &PointPattern::marks)
      .def_readonly("covariate_names", &PointPattern::covariate_names)
      .def_readonly("covariates", &PointPattern::covariates);

  m.def("read_window", &read_geojson_window, py::arg("path"));
  m.def("parse_window", &parse_geojson_window, py::arg("geojson"));
  m.def("read_pattern", &read_pattern_csv, py::arg("path"));
  m.def(
      "pattern_csv",
      [](const PointPattern& p) {
        std::ostringstream s;
        write_pattern_csv(s, p);
        return s.str();
      },
      py::arg("pattern"));
  m.def("sha256", &sha256_hex, py::arg("data"));
  m.def("matern_cov", &matern_cov, py::arg("d"), py::arg("sigma2"), py::arg("kappa"), py::arg("nu"));
  m.def("synthetic_study_area", [] {
    const StudyArea a = synthetic_study_area();
    return py::make_tuple(a.window, a.source);
  });
  m.def(
      "kernel_intensity",
      [](const PointPattern& p, int mark, double bandwidth, const Window& w, int grid_res) {
        return grid_matrix(kernel_intensity(p.points_of(mark), bandwidth, GridSpec::covering(w, grid_res), w));
      },
      py::arg("pattern"), py::arg("mark"), py::arg("bandwidth"), py::arg("window"), py::arg("grid_res") = 100);
  m.def(
      "simulate",
      [](std::size_t n_controls, std::size_t n_cases, double phi, std::uint64_t seed, int grid_res) {
        Scenario sc;
        sc.n_controls = n_controls;
        sc.case_counts = {n_cases};
        sc.phis = {phi};
        sc.seed = seed;
        sc.grid_res = grid_res;
        return simulate_study(sc).datasets.front().pattern;
      },
      py::arg("n_controls") = 3000, py::arg("n_cases") = 500, py::arg("phi") = 1.0, py::arg("seed") = 1,
      py::arg("grid_res") = 100, "One dataset of the synthetic simulation study (mark 0 controls, mark 1 cases).");
  m.def("fit", &fit_summary, py::arg("window"), py::arg("pattern"), py::arg("model") = 0,
        py::arg("exposure") = "fixed", py::arg("sources") = std::vector<std::pair<double, double>>{},
        py::arg("max_edge") = 0.5, py::arg("threads") = 0u,
        "Fit model 0-3 and return hyperparameters, fixed effects and criteria.");
  m.def(
      "run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line interface in-process; returns (exit_code, stdout, stderr).");
}
