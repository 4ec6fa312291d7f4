#include "mvpp/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvpp/error.hpp"
#include "mvpp/io.hpp"
#include "mvpp/simulate.hpp"
#include "mvpp/smoothing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mvpp::cli {

namespace {

// ---------------------------------------------------------------------------
// config <-> json

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool found = false;
    for (const char* a : allowed) found = found || key == a;
    if (!found) throw InputError("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void get_if(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

json point_json(Point p) { return json::array({p.x, p.y}); }

Point point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InputError("config: a point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json priors_json(const PriorSettings& p) {
  return {{"range_threshold", p.range_threshold},
          {"range_prob", p.range_prob},
          {"sd_threshold", p.sd_threshold},
          {"sd_prob", p.sd_prob},
          {"exposure_range_threshold", p.exposure_range_threshold},
          {"exposure_range_prob", p.exposure_range_prob},
          {"exposure_sd_threshold", p.exposure_sd_threshold},
          {"exposure_sd_prob", p.exposure_sd_prob},
          {"fixed_precision", p.fixed_precision},
          {"intercept_precision", p.intercept_precision},
          {"rw1_shape", p.rw1_shape},
          {"rw1_rate", p.rw1_rate}};
}

PriorSettings priors_from(const json& j) {
  check_keys(j,
             {"range_threshold", "range_prob", "sd_threshold", "sd_prob", "exposure_range_threshold",
              "exposure_range_prob", "exposure_sd_threshold", "exposure_sd_prob", "fixed_precision",
              "intercept_precision", "rw1_shape", "rw1_rate"},
             "model.priors");
  PriorSettings p;
  get_if(j, "range_threshold", p.range_threshold);
  get_if(j, "range_prob", p.range_prob);
  get_if(j, "sd_threshold", p.sd_threshold);
  get_if(j, "sd_prob", p.sd_prob);
  get_if(j, "exposure_range_threshold", p.exposure_range_threshold);
  get_if(j, "exposure_range_prob", p.exposure_range_prob);
  get_if(j, "exposure_sd_threshold", p.exposure_sd_threshold);
  get_if(j, "exposure_sd_prob", p.exposure_sd_prob);
  get_if(j, "fixed_precision", p.fixed_precision);
  get_if(j, "intercept_precision", p.intercept_precision);
  get_if(j, "rw1_shape", p.rw1_shape);
  get_if(j, "rw1_rate", p.rw1_rate);
  return p;
}

json model_json(const ModelSpec& m) {
  json sources = json::array();
  for (const auto& s : m.sources) sources.push_back(point_json(s));
  return {{"id", m.model},
          {"exposure", to_string(m.exposure)},
          {"sources", sources},
          {"confounders", m.confounders},
          {"weights", to_string(m.weights)},
          {"mesh",
           {{"max_edge", m.mesh.max_edge_inner},
            {"extension", m.mesh.outer_extension},
            {"coarsening", m.mesh.outer_coarsening},
            {"max_refinement_rounds", m.mesh.max_refinement_rounds}}},
          {"rw1_knots", m.rw1_knots},
          {"spde1_knots", m.spde1_knots},
          {"priors", priors_json(m.priors)}};
}

ModelSpec model_from(const json& j) {
  check_keys(j, {"id", "exposure", "sources", "confounders", "weights", "mesh", "rw1_knots", "spde1_knots", "priors"},
             "model");
  ModelSpec m;
  get_if(j, "id", m.model);
  if (j.contains("exposure")) m.exposure = parse_exposure(j.at("exposure").get<std::string>());
  if (j.contains("sources"))
    for (const auto& s : j.at("sources")) m.sources.push_back(point_from(s));
  get_if(j, "confounders", m.confounders);
  if (j.contains("weights")) m.weights = parse_weight_scheme(j.at("weights").get<std::string>());
  if (j.contains("mesh")) {
    const auto& mj = j.at("mesh");
    check_keys(mj, {"max_edge", "extension", "coarsening", "max_refinement_rounds"}, "model.mesh");
    get_if(mj, "max_edge", m.mesh.max_edge_inner);
    get_if(mj, "extension", m.mesh.outer_extension);
    get_if(mj, "coarsening", m.mesh.outer_coarsening);
    get_if(mj, "max_refinement_rounds", m.mesh.max_refinement_rounds);
  }
  get_if(j, "rw1_knots", m.rw1_knots);
  get_if(j, "spde1_knots", m.spde1_knots);
  if (j.contains("priors")) m.priors = priors_from(j.at("priors"));
  return m;
}

json config_json(const RunConfig& c) {
  json diffs = json::array();
  for (const auto& [u, v] : c.differences) diffs.push_back({u, v});
  const auto& s = c.simulation;
  return {{"command", c.command},
          {"inputs",
           {{"window", c.window}, {"pattern", c.pattern}, {"reports", c.reports}, {"fit_report", c.fit_report}}},
          {"model", model_json(c.model)},
          {"out", c.out},
          {"seed", c.seed},
          {"grid_res", c.grid_res},
          {"verbosity", c.verbosity},
          {"bandwidth", c.bandwidth},
          {"simulation",
           {{"n_controls", s.n_controls},
            {"case_counts", s.case_counts},
            {"phis", s.phis},
            {"source", s.source ? point_json(*s.source) : json()},
            {"phi_filter", s.phi_filter ? json(*s.phi_filter) : json()},
            {"n_filter", s.n_filter ? json(*s.n_filter) : json()}}},
          {"inference",
           {{"design", c.inference.design}, {"ccd_step", c.inference.ccd_step}, {"threads", c.inference.threads}}},
          {"riskmap", {{"differences", diffs}}}};
}

RunConfig config_from(const json& j) {
  check_keys(j,
             {"command", "inputs", "model", "out", "seed", "grid_res", "verbosity", "bandwidth", "simulation",
              "inference", "riskmap"},
             "config");
  RunConfig c;
  get_if(j, "command", c.command);
  if (j.contains("inputs")) {
    const auto& in = j.at("inputs");
    check_keys(in, {"window", "pattern", "reports", "fit_report"}, "inputs");
    get_if(in, "window", c.window);
    get_if(in, "pattern", c.pattern);
    get_if(in, "reports", c.reports);
    get_if(in, "fit_report", c.fit_report);
  }
  if (j.contains("model")) c.model = model_from(j.at("model"));
  get_if(j, "out", c.out);
  get_if(j, "seed", c.seed);
  get_if(j, "grid_res", c.grid_res);
  get_if(j, "verbosity", c.verbosity);
  get_if(j, "bandwidth", c.bandwidth);
  if (j.contains("simulation")) {
    const auto& sj = j.at("simulation");
    check_keys(sj, {"n_controls", "case_counts", "phis", "source", "phi_filter", "n_filter"}, "simulation");
    auto& s = c.simulation;
    get_if(sj, "n_controls", s.n_controls);
    get_if(sj, "case_counts", s.case_counts);
    get_if(sj, "phis", s.phis);
    if (sj.contains("source") && !sj.at("source").is_null()) s.source = point_from(sj.at("source"));
    if (sj.contains("phi_filter") && !sj.at("phi_filter").is_null()) s.phi_filter = sj.at("phi_filter").get<double>();
    if (sj.contains("n_filter") && !sj.at("n_filter").is_null()) s.n_filter = sj.at("n_filter").get<std::size_t>();
  }
  if (j.contains("inference")) {
    const auto& ij = j.at("inference");
    check_keys(ij, {"design", "ccd_step", "threads"}, "inference");
    get_if(ij, "design", c.inference.design);
    get_if(ij, "ccd_step", c.inference.ccd_step);
    get_if(ij, "threads", c.inference.threads);
  }
  if (j.contains("riskmap")) {
    const auto& rj = j.at("riskmap");
    check_keys(rj, {"differences"}, "riskmap");
    if (rj.contains("differences"))
      for (const auto& d : rj.at("differences")) {
        if (!d.is_array() || d.size() != 2) throw InputError("config: riskmap differences are [u, v] pairs");
        c.differences.emplace_back(d[0].get<int>(), d[1].get<int>());
      }
  }
  return c;
}

// ---------------------------------------------------------------------------
// helpers

struct Inputs {
  Window window;
  PointPattern pattern;
  std::string window_hash;
  std::string pattern_hash;
};

Inputs load_inputs(const RunConfig& c) {
  if (c.window.empty()) throw InputError("no window file given (inputs.window or --window)");
  if (c.pattern.empty()) throw InputError("no pattern file given (inputs.pattern or --pattern)");
  if (!fs::exists(c.window)) throw InputError("window file not found: " + c.window);
  if (!fs::exists(c.pattern)) throw InputError("pattern file not found: " + c.pattern);
  Inputs in{read_geojson_window(c.window), read_pattern_csv(c.pattern), sha256_file(c.window),
            sha256_file(c.pattern)};
  try {
    in.pattern.validate(in.window);
  } catch (const InputError& e) {
    throw InputError(c.pattern + ": " + e.what());
  }
  return in;
}

fs::path prepare_out(const RunConfig& c) {
  const fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw InputError("cannot create output directory " + c.out);
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_grid(const fs::path& dir, const std::string& stem, const GridField& g, json& listing) {
  std::ostringstream csv, asc;
  g.write_csv(csv);
  g.write_ascii_grid(asc);
  write_text_file(dir / (stem + ".csv"), csv.str());
  write_text_file(dir / (stem + ".asc"), asc.str());
  listing.push_back(stem + ".csv");
  listing.push_back(stem + ".asc");
}

void write_field_grids(const fs::path& dir, const std::string& stem, const FieldGrids& g, bool exceedance,
                       json& listing) {
  write_grid(dir, stem + "_mean", g.mean, listing);
  write_grid(dir, stem + "_sd", g.sd, listing);
  if (exceedance) write_grid(dir, stem + "_exceedance", g.exceedance, listing);
}

FitOptions fit_options(const RunConfig& c) {
  FitOptions o;
  if (c.inference.design == "ccd")
    o.design = FitOptions::Design::ccd;
  else if (c.inference.design == "mode")
    o.design = FitOptions::Design::mode_only;
  else
    throw InputError("inference design must be 'ccd' or 'mode', got '" + c.inference.design + "'");
  if (!(c.inference.ccd_step > 0.0)) throw InputError("ccd_step must be positive");
  o.ccd_step = c.inference.ccd_step;
  o.threads = c.inference.threads;
  return o;
}

void check_grid_res(const RunConfig& c) {
  if (c.grid_res < 2 || c.grid_res > 5000) throw InputError("grid resolution must be in [2, 5000]");
}

ModelSpec model_for(const RunConfig& c, const PointPattern& pattern) {
  ModelSpec spec = c.model;
  spec.n_diseases = std::max(0, pattern.n_types() - 1);
  if (pattern.count(0) == 0) throw InputError(c.pattern + ": pattern has no controls (mark 0)");
  if (!spec.has_exposure()) spec.sources.clear();
  spec.validate();
  return spec;
}

struct FittedRun {
  Inputs inputs;
  std::unique_ptr<AssembledModel> model;
  FitResult fit;
};

FittedRun run_fit(const RunConfig& c, std::ostream& log) {
  check_grid_res(c);
  FittedRun r{load_inputs(c), nullptr, {}};
  const ModelSpec spec = model_for(c, r.inputs.pattern);
  const FitOptions opts = fit_options(c);
  r.model = std::make_unique<AssembledModel>(build_model(spec, r.inputs.pattern, r.inputs.window));
  if (c.verbosity > 0)
    log << "model " << spec.model << ": " << r.model->latent().n_latent() << " latent nodes, "
        << r.model->latent().n_rows() << " rows, " << r.model->latent().n_theta() << " hyperparameters\n";
  r.fit = fit(r.model->latent(), opts);
  if (c.verbosity > 0)
    log << "fit: " << r.fit.outer_iterations << " outer iterations, " << r.fit.grid.size() << " design points\n";
  return r;
}

json summary_json(double mean, double sd, double lower, double upper) {
  return {{"mean", mean}, {"sd", sd}, {"lower", lower}, {"upper", upper}};
}

json effect_json(const EffectSummary& e) {
  json j = summary_json(e.mean, e.sd, e.lower, e.upper);
  j["name"] = e.name;
  return j;
}

json dataset_json(const RunConfig& c, const Inputs& in) {
  json counts = json::array();
  for (int m = 0; m < std::max(1, in.pattern.n_types()); ++m) counts.push_back(in.pattern.count(m));
  return {{"pattern", c.pattern},
          {"pattern_sha256", in.pattern_hash},
          {"window", c.window},
          {"window_sha256", in.window_hash},
          {"counts", counts},
          {"window_area", in.window.area()}};
}

json hyper_json(const FittedRun& r) {
  const auto& latent = r.model->latent();
  json out = json::array();
  for (const auto& comp : latent.components()) {
    const auto& hs = comp.term->hyperparameters();
    for (std::size_t k = 0; k < hs.size(); ++k) {
      const std::size_t t = comp.theta_offset + k;
      const auto ti = static_cast<Eigen::Index>(t);
      const double m = r.fit.theta_mode[ti], s = r.fit.theta_sd[ti];
      const auto [mean, sd] = r.fit.reported_summary(t, latent);
      out.push_back({{"name", r.fit.theta_names[t]},
                     {"term", comp.term->name()},
                     {"scale", hs[k].scale},
                     {"prior", hs[k].prior.describe()},
                     {"log_mode", m},
                     {"log_sd", s},
                     {"mode", std::exp(m)},
                     {"mean", mean},
                     {"sd", sd},
                     {"lower", std::exp(m - 1.959963984540054 * s)},
                     {"upper", std::exp(m + 1.959963984540054 * s)}});
    }
  }
  return out;
}

json criteria_json(const Criteria& c) {
  return {{"dic", c.dic},
          {"p_d", c.p_d},
          {"mean_deviance", c.mean_deviance},
          {"deviance_at_mean", c.deviance_at_mean},
          {"waic", c.waic},
          {"p_waic", c.p_waic},
          {"lppd", c.lppd},
          {"log_ml", c.log_ml},
          {"negative_pwaic_share", c.negative_pwaic_share},
          {"dic_reliable", c.dic_reliable},
          {"waic_reliable", c.waic_reliable}};
}

json report_json(const RunConfig& c, const FittedRun& r, const json& grids) {
  const AssembledModel& m = *r.model;
  const ModelSpec& spec = m.spec();
  json blocks = json::array();
  json spatial = json::array();
  const json hyper = hyper_json(r);
  for (const auto& b : m.blocks()) {
    blocks.push_back({{"name", b.name}, {"kind", b.kind}, {"term", b.term->kind()}, {"dim", b.dim}});
    if (b.kind != "field") continue;
    json s = {{"name", b.name}, {"term", b.term->kind()}, {"nodes", b.dim}};
    for (const auto& h : hyper)
      if (h["term"] == b.term->name()) s[h["scale"].get<std::string>()] = h;
    spatial.push_back(s);
  }

  json priors = json::array();
  for (const auto& h : hyper) priors.push_back({{"parameter", h["name"]}, {"prior", h["prior"]}});
  const auto& p = spec.priors;
  priors.push_back({{"parameter", "intercepts"},
                    {"prior", p.intercept_precision > 0.0 ? "N(0, precision " + format_number(p.intercept_precision) + ")"
                                                          : std::string("flat")}});
  if (spec.has_exposure() && spec.exposure == ExposureForm::fixed)
    priors.push_back({{"parameter", "exposure slopes"}, {"prior", "N(0, precision " + format_number(p.fixed_precision) + ")"}});
  if (!spec.confounders.empty())
    priors.push_back({{"parameter", "confounders"}, {"prior", "N(0, precision " + format_number(p.fixed_precision) + ")"}});

  const auto effects = fixed_effects(r.fit, m);
  json fixed = json::array();
  for (const auto& e : effects) fixed.push_back(effect_json(e));

  json exposure = json::array();
  if (spec.has_exposure()) {
    const auto& dist = m.data().distances;
    for (int j = 0; j < static_cast<int>(spec.sources.size()); ++j) {
      json entry = {{"source", j + 1}, {"location", point_json(spec.sources[static_cast<std::size_t>(j)])}};
      if (spec.exposure == ExposureForm::fixed) {
        json rows = json::array();
        for (int i = 1; i <= spec.n_diseases; ++i) {
          const std::string& name = m.exposure(i, j)->name;
          for (const auto& e : effects)
            if (e.name == name) {
              json row = effect_json(e);
              row["disease"] = i;
              rows.push_back(row);
            }
        }
        entry["coefficients"] = rows;
      } else {
        const double lo = dist.col(j).minCoeff(), hi = dist.col(j).maxCoeff();
        std::vector<double> ds;
        for (int k = 0; k < 50; ++k) ds.push_back(lo + (hi - lo) * k / 49.0);
        json curves = json::array();
        for (int i = 1; i <= spec.n_diseases; ++i) {
          json pts = json::array();
          for (const auto& q : exposure_curve(r.fit, m, i, j, ds))
            pts.push_back({{"distance", q.distance}, {"mean", q.mean}, {"sd", q.sd}});
          curves.push_back({{"disease", i}, {"points", pts}});
        }
        entry["curves"] = curves;
      }
      exposure.push_back(entry);
    }
  }

  double wsum = 0.0;
  for (const auto& g : r.fit.grid) wsum += g.weight;
  return {{"format", "mvpp-fit-report/1"},
          {"config", json::parse(serialize(c))},
          {"dataset", dataset_json(c, r.inputs)},
          {"model",
           {{"id", spec.model},
            {"exposure", spec.has_exposure() ? to_string(spec.exposure) : std::string("none")},
            {"n_diseases", spec.n_diseases},
            {"weights", to_string(spec.weights)},
            {"mesh_vertices", m.mesh().n_vertices()},
            {"mesh_triangles", m.mesh().triangles.size()},
            {"n_latent", m.latent().n_latent()},
            {"n_rows", m.latent().n_rows()},
            {"blocks", blocks}}},
          {"priors", priors},
          {"hyperparameters", hyper},
          {"spatial_terms", spatial},
          {"fixed_effects", fixed},
          {"exposure", exposure},
          {"criteria", criteria_json(r.fit.criteria)},
          {"convergence",
           {{"outer_iterations", r.fit.outer_iterations},
            {"outer_gradient_norm", r.fit.outer_gradient_norm},
            {"max_inner_gradient", r.fit.max_inner_gradient},
            {"design_points", r.fit.grid.size()},
            {"weight_sum", wsum},
            {"clamped_hessian_directions", r.fit.clamped_hessian_directions}}},
          {"grids", grids}};
}

/// Fits and writes report + grids into `dir`; returns the report.
json fit_and_write(const RunConfig& c, const fs::path& dir, std::ostream& log) {
  const FittedRun r = run_fit(c, log);
  const GridSpec grid = GridSpec::covering(r.inputs.window, c.grid_res);
  json grids = json::array();
  for (int i = 0; i <= r.model->spec().n_diseases; ++i) {
    if (!r.model->field(i)) continue;
    write_field_grids(dir, "S" + std::to_string(i), field_grids(r.fit, *r.model, i, grid, r.inputs.window), i > 0,
                      grids);
  }
  if (c.verbosity > 0) {
    std::ostringstream audit;
    r.model->data().write_csv(audit);
    write_text_file(dir / "augmented.csv", audit.str());
  }
  json report = report_json(c, r, grids);
  write_text_file(dir / "fit_report.json", dump(report));
  return report;
}

std::string fmt_fixed(double v) {
  if (!std::isfinite(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

double as_double(const json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

}  // namespace

std::string serialize(const RunConfig& config) { return dump(config_json(config)); }

RunConfig parse_run_config(const std::string& json_text) {
  try {
    return config_from(json::parse(json_text));
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("config file not found: " + path.string());
  RunConfig c;
  try {
    c = parse_run_config(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.window);
  resolve(c.pattern);
  resolve(c.fit_report);
  for (auto& r : c.reports) resolve(r);
  return c;
}

// ---------------------------------------------------------------------------
// commands

int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& log) {
  check_grid_res(c);
  const auto& s = c.simulation;
  Scenario sc;
  const StudyArea area = synthetic_study_area();
  if (c.window.empty()) {
    sc.window = area.window;
    sc.source = s.source.value_or(area.source);
  } else {
    if (!fs::exists(c.window)) throw InputError("window file not found: " + c.window);
    sc.window = read_geojson_window(c.window);
    if (!s.source) throw InputError("simulation.source is required with a custom window");
    sc.source = *s.source;
  }
  sc.n_controls = s.n_controls;
  sc.case_counts = s.case_counts;
  sc.phis = s.phis;
  sc.seed = c.seed;
  sc.bandwidth = c.bandwidth;
  sc.grid_res = c.grid_res;
  if (!c.pattern.empty()) {
    // Baseline from the controls of an observed pattern instead of the analytic surface.
    if (!fs::exists(c.pattern)) throw InputError("pattern file not found: " + c.pattern);
    const PointPattern obs = read_pattern_csv(c.pattern);
    const auto ctrl = obs.points_of(0);
    if (ctrl.empty()) throw InputError(c.pattern + ": no controls to estimate the baseline from");
    sc.baseline = kernel_intensity(ctrl, c.bandwidth, GridSpec::covering(sc.window, c.grid_res), sc.window);
  }
  for (double phi : sc.phis)
    if (!(phi > 0.0)) throw InputError("simulation: phi must be positive");
  for (auto n : sc.case_counts)
    if (n == 0) throw InputError("simulation: case counts must be positive");

  const Study study = simulate_study(sc, s.phi_filter, s.n_filter, c.inference.threads);
  const fs::path dir = prepare_out(c);

  std::ostringstream win;
  write_geojson_window(win, sc.window);
  write_text_file(dir / "window.geojson", win.str());

  json files = json::array();
  for (const auto& d : study.datasets) {
    const std::string name = "sim_n" + std::to_string(d.n_cases) + "_phi" + format_number(d.phi) + ".csv";
    std::ostringstream csv;
    write_pattern_csv(csv, d.pattern);
    write_text_file(dir / name, csv.str());
    files.push_back({{"file", name},
                     {"sha256", sha256_hex(csv.str())},
                     {"n_cases", d.n_cases},
                     {"phi", d.phi},
                     {"n_controls", d.pattern.count(0)}});
    if (c.verbosity > 0) log << "wrote " << name << '\n';
  }
  RunConfig recorded = c;
  json manifest = {{"format", "mvpp-simulation-manifest/1"},
                   {"seed", c.seed},
                   {"scenario",
                    {{"n_controls", sc.n_controls},
                     {"case_counts", sc.case_counts},
                     {"phis", sc.phis},
                     {"source", point_json(sc.source)},
                     {"bandwidth", sc.bandwidth},
                     {"grid_res", sc.grid_res},
                     {"baseline", sc.baseline ? "kernel estimate from " + c.pattern : std::string("synthetic analytic")},
                     {"window", c.window.empty() ? std::string("synthetic") : c.window}}},
                   {"window", {{"file", "window.geojson"}, {"sha256", sha256_hex(win.str())}}},
                   {"config", json::parse(serialize(recorded))},
                   {"datasets", files}};
  write_text_file(dir / "manifest.json", dump(manifest));
  out << "simulated " << study.datasets.size() << " dataset" << (study.datasets.size() == 1 ? "" : "s") << " into "
      << c.out << '\n';
  return ok;
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& log) {
  const fs::path dir = prepare_out(c);
  const json report = fit_and_write(c, dir, log);
  const auto& cr = report["criteria"];
  out << "model " << report["model"]["id"].get<int>() << ": DIC " << fmt_fixed(as_double(cr["dic"])) << ", WAIC "
      << fmt_fixed(as_double(cr["waic"])) << ", log ML " << fmt_fixed(as_double(cr["log_ml"])) << '\n'
      << "report written to " << (dir / "fit_report.json").string() << '\n';
  return ok;
}

int cmd_compare(const RunConfig& c, std::ostream& out, std::ostream& log) {
  if (c.reports.size() < 2) throw InputError("compare needs at least two fit reports or configs");
  const fs::path dir = prepare_out(c);
  std::vector<json> reports;
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < c.reports.size(); ++k) {
    const std::string& path = c.reports[k];
    if (!fs::exists(path)) throw InputError("file not found: " + path);
    json j;
    try {
      j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
      throw InputError(path + ": " + e.what());
    }
    if (j.contains("criteria")) {
      reports.push_back(j);
    } else {
      // A run config: fit it into a sub-directory.
      RunConfig sub = load_run_config(path);
      sub.out = (dir / ("fit_" + std::to_string(k + 1))).string();
      sub.grid_res = std::min(sub.grid_res, 50);
      reports.push_back(fit_and_write(sub, prepare_out(sub), log));
    }
    const fs::path fp(path);
    labels.push_back(fp.stem() == "fit_report" && fp.has_parent_path() ? fp.parent_path().filename().string()
                                                                        : fp.stem().string());
  }
  const auto& d0 = reports[0]["dataset"];
  for (std::size_t k = 1; k < reports.size(); ++k) {
    const auto& d = reports[k]["dataset"];
    if (d["pattern_sha256"] != d0["pattern_sha256"] || d["window_sha256"] != d0["window_sha256"])
      throw ConsistencyError("dataset hashes differ between " + c.reports[0] + " and " + c.reports[k] +
                             "; refusing to compare fits of different data");
  }

  auto crit = [](const json& r, const char* key, const char* flag) {
    const auto& cr = r["criteria"];
    return cr[flag].get<bool>() ? as_double(cr[key]) : std::nan("");
  };
  const double dic0 = crit(reports[0], "dic", "dic_reliable");
  std::ostringstream table;
  table << "label,model,exposure,dic,delta_dic,waic,log_ml,p_d,p_waic\n";
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& r = reports[k];
    const double dic = crit(r, "dic", "dic_reliable");
    const double waic = crit(r, "waic", "waic_reliable");
    table << labels[k] << ',' << r["model"]["id"].get<int>() << ',' << r["model"]["exposure"].get<std::string>() << ','
          << fmt_fixed(dic) << ',' << fmt_fixed(dic - dic0) << ',' << fmt_fixed(waic) << ','
          << fmt_fixed(as_double(r["criteria"]["log_ml"])) << ',' << fmt_fixed(crit(r, "p_d", "dic_reliable")) << ','
          << fmt_fixed(crit(r, "p_waic", "waic_reliable")) << '\n';
  }
  write_text_file(dir / "comparison.csv", table.str());
  out << table.str();
  return ok;
}

int cmd_riskmap(const RunConfig& c, std::ostream& out, std::ostream& log) {
  if (!c.model.has_specific_fields())
    throw InputError("riskmap needs disease-specific fields: use model 1 or 3 (got " + std::to_string(c.model.model) +
                     ")");
  check_grid_res(c);
  if (!c.fit_report.empty()) {
    if (!fs::exists(c.fit_report)) throw InputError("fit report not found: " + c.fit_report);
    const json rep = json::parse(read_text_file(c.fit_report));
    if (!fs::exists(c.pattern) || !fs::exists(c.window)) load_inputs(c);  // raises the input error
    if (rep.at("dataset").at("pattern_sha256") != sha256_file(c.pattern) ||
        rep.at("dataset").at("window_sha256") != sha256_file(c.window))
      throw ConsistencyError("fit report " + c.fit_report + " was produced from different data");
    if (rep.at("model").at("id").get<int>() != c.model.model)
      throw ConsistencyError("fit report " + c.fit_report + " is for a different model");
  }
  const fs::path dir = prepare_out(c);
  const FittedRun r = run_fit(c, log);
  const GridSpec grid = GridSpec::covering(r.inputs.window, c.grid_res);
  json files = json::array();
  json summary = json::array();
  auto summarize = [&](const std::string& name, const FieldGrids& g) {
    std::size_t hi = 0, lo = 0, n = 0;
    double mx = 0.0;
    for (std::size_t k = 0; k < g.exceedance.values.size(); ++k) {
      if (!g.exceedance.mask[k]) continue;
      const double p = g.exceedance.values[k];
      ++n;
      hi += p > 0.9;
      lo += p < 0.1;
      mx = std::max(mx, p);
    }
    summary.push_back({{"name", name},
                       {"cells", n},
                       {"share_above_0.9", n ? static_cast<double>(hi) / static_cast<double>(n) : 0.0},
                       {"share_below_0.1", n ? static_cast<double>(lo) / static_cast<double>(n) : 0.0},
                       {"max_exceedance", mx},
                       {"max_mean", g.mean.max_masked()}});
  };
  for (int i = 1; i <= r.model->spec().n_diseases; ++i) {
    const std::string name = "risk_S" + std::to_string(i);
    const FieldGrids g = field_grids(r.fit, *r.model, i, grid, r.inputs.window);
    write_field_grids(dir, name, g, true, files);
    summarize(name, g);
  }
  for (const auto& [u, v] : c.differences) {
    const std::string name = "delta_S" + std::to_string(u) + "_S" + std::to_string(v);
    const FieldGrids g = effect_difference(r.fit, *r.model, u, v, grid, r.inputs.window);
    write_field_grids(dir, name, g, true, files);
    summarize(name, g);
  }
  json doc = {{"format", "mvpp-riskmap/1"},
              {"dataset", dataset_json(c, r.inputs)},
              {"model", r.model->spec().model},
              {"grids", files},
              {"summary", summary}};
  write_text_file(dir / "riskmap_summary.json", dump(doc));
  for (const auto& s : summary)
    out << s["name"].get<std::string>() << ": " << fmt_fixed(100.0 * s["share_above_0.9"].get<double>())
        << "% of cells with P(S > 0) > 0.9\n";
  return ok;
}

int cmd_smooth(const RunConfig& c, std::ostream& out, std::ostream&) {
  check_grid_res(c);
  const Inputs in = load_inputs(c);
  if (!(c.bandwidth > 0.0)) throw InputError("bandwidth must be positive");
  const fs::path dir = prepare_out(c);
  const GridSpec grid = GridSpec::covering(in.window, c.grid_res);
  json files = json::array();
  json summary = json::array();
  const auto controls = in.pattern.points_of(0);
  for (int m = 0; m < in.pattern.n_types(); ++m) {
    const GridField f = kernel_intensity(in.pattern.points_of(m), c.bandwidth, grid, in.window);
    write_grid(dir, "intensity_" + std::to_string(m), f, files);
    json s = {{"mark", m}, {"n", in.pattern.count(m)}, {"integral", f.integral()}, {"warning", f.warning}};
    if (m > 0 && !controls.empty() && in.pattern.count(m) > 0) {
      const GridField rr = risk_ratio(in.pattern.points_of(m), controls, c.bandwidth, grid, in.window);
      write_grid(dir, "risk_ratio_" + std::to_string(m), rr, files);
      std::vector<double> v;
      for (std::size_t k = 0; k < rr.values.size(); ++k)
        if (rr.mask[k] && std::isfinite(rr.values[k])) v.push_back(rr.values[k]);
      std::sort(v.begin(), v.end());
      s["risk_ratio_median"] = v.empty() ? std::nan("") : v[v.size() / 2];
      s["null_ratio"] = static_cast<double>(in.pattern.count(m)) / static_cast<double>(controls.size());
      s["undefined_cells"] = rr.n_undefined();
    }
    summary.push_back(s);
  }
  json doc = {{"format", "mvpp-smooth/1"},
              {"dataset", dataset_json(c, in)},
              {"bandwidth", c.bandwidth},
              {"grids", files},
              {"summary", summary}};
  write_text_file(dir / "smooth_summary.json", dump(doc));
  out << "wrote " << files.size() << " grid files to " << c.out << '\n';
  return ok;
}

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multivariate log-Gaussian Cox process case-control modelling"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir, exposure, window, pattern, design, fit_report;
  std::uint64_t seed = 0;
  int model = 0, grid_res = 0, verbose = 0;
  unsigned threads = 0;
  double phi = 0.0, bandwidth = 0.0;
  std::size_t n_cases = 0, n_controls = 0;
  std::vector<std::string> sources, diffs, inputs;

  auto* o_config = app.add_option("--config", config_path, "Run configuration (JSON)");
  auto* o_seed = app.add_option("--seed", seed, "Random seed");
  auto* o_model = app.add_option("--model", model, "Model family")->check(CLI::Range(0, 3));
  auto* o_exp = app.add_option("--exposure", exposure, "Exposure form")->check(CLI::IsMember({"fixed", "rw1", "spde1"}));
  auto* o_out = app.add_option("--out", out_dir, "Output directory");
  auto* o_grid = app.add_option("--grid-res", grid_res, "Cells along the longer side of the output grids");
  auto* o_window = app.add_option("--window", window, "Window (GeoJSON)");
  auto* o_pattern = app.add_option("--pattern", pattern, "Pattern CSV (x,y,mark[,cov...])");
  auto* o_threads = app.add_option("--threads", threads, "Worker threads (0: all cores)");
  auto* o_bw = app.add_option("--bandwidth", bandwidth, "Kernel bandwidth (km)");
  app.add_flag("-v,--verbose", verbose, "More output");

  auto* sim = app.add_subcommand("simulate", "Simulation-study datasets and manifest");
  auto* o_phi = sim->add_option("--phi", phi, "Only this decay scale");
  auto* o_n = sim->add_option("--n-cases", n_cases, "Only this number of cases");
  auto* o_nc = sim->add_option("--n-controls", n_controls, "Number of controls");
  auto* o_src = sim->add_option("--source", sources, "Source location x,y");

  auto* fitc = app.add_subcommand("fit", "Fit a model and write the report and grids");
  auto* o_fsrc = fitc->add_option("--source", sources, "Pollution source x,y (repeatable)");
  auto* o_design = fitc->add_option("--design", design, "Hyperparameter design")->check(CLI::IsMember({"ccd", "mode"}));

  auto* cmp = app.add_subcommand("compare", "Comparison table of fit reports (or configs)");
  cmp->add_option("inputs", inputs, "Fit reports or run configs")->required();

  auto* rm = app.add_subcommand("riskmap", "Disease-specific posterior and exceedance grids");
  auto* o_fit = rm->add_option("--fit", fit_report, "Fit report to check against");
  rm->add_option("--diff", diffs, "Delta_uv request u,v (repeatable)");
  auto* o_rsrc = rm->add_option("--source", sources, "Pollution source x,y (repeatable)");

  app.add_subcommand("smooth", "Kernel intensities and risk ratios");

  std::vector<const char*> argv{"mvpp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : input;
  }

  auto parse_pair = [](const std::string& s, const char* what) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw InputError(std::string(what) + " must be 'a,b', got '" + s + "'");
    try {
      return std::pair<double, double>(std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1)));
    } catch (const std::exception&) {
      throw InputError(std::string(what) + " must be 'a,b', got '" + s + "'");
    }
  };

  try {
    RunConfig c = o_config->count() ? load_run_config(config_path) : RunConfig{};
    c.command = app.get_subcommands().front()->get_name();
    if (o_seed->count()) c.seed = seed;
    if (o_model->count()) c.model.model = model;
    if (o_exp->count()) c.model.exposure = parse_exposure(exposure);
    if (o_out->count()) c.out = out_dir;
    if (o_grid->count()) c.grid_res = grid_res;
    if (o_window->count()) c.window = window;
    if (o_pattern->count()) c.pattern = pattern;
    if (o_threads->count()) c.inference.threads = threads;
    if (o_bw->count()) c.bandwidth = bandwidth;
    if (verbose) c.verbosity = verbose;
    if (o_phi->count()) c.simulation.phi_filter = phi;
    if (o_n->count()) c.simulation.n_filter = n_cases;
    if (o_nc->count()) c.simulation.n_controls = n_controls;
    if (o_design->count()) c.inference.design = design;
    if (o_fit->count()) c.fit_report = fit_report;
    if (o_src->count() || o_fsrc->count() || o_rsrc->count()) {
      std::vector<Point> pts;
      for (const auto& s : sources) {
        const auto [x, y] = parse_pair(s, "--source");
        pts.push_back({x, y});
      }
      if (c.command == "simulate") {
        if (pts.size() != 1) throw InputError("simulate takes exactly one --source");
        c.simulation.source = pts[0];
      } else {
        c.model.sources = pts;
      }
    }
    for (const auto& d : diffs) {
      const auto [u, v] = parse_pair(d, "--diff");
      c.differences.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    if (!inputs.empty()) c.reports = inputs;

    if (c.command == "simulate") return cmd_simulate(c, out, err);
    if (c.command == "fit") return cmd_fit(c, out, err);
    if (c.command == "compare") return cmd_compare(c, out, err);
    if (c.command == "riskmap") return cmd_riskmap(c, out, err);
    return cmd_smooth(c, out, err);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return input;
  } catch (const ConsistencyError& e) {
    err << "consistency error: " << e.what() << '\n';
    return consistency;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    if (!e.trace().empty()) {
      err << "trace:";
      for (double t : e.trace()) err << ' ' << t;
      err << '\n';
    }
    return numerical;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << '\n';
    return input;
  } catch (const json::exception& e) {
    err << "input error: " << e.what() << '\n';
    return input;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return numerical;
  }
}

}  // namespace mvpp::cli
