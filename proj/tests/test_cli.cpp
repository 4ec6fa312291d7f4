#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "mvpp/cli.hpp"
#include "mvpp/error.hpp"
#include "mvpp/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mvpp;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("mvpp_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

struct Run {
  int code;
  std::string out, err;
};

Run mvpp_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json load(const std::string& p) { return json::parse(read_text_file(p)); }

/// Small simulated dataset shared by the command tests.
const TempDir& data() {
  static TempDir dir;
  static bool done = false;
  if (!done) {
    const Run r = mvpp_run({"simulate", "--out", dir / "sim", "--phi", "1", "--n-cases", "300", "--n-controls", "800",
                            "--grid-res", "40"});
    REQUIRE(r.code == 0);
    done = true;
  }
  return dir;
}

}  // namespace

TEST_CASE("config round-trip") {
  cli::RunConfig c;
  c.command = "fit";
  c.window = "w.geojson";
  c.pattern = "p.csv";
  c.model.model = 3;
  c.model.exposure = ExposureForm::spde1;
  c.model.sources = {{1.5, 2.25}, {0.1, 3.0}};
  c.model.confounders = {"age"};
  c.model.weights = WeightScheme::dual_mesh;
  c.model.priors.range_threshold = 2.0;
  c.model.mesh.max_edge_inner = 0.3;
  c.simulation.source = Point{5.0, 4.5};
  c.simulation.phi_filter = 3.0;
  c.differences = {{1, 2}};
  c.seed = 42;
  const std::string s = cli::serialize(c);
  const cli::RunConfig back = cli::parse_run_config(s);
  CHECK(cli::serialize(back) == s);
  CHECK(back.model.sources.size() == 2);
  CHECK(back.model.sources[0].y == 2.25);
  CHECK(back.model.priors == c.model.priors);
  CHECK(back.simulation.phi_filter == 3.0);
  CHECK_FALSE(back.simulation.n_filter.has_value());
  CHECK(back.differences == c.differences);

  // Partial configs fill defaults; unknown keys and bad values are input errors.
  const cli::RunConfig partial = cli::parse_run_config(R"({"model": {"id": 2}, "seed": 7})");
  CHECK(partial.model.model == 2);
  CHECK(partial.grid_res == 100);
  CHECK(cli::serialize(cli::parse_run_config(cli::serialize(partial))) == cli::serialize(partial));
  CHECK_THROWS_AS(cli::parse_run_config(R"({"modle": {}})"), InputError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"model": {"exposure": "linear"}})"), InputError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"seed": "x"})"), InputError);
}

TEST_CASE("simulate command") {
  TempDir t;
  Run r = mvpp_run({"simulate", "--out", t / "all", "--n-controls", "300", "--grid-res", "30"});
  REQUIRE(r.code == 0);
  const json m = load(t / "all/manifest.json");
  CHECK(m["datasets"].size() == 18);
  for (const auto& d : m["datasets"]) CHECK(sha256_file(t / ("all/" + d["file"].get<std::string>())) == d["sha256"]);
  CHECK(m["window"]["sha256"] == sha256_file(t / "all/window.geojson"));

  r = mvpp_run({"simulate", "--out", t / "one", "--phi", "3", "--n-cases", "500", "--n-controls", "300", "--grid-res",
                "30"});
  REQUIRE(r.code == 0);
  CHECK(load(t / "one/manifest.json")["datasets"].size() == 1);
  // Same stream with and without filtering.
  CHECK(read_text_file(t / "one/sim_n500_phi3.csv") == read_text_file(t / "all/sim_n500_phi3.csv"));

  r = mvpp_run({"simulate", "--out", t / "x", "--window", t / "missing.geojson"});
  CHECK(r.code == cli::input);
  CHECK(r.err.find(t / "missing.geojson") != std::string::npos);
  CHECK(mvpp_run({"simulate", "--out", t / "x", "--phi", "2"}).code == cli::input);
  CHECK(mvpp_run({"simulate", "--bogus"}).code == cli::input);
  CHECK(mvpp_run({}).code == cli::input);
}

TEST_CASE("fit command") {
  const TempDir& d = data();
  const std::string window = d / "sim/window.geojson";

  // Controls only: exactly one spatial term.
  PointPattern p = read_pattern_csv(d / "sim/sim_n300_phi1.csv");
  PointPattern controls;
  controls.points = p.points_of(0);
  controls.marks.assign(controls.points.size(), 0);
  controls.covariates.resize(static_cast<Eigen::Index>(controls.points.size()), 0);
  std::ostringstream cs;
  write_pattern_csv(cs, controls);
  write_text_file(d / "controls.csv", cs.str());
  Run r = mvpp_run({"fit", "--window", window, "--pattern", d / "controls.csv", "--model", "0", "--out", d / "m0",
                    "--grid-res", "30"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json m0 = load(d / "m0/fit_report.json");
  CHECK(m0["spatial_terms"].size() == 1);
  CHECK(m0["spatial_terms"][0]["name"] == "S0");
  CHECK(m0["model"]["n_diseases"] == 0);
  CHECK(m0["convergence"]["weight_sum"].get<double>() == doctest::Approx(1.0));
  CHECK(fs::exists(d / "m0/S0_mean.csv"));
  CHECK(fs::exists(d / "m0/S0_sd.asc"));

  // Two diseases and one source: two slope rows with intervals.
  for (std::size_t i = 0, k = 0; i < p.size(); ++i)
    if (p.marks[i] == 1 && (k++ % 2)) p.marks[i] = 2;
  std::ostringstream ps;
  write_pattern_csv(ps, p);
  write_text_file(d / "two.csv", ps.str());
  const std::vector<std::string> args{"fit",          "--window", window, "--pattern", d / "two.csv", "--model", "2",
                                      "--exposure",   "fixed",    "--source", "5,4.5", "--out", d / "m2", "--grid-res",
                                      "30"};
  r = mvpp_run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json m2 = load(d / "m2/fit_report.json");
  REQUIRE(m2["exposure"].size() == 1);
  const auto& rows = m2["exposure"][0]["coefficients"];
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row["lower"].get<double>() < row["mean"].get<double>());
    CHECK(row["mean"].get<double>() < row["upper"].get<double>());
    CHECK(row["mean"].get<double>() < 0.0);  // cases concentrate near the source
  }
  const std::string first = read_text_file(d / "m2/fit_report.json");
  const std::string grid = read_text_file(d / "m2/S0_mean.csv");
  REQUIRE(mvpp_run(args).code == 0);
  CHECK(read_text_file(d / "m2/fit_report.json") == first);
  CHECK(read_text_file(d / "m2/S0_mean.csv") == grid);

  CHECK(mvpp_run({"fit", "--window", window, "--pattern", d / "nope.csv", "--out", d / "x"}).code == cli::input);
  CHECK(mvpp_run({"fit", "--window", window, "--pattern", d / "two.csv", "--model", "2", "--out", d / "x"}).code ==
        cli::input);  // no source
  CHECK(mvpp_run({"fit", "--window", window, "--pattern", d / "two.csv", "--exposure", "linear"}).code == cli::input);
}

TEST_CASE("compare command") {
  const TempDir& d = data();
  const std::string window = d / "sim/window.geojson", pattern = d / "sim/sim_n300_phi1.csv";
  REQUIRE(mvpp_run({"fit", "--window", window, "--pattern", pattern, "--model", "0", "--out", d / "c0", "--grid-res",
                    "20"})
              .code == 0);
  REQUIRE(mvpp_run({"fit", "--window", window, "--pattern", pattern, "--model", "2", "--source", "5,4.5", "--out",
                    d / "c2", "--grid-res", "20"})
              .code == 0);
  Run r = mvpp_run({"compare", d / "c0/fit_report.json", d / "c0/fit_report.json", "--out", d / "cmp"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, a, b;
  std::getline(lines, header);
  std::getline(lines, a);
  std::getline(lines, b);
  CHECK(header == "label,model,exposure,dic,delta_dic,waic,log_ml,p_d,p_waic");
  CHECK(b.find(",0.000,") != std::string::npos);
  CHECK(read_text_file(d / "cmp/comparison.csv") == r.out);

  r = mvpp_run({"compare", d / "c0/fit_report.json", d / "c2/fit_report.json", "--out", d / "cmp"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("\nc2,2,fixed,") != std::string::npos);

  // Unreliable criteria print as dashes.
  json bad = load(d / "c2/fit_report.json");
  bad["criteria"]["dic_reliable"] = false;
  bad["criteria"]["waic_reliable"] = false;
  write_text_file(d / "flagged.json", bad.dump());
  r = mvpp_run({"compare", d / "c0/fit_report.json", d / "flagged.json", "--out", d / "cmp"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("flagged,2,fixed,-,-,-,") != std::string::npos);

  json other = load(d / "c2/fit_report.json");
  other["dataset"]["pattern_sha256"] = std::string(64, '0');
  write_text_file(d / "other.json", other.dump());
  r = mvpp_run({"compare", d / "c0/fit_report.json", d / "other.json", "--out", d / "cmp"});
  CHECK(r.code == cli::consistency);
  CHECK(mvpp_run({"compare", d / "c0/fit_report.json", "--out", d / "cmp"}).code == cli::input);
}

TEST_CASE("riskmap and smooth commands") {
  const TempDir& d = data();
  const std::string window = d / "sim/window.geojson", pattern = d / "sim/sim_n300_phi1.csv";
  CHECK(mvpp_run({"riskmap", "--window", window, "--pattern", pattern, "--model", "0", "--out", d / "r"}).code ==
        cli::input);
  Run r = mvpp_run({"riskmap", "--window", window, "--pattern", pattern, "--model", "1", "--out", d / "r",
                    "--grid-res", "25"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json s = load(d / "r/riskmap_summary.json");
  CHECK(s["grids"].size() == 6);
  std::istringstream ex(read_text_file(d / "r/risk_S1_exceedance.csv"));
  std::string line;
  std::getline(ex, line);
  CHECK(line == "x,y,value");
  while (std::getline(ex, line)) {
    const double v = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // A report from another dataset is refused.
  json other = json::object();
  other["dataset"] = {{"pattern_sha256", "x"}, {"window_sha256", "y"}};
  other["model"] = {{"id", 1}};
  write_text_file(d / "otherfit.json", other.dump());
  CHECK(mvpp_run({"riskmap", "--window", window, "--pattern", pattern, "--model", "1", "--fit", d / "otherfit.json",
                  "--out", d / "r"})
            .code == cli::consistency);

  r = mvpp_run({"smooth", "--window", window, "--pattern", pattern, "--out", d / "sm", "--grid-res", "40"});
  REQUIRE(r.code == 0);
  const json sm = load(d / "sm/smooth_summary.json");
  CHECK(sm["summary"][0]["integral"].get<double>() == doctest::Approx(800.0).epsilon(0.05));
  CHECK(fs::exists(d / "sm/risk_ratio_1.asc"));
}
