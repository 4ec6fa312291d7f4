#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvpp/lgcp.hpp"

namespace mvpp::cli {

enum ExitCode : int { ok = 0, numerical = 1, input = 2, consistency = 3 };

struct SimulationSettings {
  std::size_t n_controls = 3000;
  std::vector<std::size_t> case_counts{50, 100, 300, 500, 1000, 2000};
  std::vector<double> phis{1.0, 3.0, 6.0};
  /// Defaults to the synthetic study area's source.
  std::optional<Point> source;
  std::optional<double> phi_filter;
  std::optional<std::size_t> n_filter;
};

struct InferenceSettings {
  std::string design = "ccd";  // ccd | mode
  double ccd_step = 1.0;
  unsigned threads = 0;
};

/// Everything a command needs. Paths are used as given; load_run_config()
/// resolves relative paths against the config file's directory.
struct RunConfig {
  std::string command;
  std::string window;   // GeoJSON; empty selects the synthetic area (simulate only)
  std::string pattern;  // pattern CSV
  std::vector<std::string> reports;  // compare inputs (fit reports or configs)
  std::string fit_report;            // riskmap: report to check against
  ModelSpec model;
  std::string out = "out";
  std::uint64_t seed = 1;
  int grid_res = 100;
  int verbosity = 0;
  double bandwidth = 0.3;
  SimulationSettings simulation;
  InferenceSettings inference;
  std::vector<std::pair<int, int>> differences;  // riskmap Delta_uv requests
};

/// Serialization is total: every field is written, so parse(serialize(c))
/// reproduces c. Unknown keys are rejected (InputError).
std::string serialize(const RunConfig& config);
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_riskmap(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_smooth(const RunConfig& config, std::ostream& out, std::ostream& log);

/// Full command-line entry point; maps exceptions to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mvpp::cli
