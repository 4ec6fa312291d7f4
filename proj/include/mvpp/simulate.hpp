#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "mvpp/geometry.hpp"
#include "mvpp/smoothing.hpp"

namespace mvpp {

using Rng = std::mt19937_64;

/// Independent generator for one (seed, n, phi, tag) combination.
Rng make_stream(std::uint64_t seed, std::uint64_t n = 0, double phi = 0.0, std::uint64_t tag = 0);

enum class CountMode {
  rate,     // Poisson number of points
  fixed_n,  // exactly n points (conditional simulation)
};

using Intensity = std::function<double(Point)>;

/// Lewis-Shedler thinning of a homogeneous process with rate `bound` on the
/// window's bounding box. Every point gets `mark`.
PointPattern thin_poisson(const Intensity& intensity, double bound, const Window& window, Rng& rng, CountMode mode,
                          std::size_t n = 0, int mark = 0);
/// Same with a gridded intensity; the bound is the grid maximum.
PointPattern thin_poisson(const GridField& intensity, const Window& window, Rng& rng, CountMode mode,
                          std::size_t n = 0, int mark = 0);

/// exp(-d / phi).
double distance_modulation(double d, double phi);

/// Irregular city-like window whose source sits in a small excluded site
/// (octagon of apothem 0.05 km) and whose farthest vertex is 5.3 km away, so
/// every distance to the source lies in [0.05, 5.3].
struct StudyArea {
  Window window;
  Point source;
};
StudyArea synthetic_study_area();

/// Smooth population-like density on the synthetic area (two centres on a
/// background), bounded by `synthetic_baseline_bound()`.
double synthetic_baseline(Point p);
double synthetic_baseline_bound();

struct Scenario {
  std::size_t n_controls = 3000;
  std::vector<std::size_t> case_counts{50, 100, 300, 500, 1000, 2000};
  std::vector<double> phis{1.0, 3.0, 6.0};
  std::uint64_t seed = 1;
  Window window = synthetic_study_area().window;
  Point source = synthetic_study_area().source;
  double bandwidth = 0.3;
  int grid_res = 100;
  /// Control intensity; the analytic synthetic baseline when unset.
  std::optional<GridField> baseline;
};

struct StudyDataset {
  std::size_t n_cases = 0;
  double phi = 0.0;
  PointPattern pattern;  // mark 0 controls, mark 1 cases
};

struct Study {
  PointPattern controls;
  GridField control_intensity;  // kernel estimate from the simulated controls
  std::vector<StudyDataset> datasets;
};

/// Controls from the baseline, the baseline re-estimated from them, then cases
/// from lambda0(x) exp(-d/phi) for each (n, phi). Optional filters select a
/// subset of the design without changing any dataset's random stream.
Study simulate_study(const Scenario& scenario, std::optional<double> phi_filter = std::nullopt,
                     std::optional<std::size_t> n_filter = std::nullopt, unsigned threads = 1);

}  // namespace mvpp
