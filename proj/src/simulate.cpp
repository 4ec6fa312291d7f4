#include "mvpp/simulate.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "mvpp/error.hpp"
#include "parallel.hpp"

namespace mvpp {

Rng make_stream(std::uint64_t seed, std::uint64_t n, double phi, std::uint64_t tag) {
  const auto bits = std::bit_cast<std::uint64_t>(phi);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32),
                    static_cast<std::uint32_t>(bits), static_cast<std::uint32_t>(bits >> 32),
                    static_cast<std::uint32_t>(tag)};
  return Rng(seq);
}

PointPattern thin_poisson(const Intensity& intensity, double bound, const Window& window, Rng& rng, CountMode mode,
                          std::size_t n, int mark) {
  if (!(bound >= 0.0) || !std::isfinite(bound)) throw InputError("thinning: bound must be finite and non-negative");
  PointPattern out;
  const Box& b = window.bbox();
  std::uniform_real_distribution<double> ux(b.lo.x, b.hi.x), uy(b.lo.y, b.hi.y), u01(0.0, 1.0);
  auto accept = [&](Point p) {
    if (!window.contains(p)) return false;
    const double l = intensity(p);
    if (l < 0.0 || l > bound * (1.0 + 1e-12)) throw InputError("thinning: intensity outside [0, bound]");
    return u01(rng) * bound < l;
  };
  if (mode == CountMode::rate) {
    std::poisson_distribution<long> count(bound * b.width() * b.height());
    const long m = bound > 0.0 ? count(rng) : 0;
    for (long i = 0; i < m; ++i) {
      const Point p{ux(rng), uy(rng)};
      if (accept(p)) out.points.push_back(p);
    }
  } else {
    if (n > 0 && !(bound > 0.0)) throw InputError("thinning: intensity is identically zero");
    const std::size_t max_candidates = 100000 * n + 1000000;
    std::size_t tried = 0;
    while (out.points.size() < n) {
      if (++tried > max_candidates)
        throw InputError("thinning: intensity is zero (or nearly so) over the window; no points accepted");
      const Point p{ux(rng), uy(rng)};
      if (accept(p)) out.points.push_back(p);
    }
  }
  out.marks.assign(out.points.size(), mark);
  out.covariates.resize(static_cast<Eigen::Index>(out.points.size()), 0);
  return out;
}

PointPattern thin_poisson(const GridField& intensity, const Window& window, Rng& rng, CountMode mode, std::size_t n,
                          int mark) {
  double bound = 0.0;
  for (double v : intensity.values)
    if (std::isfinite(v)) bound = std::max(bound, v);
  return thin_poisson([&](Point p) {
    const double v = intensity.value_at(p);
    return std::isfinite(v) ? v : 0.0;
  }, bound, window, rng, mode, n, mark);
}

double distance_modulation(double d, double phi) {
  if (!(phi > 0.0)) throw InputError("phi must be positive");
  return std::exp(-d / phi);
}

StudyArea synthetic_study_area() {
  const Point s{5.0, 4.5};
  // Star-shaped about the source, so the ring is simple; the farthest vertex is at 5.3 km.
  const double radii[] = {4.2, 5.3, 4.6, 3.9, 4.4, 3.6, 4.8, 4.1, 3.3, 3.8, 4.5, 4.9};
  Ring ext;
  for (int k = 0; k < 12; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 12.0 + 0.2;
    ext.push_back({s.x + radii[k] * std::cos(a), s.y + radii[k] * std::sin(a)});
  }
  // Industrial site: regular octagon with apothem 0.05 km.
  Ring site;
  const double circ = 0.05 / std::cos(std::numbers::pi / 8.0);
  for (int k = 7; k >= 0; --k) {
    const double a = 2.0 * std::numbers::pi * k / 8.0 + std::numbers::pi / 8.0;
    site.push_back({s.x + circ * std::cos(a), s.y + circ * std::sin(a)});
  }
  return {Window(ext, {site}), s};
}

namespace {
constexpr Point kCentreA{3.6, 5.2};
constexpr Point kCentreB{6.9, 3.1};
}  // namespace

double synthetic_baseline(Point p) {
  const Point a = p - kCentreA, b = p - kCentreB;
  return 40.0 + 260.0 * std::exp(-dot(a, a) / (2.0 * 1.3 * 1.3)) + 170.0 * std::exp(-dot(b, b) / (2.0 * 0.9 * 0.9));
}

double synthetic_baseline_bound() { return 40.0 + 260.0 + 170.0; }

Study simulate_study(const Scenario& sc, std::optional<double> phi_filter, std::optional<std::size_t> n_filter,
                     unsigned threads) {
  if (sc.n_controls == 0) throw InputError("scenario: need at least one control");
  for (double phi : sc.phis)
    if (!(phi > 0.0)) throw InputError("scenario: phi must be positive");
  for (std::size_t n : sc.case_counts)
    if (n == 0) throw InputError("scenario: case counts must be positive");
  if (!(sc.bandwidth > 0.0)) throw InputError("scenario: bandwidth must be positive");

  Study study;
  Rng control_rng = make_stream(sc.seed, 0, 0.0, 1);
  if (sc.baseline)
    study.controls = thin_poisson(*sc.baseline, sc.window, control_rng, CountMode::fixed_n, sc.n_controls, 0);
  else
    study.controls = thin_poisson(synthetic_baseline, synthetic_baseline_bound(), sc.window, control_rng,
                                  CountMode::fixed_n, sc.n_controls, 0);
  const GridSpec grid = GridSpec::covering(sc.window, sc.grid_res);
  study.control_intensity = kernel_intensity(study.controls.points, sc.bandwidth, grid, sc.window, threads);

  struct Job {
    std::size_t n;
    double phi;
  };
  std::vector<Job> jobs;
  for (std::size_t n : sc.case_counts)
    for (double phi : sc.phis) {
      if (phi_filter && *phi_filter != phi) continue;
      if (n_filter && *n_filter != n) continue;
      jobs.push_back({n, phi});
    }
  if (jobs.empty()) throw InputError("scenario: the filters select no dataset");

  study.datasets.resize(jobs.size());
  const GridField& base = study.control_intensity;
  double bound = 0.0;
  for (double v : base.values) bound = std::max(bound, v);
  detail::parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto [n, phi] = jobs[j];
    Rng rng = make_stream(sc.seed, n, phi, 2);
    const PointPattern cases = thin_poisson([&](Point p) {
      return base.value_at(p) * distance_modulation(distance(p, sc.source), phi);
    }, bound, sc.window, rng, CountMode::fixed_n, n, 1);
    StudyDataset& d = study.datasets[j];
    d.n_cases = n;
    d.phi = phi;
    d.pattern = study.controls;
    d.pattern.points.insert(d.pattern.points.end(), cases.points.begin(), cases.points.end());
    d.pattern.marks.insert(d.pattern.marks.end(), cases.marks.begin(), cases.marks.end());
    d.pattern.covariates.resize(static_cast<Eigen::Index>(d.pattern.points.size()), 0);
  });
  return study;
}

}  // namespace mvpp
