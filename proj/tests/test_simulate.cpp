#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvpp/error.hpp"
#include "mvpp/simulate.hpp"
#include "mvpp/smoothing.hpp"

using namespace mvpp;

TEST_CASE("thinning counts and support") {
  const Window sq = Window::rectangle(0, 0, 1, 1);
  double total = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng = make_stream(s);
    total += static_cast<double>(thin_poisson([](Point) { return 100.0; }, 100.0, sq, rng, CountMode::rate).size());
  }
  CHECK(std::abs(total / 200.0 - 100.0) <= 2.0);

  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng = make_stream(s);
    const auto p = thin_poisson([](Point q) { return q.x < 0.5 ? 0.0 : 80.0; }, 80.0, sq, rng, CountMode::rate);
    for (const auto& q : p.points) CHECK(q.x >= 0.5);
  }
  Rng rng = make_stream(3);
  CHECK(thin_poisson([](Point) { return 5.0; }, 5.0, sq, rng, CountMode::fixed_n, 500).size() == 500);
  CHECK_THROWS_AS(thin_poisson([](Point) { return 0.0; }, 0.0, sq, rng, CountMode::fixed_n, 10), InputError);
  CHECK_THROWS_AS(thin_poisson([](Point) { return 0.0; }, 1.0, sq, rng, CountMode::fixed_n, 10), InputError);
  CHECK_THROWS_AS(thin_poisson([](Point) { return 3.0; }, 1.0, sq, rng, CountMode::fixed_n, 10), InputError);
}

TEST_CASE("thinning matches the integrated intensity per cell") {
  const Window sq = Window::rectangle(0, 0, 1, 1);
  auto lambda = [](Point p) { return 50.0 * (1.0 + p.x) * (1.0 + 2.0 * p.y); };
  const int reps = 300;
  std::vector<double> counts(25, 0.0);
  for (int s = 0; s < reps; ++s) {
    Rng rng = make_stream(1000 + static_cast<std::uint64_t>(s));
    for (const auto& p : thin_poisson(lambda, 300.0, sq, rng, CountMode::rate).points)
      counts[static_cast<std::size_t>(std::min(4, static_cast<int>(p.y * 5)) * 5 + std::min(4, static_cast<int>(p.x * 5)))] += 1.0;
  }
  int bad = 0;
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i) {
      // Exact cell integral of the separable intensity.
      const double x0 = i / 5.0, x1 = (i + 1) / 5.0, y0 = j / 5.0, y1 = (j + 1) / 5.0;
      const double ix = (x1 - x0) + 0.5 * (x1 * x1 - x0 * x0);
      const double iy = (y1 - y0) + (y1 * y1 - y0 * y0);
      const double expected = 50.0 * ix * iy * reps;
      if (std::abs(counts[static_cast<std::size_t>(j * 5 + i)] - expected) > 3.0 * std::sqrt(expected)) ++bad;
    }
  CHECK(bad == 0);
}

TEST_CASE("modulation") {
  CHECK(distance_modulation(0.0, 3.0) == 1.0);
  CHECK(distance_modulation(2.0, 2.0) == doctest::Approx(std::exp(-1.0)));
  for (double phi : {0.5, 1.0, 3.0, 6.0, 1e6}) {
    double prev = 1.0;
    for (double d = 0.0; d <= 6.0; d += 0.1) {
      const double m = distance_modulation(d, phi);
      CHECK(m <= 1.0);
      CHECK(m <= prev);
      prev = m;
    }
  }
  CHECK(distance_modulation(5.3, 1e6) >= 0.999);
  CHECK_THROWS_AS(distance_modulation(1.0, 0.0), InputError);
}

TEST_CASE("synthetic study area") {
  const StudyArea a = synthetic_study_area();
  double lo = 1e9, hi = 0.0;
  for (const auto& v : a.window.exterior()) hi = std::max(hi, distance(v, a.source));
  CHECK(hi == doctest::Approx(5.3));
  CHECK_FALSE(a.window.contains(a.source));
  Scenario sc;
  sc.case_counts = {300};
  sc.phis = {1.0};
  sc.grid_res = 60;
  const Study st = simulate_study(sc);
  for (const auto& p : st.datasets[0].pattern.points) {
    const double d = distance(p, a.source);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  CHECK(lo >= 0.05);
  CHECK(hi <= 5.3 + 1e-9);
}

TEST_CASE("study design and determinism") {
  Scenario sc;
  sc.n_controls = 600;
  sc.grid_res = 50;
  sc.case_counts = {50, 100};
  const Study a = simulate_study(sc);
  CHECK(a.datasets.size() == 6);
  for (const auto& d : a.datasets) {
    CHECK(d.pattern.count(0) == 600);
    CHECK(d.pattern.count(1) == d.n_cases);
  }
  const Study b = simulate_study(sc, std::nullopt, std::nullopt, 3);
  for (std::size_t i = 0; i < a.datasets.size(); ++i) CHECK(a.datasets[i].pattern.points == b.datasets[i].pattern.points);
  // Filtering does not change a dataset's stream.
  const Study f = simulate_study(sc, 3.0, 100);
  REQUIRE(f.datasets.size() == 1);
  for (const auto& d : a.datasets)
    if (d.phi == 3.0 && d.n_cases == 100) CHECK(d.pattern.points == f.datasets[0].pattern.points);
  sc.seed = 2;
  const Study c = simulate_study(sc);
  CHECK(c.datasets[0].pattern.points != a.datasets[0].pattern.points);
  CHECK_THROWS_AS(simulate_study(sc, 2.0), InputError);
}

TEST_CASE("distance decay concentrates cases near the source") {
  int wins = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Scenario sc;
    sc.seed = 100 + s;
    sc.case_counts = {2000};
    sc.phis = {1.0, 6.0};
    sc.grid_res = 50;
    const Study st = simulate_study(sc);
    double mean[2] = {0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
      const auto& d = st.datasets[static_cast<std::size_t>(k)];
      const auto cases = d.pattern.points_of(1);
      for (const auto& p : cases) mean[k] += distance(p, sc.source) / static_cast<double>(cases.size());
    }
    if (mean[0] < mean[1]) ++wins;
  }
  CHECK(wins == 20);
}

TEST_CASE("very slow decay is indistinguishable from the baseline") {
  Scenario sc;
  sc.case_counts = {300};
  sc.phis = {1e6};
  sc.grid_res = 50;
  const Study st = simulate_study(sc);
  const auto& d = st.datasets[0];
  const GridField rr = risk_ratio(d.pattern.points_of(1), d.pattern.points_of(0), 0.3, GridSpec::covering(sc.window, 50),
                                  sc.window);
  std::vector<double> v;
  for (std::size_t k = 0; k < rr.values.size(); ++k)
    if (rr.mask[k] && std::isfinite(rr.values[k])) v.push_back(rr.values[k]);
  std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
  CHECK(v[v.size() / 2] == doctest::Approx(300.0 / 3000.0).epsilon(0.2));
}
