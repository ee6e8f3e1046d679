#include <random>

#include "kinematic/enrichment.hpp"
#include "kinematic/spline.hpp"
#include "test_support.hpp"

using namespace kinematic;

TEST_CASE("time grid validation") {
  CHECK_ERROR_CODE(TimeGrid({1.0}), ErrorCode::kInsufficientData);
  CHECK_ERROR_CODE(TimeGrid(std::vector<double>{}), ErrorCode::kInsufficientData);
  CHECK_ERROR_CODE(TimeGrid({0.0, 1.0, 1.0}), ErrorCode::kGridOrder);
  CHECK_ERROR_CODE(TimeGrid({0.0, 2.0, 1.0}), ErrorCode::kGridOrder);
  CHECK_ERROR_CODE(TimeGrid({0.0, std::nan("")}), ErrorCode::kData);
  const auto g = TimeGrid::uniform(4, 10.0);
  CHECK(g.size() == 4);
  CHECK(g.front() == 10.0);
  CHECK(g.back() == 13.0);
  CHECK(g.width(1) == 1.0);
}

TEST_CASE("locate resolves interior ties to the right interval") {
  TimeGrid g({0.0, 1.0, 2.5, 4.0});
  CHECK(g.locate(0.0) == 0);
  CHECK(g.locate(0.5) == 0);
  CHECK(g.locate(1.0) == 1);
  CHECK(g.locate(2.5) == 2);
  CHECK(g.locate(4.0) == 2);
  CHECK_ERROR_CODE(g.locate(-0.1), ErrorCode::kOutOfRange);
  CHECK_ERROR_CODE(g.locate(4.0001), ErrorCode::kOutOfRange);
}

TEST_CASE("noise ratio") {
  const auto n = NoiseRatio::from_sigmas(0.3, 0.1);
  CHECK(std::abs(n.alpha * n.alpha - 9.0) < 1e-12 * 9.0);
  CHECK_ERROR_CODE(NoiseRatio{0.0}.validate(), ErrorCode::kConfig);
  CHECK_ERROR_CODE(NoiseRatio{-1.0}.validate(), ErrorCode::kConfig);
  CHECK(NoiseRatio{}.alpha == 5.0);
}

TEST_CASE("cubic piece derivative at the knot is c1") {
  CubicSpline s(TimeGrid({0.0, 1.0}), {{1.0, 2.0, 4.0, 6.0}});
  CHECK(s.eval(0.0, 1) == 2.0);
  CHECK(s.eval(0.0, 0) == 1.0);
  CHECK(s.eval(0.0, 2) == 4.0);
  CHECK(s.eval(0.0, 3) == 6.0);
  // p(1) = 1 + 2 + 4/2 + 6/6
  CHECK(s.eval(1.0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(s.eval(0.5, 4) == 0.0);
}

TEST_CASE("orders above the degree give exactly zero") {
  QuarticSpline q(TimeGrid({0.0, 1.0, 2.0}), {{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}});
  for (double t : {0.0, 0.3, 1.0, 1.7, 2.0}) {
    CHECK(q.eval(t, 5) == 0.0);
    CHECK(q.eval(t, 9) == 0.0);
  }
  CHECK(q.eval(1.0, 0) == 6.0);  // right interval at the tie
  CHECK_ERROR_CODE(q.eval(2.5, 0), ErrorCode::kOutOfRange);
}

TEST_CASE("piece integral matches a Simpson oracle") {
  const std::array<double, 5> c{0.3, -1.2, 0.7, 2.0, -0.4};
  const double h = 1.7;
  // Simpson with many panels is exact to rounding for a quartic only asymptotically; use 2000 panels.
  const int n = 2000;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = h * i / n;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * eval_piece(c, s, 0);
  }
  sum *= h / (3.0 * n);
  CHECK(integrate_piece(c, h) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("fitted spline derivatives match central differences") {
  std::mt19937_64 rng(11);
  const auto knots = random_knots(rng, 12, false);
  const auto values = random_values(rng, 12);
  const auto fit = fit_snapshot_spline({TimeGrid(knots), values}, NoiseRatio{5.0});
  std::vector<double> vol_values = random_values(rng, 11);
  const auto vfit = fit_aggregate_spline({TimeGrid(knots), vol_values}, NoiseRatio{5.0});
  std::uniform_real_distribution<double> pick(knots.front() + 1e-3, knots.back() - 1e-3);
  const double h = 1e-5;
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    const double t = pick(rng);
    // Keep the stencil inside one piece.
    const auto k = fit.spline.grid().locate(t);
    if (t - h < knots[k] || t + h > knots[k + 1]) continue;
    for (unsigned d = 0; d < 3; ++d) {
      const double fd = (fit.spline.eval(t + h, d) - fit.spline.eval(t - h, d)) / (2 * h);
      CHECK(rel_diff(fd, fit.spline.eval(t, d + 1)) < 1e-4);
      const double vfd = (vfit.spline.eval(t + h, d) - vfit.spline.eval(t - h, d)) / (2 * h);
      CHECK(rel_diff(vfd, vfit.spline.eval(t, d + 1)) < 1e-4);
    }
    ++checked;
  }
  CHECK(checked > 90);
}
