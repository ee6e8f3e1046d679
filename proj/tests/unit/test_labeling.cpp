#include <random>
#include <sstream>

#include "kinematic/enrichment.hpp"
#include "kinematic/labeling.hpp"
#include "test_support.hpp"

using namespace kinematic;

namespace {

LogHistory trend_history(std::size_t n, double drift, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, noise);
  LogHistory h;
  for (std::size_t i = 0; i < n; ++i) {
    h.time.push_back(static_cast<double>(i));
    h.log_close.push_back(4.6 + drift * static_cast<double>(i) + g(rng));
    h.log_volume.push_back(13.0 + g(rng));
  }
  return h;
}

std::array<std::size_t, 3> counts(const std::vector<LabeledWindow>& data) {
  std::array<std::size_t, 3> c{};
  for (const auto& d : data) ++c[index_of(d.label)];
  return c;
}

}  // namespace

TEST_CASE("momentum label cases") {
  CHECK(momentum_label(0.02, 0.01) == ActionLabel::kBuy);
  CHECK(momentum_label(-0.02, 0.01) == ActionLabel::kSell);
  CHECK(momentum_label(0.01, 0.01) == ActionLabel::kHold);
  CHECK(momentum_label(-0.01, 0.01) == ActionLabel::kHold);
  CHECK(momentum_label(0.0, 0.0) == ActionLabel::kHold);
  CHECK(momentum_label(1e-300, 0.0) == ActionLabel::kBuy);
}

TEST_CASE("label codes and weights") {
  CHECK(index_of(ActionLabel::kBuy) == 0);
  CHECK(index_of(ActionLabel::kSell) == 1);
  CHECK(index_of(ActionLabel::kHold) == 2);
  CHECK(parse_action("sell") == ActionLabel::kSell);
  CHECK(parse_action(to_string(ActionLabel::kHold)) == ActionLabel::kHold);
  CHECK_ERROR_CODE(parse_action("short"), ErrorCode::kParse);
  const LossWeights w;
  CHECK(w.w == std::array<double, 3>{2.0, 10.0, 1.0});
  CHECK_ERROR_CODE((LossWeights{{1.0, 0.0, 1.0}}.validate()), ErrorCode::kConfig);
}

TEST_CASE("labels match an independent return scan") {
  const auto h = trend_history(100, 0.004, 0.01, 1);
  const TokenizerConfig cfg{16, TokenizerKind::kSpline, NoiseRatio{}};
  const auto data = label_dataset(h, 0.01, cfg, 16, 98);
  REQUIRE(data.size() == 83);

  auto end_position = [&](std::size_t t) {
    std::vector<double> knots, values;
    for (std::size_t i = t - 16; i <= t; ++i) {
      knots.push_back(h.time[i]);
      values.push_back(h.log_close[i]);
    }
    const auto fit = fit_snapshot_spline({TimeGrid(knots), values}, NoiseRatio{});
    return fit.spline.eval(knots.back());
  };
  std::array<std::size_t, 3> expected{};
  for (std::size_t t = 16; t <= 98; ++t) {
    const double r = end_position(t + 1) - end_position(t);
    const std::size_t cls = r > 0.01 ? 0 : (r < -0.01 ? 1 : 2);
    ++expected[cls];
    CHECK(data[t - 16].r == r);
    CHECK(data[t - 16].index == t);
  }
  CHECK(counts(data) == expected);
}

TEST_CASE("non-hold fraction is non-increasing in tau") {
  const auto h = trend_history(300, 0.0, 0.015, 2);
  const TokenizerConfig cfg{16, TokenizerKind::kSpline, NoiseRatio{}};
  const auto r = next_interval_returns(h, 16, 298, 16, NoiseRatio{});
  double previous = 2.0;
  for (double tau : {0.0025, 0.005, 0.01, 0.02}) {
    std::size_t active = 0;
    for (double x : r) active += momentum_label(x, tau) != ActionLabel::kHold;
    const double frac = static_cast<double>(active) / static_cast<double>(r.size());
    CHECK(frac <= previous);
    previous = frac;
  }
  const auto zero_tau = label_dataset(h, 0.0, cfg, 16, 100);
  CHECK(counts(zero_tau)[2] == 0);
}

TEST_CASE("negating the series swaps buy and sell") {
  auto h = trend_history(120, 0.001, 0.02, 3);
  const TokenizerConfig cfg{16, TokenizerKind::kSpline, NoiseRatio{}};
  const auto a = counts(label_dataset(h, 0.01, cfg, 16, 118));
  for (auto& x : h.log_close) x = -x;
  const auto b = counts(label_dataset(h, 0.01, cfg, 16, 118));
  CHECK(a[0] == b[1]);
  CHECK(a[1] == b[0]);
  CHECK(a[2] == b[2]);
}

TEST_CASE("look-ahead observation is only used for the label") {
  const auto h = trend_history(60, 0.002, 0.01, 4);
  const TokenizerConfig cfg{16, TokenizerKind::kSpline, NoiseRatio{}};
  const std::size_t j = 40;
  const auto full = label_dataset(h, 0.01, cfg, j, j);
  auto cut = h;
  cut.time.resize(j + 1);
  cut.log_close.resize(j + 1);
  cut.log_volume.resize(j + 1);
  CHECK_ERROR_CODE(label_dataset(cut, 0.01, cfg, j, j), ErrorCode::kInsufficientData);
  CHECK(tokenize_window(cut, j, cfg) == full[0].window);
  CHECK_ERROR_CODE(label_dataset(h, 0.01, cfg, 10, 20), ErrorCode::kInsufficientData);
  CHECK_ERROR_CODE(label_dataset(h, -0.1, cfg, 16, 20), ErrorCode::kConfig);
}

TEST_CASE("label CSV") {
  const auto h = trend_history(30, 0.01, 0.0, 5);
  const auto data = label_dataset(h, 0.005, {16, TokenizerKind::kSpline, NoiseRatio{}}, 16, 17);
  std::ostringstream out;
  write_label_csv(out, data);
  CHECK(out.str().rfind("window,index,label,r\n0,16,0,", 0) == 0);
}
