#include "kinematic/labeling.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "kinematic/error.hpp"

namespace kinematic {

std::string_view to_string(ActionLabel label) {
  switch (label) {
    case ActionLabel::kBuy: return "buy";
    case ActionLabel::kSell: return "sell";
    case ActionLabel::kHold: return "hold";
  }
  return "hold";
}

ActionLabel parse_action(std::string_view text) {
  if (text == "buy" || text == "0") return ActionLabel::kBuy;
  if (text == "sell" || text == "1") return ActionLabel::kSell;
  if (text == "hold" || text == "2") return ActionLabel::kHold;
  fail(ErrorCode::kParse, fmt::format("unknown action '{}'", text));
}

void LossWeights::validate() const {
  for (double v : w) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::kConfig, "loss weights must be positive");
  }
}

ActionLabel momentum_label(double r, double tau) {
  if (r > tau) return ActionLabel::kBuy;
  if (r < -tau) return ActionLabel::kSell;
  return ActionLabel::kHold;
}

double window_end_position(const LogHistory& history, std::size_t t, std::size_t context, const NoiseRatio& noise) {
  history.validate();
  if (t >= history.size() || t < context) {
    fail(ErrorCode::kInsufficientData, fmt::format("index {} needs {} prior observations", t, context));
  }
  const auto first = static_cast<std::ptrdiff_t>(t - context);
  const auto end = static_cast<std::ptrdiff_t>(t + 1);
  SnapshotSeries prices{TimeGrid(std::vector<double>(history.time.begin() + first, history.time.begin() + end)),
                        std::vector<double>(history.log_close.begin() + first, history.log_close.begin() + end)};
  const auto fit = fit_snapshot_spline(prices, noise);
  return fit.spline.eval(prices.grid.back(), 0);
}

std::vector<double> next_interval_returns(const LogHistory& history, std::size_t first, std::size_t last,
                                          std::size_t context, const NoiseRatio& noise) {
  if (first > last) fail(ErrorCode::kEmptyInput, "empty label range");
  if (last + 1 >= history.size()) {
    fail(ErrorCode::kInsufficientData, fmt::format("label at index {} needs the observation at {}", last, last + 1));
  }
  std::vector<double> ends(last - first + 2);
  for (std::size_t i = 0; i < ends.size(); ++i) ends[i] = window_end_position(history, first + i, context, noise);
  std::vector<double> r(ends.size() - 1);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = ends[i + 1] - ends[i];
  return r;
}

std::vector<LabeledWindow> label_dataset(const LogHistory& history, double tau, const TokenizerConfig& config,
                                         std::size_t first, std::size_t last) {
  if (!(tau >= 0.0)) fail(ErrorCode::kConfig, "tau must be nonnegative");
  const auto returns = next_interval_returns(history, first, last, config.context, config.noise);
  std::vector<LabeledWindow> out;
  out.reserve(returns.size());
  for (std::size_t i = 0; i < returns.size(); ++i) {
    const std::size_t t = first + i;
    out.push_back({tokenize_window(history, t, config), momentum_label(returns[i], tau), returns[i], t});
  }
  return out;
}

void write_label_csv(std::ostream& out, std::span<const LabeledWindow> data) {
  out << "window,index,label,r\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << fmt::format("{},{},{},{:.17g}\n", i, data[i].index, index_of(data[i].label), data[i].r);
  }
}

}  // namespace kinematic
