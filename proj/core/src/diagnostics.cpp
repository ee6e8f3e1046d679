#include "kinematic/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "kinematic/error.hpp"

namespace kinematic {

ActionDistribution action_distribution(std::span<const ActionLabel> predictions) {
  if (predictions.empty()) fail(ErrorCode::kEmptyInput, "action distribution of an empty prediction stream");
  ActionDistribution d;
  for (ActionLabel a : predictions) ++d.counts[index_of(a)];
  d.total = predictions.size();
  d.action_rate = static_cast<double>(d.counts[index_of(ActionLabel::kBuy)] + d.counts[index_of(ActionLabel::kSell)]) /
                  static_cast<double>(d.total);
  return d;
}

EquilibriumReport detect_liquidation_equilibrium(std::span<const ActionLabel> predictions, const BacktestResult& result) {
  if (predictions.size() != result.days()) {
    fail(ErrorCode::kShape, fmt::format("{} predictions for a {}-day backtest", predictions.size(), result.days()));
  }
  EquilibriumReport r;
  r.entries = result.entries();
  if (!predictions.empty()) {
    const auto dist = action_distribution(predictions);
    const auto top = std::max_element(dist.counts.begin(), dist.counts.end());
    r.dominant = static_cast<ActionLabel>(top - dist.counts.begin());
    r.dominant_share = static_cast<double>(*top) / static_cast<double>(dist.total);
    r.action_collapse = r.dominant_share >= kCollapseShare;
  }
  r.flagged = r.entries == 0;
  if (r.flagged) {
    r.explanation = fmt::format("absorbing cash state: no entry executed in {} days; dominant action {} at {:.1f}%{}",
                                predictions.size(), to_string(r.dominant), 100.0 * r.dominant_share,
                                r.action_collapse ? " (action-space collapse)" : "");
  } else {
    r.explanation = fmt::format("active: {} entries; dominant action {} at {:.1f}%{}", r.entries, to_string(r.dominant),
                                100.0 * r.dominant_share, r.action_collapse ? " (action-space collapse)" : "");
  }
  return r;
}

ConfusionMatrix confusion_matrix(std::span<const ActionLabel> predictions, std::span<const ActionLabel> labels) {
  if (predictions.size() != labels.size()) {
    fail(ErrorCode::kShape, fmt::format("{} predictions for {} labels", predictions.size(), labels.size()));
  }
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < labels.size(); ++i) ++m[index_of(labels[i])][index_of(predictions[i])];
  return m;
}

CalibrationCurve calibration_curve(std::span<const double> buy_probs, const std::vector<bool>& wins, std::size_t bins) {
  if (buy_probs.size() != wins.size()) fail(ErrorCode::kShape, "probabilities and outcomes differ in length");
  if (bins < 2) fail(ErrorCode::kConfig, "calibration needs at least 2 bins");
  std::vector<std::vector<double>> probs(bins);
  std::vector<std::size_t> win_counts(bins, 0);
  for (std::size_t i = 0; i < buy_probs.size(); ++i) {
    const double p = buy_probs[i];
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kData, fmt::format("probability {} at index {} outside [0, 1]", p, i));
    const auto b = std::min(bins - 1, static_cast<std::size_t>(p * static_cast<double>(bins)));
    probs[b].push_back(p);
    if (wins[i]) ++win_counts[b];
  }
  CalibrationCurve curve;
  for (std::size_t b = 0; b < bins; ++b) {
    if (probs[b].empty()) continue;
    std::sort(probs[b].begin(), probs[b].end());
    double sum = 0.0;
    for (double p : probs[b]) sum += p;
    const auto n = static_cast<double>(probs[b].size());
    curve.bins.push_back({static_cast<double>(b) / static_cast<double>(bins),
                          static_cast<double>(b + 1) / static_cast<double>(bins), sum / n,
                          static_cast<double>(win_counts[b]) / n, probs[b].size()});
  }
  return curve;
}

void require_increasing(std::span<const double> values, const char* axis) {
  if (values.empty()) fail(ErrorCode::kConfig, fmt::format("{} sweep has no points", axis));
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1])) fail(ErrorCode::kConfig, fmt::format("{} sweep values must be strictly increasing", axis));
  }
}

SweepResult tau_sweep_labels(std::span<const double> returns, std::span<const double> taus) {
  require_increasing(taus, "tau");
  if (returns.empty()) fail(ErrorCode::kEmptyInput, "tau sweep over an empty return series");
  SweepResult s{"tau", {}};
  for (double tau : taus) {
    std::vector<ActionLabel> labels;
    labels.reserve(returns.size());
    for (double r : returns) labels.push_back(momentum_label(r, tau));
    s.points.push_back({tau, action_distribution(labels).action_rate, std::nullopt, 0.0});
  }
  return s;
}

SweepResult cost_sweep(std::span<const ActionLabel> actions, std::span<const double> closes,
                       std::span<const double> bps_values, const TaxSchedule& tax, double initial_capital,
                       double risk_free) {
  require_increasing(bps_values, "bps");
  SweepResult s{"bps", {}};
  for (double bps : bps_values) {
    const auto result = run_backtest(actions, closes, CostModel{bps}, tax, initial_capital, risk_free);
    s.points.push_back({bps, result.metrics.action_rate, result.metrics.sharpe, result.metrics.total_return});
  }
  return s;
}

void write_distribution_csv(std::ostream& out, const ActionDistribution& dist) {
  out << "class,label,count\n";
  for (ActionLabel a : kAllActions) out << fmt::format("{},{},{}\n", index_of(a), to_string(a), dist.counts[index_of(a)]);
  out << fmt::format("total,,{}\naction_rate,,{:.6f}\n", dist.total, dist.action_rate);
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m) {
  out << "true\\predicted,buy,sell,hold\n";
  for (ActionLabel a : kAllActions) {
    const auto& row = m[index_of(a)];
    out << fmt::format("{},{},{},{}\n", to_string(a), row[0], row[1], row[2]);
  }
}

void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve) {
  out << "bin_lower,bin_upper,mean_probability,win_rate,count\n";
  for (const auto& b : curve.bins) {
    out << fmt::format("{:.4f},{:.4f},{:.6f},{:.6f},{}\n", b.lower, b.upper, b.mean_probability, b.win_rate, b.count);
  }
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << fmt::format("{},action_rate,sharpe,total_return\n", sweep.axis);
  for (const auto& p : sweep.points) {
    out << fmt::format("{:.6f},{:.6f},{},{:.6f}\n", p.value, p.action_rate,
                       p.sharpe ? fmt::format("{:.6f}", *p.sharpe) : std::string("NA"), p.total_return);
  }
}

void write_equilibrium_csv_header(std::ostream& out) {
  out << "label,flagged,action_collapse,dominant,dominant_share,entries,explanation\n";
}

void write_equilibrium_csv_row(std::ostream& out, const std::string& label, const EquilibriumReport& r) {
  out << fmt::format("{},{},{},{},{:.6f},{},\"{}\"\n", label, r.flagged ? 1 : 0, r.action_collapse ? 1 : 0,
                     to_string(r.dominant), r.dominant_share, r.entries, r.explanation);
}

}  // namespace kinematic
