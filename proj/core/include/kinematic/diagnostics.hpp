#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinematic/backtest.hpp"
#include "kinematic/labeling.hpp"

namespace kinematic {

struct ActionDistribution {
  std::array<std::size_t, kNumClasses> counts{};
  std::size_t total = 0;
  /// (Buy + Sell) / total.
  double action_rate = 0.0;
};

ActionDistribution action_distribution(std::span<const ActionLabel> predictions);

inline constexpr double kCollapseShare = 0.99;

struct EquilibriumReport {
  /// Portfolio never entered a position over the whole period (absorbing cash state).
  bool flagged = false;
  /// One class holds at least 99% of predictions.
  bool action_collapse = false;
  ActionLabel dominant = ActionLabel::kHold;
  double dominant_share = 0.0;
  std::size_t entries = 0;
  std::string explanation;
};

EquilibriumReport detect_liquidation_equilibrium(std::span<const ActionLabel> predictions, const BacktestResult& result);

/// counts[true][predicted].
using ConfusionMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;
ConfusionMatrix confusion_matrix(std::span<const ActionLabel> predictions, std::span<const ActionLabel> labels);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_probability = 0.0;
  double win_rate = 0.0;
  std::size_t count = 0;
};

struct CalibrationCurve {
  std::vector<CalibrationBin> bins;  // non-empty bins only, ascending
};

/// Equal-width bins over [0, 1]; p = 1 falls in the top bin. Per-bin sums are
/// taken in sorted order so the curve does not depend on sample order.
CalibrationCurve calibration_curve(std::span<const double> buy_probs, const std::vector<bool>& wins,
                                   std::size_t bins = 10);

struct SweepPoint {
  double value = 0.0;
  double action_rate = 0.0;
  std::optional<double> sharpe;
  double total_return = 0.0;
};

struct SweepResult {
  std::string axis;  // "tau" or "bps"
  std::vector<SweepPoint> points;
};

void require_increasing(std::span<const double> values, const char* axis);

/// Label-level threshold sweep over fixed next-interval returns.
SweepResult tau_sweep_labels(std::span<const double> returns, std::span<const double> taus);

/// Re-runs the backtest of a fixed action stream at each cost level.
SweepResult cost_sweep(std::span<const ActionLabel> actions, std::span<const double> closes,
                       std::span<const double> bps_values, const TaxSchedule& tax, double initial_capital,
                       double risk_free = kDefaultRiskFree);

void write_distribution_csv(std::ostream& out, const ActionDistribution& dist);
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& matrix);
void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve);
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
void write_equilibrium_csv_header(std::ostream& out);
void write_equilibrium_csv_row(std::ostream& out, const std::string& label, const EquilibriumReport& report);

}  // namespace kinematic
