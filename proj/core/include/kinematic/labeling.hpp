#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "kinematic/tokenizer.hpp"

namespace kinematic {

enum class ActionLabel : int { kBuy = 0, kSell = 1, kHold = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<ActionLabel, kNumClasses> kAllActions{ActionLabel::kBuy, ActionLabel::kSell,
                                                                 ActionLabel::kHold};

inline std::size_t index_of(ActionLabel a) { return static_cast<std::size_t>(a); }
std::string_view to_string(ActionLabel label);
ActionLabel parse_action(std::string_view text);

/// Per-class loss weights indexed by ActionLabel code.
struct LossWeights {
  std::array<double, kNumClasses> w{2.0, 10.0, 1.0};
  void validate() const;
};

struct LabeledWindow {
  TokenWindow window;
  ActionLabel label = ActionLabel::kHold;
  /// Spline log-return over the interval following the window.
  double r = 0.0;
  /// History index of the window's last knot.
  std::size_t index = 0;
};

/// Buy if r > tau, Sell if r < -tau, otherwise Hold.
ActionLabel momentum_label(double r, double tau);

/// Position of the price spline fitted on knots [t - T, t], evaluated at t.
double window_end_position(const LogHistory& history, std::size_t t, std::size_t context, const NoiseRatio& noise);

/// r_t = x_{W(t+1)}(t+1) - x_{W(t)}(t) for t in [first, last]; needs last + 1 < history size.
std::vector<double> next_interval_returns(const LogHistory& history, std::size_t first, std::size_t last,
                                          std::size_t context, const NoiseRatio& noise);

/// Anchored (unnormalized) input windows for t in [first, last] with momentum labels.
/// The knot at t + 1 only enters the label.
std::vector<LabeledWindow> label_dataset(const LogHistory& history, double tau, const TokenizerConfig& config,
                                         std::size_t first, std::size_t last);

void write_label_csv(std::ostream& out, std::span<const LabeledWindow> data);

}  // namespace kinematic
