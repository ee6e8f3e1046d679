#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinematic/enrichment.hpp"
#include "kinematic/spline.hpp"

namespace kinematic {

inline constexpr std::size_t kPriceChannels = 4;
inline constexpr std::size_t kVolumeChannels = 5;
inline constexpr std::size_t kTokenChannels = kPriceChannels + kVolumeChannels;
inline constexpr std::size_t kPositionChannel = 0;
inline constexpr std::size_t kVolumeLevelChannel = kPriceChannels;
/// Channels carrying derivatives / shape parameters: c1..c3 and v1..v4.
inline constexpr std::array<std::size_t, 7> kDerivativeChannels{1, 2, 3, 5, 6, 7, 8};

/// Price coefficients [c0..c3] followed by volume coefficients [v0..v4].
struct JointToken {
  std::array<double, kTokenChannels> channels{};

  double price(std::size_t j) const { return channels[j]; }
  double volume(std::size_t j) const { return channels[kPriceChannels + j]; }
  double& operator[](std::size_t i) { return channels[i]; }
  double operator[](std::size_t i) const { return channels[i]; }

  friend bool operator==(const JointToken&, const JointToken&) = default;
};

struct TokenWindow {
  std::vector<JointToken> tokens;
  /// Time of the first knot (start of token 0).
  double start_time = 0.0;
  /// Time of the last knot used to build the window.
  double end_time = 0.0;

  friend bool operator==(const TokenWindow&, const TokenWindow&) = default;
};

struct NormStats {
  std::array<double, 7> mu{};
  std::array<double, 7> sigma{};
  /// Latest knot time of any window that contributed.
  double data_end_time = 0.0;

  void validate() const;
};

enum class TokenizerKind { kSpline, kFiniteDifference, kRawMasked };

std::string_view to_string(TokenizerKind kind);
TokenizerKind parse_tokenizer_kind(std::string_view text);

/// Aligned daily log series. volume[k] is the aggregate over (time[k-1], time[k]];
/// volume[0] is unused by the tokenizers.
struct LogHistory {
  std::vector<double> time;
  std::vector<double> log_close;
  std::vector<double> log_volume;

  std::size_t size() const { return time.size(); }
  void validate() const;
};

std::vector<JointToken> extract_joint_tokens(const CubicSpline& price, const QuarticSpline& volume);

TokenWindow anchor_window(TokenWindow window);

/// Population mean/std of the 7 derivative channels over every token.
/// Reduction is order independent (values are sorted before summation).
/// Channels that `kind` masks to zero get mu = 0, sigma = 1.
NormStats compute_global_stats(std::span<const TokenWindow> training_windows,
                               TokenizerKind kind = TokenizerKind::kSpline);

/// Same, additionally asserting that no window reaches past `training_end`.
NormStats compute_global_stats(std::span<const TokenWindow> training_windows, TokenizerKind kind,
                               double training_end);

TokenWindow zscore_normalize(TokenWindow window, const NormStats& stats);
TokenWindow zscore_denormalize(TokenWindow window, const NormStats& stats);

/// n-th backward difference sum_i (-1)^(n-i) C(n,i) y[k-n+i]; 0 when k < n.
double backward_difference(std::span<const double> y, std::size_t k, unsigned order);

/// Discrete ablation: token k holds Delta^n of log price at knot k+1 (n = 0..3) and
/// Delta^n of log volume of interval k (n = 0..4), zero padded where history is short.
std::vector<JointToken> finite_difference_tokens(const SnapshotSeries& prices, const AggregateSeries& volumes);

/// Physics-ablated tokens: level and first difference only, higher channels zero.
std::vector<JointToken> masked_raw_tokens(const SnapshotSeries& prices, const AggregateSeries& volumes);

struct TokenizerConfig {
  std::size_t context = 16;
  TokenizerKind kind = TokenizerKind::kSpline;
  NoiseRatio noise{};
};

/// Anchored (not normalized) window built only from knots [t - T, t].
TokenWindow tokenize_window(const LogHistory& history, std::size_t t, const TokenizerConfig& config);

/// Anchored and z-score normalized window for inference at index t.
TokenWindow rolling_tokenize(const LogHistory& history, std::size_t t, const TokenizerConfig& config,
                             const NormStats& stats);

/// One row per token: window id, window end, token time, 9 channels (17 significant
/// digits, so values round-trip exactly). Token times assume a unit-spaced daily grid.
void write_token_csv(std::ostream& out, std::span<const TokenWindow> windows);
std::vector<TokenWindow> read_token_csv(std::istream& in);

}  // namespace kinematic
