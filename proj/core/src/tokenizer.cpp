#include "kinematic/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "kinematic/error.hpp"

namespace kinematic {
namespace {

constexpr std::array<bool, kTokenChannels> kRawMaskedLive{true, true, false, false, true, true, false, false, false};

double binomial(unsigned n, unsigned k) {
  double r = 1.0;
  for (unsigned i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

void check_aligned(const SnapshotSeries& prices, const AggregateSeries& volumes) {
  if (prices.values.size() != prices.grid.size() || volumes.values.size() + 1 != prices.values.size() ||
      volumes.grid != prices.grid) {
    fail(ErrorCode::kShape, "price and volume series are not aligned (need N+1 prices and N volumes on one grid)");
  }
}

}  // namespace

std::string_view to_string(TokenizerKind kind) {
  switch (kind) {
    case TokenizerKind::kSpline: return "spline";
    case TokenizerKind::kFiniteDifference: return "fd";
    case TokenizerKind::kRawMasked: return "raw";
  }
  return "spline";
}

TokenizerKind parse_tokenizer_kind(std::string_view text) {
  if (text == "spline") return TokenizerKind::kSpline;
  if (text == "fd") return TokenizerKind::kFiniteDifference;
  if (text == "raw") return TokenizerKind::kRawMasked;
  fail(ErrorCode::kConfig, fmt::format("unknown tokenizer kind '{}' (expected spline, fd or raw)", text));
}

void NormStats::validate() const {
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]) || !std::isfinite(mu[i])) {
      fail(ErrorCode::kDegenerateStats, fmt::format("invalid normalization stats in channel {}", kDerivativeChannels[i]));
    }
  }
}

void LogHistory::validate() const {
  if (log_close.size() != time.size() || log_volume.size() != time.size()) {
    fail(ErrorCode::kShape, "log history columns have different lengths");
  }
}

std::vector<JointToken> extract_joint_tokens(const CubicSpline& price, const QuarticSpline& volume) {
  if (price.grid() != volume.grid()) fail(ErrorCode::kShape, "price and volume splines use different grids");
  std::vector<JointToken> tokens(price.grid().intervals());
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const auto& p = price.piece(k);
    const auto& v = volume.piece(k);
    std::copy(p.begin(), p.end(), tokens[k].channels.begin());
    std::copy(v.begin(), v.end(), tokens[k].channels.begin() + kPriceChannels);
  }
  return tokens;
}

TokenWindow anchor_window(TokenWindow window) {
  if (window.tokens.empty()) fail(ErrorCode::kEmptyInput, "cannot anchor an empty window");
  const double price0 = window.tokens.front()[kPositionChannel];
  const double volume0 = window.tokens.front()[kVolumeLevelChannel];
  for (auto& token : window.tokens) {
    token[kPositionChannel] -= price0;
    token[kVolumeLevelChannel] -= volume0;
  }
  return window;
}

NormStats compute_global_stats(std::span<const TokenWindow> training_windows, TokenizerKind kind) {
  std::size_t count = 0;
  double data_end = -INFINITY;
  for (const auto& w : training_windows) {
    count += w.tokens.size();
    data_end = std::max(data_end, w.end_time);
  }
  if (count < 2) fail(ErrorCode::kInsufficientData, "normalization stats need at least 2 tokens");

  NormStats stats;
  stats.data_end_time = data_end;
  std::vector<double> column;
  column.reserve(count);
  for (std::size_t c = 0; c < kDerivativeChannels.size(); ++c) {
    const std::size_t channel = kDerivativeChannels[c];
    if (kind == TokenizerKind::kRawMasked && !kRawMaskedLive[channel]) {
      stats.mu[c] = 0.0;
      stats.sigma[c] = 1.0;
      continue;
    }
    column.clear();
    for (const auto& w : training_windows)
      for (const auto& token : w.tokens) column.push_back(token[channel]);
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(count));
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      fail(ErrorCode::kDegenerateStats, fmt::format("channel {} has zero variance over the training corpus", channel));
    }
    stats.mu[c] = mean;
    stats.sigma[c] = sigma;
  }
  return stats;
}

NormStats compute_global_stats(std::span<const TokenWindow> training_windows, TokenizerKind kind,
                               double training_end) {
  for (const auto& w : training_windows) {
    if (w.end_time > training_end) {
      fail(ErrorCode::kLeakage, fmt::format("window ending at {} lies past the training cutoff {}", w.end_time, training_end));
    }
  }
  return compute_global_stats(training_windows, kind);
}

TokenWindow zscore_normalize(TokenWindow window, const NormStats& stats) {
  stats.validate();
  for (auto& token : window.tokens) {
    for (std::size_t c = 0; c < kDerivativeChannels.size(); ++c) {
      double& v = token[kDerivativeChannels[c]];
      v = (v - stats.mu[c]) / stats.sigma[c];
    }
  }
  return window;
}

TokenWindow zscore_denormalize(TokenWindow window, const NormStats& stats) {
  stats.validate();
  for (auto& token : window.tokens) {
    for (std::size_t c = 0; c < kDerivativeChannels.size(); ++c) {
      double& v = token[kDerivativeChannels[c]];
      v = v * stats.sigma[c] + stats.mu[c];
    }
  }
  return window;
}

double backward_difference(std::span<const double> y, std::size_t k, unsigned order) {
  if (k >= y.size()) fail(ErrorCode::kOutOfRange, fmt::format("difference index {} past series length {}", k, y.size()));
  if (k < order) return 0.0;
  double sum = 0.0;
  for (unsigned i = 0; i <= order; ++i) {
    const double sign = ((order - i) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * binomial(order, i) * y[k - (order - i)];
  }
  return sum;
}

std::vector<JointToken> finite_difference_tokens(const SnapshotSeries& prices, const AggregateSeries& volumes) {
  if (prices.values.size() < 5) fail(ErrorCode::kInsufficientData, "finite-difference tokens need at least 5 prices");
  check_aligned(prices, volumes);
  const std::span<const double> y = prices.values;
  const std::span<const double> v = volumes.values;
  std::vector<JointToken> tokens(v.size());
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    for (unsigned n = 0; n < kPriceChannels; ++n) tokens[k][n] = backward_difference(y, k + 1, n);
    for (unsigned n = 0; n < kVolumeChannels; ++n) tokens[k][kPriceChannels + n] = backward_difference(v, k, n);
  }
  return tokens;
}

std::vector<JointToken> masked_raw_tokens(const SnapshotSeries& prices, const AggregateSeries& volumes) {
  check_aligned(prices, volumes);
  const std::span<const double> y = prices.values;
  const std::span<const double> v = volumes.values;
  std::vector<JointToken> tokens(v.size());
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    tokens[k][0] = backward_difference(y, k + 1, 0);
    tokens[k][1] = backward_difference(y, k + 1, 1);
    tokens[k][kPriceChannels] = backward_difference(v, k, 0);
    tokens[k][kPriceChannels + 1] = backward_difference(v, k, 1);
  }
  return tokens;
}

TokenWindow tokenize_window(const LogHistory& history, std::size_t t, const TokenizerConfig& config) {
  history.validate();
  const std::size_t T = config.context;
  if (T < 2) fail(ErrorCode::kConfig, "context length must be at least 2");
  if (t >= history.size() || t < T) {
    fail(ErrorCode::kInsufficientData, fmt::format("index {} needs {} prior observations", t, T));
  }
  const std::size_t first = t - T;
  TimeGrid grid(std::vector<double>(history.time.begin() + static_cast<std::ptrdiff_t>(first),
                                    history.time.begin() + static_cast<std::ptrdiff_t>(t + 1)));
  SnapshotSeries prices{grid, std::vector<double>(history.log_close.begin() + static_cast<std::ptrdiff_t>(first),
                                                  history.log_close.begin() + static_cast<std::ptrdiff_t>(t + 1))};
  AggregateSeries volumes{grid, std::vector<double>(history.log_volume.begin() + static_cast<std::ptrdiff_t>(first + 1),
                                                    history.log_volume.begin() + static_cast<std::ptrdiff_t>(t + 1))};

  TokenWindow window;
  window.start_time = grid.front();
  window.end_time = grid.back();
  switch (config.kind) {
    case TokenizerKind::kSpline: {
      const auto price_fit = fit_snapshot_spline(prices, config.noise);
      const auto volume_fit = fit_aggregate_spline(volumes, config.noise);
      window.tokens = extract_joint_tokens(price_fit.spline, volume_fit.spline);
      break;
    }
    case TokenizerKind::kFiniteDifference:
      window.tokens = finite_difference_tokens(prices, volumes);
      break;
    case TokenizerKind::kRawMasked:
      window.tokens = masked_raw_tokens(prices, volumes);
      break;
  }
  return anchor_window(std::move(window));
}

TokenWindow rolling_tokenize(const LogHistory& history, std::size_t t, const TokenizerConfig& config,
                             const NormStats& stats) {
  return zscore_normalize(tokenize_window(history, t, config), stats);
}

void write_token_csv(std::ostream& out, std::span<const TokenWindow> windows) {
  out << "window,window_end,time,c0,c1,c2,c3,v0,v1,v2,v3,v4\n";
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& window = windows[w];
    for (std::size_t k = 0; k < window.tokens.size(); ++k) {
      out << fmt::format("{},{:.17g},{:.17g}", w, window.end_time, window.start_time + static_cast<double>(k));
      for (double c : window.tokens[k].channels) out << fmt::format(",{:.17g}", c);
      out << '\n';
    }
  }
}

std::vector<TokenWindow> read_token_csv(std::istream& in) {
  std::vector<TokenWindow> windows;
  std::string line;
  if (!std::getline(in, line)) return windows;
  std::size_t line_no = 1;
  long current = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorCode::kParse, fmt::format("token csv line {}: bad number '{}'", line_no, cell));
      }
    }
    if (cells.size() != 3 + kTokenChannels) fail(ErrorCode::kParse, fmt::format("token csv line {}: expected 12 columns", line_no));
    const long id = static_cast<long>(cells[0]);
    if (id != current) {
      windows.push_back({});
      windows.back().start_time = cells[2];
      windows.back().end_time = cells[1];
      current = id;
    }
    JointToken token;
    std::copy(cells.begin() + 3, cells.end(), token.channels.begin());
    windows.back().tokens.push_back(token);
  }
  return windows;
}

}  // namespace kinematic
