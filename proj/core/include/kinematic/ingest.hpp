#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinematic/tokenizer.hpp"

namespace kinematic {

using Date = std::chrono::sys_days;

Date parse_date(std::string_view text);
std::string format_date(Date date);

struct OhlcvRecord {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  friend bool operator==(const OhlcvRecord&, const OhlcvRecord&) = default;
};

/// Throws a data error naming `line` when an OHLC invariant fails.
void validate_record(const OhlcvRecord& record, std::size_t line);

/// Header names date/open/high/low/close/volume in any order (case-insensitive,
/// extra columns ignored). Output is date-sorted.
std::vector<OhlcvRecord> parse_ohlcv_csv(std::istream& in);
std::vector<OhlcvRecord> load_ohlcv_csv(const std::filesystem::path& path);
void write_ohlcv_csv(std::ostream& out, std::span<const OhlcvRecord> records);

struct DataQualityReport {
  std::size_t rows = 0;
  std::vector<Date> zero_volume_days;
};

/// Log transform with volume floored at one share. Times are trading-day
/// indices 0, 1, 2, ...
LogHistory log_transform(std::span<const OhlcvRecord> records, DataQualityReport* report = nullptr);
void write_quality_report(std::ostream& out, const DataQualityReport& report);

enum class SyntheticKind { kTrend, kMeanRevert, kCrash, kGbm };
std::string_view to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(std::string_view text);

enum class TrendRegime { kUp, kDown, kFlat };
std::string_view to_string(TrendRegime regime);

struct SyntheticParams {
  double start_price = 100.0;
  /// Daily log drift (trend, gbm, and the pre-crash phase).
  double drift = 0.001;
  /// Daily log-return noise.
  double noise = 0.01;
  /// Mean-revert pull per day toward log(start_price).
  double reversion = 0.05;
  double crash_depth = 0.40;
  /// Fractions of the series before the decline and spent in it.
  double crash_start = 0.4;
  double crash_length = 0.3;
  double volume_level = 1e6;
  double volume_noise = 0.2;
  /// Half-width of the intraday range as a log fraction.
  double range = 0.005;

  void validate() const;
};

struct SyntheticSeries {
  std::vector<OhlcvRecord> records;
  /// Ground-truth direction of the noise-free driver on each day.
  std::vector<TrendRegime> regimes;
};

inline constexpr int kSyntheticStartYear = 2019;

/// Business-day dates starting 2019-01-02.
SyntheticSeries generate_synthetic(SyntheticKind kind, std::size_t days, std::uint64_t seed,
                                   const SyntheticParams& params);
/// Uses default_synthetic_params(kind).
SyntheticSeries generate_synthetic(SyntheticKind kind, std::size_t days, std::uint64_t seed);

/// Default parameter set for a kind; crash uses a small noise so the drawdown tracks the target.
SyntheticParams default_synthetic_params(SyntheticKind kind);

}  // namespace kinematic
