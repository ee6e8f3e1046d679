#include "kinematic/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "kinematic/error.hpp"

namespace kinematic {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream row(line);
  while (std::getline(row, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t line, const char* column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size()) {
    fail(ErrorCode::kParse, fmt::format("line {}: cannot parse {} value '{}'", line, column, cell));
  }
  return v;
}

}  // namespace

Date parse_date(std::string_view text) {
  const auto s = trim(text);
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(s);
  in >> y >> dash1 >> m >> dash2 >> d;
  if (!in || dash1 != '-' || dash2 != '-' || in.peek() != std::char_traits<char>::eof() || s.size() != 10) {
    fail(ErrorCode::kParse, fmt::format("invalid ISO-8601 date '{}'", s));
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) fail(ErrorCode::kParse, fmt::format("invalid calendar date '{}'", s));
  return Date{ymd};
}

std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

void validate_record(const OhlcvRecord& r, std::size_t line) {
  for (double v : {r.open, r.high, r.low, r.close, r.volume}) {
    if (!std::isfinite(v)) fail(ErrorCode::kData, fmt::format("line {}: non-finite value", line));
  }
  if (!(r.close > 0.0) || !(r.open > 0.0) || !(r.low > 0.0)) {
    fail(ErrorCode::kData, fmt::format("line {}: prices must be positive", line));
  }
  if (r.volume < 0.0) fail(ErrorCode::kData, fmt::format("line {}: negative volume", line));
  if (!(r.low <= std::min(r.open, r.close) && std::max(r.open, r.close) <= r.high)) {
    fail(ErrorCode::kData, fmt::format("line {}: OHLC invariant low <= min(open, close) <= max(open, close) <= high "
                                       "violated",
                                       line));
  }
}

std::vector<OhlcvRecord> parse_ohlcv_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kParse, "line 1: missing header");
  static constexpr std::array<const char*, 6> kColumns{"date", "open", "high", "low", "close", "volume"};
  std::array<std::optional<std::size_t>, 6> where;
  const auto header = split_csv(line);
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = lower(header[i]);
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      if (name == kColumns[c]) {
        if (where[c]) fail(ErrorCode::kParse, fmt::format("line 1: duplicate column '{}'", name));
        where[c] = i;
      }
    }
  }
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    if (!where[c]) fail(ErrorCode::kParse, fmt::format("line 1: missing column '{}'", kColumns[c]));
  }

  std::vector<std::pair<OhlcvRecord, std::size_t>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      fail(ErrorCode::kParse, fmt::format("line {}: expected {} fields, found {}", line_no, header.size(), cells.size()));
    }
    OhlcvRecord r;
    try {
      r.date = parse_date(cells[*where[0]]);
    } catch (const Error& e) {
      fail(ErrorCode::kParse, fmt::format("line {}: {}", line_no, e.what()));
    }
    r.open = parse_number(cells[*where[1]], line_no, "open");
    r.high = parse_number(cells[*where[2]], line_no, "high");
    r.low = parse_number(cells[*where[3]], line_no, "low");
    r.close = parse_number(cells[*where[4]], line_no, "close");
    r.volume = parse_number(cells[*where[5]], line_no, "volume");
    validate_record(r, line_no);
    rows.emplace_back(r, line_no);
  }
  if (rows.empty()) fail(ErrorCode::kEmptyInput, "no data rows");
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first.date < b.first.date; });
  std::vector<OhlcvRecord> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].first.date == rows[i - 1].first.date) {
      fail(ErrorCode::kData, fmt::format("line {}: duplicate date {} (first seen on line {})", rows[i].second,
                                         format_date(rows[i].first.date), rows[i - 1].second));
    }
    out.push_back(rows[i].first);
  }
  return out;
}

std::vector<OhlcvRecord> load_ohlcv_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kParse, fmt::format("cannot open '{}'", path.string()));
  try {
    return parse_ohlcv_csv(in);
  } catch (const Error& e) {
    fail(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_ohlcv_csv(std::ostream& out, std::span<const OhlcvRecord> records) {
  out << "date,open,high,low,close,volume\n";
  for (const auto& r : records) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", format_date(r.date), r.open, r.high, r.low,
                       r.close, r.volume);
  }
}

LogHistory log_transform(std::span<const OhlcvRecord> records, DataQualityReport* report) {
  LogHistory h;
  DataQualityReport q;
  q.rows = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!(r.close > 0.0)) fail(ErrorCode::kData, fmt::format("non-positive close on {}", format_date(r.date)));
    if (r.volume < 1.0) q.zero_volume_days.push_back(r.date);
    h.time.push_back(static_cast<double>(i));
    h.log_close.push_back(std::log(r.close));
    h.log_volume.push_back(std::log(std::max(r.volume, 1.0)));
  }
  if (report) *report = std::move(q);
  return h;
}

void write_quality_report(std::ostream& out, const DataQualityReport& report) {
  out << fmt::format("rows={}\nvolume_floored_days={}\n", report.rows, report.zero_volume_days.size());
  for (Date d : report.zero_volume_days) out << fmt::format("floored={}\n", format_date(d));
}

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kTrend: return "trend";
    case SyntheticKind::kMeanRevert: return "mean-revert";
    case SyntheticKind::kCrash: return "crash";
    case SyntheticKind::kGbm: return "gbm";
  }
  return "?";
}

SyntheticKind parse_synthetic_kind(std::string_view text) {
  for (auto k : {SyntheticKind::kTrend, SyntheticKind::kMeanRevert, SyntheticKind::kCrash, SyntheticKind::kGbm}) {
    if (text == to_string(k)) return k;
  }
  fail(ErrorCode::kConfig, fmt::format("unknown synthetic kind '{}' (trend, mean-revert, crash, gbm)", text));
}

std::string_view to_string(TrendRegime regime) {
  switch (regime) {
    case TrendRegime::kUp: return "up";
    case TrendRegime::kDown: return "down";
    case TrendRegime::kFlat: return "flat";
  }
  return "?";
}

void SyntheticParams::validate() const {
  auto bad = [](const char* what) { fail(ErrorCode::kConfig, fmt::format("synthetic parameter {} out of range", what)); };
  if (!(start_price > 0.0) || !std::isfinite(start_price)) bad("start_price");
  if (!std::isfinite(drift)) bad("drift");
  if (!(noise >= 0.0) || !std::isfinite(noise)) bad("noise");
  if (!(reversion >= 0.0 && reversion < 2.0)) bad("reversion");
  if (!(crash_depth > 0.0 && crash_depth < 1.0)) bad("crash_depth");
  if (!(crash_start >= 0.0 && crash_length > 0.0 && crash_start + crash_length <= 1.0)) bad("crash_start/crash_length");
  if (!(volume_level >= 1.0) || !std::isfinite(volume_level)) bad("volume_level");
  if (!(volume_noise >= 0.0) || !std::isfinite(volume_noise)) bad("volume_noise");
  if (!(range >= 0.0) || !std::isfinite(range)) bad("range");
}

SyntheticParams default_synthetic_params(SyntheticKind kind) {
  SyntheticParams p;
  switch (kind) {
    case SyntheticKind::kTrend: break;
    case SyntheticKind::kMeanRevert:
      p.drift = 0.0;
      p.noise = 0.015;
      break;
    case SyntheticKind::kCrash:
      p.drift = 0.0005;
      p.noise = 0.0025;
      break;
    case SyntheticKind::kGbm:
      p.drift = 0.08 / 252.0;
      p.noise = 0.2 / std::sqrt(252.0);
      break;
  }
  return p;
}

namespace {

TrendRegime direction(double step) {
  if (step > 0.0) return TrendRegime::kUp;
  if (step < 0.0) return TrendRegime::kDown;
  return TrendRegime::kFlat;
}

Date next_business_day(Date d) {
  do {
    d += std::chrono::days{1};
  } while (std::chrono::weekday{d} == std::chrono::Saturday || std::chrono::weekday{d} == std::chrono::Sunday);
  return d;
}

}  // namespace

SyntheticSeries generate_synthetic(SyntheticKind kind, std::size_t days, std::uint64_t seed,
                                   const SyntheticParams& params) {
  if (days < 2) fail(ErrorCode::kConfig, "synthetic series needs at least 2 days");
  params.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double x0 = std::log(params.start_price);
  const auto n = static_cast<double>(days);
  const auto crash_begin = static_cast<std::size_t>(std::floor(params.crash_start * n));
  const auto crash_days = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params.crash_length * n)));
  const double crash_step = std::log(1.0 - params.crash_depth) / static_cast<double>(crash_days);

  SyntheticSeries s;
  s.records.reserve(days);
  s.regimes.reserve(days);
  double x = x0;
  Date date = Date{std::chrono::year{kSyntheticStartYear} / std::chrono::January / 2};
  for (std::size_t i = 0; i < days; ++i) {
    // Day 0 sits at x0; its regime is the direction the driver takes from there.
    double step = 0.0;
    switch (kind) {
      case SyntheticKind::kTrend:
        step = params.drift;
        if (i > 0) x = x0 + params.drift * static_cast<double>(i) + params.noise * gauss(rng);
        break;
      case SyntheticKind::kMeanRevert:
        step = params.reversion * (x0 - x) + params.drift;
        if (i > 0) x += step + params.noise * gauss(rng);
        break;
      case SyntheticKind::kCrash: {
        // Noise is added around the deterministic path below so the drawdown tracks the target.
        const bool in_crash = i > crash_begin && i <= crash_begin + crash_days;
        step = i <= crash_begin ? params.drift : (in_crash ? crash_step : 0.0);
        if (i > 0) x += step;
        break;
      }
      case SyntheticKind::kGbm:
        step = params.drift - 0.5 * params.noise * params.noise;
        if (i > 0) x += step + params.noise * gauss(rng);
        break;
    }
    double close_log = x;
    if (kind == SyntheticKind::kCrash && i > 0) close_log = x + params.noise * gauss(rng);
    const double close = std::exp(close_log);
    const double open = s.records.empty() ? close * std::exp(-params.range * 0.5) : s.records.back().close;
    const double high = std::max(open, close) * std::exp(params.range * std::abs(gauss(rng)));
    const double low = std::min(open, close) * std::exp(-params.range * std::abs(gauss(rng)));
    const double volume =
        std::round(params.volume_level * std::exp(params.volume_noise * gauss(rng) - 0.5 * params.volume_noise * params.volume_noise));
    s.records.push_back({date, open, high, low, close, std::max(volume, 0.0)});
    s.regimes.push_back(direction(step));
    date = next_business_day(date);
  }
  return s;
}

SyntheticSeries generate_synthetic(SyntheticKind kind, std::size_t days, std::uint64_t seed) {
  return generate_synthetic(kind, days, seed, default_synthetic_params(kind));
}

}  // namespace kinematic
