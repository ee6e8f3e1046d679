#include "kinematic/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "kinematic/diagnostics.hpp"
#include "kinematic/enrichment.hpp"
#include "kinematic/error.hpp"

namespace kinematic {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Command command) {
  switch (command) {
    case Command::kEnrich: return "enrich";
    case Command::kTokenize: return "tokenize";
    case Command::kTrain: return "train";
    case Command::kBacktest: return "backtest";
    case Command::kDiagnose: return "diagnose";
    case Command::kSweep: return "sweep";
    case Command::kRun: return "run";
  }
  return "?";
}

Command parse_command(std::string_view text) {
  for (auto c : {Command::kEnrich, Command::kTokenize, Command::kTrain, Command::kBacktest, Command::kDiagnose,
                 Command::kSweep, Command::kRun}) {
    if (text == to_string(c)) return c;
  }
  fail(ErrorCode::kConfig, fmt::format("unknown command '{}'", text));
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::string_view bytes) { return fmt::format("{:016x}", fnv1a(bytes)); }

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kData, fmt::format("cannot write '{}'", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::kData, fmt::format("short write to '{}'", tmp.string()));
  }
  fs::rename(tmp, path);
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kData, fmt::format("cannot read '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct AssetHistory {
  std::vector<std::string> dates;
  std::vector<Date> days;
  std::vector<double> close;
  LogHistory log;
};

struct Prediction {
  std::size_t day = 0;
  std::array<double, kNumClasses> p{};
  ActionLabel action = ActionLabel::kHold;
};

/// Artifacts written by one stage plus the manifest describing them.
class Stage {
 public:
  Stage(const RunConfig& config, std::string_view dir, std::vector<fs::path>& written)
      : config_(config), dir_(dir), written_(written) {}

  fs::path rel(const std::string& name) const { return fs::path(dir_) / name; }

  void write(const std::string& name, const std::string& content) {
    const auto r = rel(name);
    write_file_atomic(config_.out / r, content);
    outputs_[r.generic_string()] = hash_hex(content);
    written_.push_back(r);
  }

  void input(const fs::path& relative_or_absolute, const std::string& content) {
    inputs_[relative_or_absolute.generic_string()] = hash_hex(content);
  }

  void finish(const std::string& data_end, const json& parameters) {
    json inputs = json::array();
    for (const auto& [path, hash] : inputs_) inputs.push_back({{"path", path}, {"fnv1a", hash}});
    json outputs = json::array();
    for (const auto& [path, hash] : outputs_) outputs.push_back({{"path", path}, {"fnv1a", hash}});
    json manifest{{"stage", dir_},        {"data_end", data_end}, {"parameters", parameters},
                  {"inputs", inputs},     {"outputs", outputs}};
    const auto r = fs::path(dir_) / kManifestName;
    write_file_atomic(config_.out / r, manifest.dump(2) + "\n");
    written_.push_back(r);
  }

 private:
  const RunConfig& config_;
  std::string dir_;
  std::vector<fs::path>& written_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

class Pipeline {
 public:
  explicit Pipeline(const RunConfig& config) : c_(config) {}

  void enrich();
  void tokenize();
  void train();
  void backtest();
  void diagnose();
  void sweep();

  std::vector<fs::path> written;

 private:
  /// Config rendering without the output directory so reruns elsewhere hash alike.
  json parameters() const {
    auto j = json::parse(to_json(c_));
    j.erase("out");
    return j;
  }

  std::string require(const fs::path& relative, Command producer) const {
    const auto path = c_.out / relative;
    if (!fs::exists(path)) {
      fail(ErrorCode::kDependency, fmt::format("missing artifact '{}'; run the '{}' command first",
                                               relative.generic_string(), to_string(producer)));
    }
    return read_file(path);
  }

  json manifest(std::string_view dir, Command producer) const {
    return json::parse(require(fs::path(dir) / kManifestName, producer));
  }

  AssetHistory load_history(const std::string& asset, Stage* stage) const;
  std::vector<LabeledWindow> load_training(const std::string& asset, Stage* stage) const;
  std::vector<TokenWindow> load_test_windows(const std::string& asset, Stage* stage) const;
  std::vector<Prediction> load_predictions(const std::string& asset, Stage* stage) const;
  ModelParameters fit_model(std::span<const LabeledWindow> data, std::string* base_checkpoint,
                            std::string* base_log, std::string* lora_log) const;

  const RunConfig& c_;
};

std::string history_csv(const std::vector<OhlcvRecord>& records, const LogHistory& log) {
  std::string s = "day,date,close,log_close,log_volume\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    s += fmt::format("{},{},{:.17g},{:.17g},{:.17g}\n", i, format_date(records[i].date), records[i].close,
                     log.log_close[i], log.log_volume[i]);
  }
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream row(line);
  while (std::getline(row, cell, ',')) cells.push_back(cell);
  return cells;
}

/// Rows of a CSV we wrote ourselves, header skipped.
std::vector<std::vector<std::string>> csv_rows(const std::string& text, std::size_t columns, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != columns) {
      fail(ErrorCode::kParse, fmt::format("{} line {}: expected {} fields", what, line_no, columns));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s) { return std::stod(s); }
std::size_t to_index(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

std::string stats_text(const NormStats& stats, TokenizerKind kind, const std::string& data_end) {
  std::string s = fmt::format("kind={}\ndata_end={}\n", to_string(kind), data_end);
  for (std::size_t i = 0; i < stats.mu.size(); ++i) {
    s += fmt::format("channel{}_mu={:a}\nchannel{}_sigma={:a}\n", kDerivativeChannels[i], stats.mu[i],
                     kDerivativeChannels[i], stats.sigma[i]);
  }
  return s;
}

std::string predictions_csv(const std::vector<Prediction>& preds, const AssetHistory& h) {
  std::string s = "day,date,p_buy,p_sell,p_hold,action\n";
  for (const auto& p : preds) {
    s += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{}\n", p.day, h.dates[p.day], p.p[0], p.p[1], p.p[2],
                     to_string(p.action));
  }
  return s;
}

std::vector<Prediction> predict_all(const ModelParameters& params, std::span<const TokenWindow> windows) {
  std::vector<Prediction> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    const auto [action, probs] = predict_action(params, w);
    out.push_back({static_cast<std::size_t>(w.end_time), probs.p, action});
  }
  return out;
}

BacktestResult backtest_predictions(const RunConfig& c, const std::vector<Prediction>& preds, const AssetHistory& h,
                                    double bps) {
  std::vector<ActionLabel> actions;
  std::vector<double> closes;
  for (const auto& p : preds) {
    actions.push_back(p.action);
    closes.push_back(h.close.at(p.day));
  }
  return run_backtest(actions, closes, CostModel{bps}, c.tax, c.initial_capital, c.risk_free);
}

std::vector<std::string> prediction_dates(const std::vector<Prediction>& preds, const AssetHistory& h) {
  std::vector<std::string> dates;
  for (const auto& p : preds) dates.push_back(h.dates[p.day]);
  return dates;
}

template <typename Writer>
std::string render(Writer&& writer) {
  std::ostringstream out;
  writer(out);
  return out.str();
}

AssetHistory Pipeline::load_history(const std::string& asset, Stage* stage) const {
  const auto rel = fs::path(kEnrichDir) / asset / "history.csv";
  const auto text = require(rel, Command::kEnrich);
  if (stage) stage->input(rel, text);
  AssetHistory h;
  for (const auto& row : csv_rows(text, 5, rel.generic_string())) {
    h.log.time.push_back(static_cast<double>(to_index(row[0])));
    h.dates.push_back(row[1]);
    h.days.push_back(parse_date(row[1]));
    h.close.push_back(to_double(row[2]));
    h.log.log_close.push_back(to_double(row[3]));
    h.log.log_volume.push_back(to_double(row[4]));
  }
  return h;
}

std::vector<LabeledWindow> Pipeline::load_training(const std::string& asset, Stage* stage) const {
  const auto tok_rel = fs::path(kTokenizeDir) / asset / "train_tokens.csv";
  const auto lab_rel = fs::path(kTokenizeDir) / asset / "train_labels.csv";
  const auto tok_text = require(tok_rel, Command::kTokenize);
  const auto lab_text = require(lab_rel, Command::kTokenize);
  if (stage) {
    stage->input(tok_rel, tok_text);
    stage->input(lab_rel, lab_text);
  }
  std::istringstream tok_in(tok_text);
  auto windows = read_token_csv(tok_in);
  const auto rows = csv_rows(lab_text, 4, lab_rel.generic_string());
  if (rows.size() != windows.size()) {
    fail(ErrorCode::kShape, fmt::format("{}: {} labels for {} windows", asset, rows.size(), windows.size()));
  }
  std::vector<LabeledWindow> data;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.push_back({std::move(windows[i]), static_cast<ActionLabel>(to_index(rows[i][2])), to_double(rows[i][3]),
                    to_index(rows[i][1])});
  }
  return data;
}

std::vector<TokenWindow> Pipeline::load_test_windows(const std::string& asset, Stage* stage) const {
  const auto rel = fs::path(kTokenizeDir) / asset / "test_tokens.csv";
  const auto text = require(rel, Command::kTokenize);
  if (stage) stage->input(rel, text);
  std::istringstream in(text);
  return read_token_csv(in);
}

std::vector<Prediction> Pipeline::load_predictions(const std::string& asset, Stage* stage) const {
  const auto rel = fs::path(kBacktestDir) / asset / "predictions.csv";
  const auto text = require(rel, Command::kBacktest);
  if (stage) stage->input(rel, text);
  std::vector<Prediction> preds;
  for (const auto& row : csv_rows(text, 6, rel.generic_string())) {
    preds.push_back({to_index(row[0]), {to_double(row[2]), to_double(row[3]), to_double(row[4])}, parse_action(row[5])});
  }
  return preds;
}

ModelParameters Pipeline::fit_model(std::span<const LabeledWindow> data, std::string* base_checkpoint,
                                    std::string* base_log, std::string* lora_log) const {
  auto base = kinematic::train(data, c_.model, c_.weights);
  if (base_log) *base_log = render([&](std::ostream& o) { write_training_log_csv(o, base.log); });
  if (!c_.lora.enabled) return std::move(base.params);
  if (base_checkpoint) *base_checkpoint = render([&](std::ostream& o) { save_checkpoint(o, base.params); });
  auto adapted = apply_lora(std::move(base.params), c_.lora.rank, c_.lora.targets);
  adapted.config.epochs = c_.lora.epochs;
  adapted.config.learning_rate = c_.lora.learning_rate;
  auto tuned = train_from(std::move(adapted), data, c_.weights);
  if (lora_log) *lora_log = render([&](std::ostream& o) { write_training_log_csv(o, tuned.log); });
  return std::move(tuned.params);
}

std::vector<OhlcvRecord> asset_records(const RunConfig& c, std::size_t i, Stage* stage) {
  const auto& a = c.assets[i];
  if (a.csv) {
    const auto text = read_file(*a.csv);
    if (stage) stage->input(*a.csv, text);
    std::istringstream in(text);
    try {
      return parse_ohlcv_csv(in);
    } catch (const Error& e) {
      fail(e.code(), fmt::format("{}: {}", a.csv->string(), e.what()));
    }
  }
  return generate_synthetic(a.synthetic->kind, a.synthetic->days, c.asset_seed(i), a.synthetic->params).records;
}

void Pipeline::enrich() {
  Stage stage(c_, kEnrichDir, written);
  Date last{};
  for (std::size_t i = 0; i < c_.assets.size(); ++i) {
    const auto& name = c_.assets[i].name;
    auto records = asset_records(c_, i, &stage);
    std::erase_if(records, [&](const OhlcvRecord& r) { return r.date > c_.test_end; });
    if (records.size() < 3) {
      fail(ErrorCode::kInsufficientData, fmt::format("asset '{}' has fewer than 3 rows up to {}", name,
                                                     format_date(c_.test_end)));
    }
    last = std::max(last, records.back().date);
    DataQualityReport quality;
    const auto log = log_transform(records, &quality);
    stage.write(name + "/history.csv", history_csv(records, log));
    stage.write(name + "/quality.txt", render([&](std::ostream& o) { write_quality_report(o, quality); }));

    // Whole-history kinematics for plotting; not consumed downstream.
    TimeGrid grid(log.time);
    const auto price = fit_snapshot_spline({grid, log.log_close}, c_.tokenizer.noise);
    const auto volume = fit_aggregate_spline(
        {grid, std::vector<double>(log.log_volume.begin() + 1, log.log_volume.end())}, c_.tokenizer.noise);
    const auto tokens = extract_joint_tokens(price.spline, volume.spline);
    std::string kin = "day,date,c0,c1,c2,c3,v0,v1,v2,v3,v4\n";
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      kin += fmt::format("{},{}", k, format_date(records[k].date));
      for (double v : tokens[k].channels) kin += fmt::format(",{:.17g}", v);
      kin += '\n';
    }
    stage.write(name + "/kinematics.csv", kin);
  }
  stage.finish(format_date(last), parameters());
}

void Pipeline::tokenize() {
  Stage stage(c_, kTokenizeDir, written);
  const std::size_t T = c_.tokenizer.context;
  std::vector<std::vector<LabeledWindow>> train_sets;
  std::vector<AssetHistory> histories;
  Date data_end{};
  for (const auto& asset : c_.assets) {
    auto h = load_history(asset.name, &stage);
    const auto after = std::upper_bound(h.days.begin(), h.days.end(), c_.train_end);
    const auto count = static_cast<std::size_t>(after - h.days.begin());
    // The last label looks one step ahead, so windows end one day before the cutoff.
    if (count < T + 2) {
      fail(ErrorCode::kInsufficientData, fmt::format("asset '{}' has {} rows up to {}; need at least {}", asset.name,
                                                     count, format_date(c_.train_end), T + 2));
    }
    const std::size_t t_max = count - 2;
    train_sets.push_back(label_dataset(h.log, c_.tau, c_.tokenizer, T, t_max));
    data_end = std::max(data_end, h.days[t_max + 1]);
    histories.push_back(std::move(h));
  }
  std::vector<TokenWindow> pooled;
  for (const auto& set : train_sets) {
    for (const auto& lw : set) pooled.push_back(lw.window);
  }
  const auto stats = compute_global_stats(pooled, c_.tokenizer.kind);
  const auto end_text = format_date(data_end);
  stage.write("stats.txt", stats_text(stats, c_.tokenizer.kind, end_text));

  for (std::size_t a = 0; a < c_.assets.size(); ++a) {
    const auto& name = c_.assets[a].name;
    auto& set = train_sets[a];
    std::vector<TokenWindow> normalized;
    for (auto& lw : set) {
      lw.window = zscore_normalize(lw.window, stats);
      normalized.push_back(lw.window);
    }
    stage.write(name + "/train_tokens.csv", render([&](std::ostream& o) { write_token_csv(o, normalized); }));
    stage.write(name + "/train_labels.csv", render([&](std::ostream& o) { write_label_csv(o, set); }));

    const auto& h = histories[a];
    std::vector<TokenWindow> test;
    for (std::size_t t = T; t < h.days.size(); ++t) {
      if (h.days[t] >= c_.test_start && h.days[t] <= c_.test_end) test.push_back(rolling_tokenize(h.log, t, c_.tokenizer, stats));
    }
    if (test.empty()) {
      fail(ErrorCode::kInsufficientData, fmt::format("asset '{}' has no test days between {} and {}", name,
                                                     format_date(c_.test_start), format_date(c_.test_end)));
    }
    stage.write(name + "/test_tokens.csv", render([&](std::ostream& o) { write_token_csv(o, test); }));
  }
  stage.finish(end_text, parameters());
}

void Pipeline::train() {
  Stage stage(c_, kTrainDir, written);
  const auto upstream = manifest(kTokenizeDir, Command::kTokenize);
  const auto stats_rel = fs::path(kTokenizeDir) / "stats.txt";
  stage.input(stats_rel, require(stats_rel, Command::kTokenize));
  std::vector<LabeledWindow> data;
  for (const auto& asset : c_.assets) {
    auto set = load_training(asset.name, &stage);
    std::move(set.begin(), set.end(), std::back_inserter(data));
  }
  std::string base_checkpoint, base_log, lora_log;
  const auto params = fit_model(data, &base_checkpoint, &base_log, &lora_log);
  stage.write("training_log.csv", base_log);
  if (c_.lora.enabled) {
    stage.write("base.json", base_checkpoint);
    stage.write("lora_log.csv", lora_log);
  }
  stage.write("model.json", render([&](std::ostream& o) { save_checkpoint(o, params); }));
  stage.finish(upstream.at("data_end").get<std::string>(), parameters());
}

void Pipeline::backtest() {
  Stage stage(c_, kBacktestDir, written);
  // Leakage guard: anything fitted must end strictly before the test period.
  for (auto [dir, producer] : {std::pair{kTokenizeDir, Command::kTokenize}, std::pair{kTrainDir, Command::kTrain}}) {
    const auto m = manifest(dir, producer);
    const auto end = parse_date(m.at("data_end").get<std::string>());
    if (end >= c_.test_start) {
      fail(ErrorCode::kLeakage, fmt::format("{} artifacts were fitted on data through {}, on or after test start {}",
                                            dir, format_date(end), format_date(c_.test_start)));
    }
  }
  const auto stats_rel = fs::path(kTokenizeDir) / "stats.txt";
  const auto stats_hash = hash_hex(require(stats_rel, Command::kTokenize));
  bool recorded = false;
  const auto train_manifest = manifest(kTrainDir, Command::kTrain);
  for (const auto& in : train_manifest.at("inputs")) {
    if (in.at("path") == stats_rel.generic_string()) {
      recorded = true;
      if (in.at("fnv1a") != stats_hash) {
        fail(ErrorCode::kDependency, "model was trained against different normalization stats; run the 'train' command");
      }
    }
  }
  if (!recorded) fail(ErrorCode::kDependency, "train manifest does not record the normalization stats; run 'train'");

  const auto model_rel = fs::path(kTrainDir) / "model.json";
  const auto model_text = require(model_rel, Command::kTrain);
  stage.input(model_rel, model_text);
  std::istringstream model_in(model_text);
  const auto params = load_checkpoint(model_in);

  std::string summary = render([](std::ostream& o) { write_metrics_csv_header(o); });
  for (const auto& asset : c_.assets) {
    const auto h = load_history(asset.name, &stage);
    const auto windows = load_test_windows(asset.name, &stage);
    const auto preds = predict_all(params, windows);
    const auto result = backtest_predictions(c_, preds, h, c_.cost_bps);
    const auto dates = prediction_dates(preds, h);
    stage.write(asset.name + "/predictions.csv", predictions_csv(preds, h));
    stage.write(asset.name + "/blotter.csv", render([&](std::ostream& o) { write_blotter_csv(o, result, dates); }));
    stage.write(asset.name + "/equity.csv", render([&](std::ostream& o) { write_equity_csv(o, result, dates); }));
    stage.write(asset.name + "/metrics.txt", render([&](std::ostream& o) { write_metrics_kv(o, result.metrics); }));
    summary += render([&](std::ostream& o) { write_metrics_csv_row(o, asset.name, result.metrics); });
  }
  stage.write("metrics.csv", summary);
  stage.finish(format_date(c_.test_end), parameters());
}

void Pipeline::diagnose() {
  Stage stage(c_, kDiagnoseDir, written);
  std::string equilibrium = render([](std::ostream& o) { write_equilibrium_csv_header(o); });
  for (const auto& asset : c_.assets) {
    const auto h = load_history(asset.name, &stage);
    const auto preds = load_predictions(asset.name, &stage);
    std::vector<ActionLabel> actions;
    for (const auto& p : preds) actions.push_back(p.action);
    const auto result = backtest_predictions(c_, preds, h, c_.cost_bps);

    // Realized labels and outcomes exist only where the next day is known.
    std::vector<ActionLabel> scored_pred, truth;
    std::vector<double> buy_probs;
    std::vector<bool> wins;
    const std::size_t n = h.days.size();
    std::vector<Prediction> scored;
    for (const auto& p : preds) {
      if (p.day + 1 < n) scored.push_back(p);
    }
    if (!scored.empty()) {
      const auto r = next_interval_returns(h.log, scored.front().day, scored.back().day, c_.tokenizer.context,
                                           c_.tokenizer.noise);
      for (const auto& p : scored) {
        scored_pred.push_back(p.action);
        truth.push_back(momentum_label(r[p.day - scored.front().day], c_.tau));
        buy_probs.push_back(p.p[0]);
        wins.push_back(h.log.log_close[p.day + 1] - h.log.log_close[p.day] > 0.0);
      }
    }
    const auto dist = action_distribution(actions);
    stage.write(asset.name + "/distribution.csv", render([&](std::ostream& o) { write_distribution_csv(o, dist); }));
    stage.write(asset.name + "/confusion.csv",
                render([&](std::ostream& o) { write_confusion_csv(o, confusion_matrix(scored_pred, truth)); }));
    stage.write(asset.name + "/calibration.csv",
                render([&](std::ostream& o) { write_calibration_csv(o, calibration_curve(buy_probs, wins)); }));
    const auto report = detect_liquidation_equilibrium(actions, result);
    equilibrium += render([&](std::ostream& o) { write_equilibrium_csv_row(o, asset.name, report); });
  }
  stage.write("equilibrium.csv", equilibrium);
  stage.finish(format_date(c_.test_end), parameters());
}

void Pipeline::sweep() {
  Stage stage(c_, kSweepDir, written);
  std::vector<LabeledWindow> data;
  for (const auto& asset : c_.assets) {
    auto set = load_training(asset.name, &stage);
    std::move(set.begin(), set.end(), std::back_inserter(data));
  }
  std::vector<double> returns;
  for (const auto& lw : data) returns.push_back(lw.r);
  const auto tau_labels = tau_sweep_labels(returns, c_.sweep.taus);
  stage.write("tau_sweep.csv", render([&](std::ostream& o) { write_sweep_csv(o, tau_labels); }));

  std::vector<AssetHistory> histories;
  for (const auto& asset : c_.assets) {
    histories.push_back(load_history(asset.name, &stage));
    const auto preds = load_predictions(asset.name, &stage);
    std::vector<ActionLabel> actions;
    std::vector<double> closes;
    for (const auto& p : preds) {
      actions.push_back(p.action);
      closes.push_back(histories.back().close.at(p.day));
    }
    const auto s = cost_sweep(actions, closes, c_.sweep.bps, c_.tax, c_.initial_capital, c_.risk_free);
    stage.write(asset.name + "/bps_sweep.csv", render([&](std::ostream& o) { write_sweep_csv(o, s); }));
  }

  if (c_.sweep.retrain) {
    std::vector<SweepResult> per_asset(c_.assets.size(), SweepResult{"tau", {}});
    for (double tau : c_.sweep.taus) {
      auto relabeled = data;
      for (auto& lw : relabeled) lw.label = momentum_label(lw.r, tau);
      const auto params = fit_model(relabeled, nullptr, nullptr, nullptr);
      for (std::size_t a = 0; a < c_.assets.size(); ++a) {
        const auto windows = load_test_windows(c_.assets[a].name, &stage);
        const auto result = backtest_predictions(c_, predict_all(params, windows), histories[a], c_.cost_bps);
        per_asset[a].points.push_back({tau, result.metrics.action_rate, result.metrics.sharpe, result.metrics.total_return});
      }
    }
    for (std::size_t a = 0; a < c_.assets.size(); ++a) {
      stage.write(c_.assets[a].name + "/tau_backtest.csv",
                  render([&](std::ostream& o) { write_sweep_csv(o, per_asset[a]); }));
    }
  }
  stage.finish(format_date(c_.test_end), parameters());
}

}  // namespace

std::vector<fs::path> run_pipeline(const RunConfig& config, Command command) {
  config.validate();
  Pipeline p(config);
  switch (command) {
    case Command::kEnrich: p.enrich(); break;
    case Command::kTokenize: p.tokenize(); break;
    case Command::kTrain: p.train(); break;
    case Command::kBacktest: p.backtest(); break;
    case Command::kDiagnose: p.diagnose(); break;
    case Command::kSweep: p.sweep(); break;
    case Command::kRun:
      p.enrich();
      p.tokenize();
      p.train();
      p.backtest();
      p.diagnose();
      p.sweep();
      break;
  }
  return p.written;
}

std::vector<fs::path> write_synthetic_assets(const RunConfig& config) {
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < config.assets.size(); ++i) {
    const auto& a = config.assets[i];
    if (!a.synthetic) continue;
    const auto s = generate_synthetic(a.synthetic->kind, a.synthetic->days, config.asset_seed(i), a.synthetic->params);
    const auto csv = fs::path("data") / (a.name + ".csv");
    write_file_atomic(config.out / csv, render([&](std::ostream& o) { write_ohlcv_csv(o, s.records); }));
    std::string regimes = "date,regime\n";
    for (std::size_t k = 0; k < s.records.size(); ++k) {
      regimes += fmt::format("{},{}\n", format_date(s.records[k].date), to_string(s.regimes[k]));
    }
    const auto reg = fs::path("data") / (a.name + "_regimes.csv");
    write_file_atomic(config.out / reg, regimes);
    written.push_back(csv);
    written.push_back(reg);
  }
  return written;
}

}  // namespace kinematic
