#include "kinematic/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "kinematic/error.hpp"

namespace kinematic {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) fail(ErrorCode::kConfig, fmt::format("{} must be an object", where));
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!names.count(key)) fail(ErrorCode::kConfig, fmt::format("unknown key '{}' in {}", key, where));
  }
}

template <typename T>
void read(const json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kConfig, fmt::format("{}.{} has the wrong type", where, key));
  }
}

void read_date(const json& obj, const char* key, Date& target) {
  if (!obj.contains(key)) return;
  std::string text;
  read(obj, key, text, "config");
  try {
    target = parse_date(text);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, fmt::format("config.{}: {}", key, e.what()));
  }
}

SyntheticParams read_params(const json& j, SyntheticKind kind) {
  SyntheticParams p = default_synthetic_params(kind);
  const std::string w = "synthetic.params";
  check_keys(j, {"start_price", "drift", "noise", "reversion", "crash_depth", "crash_start", "crash_length",
                 "volume_level", "volume_noise", "range"},
             w);
  read(j, "start_price", p.start_price, w);
  read(j, "drift", p.drift, w);
  read(j, "noise", p.noise, w);
  read(j, "reversion", p.reversion, w);
  read(j, "crash_depth", p.crash_depth, w);
  read(j, "crash_start", p.crash_start, w);
  read(j, "crash_length", p.crash_length, w);
  read(j, "volume_level", p.volume_level, w);
  read(j, "volume_noise", p.volume_noise, w);
  read(j, "range", p.range, w);
  return p;
}

json params_json(const SyntheticParams& p) {
  return {{"start_price", p.start_price}, {"drift", p.drift},
          {"noise", p.noise},             {"reversion", p.reversion},
          {"crash_depth", p.crash_depth}, {"crash_start", p.crash_start},
          {"crash_length", p.crash_length}, {"volume_level", p.volume_level},
          {"volume_noise", p.volume_noise}, {"range", p.range}};
}

}  // namespace

std::uint64_t RunConfig::asset_seed(std::size_t index) const {
  const auto& spec = assets.at(index).synthetic;
  if (spec && spec->seed) return *spec->seed;
  return seed + index + 1;
}

void RunConfig::validate() const {
  if (assets.empty()) fail(ErrorCode::kConfig, "config lists no assets");
  std::set<std::string> names;
  for (const auto& a : assets) {
    if (a.name.empty() || a.name.find_first_of("/\\ ,") != std::string::npos || a.name == "." || a.name == "..") {
      fail(ErrorCode::kConfig, fmt::format("invalid asset name '{}'", a.name));
    }
    if (!names.insert(a.name).second) fail(ErrorCode::kConfig, fmt::format("duplicate asset name '{}'", a.name));
    if (a.csv.has_value() == a.synthetic.has_value()) {
      fail(ErrorCode::kConfig, fmt::format("asset '{}' needs exactly one of csv or synthetic", a.name));
    }
    if (a.csv && !std::filesystem::exists(*a.csv)) {
      fail(ErrorCode::kConfig, fmt::format("asset '{}': file '{}' does not exist", a.name, a.csv->string()));
    }
    if (a.synthetic) {
      if (a.synthetic->days < 2) fail(ErrorCode::kConfig, fmt::format("asset '{}': days must be >= 2", a.name));
      a.synthetic->params.validate();
    }
  }
  if (!(train_end < test_start)) {
    fail(ErrorCode::kLeakage, fmt::format("train_end {} must precede test_start {}", format_date(train_end),
                                          format_date(test_start)));
  }
  if (test_end < test_start) fail(ErrorCode::kConfig, "test_end precedes test_start");
  if (tokenizer.context != model.context) fail(ErrorCode::kConfig, "tokenizer and model context differ");
  tokenizer.noise.validate();
  if (!(tau >= 0.0)) fail(ErrorCode::kConfig, "tau must be nonnegative");
  weights.validate();
  model.validate();
  if (lora.enabled) {
    if (lora.rank == 0) fail(ErrorCode::kConfig, "lora.rank must be positive");
    if (lora.epochs == 0) fail(ErrorCode::kConfig, "lora.epochs must be positive");
    if (!(lora.learning_rate > 0.0)) fail(ErrorCode::kConfig, "lora.learning_rate must be positive");
    for (auto t : lora.targets) {
      if (t >= model.layers) fail(ErrorCode::kConfig, fmt::format("lora target block {} out of range", t));
    }
  }
  if (!(cost_bps >= 0.0)) fail(ErrorCode::kConfig, "cost_bps must be nonnegative");
  tax.validate();
  if (!(initial_capital > 0.0)) fail(ErrorCode::kConfig, "initial_capital must be positive");
  if (!std::isfinite(risk_free)) fail(ErrorCode::kConfig, "risk_free must be finite");
  if (out.empty()) fail(ErrorCode::kConfig, "output directory is empty");
  require_increasing(sweep.taus, "tau");
  require_increasing(sweep.bps, "bps");
  for (double t : sweep.taus) {
    if (t < 0.0) fail(ErrorCode::kConfig, "sweep taus must be nonnegative");
  }
  for (double b : sweep.bps) {
    if (b < 0.0) fail(ErrorCode::kConfig, "sweep bps must be nonnegative");
  }
}

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, fmt::format("config is not valid JSON: {}", e.what()));
  }
  check_keys(root, {"assets", "train_end", "test_start", "test_end", "tokenizer", "labels", "model", "lora",
                    "backtest", "sweep", "seed", "out"},
             "config");
  RunConfig c;
  read(root, "seed", c.seed, "config");
  c.model.seed = c.seed;

  if (root.contains("assets")) {
    const auto& list = root.at("assets");
    if (!list.is_array()) fail(ErrorCode::kConfig, "config.assets must be an array");
    for (const auto& a : list) {
      check_keys(a, {"name", "csv", "synthetic"}, "asset");
      AssetSpec spec;
      read(a, "name", spec.name, "asset");
      if (a.contains("csv")) {
        std::string path;
        read(a, "csv", path, "asset");
        std::filesystem::path p(path);
        spec.csv = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
      }
      if (a.contains("synthetic")) {
        const auto& s = a.at("synthetic");
        check_keys(s, {"kind", "days", "seed", "params"}, "synthetic");
        std::string kind = "trend";
        read(s, "kind", kind, "synthetic");
        SyntheticSpec syn;
        syn.kind = parse_synthetic_kind(kind);
        read(s, "days", syn.days, "synthetic");
        if (s.contains("seed")) {
          std::uint64_t v = 0;
          read(s, "seed", v, "synthetic");
          syn.seed = v;
        }
        syn.params = s.contains("params") ? read_params(s.at("params"), syn.kind) : default_synthetic_params(syn.kind);
        spec.synthetic = syn;
      }
      c.assets.push_back(std::move(spec));
    }
  }
  read_date(root, "train_end", c.train_end);
  read_date(root, "test_start", c.test_start);
  read_date(root, "test_end", c.test_end);

  if (root.contains("tokenizer")) {
    const auto& t = root.at("tokenizer");
    check_keys(t, {"kind", "context", "alpha"}, "tokenizer");
    std::string kind(to_string(c.tokenizer.kind));
    read(t, "kind", kind, "tokenizer");
    try {
      c.tokenizer.kind = parse_tokenizer_kind(kind);
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, e.what());
    }
    read(t, "context", c.tokenizer.context, "tokenizer");
    read(t, "alpha", c.tokenizer.noise.alpha, "tokenizer");
  }
  c.model.context = c.tokenizer.context;

  if (root.contains("labels")) {
    const auto& l = root.at("labels");
    check_keys(l, {"tau", "weights"}, "labels");
    read(l, "tau", c.tau, "labels");
    read(l, "weights", c.weights.w, "labels");
  }
  if (root.contains("model")) {
    const auto& m = root.at("model");
    const std::string w = "model";
    check_keys(m, {"layers", "heads", "d_model", "d_ff", "dropout", "learning_rate", "epochs", "clip_norm",
                   "batch_size", "init_std"},
               w);
    read(m, "layers", c.model.layers, w);
    read(m, "heads", c.model.heads, w);
    read(m, "d_model", c.model.d_model, w);
    read(m, "d_ff", c.model.d_ff, w);
    read(m, "dropout", c.model.dropout, w);
    read(m, "learning_rate", c.model.learning_rate, w);
    read(m, "epochs", c.model.epochs, w);
    read(m, "clip_norm", c.model.clip_norm, w);
    read(m, "batch_size", c.model.batch_size, w);
    read(m, "init_std", c.model.init_std, w);
  }
  if (root.contains("lora")) {
    const auto& l = root.at("lora");
    check_keys(l, {"enabled", "rank", "targets", "epochs", "learning_rate"}, "lora");
    read(l, "enabled", c.lora.enabled, "lora");
    read(l, "rank", c.lora.rank, "lora");
    read(l, "targets", c.lora.targets, "lora");
    read(l, "epochs", c.lora.epochs, "lora");
    read(l, "learning_rate", c.lora.learning_rate, "lora");
  }
  if (root.contains("backtest")) {
    const auto& b = root.at("backtest");
    check_keys(b, {"cost_bps", "tax_rate", "tax_period", "initial_capital", "risk_free"}, "backtest");
    read(b, "cost_bps", c.cost_bps, "backtest");
    read(b, "tax_rate", c.tax.rate, "backtest");
    read(b, "tax_period", c.tax.period, "backtest");
    read(b, "initial_capital", c.initial_capital, "backtest");
    read(b, "risk_free", c.risk_free, "backtest");
  }
  if (root.contains("sweep")) {
    const auto& s = root.at("sweep");
    check_keys(s, {"taus", "bps", "retrain"}, "sweep");
    read(s, "taus", c.sweep.taus, "sweep");
    read(s, "bps", c.sweep.bps, "sweep");
    read(s, "retrain", c.sweep.retrain, "sweep");
  }
  if (root.contains("out")) {
    std::string out;
    read(root, "out", out, "config");
    std::filesystem::path p(out);
    c.out = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path());
}

std::string to_json(const RunConfig& c) {
  json assets = json::array();
  for (std::size_t i = 0; i < c.assets.size(); ++i) {
    const auto& a = c.assets[i];
    json entry{{"name", a.name}};
    if (a.csv) entry["csv"] = a.csv->generic_string();
    if (a.synthetic) {
      entry["synthetic"] = {{"kind", std::string(to_string(a.synthetic->kind))},
                            {"days", a.synthetic->days},
                            {"seed", c.asset_seed(i)},
                            {"params", params_json(a.synthetic->params)}};
    }
    assets.push_back(entry);
  }
  json root{
      {"assets", assets},
      {"train_end", format_date(c.train_end)},
      {"test_start", format_date(c.test_start)},
      {"test_end", format_date(c.test_end)},
      {"tokenizer",
       {{"kind", std::string(to_string(c.tokenizer.kind))},
        {"context", c.tokenizer.context},
        {"alpha", c.tokenizer.noise.alpha}}},
      {"labels", {{"tau", c.tau}, {"weights", c.weights.w}}},
      {"model",
       {{"layers", c.model.layers},
        {"heads", c.model.heads},
        {"d_model", c.model.d_model},
        {"d_ff", c.model.d_ff},
        {"dropout", c.model.dropout},
        {"learning_rate", c.model.learning_rate},
        {"epochs", c.model.epochs},
        {"clip_norm", c.model.clip_norm},
        {"batch_size", c.model.batch_size},
        {"init_std", c.model.init_std}}},
      {"lora",
       {{"enabled", c.lora.enabled},
        {"rank", c.lora.rank},
        {"targets", c.lora.targets},
        {"epochs", c.lora.epochs},
        {"learning_rate", c.lora.learning_rate}}},
      {"backtest",
       {{"cost_bps", c.cost_bps},
        {"tax_rate", c.tax.rate},
        {"tax_period", c.tax.period},
        {"initial_capital", c.initial_capital},
        {"risk_free", c.risk_free}}},
      {"sweep", {{"taus", c.sweep.taus}, {"bps", c.sweep.bps}, {"retrain", c.sweep.retrain}}},
      {"seed", c.seed},
      {"out", c.out.generic_string()},
  };
  return root.dump(2) + "\n";
}

RunConfig default_run_config() {
  RunConfig c;
  const std::size_t days = 1300;  // 2019-01-02 through late 2023
  for (auto kind : {SyntheticKind::kTrend, SyntheticKind::kMeanRevert, SyntheticKind::kCrash, SyntheticKind::kGbm}) {
    SyntheticSpec s;
    s.kind = kind;
    s.days = days;
    s.params = default_synthetic_params(kind);
    c.assets.push_back({std::string(to_string(kind)), std::nullopt, s});
  }
  return c;
}

}  // namespace kinematic
