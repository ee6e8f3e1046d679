#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "kinematic/pipeline.hpp"
#include "test_support.hpp"

using namespace kinematic;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "kinematic_pipeline_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Two short synthetic assets: one year of training data, half a year of test data.
std::string small_config_json(const std::string& extra = "") {
  return R"({
    "assets": [{"name": "TRD", "synthetic": {"kind": "trend", "days": 400}},
               {"name": "CRS", "synthetic": {"kind": "crash", "days": 400}}],
    "train_end": "2019-12-31", "test_start": "2020-01-01", "test_end": "2020-06-30",
    "tokenizer": {"context": 8},
    "model": {"epochs": 2, "d_model": 16, "d_ff": 32},
    "sweep": {"taus": [0.005, 0.01]},
    "seed": 3)" + extra + "}";
}

RunConfig small_config(const fs::path& out, const std::string& extra = "") {
  auto c = parse_run_config(small_config_json(extra));
  c.out = out;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return files;
}

ErrorCode error_of(const RunConfig& c, Command cmd, std::string* message = nullptr) {
  try {
    run_pipeline(c, cmd);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInternal;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + KINEMATIC_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("enrich then tokenize produces anchored windows") {
  const auto out = scratch("anchored");
  const auto c = small_config(out);
  run_pipeline(c, Command::kEnrich);
  run_pipeline(c, Command::kTokenize);
  for (const auto* asset : {"TRD", "CRS"}) {
    for (const auto* file : {"train_tokens.csv", "test_tokens.csv"}) {
      std::ifstream in(out / "tokenize" / asset / file);
      REQUIRE(in);
      const auto windows = read_token_csv(in);
      REQUIRE_FALSE(windows.empty());
      for (const auto& w : windows) {
        REQUIRE(w.tokens.size() == 8);
        CHECK(w.tokens[0][kPositionChannel] == 0.0);
        CHECK(w.tokens[0][kVolumeLevelChannel] == 0.0);
      }
    }
    CHECK(fs::exists(out / "enrich" / asset / "history.csv"));
    CHECK(fs::exists(out / "tokenize" / asset / "train_labels.csv"));
  }
  CHECK(fs::exists(out / "tokenize" / "stats.txt"));
  CHECK(fs::exists(out / "tokenize" / "manifest.json"));
}

TEST_CASE("missing upstream artifacts name the prior command") {
  const auto out = scratch("dependency");
  const auto c = small_config(out);
  std::string message;
  CHECK(error_of(c, Command::kTokenize, &message) == ErrorCode::kDependency);
  CHECK(message.find("enrich") != std::string::npos);
  CHECK(error_of(c, Command::kTrain, &message) == ErrorCode::kDependency);
  CHECK(message.find("tokenize") != std::string::npos);
  run_pipeline(c, Command::kEnrich);
  run_pipeline(c, Command::kTokenize);
  CHECK(error_of(c, Command::kBacktest, &message) == ErrorCode::kDependency);
  CHECK(message.find("train") != std::string::npos);
  CHECK(error_of(c, Command::kDiagnose, &message) == ErrorCode::kDependency);
  CHECK(message.find("backtest") != std::string::npos);
}

TEST_CASE("backtest refuses stats fitted on test-period data") {
  const auto out = scratch("leakage");
  auto fit = small_config(out);
  fit.train_end = parse_date("2020-03-31");
  fit.test_start = parse_date("2020-04-01");
  run_pipeline(fit, Command::kEnrich);
  run_pipeline(fit, Command::kTokenize);
  run_pipeline(fit, Command::kTrain);
  // Same artifacts, evaluated over a window that starts before the fit cutoff.
  auto evaluate = fit;
  evaluate.train_end = parse_date("2019-12-31");
  evaluate.test_start = parse_date("2020-01-01");
  std::string message;
  CHECK(error_of(evaluate, Command::kBacktest, &message) == ErrorCode::kLeakage);
  CHECK(message.find("2020-03") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "backtest" / "metrics.csv"));

  // A config whose own cutoff overlaps the test period is refused up front.
  auto overlap = fit;
  overlap.train_end = overlap.test_start;
  CHECK(error_of(overlap, Command::kRun) == ErrorCode::kLeakage);
}

TEST_CASE("retokenizing invalidates the trained model") {
  const auto out = scratch("stale");
  auto c = small_config(out);
  run_pipeline(c, Command::kEnrich);
  run_pipeline(c, Command::kTokenize);
  run_pipeline(c, Command::kTrain);
  c.tau = 0.02;
  c.tokenizer.noise.alpha = 2.0;
  run_pipeline(c, Command::kEnrich);
  run_pipeline(c, Command::kTokenize);
  CHECK(error_of(c, Command::kBacktest) == ErrorCode::kDependency);
}

TEST_CASE("reruns are byte-identical") {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  run_pipeline(small_config(a, R"(, "lora": {"enabled": true, "epochs": 1})"), Command::kRun);
  run_pipeline(small_config(b, R"(, "lora": {"enabled": true, "epochs": 1})"), Command::kRun);
  const auto first = snapshot(a);
  const auto second = snapshot(b);
  CHECK(first.size() > 20);
  CHECK(first == second);
  // Running again in place rewrites identical bytes.
  run_pipeline(small_config(a, R"(, "lora": {"enabled": true, "epochs": 1})"), Command::kRun);
  CHECK(snapshot(a) == first);
  CHECK(first.count("train/base.json") == 1);
  for (const auto& [path, bytes] : first) CHECK(path.find(".tmp") == std::string::npos);
}

TEST_CASE("a different seed changes the model") {
  const auto a = scratch("seed_a");
  const auto b = scratch("seed_b");
  auto ca = small_config(a);
  auto cb = small_config(b);
  cb.model.seed = 99;
  for (auto cmd : {Command::kEnrich, Command::kTokenize, Command::kTrain}) {
    run_pipeline(ca, cmd);
    run_pipeline(cb, cmd);
  }
  CHECK(read_file(a / "tokenize" / "stats.txt") == read_file(b / "tokenize" / "stats.txt"));
  CHECK(read_file(a / "train" / "model.json") != read_file(b / "train" / "model.json"));
}

TEST_CASE("csv assets flow through the pipeline") {
  const auto out = scratch("csv");
  auto synth = small_config(out);
  const auto written = write_synthetic_assets(synth);
  CHECK(written.size() == 4);
  const std::string json = R"({
    "assets": [{"name": "TRD", "csv": "data/TRD.csv"}],
    "train_end": "2019-12-31", "test_start": "2020-01-01", "test_end": "2020-06-30",
    "tokenizer": {"context": 8}, "model": {"epochs": 1, "d_model": 16, "d_ff": 32}, "out": "csvrun"})";
  write_text(out / "config.json", json);
  const auto c = load_run_config(out / "config.json");
  CHECK_NOTHROW(run_pipeline(c, Command::kRun));
  CHECK(fs::exists(out / "csvrun" / "diagnose" / "TRD" / "confusion.csv"));
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("cli");
  const auto good = dir / "good.json";
  write_text(good, small_config_json(R"(, "out": "run")"));
  CHECK(run_cli("--config \"" + good.string() + "\" enrich") == 0);
  CHECK(fs::exists(dir / "run" / "enrich" / "manifest.json"));
  CHECK(run_cli("--config \"" + good.string() + "\" train") == 6);
  CHECK(run_cli("--config \"" + good.string() + "\" --out \"" + (dir / "synth").string() + "\" synth --kind gbm --days 50") == 0);
  CHECK(fs::exists(dir / "synth" / "data" / "gbm.csv"));

  const auto broken = dir / "broken.json";
  write_text(broken, "{ \"assets\": [");
  CHECK(run_cli("--config \"" + broken.string() + "\" enrich") == 2);
  CHECK(run_cli("--config \"" + (dir / "absent.json").string() + "\" enrich") == 2);
  CHECK(run_cli("frobnicate") == 2);

  const auto unknown = dir / "unknown.json";
  write_text(unknown, R"({"colour": "blue"})");
  CHECK(run_cli("--config \"" + unknown.string() + "\" enrich") == 7);

  const auto leak = dir / "leak.json";
  write_text(leak, small_config_json(R"(, "out": "leak", "train_end": "2020-02-01")"));
  CHECK(run_cli("--config \"" + leak.string() + "\" tokenize") == 4);

  const auto bad_csv = dir / "bad.csv";
  write_text(bad_csv, "date,open,high,low,close,volume\n2020-01-02,10,9,11,10,5\n");
  const auto data_cfg = dir / "data.json";
  write_text(data_cfg, R"({"assets": [{"name": "BAD", "csv": "bad.csv"}], "out": "bad"})");
  CHECK(run_cli("--config \"" + data_cfg.string() + "\" enrich") == 3);
}

TEST_CASE("default four-kind pipeline completes in time with every artifact") {
  const auto out = scratch("default");
  auto c = default_run_config();
  c.out = out;
  c.lora.enabled = true;
  const auto start = std::chrono::steady_clock::now();
  const auto written = run_pipeline(c, Command::kRun);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  MESSAGE("default pipeline took ", seconds, " s");
  CHECK(seconds < 300.0);
  for (const auto& p : written) CHECK(fs::exists(out / p));
  for (const auto& a : c.assets) {
    for (const auto* f : {"enrich/{}/history.csv", "enrich/{}/kinematics.csv", "tokenize/{}/train_tokens.csv",
                          "tokenize/{}/test_tokens.csv", "backtest/{}/predictions.csv", "backtest/{}/blotter.csv",
                          "backtest/{}/equity.csv", "backtest/{}/metrics.txt", "diagnose/{}/distribution.csv",
                          "diagnose/{}/confusion.csv", "diagnose/{}/calibration.csv", "sweep/{}/bps_sweep.csv"}) {
      std::string path(f);
      path.replace(path.find("{}"), 2, a.name);
      INFO(path);
      CHECK(fs::exists(out / path));
    }
  }
  for (const auto* f : {"tokenize/stats.txt", "train/model.json", "train/base.json", "train/training_log.csv",
                        "backtest/metrics.csv", "diagnose/equilibrium.csv", "sweep/tau_sweep.csv"}) {
    INFO(f);
    CHECK(fs::exists(out / f));
  }
  for (const auto* stage : {"enrich", "tokenize", "train", "backtest", "diagnose", "sweep"}) {
    CHECK(fs::exists(out / stage / "manifest.json"));
  }
}
