#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kinematic/backtest.hpp"
#include "kinematic/diagnostics.hpp"
#include "kinematic/ingest.hpp"
#include "kinematic/labeling.hpp"
#include "kinematic/model.hpp"
#include "kinematic/tokenizer.hpp"

namespace kinematic {

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kTrend;
  std::size_t days = 0;
  /// Defaults to run seed + asset position + 1.
  std::optional<std::uint64_t> seed;
  SyntheticParams params;
};

struct AssetSpec {
  std::string name;
  /// Exactly one of csv / synthetic is set.
  std::optional<std::filesystem::path> csv;
  std::optional<SyntheticSpec> synthetic;
};

struct LoraSettings {
  bool enabled = false;
  std::size_t rank = 4;
  /// Empty selects blocks {0, 1, L-1}.
  std::vector<std::size_t> targets;
  std::size_t epochs = 3;
  double learning_rate = 1e-3;
};

struct SweepSettings {
  std::vector<double> taus{0.0025, 0.005, 0.01, 0.02};
  std::vector<double> bps{0.0, 5.0, 10.0, 20.0};
  /// Re-label and re-train per tau point, then backtest.
  bool retrain = false;
};

struct RunConfig {
  std::vector<AssetSpec> assets;
  Date train_end = parse_date("2022-12-31");
  Date test_start = parse_date("2023-01-01");
  Date test_end = parse_date("2023-12-29");
  TokenizerConfig tokenizer;
  double tau = 0.01;
  LossWeights weights;
  ModelConfig model;
  LoraSettings lora;
  double cost_bps = 5.0;
  TaxSchedule tax;
  double initial_capital = 10000.0;
  double risk_free = kDefaultRiskFree;
  std::uint64_t seed = 7;
  std::filesystem::path out = "runs/default";
  SweepSettings sweep;

  /// Throws config errors, or a leakage error when train_end >= test_start.
  void validate() const;
  std::uint64_t asset_seed(std::size_t index) const;
};

/// Relative csv paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical JSON rendering (sorted keys, resolved seeds).
std::string to_json(const RunConfig& config);

/// Four synthetic assets, one per kind, spanning the default cutoff dates.
RunConfig default_run_config();

}  // namespace kinematic
