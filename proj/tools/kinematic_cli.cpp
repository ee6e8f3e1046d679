#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "kinematic/config.hpp"
#include "kinematic/error.hpp"
#include "kinematic/pipeline.hpp"

namespace {

using namespace kinematic;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return 2;
    case ErrorCode::kData:
    case ErrorCode::kShape:
    case ErrorCode::kGridOrder:
    case ErrorCode::kInsufficientData:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kDegenerateStats: return 3;
    case ErrorCode::kLeakage: return 4;
    case ErrorCode::kNumerical: return 5;
    case ErrorCode::kDependency: return 6;
    case ErrorCode::kConfig: return 7;
    case ErrorCode::kInternal: return 1;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous kinematic tokenization and trading pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the run seed");
  app.add_option("--out", out, "Override the output directory");

  auto* synth = app.add_subcommand("synth", "Write synthetic OHLCV CSVs to <out>/data");
  std::string kind;
  std::size_t days = 1300;
  synth->add_option("--kind", kind, "Replace the configured assets with one series of this kind")
      ->check(CLI::IsMember({"trend", "mean-revert", "crash", "gbm"}));
  synth->add_option("--days", days, "Series length for --kind")->check(CLI::PositiveNumber);

  for (const char* name : {"enrich", "tokenize", "train", "backtest", "diagnose", "sweep", "run"}) {
    app.add_subcommand(name, fmt::format("Run the {} stage", name));
  }
  app.get_subcommand("run")->description("Run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig config = config_path.empty() ? default_run_config() : load_run_config(config_path);
    if (seed) {
      config.seed = *seed;
      config.model.seed = *seed;
    }
    if (!out.empty()) config.out = out;

    const auto* sub = app.get_subcommands().front();
    std::vector<std::filesystem::path> written;
    if (sub->get_name() == "synth") {
      if (!kind.empty()) {
        SyntheticSpec spec;
        spec.kind = parse_synthetic_kind(kind);
        spec.days = days;
        spec.params = default_synthetic_params(spec.kind);
        config.assets = {{kind, std::nullopt, spec}};
      }
      config.validate();
      written = write_synthetic_assets(config);
    } else {
      written = run_pipeline(config, parse_command(sub->get_name()));
    }
    for (const auto& p : written) std::cout << (config.out / p).string() << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
