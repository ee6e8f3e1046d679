#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kinematic/config.hpp"

namespace kinematic {

enum class Command { kEnrich, kTokenize, kTrain, kBacktest, kDiagnose, kSweep, kRun };
std::string_view to_string(Command command);
Command parse_command(std::string_view text);

std::uint64_t fnv1a(std::string_view bytes);
std::string hash_hex(std::string_view bytes);

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Executes one stage (or all of them for kRun) and returns the artifacts written,
/// relative to the output directory.
std::vector<std::filesystem::path> run_pipeline(const RunConfig& config, Command command);

/// Writes each synthetic asset of the config as an OHLCV CSV plus its regimes under out/data.
std::vector<std::filesystem::path> write_synthetic_assets(const RunConfig& config);

/// Per-stage artifact directories.
inline constexpr std::string_view kEnrichDir = "enrich";
inline constexpr std::string_view kTokenizeDir = "tokenize";
inline constexpr std::string_view kTrainDir = "train";
inline constexpr std::string_view kBacktestDir = "backtest";
inline constexpr std::string_view kDiagnoseDir = "diagnose";
inline constexpr std::string_view kSweepDir = "sweep";
inline constexpr std::string_view kManifestName = "manifest.json";

}  // namespace kinematic
