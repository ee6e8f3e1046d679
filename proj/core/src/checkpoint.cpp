#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "kinematic/error.hpp"
#include "kinematic/model.hpp"

namespace kinematic {
namespace {

constexpr const char* kFormat = "kinematic-checkpoint";
constexpr int kVersion = 1;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double unhex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') fail(ErrorCode::kParse, fmt::format("bad tensor value '{}'", s));
  return v;
}

nlohmann::json config_json(const ModelConfig& c) {
  return {{"layers", c.layers},       {"heads", c.heads},         {"d_model", c.d_model},
          {"d_ff", c.d_ff},           {"context", c.context},     {"channels", c.channels},
          {"dropout", hex(c.dropout)}, {"learning_rate", hex(c.learning_rate)},
          {"epochs", c.epochs},       {"clip_norm", hex(c.clip_norm)}, {"batch_size", c.batch_size},
          {"seed", c.seed},           {"init_std", hex(c.init_std)}};
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.d_model = j.at("d_model");
  c.d_ff = j.at("d_ff");
  c.context = j.at("context");
  c.channels = j.at("channels");
  c.dropout = unhex(j.at("dropout"));
  c.learning_rate = unhex(j.at("learning_rate"));
  c.epochs = j.at("epochs");
  c.clip_norm = unhex(j.at("clip_norm"));
  c.batch_size = j.at("batch_size");
  c.seed = j.at("seed");
  c.init_std = unhex(j.at("init_std"));
  return c;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParameters& params) {
  ModelParameters copy = params;
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["config"] = config_json(params.config);
  j["seed"] = params.config.seed;
  j["base_frozen"] = params.base_frozen;
  j["lora_rank"] = params.lora_rank;
  j["lora_targets"] = params.lora_targets;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& t : tensors(copy)) {
    nlohmann::json data = nlohmann::json::array();
    const Eigen::MatrixXd& m = *t.tensor;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(hex(m(i, k)));
    list.push_back({{"name", t.name}, {"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}});
  }
  j["tensors"] = std::move(list);
  out << j.dump(1) << '\n';
}

ModelParameters load_checkpoint(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, fmt::format("checkpoint is not valid JSON: {}", e.what()));
  }
  try {
    if (j.at("format") != kFormat || j.at("version") != kVersion) fail(ErrorCode::kParse, "unsupported checkpoint format");
    ModelParameters params = init_model(config_from(j.at("config")));
    const std::size_t rank = j.at("lora_rank");
    if (rank > 0) params = apply_lora(std::move(params), rank, j.at("lora_targets").get<std::vector<std::size_t>>());
    params.base_frozen = j.at("base_frozen");
    auto refs = tensors(params);
    const auto& list = j.at("tensors");
    if (list.size() != refs.size()) fail(ErrorCode::kParse, "checkpoint tensor count does not match its config");
    for (std::size_t t = 0; t < refs.size(); ++t) {
      const auto& entry = list[t];
      if (entry.at("name") != refs[t].name) {
        fail(ErrorCode::kParse, fmt::format("checkpoint tensor {} is '{}', expected '{}'", t,
                                            entry.at("name").get<std::string>(), refs[t].name));
      }
      Eigen::MatrixXd& m = *refs[t].tensor;
      const auto& shape = entry.at("shape");
      if (shape.at(0) != m.rows() || shape.at(1) != m.cols()) fail(ErrorCode::kParse, fmt::format("shape mismatch for {}", refs[t].name));
      const auto& data = entry.at("data");
      if (data.size() != static_cast<std::size_t>(m.size())) fail(ErrorCode::kParse, fmt::format("size mismatch for {}", refs[t].name));
      std::size_t idx = 0;
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = unhex(data[idx++].get<std::string>());
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, fmt::format("malformed checkpoint: {}", e.what()));
  }
}

}  // namespace kinematic
