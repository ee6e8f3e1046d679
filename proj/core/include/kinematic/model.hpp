#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinematic/labeling.hpp"
#include "kinematic/tokenizer.hpp"

namespace kinematic {

using Rng = std::mt19937_64;

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t d_model = 32;
  std::size_t d_ff = 128;
  std::size_t context = 16;
  std::size_t channels = kTokenChannels;
  double dropout = 0.1;
  double learning_rate = 6e-4;
  std::size_t epochs = 5;
  double clip_norm = 1.0;
  std::size_t batch_size = 16;
  std::uint64_t seed = 7;
  double init_std = 0.02;

  /// L=4, H=8, d_model=512, d_ff=2048, T=64.
  static ModelConfig paper_scale();
  void validate() const;
};

/// Low-rank update of a linear map: W' = W + A B with A (d_in x r), B (r x d_out).
struct LowRankAdapter {
  Eigen::MatrixXd down;  // A
  Eigen::MatrixXd up;    // B
};

/// y = x W + b (+ x A B), rows are positions.
struct Linear {
  Eigen::MatrixXd weight;
  Eigen::MatrixXd bias;  // 1 x d_out
  std::optional<LowRankAdapter> adapter;
};

struct LayerNorm {
  Eigen::MatrixXd gamma;  // 1 x d
  Eigen::MatrixXd beta;   // 1 x d
};

struct Block {
  LayerNorm attn_norm;
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  LayerNorm ff_norm;
  Linear ff_in;
  Linear ff_out;
};

struct ModelParameters {
  ModelConfig config;
  Linear embed;
  std::vector<Block> blocks;
  LayerNorm final_norm;
  Linear head;
  /// Set by apply_lora: only adapters and the class head are trainable.
  bool base_frozen = false;
  std::size_t lora_rank = 0;
  std::vector<std::size_t> lora_targets;
};

struct TensorRef {
  std::string name;
  Eigen::MatrixXd* tensor;
  bool trainable;
};

/// Every tensor in a fixed order with its trainability under the current freeze state.
std::vector<TensorRef> tensors(ModelParameters& params);
std::size_t parameter_count(const ModelParameters& params);
std::size_t adapter_parameter_count(const ModelParameters& params);

/// Gaussian(0, init_std) weights, zero biases, unit LayerNorm gains.
ModelParameters init_model(const ModelConfig& config);
/// Same shapes, all zeros (gradient accumulator).
ModelParameters zeros_like(const ModelParameters& params);

struct ClassProbabilities {
  std::array<double, kNumClasses> p{};
  double operator[](std::size_t i) const { return p[i]; }
};

struct LinearCache {
  Eigen::MatrixXd low_rank;  // x A, when an adapter is attached
};

struct LayerNormCache {
  Eigen::MatrixXd normalized;
  Eigen::VectorXd inv_std;
};

struct BlockCache {
  Eigen::MatrixXd input;
  LayerNormCache attn_norm;
  Eigen::MatrixXd attn_in;
  LinearCache query, key, value, output;
  Eigen::MatrixXd q_rot, k_rot, v;
  std::vector<Eigen::MatrixXd> scores;  // per head, scaled logits; entries above the diagonal are 0
  std::vector<Eigen::MatrixXd> probs;   // per head
  Eigen::MatrixXd attn_concat;
  Eigen::MatrixXd attn_mask;  // dropout scale per entry, empty when not training
  Eigen::MatrixXd mid;        // residual stream after attention
  LayerNormCache ff_norm;
  Eigen::MatrixXd ff_norm_out;
  LinearCache ff_in, ff_out;
  Eigen::MatrixXd pre_activation;
  Eigen::MatrixXd activation;
  Eigen::MatrixXd ff_mask;
  Eigen::MatrixXd out;
};

struct ForwardCache {
  Eigen::MatrixXd input;
  LinearCache embed;
  Eigen::MatrixXd embedded;
  std::vector<BlockCache> blocks;
  LayerNormCache final_norm;
  /// Final normalized per-position representations (T x d_model).
  Eigen::MatrixXd hidden;
  LinearCache head;
  Eigen::RowVectorXd logits;
  ClassProbabilities probs;
};

/// Runs the causal transformer on a T x 9 token matrix. In train mode dropout
/// masks are drawn from `rng` (required when dropout > 0).
ForwardCache forward(const ModelParameters& params, const Eigen::MatrixXd& tokens, bool train_mode = false,
                     Rng* rng = nullptr);
ForwardCache forward(const ModelParameters& params, const TokenWindow& window, bool train_mode = false,
                     Rng* rng = nullptr);

Eigen::MatrixXd window_matrix(const TokenWindow& window);

/// -w_g log(max(p_g, 1e-12)).
double weighted_ce_loss(const ClassProbabilities& probs, ActionLabel label, const LossWeights& weights);

/// Analytic gradient of weighted_ce_loss w.r.t. every tensor. Frozen tensors get zeros.
ModelParameters backward_gradients(const ModelParameters& params, const ForwardCache& cache, ActionLabel label,
                                   const LossWeights& weights);

/// Argmax; any exact tie for the maximum resolves to Hold.
ActionLabel argmax_action(const ClassProbabilities& probs);
std::pair<ActionLabel, ClassProbabilities> predict_action(const ModelParameters& params, const TokenWindow& window);

/// Attaches zero-initialized adapters (B = 0, A Gaussian) to every linear map of
/// the target blocks and freezes the base. Empty targets means {0, 1, L-1}.
ModelParameters apply_lora(ModelParameters params, std::size_t rank, std::vector<std::size_t> targets = {});

// --- training -------------------------------------------------------------

/// base * (1 + cos(pi * progress)) / 2 for progress in [0, 1].
double cosine_learning_rate(double base, double progress);

/// Scales trainable gradients in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_gradients(ModelParameters& grads, double max_norm);

struct TrainingLog {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
  std::vector<double> epoch_learning_rate;
};

struct TrainResult {
  ModelParameters params;
  TrainingLog log;
};

/// Adam with cosine-annealed learning rate and global-norm clipping, shuffled
/// mini-batches of mean loss. Fully deterministic for a fixed seed.
TrainResult train(std::span<const LabeledWindow> data, const ModelConfig& config, const LossWeights& weights);
/// Continues from existing parameters (e.g. after apply_lora) using params.config's schedule.
TrainResult train_from(ModelParameters params, std::span<const LabeledWindow> data, const LossWeights& weights);

void write_training_log_csv(std::ostream& out, const TrainingLog& log);

// --- checkpoints ----------------------------------------------------------

/// JSON manifest (config, seed, freeze state, shapes) with hex-float tensor data;
/// round-trips bit-exactly.
void save_checkpoint(std::ostream& out, const ModelParameters& params);
ModelParameters load_checkpoint(std::istream& in);

}  // namespace kinematic
