#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "kinematic/error.hpp"
#include "kinematic/model.hpp"

namespace kinematic {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

}  // namespace

double cosine_learning_rate(double base, double progress) {
  progress = std::clamp(progress, 0.0, 1.0);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double clip_gradients(ModelParameters& grads, double max_norm) {
  auto refs = tensors(grads);
  double sq = 0.0;
  for (const auto& t : refs)
    if (t.trainable) sq += t.tensor->squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& t : refs)
      if (t.trainable) *t.tensor *= factor;
  }
  return norm;
}

TrainResult train(std::span<const LabeledWindow> data, const ModelConfig& config, const LossWeights& weights) {
  return train_from(init_model(config), data, weights);
}

TrainResult train_from(ModelParameters params, std::span<const LabeledWindow> data, const LossWeights& weights) {
  const ModelConfig& cfg = params.config;
  cfg.validate();
  weights.validate();
  if (data.empty()) fail(ErrorCode::kEmptyInput, "training needs at least one labeled window");

  std::vector<Eigen::MatrixXd> inputs;
  inputs.reserve(data.size());
  for (const auto& d : data) inputs.push_back(window_matrix(d.window));

  Rng rng(cfg.seed + 1);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  auto param_refs = tensors(params);
  std::vector<Eigen::MatrixXd> first_moment, second_moment;
  for (const auto& t : param_refs) {
    first_moment.push_back(Eigen::MatrixXd::Zero(t.tensor->rows(), t.tensor->cols()));
    second_moment.push_back(Eigen::MatrixXd::Zero(t.tensor->rows(), t.tensor->cols()));
  }

  const std::size_t batches_per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches_per_epoch * cfg.epochs;
  std::size_t step = 0;
  TrainingLog log;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t correct = 0;
    double epoch_lr = 0.0;
    for (std::size_t batch = 0; batch < batches_per_epoch; ++batch) {
      const std::size_t begin = batch * cfg.batch_size;
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_count = 1.0 / static_cast<double>(end - begin);

      ModelParameters grad_sum = zeros_like(params);
      auto sum_refs = tensors(grad_sum);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& sample = data[order[i]];
        try {
          const auto cache = forward(params, inputs[order[i]], true, &rng);
          batch_loss += weighted_ce_loss(cache.probs, sample.label, weights);
          if (argmax_action(cache.probs) == sample.label) ++correct;
          auto grad = backward_gradients(params, cache, sample.label, weights);
          auto refs = tensors(grad);
          for (std::size_t t = 0; t < refs.size(); ++t) *sum_refs[t].tensor += *refs[t].tensor;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kNumerical) throw;
          fail(ErrorCode::kNumerical, fmt::format("epoch {} batch {} sample {}: {}", epoch, batch, order[i], e.what()));
        }
      }
      batch_loss *= inv_count;
      if (!std::isfinite(batch_loss)) {
        fail(ErrorCode::kNumerical, fmt::format("non-finite loss in epoch {} batch {}", epoch, batch));
      }
      for (auto& t : sum_refs) *t.tensor *= inv_count;
      clip_gradients(grad_sum, cfg.clip_norm);

      const double lr = cosine_learning_rate(cfg.learning_rate, static_cast<double>(step) / static_cast<double>(total_steps));
      if (batch == 0) epoch_lr = lr;
      ++step;
      const double bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
      for (std::size_t t = 0; t < param_refs.size(); ++t) {
        if (!param_refs[t].trainable) continue;
        const Eigen::MatrixXd& g = *sum_refs[t].tensor;
        first_moment[t] = kAdamBeta1 * first_moment[t] + (1.0 - kAdamBeta1) * g;
        second_moment[t] = kAdamBeta2 * second_moment[t] + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
        *param_refs[t].tensor -= (lr / bias1) * first_moment[t].cwiseQuotient(
                                     ((second_moment[t] / bias2).cwiseSqrt().array() + kAdamEps).matrix());
      }
      epoch_loss += batch_loss * static_cast<double>(end - begin);
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
    log.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(data.size()));
    log.epoch_learning_rate.push_back(epoch_lr);
  }
  return {std::move(params), std::move(log)};
}

void write_training_log_csv(std::ostream& out, const TrainingLog& log) {
  out << "epoch,loss,accuracy,learning_rate\n";
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", e, log.epoch_loss[e], log.epoch_accuracy[e],
                       log.epoch_learning_rate[e]);
  }
}

}  // namespace kinematic
