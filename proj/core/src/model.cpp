#include "kinematic/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "kinematic/error.hpp"

namespace kinematic {
namespace {

using Eigen::MatrixXd;

constexpr double kLayerNormEps = 1e-5;
constexpr double kProbabilityFloor = 1e-12;
constexpr double kRopeBase = 10000.0;

MatrixXd gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  return m;
}

Linear make_linear(std::size_t in, std::size_t out, double stddev, Rng& rng) {
  return Linear{gaussian(in, out, stddev, rng), MatrixXd::Zero(1, out), std::nullopt};
}

LayerNorm make_norm(std::size_t d) { return LayerNorm{MatrixXd::Ones(1, d), MatrixXd::Zero(1, d)}; }

void add_linear(std::vector<TensorRef>& out, const std::string& name, Linear& lin, bool base_trainable) {
  out.push_back({name + ".weight", &lin.weight, base_trainable});
  out.push_back({name + ".bias", &lin.bias, base_trainable});
  if (lin.adapter) {
    out.push_back({name + ".lora_a", &lin.adapter->down, true});
    out.push_back({name + ".lora_b", &lin.adapter->up, true});
  }
}

void add_norm(std::vector<TensorRef>& out, const std::string& name, LayerNorm& n, bool trainable) {
  out.push_back({name + ".gamma", &n.gamma, trainable});
  out.push_back({name + ".beta", &n.beta, trainable});
}

template <class Fn>
void for_each_linear(Block& b, Fn&& fn) {
  fn(b.query);
  fn(b.key);
  fn(b.value);
  fn(b.output);
  fn(b.ff_in);
  fn(b.ff_out);
}

// --- primitive ops ---------------------------------------------------------

MatrixXd linear_forward(const Linear& lin, const MatrixXd& x, LinearCache& cache) {
  MatrixXd y = x * lin.weight;
  y.rowwise() += lin.bias.row(0);
  if (lin.adapter) {
    cache.low_rank = x * lin.adapter->down;
    y.noalias() += cache.low_rank * lin.adapter->up;
  }
  return y;
}

/// Accumulates parameter gradients into `grad` and returns dL/dx.
MatrixXd linear_backward(const Linear& lin, Linear& grad, const MatrixXd& x, const LinearCache& cache,
                         const MatrixXd& dy, bool base_trainable) {
  if (base_trainable) {
    grad.weight.noalias() += x.transpose() * dy;
    grad.bias += dy.colwise().sum();
  }
  MatrixXd dx = dy * lin.weight.transpose();
  if (lin.adapter) {
    const MatrixXd dlow = dy * lin.adapter->up.transpose();
    grad.adapter->up.noalias() += cache.low_rank.transpose() * dy;
    grad.adapter->down.noalias() += x.transpose() * dlow;
    dx.noalias() += dlow * lin.adapter->down.transpose();
  }
  return dx;
}

MatrixXd layer_norm_forward(const LayerNorm& ln, const MatrixXd& x, LayerNormCache& cache) {
  const auto d = static_cast<double>(x.cols());
  cache.normalized.resize(x.rows(), x.cols());
  cache.inv_std.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() / d;
    const double var = (x.row(i).array() - mean).square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(i) = inv;
    cache.normalized.row(i) = (x.row(i).array() - mean) * inv;
  }
  MatrixXd y = cache.normalized.array().rowwise() * ln.gamma.row(0).array();
  y.rowwise() += ln.beta.row(0);
  return y;
}

MatrixXd layer_norm_backward(const LayerNorm& ln, LayerNorm& grad, const LayerNormCache& cache, const MatrixXd& dy,
                             bool trainable) {
  if (trainable) {
    grad.gamma += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
    grad.beta += dy.colwise().sum();
  }
  const MatrixXd dxhat = dy.array().rowwise() * ln.gamma.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  MatrixXd dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / d;
    const double mean_dx = dxhat.row(i).dot(cache.normalized.row(i)) / d;
    dx.row(i) = cache.inv_std(i) *
                (dxhat.row(i).array() - mean_d - cache.normalized.row(i).array() * mean_dx).matrix();
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

/// Rotates consecutive channel pairs of a T x head_dim block by position * theta_i.
/// `sign` = -1 applies the inverse rotation (used for gradients).
void rotate(Eigen::Ref<MatrixXd> block, double sign) {
  const Eigen::Index dim = block.cols();
  for (Eigen::Index pos = 0; pos < block.rows(); ++pos) {
    for (Eigen::Index i = 0; i + 1 < dim; i += 2) {
      const double theta = std::pow(kRopeBase, -static_cast<double>(i) / static_cast<double>(dim));
      const double angle = sign * static_cast<double>(pos) * theta;
      const double c = std::cos(angle), s = std::sin(angle);
      const double x0 = block(pos, i), x1 = block(pos, i + 1);
      block(pos, i) = x0 * c - x1 * s;
      block(pos, i + 1) = x0 * s + x1 * c;
    }
  }
}

MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  MatrixXd mask(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = keep(rng) ? scale : 0.0;
  return mask;
}

void check_finite(const MatrixXd& m, const char* where) {
  if (!m.allFinite()) fail(ErrorCode::kNumerical, fmt::format("non-finite activation in {}", where));
}

}  // namespace

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.layers = 4;
  c.heads = 8;
  c.d_model = 512;
  c.d_ff = 2048;
  c.context = 64;
  return c;
}

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < 1 || d_ff < 1 || context < 1 || channels < 1) {
    fail(ErrorCode::kConfig, "model dimensions must be at least 1");
  }
  if (d_model % heads != 0) fail(ErrorCode::kConfig, fmt::format("d_model {} not divisible by {} heads", d_model, heads));
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::kConfig, "dropout must be in [0, 1)");
  if (!(learning_rate > 0.0) || !(clip_norm > 0.0)) fail(ErrorCode::kConfig, "learning rate and clip norm must be positive");
  if (batch_size < 1) fail(ErrorCode::kConfig, "batch size must be at least 1");
}

std::vector<TensorRef> tensors(ModelParameters& params) {
  const bool base = !params.base_frozen;
  std::vector<TensorRef> out;
  add_linear(out, "embed", params.embed, base);
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    auto& b = params.blocks[l];
    const std::string p = fmt::format("blocks.{}.", l);
    add_norm(out, p + "attn_norm", b.attn_norm, base);
    add_linear(out, p + "query", b.query, base);
    add_linear(out, p + "key", b.key, base);
    add_linear(out, p + "value", b.value, base);
    add_linear(out, p + "output", b.output, base);
    add_norm(out, p + "ff_norm", b.ff_norm, base);
    add_linear(out, p + "ff_in", b.ff_in, base);
    add_linear(out, p + "ff_out", b.ff_out, base);
  }
  add_norm(out, "final_norm", params.final_norm, base);
  add_linear(out, "head", params.head, true);
  return out;
}

std::size_t parameter_count(const ModelParameters& params) {
  std::size_t n = 0;
  for (const auto& t : tensors(const_cast<ModelParameters&>(params))) n += static_cast<std::size_t>(t.tensor->size());
  return n;
}

std::size_t adapter_parameter_count(const ModelParameters& params) {
  std::size_t n = 0;
  for (const auto& t : tensors(const_cast<ModelParameters&>(params))) {
    if (t.name.ends_with(".lora_a") || t.name.ends_with(".lora_b")) n += static_cast<std::size_t>(t.tensor->size());
  }
  return n;
}

ModelParameters init_model(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const double s = config.init_std;
  ModelParameters p;
  p.config = config;
  p.embed = make_linear(config.channels, config.d_model, s, rng);
  for (std::size_t l = 0; l < config.layers; ++l) {
    Block b;
    b.attn_norm = make_norm(config.d_model);
    b.query = make_linear(config.d_model, config.d_model, s, rng);
    b.key = make_linear(config.d_model, config.d_model, s, rng);
    b.value = make_linear(config.d_model, config.d_model, s, rng);
    b.output = make_linear(config.d_model, config.d_model, s, rng);
    b.ff_norm = make_norm(config.d_model);
    b.ff_in = make_linear(config.d_model, config.d_ff, s, rng);
    b.ff_out = make_linear(config.d_ff, config.d_model, s, rng);
    p.blocks.push_back(std::move(b));
  }
  p.final_norm = make_norm(config.d_model);
  p.head = make_linear(config.d_model, kNumClasses, s, rng);
  return p;
}

ModelParameters zeros_like(const ModelParameters& params) {
  ModelParameters z = params;
  for (auto& t : tensors(z)) t.tensor->setZero();
  return z;
}

Eigen::MatrixXd window_matrix(const TokenWindow& window) {
  MatrixXd m(static_cast<Eigen::Index>(window.tokens.size()), static_cast<Eigen::Index>(kTokenChannels));
  for (std::size_t k = 0; k < window.tokens.size(); ++k)
    for (std::size_t c = 0; c < kTokenChannels; ++c) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = window.tokens[k][c];
  return m;
}

ForwardCache forward(const ModelParameters& params, const TokenWindow& window, bool train_mode, Rng* rng) {
  return forward(params, window_matrix(window), train_mode, rng);
}

ForwardCache forward(const ModelParameters& params, const MatrixXd& tokens, bool train_mode, Rng* rng) {
  const auto& cfg = params.config;
  if (static_cast<std::size_t>(tokens.rows()) != cfg.context || static_cast<std::size_t>(tokens.cols()) != cfg.channels) {
    fail(ErrorCode::kShape, fmt::format("expected a {}x{} token window, got {}x{}", cfg.context, cfg.channels,
                                        tokens.rows(), tokens.cols()));
  }
  const bool drop = train_mode && cfg.dropout > 0.0;
  if (drop && rng == nullptr) fail(ErrorCode::kConfig, "train-mode dropout needs a random generator");

  const auto T = static_cast<Eigen::Index>(cfg.context);
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const auto head_dim = static_cast<Eigen::Index>(cfg.d_model / cfg.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  ForwardCache cache;
  cache.input = tokens;
  cache.embedded = linear_forward(params.embed, tokens, cache.embed);
  MatrixXd h = cache.embedded;

  cache.blocks.resize(params.blocks.size());
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const Block& b = params.blocks[l];
    BlockCache& bc = cache.blocks[l];
    bc.input = h;
    bc.attn_in = layer_norm_forward(b.attn_norm, h, bc.attn_norm);
    bc.q_rot = linear_forward(b.query, bc.attn_in, bc.query);
    bc.k_rot = linear_forward(b.key, bc.attn_in, bc.key);
    bc.v = linear_forward(b.value, bc.attn_in, bc.value);
    bc.attn_concat = MatrixXd::Zero(T, static_cast<Eigen::Index>(cfg.d_model));
    bc.scores.assign(cfg.heads, MatrixXd::Zero(T, T));
    bc.probs.assign(cfg.heads, MatrixXd::Zero(T, T));
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      auto q = bc.q_rot.middleCols(hd * head_dim, head_dim);
      auto k = bc.k_rot.middleCols(hd * head_dim, head_dim);
      rotate(q, 1.0);
      rotate(k, 1.0);
      MatrixXd& s = bc.scores[static_cast<std::size_t>(hd)];
      MatrixXd& p = bc.probs[static_cast<std::size_t>(hd)];
      for (Eigen::Index i = 0; i < T; ++i) {
        double peak = -INFINITY;
        for (Eigen::Index j = 0; j <= i; ++j) {
          s(i, j) = scale * q.row(i).dot(k.row(j));
          peak = std::max(peak, s(i, j));
        }
        double total = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          p(i, j) = std::exp(s(i, j) - peak);
          total += p(i, j);
        }
        for (Eigen::Index j = 0; j <= i; ++j) p(i, j) /= total;
      }
      bc.attn_concat.middleCols(hd * head_dim, head_dim) = p * bc.v.middleCols(hd * head_dim, head_dim);
    }
    MatrixXd attn = linear_forward(b.output, bc.attn_concat, bc.output);
    if (drop) {
      bc.attn_mask = dropout_mask(attn.rows(), attn.cols(), cfg.dropout, *rng);
      attn = attn.cwiseProduct(bc.attn_mask);
    }
    bc.mid = h + attn;

    bc.ff_norm_out = layer_norm_forward(b.ff_norm, bc.mid, bc.ff_norm);
    bc.pre_activation = linear_forward(b.ff_in, bc.ff_norm_out, bc.ff_in);
    bc.activation = bc.pre_activation.unaryExpr([](double x) { return gelu(x); });
    MatrixXd ff = linear_forward(b.ff_out, bc.activation, bc.ff_out);
    if (drop) {
      bc.ff_mask = dropout_mask(ff.rows(), ff.cols(), cfg.dropout, *rng);
      ff = ff.cwiseProduct(bc.ff_mask);
    }
    bc.out = bc.mid + ff;
    h = bc.out;
  }

  cache.hidden = layer_norm_forward(params.final_norm, h, cache.final_norm);
  check_finite(cache.hidden, "transformer body");
  const MatrixXd last = cache.hidden.row(T - 1);
  MatrixXd logits = linear_forward(params.head, last, cache.head);
  cache.logits = logits.row(0);
  if (!cache.logits.allFinite()) fail(ErrorCode::kNumerical, "non-finite logits");

  const double peak = cache.logits.maxCoeff();
  double total = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    cache.probs.p[c] = std::exp(cache.logits(static_cast<Eigen::Index>(c)) - peak);
    total += cache.probs.p[c];
  }
  for (auto& v : cache.probs.p) v /= total;
  return cache;
}

double weighted_ce_loss(const ClassProbabilities& probs, ActionLabel label, const LossWeights& weights) {
  const std::size_t g = index_of(label);
  return -weights.w[g] * std::log(std::max(probs.p[g], kProbabilityFloor));
}

ModelParameters backward_gradients(const ModelParameters& params, const ForwardCache& cache, ActionLabel label,
                                   const LossWeights& weights) {
  const auto& cfg = params.config;
  const auto T = static_cast<Eigen::Index>(cfg.context);
  if (cache.blocks.size() != params.blocks.size() || cache.hidden.rows() != T ||
      cache.hidden.cols() != static_cast<Eigen::Index>(cfg.d_model)) {
    fail(ErrorCode::kInternal, "forward cache does not match the model parameters");
  }
  const bool base = !params.base_frozen;
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const auto head_dim = static_cast<Eigen::Index>(cfg.d_model / cfg.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  ModelParameters grad = zeros_like(params);

  const std::size_t g = index_of(label);
  MatrixXd dlogits = MatrixXd::Zero(1, static_cast<Eigen::Index>(kNumClasses));
  if (cache.probs.p[g] >= kProbabilityFloor) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      dlogits(0, static_cast<Eigen::Index>(c)) = weights.w[g] * (cache.probs.p[c] - (c == g ? 1.0 : 0.0));
    }
  }

  MatrixXd dhidden = MatrixXd::Zero(T, static_cast<Eigen::Index>(cfg.d_model));
  const MatrixXd last = cache.hidden.row(T - 1);
  dhidden.row(T - 1) = linear_backward(params.head, grad.head, last, cache.head, dlogits, true);

  MatrixXd dh = layer_norm_backward(params.final_norm, grad.final_norm, cache.final_norm, dhidden, base);

  for (std::size_t l = params.blocks.size(); l-- > 0;) {
    const Block& b = params.blocks[l];
    Block& gb = grad.blocks[l];
    const BlockCache& bc = cache.blocks[l];

    // Feed-forward branch.
    MatrixXd dff = dh;
    if (bc.ff_mask.size() > 0) dff = dff.cwiseProduct(bc.ff_mask);
    MatrixXd dact = linear_backward(b.ff_out, gb.ff_out, bc.activation, bc.ff_out, dff, base);
    MatrixXd dpre = dact.array() * bc.pre_activation.unaryExpr([](double x) { return gelu_grad(x); }).array();
    MatrixXd dnorm2 = linear_backward(b.ff_in, gb.ff_in, bc.ff_norm_out, bc.ff_in, dpre, base);
    MatrixXd dmid = dh + layer_norm_backward(b.ff_norm, gb.ff_norm, bc.ff_norm, dnorm2, base);

    // Attention branch.
    MatrixXd dattn = dmid;
    if (bc.attn_mask.size() > 0) dattn = dattn.cwiseProduct(bc.attn_mask);
    MatrixXd dconcat = linear_backward(b.output, gb.output, bc.attn_concat, bc.output, dattn, base);

    MatrixXd dq = MatrixXd::Zero(T, static_cast<Eigen::Index>(cfg.d_model));
    MatrixXd dk = dq;
    MatrixXd dv = dq;
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      const auto cols = [&](const MatrixXd& m) { return m.middleCols(hd * head_dim, head_dim); };
      const MatrixXd& p = bc.probs[static_cast<std::size_t>(hd)];
      const MatrixXd dout = cols(dconcat);
      dv.middleCols(hd * head_dim, head_dim) = p.transpose() * dout;
      const MatrixXd dp = dout * cols(bc.v).transpose();
      MatrixXd ds = MatrixXd::Zero(T, T);
      for (Eigen::Index i = 0; i < T; ++i) {
        double inner = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) inner += p(i, j) * dp(i, j);
        for (Eigen::Index j = 0; j <= i; ++j) ds(i, j) = p(i, j) * (dp(i, j) - inner);
      }
      ds *= scale;
      MatrixXd dq_rot = ds * cols(bc.k_rot);
      MatrixXd dk_rot = ds.transpose() * cols(bc.q_rot);
      rotate(dq_rot, -1.0);
      rotate(dk_rot, -1.0);
      dq.middleCols(hd * head_dim, head_dim) = dq_rot;
      dk.middleCols(hd * head_dim, head_dim) = dk_rot;
    }
    MatrixXd dnorm1 = linear_backward(b.query, gb.query, bc.attn_in, bc.query, dq, base);
    dnorm1 += linear_backward(b.key, gb.key, bc.attn_in, bc.key, dk, base);
    dnorm1 += linear_backward(b.value, gb.value, bc.attn_in, bc.value, dv, base);
    dh = dmid + layer_norm_backward(b.attn_norm, gb.attn_norm, bc.attn_norm, dnorm1, base);
  }

  linear_backward(params.embed, grad.embed, cache.input, cache.embed, dh, base);
  return grad;
}

ActionLabel argmax_action(const ClassProbabilities& probs) {
  const double best = *std::max_element(probs.p.begin(), probs.p.end());
  std::size_t hits = 0;
  std::size_t arg = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (probs.p[c] == best) {
      ++hits;
      arg = c;
    }
  }
  if (hits > 1) return ActionLabel::kHold;
  return static_cast<ActionLabel>(arg);
}

std::pair<ActionLabel, ClassProbabilities> predict_action(const ModelParameters& params, const TokenWindow& window) {
  const auto cache = forward(params, window, false);
  return {argmax_action(cache.probs), cache.probs};
}

ModelParameters apply_lora(ModelParameters params, std::size_t rank, std::vector<std::size_t> targets) {
  const auto& cfg = params.config;
  if (rank < 1 || rank > cfg.d_model) fail(ErrorCode::kConfig, fmt::format("LoRA rank {} outside [1, {}]", rank, cfg.d_model));
  if (targets.empty()) targets = {0, 1, cfg.layers - 1};
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  for (std::size_t t : targets) {
    if (t >= cfg.layers) fail(ErrorCode::kConfig, fmt::format("LoRA target layer {} out of range (L = {})", t, cfg.layers));
  }
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t t : targets) {
    for_each_linear(params.blocks[t], [&](Linear& lin) {
      const auto in = static_cast<std::size_t>(lin.weight.rows());
      const auto out = static_cast<std::size_t>(lin.weight.cols());
      lin.adapter = LowRankAdapter{gaussian(in, rank, 1.0 / std::sqrt(static_cast<double>(in)), rng),
                                   MatrixXd::Zero(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(out))};
    });
  }
  params.base_frozen = true;
  params.lora_rank = rank;
  params.lora_targets = std::move(targets);
  return params;
}

}  // namespace kinematic
