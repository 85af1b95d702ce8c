#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "maskseed/errors.hpp"
#include "maskseed/ops.hpp"
#include "maskseed/optim.hpp"
#include "maskseed/rng.hpp"
#include "maskseed/tensor.hpp"

namespace maskseed {

// ------------------------------------------------------------- configuration

// One trunk stage element: either a 3×3 same-padded conv (+ReLU) with the
// given output channels, or a 2×2 max-pool.
struct TrunkOp {
  bool pool = false;
  int channels = 0;
};

// Trunk spec strings look like "C8,C8,P,C16,C16,P,C24,C24,P,C32,C32,P":
// C<n> is a conv layer, P a pooling layer. Exactly four pools, so the trunk
// downsamples by 16.
std::vector<TrunkOp> parse_trunk_spec(const std::string& spec);
std::string trunk_spec_to_string(const std::vector<TrunkOp>& ops);

struct ModelConfig {
  int patch_size = 64;
  std::string trunk = "C8,C8,P,C16,C16,P,C24,C24,P,C32,C32,P";
  int rank = 64;        // width of the factored mask-classifier bottleneck
  int mask_out = 16;    // side of the predicted mask before upsampling
  int score_hidden1 = 64;
  int score_hidden2 = 128;
  bool full_rank = false;  // replace the factored classifier with one linear map
  double dropout_rate = 0.5;

  std::vector<TrunkOp> trunk_ops() const { return parse_trunk_spec(trunk); }
  int trunk_channels() const;
  int trunk_cells() const { return patch_size / 16; }  // feature window side
  int flat_features() const { return trunk_channels() * trunk_cells() * trunk_cells(); }
  void validate() const;

  std::string geometry_str() const;
  bool operator==(const ModelConfig&) const = default;
};

ModelConfig desk_model_config();
ModelConfig paper_model_config();

// ------------------------------------------------------------- parameters

template <class T>
struct ModelParams {
  std::vector<nn::LayerParams<T>> trunk;  // conv layers, in trunk order
  nn::LayerParams<T> seg_conv1x1;
  nn::LayerParams<T> seg_reduce;   // flat features → rank (or → mask_out² when full_rank)
  nn::LayerParams<T> seg_expand;   // rank → mask_out² (unused when full_rank)
  nn::LayerParams<T> score_fc1;
  nn::LayerParams<T> score_fc2;
  nn::LayerParams<T> score_out;
};

// Visits every trainable tensor with a stable name; the order defines the
// weights-file layout.
template <class T, class Fn>
void for_each_param(ModelParams<T>& p, bool full_rank, Fn&& fn) {
  for (std::size_t i = 0; i < p.trunk.size(); ++i) {
    fn("trunk." + std::to_string(i) + ".w", p.trunk[i].weights, p.trunk[i].weight_momentum);
    fn("trunk." + std::to_string(i) + ".b", p.trunk[i].bias, p.trunk[i].bias_momentum);
  }
  fn("seg.conv1x1.w", p.seg_conv1x1.weights, p.seg_conv1x1.weight_momentum);
  fn("seg.conv1x1.b", p.seg_conv1x1.bias, p.seg_conv1x1.bias_momentum);
  fn("seg.reduce.w", p.seg_reduce.weights, p.seg_reduce.weight_momentum);
  fn("seg.reduce.b", p.seg_reduce.bias, p.seg_reduce.bias_momentum);
  if (!full_rank) {
    fn("seg.expand.w", p.seg_expand.weights, p.seg_expand.weight_momentum);
    fn("seg.expand.b", p.seg_expand.bias, p.seg_expand.bias_momentum);
  }
  fn("score.fc1.w", p.score_fc1.weights, p.score_fc1.weight_momentum);
  fn("score.fc1.b", p.score_fc1.bias, p.score_fc1.bias_momentum);
  fn("score.fc2.w", p.score_fc2.weights, p.score_fc2.weight_momentum);
  fn("score.fc2.b", p.score_fc2.bias, p.score_fc2.bias_momentum);
  fn("score.out.w", p.score_out.weights, p.score_out.weight_momentum);
  fn("score.out.b", p.score_out.bias, p.score_out.bias_momentum);
}

template <class T>
std::size_t param_count(ModelParams<T>& p, bool full_rank) {
  std::size_t n = 0;
  for_each_param(p, full_rank, [&](const std::string&, Tensor<T>& t, Tensor<T>&) { n += t.numel(); });
  return n;
}

// Mask-classifier parameter counts for a config, factored vs full-rank.
std::size_t seg_head_param_count(const ModelConfig& cfg, bool full_rank);

template <class T>
void fill_uniform(Tensor<T>& t, double half_range, Rng& rng) {
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-half_range, half_range));
}

// Uniform init in ±sqrt(1/fan_in) for every layer; biases zero.
template <class T>
ModelParams<T> build_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams<T> p;
  int in_c = 3;
  for (const TrunkOp& op : cfg.trunk_ops()) {
    if (op.pool) continue;
    nn::LayerParams<T> lp({op.channels, in_c, 3, 3}, {op.channels});
    fill_uniform(lp.weights, std::sqrt(1.0 / (in_c * 9)), rng);
    p.trunk.push_back(std::move(lp));
    in_c = op.channels;
  }
  const int c = cfg.trunk_channels();
  const int flat = cfg.flat_features();
  const int mask_n = cfg.mask_out * cfg.mask_out;
  p.seg_conv1x1 = nn::LayerParams<T>({c, c, 1, 1}, {c});
  fill_uniform(p.seg_conv1x1.weights, std::sqrt(1.0 / c), rng);
  if (cfg.full_rank) {
    p.seg_reduce = nn::LayerParams<T>({mask_n, flat}, {mask_n});
    fill_uniform(p.seg_reduce.weights, std::sqrt(1.0 / flat), rng);
  } else {
    p.seg_reduce = nn::LayerParams<T>({cfg.rank, flat}, {cfg.rank});
    fill_uniform(p.seg_reduce.weights, std::sqrt(1.0 / flat), rng);
    p.seg_expand = nn::LayerParams<T>({mask_n, cfg.rank}, {mask_n});
    fill_uniform(p.seg_expand.weights, std::sqrt(1.0 / cfg.rank), rng);
  }
  const int half = cfg.trunk_cells() / 2;
  const int pooled_flat = c * half * half;
  p.score_fc1 = nn::LayerParams<T>({cfg.score_hidden1, pooled_flat}, {cfg.score_hidden1});
  fill_uniform(p.score_fc1.weights, std::sqrt(1.0 / pooled_flat), rng);
  p.score_fc2 = nn::LayerParams<T>({cfg.score_hidden2, cfg.score_hidden1}, {cfg.score_hidden2});
  fill_uniform(p.score_fc2.weights, std::sqrt(1.0 / cfg.score_hidden1), rng);
  p.score_out = nn::LayerParams<T>({1, cfg.score_hidden2}, {1});
  fill_uniform(p.score_out.weights, std::sqrt(1.0 / cfg.score_hidden2), rng);
  return p;
}

template <class To, class From>
ModelParams<To> params_cast(const ModelParams<From>& src) {
  ModelParams<To> dst;
  auto cast_lp = [](const nn::LayerParams<From>& a) {
    nn::LayerParams<To> b;
    b.weights = tensor_cast<To>(a.weights);
    b.bias = tensor_cast<To>(a.bias);
    b.weight_momentum = tensor_cast<To>(a.weight_momentum);
    b.bias_momentum = tensor_cast<To>(a.bias_momentum);
    return b;
  };
  for (const auto& lp : src.trunk) dst.trunk.push_back(cast_lp(lp));
  dst.seg_conv1x1 = cast_lp(src.seg_conv1x1);
  dst.seg_reduce = cast_lp(src.seg_reduce);
  dst.seg_expand = cast_lp(src.seg_expand);
  dst.score_fc1 = cast_lp(src.score_fc1);
  dst.score_fc2 = cast_lp(src.score_fc2);
  dst.score_out = cast_lp(src.score_out);
  return dst;
}

// ------------------------------------------------------------- trunk

template <class T>
struct TrunkCache {
  std::vector<Tensor<T>> conv_inputs;   // input to each conv layer
  std::vector<Tensor<T>> relu_inputs;   // each conv's pre-ReLU output
  std::vector<Tensor<std::int32_t>> pool_argmax;
  std::vector<std::pair<int, int>> pool_in_dims;
};

// Shared feature extractor; accepts any input whose spatial dims are multiples
// of 16 (patches during training, whole pyramid levels during dense
// inference). Output spatial dims are exactly input/16.
template <class T>
Tensor<T> trunk_forward(const ModelParams<T>& params, const ModelConfig& cfg, const Tensor<T>& input,
                        TrunkCache<T>* cache = nullptr) {
  if (input.rank() != 3 || input.dim(0) != 3) throw UsageError("trunk_forward: input must be 3×H×W");
  if (input.dim(1) % 16 != 0 || input.dim(2) % 16 != 0) {
    throw UsageError("trunk_forward: spatial dims must be divisible by 16, got " + shape_str(input.shape));
  }
  Tensor<T> x = input;
  std::size_t conv_i = 0;
  for (const TrunkOp& op : cfg.trunk_ops()) {
    if (op.pool) {
      if (cache) cache->pool_in_dims.emplace_back(x.dim(1), x.dim(2));
      auto r = nn::maxpool2x2(x);
      if (cache) cache->pool_argmax.push_back(std::move(r.argmax));
      x = std::move(r.output);
    } else {
      if (cache) cache->conv_inputs.push_back(x);
      Tensor<T> pre = nn::conv2d(x, params.trunk[conv_i], 1, 1);
      if (cache) cache->relu_inputs.push_back(pre);
      x = nn::relu(pre);
      ++conv_i;
    }
  }
  return x;
}

// Accumulates parameter gradients into `grads` (same struct shape as params)
// and returns nothing further; the input gradient is not needed.
template <class T>
void trunk_backward(const ModelParams<T>& params, const ModelConfig& cfg, const TrunkCache<T>& cache,
                    const Tensor<T>& grad_features, ModelParams<T>& grads) {
  Tensor<T> g = grad_features;
  const auto ops = cfg.trunk_ops();
  int conv_i = static_cast<int>(params.trunk.size());
  int pool_i = static_cast<int>(cache.pool_argmax.size());
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    if (it->pool) {
      --pool_i;
      g = nn::maxpool2x2_backward(g, cache.pool_argmax[pool_i], cache.pool_in_dims[pool_i].first,
                                  cache.pool_in_dims[pool_i].second);
    } else {
      --conv_i;
      g = nn::relu_backward(g, cache.relu_inputs[conv_i]);
      auto cg = nn::conv2d_backward(g, cache.conv_inputs[conv_i], params.trunk[conv_i], 1, 1);
      for (std::size_t i = 0; i < cg.weights.data.size(); ++i)
        grads.trunk[conv_i].weights.data[i] += cg.weights.data[i];
      for (std::size_t i = 0; i < cg.bias.data.size(); ++i)
        grads.trunk[conv_i].bias.data[i] += cg.bias.data[i];
      g = std::move(cg.input);
    }
  }
}

// ------------------------------------------------------------- segmentation head

template <class T>
struct SegCache {
  Tensor<T> conv_in;        // trunk features
  Tensor<T> relu_in;        // 1×1 conv output
  Tensor<T> flat;           // flattened post-ReLU features
  Tensor<T> mid;            // bottleneck activations (factored head only)
};

// 1×1 conv + ReLU → flatten → linear(rank) → linear(mask_out²), no
// nonlinearity between the two linear maps. Returns mask logits at
// mask_out×mask_out resolution.
template <class T>
Tensor<T> seg_head_forward(const ModelParams<T>& params, const ModelConfig& cfg,
                           const Tensor<T>& features, SegCache<T>* cache = nullptr) {
  if (cache) cache->conv_in = features;
  Tensor<T> pre = nn::conv2d(features, params.seg_conv1x1, 1, 0);
  if (cache) cache->relu_in = pre;
  Tensor<T> act = nn::relu(pre);
  Tensor<T> flat;
  flat.shape = {static_cast<int>(act.numel())};
  flat.data = std::move(act.data);
  if (cache) cache->flat = flat;
  Tensor<T> out;
  if (cfg.full_rank) {
    out = nn::linear(flat, params.seg_reduce);
  } else {
    Tensor<T> mid = nn::linear(flat, params.seg_reduce);
    if (cache) cache->mid = mid;
    out = nn::linear(mid, params.seg_expand);
  }
  out.shape = {cfg.mask_out, cfg.mask_out};
  return out;
}

// Mask logits upsampled to the full patch resolution (inference-side view of
// the head; the loss consumes the mask_out×mask_out logits directly).
template <class T>
Tensor<T> seg_head_forward_upsampled(const ModelParams<T>& params, const ModelConfig& cfg,
                                     const Tensor<T>& features) {
  Tensor<T> logits = seg_head_forward(params, cfg, features);
  logits.shape = {1, cfg.mask_out, cfg.mask_out};
  Tensor<T> up = nn::bilinear_upsample(logits, cfg.patch_size, cfg.patch_size);
  up.shape = {cfg.patch_size, cfg.patch_size};
  return up;
}

template <class T>
Tensor<T> seg_head_backward(const ModelParams<T>& params, const ModelConfig& cfg,
                            const SegCache<T>& cache, const Tensor<T>& grad_logits,
                            ModelParams<T>& grads) {
  Tensor<T> g = grad_logits;
  g.shape = {static_cast<int>(g.numel())};
  Tensor<T> grad_flat;
  if (cfg.full_rank) {
    auto lg = nn::linear_backward(g, cache.flat, params.seg_reduce);
    for (std::size_t i = 0; i < lg.weights.data.size(); ++i)
      grads.seg_reduce.weights.data[i] += lg.weights.data[i];
    for (std::size_t i = 0; i < lg.bias.data.size(); ++i)
      grads.seg_reduce.bias.data[i] += lg.bias.data[i];
    grad_flat = std::move(lg.input);
  } else {
    auto eg = nn::linear_backward(g, cache.mid, params.seg_expand);
    for (std::size_t i = 0; i < eg.weights.data.size(); ++i)
      grads.seg_expand.weights.data[i] += eg.weights.data[i];
    for (std::size_t i = 0; i < eg.bias.data.size(); ++i)
      grads.seg_expand.bias.data[i] += eg.bias.data[i];
    auto rg = nn::linear_backward(eg.input, cache.flat, params.seg_reduce);
    for (std::size_t i = 0; i < rg.weights.data.size(); ++i)
      grads.seg_reduce.weights.data[i] += rg.weights.data[i];
    for (std::size_t i = 0; i < rg.bias.data.size(); ++i)
      grads.seg_reduce.bias.data[i] += rg.bias.data[i];
    grad_flat = std::move(rg.input);
  }
  grad_flat.shape = cache.relu_in.shape;
  Tensor<T> grad_pre = nn::relu_backward(grad_flat, cache.relu_in);
  auto cg = nn::conv2d_backward(grad_pre, cache.conv_in, params.seg_conv1x1, 1, 0);
  for (std::size_t i = 0; i < cg.weights.data.size(); ++i)
    grads.seg_conv1x1.weights.data[i] += cg.weights.data[i];
  for (std::size_t i = 0; i < cg.bias.data.size(); ++i)
    grads.seg_conv1x1.bias.data[i] += cg.bias.data[i];
  return std::move(cg.input);
}

// ------------------------------------------------------------- scoring head

template <class T>
struct ScoreCache {
  Tensor<T> features;
  Tensor<std::int32_t> pool_argmax;
  std::pair<int, int> pool_in_dims;
  Tensor<T> flat;
  Tensor<T> fc1_in;   // pre-ReLU
  Tensor<T> drop1_in; // post-ReLU
  Tensor<T> drop1_mask;
  Tensor<T> fc1_out;  // post-dropout
  Tensor<T> fc2_in;
  Tensor<T> drop2_in;
  Tensor<T> drop2_mask;
  Tensor<T> fc2_out;
};

// 2×2 max-pool → flatten → fc+ReLU+dropout → fc+ReLU+dropout → fc(1).
// Returns the raw objectness logit.
template <class T>
T score_head_forward(const ModelParams<T>& params, const ModelConfig& cfg, const Tensor<T>& features,
                     bool training, Rng& rng, ScoreCache<T>* cache = nullptr) {
  if (features.dim(1) % 2 != 0 || features.dim(2) % 2 != 0) {
    throw ConfigError("score head: feature spatial dims must be even");
  }
  if (cache) {
    cache->features = features;
    cache->pool_in_dims = {features.dim(1), features.dim(2)};
  }
  auto pooled = nn::maxpool2x2(features);
  if (cache) cache->pool_argmax = std::move(pooled.argmax);
  Tensor<T> flat;
  flat.shape = {static_cast<int>(pooled.output.numel())};
  flat.data = std::move(pooled.output.data);
  if (cache) cache->flat = flat;

  Tensor<T> fc1 = nn::linear(flat, params.score_fc1);
  if (cache) cache->fc1_in = fc1;
  Tensor<T> act1 = nn::relu(fc1);
  if (cache) cache->drop1_in = act1;
  auto d1 = nn::dropout(act1, cfg.dropout_rate, rng, training);
  if (cache) {
    cache->drop1_mask = std::move(d1.mask);
    cache->fc1_out = d1.output;
  }

  Tensor<T> fc2 = nn::linear(d1.output, params.score_fc2);
  if (cache) cache->fc2_in = fc2;
  Tensor<T> act2 = nn::relu(fc2);
  if (cache) cache->drop2_in = act2;
  auto d2 = nn::dropout(act2, cfg.dropout_rate, rng, training);
  if (cache) {
    cache->drop2_mask = std::move(d2.mask);
    cache->fc2_out = d2.output;
  }

  Tensor<T> out = nn::linear(d2.output, params.score_out);
  return out.data[0];
}

template <class T>
Tensor<T> score_head_backward(const ModelParams<T>& params, const ModelConfig& cfg,
                              const ScoreCache<T>& cache, T grad_logit, ModelParams<T>& grads) {
  Tensor<T> g({1});
  g.data[0] = grad_logit;
  auto og = nn::linear_backward(g, cache.fc2_out, params.score_out);
  for (std::size_t i = 0; i < og.weights.data.size(); ++i)
    grads.score_out.weights.data[i] += og.weights.data[i];
  grads.score_out.bias.data[0] += og.bias.data[0];

  Tensor<T> gd2 = nn::dropout_backward(og.input, cache.drop2_mask);
  Tensor<T> ga2 = nn::relu_backward(gd2, cache.fc2_in);
  auto f2g = nn::linear_backward(ga2, cache.fc1_out, params.score_fc2);
  for (std::size_t i = 0; i < f2g.weights.data.size(); ++i)
    grads.score_fc2.weights.data[i] += f2g.weights.data[i];
  for (std::size_t i = 0; i < f2g.bias.data.size(); ++i)
    grads.score_fc2.bias.data[i] += f2g.bias.data[i];

  Tensor<T> gd1 = nn::dropout_backward(f2g.input, cache.drop1_mask);
  Tensor<T> ga1 = nn::relu_backward(gd1, cache.fc1_in);
  auto f1g = nn::linear_backward(ga1, cache.flat, params.score_fc1);
  for (std::size_t i = 0; i < f1g.weights.data.size(); ++i)
    grads.score_fc1.weights.data[i] += f1g.weights.data[i];
  for (std::size_t i = 0; i < f1g.bias.data.size(); ++i)
    grads.score_fc1.bias.data[i] += f1g.bias.data[i];

  Tensor<T> grad_pooled = f1g.input;
  grad_pooled.shape = {cache.features.dim(0), cache.pool_in_dims.first / 2,
                       cache.pool_in_dims.second / 2};
  return nn::maxpool2x2_backward(grad_pooled, cache.pool_argmax, cache.pool_in_dims.first,
                                 cache.pool_in_dims.second);
}

// ------------------------------------------------------------- joint loss

struct TrainingTriplet {
  Tensor<float> patch;         // 3×patch×patch, values in [0,1]
  std::vector<std::int8_t> mask;  // patch×patch of ±1; empty for negatives
  int label = 0;               // ±1
};

// log(1 + e^z), overflow-safe
inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <class T>
struct JointLossResult {
  double loss = 0.0;
  double mask_loss = 0.0;
  double score_loss = 0.0;
  Tensor<T> grad_mask_logits;
  T grad_score_logit = T(0);
};

// Per-pixel logistic loss on the mask plus weighted logistic loss on the
// score. The mask term is averaged over the mask_out×mask_out cells and is
// exactly zero (gradient included) for negative labels.
template <class T>
JointLossResult<T> joint_loss(const Tensor<T>& mask_logits, T score_logit,
                              const std::vector<std::int8_t>& mask_target, int label,
                              double score_loss_weight) {
  if (label != 1 && label != -1) throw UsageError("joint_loss: label must be +1 or -1");
  JointLossResult<T> r;
  r.grad_mask_logits = Tensor<T>(mask_logits.shape);
  if (label == 1) {
    if (mask_target.size() != mask_logits.numel()) {
      throw UsageError("joint_loss: mask target size does not match logits");
    }
    const double norm = 1.0 / static_cast<double>(mask_logits.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < mask_logits.numel(); ++i) {
      const double m = mask_target[i];
      const double f = static_cast<double>(mask_logits.data[i]);
      acc += softplus(-m * f);
      r.grad_mask_logits.data[i] = static_cast<T>(norm * -m * sigmoid(-m * f));
    }
    r.mask_loss = norm * acc;
  }
  const double y = label;
  const double s = static_cast<double>(score_logit);
  r.score_loss = score_loss_weight * softplus(-y * s);
  r.grad_score_logit = static_cast<T>(score_loss_weight * -y * sigmoid(-y * s));
  r.loss = r.mask_loss + r.score_loss;
  if (!std::isfinite(r.loss)) throw NumericError("joint_loss: non-finite loss");
  return r;
}

// Nearest-neighbor, center-sampled downsampling of a ±1 mask from patch
// resolution to the head's output resolution.
inline std::vector<std::int8_t> downsample_mask_target(const std::vector<std::int8_t>& mask,
                                                       int patch_size, int out_size) {
  std::vector<std::int8_t> out(static_cast<std::size_t>(out_size) * out_size);
  const double step = static_cast<double>(patch_size) / out_size;
  for (int y = 0; y < out_size; ++y) {
    int sy = static_cast<int>((y + 0.5) * step);
    if (sy >= patch_size) sy = patch_size - 1;
    for (int x = 0; x < out_size; ++x) {
      int sx = static_cast<int>((x + 0.5) * step);
      if (sx >= patch_size) sx = patch_size - 1;
      out[static_cast<std::size_t>(y) * out_size + x] =
          mask[static_cast<std::size_t>(sy) * patch_size + sx];
    }
  }
  return out;
}

// ------------------------------------------------------------- training step

enum class Branch { Segmentation, Scoring };

struct TrainConfig {
  double score_loss_weight = 1.0 / 32.0;
  nn::OptimizerConfig optimizer;
  int seg_steps_per_cycle = 1;
  int score_steps_per_cycle = 1;
  long steps = 3000;
  std::uint64_t seed = 42;
  bool mean_reduction = true;  // batch loss reduction: mean (sum when false)
  int checkpoint_every = 500;

  Branch branch_for_step(long step) const {
    const long cycle = seg_steps_per_cycle + score_steps_per_cycle;
    return (step % cycle) < seg_steps_per_cycle ? Branch::Segmentation : Branch::Scoring;
  }
};

template <class T>
ModelParams<T> zero_grads_like(const ModelParams<T>& p) {
  ModelParams<T> g;
  for (const auto& lp : p.trunk) g.trunk.emplace_back(lp.weights.shape, lp.bias.shape);
  auto zero_lp = [](const nn::LayerParams<T>& lp) {
    return nn::LayerParams<T>(lp.weights.shape, lp.bias.shape);
  };
  g.seg_conv1x1 = zero_lp(p.seg_conv1x1);
  g.seg_reduce = zero_lp(p.seg_reduce);
  if (p.seg_expand.weights.numel() > 0) g.seg_expand = zero_lp(p.seg_expand);
  g.score_fc1 = zero_lp(p.score_fc1);
  g.score_fc2 = zero_lp(p.score_fc2);
  g.score_out = zero_lp(p.score_out);
  return g;
}

// One optimizer step on a batch for the selected branch. Only the trunk and
// the selected head are touched; the other head's tensors are left bit-exact.
// Returns the batch loss (mean or sum per config).
template <class T>
double train_step(ModelParams<T>& params, const ModelConfig& cfg,
                  const std::vector<TrainingTriplet>& batch, Branch branch,
                  const TrainConfig& tc, Rng& dropout_rng) {
  if (batch.empty()) throw UsageError("train_step: empty batch");
  for (const auto& t : batch) {
    if (branch == Branch::Segmentation && t.label != 1) {
      throw UsageError("train_step: segmentation batches must contain only positive triplets");
    }
    if (t.label != 1 && t.label != -1) throw UsageError("train_step: bad label");
  }
  ModelParams<T> grads = zero_grads_like(params);
  double total_loss = 0.0;
  for (const auto& triplet : batch) {
    Tensor<T> patch = tensor_cast<T>(triplet.patch);
    TrunkCache<T> tcache;
    Tensor<T> features = trunk_forward(params, cfg, patch, &tcache);
    if (branch == Branch::Segmentation) {
      SegCache<T> scache;
      Tensor<T> logits = seg_head_forward(params, cfg, features, &scache);
      auto target = downsample_mask_target(triplet.mask, cfg.patch_size, cfg.mask_out);
      // score term excluded: this step trains the mask branch only
      auto lr = joint_loss(logits, T(0), target, triplet.label, 0.0);
      total_loss += lr.mask_loss;
      Tensor<T> grad_features = seg_head_backward(params, cfg, scache, lr.grad_mask_logits, grads);
      trunk_backward(params, cfg, tcache, grad_features, grads);
    } else {
      ScoreCache<T> scache;
      T logit = score_head_forward(params, cfg, features, true, dropout_rng, &scache);
      const double y = triplet.label;
      const double s = static_cast<double>(logit);
      total_loss += tc.score_loss_weight * softplus(-y * s);
      const T grad_logit = static_cast<T>(tc.score_loss_weight * -y * sigmoid(-y * s));
      Tensor<T> grad_features = score_head_backward(params, cfg, scache, grad_logit, grads);
      trunk_backward(params, cfg, tcache, grad_features, grads);
    }
  }
  const double scale = tc.mean_reduction ? 1.0 / batch.size() : 1.0;
  if (tc.mean_reduction && scale != 1.0) {
    auto scale_lp = [&](nn::LayerParams<T>& lp) {
      for (auto& v : lp.weights.data) v = static_cast<T>(v * scale);
      for (auto& v : lp.bias.data) v = static_cast<T>(v * scale);
    };
    for (auto& lp : grads.trunk) scale_lp(lp);
    scale_lp(grads.seg_conv1x1);
    scale_lp(grads.seg_reduce);
    if (grads.seg_expand.weights.numel() > 0) scale_lp(grads.seg_expand);
    scale_lp(grads.score_fc1);
    scale_lp(grads.score_fc2);
    scale_lp(grads.score_out);
  }
  for (std::size_t i = 0; i < params.trunk.size(); ++i) {
    nn::sgd_step(params.trunk[i], grads.trunk[i].weights, grads.trunk[i].bias, tc.optimizer);
  }
  if (branch == Branch::Segmentation) {
    nn::sgd_step(params.seg_conv1x1, grads.seg_conv1x1.weights, grads.seg_conv1x1.bias, tc.optimizer);
    nn::sgd_step(params.seg_reduce, grads.seg_reduce.weights, grads.seg_reduce.bias, tc.optimizer);
    if (!cfg.full_rank) {
      nn::sgd_step(params.seg_expand, grads.seg_expand.weights, grads.seg_expand.bias, tc.optimizer);
    }
  } else {
    nn::sgd_step(params.score_fc1, grads.score_fc1.weights, grads.score_fc1.bias, tc.optimizer);
    nn::sgd_step(params.score_fc2, grads.score_fc2.weights, grads.score_fc2.bias, tc.optimizer);
    nn::sgd_step(params.score_out, grads.score_out.weights, grads.score_out.bias, tc.optimizer);
  }
  return total_loss * scale;
}

}  // namespace maskseed
