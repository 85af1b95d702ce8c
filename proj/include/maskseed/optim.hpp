#pragma once

#include "maskseed/errors.hpp"
#include "maskseed/ops.hpp"
#include "maskseed/tensor.hpp"

namespace maskseed::nn {

struct OptimizerConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.00005;
  int batch_size = 32;
  bool decay_bias = false;  // weight decay applies to weights only by default

  void validate() const {
    if (learning_rate <= 0) throw ConfigError("optimizer: learning_rate must be > 0");
    if (momentum < 0 || momentum >= 1) throw ConfigError("optimizer: momentum must be in [0,1)");
    if (weight_decay < 0) throw ConfigError("optimizer: weight_decay must be >= 0");
    if (batch_size <= 0) throw ConfigError("optimizer: batch_size must be positive");
  }
};

// Classical SGD with momentum; decay folds into the gradient:
//   v ← momentum·v + g + weight_decay·w;  w ← w − lr·v
template <class T>
void sgd_step_tensor(Tensor<T>& value, Tensor<T>& momentum_buf, const Tensor<T>& grad,
                     const OptimizerConfig& cfg, bool apply_decay) {
  if (!value.same_shape(grad)) throw UsageError("sgd_step: grad shape does not match parameter");
  const T mu = static_cast<T>(cfg.momentum);
  const T wd = static_cast<T>(apply_decay ? cfg.weight_decay : 0.0);
  const T lr = static_cast<T>(cfg.learning_rate);
  for (std::size_t i = 0; i < value.data.size(); ++i) {
    const T v = mu * momentum_buf.data[i] + grad.data[i] + wd * value.data[i];
    momentum_buf.data[i] = v;
    value.data[i] -= lr * v;
  }
  require_finite(value, "sgd_step");
}

template <class T>
void sgd_step(LayerParams<T>& params, const Tensor<T>& grad_weights, const Tensor<T>& grad_bias,
              const OptimizerConfig& cfg) {
  sgd_step_tensor(params.weights, params.weight_momentum, grad_weights, cfg, true);
  sgd_step_tensor(params.bias, params.bias_momentum, grad_bias, cfg, cfg.decay_bias);
}

}  // namespace maskseed::nn
