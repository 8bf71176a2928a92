#pragma once

#include <map>
#include <vector>

#include "prunekit/netgraph.hpp"

namespace prunekit {

// Momentum buffers for one layer, sized on first use.
template <typename T>
struct Velocity {
  std::vector<T> weights;
  std::vector<T> bias;
};

// One SGD update: v <- momentum * v + grad, w <- w - lr * v.
// The velocity persists across calls through `vel`.
template <typename T>
void sgd_step(LayerParams<T>& params, Velocity<T>& vel, double lr, double momentum) {
  if (!params.has_weights()) return;
  if (lr < 0.0) fail(ErrorCategory::config, "learning rate must be non-negative");
  if (momentum < 0.0 || momentum >= 1.0) {
    fail(ErrorCategory::config, "momentum must lie in [0, 1)");
  }
  if (!params.weights.has_grad() || !params.bias.has_grad()) {
    fail(ErrorCategory::numeric, "sgd_step requires populated gradients");
  }
  if (!all_finite(std::span<const T>(params.weights.grad)) ||
      !all_finite(std::span<const T>(params.bias.grad))) {
    fail(ErrorCategory::numeric, "non-finite gradient, aborting sgd step");
  }
  if (vel.weights.size() != params.weights.size()) vel.weights.assign(params.weights.size(), T(0));
  if (vel.bias.size() != params.bias.size()) vel.bias.assign(params.bias.size(), T(0));
  const T tlr = static_cast<T>(lr);
  const T tmom = static_cast<T>(momentum);
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    vel.weights[i] = tmom * vel.weights[i] + params.weights.grad[i];
    params.weights.data[i] -= tlr * vel.weights[i];
  }
  for (std::size_t i = 0; i < params.bias.size(); ++i) {
    vel.bias[i] = tmom * vel.bias[i] + params.bias.grad[i];
    params.bias.data[i] -= tlr * vel.bias[i];
  }
}

// Network-wide SGD with per-layer freezing. Frozen layers are not written
// to at all, so their bytes stay identical across fine-tuning.
template <typename T>
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(NetworkGraph<T>& net, const std::vector<bool>& trainable) {
    for (auto& l : net.layers) {
      if (!l.params.has_weights()) continue;
      if (!trainable[static_cast<std::size_t>(l.id)]) continue;
      sgd_step(l.params, state_[l.id], lr_, momentum_);
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
  std::map<int, Velocity<T>> state_;
};

}  // namespace prunekit
