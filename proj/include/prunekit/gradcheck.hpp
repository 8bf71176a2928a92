#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "prunekit/netgraph.hpp"
#include "prunekit/rng.hpp"

namespace prunekit {

// One labeled example for gradient verification.
template <typename T>
struct LabeledSample {
  Tensor<T> input;  // [1xCxHxW]
  std::int32_t label = 0;
};

namespace detail {

template <typename T>
double forward_loss_only(const NetworkGraph<T>& net, const LabeledSample<T>& sample) {
  std::vector<Tensor<T>> acts = forward_all(net, sample.input);
  const double p =
      static_cast<double>(acts.back().data[static_cast<std::size_t>(sample.label)]);
  return -std::log(std::max(p, 1e-300));
}

}  // namespace detail

// Central-difference verification of the analytic gradients. Returns the
// maximum relative error over a seeded subsample of parameters (at most
// `per_layer` weights plus a few biases per weighted layer).
// Intended for double-precision networks.
template <typename T>
double check_gradients(NetworkGraph<T> net, const LabeledSample<T>& sample, double epsilon,
                       std::size_t per_layer = 60, std::uint64_t seed = 17) {
  validate(net);
  std::vector<std::int32_t> labels{sample.label};
  zero_gradients(net);
  loss_and_backward(net, sample.input, labels);

  Rng rng(seed);
  double max_rel = 0.0;
  for (auto& l : net.layers) {
    if (!l.params.has_weights()) continue;
    auto check_slot = [&](Tensor<T>& t, std::size_t count) {
      std::vector<std::size_t> picks;
      if (t.size() <= count) {
        picks.resize(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) picks[i] = i;
      } else {
        for (std::size_t i = 0; i < count; ++i) {
          picks.push_back(static_cast<std::size_t>(rng.next_below(t.size())));
        }
      }
      for (std::size_t idx : picks) {
        const double analytic = static_cast<double>(t.grad[idx]);
        const T saved = t.data[idx];
        const double h = epsilon * std::max(1.0, std::abs(static_cast<double>(saved)));
        t.data[idx] = saved + static_cast<T>(h);
        const double loss_hi = detail::forward_loss_only(net, sample);
        t.data[idx] = saved - static_cast<T>(h);
        const double loss_lo = detail::forward_loss_only(net, sample);
        t.data[idx] = saved;
        const double numeric = (loss_hi - loss_lo) / (2.0 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
      }
    };
    check_slot(l.params.weights, per_layer);
    check_slot(l.params.bias, std::min<std::size_t>(8, per_layer));
  }
  return max_rel;
}

}  // namespace prunekit
