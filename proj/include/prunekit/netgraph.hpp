#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prunekit/layers.hpp"
#include "prunekit/rng.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

// Residual skip: the output of `from_layer` is added into the output of
// `add_into_layer`. from_layer == kInputSource means the network input.
struct ResidualLink {
  int from_layer = -1;
  int add_into_layer = -1;
};

inline constexpr int kInputSource = -1;

template <typename T>
struct GraphLayer {
  int id = 0;
  LayerParams<T> params;
  std::vector<int> consumers;
};

enum class ArchFamily { vgg_tiny, resnet_tiny };

inline const char* arch_family_name(ArchFamily f) {
  return f == ArchFamily::vgg_tiny ? "vgg-tiny" : "resnet-tiny";
}

inline ArchFamily parse_arch_family(const std::string& s) {
  if (s == "vgg-tiny") return ArchFamily::vgg_tiny;
  if (s == "resnet-tiny") return ArchFamily::resnet_tiny;
  fail(ErrorCategory::config, "unknown architecture family '" + s + "'");
}

// Scaled-down model recipe. For vgg-tiny, filters_per_layer lists every
// conv width; runs of equal width form a group and a 2x2 maxpool follows
// each group. For resnet-tiny the first entry is the trunk width and each
// further entry is one block's internal width.
struct ArchSpec {
  ArchFamily family = ArchFamily::vgg_tiny;
  std::vector<std::size_t> filters_per_layer;
  std::size_t input_channels = 1;
  std::size_t input_height = 16;
  std::size_t input_width = 16;
  int class_count = 10;
};

template <typename T>
struct NetworkGraph {
  std::vector<GraphLayer<T>> layers;  // topological order, id == index
  std::vector<ResidualLink> residual_links;
  int class_count = 0;
  std::size_t input_channels = 0;
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::string family;  // provenance tag, e.g. "vgg-tiny"

  std::vector<std::size_t> input_shape(std::size_t batch) const {
    return {batch, input_channels, input_height, input_width};
  }

  const GraphLayer<T>& layer(int id) const { return layers.at(static_cast<std::size_t>(id)); }
  GraphLayer<T>& layer(int id) { return layers.at(static_cast<std::size_t>(id)); }

  template <typename U>
  NetworkGraph<U> cast() const {
    NetworkGraph<U> out;
    out.residual_links = residual_links;
    out.class_count = class_count;
    out.input_channels = input_channels;
    out.input_height = input_height;
    out.input_width = input_width;
    out.family = family;
    out.layers.reserve(layers.size());
    for (const auto& l : layers) {
      GraphLayer<U> g;
      g.id = l.id;
      g.consumers = l.consumers;
      g.params.kind = l.params.kind;
      g.params.weights = l.params.weights.template cast<U>();
      g.params.bias = l.params.bias.template cast<U>();
      out.layers.push_back(std::move(g));
    }
    return out;
  }
};

// Producer of each layer's input: producer[i] == kInputSource for the entry
// layer, otherwise the unique layer listing i as consumer.
template <typename T>
std::vector<int> producer_map(const NetworkGraph<T>& net) {
  std::vector<int> producer(net.layers.size(), kInputSource);
  std::vector<int> indegree(net.layers.size(), 0);
  for (const auto& l : net.layers) {
    for (int c : l.consumers) {
      if (c <= l.id || c >= static_cast<int>(net.layers.size())) {
        fail(ErrorCategory::graph, "layer " + std::to_string(l.id) +
                                       " has invalid consumer " + std::to_string(c));
      }
      producer[static_cast<std::size_t>(c)] = l.id;
      indegree[static_cast<std::size_t>(c)]++;
    }
  }
  for (std::size_t i = 1; i < net.layers.size(); ++i) {
    if (indegree[i] != 1) {
      fail(ErrorCategory::graph, "layer " + std::to_string(i) + " must have exactly one producer, has " +
                                     std::to_string(indegree[i]));
    }
  }
  return producer;
}

// Per-layer output shapes for a batch of `batch` inputs.
template <typename T>
std::vector<std::vector<std::size_t>> layer_shapes(const NetworkGraph<T>& net,
                                                   std::size_t batch = 1) {
  std::vector<int> producer = producer_map(net);
  std::vector<std::vector<std::size_t>> shapes(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::vector<std::size_t>& in =
        producer[i] == kInputSource ? net.input_shape(batch) : shapes[static_cast<std::size_t>(producer[i])];
    try {
      shapes[i] = layer_output_shape(net.layers[i].params, in);
    } catch (const Error& e) {
      fail(e.category(), "layer " + std::to_string(i) + ": " + e.what());
    }
  }
  return shapes;
}

// Structural validation: DAG consumer order, single-producer chain, channel
// compatibility, residual add shape equality, class count at the head.
template <typename T>
void validate(const NetworkGraph<T>& net) {
  if (net.layers.empty()) fail(ErrorCategory::graph, "network has no layers");
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].id != static_cast<int>(i)) {
      fail(ErrorCategory::graph, "layer ids must equal their position; position " +
                                     std::to_string(i) + " holds id " +
                                     std::to_string(net.layers[i].id));
    }
    if (net.layers[i].params.kind == LayerKind::softmax_xent &&
        i + 1 != net.layers.size()) {
      fail(ErrorCategory::graph, "softmax-xent must be the final layer");
    }
  }
  std::vector<std::vector<std::size_t>> shapes = layer_shapes(net, 1);
  for (const ResidualLink& link : net.residual_links) {
    if (link.add_into_layer < 0 || link.add_into_layer >= static_cast<int>(net.layers.size())) {
      fail(ErrorCategory::graph, "residual link target out of range");
    }
    if (link.from_layer != kInputSource &&
        (link.from_layer < 0 || link.from_layer >= link.add_into_layer)) {
      fail(ErrorCategory::graph, "residual link source must precede its target");
    }
    const std::vector<std::size_t>& into = shapes[static_cast<std::size_t>(link.add_into_layer)];
    const std::vector<std::size_t> from = link.from_layer == kInputSource
                                              ? net.input_shape(1)
                                              : shapes[static_cast<std::size_t>(link.from_layer)];
    if (into != from) {
      fail(ErrorCategory::graph,
           "residual add shape mismatch: source " + shape_str(from) + " vs target " +
               shape_str(into) + " (link into layer " + std::to_string(link.add_into_layer) + ")");
    }
  }
  // The classifier head must emit class_count logits.
  for (auto it = net.layers.rbegin(); it != net.layers.rend(); ++it) {
    if (it->params.has_weights()) {
      if (static_cast<int>(it->params.weights.dim(0)) != net.class_count) {
        fail(ErrorCategory::graph, "head layer emits " + std::to_string(it->params.weights.dim(0)) +
                                       " outputs, class_count is " + std::to_string(net.class_count));
      }
      break;
    }
  }
}

template <typename T>
std::vector<int> conv_layer_ids(const NetworkGraph<T>& net) {
  std::vector<int> ids;
  for (const auto& l : net.layers) {
    if (l.params.kind == LayerKind::conv2d) ids.push_back(l.id);
  }
  return ids;
}

// A residual block as derived from one link: the two prunable convs between
// the skip endpoints plus the width-pinned third conv (the add target).
struct ResidualBlock {
  int conv1 = -1;
  int conv2 = -1;
  int conv3 = -1;
};

template <typename T>
std::vector<ResidualBlock> residual_blocks(const NetworkGraph<T>& net) {
  std::vector<ResidualBlock> blocks;
  for (const ResidualLink& link : net.residual_links) {
    ResidualBlock b;
    b.conv3 = link.add_into_layer;
    std::vector<int> inner;
    for (const auto& l : net.layers) {
      if (l.params.kind == LayerKind::conv2d && l.id > link.from_layer &&
          l.id < link.add_into_layer) {
        inner.push_back(l.id);
      }
    }
    if (inner.size() != 2) {
      fail(ErrorCategory::graph, "residual block ending at layer " +
                                     std::to_string(link.add_into_layer) +
                                     " must contain exactly two inner convs");
    }
    b.conv1 = inner[0];
    b.conv2 = inner[1];
    blocks.push_back(b);
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const ResidualBlock& a, const ResidualBlock& b) { return a.conv1 < b.conv1; });
  return blocks;
}

// ---------------------------------------------------------------------------
// Builders

namespace detail {

template <typename T>
void init_fan_in(LayerParams<T>& p, Rng& rng) {
  if (!p.has_weights()) return;
  std::size_t fan_in = 1;
  for (std::size_t i = 1; i < p.weights.rank(); ++i) fan_in *= p.weights.dim(i);
  // Uniform fan-in scaling with relu gain: variance 2/fan_in keeps the
  // signal magnitude flat through stacked conv+relu pairs.
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& w : p.weights.data) w = static_cast<T>(rng.uniform(-bound, bound));
  // biases stay small but nonzero; a zero bias would leave relu inputs
  // sitting exactly on the kink wherever every input channel is zero
  const double bias_bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (auto& b : p.bias.data) b = static_cast<T>(rng.uniform(-bias_bound, bias_bound));
}

template <typename T>
int push_layer(NetworkGraph<T>& net, LayerParams<T> params) {
  GraphLayer<T> l;
  l.id = static_cast<int>(net.layers.size());
  l.params = std::move(params);
  if (!net.layers.empty()) net.layers.back().consumers.push_back(l.id);
  net.layers.push_back(std::move(l));
  return net.layers.back().id;
}

}  // namespace detail

// Deterministic model construction: same spec and seed give bit-identical
// weights.
template <typename T>
NetworkGraph<T> build_model(const ArchSpec& spec, std::uint64_t seed) {
  if (spec.filters_per_layer.empty()) {
    fail(ErrorCategory::config, "filters_per_layer must not be empty");
  }
  for (std::size_t f : spec.filters_per_layer) {
    if (f == 0) fail(ErrorCategory::config, "filters_per_layer entries must be positive");
  }
  if (spec.class_count < 2) fail(ErrorCategory::config, "class_count must be at least 2");

  NetworkGraph<T> net;
  net.class_count = spec.class_count;
  net.input_channels = spec.input_channels;
  net.input_height = spec.input_height;
  net.input_width = spec.input_width;
  net.family = arch_family_name(spec.family);
  Rng rng(seed, "splitmix64");

  if (spec.family == ArchFamily::vgg_tiny) {
    std::size_t in_ch = spec.input_channels;
    std::size_t h = spec.input_height, w = spec.input_width;
    const auto& widths = spec.filters_per_layer;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      auto conv = make_conv<T>(widths[i], in_ch, 3, 3);
      detail::init_fan_in(conv, rng);
      detail::push_layer(net, std::move(conv));
      detail::push_layer(net, make_plain<T>(LayerKind::relu));
      in_ch = widths[i];
      const bool group_end = (i + 1 == widths.size()) || (widths[i + 1] != widths[i]);
      if (group_end) {
        if (h % 2 != 0 || w % 2 != 0) {
          fail(ErrorCategory::config, "input spatial size does not survive the pooling stack");
        }
        detail::push_layer(net, make_plain<T>(LayerKind::maxpool2x2));
        h /= 2;
        w /= 2;
      }
    }
    const std::size_t features = in_ch * h * w;
    const std::size_t hidden = 4 * widths.back();
    auto fc1 = make_dense<T>(hidden, features);
    detail::init_fan_in(fc1, rng);
    detail::push_layer(net, std::move(fc1));
    detail::push_layer(net, make_plain<T>(LayerKind::relu));
    auto fc2 = make_dense<T>(static_cast<std::size_t>(spec.class_count), hidden);
    detail::init_fan_in(fc2, rng);
    detail::push_layer(net, std::move(fc2));
    detail::push_layer(net, make_plain<T>(LayerKind::softmax_xent));
  } else {
    if (spec.filters_per_layer.size() < 2) {
      fail(ErrorCategory::config,
           "resnet-tiny needs [trunk_width, block1_width, ...] in filters_per_layer");
    }
    const std::size_t trunk = spec.filters_per_layer[0];
    std::size_t h = spec.input_height, w = spec.input_width;
    int block_input = kInputSource;  // producer of the current block's input
    if (spec.input_channels != trunk) {
      auto stem = make_conv<T>(trunk, spec.input_channels, 3, 3);
      detail::init_fan_in(stem, rng);
      detail::push_layer(net, std::move(stem));
      block_input = detail::push_layer(net, make_plain<T>(LayerKind::relu));
    }
    for (std::size_t b = 1; b < spec.filters_per_layer.size(); ++b) {
      const std::size_t f = spec.filters_per_layer[b];
      auto c1 = make_conv<T>(f, trunk, 1, 1);
      detail::init_fan_in(c1, rng);
      detail::push_layer(net, std::move(c1));
      detail::push_layer(net, make_plain<T>(LayerKind::relu));
      auto c2 = make_conv<T>(f, f, 3, 3);
      detail::init_fan_in(c2, rng);
      detail::push_layer(net, std::move(c2));
      detail::push_layer(net, make_plain<T>(LayerKind::relu));
      auto c3 = make_conv<T>(trunk, f, 1, 1);
      detail::init_fan_in(c3, rng);
      const int conv3 = detail::push_layer(net, std::move(c3));
      net.residual_links.push_back(ResidualLink{block_input, conv3});
      block_input = detail::push_layer(net, make_plain<T>(LayerKind::relu));
    }
    if (h % 2 != 0 || w % 2 != 0) {
      fail(ErrorCategory::config, "input spatial size must be even for the head pool");
    }
    detail::push_layer(net, make_plain<T>(LayerKind::maxpool2x2));
    h /= 2;
    w /= 2;
    auto fc = make_dense<T>(static_cast<std::size_t>(spec.class_count), trunk * h * w);
    detail::init_fan_in(fc, rng);
    detail::push_layer(net, std::move(fc));
    detail::push_layer(net, make_plain<T>(LayerKind::softmax_xent));
  }
  validate(net);
  return net;
}

// ---------------------------------------------------------------------------
// Cost accounting

struct LayerCost {
  int layer_id = 0;
  std::uint64_t params = 0;
  std::uint64_t mult_adds = 0;
};

struct CostSummary {
  std::uint64_t params = 0;
  std::uint64_t mult_adds = 0;
};

// Per-layer parameter and multiply-add counts. Convs count
// out*in*kh*kw*out_h*out_w; dense layers count in*out; the rest are free.
template <typename T>
std::vector<LayerCost> layer_costs(const NetworkGraph<T>& net) {
  std::vector<LayerCost> costs;
  if (net.layers.empty()) return costs;
  std::vector<std::vector<std::size_t>> shapes = layer_shapes(net, 1);
  for (const auto& l : net.layers) {
    LayerCost c;
    c.layer_id = l.id;
    if (l.params.has_weights()) {
      c.params = l.params.weights.size() + l.params.bias.size();
    }
    if (l.params.kind == LayerKind::conv2d) {
      const auto& os = shapes[static_cast<std::size_t>(l.id)];
      c.mult_adds = static_cast<std::uint64_t>(l.params.weights.size()) * os[2] * os[3];
    } else if (l.params.kind == LayerKind::dense) {
      c.mult_adds = static_cast<std::uint64_t>(l.params.weights.dim(0)) * l.params.weights.dim(1);
    }
    costs.push_back(c);
  }
  return costs;
}

template <typename T>
CostSummary count_costs(const NetworkGraph<T>& net) {
  CostSummary total;
  for (const LayerCost& c : layer_costs(net)) {
    total.params += c.params;
    total.mult_adds += c.mult_adds;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Forward and backward drivers

// Forward pass storing every layer's activation (residual adds applied).
template <typename T>
std::vector<Tensor<T>> forward_all(const NetworkGraph<T>& net, const Tensor<T>& input) {
  if (input.shape != net.input_shape(input.dim(0))) {
    fail(ErrorCategory::shape, "network input shape " + shape_str(input.shape) +
                                   " does not match expected " +
                                   shape_str(net.input_shape(input.dim(0))));
  }
  std::vector<int> producer = producer_map(net);
  std::vector<Tensor<T>> acts(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Tensor<T>& in = producer[i] == kInputSource ? input : acts[static_cast<std::size_t>(producer[i])];
    try {
      acts[i] = layer_apply(net.layers[i].params, in);
    } catch (const Error& e) {
      fail(e.category(), "layer " + std::to_string(i) + ": " + e.what());
    }
    for (const ResidualLink& link : net.residual_links) {
      if (link.add_into_layer != static_cast<int>(i)) continue;
      const Tensor<T>& skip =
          link.from_layer == kInputSource ? input : acts[static_cast<std::size_t>(link.from_layer)];
      if (skip.shape != acts[i].shape) {
        fail(ErrorCategory::graph, "residual add shape mismatch at layer " + std::to_string(i));
      }
      for (std::size_t k = 0; k < acts[i].size(); ++k) acts[i].data[k] += skip.data[k];
    }
  }
  return acts;
}

template <typename T>
Tensor<T> forward(const NetworkGraph<T>& net, const Tensor<T>& input) {
  std::vector<Tensor<T>> acts = forward_all(net, input);
  return std::move(acts.back());
}

// Logits: output of the last weighted layer (softmax input).
template <typename T>
Tensor<T> forward_logits(const NetworkGraph<T>& net, const Tensor<T>& input) {
  std::vector<Tensor<T>> acts = forward_all(net, input);
  for (auto it = net.layers.rbegin(); it != net.layers.rend(); ++it) {
    if (it->params.kind != LayerKind::softmax_xent) {
      return std::move(acts[static_cast<std::size_t>(it->id)]);
    }
  }
  fail(ErrorCategory::graph, "network has only softmax layers");
}

template <typename T>
void zero_gradients(NetworkGraph<T>& net) {
  for (auto& l : net.layers) {
    if (!l.params.has_weights()) continue;
    l.params.weights.ensure_grad();
    l.params.weights.zero_grad();
    l.params.bias.ensure_grad();
    l.params.bias.zero_grad();
  }
}

// Cross-entropy loss over a batch; accumulates parameter gradients into the
// grad slots (caller zeroes them). The softmax/cross-entropy pair is fused:
// the gradient seeded at the logits is (softmax - onehot)/batch.
template <typename T>
double loss_and_backward(NetworkGraph<T>& net, const Tensor<T>& input,
                         const std::vector<std::int32_t>& labels) {
  const std::size_t batch = input.dim(0);
  if (labels.size() != batch) {
    fail(ErrorCategory::data, "label count does not match batch size");
  }
  if (net.layers.back().params.kind != LayerKind::softmax_xent) {
    fail(ErrorCategory::graph, "loss requires a softmax-xent head");
  }
  std::vector<int> producer = producer_map(net);
  std::vector<Tensor<T>> acts = forward_all(net, input);

  const std::size_t classes = static_cast<std::size_t>(net.class_count);
  const Tensor<T>& probs = acts.back();
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::int32_t label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      fail(ErrorCategory::data, "label " + std::to_string(label) + " out of range");
    }
    const double p = static_cast<double>(probs.data[b * classes + static_cast<std::size_t>(label)]);
    loss -= std::log(std::max(p, 1e-45));
  }
  loss /= static_cast<double>(batch);

  // Output-side gradient per layer.
  std::vector<Tensor<T>> out_grad(net.layers.size());
  const int softmax_id = net.layers.back().id;
  const int logits_id = producer[static_cast<std::size_t>(softmax_id)];
  out_grad[static_cast<std::size_t>(logits_id)] = Tensor<T>(probs.shape);
  {
    Tensor<T>& g = out_grad[static_cast<std::size_t>(logits_id)];
    const T inv_batch = T(1) / static_cast<T>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < classes; ++c) {
        T v = probs.data[b * classes + c];
        if (c == static_cast<std::size_t>(labels[b])) v -= T(1);
        g.data[b * classes + c] = v * inv_batch;
      }
    }
  }

  Tensor<T> input_grad(input.shape);
  for (int i = logits_id; i >= 0; --i) {
    Tensor<T>& g_out = out_grad[static_cast<std::size_t>(i)];
    if (g_out.size() == 0) continue;  // no gradient reaches this layer
    // Identity branch of any residual add applied at this layer's output.
    for (const ResidualLink& link : net.residual_links) {
      if (link.add_into_layer != i) continue;
      if (link.from_layer == kInputSource) {
        for (std::size_t k = 0; k < g_out.size(); ++k) input_grad.data[k] += g_out.data[k];
      } else {
        Tensor<T>& src = out_grad[static_cast<std::size_t>(link.from_layer)];
        if (src.size() == 0) src = Tensor<T>(g_out.shape);
        for (std::size_t k = 0; k < g_out.size(); ++k) src.data[k] += g_out.data[k];
      }
    }
    const Tensor<T>& in = producer[static_cast<std::size_t>(i)] == kInputSource
                              ? input
                              : acts[static_cast<std::size_t>(producer[static_cast<std::size_t>(i)])];
    LayerGrads<T> grads = layer_backprop(net.layers[static_cast<std::size_t>(i)].params, in, g_out);
    if (net.layers[static_cast<std::size_t>(i)].params.has_weights()) {
      auto& p = net.layers[static_cast<std::size_t>(i)].params;
      p.weights.ensure_grad();
      p.bias.ensure_grad();
      for (std::size_t k = 0; k < p.weights.size(); ++k) p.weights.grad[k] += grads.weight_grad.data[k];
      for (std::size_t k = 0; k < p.bias.size(); ++k) p.bias.grad[k] += grads.bias_grad.data[k];
    }
    const int prod = producer[static_cast<std::size_t>(i)];
    if (prod == kInputSource) {
      for (std::size_t k = 0; k < input_grad.size(); ++k) input_grad.data[k] += grads.input_grad.data[k];
    } else {
      Tensor<T>& dst = out_grad[static_cast<std::size_t>(prod)];
      if (dst.size() == 0) {
        dst = std::move(grads.input_grad);
      } else {
        for (std::size_t k = 0; k < dst.size(); ++k) dst.data[k] += grads.input_grad.data[k];
      }
    }
    g_out.data.clear();  // free as we go
  }
  return loss;
}

}  // namespace prunekit
