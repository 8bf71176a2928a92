#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "prunekit/netgraph.hpp"

namespace prunekit {

enum class ResidualScope { first_only, first_two };

inline const char* residual_scope_name(ResidualScope s) {
  return s == ResidualScope::first_only ? "first-only" : "first-two";
}

inline ResidualScope parse_residual_scope(const std::string& s) {
  if (s == "first-only") return ResidualScope::first_only;
  if (s == "first-two") return ResidualScope::first_two;
  fail(ErrorCategory::config, "unknown residual scope '" + s + "'");
}

namespace detail {

// A change to a layer's output channel set, propagated to its consumers.
// `select` keeps the listed channels in order; `pair_sum` halves the count
// by combining channels (2t, 2t+1). For the source conv the pair rule is a
// mean; consumer input slices are summed so the composition preserves the
// original map whenever both members of a pair produce equal feature maps.
struct ChannelChange {
  bool is_select = true;
  std::vector<std::size_t> kept;  // select only
  std::size_t old_channels = 0;
  std::size_t new_channels = 0;
};

template <typename T>
void shrink_conv_outputs(LayerParams<T>& p, const ChannelChange& change, bool mean_pairs) {
  const std::size_t per_filter = p.weights.size() / p.weights.dim(0);
  std::vector<std::size_t> shape = p.weights.shape;
  shape[0] = change.new_channels;
  Tensor<T> weights(shape);
  Tensor<T> bias({change.new_channels});
  if (change.is_select) {
    for (std::size_t t = 0; t < change.kept.size(); ++t) {
      const T* src = p.weights.data.data() + change.kept[t] * per_filter;
      std::copy(src, src + per_filter, weights.data.data() + t * per_filter);
      bias.data[t] = p.bias.data[change.kept[t]];
    }
  } else {
    for (std::size_t t = 0; t < change.new_channels; ++t) {
      const T* a = p.weights.data.data() + (2 * t) * per_filter;
      const T* b = p.weights.data.data() + (2 * t + 1) * per_filter;
      T* dst = weights.data.data() + t * per_filter;
      const T half = mean_pairs ? T(0.5) : T(1);
      for (std::size_t k = 0; k < per_filter; ++k) dst[k] = (a[k] + b[k]) * half;
      bias.data[t] = (p.bias.data[2 * t] + p.bias.data[2 * t + 1]) * (mean_pairs ? T(0.5) : T(1));
    }
  }
  p.weights = std::move(weights);
  p.bias = std::move(bias);
}

template <typename T>
void shrink_conv_inputs(LayerParams<T>& p, const ChannelChange& change) {
  const std::size_t out_ch = p.weights.dim(0);
  const std::size_t in_ch = p.weights.dim(1);
  const std::size_t plane = p.weights.dim(2) * p.weights.dim(3);
  if (in_ch != change.old_channels) {
    fail(ErrorCategory::graph, "consumer conv expects " + std::to_string(in_ch) +
                                   " input channels, producer had " +
                                   std::to_string(change.old_channels));
  }
  Tensor<T> weights({out_ch, change.new_channels, p.weights.dim(2), p.weights.dim(3)});
  for (std::size_t oc = 0; oc < out_ch; ++oc) {
    for (std::size_t t = 0; t < change.new_channels; ++t) {
      T* dst = weights.data.data() + (oc * change.new_channels + t) * plane;
      if (change.is_select) {
        const T* src = p.weights.data.data() + (oc * in_ch + change.kept[t]) * plane;
        std::copy(src, src + plane, dst);
      } else {
        const T* a = p.weights.data.data() + (oc * in_ch + 2 * t) * plane;
        const T* b = p.weights.data.data() + (oc * in_ch + 2 * t + 1) * plane;
        for (std::size_t k = 0; k < plane; ++k) dst[k] = a[k] + b[k];
      }
    }
  }
  p.weights = std::move(weights);
}

// Dense boundary: columns are flattened channel-major, so channel c owns
// columns [c*spatial, (c+1)*spatial).
template <typename T>
void shrink_dense_inputs(LayerParams<T>& p, const ChannelChange& change) {
  const std::size_t out_f = p.weights.dim(0);
  const std::size_t in_f = p.weights.dim(1);
  if (in_f % change.old_channels != 0) {
    fail(ErrorCategory::graph, "dense input width " + std::to_string(in_f) +
                                   " is not a multiple of producer channels " +
                                   std::to_string(change.old_channels));
  }
  const std::size_t spatial = in_f / change.old_channels;
  Tensor<T> weights({out_f, change.new_channels * spatial});
  for (std::size_t o = 0; o < out_f; ++o) {
    const T* src_row = p.weights.data.data() + o * in_f;
    T* dst_row = weights.data.data() + o * change.new_channels * spatial;
    for (std::size_t t = 0; t < change.new_channels; ++t) {
      if (change.is_select) {
        const T* src = src_row + change.kept[t] * spatial;
        std::copy(src, src + spatial, dst_row + t * spatial);
      } else {
        const T* a = src_row + (2 * t) * spatial;
        const T* b = src_row + (2 * t + 1) * spatial;
        for (std::size_t s = 0; s < spatial; ++s) dst_row[t * spatial + s] = a[s] + b[s];
      }
    }
  }
  p.weights = std::move(weights);
}

// Apply a channel change at `source_id` and walk it through transparent
// layers (relu, maxpool) into the absorbing consumers. Any layer whose
// output channel set changes must not be a residual add endpoint.
template <typename T>
void propagate_channel_change(NetworkGraph<T>& net, int source_id, const ChannelChange& change) {
  std::vector<int> affected{source_id};  // layers whose output channels change
  std::vector<int> frontier{source_id};
  while (!frontier.empty()) {
    const int id = frontier.back();
    frontier.pop_back();
    for (int consumer : net.layer(id).consumers) {
      LayerParams<T>& p = net.layer(consumer).params;
      switch (p.kind) {
        case LayerKind::relu:
        case LayerKind::maxpool2x2:
          affected.push_back(consumer);
          frontier.push_back(consumer);
          break;
        case LayerKind::conv2d:
          shrink_conv_inputs(p, change);
          break;
        case LayerKind::dense:
          shrink_dense_inputs(p, change);
          break;
        case LayerKind::softmax_xent:
          fail(ErrorCategory::graph, "channel change reaches softmax head directly");
      }
    }
  }
  for (int id : affected) {
    for (const ResidualLink& link : net.residual_links) {
      if (link.from_layer == id || link.add_into_layer == id) {
        fail(ErrorCategory::graph,
             "layer " + std::to_string(source_id) +
                 " feeds a residual add; prune it through prune_residual_block");
      }
    }
  }
}

}  // namespace detail

// Remove all filters of a conv layer except `kept` (strictly ascending).
// Consumer convs lose the matching input channels; a consuming dense layer
// loses the matching channel-major column groups. Returns a new graph.
template <typename T>
NetworkGraph<T> prune_layer(const NetworkGraph<T>& net, int layer_id,
                            const std::vector<std::size_t>& kept) {
  if (layer_id < 0 || layer_id >= static_cast<int>(net.layers.size())) {
    fail(ErrorCategory::config, "no layer " + std::to_string(layer_id));
  }
  NetworkGraph<T> out = net;
  LayerParams<T>& p = out.layer(layer_id).params;
  if (p.kind != LayerKind::conv2d) {
    fail(ErrorCategory::config, "prune_layer targets conv layers; layer " +
                                    std::to_string(layer_id) + " is " +
                                    layer_kind_name(p.kind));
  }
  const std::size_t filters = p.weights.dim(0);
  if (kept.empty()) fail(ErrorCategory::config, "kept filter set must not be empty");
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] >= filters || (i > 0 && kept[i] <= kept[i - 1])) {
      fail(ErrorCategory::config, "kept filter indices must be strictly ascending and in range");
    }
  }

  detail::ChannelChange change;
  change.is_select = true;
  change.kept = kept;
  change.old_channels = filters;
  change.new_channels = kept.size();

  detail::propagate_channel_change(out, layer_id, change);
  detail::shrink_conv_outputs(p, change, /*mean_pairs=*/false);
  validate(out);
  return out;
}

// Prune the first (or first two) conv layers of one residual block. The
// block's external input and output shapes are untouched, so the skip add
// stays valid; the width-pinned third conv only loses input channels.
template <typename T>
NetworkGraph<T> prune_residual_block(const NetworkGraph<T>& net, int block_index,
                                     const std::vector<std::vector<std::size_t>>& kept_per_layer,
                                     ResidualScope mode) {
  const std::vector<ResidualBlock> blocks = residual_blocks(net);
  if (block_index < 0 || block_index >= static_cast<int>(blocks.size())) {
    fail(ErrorCategory::config, "no residual block " + std::to_string(block_index));
  }
  const std::size_t expected = mode == ResidualScope::first_only ? 1 : 2;
  if (kept_per_layer.size() != expected) {
    fail(ErrorCategory::config,
         std::string("mode ") + residual_scope_name(mode) + " prunes " +
             std::to_string(expected) + " layer(s); the third conv of a block keeps its width");
  }
  const ResidualBlock& block = blocks[static_cast<std::size_t>(block_index)];
  NetworkGraph<T> out = prune_layer(net, block.conv1, kept_per_layer[0]);
  if (mode == ResidualScope::first_two) {
    out = prune_layer(out, block.conv2, kept_per_layer[1]);
  }
  return out;
}

// Halve a conv layer by replacing filter pairs (2t, 2t+1) with their mean.
// Consumer input slices for each pair are summed, which preserves the layer
// composition exactly when both paired feature maps agree.
template <typename T>
NetworkGraph<T> average_consecutive(const NetworkGraph<T>& net, int layer_id) {
  if (layer_id < 0 || layer_id >= static_cast<int>(net.layers.size())) {
    fail(ErrorCategory::config, "no layer " + std::to_string(layer_id));
  }
  NetworkGraph<T> out = net;
  LayerParams<T>& p = out.layer(layer_id).params;
  if (p.kind != LayerKind::conv2d) {
    fail(ErrorCategory::config, "average_consecutive targets conv layers");
  }
  const std::size_t filters = p.weights.dim(0);
  if (filters % 2 != 0) {
    fail(ErrorCategory::config, "average_consecutive needs an even filter count, layer " +
                                    std::to_string(layer_id) + " has " + std::to_string(filters));
  }
  detail::ChannelChange change;
  change.is_select = false;
  change.old_channels = filters;
  change.new_channels = filters / 2;

  detail::propagate_channel_change(out, layer_id, change);
  detail::shrink_conv_outputs(p, change, /*mean_pairs=*/true);
  validate(out);
  return out;
}

}  // namespace prunekit
