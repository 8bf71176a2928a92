#pragma once

#include <string>
#include <vector>

#include "prunekit/container.hpp"
#include "prunekit/netgraph.hpp"

namespace prunekit {

// NETGRAPH section layout (all little-endian):
//   u32 class_count, u32 input C/H/W, str family
//   u32 layer_count, u32 residual_link_count
//   per layer: u32 id, u8 kind, u8 weight rank, u32 dims[rank],
//              u64 weight offset, u64 bias offset (element offsets into the
//              trailing blob; ~0 when the layer is weightless),
//              u32 consumer count, u32 consumers[]
//   per link:  i32 from, i32 into
//   u64 blob element count, f32 blob[]
//
// The blob keeps weights in 32-bit floats regardless of the in-memory
// precision. Channel-major flattening at the conv/dense boundary is part of
// this contract: dense columns are ordered channel * (H*W) + spatial.

inline constexpr char kSectionNetGraph[] = "NETGRAPH";
inline constexpr char kSectionMeta[] = "META";
inline constexpr std::uint64_t kNoBlobOffset = ~0ULL;

namespace detail {

inline std::uint8_t kind_code(LayerKind k) { return static_cast<std::uint8_t>(k); }

inline LayerKind kind_from_code(std::uint8_t c) {
  if (c > static_cast<std::uint8_t>(LayerKind::softmax_xent)) {
    fail(ErrorCategory::format, "unknown layer kind code " + std::to_string(c));
  }
  return static_cast<LayerKind>(c);
}

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> encode_netgraph(const NetworkGraph<T>& net) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(net.class_count));
  w.u32(static_cast<std::uint32_t>(net.input_channels));
  w.u32(static_cast<std::uint32_t>(net.input_height));
  w.u32(static_cast<std::uint32_t>(net.input_width));
  w.str(net.family);
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  w.u32(static_cast<std::uint32_t>(net.residual_links.size()));

  std::vector<float> blob;
  for (const auto& l : net.layers) {
    w.u32(static_cast<std::uint32_t>(l.id));
    w.u8(detail::kind_code(l.params.kind));
    if (l.params.has_weights()) {
      w.u8(static_cast<std::uint8_t>(l.params.weights.rank()));
      for (std::size_t d : l.params.weights.shape) w.u32(static_cast<std::uint32_t>(d));
      w.u64(blob.size());
      for (T v : l.params.weights.data) blob.push_back(static_cast<float>(v));
      w.u64(blob.size());
      for (T v : l.params.bias.data) blob.push_back(static_cast<float>(v));
    } else {
      w.u8(0);
      w.u64(kNoBlobOffset);
      w.u64(kNoBlobOffset);
    }
    w.u32(static_cast<std::uint32_t>(l.consumers.size()));
    for (int c : l.consumers) w.u32(static_cast<std::uint32_t>(c));
  }
  for (const ResidualLink& link : net.residual_links) {
    w.i32(link.from_layer);
    w.i32(link.add_into_layer);
  }
  w.u64(blob.size());
  for (float v : blob) w.f32(v);
  return w.take();
}

template <typename T>
NetworkGraph<T> decode_netgraph(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  NetworkGraph<T> net;
  net.class_count = static_cast<int>(r.u32());
  net.input_channels = r.u32();
  net.input_height = r.u32();
  net.input_width = r.u32();
  net.family = r.str();
  const std::uint32_t layer_count = r.u32();
  const std::uint32_t link_count = r.u32();

  struct PendingBlob {
    std::size_t layer;
    std::uint64_t weights_at;
    std::uint64_t bias_at;
  };
  std::vector<PendingBlob> pending;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    GraphLayer<T> l;
    l.id = static_cast<int>(r.u32());
    l.params.kind = detail::kind_from_code(r.u8());
    const std::uint8_t rank = r.u8();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = r.u32();
    const std::uint64_t w_at = r.u64();
    const std::uint64_t b_at = r.u64();
    if (l.params.has_weights()) {
      if (w_at == kNoBlobOffset || b_at == kNoBlobOffset || rank == 0) {
        fail(ErrorCategory::format, "layer " + std::to_string(l.id) + " is missing weight data");
      }
      l.params.weights = Tensor<T>(dims);
      l.params.bias = Tensor<T>({dims[0]});
      pending.push_back({static_cast<std::size_t>(i), w_at, b_at});
    }
    const std::uint32_t consumers = r.u32();
    for (std::uint32_t c = 0; c < consumers; ++c) l.consumers.push_back(static_cast<int>(r.u32()));
    net.layers.push_back(std::move(l));
  }
  for (std::uint32_t i = 0; i < link_count; ++i) {
    ResidualLink link;
    link.from_layer = r.i32();
    link.add_into_layer = r.i32();
    net.residual_links.push_back(link);
  }
  const std::uint64_t blob_len = r.u64();
  std::vector<float> blob(static_cast<std::size_t>(blob_len));
  for (auto& v : blob) v = r.f32();
  if (!r.done()) fail(ErrorCategory::format, "trailing bytes after weight blob");

  for (const auto& p : pending) {
    auto& params = net.layers[p.layer].params;
    if (p.weights_at + params.weights.size() > blob.size() ||
        p.bias_at + params.bias.size() > blob.size()) {
      fail(ErrorCategory::format, "weight blob offsets out of range");
    }
    for (std::size_t k = 0; k < params.weights.size(); ++k) {
      params.weights.data[k] = static_cast<T>(blob[p.weights_at + k]);
    }
    for (std::size_t k = 0; k < params.bias.size(); ++k) {
      params.bias.data[k] = static_cast<T>(blob[p.bias_at + k]);
    }
  }
  validate(net);
  return net;
}

template <typename T>
std::vector<std::uint8_t> save_checkpoint(const NetworkGraph<T>& net) {
  Section meta{kSectionMeta, {}};
  {
    ByteWriter w;
    w.str("checkpoint");
    meta.payload = w.take();
  }
  Section graph{kSectionNetGraph, encode_netgraph(net)};
  return write_container({meta, graph});
}

template <typename T>
NetworkGraph<T> load_checkpoint(std::span<const std::uint8_t> bytes) {
  std::vector<Section> sections = read_container(bytes);
  const Section& graph = find_section(sections, kSectionNetGraph);
  return decode_netgraph<T>(graph.payload);
}

template <typename T>
void save_checkpoint_file(const std::string& path, const NetworkGraph<T>& net) {
  Section meta{kSectionMeta, {}};
  {
    ByteWriter w;
    w.str("checkpoint");
    meta.payload = w.take();
  }
  Section graph{kSectionNetGraph, encode_netgraph(net)};
  save_container_file(path, {meta, graph});
}

template <typename T>
NetworkGraph<T> load_checkpoint_file(const std::string& path) {
  std::vector<Section> sections = load_container_file(path);
  const Section& graph = find_section(sections, kSectionNetGraph);
  return decode_netgraph<T>(graph.payload);
}

}  // namespace prunekit
