#include "prunekit/stats.hpp"

#include <cmath>

#include "prunekit/container.hpp"

namespace prunekit {

const LayerStats& StatsBundle::layer(int layer_id) const {
  for (const LayerStats& ls : layers) {
    if (ls.layer_id == layer_id) return ls;
  }
  fail(ErrorCategory::data, "no statistics for layer " + std::to_string(layer_id));
}

bool StatsBundle::structure_matches(const StatsBundle& other) const {
  if (bins != other.bins || class_count != other.class_count ||
      has_gradients != other.has_gradients || layers.size() != other.layers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerStats& a = layers[i];
    const LayerStats& b = other.layers[i];
    if (a.layer_id != b.layer_id || a.filter_count != b.filter_count || a.bin_lo != b.bin_lo ||
        a.bin_hi != b.bin_hi) {
      return false;
    }
  }
  return true;
}

double mean_activation(const StatsBundle& stats, int layer_id, std::size_t filter) {
  const LayerStats& ls = stats.layer(layer_id);
  if (ls.image_count == 0) return 0.0;
  return ls.sum_activation[filter] / static_cast<double>(ls.image_count);
}

double apoz(const StatsBundle& stats, int layer_id, std::size_t filter) {
  const LayerStats& ls = stats.layer(layer_id);
  if (ls.element_count[filter] == 0) return 0.0;
  return static_cast<double>(ls.zero_count[filter]) /
         static_cast<double>(ls.element_count[filter]);
}

double entropy(const StatsBundle& stats, int layer_id, std::size_t filter) {
  const LayerStats& ls = stats.layer(layer_id);
  if (ls.image_count == 0) return 0.0;
  const std::size_t b = static_cast<std::size_t>(stats.bins);
  double e = 0.0;
  for (std::size_t j = 0; j < b; ++j) {
    const std::uint64_t count = ls.histogram[filter * b + j];
    if (count == 0) continue;
    const double p = static_cast<double>(count) / static_cast<double>(ls.image_count);
    e -= p * std::log(p);
  }
  return e;
}

double scaled_entropy(const StatsBundle& stats, int layer_id, std::size_t filter) {
  return entropy(stats, layer_id, filter) * mean_activation(stats, layer_id, filter);
}

double sensitivity(const StatsBundle& stats, int layer_id, std::size_t filter) {
  if (!stats.has_gradients) {
    fail(ErrorCategory::data, "statistics were collected without gradients");
  }
  const LayerStats& ls = stats.layer(layer_id);
  if (stats.grad_image_count == 0) return 0.0;
  return ls.grad_l1_sum[filter] / static_cast<double>(stats.grad_image_count);
}

double class_sensitivity(const StatsBundle& stats, int layer_id, std::size_t filter,
                         const std::vector<int>& class_set) {
  if (!stats.has_gradients) {
    fail(ErrorCategory::data, "statistics were collected without gradients");
  }
  if (class_set.empty()) fail(ErrorCategory::config, "class set is empty");
  const LayerStats& ls = stats.layer(layer_id);
  double sum = 0.0;
  std::uint64_t images = 0;
  for (int c : class_set) {
    if (c < 0 || c >= stats.class_count) {
      fail(ErrorCategory::config, "class " + std::to_string(c) + " out of range");
    }
    sum += ls.class_grad_l1_sum[filter * static_cast<std::size_t>(stats.class_count) +
                                static_cast<std::size_t>(c)];
    images += stats.class_image_count[static_cast<std::size_t>(c)];
  }
  if (images == 0) return 0.0;
  return sum / static_cast<double>(images);
}

StatsBundle merge_stats(const StatsBundle& a, const StatsBundle& b) {
  if (!a.structure_matches(b)) {
    fail(ErrorCategory::data, "cannot merge statistics with different structure or bin edges");
  }
  StatsBundle out = a;
  out.grad_image_count += b.grad_image_count;
  for (std::size_t c = 0; c < out.class_image_count.size(); ++c) {
    out.class_image_count[c] += b.class_image_count[c];
  }
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    LayerStats& dst = out.layers[i];
    const LayerStats& src = b.layers[i];
    dst.image_count += src.image_count;
    for (std::size_t f = 0; f < dst.filter_count; ++f) {
      dst.sum_activation[f] += src.sum_activation[f];
      dst.zero_count[f] += src.zero_count[f];
      dst.element_count[f] += src.element_count[f];
      dst.grad_l1_sum[f] += src.grad_l1_sum[f];
    }
    for (std::size_t k = 0; k < dst.histogram.size(); ++k) dst.histogram[k] += src.histogram[k];
    for (std::size_t k = 0; k < dst.class_grad_l1_sum.size(); ++k) {
      dst.class_grad_l1_sum[k] += src.class_grad_l1_sum[k];
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_stats(const StatsBundle& stats) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(stats.bins));
  w.u32(static_cast<std::uint32_t>(stats.class_count));
  w.u8(stats.has_gradients ? 1 : 0);
  w.u64(stats.grad_image_count);
  for (std::uint64_t c : stats.class_image_count) w.u64(c);
  w.u32(static_cast<std::uint32_t>(stats.layers.size()));
  for (const LayerStats& ls : stats.layers) {
    w.u32(static_cast<std::uint32_t>(ls.layer_id));
    w.u64(ls.filter_count);
    w.f64(ls.bin_lo);
    w.f64(ls.bin_hi);
    w.u64(ls.image_count);
    for (double v : ls.sum_activation) w.f64(v);
    for (std::uint64_t v : ls.zero_count) w.u64(v);
    for (std::uint64_t v : ls.element_count) w.u64(v);
    for (std::uint64_t v : ls.histogram) w.u64(v);
    for (double v : ls.grad_l1_sum) w.f64(v);
    for (double v : ls.class_grad_l1_sum) w.f64(v);
  }
  return w.take();
}

StatsBundle decode_stats(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  StatsBundle stats;
  stats.bins = static_cast<int>(r.u32());
  stats.class_count = static_cast<int>(r.u32());
  stats.has_gradients = r.u8() != 0;
  stats.grad_image_count = r.u64();
  stats.class_image_count.resize(static_cast<std::size_t>(stats.class_count));
  for (auto& c : stats.class_image_count) c = r.u64();
  const std::uint32_t layer_count = r.u32();
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerStats ls;
    ls.layer_id = static_cast<int>(r.u32());
    ls.filter_count = r.u64();
    ls.bin_lo = r.f64();
    ls.bin_hi = r.f64();
    ls.image_count = r.u64();
    ls.sum_activation.resize(ls.filter_count);
    for (auto& v : ls.sum_activation) v = r.f64();
    ls.zero_count.resize(ls.filter_count);
    for (auto& v : ls.zero_count) v = r.u64();
    ls.element_count.resize(ls.filter_count);
    for (auto& v : ls.element_count) v = r.u64();
    ls.histogram.resize(ls.filter_count * static_cast<std::size_t>(stats.bins));
    for (auto& v : ls.histogram) v = r.u64();
    ls.grad_l1_sum.resize(ls.filter_count);
    for (auto& v : ls.grad_l1_sum) v = r.f64();
    ls.class_grad_l1_sum.resize(ls.filter_count * static_cast<std::size_t>(stats.class_count));
    for (auto& v : ls.class_grad_l1_sum) v = r.f64();
    stats.layers.push_back(std::move(ls));
  }
  if (!r.done()) fail(ErrorCategory::format, "trailing bytes after statistics payload");
  return stats;
}

void save_stats_file(const std::string& path, const StatsBundle& stats) {
  Section meta{"META", {}};
  const std::string tag = R"({"format":"stats"})";
  meta.payload.assign(tag.begin(), tag.end());
  Section body{"STATS", encode_stats(stats)};
  save_container_file(path, {meta, body});
}

StatsBundle load_stats_file(const std::string& path) {
  std::vector<Section> sections = load_container_file(path);
  const Section& body = find_section(sections, "STATS");
  return decode_stats(body.payload);
}

}  // namespace prunekit
