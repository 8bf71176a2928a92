#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/netgraph.hpp"

namespace prunekit {

// Per-filter activation and gradient statistics for one conv layer,
// accumulated over a data pass. Activation statistics are measured at the
// relu fed by the conv (after any residual add), so APoZ counts exact
// zeros and every histogram sample is the per-image spatial mean of a
// post-relu feature map.
struct LayerStats {
  int layer_id = -1;
  std::size_t filter_count = 0;
  double bin_lo = 0.0;
  double bin_hi = 0.0;
  std::uint64_t image_count = 0;
  std::vector<double> sum_activation;        // per filter: sum of per-image means
  std::vector<std::uint64_t> zero_count;     // per filter
  std::vector<std::uint64_t> element_count;  // per filter
  std::vector<std::uint64_t> histogram;      // filter_count * bins, row-major
  std::vector<double> grad_l1_sum;           // per filter
  std::vector<double> class_grad_l1_sum;     // filter_count * class_count
};

struct StatsBundle {
  int bins = 10;
  int class_count = 0;
  bool has_gradients = false;
  std::uint64_t grad_image_count = 0;
  std::vector<std::uint64_t> class_image_count;  // per class, gradient pass
  std::vector<LayerStats> layers;                // one per conv layer, id order

  const LayerStats& layer(int layer_id) const;
  bool structure_matches(const StatsBundle& other) const;
};

// Derived quantities.
double mean_activation(const StatsBundle& stats, int layer_id, std::size_t filter);
double apoz(const StatsBundle& stats, int layer_id, std::size_t filter);  // zero fraction in [0,1]
double entropy(const StatsBundle& stats, int layer_id, std::size_t filter);  // natural log
double scaled_entropy(const StatsBundle& stats, int layer_id, std::size_t filter);
double sensitivity(const StatsBundle& stats, int layer_id, std::size_t filter);
double class_sensitivity(const StatsBundle& stats, int layer_id, std::size_t filter,
                         const std::vector<int>& class_set);

// Counter-wise merge of bundles collected over disjoint shards with
// identical structure and bin ranges. Associative and commutative.
StatsBundle merge_stats(const StatsBundle& a, const StatsBundle& b);

// Container IO (STATS section alongside META).
std::vector<std::uint8_t> encode_stats(const StatsBundle& stats);
StatsBundle decode_stats(std::span<const std::uint8_t> payload);
void save_stats_file(const std::string& path, const StatsBundle& stats);
StatsBundle load_stats_file(const std::string& path);

struct StatsOptions {
  bool with_gradients = false;
  int bins = 10;
  std::uint64_t seed = 0;
  std::size_t batch = 64;
  std::size_t max_images = 0;  // 0 = use every image
};

struct ActivationRange {
  int layer_id = -1;
  double lo = 0.0;
  double hi = 0.0;
};

namespace detail {

// Activation tap per conv layer: the relu consuming the conv's output (or
// the conv itself if no relu follows).
template <typename T>
std::vector<std::pair<int, int>> stat_taps(const NetworkGraph<T>& net) {
  std::vector<std::pair<int, int>> taps;
  for (const auto& l : net.layers) {
    if (l.params.kind != LayerKind::conv2d) continue;
    int tap = l.id;
    for (int c : l.consumers) {
      if (net.layer(c).params.kind == LayerKind::relu) {
        tap = c;
        break;
      }
    }
    taps.emplace_back(l.id, tap);
  }
  return taps;
}

inline std::size_t bin_index(double value, double lo, double hi, int bins) {
  if (!(hi > lo)) return 0;
  const double f = (value - lo) / (hi - lo);
  const auto j = static_cast<std::ptrdiff_t>(f * bins);
  if (j < 0) return 0;
  if (j >= bins) return static_cast<std::size_t>(bins - 1);  // rightmost bin closed
  return static_cast<std::size_t>(j);
}

inline std::vector<std::size_t> stats_sample_indices(std::size_t n, const StatsOptions& options);

}  // namespace detail

// Pass 1: per-layer range of the per-image mean activation, for histogram
// bin edges. lo is pinned at 0 (post-relu outputs are non-negative).
template <typename T>
std::vector<ActivationRange> activation_ranges(const NetworkGraph<T>& net, const Dataset& data,
                                               std::size_t batch = 64,
                                               const std::vector<std::size_t>* subset = nullptr) {
  if (data.size() == 0) fail(ErrorCategory::data, "cannot collect statistics on an empty dataset");
  const auto taps = detail::stat_taps(net);
  std::vector<ActivationRange> ranges;
  for (const auto& [conv_id, tap] : taps) ranges.push_back({conv_id, 0.0, 0.0});

  std::vector<std::size_t> all;
  if (!subset) {
    all.resize(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    subset = &all;
  }
  for (std::size_t start = 0; start < subset->size(); start += batch) {
    const std::size_t end = std::min(subset->size(), start + batch);
    std::vector<std::size_t> idx(subset->begin() + static_cast<std::ptrdiff_t>(start),
                                 subset->begin() + static_cast<std::ptrdiff_t>(end));
    Tensor<T> input = batch_images<T>(data, idx);
    std::vector<Tensor<T>> acts = forward_all(net, input);
    for (std::size_t li = 0; li < taps.size(); ++li) {
      const Tensor<T>& act = acts[static_cast<std::size_t>(taps[li].second)];
      const std::size_t n = act.dim(0), filters = act.dim(1), plane = act.dim(2) * act.dim(3);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t f = 0; f < filters; ++f) {
          const T* map = act.data.data() + (b * filters + f) * plane;
          double sum = 0.0;
          for (std::size_t p = 0; p < plane; ++p) sum += static_cast<double>(map[p]);
          ranges[li].hi = std::max(ranges[li].hi, sum / static_cast<double>(plane));
        }
      }
    }
  }
  return ranges;
}

// Pass 2: fill every accumulator using fixed bin ranges. Gradient
// accumulators are filled per example (batch of one) so sensitivity sums
// |dL/dF| of individual images.
template <typename T>
StatsBundle collect_stats_with_ranges(const NetworkGraph<T>& net, const Dataset& data,
                                      const std::vector<ActivationRange>& ranges,
                                      const StatsOptions& options,
                                      const std::vector<std::size_t>* subset = nullptr) {
  if (data.size() == 0) fail(ErrorCategory::data, "cannot collect statistics on an empty dataset");
  if (options.bins < 1) fail(ErrorCategory::config, "bins must be positive");
  const auto taps = detail::stat_taps(net);
  if (ranges.size() != taps.size()) {
    fail(ErrorCategory::config, "range table does not match conv layer count");
  }

  StatsBundle stats;
  stats.bins = options.bins;
  stats.class_count = net.class_count;
  stats.has_gradients = options.with_gradients;
  stats.class_image_count.assign(static_cast<std::size_t>(net.class_count), 0);
  const auto shapes = layer_shapes(net, 1);
  for (std::size_t li = 0; li < taps.size(); ++li) {
    LayerStats ls;
    ls.layer_id = taps[li].first;
    if (ranges[li].layer_id != ls.layer_id) {
      fail(ErrorCategory::config, "range table layer order mismatch");
    }
    ls.filter_count = shapes[static_cast<std::size_t>(ls.layer_id)][1];
    ls.bin_lo = ranges[li].lo;
    ls.bin_hi = ranges[li].hi;
    ls.sum_activation.assign(ls.filter_count, 0.0);
    ls.zero_count.assign(ls.filter_count, 0);
    ls.element_count.assign(ls.filter_count, 0);
    ls.histogram.assign(ls.filter_count * static_cast<std::size_t>(options.bins), 0);
    ls.grad_l1_sum.assign(ls.filter_count, 0.0);
    ls.class_grad_l1_sum.assign(ls.filter_count * static_cast<std::size_t>(net.class_count), 0.0);
    stats.layers.push_back(std::move(ls));
  }

  std::vector<std::size_t> all;
  if (!subset) {
    all.resize(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    subset = &all;
  }

  // Activation statistics, batched.
  for (std::size_t start = 0; start < subset->size(); start += options.batch) {
    const std::size_t end = std::min(subset->size(), start + options.batch);
    std::vector<std::size_t> idx(subset->begin() + static_cast<std::ptrdiff_t>(start),
                                 subset->begin() + static_cast<std::ptrdiff_t>(end));
    Tensor<T> input = batch_images<T>(data, idx);
    std::vector<Tensor<T>> acts = forward_all(net, input);
    for (std::size_t li = 0; li < taps.size(); ++li) {
      LayerStats& ls = stats.layers[li];
      const Tensor<T>& act = acts[static_cast<std::size_t>(taps[li].second)];
      const std::size_t n = act.dim(0), filters = act.dim(1), plane = act.dim(2) * act.dim(3);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t f = 0; f < filters; ++f) {
          const T* map = act.data.data() + (b * filters + f) * plane;
          double sum = 0.0;
          std::uint64_t zeros = 0;
          for (std::size_t p = 0; p < plane; ++p) {
            sum += static_cast<double>(map[p]);
            if (map[p] == T(0)) ++zeros;
          }
          const double mean = sum / static_cast<double>(plane);
          ls.sum_activation[f] += mean;
          ls.zero_count[f] += zeros;
          ls.element_count[f] += plane;
          ls.histogram[f * static_cast<std::size_t>(options.bins) +
                       detail::bin_index(mean, ls.bin_lo, ls.bin_hi, options.bins)]++;
        }
      }
      ls.image_count += n;
    }
  }

  if (options.with_gradients) {
    NetworkGraph<T> work = net;  // gradients live in the parameter tensors
    for (std::size_t pos = 0; pos < subset->size(); ++pos) {
      const std::vector<std::size_t> one{(*subset)[pos]};
      Tensor<T> input = batch_images<T>(data, one);
      std::vector<std::int32_t> label = batch_labels(data, one);
      zero_gradients(work);
      loss_and_backward(work, input, label);
      for (std::size_t li = 0; li < stats.layers.size(); ++li) {
        LayerStats& ls = stats.layers[li];
        const auto& weights = work.layer(ls.layer_id).params.weights;
        const std::size_t per_filter = weights.size() / ls.filter_count;
        for (std::size_t f = 0; f < ls.filter_count; ++f) {
          double l1 = 0.0;
          for (std::size_t k = 0; k < per_filter; ++k) {
            l1 += std::abs(static_cast<double>(weights.grad[f * per_filter + k]));
          }
          ls.grad_l1_sum[f] += l1;
          ls.class_grad_l1_sum[f * static_cast<std::size_t>(stats.class_count) +
                               static_cast<std::size_t>(label[0])] += l1;
        }
      }
      stats.class_image_count[static_cast<std::size_t>(label[0])]++;
      stats.grad_image_count++;
    }
  }
  return stats;
}

// Both passes over the same (optionally subsampled) image set.
template <typename T>
StatsBundle collect_stats(const NetworkGraph<T>& net, const Dataset& data,
                          const StatsOptions& options = {}) {
  std::vector<std::size_t> indices = detail::stats_sample_indices(data.size(), options);
  std::vector<ActivationRange> ranges = activation_ranges(net, data, options.batch, &indices);
  return collect_stats_with_ranges(net, data, ranges, options, &indices);
}

namespace detail {

inline std::vector<std::size_t> stats_sample_indices(std::size_t n, const StatsOptions& options) {
  std::vector<std::size_t> indices(n);
  for (std::size_t i = 0; i < n; ++i) indices[i] = i;
  if (options.max_images > 0 && options.max_images < n) {
    Rng rng(options.seed, "splitmix64");
    shuffle(indices, rng);
    indices.resize(options.max_images);
    std::sort(indices.begin(), indices.end());
  }
  return indices;
}

}  // namespace detail

}  // namespace prunekit
