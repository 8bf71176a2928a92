#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prunekit/netgraph.hpp"
#include "prunekit/rng.hpp"
#include "prunekit/stats.hpp"

namespace prunekit {

// The eight filter-scoring criteria. Every score is normalized so that a
// higher value means "more important, keep": APoZ is inverted (1 - zero
// fraction), everything else is used as-is.
enum class Criterion {
  random,
  mean_activation,
  l1_norm,
  entropy,
  scaled_entropy,
  apoz,
  sensitivity,
  class_specific,
};

const char* criterion_name(Criterion c);
Criterion parse_criterion(const std::string& name);
bool criterion_needs_stats(Criterion c);
bool criterion_needs_gradients(Criterion c);

struct FilterScore {
  int layer_id = -1;
  Criterion criterion = Criterion::random;
  std::vector<double> scores;           // one per filter
  std::optional<std::uint64_t> seed;    // random criterion only
};

// Kept-filter count for pruning m percent of n_k filters:
// keep = n_k - floor(m * n_k / 100), clamped to at least one filter.
struct KeepCount {
  std::size_t keep = 0;
  bool clamped = false;
};
KeepCount keep_count_for(std::size_t n_k, int prune_percent);

// Indices of the keep_count highest scores, ties broken toward the lower
// filter index; result sorted ascending.
std::vector<std::size_t> select_top_m(const FilterScore& scores, std::size_t keep_count);

// Spread a global pruning budget over layers in proportion to the square of
// the layer width (largest-remainder rounding), so wider layers lose a
// strictly larger fraction. Returns keep counts; every layer keeps >= 1 and
// the pruned total equals the budget exactly.
std::vector<std::size_t> allocate_differential(const std::vector<std::size_t>& layer_sizes,
                                               std::uint64_t total_prune_budget);

// Scores for one conv layer. `stats` is required for the statistics-based
// criteria, `class_set` exactly for class-specific, `seed` exactly for
// random.
template <typename T>
FilterScore score_filters(Criterion criterion, const GraphLayer<T>& layer,
                          const StatsBundle* stats = nullptr,
                          const std::vector<int>* class_set = nullptr,
                          std::optional<std::uint64_t> seed = std::nullopt) {
  if (layer.params.kind != LayerKind::conv2d) {
    fail(ErrorCategory::config, "filter scores are defined for conv layers only");
  }
  if (criterion_needs_stats(criterion) && stats == nullptr) {
    fail(ErrorCategory::config, std::string("criterion '") + criterion_name(criterion) +
                                    "' needs activation statistics");
  }
  if (criterion_needs_gradients(criterion) && (stats == nullptr || !stats->has_gradients)) {
    fail(ErrorCategory::config, std::string("criterion '") + criterion_name(criterion) +
                                    "' needs gradient statistics");
  }
  if ((criterion == Criterion::class_specific) != (class_set != nullptr)) {
    fail(ErrorCategory::config, "class_set must be given exactly for class-specific scoring");
  }
  if ((criterion == Criterion::random) != seed.has_value()) {
    fail(ErrorCategory::config, "seed must be given exactly for random scoring");
  }

  const std::size_t filters = layer.params.weights.dim(0);
  FilterScore out;
  out.layer_id = layer.id;
  out.criterion = criterion;
  out.seed = seed;
  out.scores.resize(filters);

  switch (criterion) {
    case Criterion::random: {
      Rng rng(*seed, "splitmix64");
      for (auto& s : out.scores) s = rng.next_double();
      break;
    }
    case Criterion::l1_norm: {
      const std::size_t per_filter = layer.params.weights.size() / filters;
      for (std::size_t f = 0; f < filters; ++f) {
        double sum = 0.0;
        const T* w = layer.params.weights.data.data() + f * per_filter;
        for (std::size_t k = 0; k < per_filter; ++k) sum += std::abs(static_cast<double>(w[k]));
        out.scores[f] = sum;
      }
      break;
    }
    case Criterion::mean_activation:
      for (std::size_t f = 0; f < filters; ++f) {
        out.scores[f] = mean_activation(*stats, layer.id, f);
      }
      break;
    case Criterion::entropy:
      for (std::size_t f = 0; f < filters; ++f) out.scores[f] = entropy(*stats, layer.id, f);
      break;
    case Criterion::scaled_entropy:
      for (std::size_t f = 0; f < filters; ++f) {
        out.scores[f] = scaled_entropy(*stats, layer.id, f);
      }
      break;
    case Criterion::apoz:
      for (std::size_t f = 0; f < filters; ++f) out.scores[f] = 1.0 - apoz(*stats, layer.id, f);
      break;
    case Criterion::sensitivity:
      for (std::size_t f = 0; f < filters; ++f) out.scores[f] = sensitivity(*stats, layer.id, f);
      break;
    case Criterion::class_specific:
      for (std::size_t f = 0; f < filters; ++f) {
        out.scores[f] = class_sensitivity(*stats, layer.id, f, *class_set);
      }
      break;
  }
  for (double s : out.scores) {
    if (!std::isfinite(s)) {
      fail(ErrorCategory::numeric, std::string("non-finite score under criterion '") +
                                       criterion_name(criterion) + "'");
    }
  }
  return out;
}

}  // namespace prunekit
