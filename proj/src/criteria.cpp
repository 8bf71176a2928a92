#include "prunekit/criteria.hpp"

#include <algorithm>
#include <numeric>

namespace prunekit {

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::random: return "random";
    case Criterion::mean_activation: return "mean-activation";
    case Criterion::l1_norm: return "l1-norm";
    case Criterion::entropy: return "entropy";
    case Criterion::scaled_entropy: return "scaled-entropy";
    case Criterion::apoz: return "apoz";
    case Criterion::sensitivity: return "sensitivity";
    case Criterion::class_specific: return "class-specific";
  }
  return "?";
}

Criterion parse_criterion(const std::string& name) {
  for (Criterion c : {Criterion::random, Criterion::mean_activation, Criterion::l1_norm,
                      Criterion::entropy, Criterion::scaled_entropy, Criterion::apoz,
                      Criterion::sensitivity, Criterion::class_specific}) {
    if (name == criterion_name(c)) return c;
  }
  fail(ErrorCategory::config, "unknown criterion '" + name + "'");
}

bool criterion_needs_stats(Criterion c) {
  switch (c) {
    case Criterion::random:
    case Criterion::l1_norm:
      return false;
    default:
      return true;
  }
}

bool criterion_needs_gradients(Criterion c) {
  return c == Criterion::sensitivity || c == Criterion::class_specific;
}

KeepCount keep_count_for(std::size_t n_k, int prune_percent) {
  if (n_k == 0) fail(ErrorCategory::config, "layer has no filters");
  if (prune_percent < 0 || prune_percent >= 100) {
    fail(ErrorCategory::config, "prune percent must lie in [0, 100), got " +
                                    std::to_string(prune_percent));
  }
  const std::size_t pruned = n_k * static_cast<std::size_t>(prune_percent) / 100;
  KeepCount out;
  out.keep = n_k - pruned;
  if (out.keep == 0) {
    out.keep = 1;
    out.clamped = true;
  }
  return out;
}

std::vector<std::size_t> select_top_m(const FilterScore& scores, std::size_t keep_count) {
  const std::size_t n = scores.scores.size();
  if (keep_count < 1 || keep_count > n) {
    fail(ErrorCategory::config, "keep count " + std::to_string(keep_count) +
                                    " out of range for " + std::to_string(n) + " filters");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
    return a < b;  // tie-break toward the lower filter index
  });
  order.resize(keep_count);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> allocate_differential(const std::vector<std::size_t>& layer_sizes,
                                               std::uint64_t total_prune_budget) {
  const std::size_t n = layer_sizes.size();
  if (n == 0) fail(ErrorCategory::config, "no layers to allocate over");
  std::uint64_t max_prunable = 0;
  for (std::size_t s : layer_sizes) {
    if (s == 0) fail(ErrorCategory::config, "layer sizes must be positive");
    max_prunable += s - 1;  // every layer keeps at least one filter
  }
  if (total_prune_budget > max_prunable) {
    fail(ErrorCategory::config, "prune budget " + std::to_string(total_prune_budget) +
                                    " infeasible; at most " + std::to_string(max_prunable) +
                                    " filters can go");
  }

  std::vector<std::uint64_t> pruned(n, 0);
  std::vector<bool> fixed(n, false);

  // Capped largest-remainder apportionment with weights n_k^2.
  for (;;) {
    double weight_total = 0.0;
    std::uint64_t budget_left = total_prune_budget;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) {
        budget_left -= pruned[i];
      } else {
        weight_total += static_cast<double>(layer_sizes[i]) * static_cast<double>(layer_sizes[i]);
      }
    }
    std::vector<double> remainder(n, -1.0);
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      const double quota = weight_total == 0.0
                               ? 0.0
                               : static_cast<double>(budget_left) *
                                     (static_cast<double>(layer_sizes[i]) *
                                      static_cast<double>(layer_sizes[i]) / weight_total);
      pruned[i] = static_cast<std::uint64_t>(quota);
      remainder[i] = quota - static_cast<double>(pruned[i]);
      assigned += pruned[i];
    }
    std::vector<std::size_t> by_remainder;
    for (std::size_t i = 0; i < n; ++i) {
      if (!fixed[i]) by_remainder.push_back(i);
    }
    std::sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
      if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
      if (layer_sizes[a] != layer_sizes[b]) return layer_sizes[a] > layer_sizes[b];
      return a < b;
    });
    for (std::size_t k = 0; assigned < budget_left && k < by_remainder.size(); ++k) {
      pruned[by_remainder[k]]++;
      ++assigned;
    }
    bool over_cap = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i]) continue;
      const std::uint64_t cap = layer_sizes[i] - 1;
      if (pruned[i] > cap) {
        pruned[i] = cap;
        fixed[i] = true;
        over_cap = true;
      }
    }
    if (!over_cap) break;
  }

  // Repair any rounding-induced inversion so wider layers are never pruned
  // by a smaller fraction than narrower ones.
  for (bool dirty = true; dirty;) {
    dirty = false;
    for (std::size_t i = 0; i < n && !dirty; ++i) {
      for (std::size_t j = 0; j < n && !dirty; ++j) {
        if (layer_sizes[i] >= layer_sizes[j]) continue;
        // fraction_i > fraction_j <=> pruned_i * n_j > pruned_j * n_i
        if (pruned[i] * layer_sizes[j] <= pruned[j] * layer_sizes[i]) continue;
        if (pruned[j] >= layer_sizes[j] - 1 || pruned[i] == 0) {
          fail(ErrorCategory::config, "differential allocation cannot satisfy monotonicity");
        }
        pruned[i]--;
        pruned[j]++;
        dirty = true;
      }
    }
  }

  std::vector<std::size_t> keep(n);
  std::uint64_t pruned_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    keep[i] = layer_sizes[i] - static_cast<std::size_t>(pruned[i]);
    pruned_total += pruned[i];
  }
  if (pruned_total != total_prune_budget) {
    fail(ErrorCategory::config, "differential allocation missed the budget");
  }
  return keep;
}

}  // namespace prunekit
