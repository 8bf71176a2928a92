#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prunekit/criteria.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/evaluate.hpp"
#include "prunekit/optimizer.hpp"
#include "prunekit/stats.hpp"
#include "prunekit/surgery.hpp"

namespace prunekit {

enum class RetrainScope { all, fc_only, conv_only, neighbors };

const char* retrain_scope_name(RetrainScope s);
RetrainScope parse_retrain_scope(const std::string& s);

// Declarative pruning schedule. Exactly one of prune_percent,
// per_layer_percent or differential_budget drives the per-layer keep
// counts.
struct PruneConfig {
  Criterion criterion = Criterion::random;
  int prune_percent = 50;
  std::optional<std::vector<int>> per_layer_percent;  // one entry per conv layer
  std::optional<std::uint64_t> differential_budget;   // total filters to prune
  int finetune_epochs_per_layer = 1;  // p
  int final_finetune_epochs = 2;      // q
  RetrainScope retrain_scope = RetrainScope::all;
  double data_fraction = 1.0;
  std::optional<std::vector<int>> skip_layers;  // layer ids; unset = family default
  std::optional<std::vector<int>> class_set;    // class-specific criterion
  std::uint64_t seed = 1;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  ResidualScope residual_scope = ResidualScope::first_only;
  int stats_bins = 10;
};

std::string describe_config(const PruneConfig& config);  // key=value echo

struct StepRecord {
  int step = 0;  // 1-based, pruning order (last conv first)
  int layer_id = -1;
  Criterion criterion = Criterion::random;
  std::size_t kept = 0;
  float acc_damage = 0.f;    // right after pruning, before fine-tuning
  float acc_recovery = 0.f;  // after the per-layer fine-tune
  int epochs_to_peak = 0;
  float wall_seconds = 0.f;
  std::uint64_t params = 0;
  std::uint64_t mult_adds = 0;
};

struct RunReport {
  std::vector<StepRecord> steps;
  float baseline_accuracy = 0.f;
  float final_accuracy = 0.f;
  int final_epochs_to_peak = 0;
  float total_wall_seconds = 0.f;
  std::string rng_name;
  std::string config_echo;
};

// First 1-based epoch whose accuracy is within `tolerance` of the curve's
// maximum (absolute accuracy points); 0 for an empty curve.
inline int epochs_to_peak(const std::vector<double>& curve, double tolerance = 0.0025) {
  if (curve.empty()) return 0;
  double peak = curve[0];
  for (double a : curve) peak = std::max(peak, a);
  for (std::size_t e = 0; e < curve.size(); ++e) {
    if (curve[e] >= peak - tolerance) return static_cast<int>(e) + 1;
  }
  return static_cast<int>(curve.size());
}

struct FineTuneOptions {
  int epochs = 1;
  RetrainScope scope = RetrainScope::all;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch = 64;
  int neighbor_of = -1;  // just-pruned conv layer id, for the neighbors scope
};

namespace detail {

// Trainable flags by layer id under a retrain scope. The neighbors scope
// unlocks the conv layers at conv-ordinal positions i-1, i, i+1 of the
// just-pruned conv layer i.
template <typename T>
std::vector<bool> trainable_mask(const NetworkGraph<T>& net, RetrainScope scope, int neighbor_of) {
  std::vector<bool> mask(net.layers.size(), false);
  switch (scope) {
    case RetrainScope::all:
      for (const auto& l : net.layers) mask[static_cast<std::size_t>(l.id)] = l.params.has_weights();
      break;
    case RetrainScope::fc_only:
      for (const auto& l : net.layers) {
        mask[static_cast<std::size_t>(l.id)] = l.params.kind == LayerKind::dense;
      }
      break;
    case RetrainScope::conv_only:
      for (const auto& l : net.layers) {
        mask[static_cast<std::size_t>(l.id)] = l.params.kind == LayerKind::conv2d;
      }
      break;
    case RetrainScope::neighbors: {
      // Neighbors are taken over the ordered weighted layers (convs and
      // denses alike), so pruning the last conv also unlocks the first
      // dense layer.
      std::vector<int> weighted;
      for (const auto& l : net.layers) {
        if (l.params.has_weights()) weighted.push_back(l.id);
      }
      std::ptrdiff_t ordinal = -1;
      for (std::size_t i = 0; i < weighted.size(); ++i) {
        if (weighted[i] == neighbor_of) ordinal = static_cast<std::ptrdiff_t>(i);
      }
      if (ordinal < 0) {
        fail(ErrorCategory::config,
             "neighbors scope needs the id of the just-pruned conv layer");
      }
      for (std::ptrdiff_t d = -1; d <= 1; ++d) {
        const std::ptrdiff_t at = ordinal + d;
        if (at < 0 || at >= static_cast<std::ptrdiff_t>(weighted.size())) continue;
        mask[static_cast<std::size_t>(weighted[static_cast<std::size_t>(at)])] = true;
      }
      break;
    }
  }
  return mask;
}

// Class-stratified sample of floor-rounded size per class (at least one
// per represented class). Deterministic in the seed.
inline std::vector<std::size_t> stratified_sample(const Dataset& data, double fraction,
                                                  std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    fail(ErrorCategory::config, "data fraction must lie in (0, 1]");
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.class_count));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::int32_t label = data.labels[i];
    if (label < 0 || label >= data.class_count) {
      fail(ErrorCategory::data, "label " + std::to_string(label) + " out of range");
    }
    by_class[static_cast<std::size_t>(label)].push_back(i);
  }
  std::vector<std::size_t> picked;
  Rng rng(seed, "splitmix64");
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& pool = by_class[c];
    if (pool.empty()) continue;
    Rng class_rng = rng.fork(c);
    shuffle(pool, class_rng);
    std::size_t take = static_cast<std::size_t>(fraction * static_cast<double>(pool.size()) + 0.5);
    take = std::max<std::size_t>(1, std::min(take, pool.size()));
    picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  }
  if (picked.empty()) fail(ErrorCategory::data, "sampled data fraction is empty");
  std::sort(picked.begin(), picked.end());
  return picked;
}

// Shuffled mini-batch SGD over `indices` of `data`. Velocities persist
// across epochs; frozen layers are never written.
template <typename T>
void train_epochs(NetworkGraph<T>& net, const Dataset& data,
                  const std::vector<std::size_t>& indices, int epochs,
                  const std::vector<bool>& trainable, double lr, double momentum,
                  std::size_t batch, std::uint64_t seed, const Dataset* eval_data,
                  std::vector<double>* eval_curve, int lr_drop_epoch = 0,
                  double lr_drop_factor = 0.1) {
  if (epochs < 0) fail(ErrorCategory::config, "epoch count must be non-negative");
  if (batch == 0) fail(ErrorCategory::config, "batch size must be positive");
  SgdOptimizer<T> optimizer(lr, momentum);
  std::vector<std::size_t> order = indices;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (lr_drop_epoch > 0 && epoch == lr_drop_epoch) optimizer.set_lr(lr * lr_drop_factor);
    Rng rng = Rng(seed, "splitmix64").fork(0x9000 + static_cast<std::uint64_t>(epoch));
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      Tensor<T> input = batch_images<T>(data, idx);
      std::vector<std::int32_t> labels = batch_labels(data, idx);
      zero_gradients(net);
      loss_and_backward(net, input, labels);
      optimizer.step(net, trainable);
    }
    if (eval_data && eval_curve) eval_curve->push_back(evaluate(net, *eval_data));
  }
}

}  // namespace detail

// SGD fine-tuning over a class-stratified sample of `data`. The complement
// of the scope's parameter set stays bit-identical.
template <typename T>
NetworkGraph<T> fine_tune(NetworkGraph<T> net, const Dataset& data, const FineTuneOptions& opts,
                          const Dataset* eval_data = nullptr,
                          std::vector<double>* eval_curve = nullptr) {
  if (opts.epochs == 0) return net;
  const std::vector<std::size_t> sample =
      detail::stratified_sample(data, opts.fraction, opts.seed);
  const std::vector<bool> trainable = detail::trainable_mask(net, opts.scope, opts.neighbor_of);
  detail::train_epochs(net, data, sample, opts.epochs, trainable, opts.lr, opts.momentum,
                       opts.batch, opts.seed, eval_data, eval_curve);
  return net;
}

struct TrainOptions {
  int epochs = 10;
  std::uint64_t seed = 1;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch = 64;
  int lr_drop_epoch = 0;  // 0 = constant lr; else lr * 0.1 from this epoch on
};

// Fresh initialization plus a full training loop; the smaller-from-scratch
// baseline and the CLI `train` verb both run through here.
template <typename T>
NetworkGraph<T> train_from_scratch(const ArchSpec& spec, const Dataset& data,
                                   const TrainOptions& opts, const Dataset* eval_data = nullptr,
                                   std::vector<double>* eval_curve = nullptr) {
  NetworkGraph<T> net = build_model<T>(spec, opts.seed);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::vector<bool> trainable = detail::trainable_mask(net, RetrainScope::all, -1);
  detail::train_epochs(net, data, all, opts.epochs, trainable, opts.lr, opts.momentum, opts.batch,
                       opts.seed, eval_data, eval_curve, opts.lr_drop_epoch);
  return net;
}

template <typename T>
NetworkGraph<T> train_from_scratch(const ArchSpec& spec, const Dataset& data, int epochs,
                                   std::uint64_t seed) {
  TrainOptions opts;
  opts.epochs = epochs;
  opts.seed = seed;
  return train_from_scratch<T>(spec, data, opts);
}

// Conv layers eligible for pruning under a config, ascending id order:
// residual-block third convs and any stem are structurally exempt, then
// skip_layers (defaulting to the first conv for the vgg family) is applied.
template <typename T>
std::vector<int> prunable_layers(const NetworkGraph<T>& net, const PruneConfig& config) {
  std::vector<int> candidates;
  if (net.residual_links.empty()) {
    candidates = conv_layer_ids(net);
  } else {
    for (const ResidualBlock& block : residual_blocks(net)) {
      candidates.push_back(block.conv1);
      if (config.residual_scope == ResidualScope::first_two) candidates.push_back(block.conv2);
    }
    std::sort(candidates.begin(), candidates.end());
  }
  std::vector<int> skips;
  if (config.skip_layers.has_value()) {
    skips = *config.skip_layers;
  } else if (net.residual_links.empty()) {
    const auto convs = conv_layer_ids(net);
    if (!convs.empty()) skips.push_back(convs.front());  // cheap layer, costly to prune
  }
  std::vector<int> out;
  for (int id : candidates) {
    bool skip = false;
    for (int s : skips) skip = skip || s == id;
    if (!skip) out.push_back(id);
  }
  return out;
}

// Algorithm: walk conv layers from the last toward the first; per layer
// score, select, prune, measure damage, fine-tune for p epochs, measure
// recovery; afterwards fine-tune the whole pruned net for q epochs at a
// tenth of the learning rate. Bit-reproducible for a fixed seed. When a
// step fails, the completed step records are flushed into *partial_out
// before the error propagates.
template <typename T>
std::pair<NetworkGraph<T>, RunReport> run_prune_schedule(NetworkGraph<T> net,
                                                         const PruneConfig& config,
                                                         const Dataset& train_data,
                                                         const Dataset& eval_data,
                                                         RunReport* partial_out = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto run_start = clock::now();
  validate(net);
  if (config.finetune_epochs_per_layer < 0 || config.final_finetune_epochs < 0) {
    fail(ErrorCategory::config, "fine-tune epoch counts must be non-negative");
  }

  RunReport report;
  report.rng_name = Rng(0).name();
  report.config_echo = describe_config(config);
  report.baseline_accuracy = static_cast<float>(evaluate(net, eval_data));

  std::vector<int> prunable = prunable_layers(net, config);
  const std::vector<int> all_convs = conv_layer_ids(net);

  // Keep targets are fixed up front from the unpruned layer widths.
  std::vector<std::pair<int, std::size_t>> keep_plan;  // (layer id, keep count)
  if (config.differential_budget.has_value()) {
    std::vector<std::size_t> sizes;
    for (int id : prunable) sizes.push_back(net.layer(id).params.weights.dim(0));
    std::vector<std::size_t> keeps = allocate_differential(sizes, *config.differential_budget);
    for (std::size_t i = 0; i < prunable.size(); ++i) keep_plan.emplace_back(prunable[i], keeps[i]);
  } else {
    for (int id : prunable) {
      int percent = config.prune_percent;
      if (config.per_layer_percent.has_value()) {
        const auto& per_layer = *config.per_layer_percent;
        if (per_layer.size() != all_convs.size()) {
          fail(ErrorCategory::config, "per-layer percent list must have one entry per conv layer");
        }
        for (std::size_t k = 0; k < all_convs.size(); ++k) {
          if (all_convs[k] == id) percent = per_layer[k];
        }
      }
      keep_plan.emplace_back(id, keep_count_for(net.layer(id).params.weights.dim(0), percent).keep);
    }
  }

  // Last conv layer first.
  std::sort(keep_plan.begin(), keep_plan.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  int last_pruned = -1;
  int step_index = 0;
  try {
  for (const auto& [layer_id, keep_count] : keep_plan) {
    const auto step_start = clock::now();
    ++step_index;

    StatsBundle stats;
    const StatsBundle* stats_ptr = nullptr;
    if (criterion_needs_stats(config.criterion)) {
      StatsOptions stat_opts;
      stat_opts.bins = config.stats_bins;
      stat_opts.with_gradients = criterion_needs_gradients(config.criterion);
      const std::vector<std::size_t> sample = detail::stratified_sample(
          train_data, config.data_fraction,
          Rng(config.seed).fork(0x57A7 + static_cast<std::uint64_t>(layer_id)).next_u64());
      Dataset sampled = dataset_slice(train_data, sample);
      stats = collect_stats(net, sampled, stat_opts);
      stats_ptr = &stats;
    }
    std::optional<std::uint64_t> score_seed;
    if (config.criterion == Criterion::random) {
      score_seed = Rng(config.seed).fork(0xF1F + static_cast<std::uint64_t>(layer_id)).next_u64();
    }
    const std::vector<int>* class_set =
        config.class_set.has_value() ? &*config.class_set : nullptr;
    FilterScore scores = score_filters(config.criterion, net.layer(layer_id), stats_ptr,
                                       class_set, score_seed);
    const std::vector<std::size_t> kept = select_top_m(scores, keep_count);
    net = prune_layer(net, layer_id, kept);
    last_pruned = layer_id;

    StepRecord record;
    record.step = step_index;
    record.layer_id = layer_id;
    record.criterion = config.criterion;
    record.kept = kept.size();
    record.acc_damage = static_cast<float>(evaluate(net, eval_data));

    if (config.finetune_epochs_per_layer > 0) {
      FineTuneOptions ft;
      ft.epochs = config.finetune_epochs_per_layer;
      ft.scope = config.retrain_scope;
      ft.fraction = config.data_fraction;
      ft.seed = Rng(config.seed).fork(0xF7 + static_cast<std::uint64_t>(layer_id)).next_u64();
      ft.lr = config.lr;
      ft.momentum = config.momentum;
      ft.batch = config.batch_size;
      ft.neighbor_of = layer_id;
      std::vector<double> curve;
      net = fine_tune(std::move(net), train_data, ft, &eval_data, &curve);
      record.acc_recovery = static_cast<float>(curve.back());
      record.epochs_to_peak = epochs_to_peak(curve);
    } else {
      record.acc_recovery = record.acc_damage;
      record.epochs_to_peak = 0;
    }

    const CostSummary cost = count_costs(net);
    record.params = cost.params;
    record.mult_adds = cost.mult_adds;
    record.wall_seconds = std::chrono::duration<float>(clock::now() - step_start).count();
    report.steps.push_back(record);
  }

  if (config.final_finetune_epochs > 0) {
    FineTuneOptions ft;
    ft.epochs = config.final_finetune_epochs;
    ft.scope = config.retrain_scope;
    ft.fraction = config.data_fraction;
    ft.seed = Rng(config.seed).fork(0xFA11).next_u64();
    ft.lr = config.lr / 10.0;  // final pass runs gentler
    ft.momentum = config.momentum;
    ft.batch = config.batch_size;
    ft.neighbor_of = last_pruned;
    std::vector<double> curve;
    net = fine_tune(std::move(net), train_data, ft, &eval_data, &curve);
    report.final_accuracy = static_cast<float>(curve.back());
    report.final_epochs_to_peak = epochs_to_peak(curve);
  } else {
    report.final_accuracy =
        report.steps.empty() ? report.baseline_accuracy : report.steps.back().acc_recovery;
    report.final_epochs_to_peak = 0;
  }
  } catch (...) {
    if (partial_out) {
      report.total_wall_seconds =
          std::chrono::duration<float>(clock::now() - run_start).count();
      *partial_out = report;
    }
    throw;
  }
  report.total_wall_seconds = std::chrono::duration<float>(clock::now() - run_start).count();
  return {std::move(net), std::move(report)};
}

}  // namespace prunekit
