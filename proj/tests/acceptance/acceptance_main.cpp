// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria 6-8 train and prune real models, so the full
// run takes several minutes of CPU time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "prunekit/checkpoint.hpp"
#include "prunekit/config.hpp"
#include "prunekit/criteria.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/evaluate.hpp"
#include "prunekit/gradcheck.hpp"
#include "prunekit/pipeline.hpp"
#include "prunekit/report.hpp"
#include "prunekit/stats.hpp"
#include "prunekit/surgery.hpp"

using namespace prunekit;

namespace {

struct CriterionResult {
  int number = 0;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<CriterionResult> g_results;

template <typename Fn>
void run_criterion(int number, const std::string& title, Fn&& fn) {
  CriterionResult result;
  result.number = number;
  const auto start = std::chrono::steady_clock::now();
  try {
    result = fn();
  } catch (const std::exception& e) {
    result.pass = false;
    result.detail = std::string("exception: ") + e.what();
  }
  result.number = number;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("[%2d] %s  %s: %s (%.1fs)\n", number, result.pass ? "PASS" : "FAIL", title.c_str(),
              result.detail.c_str(), result.seconds);
  std::fflush(stdout);
  g_results.push_back(result);
}

// Shared fixtures -----------------------------------------------------------

constexpr std::uint64_t kDataSeed = 1;

SynthSpec acceptance_synth() {
  SynthSpec spec;
  spec.seed = kDataSeed;
  spec.class_count = 10;
  spec.train_n = 2000;
  spec.eval_n = 500;
  spec.channels = 1;
  spec.height = 16;
  spec.width = 16;
  spec.noise = 1.0;
  return spec;
}

ArchSpec wide_arch() {
  ArchSpec spec;
  spec.family = ArchFamily::vgg_tiny;
  spec.filters_per_layer = {16, 32, 32, 32};
  spec.input_channels = 1;
  spec.input_height = 16;
  spec.input_width = 16;
  spec.class_count = 10;
  return spec;
}

ArchSpec deep_arch() {
  ArchSpec spec = wide_arch();
  spec.filters_per_layer = {8, 8, 16, 16, 16, 16};
  return spec;
}

ArchSpec small_vgg_arch() {
  ArchSpec spec = wide_arch();
  spec.filters_per_layer = {8, 8, 16, 16};
  return spec;
}

ArchSpec small_resnet_arch() {
  ArchSpec spec;
  spec.family = ArchFamily::resnet_tiny;
  spec.filters_per_layer = {4, 6, 6};
  spec.input_channels = 4;
  spec.input_height = 8;
  spec.input_width = 8;
  spec.class_count = 10;
  return spec;
}

TrainOptions baseline_train_options(std::uint64_t seed) {
  TrainOptions opts;
  opts.epochs = 20;
  opts.seed = seed;
  opts.lr = 0.01;
  opts.momentum = 0.9;
  opts.batch = 32;
  opts.lr_drop_epoch = 16;
  return opts;
}

PruneConfig plasticity_config(Criterion criterion, std::uint64_t seed) {
  PruneConfig config;
  config.criterion = criterion;
  config.prune_percent = 50;
  config.finetune_epochs_per_layer = 2;
  config.final_finetune_epochs = 4;
  config.retrain_scope = RetrainScope::all;
  config.data_fraction = 0.5;
  config.seed = seed;
  config.lr = 0.01;
  config.momentum = 0.9;
  config.batch_size = 32;
  return config;
}

struct Fixtures {
  DatasetPair data;
  NetworkGraph<float> wide_baseline;
  double wide_baseline_acc = 0.0;
  NetworkGraph<float> deep_baseline;
};

Fixtures build_fixtures() {
  Fixtures f;
  std::printf("-- building fixtures: synthetic dataset + two trained baselines --\n");
  std::fflush(stdout);
  f.data = generate_synthetic(acceptance_synth(), "synth10");
  f.wide_baseline = train_from_scratch<float>(wide_arch(), f.data.train, baseline_train_options(1));
  f.wide_baseline_acc = evaluate(f.wide_baseline, f.data.eval);
  f.deep_baseline = train_from_scratch<float>(deep_arch(), f.data.train, baseline_train_options(1));
  std::printf("-- baselines ready: wide %.4f, deep %.4f --\n", f.wide_baseline_acc,
              evaluate(f.deep_baseline, f.data.eval));
  std::fflush(stdout);
  return f;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Criterion 1 ---------------------------------------------------------------

CriterionResult criterion_gradients(const Fixtures& f) {
  CriterionResult r;
  const auto start = std::chrono::steady_clock::now();

  auto vgg = build_model<double>(small_vgg_arch(), 55);
  LabeledSample<double> vgg_sample;
  vgg_sample.input = batch_images<double>(f.data.eval, {0});
  vgg_sample.label = f.data.eval.labels[0];
  const double vgg_err = check_gradients(vgg, vgg_sample, 1e-5, 60);

  auto resnet = build_model<double>(small_resnet_arch(), 56);
  Rng rng(6);
  LabeledSample<double> res_sample;
  res_sample.input = Tensor<double>({1, 4, 8, 8});
  for (auto& v : res_sample.input.data) v = rng.uniform(-1, 1);
  res_sample.label = 3;
  const double res_err = check_gradients(resnet, res_sample, 1e-5, 60);

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.pass = vgg_err < 1e-4 && res_err < 1e-4 && seconds < 60.0;
  char buf[160];
  std::snprintf(buf, sizeof buf, "vgg-tiny %.2e, resnet-tiny %.2e, %.1fs (limits 1e-4, 60s)",
                vgg_err, res_err, seconds);
  r.detail = buf;
  return r;
}

// Criterion 2 ---------------------------------------------------------------

CriterionResult criterion_scoring_oracles() {
  CriterionResult r;
  bool ok = true;
  std::string why;

  // entropy of a uniform 10-bin histogram
  StatsBundle stats;
  stats.bins = 10;
  stats.class_count = 2;
  stats.class_image_count = {0, 0};
  LayerStats ls;
  ls.layer_id = 0;
  ls.filter_count = 2;
  ls.bin_hi = 1.0;
  ls.image_count = 30;
  ls.sum_activation = {3.0, 0.0};
  ls.zero_count = {0, 120};
  ls.element_count = {120, 120};
  ls.histogram.assign(20, 0);
  for (int j = 0; j < 10; ++j) ls.histogram[static_cast<std::size_t>(j)] = 3;
  ls.histogram[10] = 30;  // filter 1: single bin
  ls.grad_l1_sum = {0, 0};
  ls.class_grad_l1_sum.assign(4, 0.0);
  stats.layers.push_back(ls);

  const double uniform_entropy = entropy(stats, 0, 0);
  if (std::abs(uniform_entropy - std::log(10.0)) >= 1e-12) {
    ok = false;
    why += " entropy(uniform)!=ln10;";
  }
  if (entropy(stats, 0, 1) != 0.0) {
    ok = false;
    why += " entropy(point mass)!=0;";
  }

  // APoZ extremes through the scoring path (higher = keep)
  GraphLayer<double> layer;
  layer.id = 0;
  layer.params = make_conv<double>(2, 3, 3, 3);
  FilterScore apoz_scores = score_filters<double>(Criterion::apoz, layer, &stats);
  if (apoz_scores.scores[0] != 1.0 || apoz_scores.scores[1] != 0.0) {
    ok = false;
    why += " apoz extremes;";
  }

  // l1 vs independent oracle, exact, over 100 random filters
  Rng rng(12);
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    GraphLayer<double> l;
    l.id = 0;
    l.params = make_conv<double>(4, 3, 3, 3);
    for (auto& w : l.params.weights.data) w = rng.uniform(-2, 2);
    FilterScore s = score_filters<double>(Criterion::l1_norm, l);
    const std::size_t per_filter = 27;
    for (std::size_t filt = 0; filt < 4; ++filt) {
      double oracle = 0.0;
      for (std::size_t k = 0; k < per_filter; ++k) {
        oracle += std::abs(l.params.weights.data[filt * per_filter + k]);
      }
      if (s.scores[filt] != oracle) {
        ok = false;
        why += " l1 mismatch;";
      }
      ++checked;
    }
  }

  r.pass = ok;
  r.detail = ok ? "entropy=ln10 exact, apoz extremes exact, l1 == oracle on " +
                      std::to_string(checked) + " filters"
                : why;
  return r;
}

// Criterion 3 ---------------------------------------------------------------

template <typename T>
void zero_consumer_slices(NetworkGraph<T>& net, int layer_id, std::size_t filter) {
  const std::size_t channels = net.layer(layer_id).params.weights.dim(0);
  std::vector<int> frontier{layer_id};
  while (!frontier.empty()) {
    const int id = frontier.back();
    frontier.pop_back();
    for (int consumer : net.layer(id).consumers) {
      LayerParams<T>& p = net.layer(consumer).params;
      if (p.kind == LayerKind::relu || p.kind == LayerKind::maxpool2x2) {
        frontier.push_back(consumer);
      } else if (p.kind == LayerKind::conv2d) {
        const std::size_t in_ch = p.weights.dim(1);
        const std::size_t plane = p.weights.dim(2) * p.weights.dim(3);
        for (std::size_t oc = 0; oc < p.weights.dim(0); ++oc) {
          for (std::size_t k = 0; k < plane; ++k) {
            p.weights.data[(oc * in_ch + filter) * plane + k] = T(0);
          }
        }
      } else if (p.kind == LayerKind::dense) {
        const std::size_t in_f = p.weights.dim(1);
        const std::size_t spatial = in_f / channels;
        for (std::size_t o = 0; o < p.weights.dim(0); ++o) {
          for (std::size_t s = 0; s < spatial; ++s) {
            p.weights.data[o * in_f + filter * spatial + s] = T(0);
          }
        }
      }
    }
  }
}

CriterionResult criterion_dead_channel() {
  CriterionResult r;
  Rng rng(2024);
  int nets = 0, inputs_checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    ArchSpec spec;
    spec.family = ArchFamily::vgg_tiny;
    const std::size_t layers = 2 + rng.next_below(3);
    static const std::size_t widths[] = {4, 6, 8, 12, 16};
    for (std::size_t i = 0; i < layers; ++i) {
      spec.filters_per_layer.push_back(widths[rng.next_below(5)]);
    }
    spec.input_channels = 1 + rng.next_below(2);
    spec.input_height = 16;
    spec.input_width = 16;
    spec.class_count = 4;
    auto net = build_model<float>(spec, 3000 + static_cast<std::uint64_t>(trial));

    const auto convs = conv_layer_ids(net);
    const int victim_layer = convs[rng.next_below(convs.size())];
    const std::size_t filters = net.layer(victim_layer).params.weights.dim(0);
    const std::size_t victim = rng.next_below(filters);
    zero_consumer_slices(net, victim_layer, victim);

    std::vector<std::size_t> kept;
    for (std::size_t filt = 0; filt < filters; ++filt) {
      if (filt != victim) kept.push_back(filt);
    }
    auto pruned = prune_layer(net, victim_layer, kept);
    ++nets;

    for (int i = 0; i < 10; ++i) {
      Tensor<float> in(net.input_shape(1));
      for (auto& v : in.data) v = static_cast<float>(rng.uniform(-1, 1));
      Tensor<float> a = forward(net, in);
      Tensor<float> b = forward(pruned, in);
      if (a.shape != b.shape ||
          std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(float)) != 0) {
        r.pass = false;
        r.detail = "forward outputs differ after dead-channel prune (net " +
                   std::to_string(trial) + ")";
        return r;
      }
      ++inputs_checked;
    }
  }
  r.pass = true;
  r.detail = "bit-identical outputs on " + std::to_string(nets) + " nets x 10 inputs (" +
             std::to_string(inputs_checked) + " checks)";
  return r;
}

// Criterion 4 ---------------------------------------------------------------

CriterionResult criterion_cost_accounting(const Fixtures& f) {
  CriterionResult r;
  auto net = build_model<float>(wide_arch(), 11);
  PruneConfig config = plasticity_config(Criterion::random, 9);
  config.finetune_epochs_per_layer = 0;
  config.final_finetune_epochs = 0;
  config.skip_layers = std::vector<int>{};
  auto [pruned, report] = run_prune_schedule(net, config, f.data.train, f.data.eval);

  const auto shapes = layer_shapes(net, 1);
  const auto costs = layer_costs(pruned);
  std::size_t in_ch = net.input_channels;
  bool ok = true;
  for (int id : conv_layer_ids(net)) {
    const std::size_t keep = keep_count_for(net.layer(id).params.weights.dim(0), 50).keep;
    const auto& os = shapes[static_cast<std::size_t>(id)];
    const std::uint64_t expected = static_cast<std::uint64_t>(keep) * in_ch * 9 * os[2] * os[3];
    if (costs[static_cast<std::size_t>(id)].mult_adds != expected) ok = false;
    in_ch = keep;
  }
  r.pass = ok;
  r.detail = ok ? "per-layer mult-adds equal the keep_count_for closed form exactly"
                : "closed-form cost prediction mismatch";
  return r;
}

// Criterion 5 ---------------------------------------------------------------

CriterionResult criterion_differential() {
  CriterionResult r;
  const std::vector<std::size_t> sizes = {64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512};
  const std::vector<std::size_t> reference = {59, 59, 108, 108, 175, 175, 175, 185, 185, 185, 185};
  const std::vector<std::size_t> keep = allocate_differential(sizes, 1600);

  std::uint64_t pruned_total = 0;
  std::size_t max_dev = 0;
  bool monotone = true;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    pruned_total += sizes[i] - keep[i];
    const std::size_t dev = keep[i] > reference[i] ? keep[i] - reference[i] : reference[i] - keep[i];
    max_dev = std::max(max_dev, dev);
    for (std::size_t j = 0; j < sizes.size(); ++j) {
      if (sizes[i] < sizes[j] &&
          (sizes[i] - keep[i]) * sizes[j] > (sizes[j] - keep[j]) * sizes[i]) {
        monotone = false;
      }
    }
  }
  r.pass = pruned_total == 1600 && monotone && max_dev <= 2;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "pruned %llu/1600, fractions monotone=%s, max reference deviation %zu (<=2)",
                static_cast<unsigned long long>(pruned_total), monotone ? "yes" : "no", max_dev);
  r.detail = buf;
  return r;
}

// Criterion 6 ---------------------------------------------------------------

CriterionResult criterion_plasticity(const Fixtures& f, std::vector<double>& l1_finals_out) {
  CriterionResult r;
  const std::vector<Criterion> criteria = {Criterion::random, Criterion::l1_norm,
                                           Criterion::entropy, Criterion::apoz,
                                           Criterion::mean_activation};
  const std::vector<std::uint64_t> seeds = {5, 6, 7};

  std::vector<std::vector<double>> finals(criteria.size());
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    for (std::uint64_t seed : seeds) {
      auto [net, report] = run_prune_schedule(f.wide_baseline,
                                              plasticity_config(criteria[c], seed), f.data.train,
                                              f.data.eval);
      finals[c].push_back(report.final_accuracy);
      std::printf("     %-16s seed %llu: final %.4f (baseline %.4f)\n",
                  criterion_name(criteria[c]), static_cast<unsigned long long>(seed),
                  report.final_accuracy, f.wide_baseline_acc);
      std::fflush(stdout);
    }
  }
  l1_finals_out = finals[1];

  double gap_sum = 0.0;
  for (std::size_t s = 0; s < seeds.size(); ++s) gap_sum += std::abs(finals[0][s] - finals[1][s]);
  const double mean_gap = gap_sum / static_cast<double>(seeds.size());

  double worst_baseline_gap = 0.0;
  const char* worst_name = "";
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    double mean = 0.0;
    for (double v : finals[c]) mean += v;
    mean /= static_cast<double>(finals[c].size());
    const double gap = std::abs(mean - f.wide_baseline_acc);
    if (gap > worst_baseline_gap) {
      worst_baseline_gap = gap;
      worst_name = criterion_name(criteria[c]);
    }
  }

  r.pass = mean_gap <= 0.03 && worst_baseline_gap <= 0.06;
  r.detail = "mean |random - l1| = " + fmt(mean_gap) + " (<=0.03); worst baseline gap " +
             fmt(worst_baseline_gap) + " at " + worst_name + " (<=0.06)";
  return r;
}

// Criterion 7 ---------------------------------------------------------------

CriterionResult criterion_scratch(const Fixtures& f, const std::vector<double>& l1_finals) {
  CriterionResult r;
  // Budget-matched half-width baseline: the schedule spends
  // (3 steps * p + q) * fraction = 5 full-data epochs of updates.
  ArchSpec half = wide_arch();
  for (auto& w : half.filters_per_layer) w /= 2;

  std::vector<double> scratch_finals;
  for (std::uint64_t seed : {3ull, 4ull, 5ull}) {
    TrainOptions opts;
    opts.epochs = 5;
    opts.seed = seed;
    opts.lr = 0.01;
    opts.momentum = 0.9;
    opts.batch = 32;
    auto net = train_from_scratch<float>(half, f.data.train, opts);
    scratch_finals.push_back(evaluate(net, f.data.eval));
  }
  double scratch_mean = 0.0, pruned_mean = 0.0;
  for (double v : scratch_finals) scratch_mean += v;
  scratch_mean /= static_cast<double>(scratch_finals.size());
  for (double v : l1_finals) pruned_mean += v;
  pruned_mean /= static_cast<double>(l1_finals.size());

  r.pass = scratch_mean <= pruned_mean + 0.01;
  r.detail = "scratch half-width " + fmt(scratch_mean) + " vs pruned+tuned " + fmt(pruned_mean) +
             " (+0.01 allowance)";
  return r;
}

// Criterion 8 ---------------------------------------------------------------

CriterionResult criterion_retrain_scopes(const Fixtures& f) {
  CriterionResult r;
  const std::vector<RetrainScope> scopes = {RetrainScope::conv_only, RetrainScope::neighbors,
                                            RetrainScope::fc_only};
  std::vector<double> means(scopes.size(), 0.0);
  const std::vector<std::uint64_t> seeds = {5, 6, 7};
  for (std::size_t s = 0; s < scopes.size(); ++s) {
    for (std::uint64_t seed : seeds) {
      PruneConfig config;
      config.criterion = Criterion::random;
      config.prune_percent = 50;
      config.finetune_epochs_per_layer = 2;
      config.final_finetune_epochs = 0;
      config.retrain_scope = scopes[s];
      config.data_fraction = 0.1;
      config.skip_layers = std::vector<int>{};
      config.seed = seed;
      config.lr = 0.01;
      config.momentum = 0.9;
      config.batch_size = 32;
      auto [net, report] =
          run_prune_schedule(f.deep_baseline, config, f.data.train, f.data.eval);
      means[s] += report.final_accuracy;
      std::printf("     %-10s seed %llu: final %.4f\n", retrain_scope_name(scopes[s]),
                  static_cast<unsigned long long>(seed), report.final_accuracy);
      std::fflush(stdout);
    }
    means[s] /= static_cast<double>(seeds.size());
  }
  r.pass = means[0] >= means[1] && means[1] >= means[2];
  r.detail = "mean finals: conv-only " + fmt(means[0]) + " >= neighbors " + fmt(means[1]) +
             " >= fc-only " + fmt(means[2]);
  return r;
}

// Criterion 9 ---------------------------------------------------------------

CriterionResult criterion_cli_determinism(const Fixtures& f) {
  CriterionResult r;
#ifndef PRUNEKIT_BIN_PATH
  r.pass = false;
  r.detail = "prunekit binary path not compiled in";
  return r;
#else
  const std::string dir = "/tmp/prunekit_acceptance";
  if (std::system(("mkdir -p " + dir).c_str()) != 0) {
    r.pass = false;
    r.detail = "cannot create scratch directory";
    return r;
  }
  save_dataset_file(dir + "/train.ds", f.data.train);
  save_dataset_file(dir + "/eval.ds", f.data.eval);
  save_checkpoint_file(dir + "/base.ckpt", f.wide_baseline);
  {
    std::FILE* cfg = std::fopen((dir + "/run.cfg").c_str(), "wb");
    if (!cfg) fail(ErrorCategory::io, "cannot write config");
    const char* text =
        "criterion = entropy\nprune_percent = 50\nfinetune_epochs_per_layer = 1\n"
        "final_finetune_epochs = 1\ndata_fraction = 0.3\nseed = 12\nlr = 0.01\n"
        "batch_size = 32\n";
    std::fwrite(text, 1, std::strlen(text), cfg);
    std::fclose(cfg);
  }
  const std::string base_cmd = std::string(PRUNEKIT_BIN_PATH) + " prune --model " + dir +
                               "/base.ckpt --train " + dir + "/train.ds --eval " + dir +
                               "/eval.ds --config " + dir + "/run.cfg --out " + dir;
  const int rc1 =
      std::system((base_cmd + "/a.ckpt --report " + dir + "/a.csv > /dev/null").c_str());
  const int rc2 =
      std::system((base_cmd + "/b.ckpt --report " + dir + "/b.csv > /dev/null").c_str());
  if (rc1 != 0 || rc2 != 0) {
    r.pass = false;
    r.detail = "prunekit prune exited nonzero";
    return r;
  }
  auto read_bytes = [](const std::string& path) {
    std::FILE* file = std::fopen(path.c_str(), "rb");
    std::string bytes;
    if (!file) return bytes;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, file)) > 0) bytes.append(buf, n);
    std::fclose(file);
    return bytes;
  };
  const std::string a = read_bytes(dir + "/a.csv");
  const std::string b = read_bytes(dir + "/b.csv");
  r.pass = !a.empty() && a == b;
  r.detail = r.pass ? "two `prune` runs produced byte-identical CSVs (" +
                          std::to_string(a.size()) + " bytes)"
                    : "CSV outputs differ between identical runs";
  return r;
#endif
}

// Criterion 10 --------------------------------------------------------------

CriterionResult criterion_bookkeeping(const Fixtures& f) {
  CriterionResult r;
  bool ok = true;
  std::string why;

  PruneConfig frozen = plasticity_config(Criterion::random, 4);
  frozen.finetune_epochs_per_layer = 0;
  frozen.final_finetune_epochs = 0;
  auto [net50, rep50] = run_prune_schedule(f.wide_baseline, frozen, f.data.train, f.data.eval);
  for (const StepRecord& s : rep50.steps) {
    if (s.acc_damage != s.acc_recovery) {
      ok = false;
      why += " p=q=0 damage!=recovery;";
    }
  }

  PruneConfig noop = frozen;
  noop.prune_percent = 0;
  auto [net0, rep0] = run_prune_schedule(f.wide_baseline, noop, f.data.train, f.data.eval);
  if (rep0.final_accuracy != rep0.baseline_accuracy) {
    ok = false;
    why += " m=0 final!=baseline;";
  }
  for (const StepRecord& s : rep0.steps) {
    if (s.acc_damage != rep0.baseline_accuracy || s.acc_recovery != s.acc_damage) {
      ok = false;
      why += " m=0 damage!=baseline;";
    }
  }
  r.pass = ok;
  r.detail = ok ? "p=q=0: damage==recovery per step; m=0: per-step and final accuracy == baseline"
                : why;
  return r;
}

}  // namespace

int main() {
  std::printf("prunekit acceptance suite\n=========================\n");
  Fixtures fixtures = build_fixtures();
  std::vector<double> l1_finals;

  run_criterion(1, "gradient correctness (64-bit, both families)",
                [&] { return criterion_gradients(fixtures); });
  run_criterion(2, "criteria scoring oracles", [&] { return criterion_scoring_oracles(); });
  run_criterion(3, "dead-channel pruning exactness", [&] { return criterion_dead_channel(); });
  run_criterion(4, "cost accounting closed form", [&] { return criterion_cost_accounting(fixtures); });
  run_criterion(5, "differential allocation vs reference widths",
                [&] { return criterion_differential(); });
  run_criterion(6, "plasticity: random vs principled criteria",
                [&] { return criterion_plasticity(fixtures, l1_finals); });
  run_criterion(7, "smaller-from-scratch stays behind pruned+tuned",
                [&] { return criterion_scratch(fixtures, l1_finals); });
  run_criterion(8, "retrain-scope ordering", [&] { return criterion_retrain_scopes(fixtures); });
  run_criterion(9, "CLI determinism (byte-identical reports)",
                [&] { return criterion_cli_determinism(fixtures); });
  run_criterion(10, "schedule bookkeeping identities",
                [&] { return criterion_bookkeeping(fixtures); });

  int passed = 0;
  for (const CriterionResult& r : g_results) passed += r.pass ? 1 : 0;
  std::printf("=========================\nACCEPTANCE: %d/%zu criteria passed\n", passed,
              g_results.size());
  return passed == static_cast<int>(g_results.size()) ? 0 : 1;
}
