#include <cstring>

#include "doctest.h"
#include "prunekit/config.hpp"
#include "prunekit/pipeline.hpp"
#include "prunekit/report.hpp"
#include "testutil.hpp"

using namespace prunekit;

namespace {

DatasetPair pipeline_data() {
  SynthSpec spec;
  spec.seed = 101;
  spec.class_count = 10;
  spec.train_n = 120;
  spec.eval_n = 60;
  return generate_synthetic(spec, "synth");
}

PruneConfig fast_config() {
  PruneConfig config;
  config.criterion = Criterion::l1_norm;
  config.prune_percent = 50;
  config.finetune_epochs_per_layer = 1;
  config.final_finetune_epochs = 1;
  config.data_fraction = 0.5;
  config.seed = 3;
  config.lr = 0.02;
  config.batch_size = 16;
  return config;
}

template <typename T>
std::vector<std::vector<T>> snapshot_weights(const NetworkGraph<T>& net) {
  std::vector<std::vector<T>> out;
  for (const auto& l : net.layers) {
    out.push_back(l.params.weights.data);
    out.push_back(l.params.bias.data);
  }
  return out;
}

}  // namespace

TEST_CASE("no-op schedule: m=0, p=q=0 shows zero damage and keeps the baseline") {
  DatasetPair data = pipeline_data();
  auto net = train_from_scratch<float>(testutil::tiny_vgg_spec(), data.train,
                                       TrainOptions{2, 7, 0.02, 0.9, 16});
  PruneConfig config = fast_config();
  config.prune_percent = 0;
  config.finetune_epochs_per_layer = 0;
  config.final_finetune_epochs = 0;

  auto [pruned, report] = run_prune_schedule(net, config, data.train, data.eval);
  REQUIRE(report.steps.size() == 3);  // first conv skipped by default
  for (const StepRecord& s : report.steps) {
    CHECK(s.acc_damage == report.baseline_accuracy);
    CHECK(s.acc_recovery == s.acc_damage);
    CHECK(s.kept == net.layer(s.layer_id).params.weights.dim(0));
  }
  CHECK(report.final_accuracy == report.baseline_accuracy);

  // the network function is untouched
  Rng rng(5);
  Tensor<float> in(net.input_shape(2));
  for (auto& v : in.data) v = static_cast<float>(rng.uniform(-1, 1));
  Tensor<float> a = forward(net, in);
  Tensor<float> b = forward(pruned, in);
  CHECK(std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("p=q=0 with real pruning: damage equals recovery at every step") {
  DatasetPair data = pipeline_data();
  auto net = train_from_scratch<float>(testutil::tiny_vgg_spec(), data.train,
                                       TrainOptions{1, 7, 0.02, 0.9, 16});
  PruneConfig config = fast_config();
  config.criterion = Criterion::random;
  config.finetune_epochs_per_layer = 0;
  config.final_finetune_epochs = 0;

  auto [pruned, report] = run_prune_schedule(net, config, data.train, data.eval);
  for (const StepRecord& s : report.steps) {
    CHECK(s.acc_recovery == s.acc_damage);
    CHECK(s.epochs_to_peak == 0);
  }
}

TEST_CASE("schedule visits non-skipped conv layers from last to first") {
  DatasetPair data = pipeline_data();
  auto net = build_model<float>(testutil::tiny_vgg_spec(), 7);
  PruneConfig config = fast_config();
  config.finetune_epochs_per_layer = 0;
  config.final_finetune_epochs = 0;

  auto [pruned, report] = run_prune_schedule(net, config, data.train, data.eval);
  const auto convs = conv_layer_ids(net);
  REQUIRE(report.steps.size() == convs.size() - 1);
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    CHECK(report.steps[i].step == static_cast<int>(i) + 1);
    CHECK(report.steps[i].layer_id == convs[convs.size() - 1 - i]);
  }

  // explicit empty skip list prunes every conv layer
  config.skip_layers = std::vector<int>{};
  auto [pruned2, report2] = run_prune_schedule(net, config, data.train, data.eval);
  CHECK(report2.steps.size() == convs.size());
}

TEST_CASE("uniform m=50: kept counts and costs match the closed-form oracle") {
  DatasetPair data = pipeline_data();
  auto net = build_model<float>(testutil::tiny_vgg_spec(), 7);
  PruneConfig config = fast_config();
  config.criterion = Criterion::random;
  config.finetune_epochs_per_layer = 0;
  config.final_finetune_epochs = 0;
  config.skip_layers = std::vector<int>{};

  auto [pruned, report] = run_prune_schedule(net, config, data.train, data.eval);

  // every conv layer keeps keep_count_for(n, 50)
  for (const StepRecord& s : report.steps) {
    const std::size_t original = net.layer(s.layer_id).params.weights.dim(0);
    CHECK(s.kept == keep_count_for(original, 50).keep);
    CHECK(pruned.layer(s.layer_id).params.weights.dim(0) == s.kept);
  }

  // closed-form conv cost prediction: n'_k * i'_k * k*k * out_spatial
  const auto shapes = layer_shapes(net, 1);
  const auto pruned_costs = layer_costs(pruned);
  std::size_t in_ch = net.input_channels;
  for (int id : conv_layer_ids(net)) {
    const std::size_t n_pruned = keep_count_for(net.layer(id).params.weights.dim(0), 50).keep;
    const auto& os = shapes[static_cast<std::size_t>(id)];
    const std::uint64_t expected = static_cast<std::uint64_t>(n_pruned) * in_ch * 3 * 3 *
                                   os[2] * os[3];
    CHECK(pruned_costs[static_cast<std::size_t>(id)].mult_adds == expected);
    in_ch = n_pruned;
  }
}

TEST_CASE("differential budget: total pruned filters equals the budget") {
  DatasetPair data = pipeline_data();
  auto net = build_model<float>(testutil::tiny_vgg_spec(), 7);
  PruneConfig config = fast_config();
  config.criterion = Criterion::random;
  config.differential_budget = 20;
  config.finetune_epochs_per_layer = 0;
  config.final_finetune_epochs = 0;
  config.skip_layers = std::vector<int>{};

  auto [pruned, report] = run_prune_schedule(net, config, data.train, data.eval);
  std::uint64_t pruned_total = 0;
  for (const StepRecord& s : report.steps) {
    pruned_total += net.layer(s.layer_id).params.weights.dim(0) - s.kept;
  }
  CHECK(pruned_total == 20);
}

TEST_CASE("per-layer percent list drives each conv layer separately") {
  DatasetPair data = pipeline_data();
  auto net = build_model<float>(testutil::tiny_vgg_spec(), 7);
  PruneConfig config = fast_config();
  config.criterion = Criterion::random;
  config.per_layer_percent = std::vector<int>{0, 25, 50, 75};
  config.finetune_epochs_per_layer = 0;
  config.final_finetune_epochs = 0;
  config.skip_layers = std::vector<int>{};

  auto [pruned, report] = run_prune_schedule(net, config, data.train, data.eval);
  const auto convs = conv_layer_ids(net);
  CHECK(pruned.layer(convs[0]).params.weights.dim(0) == 8);
  CHECK(pruned.layer(convs[1]).params.weights.dim(0) == 6);
  CHECK(pruned.layer(convs[2]).params.weights.dim(0) == 8);
  CHECK(pruned.layer(convs[3]).params.weights.dim(0) == 4);
}

TEST_CASE("resnet schedule honors the residual scope") {
  DatasetPair base = pipeline_data();
  SynthSpec sp;
  sp.seed = 11;
  sp.class_count = 10;
  sp.train_n = 80;
  sp.eval_n = 40;
  sp.channels = 4;
  sp.height = 8;
  sp.width = 8;
  DatasetPair data = generate_synthetic(sp, "synth8");

  auto net = build_model<float>(testutil::tiny_resnet_spec(), 7);
  const auto blocks = residual_blocks(net);
  PruneConfig config = fast_config();
  config.criterion = Criterion::random;
  config.finetune_epochs_per_layer = 0;
  config.final_finetune_epochs = 0;

  SUBCASE("first-only") {
    auto [pruned, report] = run_prune_schedule(net, config, data.train, data.eval);
    REQUIRE(report.steps.size() == 2);
    CHECK(report.steps[0].layer_id == blocks[1].conv1);
    CHECK(report.steps[1].layer_id == blocks[0].conv1);
  }
  SUBCASE("first-two") {
    config.residual_scope = ResidualScope::first_two;
    auto [pruned, report] = run_prune_schedule(net, config, data.train, data.eval);
    REQUIRE(report.steps.size() == 4);
    // conv3 widths untouched in any case
    for (const auto& b : blocks) {
      CHECK(pruned.layer(b.conv3).params.weights.dim(0) == 4);
    }
  }
}

TEST_CASE("fine_tune: zero epochs returns the network unchanged") {
  DatasetPair data = pipeline_data();
  auto net = build_model<float>(testutil::tiny_vgg_spec(), 9);
  auto before = snapshot_weights(net);
  FineTuneOptions opts;
  opts.epochs = 0;
  auto tuned = fine_tune(net, data.train, opts);
  CHECK(snapshot_weights(tuned) == before);
}

TEST_CASE("fine_tune scope freeze discipline") {
  DatasetPair data = pipeline_data();
  auto net = build_model<float>(testutil::tiny_vgg_spec(), 9);

  FineTuneOptions opts;
  opts.epochs = 1;
  opts.fraction = 0.5;
  opts.seed = 21;
  opts.batch = 16;

  SUBCASE("fc-only leaves conv weights bit-identical") {
    opts.scope = RetrainScope::fc_only;
    auto tuned = fine_tune(net, data.train, opts);
    bool dense_changed = false;
    for (const auto& l : net.layers) {
      if (l.params.kind == LayerKind::conv2d) {
        CHECK(tuned.layer(l.id).params.weights.data == l.params.weights.data);
        CHECK(tuned.layer(l.id).params.bias.data == l.params.bias.data);
      } else if (l.params.kind == LayerKind::dense) {
        dense_changed = dense_changed || tuned.layer(l.id).params.weights.data != l.params.weights.data;
      }
    }
    CHECK(dense_changed);
  }

  SUBCASE("conv-only leaves dense weights bit-identical") {
    opts.scope = RetrainScope::conv_only;
    auto tuned = fine_tune(net, data.train, opts);
    for (const auto& l : net.layers) {
      if (l.params.kind == LayerKind::dense) {
        CHECK(tuned.layer(l.id).params.weights.data == l.params.weights.data);
      }
    }
  }

  SUBCASE("neighbors touches exactly layers i-1, i, i+1 (weighted-layer order)") {
    const auto convs = conv_layer_ids(net);
    opts.scope = RetrainScope::neighbors;
    opts.neighbor_of = convs[2];
    auto tuned = fine_tune(net, data.train, opts);
    for (std::size_t k = 0; k < convs.size(); ++k) {
      const bool should_change = k >= 1 && k <= 3;
      const bool changed =
          tuned.layer(convs[k]).params.weights.data != net.layer(convs[k]).params.weights.data;
      CHECK(changed == should_change);
    }
    for (const auto& l : net.layers) {
      if (l.params.kind == LayerKind::dense) {
        CHECK(tuned.layer(l.id).params.weights.data == l.params.weights.data);
      }
    }
  }

  SUBCASE("neighbors of the last conv unlocks the first dense layer") {
    const auto convs = conv_layer_ids(net);
    opts.scope = RetrainScope::neighbors;
    opts.neighbor_of = convs.back();
    auto tuned = fine_tune(net, data.train, opts);
    std::vector<int> dense_ids;
    for (const auto& l : net.layers) {
      if (l.params.kind == LayerKind::dense) dense_ids.push_back(l.id);
    }
    REQUIRE(dense_ids.size() == 2);
    CHECK(tuned.layer(dense_ids[0]).params.weights.data !=
          net.layer(dense_ids[0]).params.weights.data);
    CHECK(tuned.layer(dense_ids[1]).params.weights.data ==
          net.layer(dense_ids[1]).params.weights.data);
    CHECK(tuned.layer(convs[0]).params.weights.data == net.layer(convs[0]).params.weights.data);
    CHECK(tuned.layer(convs[1]).params.weights.data == net.layer(convs[1]).params.weights.data);
  }
}

TEST_CASE("train_from_scratch: zero epochs scores near chance on balanced data") {
  DatasetPair data = pipeline_data();
  auto net = train_from_scratch<float>(testutil::tiny_vgg_spec(), data.train, 0, 77);
  const double acc = evaluate(net, data.eval);
  CHECK(acc > 0.0);
  CHECK(acc < 0.35);  // chance is 0.1; generous binomial margin on 60 samples
}

TEST_CASE("train_from_scratch is deterministic in the seed") {
  DatasetPair data = pipeline_data();
  auto a = train_from_scratch<float>(testutil::tiny_vgg_spec(), data.train, 1, 5);
  auto b = train_from_scratch<float>(testutil::tiny_vgg_spec(), data.train, 1, 5);
  CHECK(snapshot_weights(a) == snapshot_weights(b));
}

TEST_CASE("halving every width roughly quarters the conv mult-adds") {
  ArchSpec full = testutil::tiny_vgg_spec();
  ArchSpec half = full;
  for (auto& w : half.filters_per_layer) w /= 2;
  auto full_net = build_model<float>(full, 1);
  auto half_net = build_model<float>(half, 1);

  auto conv_macs = [](const NetworkGraph<float>& net) {
    std::uint64_t total = 0;
    for (const LayerCost& c : layer_costs(net)) {
      if (net.layer(c.layer_id).params.kind == LayerKind::conv2d) total += c.mult_adds;
    }
    return total;
  };
  const double ratio = static_cast<double>(conv_macs(full_net)) /
                       static_cast<double>(conv_macs(half_net));
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.2);

  // interior layers (both axes halved) shrink exactly 4x
  const auto fc = layer_costs(full_net);
  const auto hc = layer_costs(half_net);
  const auto convs = conv_layer_ids(full_net);
  for (std::size_t k = 1; k < convs.size(); ++k) {
    CHECK(fc[static_cast<std::size_t>(convs[k])].mult_adds ==
          4 * hc[static_cast<std::size_t>(convs[k])].mult_adds);
  }
}

TEST_CASE("run_prune_schedule is bit-reproducible from (network, config)") {
  DatasetPair data = pipeline_data();
  auto net = train_from_scratch<float>(testutil::tiny_vgg_spec(), data.train,
                                       TrainOptions{1, 4, 0.02, 0.9, 16});
  PruneConfig config = fast_config();
  config.criterion = Criterion::entropy;  // exercises the stats path

  auto [pruned_a, report_a] = run_prune_schedule(net, config, data.train, data.eval);
  auto [pruned_b, report_b] = run_prune_schedule(net, config, data.train, data.eval);

  CHECK(report_csv_text(report_a) == report_csv_text(report_b));
  CHECK(snapshot_weights(pruned_a) == snapshot_weights(pruned_b));
  CHECK(report_a.baseline_accuracy == report_b.baseline_accuracy);
  CHECK(report_a.final_accuracy == report_b.final_accuracy);
}

TEST_CASE("class-specific schedule needs a class set and uses it") {
  DatasetPair data = pipeline_data();
  auto net = build_model<float>(testutil::tiny_vgg_spec(), 6);
  PruneConfig config = fast_config();
  config.criterion = Criterion::class_specific;
  config.finetune_epochs_per_layer = 0;
  config.final_finetune_epochs = 0;

  CHECK_THROWS_AS(run_prune_schedule(net, config, data.train, data.eval), Error);

  config.class_set = std::vector<int>{0, 1, 2};
  auto [pruned, report] = run_prune_schedule(net, config, data.train, data.eval);
  CHECK(report.steps.size() == 3);
}

TEST_CASE("a failing step flushes the partial report") {
  DatasetPair data = pipeline_data();
  auto net = build_model<float>(testutil::tiny_vgg_spec(), 7);

  // poison one training label so the final fine-tune's backward pass throws
  Dataset poisoned = data.train;
  poisoned.labels[3] = 42;

  PruneConfig config = fast_config();
  config.criterion = Criterion::random;
  config.finetune_epochs_per_layer = 0;  // steps themselves never train
  config.final_finetune_epochs = 1;
  config.data_fraction = 1.0;

  RunReport partial;
  CHECK_THROWS_AS(run_prune_schedule(net, config, poisoned, data.eval, &partial), Error);
  CHECK(partial.steps.size() == 3);  // every pruning step completed before the failure
  CHECK(partial.baseline_accuracy == doctest::Approx(partial.baseline_accuracy));
  CHECK_FALSE(partial.config_echo.empty());
}

TEST_CASE("epochs_to_peak finds the first epoch near the maximum") {
  CHECK(epochs_to_peak({}) == 0);
  CHECK(epochs_to_peak({0.5}) == 1);
  CHECK(epochs_to_peak({0.1, 0.4, 0.399, 0.41}) == 4);
  CHECK(epochs_to_peak({0.1, 0.409, 0.399, 0.41}) == 2);  // within 0.25 points of max
  CHECK(epochs_to_peak({0.9, 0.2, 0.3}) == 1);
}
