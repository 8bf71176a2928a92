// prunekit — structured filter pruning workbench for small CNNs.
//
// Verbs: dataset (synth/import), train, eval, stats, prune, subset,
// report, gradcheck. See --help per verb. PRUNEKIT_THREADS controls
// batch-parallel evaluation.

#include <cstdio>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "prunekit/checkpoint.hpp"
#include "prunekit/config.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/evaluate.hpp"
#include "prunekit/gradcheck.hpp"
#include "prunekit/pipeline.hpp"
#include "prunekit/report.hpp"
#include "prunekit/stats.hpp"

namespace pk = prunekit;

namespace {

int exit_code_for(pk::ErrorCategory c) {
  switch (c) {
    case pk::ErrorCategory::usage: return 2;
    case pk::ErrorCategory::io: return 3;
    case pk::ErrorCategory::format: return 4;
    case pk::ErrorCategory::version: return 5;
    case pk::ErrorCategory::checksum: return 6;
    case pk::ErrorCategory::shape: return 7;
    case pk::ErrorCategory::graph: return 8;
    case pk::ErrorCategory::data: return 9;
    case pk::ErrorCategory::numeric: return 10;
    case pk::ErrorCategory::config: return 11;
  }
  return 1;
}

std::vector<std::size_t> parse_widths(const std::string& csv) {
  std::vector<std::size_t> widths;
  std::string cur;
  for (char c : csv + ",") {
    if (c == ',') {
      if (!cur.empty()) widths.push_back(static_cast<std::size_t>(std::stoul(cur)));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return widths;
}

pk::ArchSpec arch_from_flags(const std::string& arch, const std::string& widths,
                             const pk::Dataset& shaped) {
  pk::ArchSpec spec;
  spec.family = pk::parse_arch_family(arch);
  spec.filters_per_layer = parse_widths(widths);
  spec.input_channels = shaped.channels;
  spec.input_height = shaped.height;
  spec.input_width = shaped.width;
  spec.class_count = shaped.class_count;
  return spec;
}

struct PruneFlags {
  std::string config_path;
  std::string criterion;
  int percent = -1;
  std::string per_layer;
  long long budget = -1;
  int p = -1, q = -1;
  std::string scope;
  double fraction = -1.0;
  std::string skip_layers;
  std::string class_set;
  long long seed = -1;
  double lr = -1.0, momentum = -1.0;
  long long batch = -1;
  std::string residual_scope;
  int bins = -1;
};

// Config file first, then every given flag overrides its key.
pk::PruneConfig resolve_prune_config(const PruneFlags& flags) {
  std::map<std::string, std::string> kv;
  if (!flags.config_path.empty()) kv = pk::read_kv_file(flags.config_path);
  if (!flags.criterion.empty()) kv["criterion"] = flags.criterion;
  if (flags.percent >= 0) kv["prune_percent"] = std::to_string(flags.percent);
  if (!flags.per_layer.empty()) kv["per_layer_percent"] = flags.per_layer;
  if (flags.budget >= 0) kv["differential_budget"] = std::to_string(flags.budget);
  if (flags.p >= 0) kv["finetune_epochs_per_layer"] = std::to_string(flags.p);
  if (flags.q >= 0) kv["final_finetune_epochs"] = std::to_string(flags.q);
  if (!flags.scope.empty()) kv["retrain_scope"] = flags.scope;
  if (flags.fraction >= 0) kv["data_fraction"] = std::to_string(flags.fraction);
  if (!flags.skip_layers.empty()) kv["skip_layers"] = flags.skip_layers;
  if (!flags.class_set.empty()) kv["class_set"] = flags.class_set;
  if (flags.seed >= 0) kv["seed"] = std::to_string(flags.seed);
  if (flags.lr >= 0) kv["lr"] = std::to_string(flags.lr);
  if (flags.momentum >= 0) kv["momentum"] = std::to_string(flags.momentum);
  if (flags.batch >= 0) kv["batch_size"] = std::to_string(flags.batch);
  if (!flags.residual_scope.empty()) kv["residual_scope"] = flags.residual_scope;
  if (flags.bins >= 0) kv["stats_bins"] = std::to_string(flags.bins);
  return pk::parse_prune_config(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prunekit: structured filter pruning workbench"};
  app.require_subcommand(1);

  // ---- dataset ----
  auto* dataset_cmd = app.add_subcommand("dataset", "create or import datasets");
  dataset_cmd->require_subcommand(1);

  auto* synth_cmd = dataset_cmd->add_subcommand("synth", "generate the synthetic grating set");
  std::string synth_prefix = "synth", synth_name = "synth10";
  pk::SynthSpec synth_spec;
  synth_cmd->add_option("--out-prefix", synth_prefix, "output path prefix")->required();
  synth_cmd->add_option("--name", synth_name, "dataset name");
  synth_cmd->add_option("--seed", synth_spec.seed, "generator seed");
  synth_cmd->add_option("--classes", synth_spec.class_count, "class count");
  synth_cmd->add_option("--train-n", synth_spec.train_n, "training images");
  synth_cmd->add_option("--eval-n", synth_spec.eval_n, "evaluation images");
  synth_cmd->add_option("--channels", synth_spec.channels, "image channels");
  synth_cmd->add_option("--height", synth_spec.height, "image height");
  synth_cmd->add_option("--width", synth_spec.width, "image width");
  synth_cmd->add_option("--noise", synth_spec.noise, "additive noise level");

  auto* idx_cmd = dataset_cmd->add_subcommand("import-idx", "convert an IDX archive pair");
  std::string idx_ti, idx_tl, idx_ei, idx_el, idx_name = "idx", idx_prefix;
  idx_cmd->add_option("--train-images", idx_ti)->required();
  idx_cmd->add_option("--train-labels", idx_tl)->required();
  idx_cmd->add_option("--eval-images", idx_ei)->required();
  idx_cmd->add_option("--eval-labels", idx_el)->required();
  idx_cmd->add_option("--name", idx_name);
  idx_cmd->add_option("--out-prefix", idx_prefix)->required();

  auto* cifar_cmd = dataset_cmd->add_subcommand("import-cifar", "convert CIFAR-10 binary batches");
  std::vector<std::string> cifar_train, cifar_eval;
  std::string cifar_name = "cifar10", cifar_prefix;
  cifar_cmd->add_option("--train-bins", cifar_train)->required()->delimiter(',');
  cifar_cmd->add_option("--eval-bins", cifar_eval)->required()->delimiter(',');
  cifar_cmd->add_option("--name", cifar_name);
  cifar_cmd->add_option("--out-prefix", cifar_prefix)->required();

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a model from scratch");
  std::string train_arch = "vgg-tiny", train_widths = "8,8,16,16";
  std::string train_data_path, train_eval_path, train_out;
  pk::TrainOptions train_opts;
  train_cmd->add_option("--arch", train_arch, "vgg-tiny or resnet-tiny");
  train_cmd->add_option("--widths", train_widths, "filters per layer, comma separated");
  train_cmd->add_option("--data", train_data_path, "training dataset")->required();
  train_cmd->add_option("--eval", train_eval_path, "evaluation dataset");
  train_cmd->add_option("--epochs", train_opts.epochs);
  train_cmd->add_option("--seed", train_opts.seed);
  train_cmd->add_option("--lr", train_opts.lr);
  train_cmd->add_option("--momentum", train_opts.momentum);
  train_cmd->add_option("--batch", train_opts.batch);
  train_cmd->add_option("--lr-drop", train_opts.lr_drop_epoch, "divide lr by 10 from this epoch");
  train_cmd->add_option("--out", train_out, "checkpoint path")->required();

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "report top-1 accuracy");
  std::string eval_model, eval_data_path;
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--data", eval_data_path)->required();

  // ---- stats ----
  auto* stats_cmd = app.add_subcommand("stats", "collect per-filter statistics");
  std::string stats_model, stats_data_path, stats_out;
  bool stats_gradients = false;
  pk::StatsOptions stats_opts;
  stats_cmd->add_option("--model", stats_model)->required();
  stats_cmd->add_option("--data", stats_data_path)->required();
  stats_cmd->add_option("--out", stats_out)->required();
  stats_cmd->add_flag("--gradients", stats_gradients, "also collect gradient statistics");
  stats_cmd->add_option("--bins", stats_opts.bins, "histogram bins");
  stats_cmd->add_option("--max-images", stats_opts.max_images, "subsample size (0 = all)");
  stats_cmd->add_option("--seed", stats_opts.seed, "subsample seed");

  // ---- prune ----
  auto* prune_cmd = app.add_subcommand("prune", "run a pruning schedule");
  std::string prune_model, prune_train, prune_eval, prune_out, prune_report;
  PruneFlags flags;
  prune_cmd->add_option("--model", prune_model)->required();
  prune_cmd->add_option("--train", prune_train)->required();
  prune_cmd->add_option("--eval", prune_eval)->required();
  prune_cmd->add_option("--out", prune_out, "pruned checkpoint path")->required();
  prune_cmd->add_option("--report", prune_report, "report CSV path")->required();
  prune_cmd->add_option("--config", flags.config_path, "key = value config file");
  prune_cmd->add_option("--criterion", flags.criterion);
  prune_cmd->add_option("--percent", flags.percent, "uniform prune percent");
  prune_cmd->add_option("--per-layer", flags.per_layer, "per-conv-layer percents");
  prune_cmd->add_option("--budget", flags.budget, "differential prune budget");
  prune_cmd->add_option("--p", flags.p, "fine-tune epochs per layer");
  prune_cmd->add_option("--q", flags.q, "final fine-tune epochs");
  prune_cmd->add_option("--scope", flags.scope, "all|fc-only|conv-only|neighbors");
  prune_cmd->add_option("--fraction", flags.fraction, "data fraction for fine-tuning");
  prune_cmd->add_option("--skip-layers", flags.skip_layers, "layer ids, 'none' or 'auto'");
  prune_cmd->add_option("--class-set", flags.class_set, "classes for class-specific");
  prune_cmd->add_option("--seed", flags.seed);
  prune_cmd->add_option("--lr", flags.lr);
  prune_cmd->add_option("--momentum", flags.momentum);
  prune_cmd->add_option("--batch", flags.batch);
  prune_cmd->add_option("--residual-scope", flags.residual_scope, "first-only|first-two");
  prune_cmd->add_option("--bins", flags.bins, "stats histogram bins");

  // ---- subset ----
  auto* subset_cmd = app.add_subcommand("subset", "build a class-subset dataset");
  std::string subset_data, subset_out, subset_classes, subset_name;
  subset_cmd->add_option("--data", subset_data)->required();
  subset_cmd->add_option("--classes", subset_classes, "class ids, comma separated")->required();
  subset_cmd->add_option("--name", subset_name, "derived dataset name");
  subset_cmd->add_option("--out", subset_out)->required();

  // ---- report ----
  auto* report_cmd = app.add_subcommand("report", "compare run report CSVs");
  std::vector<std::string> report_csvs;
  std::string report_merged;
  report_cmd->add_option("--csv", report_csvs, "report CSV files")->required();
  report_cmd->add_option("--merged-out", report_merged, "write concatenated rows here");

  // ---- gradcheck ----
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string grad_arch = "vgg-tiny", grad_widths = "8,8,16,16", grad_model, grad_data;
  double grad_epsilon = 1e-5, grad_threshold = 1e-4;
  std::size_t grad_samples = 60;
  long long grad_seed = 1;
  std::size_t grad_index = 0;
  grad_cmd->add_option("--arch", grad_arch);
  grad_cmd->add_option("--widths", grad_widths);
  grad_cmd->add_option("--model", grad_model, "checkpoint (instead of --arch/--widths)");
  grad_cmd->add_option("--data", grad_data, "dataset supplying the probe sample")->required();
  grad_cmd->add_option("--index", grad_index, "sample index in the dataset");
  grad_cmd->add_option("--epsilon", grad_epsilon);
  grad_cmd->add_option("--threshold", grad_threshold, "fail when the error exceeds this");
  grad_cmd->add_option("--samples", grad_samples, "parameters probed per layer");
  grad_cmd->add_option("--seed", grad_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) {
      pk::DatasetPair pair = pk::generate_synthetic(synth_spec, synth_name);
      pk::save_dataset_file(synth_prefix + "-train.ds", pair.train);
      pk::save_dataset_file(synth_prefix + "-eval.ds", pair.eval);
      std::printf("wrote %s-train.ds (%zu images) and %s-eval.ds (%zu images)\n",
                  synth_prefix.c_str(), pair.train.size(), synth_prefix.c_str(),
                  pair.eval.size());
    } else if (idx_cmd->parsed()) {
      pk::DatasetPair pair = pk::import_idx(idx_ti, idx_tl, idx_ei, idx_el, idx_name);
      pk::save_dataset_file(idx_prefix + "-train.ds", pair.train);
      pk::save_dataset_file(idx_prefix + "-eval.ds", pair.eval);
      std::printf("imported %zu train / %zu eval images (%d classes)\n", pair.train.size(),
                  pair.eval.size(), pair.train.class_count);
    } else if (cifar_cmd->parsed()) {
      pk::DatasetPair pair = pk::import_cifar10(cifar_train, cifar_eval, cifar_name);
      pk::save_dataset_file(cifar_prefix + "-train.ds", pair.train);
      pk::save_dataset_file(cifar_prefix + "-eval.ds", pair.eval);
      std::printf("imported %zu train / %zu eval images\n", pair.train.size(), pair.eval.size());
    } else if (train_cmd->parsed()) {
      pk::Dataset train_data = pk::load_dataset(train_data_path);
      pk::ArchSpec spec = arch_from_flags(train_arch, train_widths, train_data);
      std::vector<double> curve;
      pk::Dataset eval_data;
      const pk::Dataset* eval_ptr = nullptr;
      if (!train_eval_path.empty()) {
        eval_data = pk::load_dataset(train_eval_path);
        eval_ptr = &eval_data;
      }
      pk::NetworkGraph<float> net =
          pk::train_from_scratch<float>(spec, train_data, train_opts, eval_ptr, &curve);
      for (std::size_t e = 0; e < curve.size(); ++e) {
        std::printf("epoch %zu: eval accuracy %.4f\n", e + 1, curve[e]);
      }
      pk::save_checkpoint_file(train_out, net);
      const pk::CostSummary cost = pk::count_costs(net);
      std::printf("saved %s (params=%llu mult_adds=%llu)\n", train_out.c_str(),
                  static_cast<unsigned long long>(cost.params),
                  static_cast<unsigned long long>(cost.mult_adds));
    } else if (eval_cmd->parsed()) {
      pk::NetworkGraph<float> net = pk::load_checkpoint_file<float>(eval_model);
      pk::Dataset data = pk::load_dataset(eval_data_path);
      std::printf("accuracy %.9g\n", pk::evaluate(net, data));
    } else if (stats_cmd->parsed()) {
      pk::NetworkGraph<float> net = pk::load_checkpoint_file<float>(stats_model);
      pk::Dataset data = pk::load_dataset(stats_data_path);
      stats_opts.with_gradients = stats_gradients;
      pk::StatsBundle stats = pk::collect_stats(net, data, stats_opts);
      pk::save_stats_file(stats_out, stats);
      std::printf("collected statistics over %llu images into %s\n",
                  static_cast<unsigned long long>(
                      stats.layers.empty() ? 0 : stats.layers[0].image_count),
                  stats_out.c_str());
    } else if (prune_cmd->parsed()) {
      pk::PruneConfig config = resolve_prune_config(flags);
      pk::NetworkGraph<float> net = pk::load_checkpoint_file<float>(prune_model);
      pk::Dataset train_data = pk::load_dataset(prune_train);
      pk::Dataset eval_data = pk::load_dataset(prune_eval);
      pk::RunReport partial;
      try {
        auto [pruned, run_report] =
            pk::run_prune_schedule(net, config, train_data, eval_data, &partial);
        pk::save_checkpoint_file(prune_out, pruned);
        pk::ReportFiles files = pk::emit_report(run_report, prune_report);
        std::printf("baseline %.4f -> final %.4f; report %s\n",
                    run_report.baseline_accuracy, run_report.final_accuracy,
                    files.csv_path.c_str());
      } catch (const pk::Error&) {
        if (!partial.config_echo.empty()) {
          pk::ReportFiles files = pk::emit_report(partial, prune_report);
          std::fprintf(stderr, "schedule aborted; partial report flushed to %s\n",
                       files.csv_path.c_str());
        }
        throw;
      }
    } else if (subset_cmd->parsed()) {
      pk::Dataset parent = pk::load_dataset(subset_data);
      pk::ClassSubsetSpec spec;
      spec.derived_name = subset_name;
      for (const std::string& c : CLI::detail::split(subset_classes, ',')) {
        spec.classes.push_back(std::stoi(c));
      }
      pk::Dataset sub = pk::build_class_subset(parent, spec);
      pk::save_dataset_file(subset_out, sub);
      std::printf("subset '%s': %zu images, %d classes\n", sub.name.c_str(), sub.size(),
                  sub.class_count);
    } else if (report_cmd->parsed()) {
      std::vector<pk::RunReport> reports;
      for (const std::string& path : report_csvs) reports.push_back(pk::read_report_csv(path));
      std::printf("%-6s %-8s", "step", "layer");
      for (std::size_t f = 0; f < reports.size(); ++f) {
        const char* name = reports[f].steps.empty()
                               ? report_csvs[f].c_str()
                               : pk::criterion_name(reports[f].steps[0].criterion);
        std::printf(" | %-16s dmg/rec", name);
      }
      std::printf("\n");
      std::size_t rows = 0;
      for (const auto& r : reports) rows = std::max(rows, r.steps.size());
      for (std::size_t i = 0; i < rows; ++i) {
        const int layer = i < reports[0].steps.size() ? reports[0].steps[i].layer_id : -1;
        std::printf("%-6zu %-8d", i + 1, layer);
        for (const auto& r : reports) {
          if (i < r.steps.size()) {
            std::printf(" | %7.4f / %7.4f      ", r.steps[i].acc_damage,
                        r.steps[i].acc_recovery);
          } else {
            std::printf(" | %-24s", "-");
          }
        }
        std::printf("\n");
      }
      if (!report_merged.empty()) {
        pk::RunReport merged;
        for (const auto& r : reports) {
          merged.steps.insert(merged.steps.end(), r.steps.begin(), r.steps.end());
        }
        std::FILE* f = std::fopen(report_merged.c_str(), "wb");
        if (!f) pk::fail(pk::ErrorCategory::io, "cannot write '" + report_merged + "'");
        const std::string text = pk::report_csv_text(merged);
        std::fwrite(text.data(), 1, text.size(), f);
        std::fclose(f);
        std::printf("merged rows written to %s\n", report_merged.c_str());
      }
    } else if (grad_cmd->parsed()) {
      pk::Dataset data = pk::load_dataset(grad_data);
      pk::NetworkGraph<double> net;
      if (!grad_model.empty()) {
        net = pk::load_checkpoint_file<float>(grad_model).cast<double>();
      } else {
        pk::ArchSpec spec = arch_from_flags(grad_arch, grad_widths, data);
        net = pk::build_model<double>(spec, static_cast<std::uint64_t>(grad_seed));
      }
      if (grad_index >= data.size()) {
        pk::fail(pk::ErrorCategory::data, "sample index out of range");
      }
      pk::LabeledSample<double> sample;
      sample.input = pk::batch_images<double>(data, {grad_index});
      sample.label = data.labels[grad_index];
      const double err = pk::check_gradients(net, sample, grad_epsilon, grad_samples,
                                             static_cast<std::uint64_t>(grad_seed));
      std::printf("max relative error %.3e (threshold %.3e)\n", err, grad_threshold);
      if (!(err < grad_threshold)) {
        std::fprintf(stderr, "error category=numeric: gradient check failed\n");
        return 10;
      }
    }
  } catch (const pk::Error& e) {
    std::fprintf(stderr, "error category=%s: %s\n", pk::error_category_name(e.category()),
                 e.what());
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error category=internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
