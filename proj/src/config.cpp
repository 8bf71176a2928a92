#include "prunekit/config.hpp"

#include <cstdio>
#include <memory>
#include <sstream>

namespace prunekit {

namespace {

std::string trim(const std::string& s) {
  std::size_t lo = s.find_first_not_of(" \t\r\n");
  if (lo == std::string::npos) return "";
  std::size_t hi = s.find_last_not_of(" \t\r\n");
  return s.substr(lo, hi - lo + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCategory::config, "key '" + key + "': expected an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCategory::config, "key '" + key + "': expected a number, got '" + value + "'");
  }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const std::string& item : split_commas(value)) {
    if (item.empty()) fail(ErrorCategory::config, "key '" + key + "': empty list entry");
    out.push_back(static_cast<int>(parse_long(key, item)));
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCategory::config,
           "config line " + std::to_string(line_no) + " is not 'key = value': '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      fail(ErrorCategory::config, "config line " + std::to_string(line_no) + " has an empty key");
    }
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) fail(ErrorCategory::io, "cannot open config '" + path + "'");
  std::string text;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f.get())) > 0) text.append(buf, n);
  return parse_kv_text(text);
}

PruneConfig parse_prune_config(const std::map<std::string, std::string>& kv) {
  PruneConfig config;
  for (const auto& [key, value] : kv) {
    if (key == "criterion") {
      config.criterion = parse_criterion(value);
    } else if (key == "prune_percent") {
      config.prune_percent = static_cast<int>(parse_long(key, value));
    } else if (key == "per_layer_percent") {
      config.per_layer_percent = parse_int_list(key, value);
    } else if (key == "differential_budget") {
      config.differential_budget = static_cast<std::uint64_t>(parse_long(key, value));
    } else if (key == "finetune_epochs_per_layer") {
      config.finetune_epochs_per_layer = static_cast<int>(parse_long(key, value));
    } else if (key == "final_finetune_epochs") {
      config.final_finetune_epochs = static_cast<int>(parse_long(key, value));
    } else if (key == "retrain_scope") {
      config.retrain_scope = parse_retrain_scope(value);
    } else if (key == "data_fraction") {
      config.data_fraction = parse_double(key, value);
    } else if (key == "skip_layers") {
      if (value.empty() || value == "none") {
        config.skip_layers = std::vector<int>{};
      } else if (value == "auto") {
        config.skip_layers.reset();
      } else {
        config.skip_layers = parse_int_list(key, value);
      }
    } else if (key == "class_set") {
      config.class_set = parse_int_list(key, value);
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_long(key, value));
    } else if (key == "lr") {
      config.lr = parse_double(key, value);
    } else if (key == "momentum") {
      config.momentum = parse_double(key, value);
    } else if (key == "batch_size") {
      config.batch_size = static_cast<std::size_t>(parse_long(key, value));
    } else if (key == "residual_scope") {
      config.residual_scope = parse_residual_scope(value);
    } else if (key == "stats_bins") {
      config.stats_bins = static_cast<int>(parse_long(key, value));
    } else {
      fail(ErrorCategory::config, "unknown config key '" + key + "'");
    }
  }
  if (config.prune_percent < 0 || config.prune_percent >= 100) {
    fail(ErrorCategory::config, "prune_percent must lie in [0, 100)");
  }
  if (config.per_layer_percent.has_value()) {
    for (int m : *config.per_layer_percent) {
      if (m < 0 || m >= 100) fail(ErrorCategory::config, "per-layer percent must lie in [0, 100)");
    }
  }
  if (config.data_fraction <= 0.0 || config.data_fraction > 1.0) {
    fail(ErrorCategory::config, "data_fraction must lie in (0, 1]");
  }
  if (config.finetune_epochs_per_layer < 0 || config.final_finetune_epochs < 0) {
    fail(ErrorCategory::config, "epoch counts must be non-negative");
  }
  if (config.stats_bins < 1) fail(ErrorCategory::config, "stats_bins must be positive");
  if (config.momentum < 0.0 || config.momentum >= 1.0) {
    fail(ErrorCategory::config, "momentum must lie in [0, 1)");
  }
  if (config.lr < 0.0) fail(ErrorCategory::config, "lr must be non-negative");
  if (config.batch_size == 0) fail(ErrorCategory::config, "batch_size must be positive");
  return config;
}

const char* retrain_scope_name(RetrainScope s) {
  switch (s) {
    case RetrainScope::all: return "all";
    case RetrainScope::fc_only: return "fc-only";
    case RetrainScope::conv_only: return "conv-only";
    case RetrainScope::neighbors: return "neighbors";
  }
  return "?";
}

RetrainScope parse_retrain_scope(const std::string& s) {
  if (s == "all") return RetrainScope::all;
  if (s == "fc-only") return RetrainScope::fc_only;
  if (s == "conv-only") return RetrainScope::conv_only;
  if (s == "neighbors") return RetrainScope::neighbors;
  fail(ErrorCategory::config, "unknown retrain scope '" + s + "'");
}

std::string describe_config(const PruneConfig& config) {
  std::ostringstream out;
  auto list = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(v[i]);
    }
    return s;
  };
  out << "criterion = " << criterion_name(config.criterion) << "\n";
  if (config.differential_budget.has_value()) {
    out << "differential_budget = " << *config.differential_budget << "\n";
  } else if (config.per_layer_percent.has_value()) {
    out << "per_layer_percent = " << list(*config.per_layer_percent) << "\n";
  } else {
    out << "prune_percent = " << config.prune_percent << "\n";
  }
  out << "finetune_epochs_per_layer = " << config.finetune_epochs_per_layer << "\n";
  out << "final_finetune_epochs = " << config.final_finetune_epochs << "\n";
  out << "retrain_scope = " << retrain_scope_name(config.retrain_scope) << "\n";
  out << "data_fraction = " << config.data_fraction << "\n";
  if (config.skip_layers.has_value()) {
    out << "skip_layers = " << (config.skip_layers->empty() ? "none" : list(*config.skip_layers))
        << "\n";
  } else {
    out << "skip_layers = auto\n";
  }
  if (config.class_set.has_value()) out << "class_set = " << list(*config.class_set) << "\n";
  out << "seed = " << config.seed << "\n";
  out << "lr = " << config.lr << "\n";
  out << "momentum = " << config.momentum << "\n";
  out << "batch_size = " << config.batch_size << "\n";
  out << "residual_scope = " << residual_scope_name(config.residual_scope) << "\n";
  out << "stats_bins = " << config.stats_bins << "\n";
  return out.str();
}

}  // namespace prunekit
