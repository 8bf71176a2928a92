#pragma once

#include <map>
#include <string>

#include "prunekit/pipeline.hpp"

namespace prunekit {

// Human-readable run configuration: one `key = value` pair per line, `#`
// comments, keys mirroring the PruneConfig field names. Every CLI flag
// overrides its config key.
std::map<std::string, std::string> read_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

// Build a PruneConfig from key/value pairs (unknown keys are errors).
PruneConfig parse_prune_config(const std::map<std::string, std::string>& kv);

}  // namespace prunekit
