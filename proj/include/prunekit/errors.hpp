#pragma once

#include <stdexcept>
#include <string>

namespace prunekit {

// Machine-readable error categories. The CLI prints these on stderr as
// "error category=<name>: <message>" and maps them to nonzero exit codes.
enum class ErrorCategory {
  usage,       // bad CLI arguments or config keys
  io,          // file missing / unreadable / unwritable
  format,      // malformed file (bad magic, bad section, truncation)
  version,     // container format version mismatch
  checksum,    // container CRC mismatch
  shape,       // tensor/layer shape incompatibility
  graph,       // network topology violation (residual shapes, channel counts)
  data,        // dataset problems (empty set, label out of range)
  numeric,     // NaN/Inf encountered where finite values are required
  config,      // semantically invalid configuration values
};

const char* error_category_name(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& message) {
  throw Error(c, message);
}

}  // namespace prunekit
