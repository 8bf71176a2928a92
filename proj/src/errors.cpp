#include "prunekit/errors.hpp"

namespace prunekit {

const char* error_category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::version: return "version";
    case ErrorCategory::checksum: return "checksum";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::graph: return "graph";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

}  // namespace prunekit
