// SPDX-License-Identifier: Apache-2.0
#include "tc/error.hpp"

namespace tc {

std::string_view error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kMissingArtifact: return "missing_artifact";
    case ErrorKind::kState: return "state";
  }
  return "unknown";
}

}  // namespace tc
