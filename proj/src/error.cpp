#include "hulirag/error.hpp"

namespace hulirag {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kMalformedRecord: return "malformed-record";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kZeroNorm: return "zero-norm";
    case ErrorCode::kMaskMismatch: return "mask-mismatch";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kStage: return "stage";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

RecordError::RecordError(ErrorCode code, const std::string& path, std::size_t line,
                         const std::string& message)
    : Error(code, path + ":" + std::to_string(line) + ": " + message),
      path_(path),
      line_(line) {}

StageError::StageError(std::string stage, std::string record_id, const std::string& message)
    : Error(ErrorCode::kStage,
            "stage '" + stage + "'" + (record_id.empty() ? "" : " (record " + record_id + ")") +
                ": " + message),
      stage_(std::move(stage)),
      record_id_(std::move(record_id)) {}

}  // namespace hulirag
