#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hulirag {

enum class ErrorCode {
  kInvalidArgument,
  kMalformedRecord,
  kDimensionMismatch,
  kDuplicateId,
  kZeroNorm,
  kMaskMismatch,
  kNotFound,
  kParse,
  kDivergence,
  kTransport,
  kConfig,
  kStage,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the engine carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Record-level failure while reading a line-delimited file.
class RecordError : public Error {
 public:
  RecordError(ErrorCode code, const std::string& path, std::size_t line,
              const std::string& message);

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

/// Pipeline failure tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string record_id, const std::string& message);

  const std::string& stage() const noexcept { return stage_; }
  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::string stage_;
  std::string record_id_;
};

}  // namespace hulirag
