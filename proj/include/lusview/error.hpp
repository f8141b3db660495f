#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lusview {

enum class ErrorCode {
  InvalidGeometry,
  InvalidFrame,
  UnsupportedFormat,
  CorruptStream,
  LimitExceeded,
  EmptySequence,
  SpecOutOfBounds,
  DimensionMismatch,
  GeometryMismatch,
  AnnotationMismatch,
  InvalidParams,
  ValidationError,
  TooManyFiles,
  FileTooLarge,
  EmptyUpload,
  UnknownKey,
  UnknownVideo,
  NotReady,
  NotFound,
  IoError,
  BadConfig,
};

/// snake_case name used in JSON error bodies ("error" field).
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lusview
