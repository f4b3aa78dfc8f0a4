#pragma once

#include <stdexcept>
#include <string>

namespace mcf {

// Failure codes shared across the library. The CLI maps each code to a
// stable process exit status (exit_code()) and a single
// `ERROR <code>: <message>` line on stderr.
enum class ErrorCode {
  kUsage = 0,
  kIoError,
  kShapeMismatch,
  kKernelTooLarge,
  kLabelOutOfRange,
  kNonScalarLoss,
  kMissingGradient,
  kInvalidConfig,
  kWrongColorSpace,
  kNoCircleFound,
  kDegenerateCrop,
  kMalformedRow,
  kInvalidGrade,
  kInvalidDr,
  kImageDecodeFailure,
  kPreprocessFailure,
  kUnsupportedFormat,
  kCorruptFile,
  kVersionMismatch,
  kCorruptCheckpoint,
  kBackboneMismatch,
  kLengthMismatch,
  kEmptyMatrix,
  kUnknownKey,
  kInvalidValue,
  kMissingRequired,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage: return "Usage";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kKernelTooLarge: return "KernelTooLarge";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kMissingGradient: return "MissingGradient";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kWrongColorSpace: return "WrongColorSpace";
    case ErrorCode::kNoCircleFound: return "NoCircleFound";
    case ErrorCode::kDegenerateCrop: return "DegenerateCrop";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kInvalidGrade: return "InvalidGrade";
    case ErrorCode::kInvalidDr: return "InvalidDr";
    case ErrorCode::kImageDecodeFailure: return "ImageDecodeFailure";
    case ErrorCode::kPreprocessFailure: return "PreprocessFailure";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kBackboneMismatch: return "BackboneMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kUnknownKey: return "UnknownKey";
    case ErrorCode::kInvalidValue: return "InvalidValue";
    case ErrorCode::kMissingRequired: return "MissingRequired";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  int exit_code() const noexcept { return static_cast<int>(code_) + 1; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace mcf
