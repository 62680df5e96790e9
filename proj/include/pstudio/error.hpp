#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pstudio {

enum class ErrorCode {
  InvalidArgument,
  EmptyInput,
  InvalidK,
  InvalidCount,
  EmptyRegion,
  FormatMismatch,
  KMismatch,
  GridMismatch,
  DegenerateCenters,
  SizeMismatch,
  EmptyCorpus,
  ColorCountMismatch,
  InsufficientLayouts,
  ArityError,
  InvalidWeights,
  LengthMismatch,
  ZeroVariance,
  DegenerateData,
  DecodeError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every domain failure in the library surfaces as this type; `code()` is the
// stable discriminator callers switch on (the CLI maps it to exit codes, the
// service to HTTP statuses).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pstudio
