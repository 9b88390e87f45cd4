#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wgp {

enum class ErrorCode {
  MissingCell,
  DuplicateRow,
  NonpositiveCapacity,
  MalformedInput,
  EmptyTrainingSlice,
  DegenerateExtent,
  ConstraintViolation,
  InvalidRange,
  NotPositiveDefinite,
  AllStartsFailed,
  DuplicateTarget,
  EmptyInput,
  NonpositiveSigma,
  OutOfRange,
  UnknownZone,
  UnknownDay,
  UnknownSite,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; `code()` lets callers and tests
// distinguish failure kinds without a class per error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wgp
