#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlspec {

enum class ErrorCode {
  InvalidArgument,
  NonConvexSymbol,
  CoincidentPoints,
  DivergentTail,
  EmptyCriterion,
  DivergentRate,
  InadmissibleDelta,
  WindowTooNarrow,
  BandwidthExceeded,
  UnsupportedDimension,
  NoConvergence,
  BreakdownDetected,
  DimensionTooLarge,
  QuadratureNotConverged,
  WindowTooSmall,
  NotSymmetric,
  ConfigParse,
  CacheCorrupt,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::InvalidArgument, message);
}

}  // namespace nlspec
