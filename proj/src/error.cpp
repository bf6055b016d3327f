#include "nlspec/error.hpp"

namespace nlspec {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonConvexSymbol: return "NonConvexSymbol";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::DivergentTail: return "DivergentTail";
    case ErrorCode::EmptyCriterion: return "EmptyCriterion";
    case ErrorCode::DivergentRate: return "DivergentRate";
    case ErrorCode::InadmissibleDelta: return "InadmissibleDelta";
    case ErrorCode::WindowTooNarrow: return "WindowTooNarrow";
    case ErrorCode::BandwidthExceeded: return "BandwidthExceeded";
    case ErrorCode::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BreakdownDetected: return "BreakdownDetected";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace nlspec
