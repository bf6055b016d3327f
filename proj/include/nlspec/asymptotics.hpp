#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nlspec/eigensolve.hpp"
#include "nlspec/rates.hpp"

namespace nlspec {

/// 1-based inclusive index range [first, last].
struct FitWindow {
  std::size_t first = 1;
  std::size_t last = 1;

  std::size_t count() const noexcept { return last >= first ? last - first + 1 : 0; }
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double standard_error = 0.0;
  FitWindow window;
  std::size_t points = 0;
};

inline constexpr std::size_t kMinFitPoints = 10;

/// Ordinary least squares of log lambda_n on log n over the window. Throws
/// WindowTooSmall below kMinFitPoints points, InvalidArgument for a
/// non-positive value inside the window.
FitResult fit_exponent(const Spectrum& spectrum, FitWindow window);

/// Same fit on arbitrary (x, y) samples; the window reported is [1, size].
FitResult fit_power_law(std::span<const double> x, std::span<const double> y);

/// Drops the first 15% of the indices and every n with lambda_n within 10%
/// of the spectral ceiling. A non-finite or non-positive ceiling is ignored.
FitWindow default_window(const Spectrum& spectrum, double spectral_ceiling);

struct Envelope {
  double delta_low = 0.0;
  double delta_up = 0.0;
};

/// min and max of lambda_n / n^e over the window.
Envelope calibrate_constants(const Spectrum& spectrum, double exponent, FitWindow window);
/// Whole spectrum.
Envelope calibrate_constants(const Spectrum& spectrum, double exponent);

struct Violation {
  std::string source;
  bool lower = true;
  std::size_t n = 0;
  double bound = 0.0;
  double lambda = 0.0;
};

struct ViolationReport {
  std::vector<Violation> violations;
  /// (curve, n) pairs compared.
  std::size_t checked = 0;

  bool empty() const noexcept { return violations.empty(); }
};

/// Relative slack of the ordering test, absorbing the last-bit rounding of
/// curves built from the spectrum itself.
inline constexpr double kOrderingSlack = 1e-12;

/// Flags n where a lower curve exceeds lambda_n or an upper curve falls
/// below it, for n >= curve.min_n inside the window.
ViolationReport compare_bounds(const Spectrum& spectrum, std::span<const BoundCurve> curves,
                               FitWindow window);
ViolationReport compare_bounds(const Spectrum& spectrum, std::span<const BoundCurve> curves);

/// Envelope curves delta n^e (PowerLower / PowerUpper) for the given constants.
std::vector<BoundCurve> envelope_curves(const Envelope& envelope, double exponent);

/// "source,direction,n,bound,lambda" rows.
void write_violations_csv(std::ostream& out, const ViolationReport& report);
/// Short plain-text account of a fit, its envelope and a report.
std::string summarize(const FitResult& fit, const Envelope& envelope,
                      const ViolationReport& report);

}  // namespace nlspec
