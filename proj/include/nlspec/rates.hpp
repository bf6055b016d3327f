#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nlspec/operators.hpp"

namespace nlspec {

/// Inputs of the rate function: the order floor a(r) = inf over |x|,|y| <= r
/// of the kernel order, the generalized inverse of the potential's growth
/// function, the reference function, the range offset and the dimension.
struct RateProfile {
  std::function<double(double)> a;
  std::function<double(double)> phi_inv;
  ReferenceFunction phi_ref = SimplePower{1.0};
  double kappa = 1.0;
  int d = 1;
};

/// Constant order alpha with the growth inverse of `potential`.
RateProfile constant_order_profile(int d, double alpha, const Potential& potential,
                                   const ReferenceFunction& phi, double kappa);

/// Order floor alpha0 + beta1 / sqrt(log(beta2 + 2r)) of a variable-order kernel.
RateProfile variable_order_profile(int d, const VariableOrder& kernel, const Potential& potential,
                                   const ReferenceFunction& phi, double kappa);

/// g(s) = s^{d / a(Phi^{-1}(2/s) + 1)} varphi(kappa + Phi^{-1}(2/s))^2.
double rate_criterion(const RateProfile& profile, double s);

inline constexpr double kRateSearchMin = 1e-12;
inline constexpr double kRateSearchMax = 1e6;

/// Gamma(r) = inf{s > 0 : g(s) >= 1/r}, searched on [1e-12, 1e6].
/// Throws EmptyCriterion when no s in the window qualifies.
double gamma_rate(const RateProfile& profile, double r);

/// lambda(t) = int_t^inf gamma(r) / r dr: quadrature in log r up to
/// T = max(1e6, 1e4 t) plus the analytic integral of a power tail fitted on
/// [T/10, T]. Throws DivergentRate when the fitted tail does not decay.
double lambda_integral(const std::function<double(double)>& gamma, double t);
double lambda_integral(const RateProfile& profile, double t);

/// delta1 / lambda(delta2 n).
double rate_lower_bound(const RateProfile& profile, double delta1, double delta2, double n);

/// theta alpha / (d (theta + alpha)).
double weyl_exponent(int d, double theta, double alpha);

enum class BoundDirection { Lower, Upper };

/// delta n^{theta alpha / (d (theta + alpha))}; same formula for both sides.
double power_law_bound(int d, double theta, double alpha, double delta, double n,
                       BoundDirection direction = BoundDirection::Lower);

/// Upper end of the admissible delta window of the log-corrected bound:
/// (d beta1 sqrt(theta) / alpha0^2) (d (alpha0 + theta) / (alpha0 theta))^{3/2}.
double log_corrected_delta_limit(int d, double theta, double alpha0, double beta1);

/// c n^{theta alpha0 / (d (theta + alpha0))} exp(delta sqrt(log n)).
/// Throws InadmissibleDelta outside (0, limit).
double log_corrected_lower_bound(int d, double theta, double alpha0, double beta1, double delta,
                                 double c_delta, double n);

/// (2 pi)^{-d} int exp(-t psi(xi)) dxi.
double heat_trace_rho1(const Symbol& symbol, int d, double t);
/// int exp(-2 t V(x)) dx.
double heat_trace_rho2(const Potential& potential, int d, double t);

struct TraceWindow {
  double t_min = 1e-4;
  double t_max = 1e4;
  int points = 400;
};

/// max over t of log((n + 1) / (rho1 rho2)) / (2t), clamped at 0. Every t
/// gives a valid lower bound, so the best one on the window is reported.
/// Throws WindowTooNarrow when the maximizer sits on the window edge.
double trace_lower(const Symbol& symbol, const Potential& potential, int d, double n,
                   const TraceWindow& window = {});

enum class BoundSource { RateLower, PowerLower, PowerUpper, LogCorrectedLower, HeatTraceLower };

std::string_view to_string(BoundSource source) noexcept;
bool is_lower(BoundSource source) noexcept;

struct BoundCurve {
  BoundSource source = BoundSource::PowerLower;
  /// Named constants in a fixed order.
  std::vector<std::pair<std::string, double>> constants;
  std::function<double(double)> evaluate;
  double min_n = 1.0;

  double operator()(double n) const { return evaluate(n); }
};

/// "name=value;..." with shortest round-trip numbers; input of the constants digest.
std::string canonical_constants(const BoundCurve& curve);

BoundCurve make_rate_lower_curve(RateProfile profile, double delta1, double delta2);
BoundCurve make_power_curve(int d, double theta, double alpha, double delta,
                            BoundDirection direction);
BoundCurve make_log_corrected_curve(int d, double theta, double alpha0, double beta1, double delta,
                                    double c_delta);
BoundCurve make_heat_trace_curve(Symbol symbol, Potential potential, int d,
                                 TraceWindow window = {});

}  // namespace nlspec
