#include "nlspec/rates.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "nlspec/error.hpp"
#include "nlspec/format.hpp"

namespace nlspec {

namespace {

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

}  // namespace

RateProfile constant_order_profile(int d, double alpha, const Potential& potential,
                                   const ReferenceFunction& phi, double kappa) {
  require(alpha > 0.0 && alpha < 2.0, "order must lie in (0, 2)");
  require(kappa > 0.0, "range offset must be positive");
  require(d >= 1, "dimension must be >= 1");
  validate(potential);
  validate(phi);
  RateProfile p;
  p.a = [alpha](double) { return alpha; };
  p.phi_inv = [potential](double level) { return growth_phi_inverse(potential, level); };
  p.phi_ref = phi;
  p.kappa = kappa;
  p.d = d;
  return p;
}

RateProfile variable_order_profile(int d, const VariableOrder& kernel, const Potential& potential,
                                   const ReferenceFunction& phi, double kappa) {
  validate(JumpKernel{kernel});
  RateProfile p = constant_order_profile(d, kernel.alpha0, potential, phi, kappa);
  p.a = [kernel](double r) {
    return kernel.alpha0 + kernel.beta1 / std::sqrt(std::log(kernel.beta2 + 2.0 * r));
  };
  return p;
}

double rate_criterion(const RateProfile& profile, double s) {
  const double radius = profile.phi_inv(2.0 / s);
  const double order = profile.a(radius + 1.0);
  const double f = eval_reference(profile.phi_ref, profile.d, profile.kappa + radius);
  return std::pow(s, profile.d / order) * f * f;
}

double gamma_rate(const RateProfile& profile, double r) {
  require(r > 0.0, "rate argument must be positive");
  const double target = std::log(1.0 / r);
  auto log_g = [&](double u) { return std::log(rate_criterion(profile, std::exp(u))); };

  // First crossing on a log grid (8 points per decade), then bisection. For a
  // monotone criterion this is the exact infimum; otherwise it is resolved to
  // the grid spacing.
  const double u_lo = std::log(kRateSearchMin);
  const double u_hi = std::log(kRateSearchMax);
  const int steps = 8 * 18;
  double prev = u_lo;
  if (log_g(u_lo) >= target) {
    fail(ErrorCode::InvalidArgument, "rate criterion does not vanish near s = 0");
  }
  for (int i = 1; i <= steps; ++i) {
    const double u = u_lo + (u_hi - u_lo) * i / steps;
    if (log_g(u) >= target) {
      double a = prev, b = u;
      while (b - a > 1e-11) {
        const double m = 0.5 * (a + b);
        if (log_g(m) >= target) b = m; else a = m;
      }
      return std::exp(b);
    }
    prev = u;
  }
  fail(ErrorCode::EmptyCriterion, "no s in [1e-12, 1e6] satisfies the rate criterion for r = " +
                                      format_double(r));
}

double lambda_integral(const std::function<double(double)>& gamma, double t) {
  require(t > 0.0, "integration start must be positive");
  const double big_t = std::max(1e6, 1e4 * t);
  auto integrand = [&](double u) { return gamma(std::exp(u)); };
  double error = 0.0;
  const double body = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, std::log(t), std::log(big_t), 20, 1e-12, &error);

  std::vector<double> rs, gs;
  for (int i = 0; i <= 10; ++i) {
    const double r = big_t * std::pow(10.0, -1.0 + 0.1 * i);
    rs.push_back(r);
    gs.push_back(gamma(r));
  }
  const double q = -loglog_slope(rs, gs);
  if (!(q > 0.0)) {
    fail(ErrorCode::DivergentRate, "fitted tail exponent " + format_double(-q) + " does not decay");
  }
  return body + gs.back() / q;
}

double lambda_integral(const RateProfile& profile, double t) {
  return lambda_integral([&](double r) { return gamma_rate(profile, r); }, t);
}

double rate_lower_bound(const RateProfile& profile, double delta1, double delta2, double n) {
  require(delta1 > 0.0 && delta2 > 0.0, "rate constants must be positive");
  require(n >= 1.0, "index must be >= 1");
  return delta1 / lambda_integral(profile, delta2 * n);
}

double weyl_exponent(int d, double theta, double alpha) {
  return theta * alpha / (d * (theta + alpha));
}

double power_law_bound(int d, double theta, double alpha, double delta, double n,
                       BoundDirection) {
  require(d >= 1 && theta > 0.0 && alpha > 0.0 && alpha < 2.0 && delta > 0.0,
          "power-law parameters out of range");
  return delta * std::pow(n, weyl_exponent(d, theta, alpha));
}

double log_corrected_delta_limit(int d, double theta, double alpha0, double beta1) {
  return (d * beta1 * std::sqrt(theta) / (alpha0 * alpha0)) *
         std::pow(d * (alpha0 + theta) / (alpha0 * theta), 1.5);
}

double log_corrected_lower_bound(int d, double theta, double alpha0, double beta1, double delta,
                                 double c_delta, double n) {
  require(n >= 1.0, "index must be >= 1");
  require(c_delta > 0.0, "bound constant must be positive");
  const double limit = log_corrected_delta_limit(d, theta, alpha0, beta1);
  if (!(delta > 0.0 && delta < limit)) {
    fail(ErrorCode::InadmissibleDelta,
         "delta " + format_double(delta) + " outside (0, " + format_double(limit) + ")");
  }
  return c_delta * std::pow(n, weyl_exponent(d, theta, alpha0)) *
         std::exp(delta * std::sqrt(std::log(n)));
}

double heat_trace_rho1(const Symbol& symbol, int d, double t) {
  require(t > 0.0, "time must be positive");
  require(d == 1 || d == 2, "heat trace supports d <= 2");
  const double norm = std::pow(2.0 * std::numbers::pi, -d);
  if (const auto* s = std::get_if<IsotropicStable>(&symbol)) {
    return norm * unit_sphere_area(d) * std::tgamma(d / s->alpha) /
           (s->alpha * std::pow(t * s->coefficient, d / s->alpha));
  }
  boost::math::quadrature::exp_sinh<double> radial;
  auto along = [&](double c, double s) {
    const double w[2] = {c, s};
    return radial.integrate([&](double rho) {
      const double xi[2] = {rho * w[0], rho * w[1]};
      return std::pow(rho, d - 1) * std::exp(-t * eval_symbol(symbol, std::span(xi, d)));
    });
  };
  if (d == 1) return norm * (along(1.0, 0.0) + along(-1.0, 0.0));
  constexpr int kAngles = 256;
  double sum = 0.0;
  for (int i = 0; i < kAngles; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / kAngles;
    sum += along(std::cos(phi), std::sin(phi));
  }
  return norm * sum * 2.0 * std::numbers::pi / kAngles;
}

double heat_trace_rho2(const Potential& potential, int d, double t) {
  require(t > 0.0, "time must be positive");
  require(d >= 1, "dimension must be >= 1");
  if (const auto* v = std::get_if<PowerPotential>(&potential)) {
    return unit_sphere_area(d) * std::tgamma(d / v->theta) /
           (v->theta * std::pow(2.0 * t * v->c, d / v->theta));
  }
  const auto& v = std::get<TwoSidedPower>(potential);
  auto integrand = [&](double rho) {
    const double weight = std::exp(-2.0 * t * eval_potential(potential, rho));
    return weight == 0.0 ? 0.0 : std::pow(rho, d - 1) * weight;
  };
  const double inner = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, 0.0, v.crossover, 15, 1e-12);
  boost::math::quadrature::exp_sinh<double> tail;
  const double outer = tail.integrate([&](double u) { return integrand(v.crossover + u); });
  return unit_sphere_area(d) * (inner + outer);
}

double trace_lower(const Symbol& symbol, const Potential& potential, int d, double n,
                   const TraceWindow& window) {
  require(n >= 1.0, "index must be >= 1");
  require(window.t_min > 0.0 && window.t_max > window.t_min && window.points >= 3,
          "invalid time window");
  auto value = [&](double log_t) {
    const double t = std::exp(log_t);
    return std::log((n + 1.0) / (heat_trace_rho1(symbol, d, t) * heat_trace_rho2(potential, d, t))) /
           (2.0 * t);
  };
  const double a = std::log(window.t_min), b = std::log(window.t_max);
  std::vector<double> values(window.points);
  for (int i = 0; i < window.points; ++i) values[i] = value(a + (b - a) * i / (window.points - 1));
  const auto best = std::max_element(values.begin(), values.end());
  if (*best <= 0.0) return 0.0;
  const int i = static_cast<int>(best - values.begin());
  if (i == 0 || i == window.points - 1) {
    fail(ErrorCode::WindowTooNarrow, "heat-trace maximizer sits on the time-window edge");
  }
  const double step = (b - a) / (window.points - 1);
  const double centre = a + step * i;
  const auto refined = boost::math::tools::brent_find_minima(
      [&](double u) { return -value(u); }, centre - step, centre + step,
      std::numeric_limits<double>::digits / 2);
  return std::max(*best, -refined.second);
}

std::string_view to_string(BoundSource source) noexcept {
  switch (source) {
    case BoundSource::RateLower: return "rate_lower";
    case BoundSource::PowerLower: return "power_lower";
    case BoundSource::PowerUpper: return "power_upper";
    case BoundSource::LogCorrectedLower: return "log_corrected_lower";
    case BoundSource::HeatTraceLower: return "heat_trace_lower";
  }
  return "unknown";
}

bool is_lower(BoundSource source) noexcept { return source != BoundSource::PowerUpper; }

std::string canonical_constants(const BoundCurve& curve) {
  std::string out;
  for (const auto& [name, value] : curve.constants) {
    if (!out.empty()) out += ';';
    out += name + '=' + format_double(value);
  }
  return out;
}

BoundCurve make_rate_lower_curve(RateProfile profile, double delta1, double delta2) {
  BoundCurve c;
  c.source = BoundSource::RateLower;
  c.constants = {{"delta1", delta1}, {"delta2", delta2}};
  c.evaluate = [profile = std::move(profile), delta1, delta2](double n) {
    return rate_lower_bound(profile, delta1, delta2, n);
  };
  return c;
}

BoundCurve make_power_curve(int d, double theta, double alpha, double delta,
                            BoundDirection direction) {
  BoundCurve c;
  c.source = direction == BoundDirection::Lower ? BoundSource::PowerLower : BoundSource::PowerUpper;
  c.constants = {{"delta", delta}, {"exponent", weyl_exponent(d, theta, alpha)}};
  c.evaluate = [=](double n) { return power_law_bound(d, theta, alpha, delta, n, direction); };
  return c;
}

BoundCurve make_log_corrected_curve(int d, double theta, double alpha0, double beta1, double delta,
                                    double c_delta) {
  // Validate eagerly so a bad delta surfaces at construction.
  (void)log_corrected_lower_bound(d, theta, alpha0, beta1, delta, c_delta, 1.0);
  BoundCurve c;
  c.source = BoundSource::LogCorrectedLower;
  c.constants = {{"c_delta", c_delta}, {"delta", delta}};
  c.evaluate = [=](double n) {
    return log_corrected_lower_bound(d, theta, alpha0, beta1, delta, c_delta, n);
  };
  return c;
}

BoundCurve make_heat_trace_curve(Symbol symbol, Potential potential, int d, TraceWindow window) {
  BoundCurve c;
  c.source = BoundSource::HeatTraceLower;
  c.constants = {{"t_min", window.t_min}, {"t_max", window.t_max}};
  c.evaluate = [=](double n) { return trace_lower(symbol, potential, d, n, window); };
  return c;
}

}  // namespace nlspec
