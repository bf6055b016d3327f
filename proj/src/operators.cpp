#include "nlspec/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/differentiation/autodiff.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>

#include "nlspec/error.hpp"

namespace nlspec {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

double distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

double slope_fit(const std::vector<double>& lx, const std::vector<double>& ly) {
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  return sxy / sxx;
}

// Maximizes the concave ray objective r -> r * slope - f(r * direction) over r >= 0.
double ray_supremum(const ConvexFunction& f, std::span<const double> direction, double slope,
                    double cap) {
  const std::size_t d = direction.size();
  std::vector<double> point(d);
  auto objective = [&](double r) {
    for (std::size_t i = 0; i < d; ++i) point[i] = r * direction[i];
    return r * slope - f(point);
  };

  double lo = 0.0;
  double mid = 0.0;
  double f_mid = objective(0.0);
  double hi = 1.0;
  double f_hi = objective(hi);
  if (f_hi > f_mid) {
    // Expand until the objective turns down.
    lo = 0.0;
    mid = hi;
    f_mid = f_hi;
    for (;;) {
      hi = 2.0 * mid;
      if (hi > cap) {
        const double f_cap = objective(cap);
        if (f_cap > f_mid) return kInfinity;
        hi = cap;
        break;
      }
      f_hi = objective(hi);
      if (f_hi <= f_mid) break;
      lo = mid;
      mid = hi;
      f_mid = f_hi;
    }
  }
  const auto [arg, value] = boost::math::tools::brent_find_minima(
      [&](double r) { return -objective(r); }, lo, hi, std::numeric_limits<double>::digits / 2);
  (void)arg;
  return std::max(-value, objective(0.0));
}

void check_midpoint_convexity(const ConvexFunction& f, int d, const LegendreOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> box(-options.convexity_box, options.convexity_box);
  std::vector<double> a(d), b(d), m(d);
  for (int sample = 0; sample < options.convexity_samples; ++sample) {
    // Alternate between the full box and a small neighbourhood of the origin.
    const double scale = (sample % 2 == 0) ? 1.0 : 1e-2;
    for (int i = 0; i < d; ++i) {
      a[i] = scale * box(rng);
      b[i] = scale * box(rng);
      m[i] = 0.5 * (a[i] + b[i]);
    }
    const double fa = f(a), fb = f(b), fm = f(m);
    if (!std::isfinite(fa) || !std::isfinite(fb)) continue;
    const double slack = 1e-10 * (1.0 + std::abs(fa) + std::abs(fb));
    if (fm > 0.5 * (fa + fb) + slack) {
      fail(ErrorCode::NonConvexSymbol, "midpoint convexity violated by " +
                                           std::to_string(fm - 0.5 * (fa + fb)));
    }
  }
}

double power_antiderivative_integral(double exponent, double a, double b) {
  // int_a^b r^exponent dr, b may be infinite.
  if (std::abs(exponent + 1.0) < 1e-14) return std::log(b / a);
  const double e1 = exponent + 1.0;
  const double fb = std::isinf(b) ? 0.0 : std::pow(b, e1);
  return (fb - std::pow(a, e1)) / e1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Symbols
// ---------------------------------------------------------------------------

void validate(const Symbol& symbol, int d) {
  require(d >= 1, "dimension must be >= 1");
  std::visit(overloaded{
                 [](const IsotropicStable& s) {
                   require(s.alpha > 0.0 && s.alpha < 2.0, "isotropic order must lie in (0, 2)");
                   require(s.coefficient > 0.0, "symbol coefficient must be positive");
                 },
                 [d](const AnisotropicSum& s) {
                   require(!s.terms.empty(), "anisotropic symbol needs at least one term");
                   for (const auto& t : s.terms) {
                     require(t.weight > 0.0, "anisotropic weight must be positive");
                     require(t.outer > 0.0, "anisotropic outer exponent must be positive");
                     require(static_cast<int>(t.inner_exponents.size()) == d,
                             "anisotropic inner exponent count must equal the dimension");
                     double amax = 0.0;
                     for (double a : t.inner_exponents) {
                       require(a > 0.0, "anisotropic inner exponents must be positive");
                       amax = std::max(amax, a);
                     }
                     require(t.outer * amax < 2.0,
                             "anisotropic term needs outer * max inner exponent < 2");
                   }
                 },
             },
             symbol);
}

double eval_symbol(const Symbol& symbol, std::span<const double> xi) {
  return std::visit(overloaded{
                        [&](const IsotropicStable& s) {
                          const double r = norm(xi);
                          return r == 0.0 ? 0.0 : s.coefficient * std::pow(r, s.alpha);
                        },
                        [&](const AnisotropicSum& s) {
                          double total = 0.0;
                          for (const auto& t : s.terms) {
                            double inner = 0.0;
                            for (std::size_t j = 0; j < xi.size(); ++j) {
                              const double a = std::abs(xi[j]);
                              if (a > 0.0) inner += std::pow(a, t.inner_exponents[j]);
                            }
                            if (inner > 0.0) total += t.weight * std::pow(inner, t.outer);
                          }
                          return total;
                        },
                    },
                    symbol);
}

SandwichExponents sandwich_exponents(const Symbol& symbol) {
  return std::visit(overloaded{
                        [](const IsotropicStable& s) { return SandwichExponents{s.alpha, s.alpha}; },
                        [](const AnisotropicSum& s) {
                          SandwichExponents e{kInfinity, 0.0};
                          for (const auto& t : s.terms) {
                            const auto [lo, hi] = std::minmax_element(t.inner_exponents.begin(),
                                                                      t.inner_exponents.end());
                            e.lower = std::min(e.lower, t.outer * *lo);
                            e.upper = std::max(e.upper, t.outer * *hi);
                          }
                          return e;
                        },
                    },
                    symbol);
}

double ray_exponent(const Symbol& symbol, std::span<const double> direction, double r_min,
                    double r_max) {
  constexpr int kPoints = 32;
  const double unit = norm(direction);
  require(unit > 0.0, "ray direction must be nonzero");
  std::vector<double> lx, ly, xi(direction.size());
  for (int i = 0; i < kPoints; ++i) {
    const double r = r_min * std::pow(r_max / r_min, double(i) / (kPoints - 1));
    for (std::size_t j = 0; j < xi.size(); ++j) xi[j] = r * direction[j] / unit;
    lx.push_back(std::log(r));
    ly.push_back(std::log(eval_symbol(symbol, xi)));
  }
  return slope_fit(lx, ly);
}

double legendre(const ConvexFunction& f, int d, std::span<const double> x,
                const LegendreOptions& options) {
  require(d >= 1 && static_cast<int>(x.size()) == d, "point dimension mismatch");
  check_midpoint_convexity(f, d, options);
  const double cap = options.frequency_cap;

  if (d == 1) {
    const double plus[1] = {1.0};
    const double minus[1] = {-1.0};
    return std::max(ray_supremum(f, plus, x[0], cap), ray_supremum(f, minus, -x[0], cap));
  }

  auto along = [&](const std::vector<double>& w) {
    double slope = 0.0;
    for (int i = 0; i < d; ++i) slope += x[i] * w[i];
    return ray_supremum(f, w, slope, cap);
  };

  if (d == 2) {
    const int samples = std::max(8, options.angular_samples);
    const double step = 2.0 * std::numbers::pi / samples;
    double best = -kInfinity;
    int best_index = 0;
    std::vector<double> w(2);
    for (int i = 0; i < samples; ++i) {
      w = {std::cos(i * step), std::sin(i * step)};
      const double v = along(w);
      if (v == kInfinity) return kInfinity;
      if (v > best) {
        best = v;
        best_index = i;
      }
    }
    const double centre = best_index * step;
    const auto refined = boost::math::tools::brent_find_minima(
        [&](double angle) {
          std::vector<double> u{std::cos(angle), std::sin(angle)};
          const double v = along(u);
          return v == kInfinity ? -std::numeric_limits<double>::max() : -v;
        },
        centre - step, centre + step, std::numeric_limits<double>::digits / 2);
    return std::max(best, -refined.second);
  }

  fail(ErrorCode::UnsupportedDimension, "legendre transform supports d <= 2");
}

double legendre(const Symbol& symbol, std::span<const double> x, const LegendreOptions& options) {
  const int d = static_cast<int>(x.size());
  validate(symbol, d);
  const ConvexFunction f = [&symbol](std::span<const double> xi) { return eval_symbol(symbol, xi); };
  if (std::holds_alternative<IsotropicStable>(symbol) && d > 1) {
    // Radial symbols: the optimal frequency is parallel to x.
    check_midpoint_convexity(f, d, options);
    const double r = norm(x);
    std::vector<double> w(d, 0.0);
    if (r == 0.0) {
      w[0] = 1.0;
    } else {
      for (int i = 0; i < d; ++i) w[i] = x[i] / r;
    }
    return ray_supremum(f, w, r, options.frequency_cap);
  }
  return legendre(f, d, x, options);
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

void validate(const JumpKernel& kernel) {
  std::visit(overloaded{
                 [](const LevyStable& k) {
                   require(k.alpha > 0.0 && k.alpha < 2.0, "kernel order must lie in (0, 2)");
                   require(k.kappa > 0.0, "kernel range must be positive");
                 },
                 [](const VariableOrder& k) {
                   require(k.alpha0 > 0.0 && k.alpha0 < 2.0, "alpha0 must lie in (0, 2)");
                   require(k.beta1 > 0.0, "beta1 must be positive");
                   require(k.beta2 > 1.0, "beta2 must exceed 1");
                   require(k.alpha0 + k.beta1 / std::sqrt(std::log(k.beta2)) < 2.0,
                           "alpha0 + beta1 / sqrt(log beta2) must stay below 2");
                   require(k.kappa > 0.0, "kernel range must be positive");
                 },
                 [](const GeneralKernel& k) {
                   require(static_cast<bool>(k.order) && static_cast<bool>(k.amplitude),
                           "general kernel needs order and amplitude functions");
                   require(k.epsilon > 0.0 && k.epsilon <= 1.0, "amplitude bound must lie in (0, 1]");
                   require(k.alpha_upper > 0.0 && k.alpha_upper < 2.0,
                           "order upper bound must lie in (0, 2)");
                   require(k.alpha_lower <= k.alpha_upper, "order bounds are inverted");
                   require(k.kappa > 0.0, "kernel range must be positive");
                 },
             },
             kernel);
}

double kernel_range(const JumpKernel& kernel) noexcept {
  return std::visit([](const auto& k) { return k.kappa; }, kernel);
}

bool is_translation_invariant(const JumpKernel& kernel) noexcept {
  return std::holds_alternative<LevyStable>(kernel);
}

double kernel_order(const JumpKernel& kernel, std::span<const double> x, std::span<const double> y) {
  return std::visit(overloaded{
                        [](const LevyStable& k) { return k.alpha; },
                        [&](const VariableOrder& k) {
                          return k.alpha0 + k.beta1 / std::sqrt(std::log(k.beta2 + norm(x) + norm(y)));
                        },
                        [&](const GeneralKernel& k) { return k.order(x, y); },
                    },
                    kernel);
}

double kernel_amplitude(const JumpKernel& kernel, std::span<const double> x,
                        std::span<const double> y) {
  if (const auto* g = std::get_if<GeneralKernel>(&kernel)) return g->amplitude(x, y);
  return 1.0;
}

double eval_kernel(const JumpKernel& kernel, std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && !x.empty(), "kernel points must share a dimension");
  const double r = distance(x, y);
  if (r == 0.0) fail(ErrorCode::CoincidentPoints, "kernel evaluated on the diagonal");
  if (r > kernel_range(kernel)) return 0.0;
  const double d = static_cast<double>(x.size());
  return kernel_amplitude(kernel, x, y) * std::pow(r, -(d + kernel_order(kernel, x, y)));
}

double unit_sphere_area(int d) {
  const double h = 0.5 * d;
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

double fractional_laplacian_constant(int d, double alpha) {
  return alpha * std::pow(2.0, alpha - 1.0) * std::tgamma(0.5 * (d + alpha)) /
         (std::pow(std::numbers::pi, 0.5 * d) * std::tgamma(1.0 - 0.5 * alpha));
}

Symbol equivalent_symbol(const LevyStable& kernel, int d) {
  require(std::isinf(kernel.kappa), "equivalent symbol needs a full-range kernel");
  return IsotropicStable{kernel.alpha, 2.0 / fractional_laplacian_constant(d, kernel.alpha)};
}

double tail_mass(const JumpKernel& kernel, int d, double r) {
  require(r > 0.0, "tail radius must be positive");
  require(d >= 1, "dimension must be >= 1");
  const double kappa = kernel_range(kernel);
  if (r >= kappa) return 0.0;
  const double area = unit_sphere_area(d);

  // Radial envelope split at |z| = 1: near order for |z| < 1, far order beyond.
  auto radial_power = [&](double order, double amplitude, double a, double b) {
    if (a >= b) return 0.0;
    if (std::isinf(b) && order <= 0.0) {
      fail(ErrorCode::DivergentTail, "kernel envelope is not integrable at infinity");
    }
    return amplitude * area * power_antiderivative_integral(-1.0 - order, a, b);
  };

  return std::visit(
      overloaded{
          [&](const LevyStable& k) { return radial_power(k.alpha, 1.0, r, kappa); },
          [&](const VariableOrder& k) {
            double near = 0.0;
            const double b = std::min(1.0, kappa);
            if (r < b) {
              auto integrand = [&](double rho) {
                const double order = k.alpha0 + k.beta1 / std::sqrt(std::log(k.beta2 + rho));
                return area * std::pow(rho, -1.0 - order);
              };
              double error = 0.0;
              near = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                  integrand, r, b, 15, 1e-12, &error);
              if (!(error <= 1e-8 * std::abs(near) + 1e-300)) {
                fail(ErrorCode::DivergentTail, "near-field tail quadrature did not converge");
              }
            }
            return near + radial_power(k.alpha0, 1.0, std::max(r, 1.0), kappa);
          },
          [&](const GeneralKernel& k) {
            const double amp = 1.0 / k.epsilon;
            return radial_power(k.alpha_upper, amp, r, std::min(1.0, kappa)) +
                   radial_power(k.alpha_lower, amp, std::max(r, 1.0), kappa);
          },
      },
      kernel);
}

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

void validate(const Potential& potential) {
  std::visit(overloaded{
                 [](const PowerPotential& v) {
                   require(v.c > 0.0, "potential coefficient must be positive");
                   require(v.theta > 0.0, "potential exponent must be positive");
                 },
                 [](const TwoSidedPower& v) {
                   require(v.c3 > 0.0 && v.c4 > 0.0, "potential coefficients must be positive");
                   require(v.theta1 > 0.0 && v.theta2 >= v.theta1,
                           "potential exponents need theta2 >= theta1 > 0");
                   require(v.crossover > 0.0, "crossover radius must be positive");
                   require(v.c4 * std::pow(v.crossover, v.theta2) >=
                               v.c3 * std::pow(v.crossover, v.theta1),
                           "upper envelope must dominate the lower one at the crossover");
                 },
             },
             potential);
}

double eval_potential(const Potential& potential, double radius) {
  const double r = std::abs(radius);
  return std::visit(overloaded{
                        [r](const PowerPotential& v) { return v.c * std::pow(r, v.theta); },
                        [r](const TwoSidedPower& v) {
                          const double lower = v.c3 * std::pow(r, v.theta1);
                          if (r < v.crossover) return lower;
                          const double upper = v.c4 * std::pow(r, v.theta2);
                          if (std::isinf(upper)) return upper;
                          const double s = std::sin(std::log(r / v.crossover));
                          return lower + (upper - lower) * s * s;
                        },
                    },
                    potential);
}

double eval_potential(const Potential& potential, std::span<const double> x) {
  return eval_potential(potential, norm(x));
}

double growth_phi(const Potential& potential, double radius) {
  require(radius >= 0.0, "growth radius must be nonnegative");
  return std::visit(
      overloaded{
          [&](const PowerPotential& v) { return v.c * std::pow(radius, v.theta); },
          [&](const TwoSidedPower& v) {
            if (radius <= v.crossover) return eval_potential(potential, radius);
            // V touches its increasing lower envelope at crossover * e^{j pi};
            // beyond the first touch at or after `radius` nothing is smaller.
            const double turns = std::ceil(std::log(radius / v.crossover) / std::numbers::pi);
            const double touch = v.crossover * std::exp(turns * std::numbers::pi);
            double best = std::min(eval_potential(potential, radius), eval_potential(potential, touch));
            constexpr int kScan = 256;
            int best_i = -1;
            for (int i = 1; i < kScan; ++i) {
              const double r = radius + (touch - radius) * i / kScan;
              const double value = eval_potential(potential, r);
              if (value < best) {
                best = value;
                best_i = i;
              }
            }
            if (best_i > 0) {
              const double lo = radius + (touch - radius) * (best_i - 1) / kScan;
              const double hi = radius + (touch - radius) * (best_i + 1) / kScan;
              const auto m = boost::math::tools::brent_find_minima(
                  [&](double r) { return eval_potential(potential, r); }, lo, hi,
                  std::numeric_limits<double>::digits / 2);
              best = std::min(best, m.second);
            }
            return best;
          },
      },
      potential);
}

double growth_phi_inverse(const Potential& potential, double level) {
  require(level >= 0.0, "growth level must be nonnegative");
  if (growth_phi(potential, 0.0) >= level) return 0.0;
  if (const auto* v = std::get_if<PowerPotential>(&potential)) {
    return std::pow(level / v->c, 1.0 / v->theta);
  }
  double lo = 0.0;
  double hi = 1.0;
  while (growth_phi(potential, hi) < level) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (growth_phi(potential, mid) >= level) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

// ---------------------------------------------------------------------------
// Reference functions
// ---------------------------------------------------------------------------

void validate(const ReferenceFunction& phi) {
  std::visit(overloaded{
                 [](const SimplePower& f) { require(f.p >= 0.0, "reference exponent must be >= 0"); },
                 [](const LogCorrected& f) {
                   require(f.k >= 0 && f.k <= 2, "log-corrected depth must be 0, 1 or 2");
                   require(f.p > 1.0, "log-corrected exponent must exceed 1");
                 },
             },
             phi);
}

double eval_reference(const ReferenceFunction& phi, int d, double s) {
  return reference_profile<double>(phi, d, s);
}

namespace {

// |varphi'(r)| (r + 1/r) + |varphi''(r)|.
double derivative_envelope(const ReferenceFunction& phi, int d, double r) {
  using boost::math::differentiation::make_fvar;
  const auto x = make_fvar<double, 2>(r);
  const auto y = reference_profile(phi, d, x);
  return std::abs(y.derivative(1)) * (r + 1.0 / r) + std::abs(y.derivative(2));
}

double doubling_constant(const ReferenceFunction& phi, int d, double s_min, double s_max, int points) {
  constexpr int kWindow = 17;
  double best = 0.0;
  for (int i = 0; i < points; ++i) {
    const double s = s_min * std::pow(s_max / s_min, double(i) / (points - 1));
    const double lo = std::max(s - 1.0, 1e-6);
    const double hi = s + 1.0;
    double envelope = 0.0;
    for (int j = 0; j < kWindow; ++j) {
      envelope = std::max(envelope, derivative_envelope(phi, d, lo + (hi - lo) * j / (kWindow - 1)));
    }
    const double q = (envelope + eval_reference(phi, d, 0.5 * s)) / eval_reference(phi, d, s);
    if (!std::isfinite(q)) return kInfinity;
    best = std::max(best, q);
  }
  return best;
}

}  // namespace

ReferenceCheck check_reference_function(const ReferenceFunction& phi, int d,
                                        const ReferenceCheckOptions& options) {
  validate(phi);
  require(d >= 1, "dimension must be >= 1");
  ReferenceCheck result;

  // Square integrability: decade-wise adaptive quadrature up to grid_max, then
  // classify the decay of G(u) = s^d varphi(s)^2 in u = log s.
  auto radial = [&](double s) {
    const double f = eval_reference(phi, d, s);
    return std::pow(s, d - 1) * f * f;
  };
  double integral = 0.0;
  double a = 0.0;
  for (double b = 1.0; b <= options.grid_max * (1 + 1e-12); b *= 10.0) {
    integral += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(radial, a, b, 12, 1e-12);
    a = b;
  }
  auto g_of_u = [&](double u) {
    const double s = std::exp(u);
    const double f = eval_reference(phi, d, s);
    return std::pow(s, d) * f * f;
  };
  const double u_max = std::log(options.grid_max);
  const double du = 1e-3;
  auto decay_rate = [&](double u) {
    return -(std::log(g_of_u(u + du)) - std::log(g_of_u(u - du))) / (2.0 * du);
  };
  const double rate_end = decay_rate(u_max);
  const double rate_before = decay_rate(u_max - std::log(10.0));
  double tail = kInfinity;
  if (rate_end > 1e-6 && rate_end > 0.9 * rate_before) {
    tail = g_of_u(u_max) / rate_end;  // exponential decay in u
  } else if (rate_end > 0.0) {
    const double power = rate_end * u_max;  // local power of u
    if (power > 1.0 + 1e-3) tail = g_of_u(u_max) * u_max / (power - 1.0);
  }
  result.square_integrable = std::isfinite(tail);
  result.l2_integral = result.square_integrable ? integral + tail : kInfinity;

  // Derivative and doubling bound, with two grid refinements.
  const int n = options.grid_points;
  const double c1 = doubling_constant(phi, d, options.grid_min, options.grid_max, n);
  const double c2 = doubling_constant(phi, d, options.grid_min, options.grid_max, 2 * n);
  const double c4 = doubling_constant(phi, d, options.grid_min, options.grid_max, 4 * n);
  // A bounded quotient must also stop growing past the grid's right end.
  const double far = doubling_constant(phi, d, options.grid_max, 100.0 * options.grid_max, 64);
  const bool stable = std::isfinite(c4) && std::abs(c2 - c1) <= options.stability * c4 &&
                      std::abs(c4 - c2) <= options.stability * c4 &&
                      far <= (1.0 + options.stability) * c4;
  result.doubling_bounded = stable;
  result.constant = stable ? std::max(c4, far) : kInfinity;
  return result;
}

}  // namespace nlspec
