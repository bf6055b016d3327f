#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <variant>
#include <vector>

namespace nlspec {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Symbols psi(xi) of translation-invariant jump operators.
// ---------------------------------------------------------------------------

/// psi(xi) = coefficient * |xi|^alpha, alpha in (0, 2).
struct IsotropicStable {
  double alpha = 1.0;
  double coefficient = 1.0;
};

/// One summand c * (sum_j |xi_j|^{a_j})^beta of an anisotropic symbol.
struct AnisotropicTerm {
  double weight = 1.0;
  std::vector<double> inner_exponents;
  double outer = 1.0;
};

/// psi(xi) = sum_i c_i (sum_j |xi_j|^{a_ij})^{beta_i}; the dimension is the
/// length of the inner exponent lists.
struct AnisotropicSum {
  std::vector<AnisotropicTerm> terms;
};

using Symbol = std::variant<IsotropicStable, AnisotropicSum>;

/// Checks the parameter constraints of a symbol used in dimension d,
/// including beta_i * max_j a_ij < 2 for every anisotropic term.
void validate(const Symbol& symbol, int d);

double eval_symbol(const Symbol& symbol, std::span<const double> xi);

/// Exponents alpha' <= alpha with c1 |xi|^alpha <= psi <= c2 (|xi|^alpha + |xi|^alpha')
/// for large |xi|, read off the parameters.
struct SandwichExponents {
  double lower = 0.0;
  double upper = 0.0;
};
SandwichExponents sandwich_exponents(const Symbol& symbol);

/// Least-squares slope of log psi(r w) against log r for r in [r_min, r_max].
double ray_exponent(const Symbol& symbol, std::span<const double> direction,
                    double r_min = 1e3, double r_max = 1e6);

struct LegendreOptions {
  /// Frequencies beyond this radius count as divergence to +infinity.
  double frequency_cap = 1e6;
  int convexity_samples = 64;
  double convexity_box = 4.0;
  std::uint64_t seed = 7;
  int angular_samples = 256;
};

using ConvexFunction = std::function<double(std::span<const double>)>;

/// Convex conjugate sup_xi (<x, xi> - f(xi)). Returns kInfinity when the
/// supremum runs past the frequency cap. Throws NonConvexSymbol when random
/// midpoint-convexity probes fail.
double legendre(const ConvexFunction& f, int d, std::span<const double> x,
                const LegendreOptions& options = {});
double legendre(const Symbol& symbol, std::span<const double> x,
                const LegendreOptions& options = {});

// ---------------------------------------------------------------------------
// Jump kernels J(x, y).
// ---------------------------------------------------------------------------

/// J(x, y) = |x - y|^{-(d + alpha)} 1{|x - y| <= kappa}.
struct LevyStable {
  double alpha = 1.0;
  double kappa = kInfinity;
};

/// Order alpha(x, y) = alpha0 + beta1 / sqrt(log(beta2 + |x| + |y|)).
struct VariableOrder {
  double alpha0 = 1.0;
  double beta1 = 0.5;
  double beta2 = 2.718281828459045;
  double kappa = kInfinity;
};

/// J(x, y) = n(x, y) |x - y|^{-(d + alpha(x, y))} on |x - y| <= kappa, with
/// epsilon <= n <= 1/epsilon and alpha_lower <= alpha <= alpha_upper < 2.
struct GeneralKernel {
  std::function<double(std::span<const double>, std::span<const double>)> order;
  std::function<double(std::span<const double>, std::span<const double>)> amplitude;
  double epsilon = 1.0;
  double alpha_lower = 0.0;
  double alpha_upper = 1.0;
  double kappa = kInfinity;
};

using JumpKernel = std::variant<LevyStable, VariableOrder, GeneralKernel>;

void validate(const JumpKernel& kernel);

double kernel_range(const JumpKernel& kernel) noexcept;
double kernel_order(const JumpKernel& kernel, std::span<const double> x,
                    std::span<const double> y);
double kernel_amplitude(const JumpKernel& kernel, std::span<const double> x,
                        std::span<const double> y);
bool is_translation_invariant(const JumpKernel& kernel) noexcept;

/// J(x, y); zero beyond the range. Throws CoincidentPoints when x == y.
double eval_kernel(const JumpKernel& kernel, std::span<const double> x,
                   std::span<const double> y);

/// Integral over |z| > r of sup_x J(x, x + z). Throws DivergentTail when the
/// far-field envelope is not integrable.
double tail_mass(const JumpKernel& kernel, int d, double r);

/// Surface area of the unit sphere in R^d (2 for d = 1).
double unit_sphere_area(int d);

/// Constant C with int (1 - cos <z, xi>) |z|^{-(d+alpha)} dz = |xi|^alpha / C.
double fractional_laplacian_constant(int d, double alpha);

/// Symbol of the quadratic form int int (f(x) - f(y))^2 J(x, y) dx dy for a
/// full-range stable kernel: 2 |xi|^alpha / C(d, alpha).
Symbol equivalent_symbol(const LevyStable& kernel, int d);

// ---------------------------------------------------------------------------
// Radial potentials V(x) = v(|x|).
// ---------------------------------------------------------------------------

/// V(x) = c |x|^theta.
struct PowerPotential {
  double c = 1.0;
  double theta = 2.0;
};

/// c3 |x|^theta1 below the crossover radius; beyond it the potential
/// oscillates in log |x| between c3 |x|^theta1 and c4 |x|^theta2.
struct TwoSidedPower {
  double c3 = 1.0;
  double theta1 = 1.0;
  double c4 = 1.0;
  double theta2 = 2.0;
  double crossover = 1.0;
};

using Potential = std::variant<PowerPotential, TwoSidedPower>;

void validate(const Potential& potential);
double eval_potential(const Potential& potential, double radius);
double eval_potential(const Potential& potential, std::span<const double> x);

/// Phi(R) = inf_{|x| >= R} V(x).
double growth_phi(const Potential& potential, double radius);

/// Generalized inverse inf{s >= 0 : Phi(s) >= level}.
double growth_phi_inverse(const Potential& potential, double level);

// ---------------------------------------------------------------------------
// Reference functions phi(x) = varphi(|x|).
// ---------------------------------------------------------------------------

/// varphi(s) = (1 + s^2)^{-p}.
struct SimplePower {
  double p = 1.0;
};

/// (1 + s^2)^{-d/4} with iterated-logarithm corrections of depth k (k <= 2)
/// and exponent p on the deepest logarithm.
struct LogCorrected {
  int k = 0;
  double p = 2.0;
};

using ReferenceFunction = std::variant<SimplePower, LogCorrected>;

void validate(const ReferenceFunction& phi);

namespace detail {

template <class T>
T iterated_log(int depth, T arg) {
  using std::log;
  T v = arg;
  for (int i = 0; i < depth; ++i) v = log(v);
  return v;
}

}  // namespace detail

/// Profile varphi(s); templated so automatic differentiation can pass through.
template <class T>
T reference_profile(const ReferenceFunction& phi, int d, T s) {
  using std::exp;
  using std::pow;
  using std::sqrt;
  const T s2 = s * s;
  if (const auto* sp = std::get_if<SimplePower>(&phi)) {
    return pow(1.0 + s2, -sp->p);
  }
  const auto& lc = std::get<LogCorrected>(phi);
  T denominator = pow(detail::iterated_log(lc.k + 1, std::exp(double(lc.k + 1)) + s2), lc.p / 2.0);
  for (int i = 1; i <= lc.k; ++i) {
    denominator *= sqrt(detail::iterated_log(i, std::exp(double(i)) + s2));
  }
  return pow(1.0 + s2, -double(d) / 4.0) / denominator;
}

double eval_reference(const ReferenceFunction& phi, int d, double s);

struct ReferenceCheckOptions {
  double grid_min = 1e-3;
  double grid_max = 1e6;
  int grid_points = 10000;
  /// Relative drift allowed between successive grid refinements.
  double stability = 0.01;
};

struct ReferenceCheck {
  bool square_integrable = false;
  /// int_0^inf s^{d-1} varphi(s)^2 ds (with tail extrapolation), or kInfinity.
  double l2_integral = kInfinity;
  bool doubling_bounded = false;
  /// Empirical constant of the derivative/doubling condition.
  double constant = kInfinity;

  bool pass() const noexcept { return square_integrable && doubling_bounded; }
};

/// Numerically verifies the two admissibility conditions on a reference
/// function: square integrability of s^{d-1} varphi^2 and the derivative
/// plus doubling bound by c varphi(s). A failure is reported, not thrown.
ReferenceCheck check_reference_function(const ReferenceFunction& phi, int d,
                                        const ReferenceCheckOptions& options = {});

}  // namespace nlspec
