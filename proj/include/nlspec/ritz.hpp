#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nlspec/operators.hpp"

namespace nlspec {

/// min{(s - left)^+, (right - s)^+}: height and half-width (right - left) / 2.
struct Tent {
  double left = 0.0;
  double right = 1.0;

  double center() const noexcept { return 0.5 * (left + right); }
  double half_width() const noexcept { return 0.5 * (right - left); }
  double operator()(double s) const noexcept;
  /// (h(s + z) - h(s)) / z, the mean slope over [s, s + z]; exact for tiny z.
  double difference_quotient(double s, double z) const noexcept;
  /// int h^2 = (right - left)^3 / 12.
  double square_integral() const noexcept;
};

/// prod_i h_i(x_i).
using TentProduct = std::vector<Tent>;

double eval(const TentProduct& u, std::span<const double> x);

/// int h(s) e^{-i s xi} ds = e^{-i c xi} (4 / xi^2) sin^2(w xi / 2).
std::complex<double> tent_transform(const Tent& tent, double xi);

/// Knot k^{alpha / (theta + alpha)}.
double basis_knot(int k, double theta, double alpha);

/// Tents on the knots xi(1) < ... < xi(n + 1), products over {1..n}^d.
struct TrialBasis {
  int n = 1;
  int d = 1;
  double theta = 2.0;
  double alpha = 1.0;
  /// knots[k - 1] = xi(k), k = 1..n+1.
  std::vector<double> knots;
  /// I_k in flat (row-major, axis 0 slowest) order.
  std::vector<double> norms;

  std::size_t size() const noexcept { return norms.size(); }
  /// 1-based per-axis index of a flat position.
  std::vector<int> index(std::size_t flat) const;
  std::size_t flat(std::span<const int> index) const;
  Tent tent(int k) const;
  TentProduct function(std::size_t flat) const;
  double spacing(int k) const { return knots.at(k) - knots.at(k - 1); }
};

TrialBasis build_basis(int n, int d, double theta, double alpha);

/// min and max over k <= k_max of (xi(k+1) - xi(k)) k^{theta / (theta + alpha)}.
std::pair<double, double> knot_spacing_band(double theta, double alpha, int k_max);

struct SymbolProblem {
  Symbol symbol;
  Potential potential;
};

struct KernelProblem {
  JumpKernel kernel;
  Potential potential;
};

using RitzProblem = std::variant<SymbolProblem, KernelProblem>;

struct FormOptions {
  /// Relative accuracy target of each entry.
  double tol = 1e-9;
  /// Frequency-cutoff doublings allowed before QuadratureNotConverged.
  int max_doublings = 24;
};

/// One-dimensional E(u, v) = (1 / 2 pi) int psi(xi) u^(xi) conj(v^(xi)) dxi,
/// integrated over |xi| <= Xi with the non-oscillating part of the tail
/// added in closed form and Xi doubled until the value settles.
double fourier_pair_form(const Symbol& symbol, const Tent& u, const Tent& v,
                         const FormOptions& options = {});

/// int int (u(x) - u(y)) (v(x) - v(y)) J(x, y) dx dy for tent products. Stable
/// kernels use the exact correlation of u and v against |z|^{-(d+alpha)};
/// position-dependent kernels (d = 1 only) integrate the difference form
/// directly over z and then x.
double kernel_pair_form(const JumpKernel& kernel, const TentProduct& u, const TentProduct& v,
                        const FormOptions& options = {});

/// int u v V.
double potential_pair_form(const Potential& potential, const TentProduct& u, const TentProduct& v);

/// "fourier", "correlation" or "double-quadrature".
std::string form_route(const RitzProblem& problem, int d);

/// A_{kk'} = E_{J,V}(u_k, u_{k'}). Symbols in d = 2 must be isotropic stable.
Eigen::MatrixXd form_matrix(const TrialBasis& basis, const RitzProblem& problem,
                            const FormOptions& options = {});

/// Ascending solutions of A c = mu diag(norms) c.
std::vector<double> ritz_values(const Eigen::MatrixXd& a, std::span<const double> norms);

/// Least-squares slope of log mu against log n.
double loglog_slope(std::span<const double> n, std::span<const double> mu);

struct RitzScaling {
  double slope = 0.0;
  std::vector<double> n;
  std::vector<double> mu_max;
};

/// Largest Ritz value of |xi|^alpha + |x|^theta for each n and the fitted slope.
RitzScaling ritz_scaling_check(double theta, double alpha, int d, std::span<const int> n_list,
                               const FormOptions& options = {});

}  // namespace nlspec
