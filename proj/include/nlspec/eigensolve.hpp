#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nlspec {

/// Lowest eigenvalues of a symmetric operator, ascending, with residual norms.
struct Spectrum {
  std::vector<double> eigenvalues;
  std::vector<double> residuals;
  /// Krylov basis size for Lanczos, matrix dimension for the dense solver.
  int iterations = 0;
  std::string solver;
  std::uint64_t seed = 0;
  /// Hash of the grid and problem that produced the values; filled by callers.
  std::string digest;
  bool converged = true;

  std::size_t size() const noexcept { return eigenvalues.size(); }
  /// lambda_n with 1-based n.
  double operator()(std::size_t n) const { return eigenvalues.at(n - 1); }
};

/// y = H x for a symmetric H.
using LinearAction = std::function<void(std::span<const double>, std::span<double>)>;

struct LanczosOptions {
  int k = 10;
  double tol = 1e-9;
  std::uint64_t seed = 1;
  /// Largest Krylov basis; 0 picks min(dim, max(20 k, 4000)).
  int max_iter = 0;
  /// Block width. Exactly degenerate eigenvalues of multiplicity m need m.
  int block_size = 1;
};

/// Block Lanczos with full (two-pass classical Gram-Schmidt) reorthogonalization
/// from a seeded random start. The basis keeps growing until the k lowest
/// Ritz values satisfy |H s - theta s| <= tol max(1, |theta|), checked at
/// sizes increasing geometrically. A flagged partial spectrum
/// (converged = false) comes back when max_iter is reached; see
/// require_converged. Throws NotSymmetric when a random spot check fails and
/// BreakdownDetected when three fresh random directions cannot extend the
/// basis.
Spectrum lanczos_lowest(const LinearAction& apply, std::size_t dim, const LanczosOptions& options);

/// Throws NoConvergence unless spectrum.converged.
void require_converged(const Spectrum& spectrum);

inline constexpr std::size_t kDenseLimit = 4096;

/// Full symmetric eigendecomposition; lowest k values. Throws
/// DimensionTooLarge above kDenseLimit rows, NotSymmetric for an asymmetric
/// input.
Spectrum dense_lowest(const Eigen::MatrixXd& matrix, int k);

}  // namespace nlspec
