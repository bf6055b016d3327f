#pragma once

#include <cstddef>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nlspec/operators.hpp"

namespace nlspec {

/// Periodic box [-L, L)^d sampled with N points per axis.
struct BoxGrid {
  int d = 1;
  double L = 1.0;
  int N = 8;

  double h() const noexcept { return 2.0 * L / N; }
  std::size_t size() const noexcept;
  double point(int j) const noexcept { return -L + j * h(); }
  /// Signed lattice frequency (pi / L) k of FFT bin k in [0, N).
  double frequency(int bin) const noexcept;
};

void validate(const BoxGrid& grid);

/// psi(D) + V on a periodic grid, applied through real-to-complex FFTs.
class MultiplierOperator {
 public:
  MultiplierOperator(const BoxGrid& grid, const Symbol& symbol, const Potential& potential);
  /// Samples given directly: multiplier over the half spectrum (the r2c
  /// layout, N/2 + 1 per row in the last axis) and potential on grid points.
  MultiplierOperator(const BoxGrid& grid, std::vector<double> multiplier,
                     std::vector<double> potential);
  ~MultiplierOperator();
  MultiplierOperator(const MultiplierOperator&) = delete;
  MultiplierOperator& operator=(const MultiplierOperator&) = delete;
  MultiplierOperator(MultiplierOperator&&) noexcept;
  MultiplierOperator& operator=(MultiplierOperator&&) noexcept;

  const BoxGrid& grid() const noexcept;
  std::size_t dimension() const noexcept;
  const std::vector<double>& multiplier() const noexcept;
  const std::vector<double>& potential() const noexcept;
  /// Largest multiplier sample: the discretization's spectral ceiling.
  double spectral_ceiling() const noexcept;

  /// out = ifft(m * fft(f)) + V f. Safe to call concurrently.
  void apply(std::span<const double> f, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> f) const;

  Eigen::MatrixXd to_dense() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Symbol samples psi(xi_k) over the full lattice, sorted ascending.
std::vector<double> lattice_symbol_values(const BoxGrid& grid, const Symbol& symbol);

struct StiffnessOptions {
  /// Largest admitted kappa / h.
  double bandwidth_cap = 4096.0;
  /// Order nodes of the 2-D weight table for position-dependent orders.
  int order_table_nodes = 17;
};

/// Quadratic form f^T (A + diag(D)) f ~ E_{J,V}(f, f) for grid samples f;
/// the operator is (A + diag(D)) / h^d.
struct StiffnessMatrix {
  BoxGrid grid;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd D;
  int bandwidth = 0;

  double cell_volume() const noexcept;
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(D.size()); }
  double quadratic_form(std::span<const double> f) const;
  void apply(std::span<const double> f, std::span<double> out) const;
  Eigen::MatrixXd to_dense() const;
  /// "row col value" lines of A + diag(D), zero-based, upper triangle included.
  void write_coo(std::ostream& out) const;
};

/// Pair weights on the periodic grid (minimum image). Near offsets use a
/// quadratic model of (f(x+z) - f(x))^2 on [-h, h]^d, farther ones a tent
/// interpolation integrated exactly against |z|^{-(d+alpha)}; the order is
/// frozen at each grid pair. Throws BandwidthExceeded when kappa / h exceeds
/// the cap or reaches half the box, UnsupportedDimension for d > 2.
StiffnessMatrix assemble_stiffness(const BoxGrid& grid, const JumpKernel& kernel,
                                   const Potential& potential,
                                   const StiffnessOptions& options = {});

/// 4 tail_mass(J, kappa'): the largest eigenvalue shift between the kernel
/// and its truncation at kappa'.
double truncation_shift_bound(const JumpKernel& kernel, int d, double kappa_prime);

}  // namespace nlspec
