#include "nlspec/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <lapacke.h>

#include "nlspec/error.hpp"

namespace nlspec {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Orthonormal columns stored in fixed-width chunks so growth never copies.
class Basis {
 public:
  Basis(std::size_t n, int width) : n_(n), width_(width) {}

  int cols() const noexcept { return cols_; }

  void push(const Eigen::Ref<const VectorXd>& v) {
    if (cols_ % width_ == 0) chunks_.emplace_back(static_cast<Eigen::Index>(n_), width_);
    chunks_.back().col(cols_ % width_) = v;
    ++cols_;
  }

  // One classical Gram-Schmidt sweep, w -= V (V^T w).
  void project_out(Eigen::Ref<VectorXd> w) const {
    for (std::size_t c = 0; c < chunks_.size(); ++c) {
      const int used = std::min(width_, cols_ - static_cast<int>(c) * width_);
      const auto block = chunks_[c].leftCols(used);
      const VectorXd h = block.transpose() * w;
      w.noalias() -= block * h;
    }
  }

 private:
  std::size_t n_;
  int width_;
  int cols_ = 0;
  std::vector<MatrixXd> chunks_;
};

VectorXd random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = normal(rng);
  return v;
}

void apply_to(const LinearAction& apply, const VectorXd& x, Eigen::Ref<VectorXd> y) {
  apply(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
        std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
}

void check_symmetric(const LinearAction& apply, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5bd1e9955bd1e995ULL);
  for (int trial = 0; trial < 2; ++trial) {
    const VectorXd x = random_vector(n, rng);
    const VectorXd y = random_vector(n, rng);
    VectorXd hx(x.size()), hy(y.size());
    apply_to(apply, x, hx);
    apply_to(apply, y, hy);
    const double diff = std::abs(x.dot(hy) - y.dot(hx));
    const double scale = x.norm() * hy.norm() + y.norm() * hx.norm();
    if (!(diff <= 1e-10 * scale))
      fail(ErrorCode::NotSymmetric, "operator failed the random symmetry check");
  }
}

// Removes the components along the basis and the first `filled` columns of q.
void orthogonalize(const Basis& basis, const MatrixXd& q, int filled, Eigen::Ref<VectorXd> w) {
  for (int pass = 0; pass < 2; ++pass) {
    basis.project_out(w);
    for (int i = 0; i < filled; ++i) w -= q.col(i).dot(w) * q.col(i);
  }
}

// A random unit direction orthogonal to everything so far.
VectorXd fresh_direction(const Basis& basis, const MatrixXd& q, int filled, std::size_t n,
                         std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 3; ++attempt) {
    VectorXd v = random_vector(n, rng);
    const double before = v.norm();
    orthogonalize(basis, q, filled, v);
    const double after = v.norm();
    if (after > 1e-8 * before) return v / after;
  }
  fail(ErrorCode::BreakdownDetected, "no new Krylov direction after 3 random restarts");
}

struct RitzPairs {
  std::vector<double> values;
  MatrixXd tails;  // last block rows of the Ritz vectors, b x count
};

RitzPairs tridiagonal_ritz(const std::vector<MatrixXd>& a, const std::vector<MatrixXd>& b,
                           int count) {
  const int m = static_cast<int>(a.size());
  std::vector<double> d(m), e(std::max(m, 1), 0.0);
  for (int j = 0; j < m; ++j) d[j] = a[j](0, 0);
  for (int j = 0; j + 1 < m; ++j) e[j] = b[j](0, 0);
  std::vector<double> w(m);
  MatrixXd z(m, count);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(m));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', m, d.data(), e.data(), 0.0,
                                         0.0, 1, count, 0.0, &found, w.data(), z.data(), m,
                                         support.data());
  if (info != 0 || found != count)
    fail(ErrorCode::NoConvergence, "tridiagonal eigensolver failed (info " +
                                       std::to_string(info) + ")");
  RitzPairs out;
  out.values.assign(w.begin(), w.begin() + count);
  out.tails = z.bottomRows(1);
  return out;
}

RitzPairs banded_ritz(const std::vector<MatrixXd>& a, const std::vector<MatrixXd>& b, int count) {
  const int blocks = static_cast<int>(a.size());
  const int width = static_cast<int>(a[0].rows());
  const int m = blocks * width;
  MatrixXd t = MatrixXd::Zero(m, m);
  for (int j = 0; j < blocks; ++j) {
    t.block(j * width, j * width, width, width) = a[j];
    if (j + 1 < blocks) {
      t.block((j + 1) * width, j * width, width, width) = b[j];
      t.block(j * width, (j + 1) * width, width, width) = b[j].transpose();
    }
  }
  std::vector<double> w(m);
  MatrixXd z(m, count);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(m));
  lapack_int found = 0;
  const lapack_int info =
      LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', m, t.data(), m, 0.0, 0.0, 1, count, 0.0,
                     &found, w.data(), z.data(), m, support.data());
  if (info != 0 || found != count)
    fail(ErrorCode::NoConvergence, "block tridiagonal eigensolver failed (info " +
                                       std::to_string(info) + ")");
  RitzPairs out;
  out.values.assign(w.begin(), w.begin() + count);
  out.tails = z.bottomRows(width);
  return out;
}

int round_up(int value, int multiple) { return (value + multiple - 1) / multiple * multiple; }

}  // namespace

Spectrum lanczos_lowest(const LinearAction& apply, std::size_t dim, const LanczosOptions& opt) {
  require(opt.k >= 1 && static_cast<std::size_t>(opt.k) < dim, "need 1 <= k < dim");
  require(opt.tol > 0.0, "tolerance must be positive");
  require(opt.block_size >= 1 && static_cast<std::size_t>(opt.block_size) <= dim,
          "block size out of range");
  require(opt.max_iter >= 0, "max_iter must be nonnegative");
  const std::size_t n = dim;
  const int bs = opt.block_size;
  const int cap = static_cast<int>(std::min<std::size_t>(dim, 1u << 30));
  int max_dim = opt.max_iter > 0 ? std::min(opt.max_iter, cap)
                                 : std::min(cap, std::max(20 * opt.k, 4000));
  require(max_dim >= opt.k + bs, "max_iter too small for k");

  check_symmetric(apply, n, opt.seed);

  std::mt19937_64 rng(opt.seed);
  Basis basis(n, bs * std::max(1, 64 / bs));
  MatrixXd q(static_cast<Eigen::Index>(n), bs);
  for (int c = 0; c < bs; ++c) q.col(c) = fresh_direction(basis, q, c, n, rng);

  std::vector<MatrixXd> alphas, betas;
  MatrixXd q_prev, beta_prev;
  MatrixXd w(static_cast<Eigen::Index>(n), bs);
  int next_check = round_up(std::max(2 * opt.k, 20), bs);

  Spectrum out;
  out.solver = bs == 1 ? "lanczos" : "block-lanczos";
  out.seed = opt.seed;

  while (true) {
    std::vector<double> image_norm(bs);
    for (int c = 0; c < bs; ++c) {
      apply_to(apply, q.col(c), w.col(c));
      image_norm[c] = w.col(c).norm();
    }
    MatrixXd alpha = q.transpose() * w;
    alpha = 0.5 * (alpha + alpha.transpose()).eval();
    w.noalias() -= q * alpha;
    if (!betas.empty()) w.noalias() -= q_prev * beta_prev.transpose();
    for (int c = 0; c < bs; ++c) basis.push(q.col(c));
    for (int c = 0; c < bs; ++c) {
      auto col = w.col(c);
      for (int pass = 0; pass < 2; ++pass) basis.project_out(col);
    }

    const int m = basis.cols();
    const bool exhausted = static_cast<std::size_t>(m + bs) > dim;
    MatrixXd beta = MatrixXd::Zero(bs, bs);
    MatrixXd q_next(static_cast<Eigen::Index>(n), bs);
    if (exhausted) {
      Eigen::HouseholderQR<MatrixXd> qr(w);
      beta = qr.matrixQR().topRows(bs).triangularView<Eigen::Upper>();
    } else {
      for (int c = 0; c < bs; ++c) {
        VectorXd v = w.col(c);
        for (int pass = 0; pass < 2; ++pass) {
          for (int i = 0; i < c; ++i) {
            const double coef = q_next.col(i).dot(v);
            beta(i, c) += coef;
            v -= coef * q_next.col(i);
          }
        }
        const double norm = v.norm();
        if (norm > 1e-13 * std::max(image_norm[c], 1e-300)) {
          q_next.col(c) = v / norm;
          beta(c, c) = norm;
        } else {
          q_next.col(c) = fresh_direction(basis, q_next, c, n, rng);
        }
      }
    }
    alphas.push_back(std::move(alpha));
    betas.push_back(beta);

    const bool last = exhausted || m + bs > max_dim;
    if (m >= next_check || last) {
      const int count = std::min(opt.k, m);
      const RitzPairs ritz =
          bs == 1 ? tridiagonal_ritz(alphas, betas, count) : banded_ritz(alphas, betas, count);
      out.eigenvalues = ritz.values;
      out.residuals.assign(count, 0.0);
      bool done = count == opt.k;
      for (int i = 0; i < count; ++i) {
        out.residuals[i] = (beta * ritz.tails.col(i)).norm();
        if (out.residuals[i] > opt.tol * std::max(1.0, std::abs(out.eigenvalues[i]))) done = false;
      }
      out.iterations = m;
      if (done) return out;
      if (last) {
        out.converged = false;
        return out;
      }
      next_check = round_up(std::max(m + bs, static_cast<int>(std::ceil(1.15 * m))), bs);
    }
    q_prev = std::move(q);
    q = std::move(q_next);
    beta_prev = std::move(beta);
  }
}

void require_converged(const Spectrum& spectrum) {
  if (!spectrum.converged)
    fail(ErrorCode::NoConvergence, spectrum.solver + " did not converge within " +
                                       std::to_string(spectrum.iterations) + " iterations");
}

Spectrum dense_lowest(const Eigen::MatrixXd& matrix, int k) {
  const auto n = static_cast<std::size_t>(matrix.rows());
  require(matrix.rows() == matrix.cols(), "matrix must be square");
  if (n > kDenseLimit)
    fail(ErrorCode::DimensionTooLarge,
         "dense solver limited to " + std::to_string(kDenseLimit) + " rows, got " +
             std::to_string(n));
  require(k >= 1 && static_cast<std::size_t>(k) <= n, "need 1 <= k <= dimension");
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    fail(ErrorCode::NotSymmetric, "dense matrix is not symmetric");
  const MatrixXd sym = 0.5 * (matrix + matrix.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) fail(ErrorCode::NoConvergence, "dense eigensolver failed");
  Spectrum out;
  out.solver = "dense";
  out.iterations = static_cast<int>(n);
  for (int i = 0; i < k; ++i) {
    const double lambda = solver.eigenvalues()(i);
    const auto v = solver.eigenvectors().col(i);
    out.eigenvalues.push_back(lambda);
    out.residuals.push_back((sym * v - lambda * v).norm());
  }
  return out;
}

}  // namespace nlspec
