#include "nlspec/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlspec/error.hpp"
#include "nlspec/parallel.hpp"

namespace nlspec {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t half_width(const BoxGrid& g) { return static_cast<std::size_t>(g.N / 2 + 1); }

std::size_t spectrum_size(const BoxGrid& g) {
  return g.d == 1 ? half_width(g) : static_cast<std::size_t>(g.N) * half_width(g);
}

// int_a^b z^e dz for 0 <= a <= b (a > 0 when e <= -1).
double power_integral(double e, double a, double b) {
  if (b <= a) return 0.0;
  if (std::abs(e + 1.0) < 1e-14) return std::log(b / a);
  return (std::pow(b, e + 1.0) - std::pow(a, e + 1.0)) / (e + 1.0);
}

// Number of offsets per axis whose tent support reaches inside the range.
int offset_reach(double kappa, double h) {
  int m = 1;
  while ((m) * h < kappa) ++m;
  return m;
}

// One-sided 1-D weight c'_m. The ratio q(z) = (f(x+z) - f(x))^2 / z^2 is
// interpolated by tents on the lattice (held at q(h) on (0, h]) and integrated
// against z^2 J = z^{1-alpha}; exact whenever q is piecewise linear.
double weight_1d(int m, double h, double alpha, double kappa) {
  const double e = 1.0 - alpha;
  double w = 0.0;
  if (m == 1) {
    w += power_integral(e, 0.0, std::min(h, kappa));
  } else {
    // Rising edge z/h - (m - 1) on [(m-1)h, mh].
    const double a = (m - 1) * h, b = std::min(m * h, kappa);
    w += power_integral(e + 1.0, a, b) / h - (m - 1) * power_integral(e, a, b);
  }
  // Falling edge (m + 1) - z/h on [mh, (m+1)h].
  const double a = m * h, b = std::min((m + 1) * h, kappa);
  w += (m + 1) * power_integral(e, a, b) - power_integral(e + 1.0, a, b) / h;
  return w / (m * m * h * h);
}

// int over [-h, h]^2 of z_1^2 |z|^{-2-alpha} 1{|z| <= kappa}.
double near_moment_2d(double h, double alpha, double kappa) {
  auto radial = [&](double phi) {
    const double rho = std::min(h / std::cos(phi), kappa);
    return std::pow(rho, 2.0 - alpha) / (2.0 - alpha);
  };
  const double quarter = std::numbers::pi / 4.0;
  double total = 0.0;
  if (kappa < h / std::cos(quarter) && kappa > h) {
    const double kink = std::acos(h / kappa);
    total = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(radial, 0.0, kink) +
            boost::math::quadrature::gauss_kronrod<double, 31>::integrate(radial, kink, quarter);
  } else {
    total = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(radial, 0.0, quarter);
  }
  return 0.5 * 8.0 * total;
}

// int over one cell of the bilinear tent centred at (m1, m2) h times |z|^{-alpha}.
double tent_cell_2d(int m1, int m2, int c1, int c2, double h, double alpha, double kappa) {
  using Gauss = boost::math::quadrature::gauss<double, 8>;
  const double x0 = c1 * h, y0 = c2 * h;
  const double corners[4] = {std::hypot(x0, y0), std::hypot(x0 + h, y0), std::hypot(x0, y0 + h),
                             std::hypot(x0 + h, y0 + h)};
  const double r_max = *std::max_element(corners, corners + 4);
  // Closest distance from the origin to the cell.
  const double dx = std::max({0.0, x0, -(x0 + h)});
  const double dy = std::max({0.0, y0, -(y0 + h)});
  const double r_min = std::hypot(dx, dy);
  if (r_min >= kappa) return 0.0;
  const int split = r_max > kappa ? 8 : 1;
  const double s = h / split;
  double total = 0.0;
  for (int a = 0; a < split; ++a) {
    for (int b = 0; b < split; ++b) {
      const double xa = x0 + a * s, yb = y0 + b * s;
      total += Gauss::integrate(
          [&](double x) {
            return Gauss::integrate(
                [&](double y) {
                  const double r = std::hypot(x, y);
                  if (r > kappa) return 0.0;
                  const double tent =
                      (1.0 - std::abs(x / h - m1)) * (1.0 - std::abs(y / h - m2));
                  return tent * std::pow(r, -alpha);
                },
                yb, yb + s);
          },
          xa, xa + s);
    }
  }
  return total;
}

// Table of one-sided 2-D weights c'_m for |m1|, |m2| <= reach. Outside
// [-h, h]^2 the ratio (f(x+z) - f(x))^2 / |z|^2 is interpolated by bilinear
// tents; inside, a quadratic model is fed by the four axis neighbours. The
// axis weights are then shifted so the second moment int z_1^2 J is exact,
// unless that would make them negative.
std::vector<double> weight_table_2d(int reach, double h, double alpha, double kappa) {
  const int side = 2 * reach + 1;
  std::vector<double> table(static_cast<std::size_t>(side) * side, 0.0);
  const double near = near_moment_2d(h, alpha, kappa) / (2.0 * h * h);
  double moment = 0.0;
  for (int m1 = -reach; m1 <= reach; ++m1) {
    for (int m2 = -reach; m2 <= reach; ++m2) {
      if (m1 == 0 && m2 == 0) continue;
      double w = 0.0;
      for (int a = -1; a <= 0; ++a) {
        for (int b = -1; b <= 0; ++b) {
          const int c1 = m1 + a, c2 = m2 + b;
          const bool inside_near = (c1 == -1 || c1 == 0) && (c2 == -1 || c2 == 0);
          if (!inside_near) w += tent_cell_2d(m1, m2, c1, c2, h, alpha, kappa);
        }
      }
      w /= double(m1 * m1 + m2 * m2) * h * h;
      if (std::abs(m1) + std::abs(m2) == 1) w += near;
      table[static_cast<std::size_t>(m1 + reach) * side + (m2 + reach)] = w;
      moment += w * (m1 * h) * (m1 * h);
    }
  }
  const double exact = std::numbers::pi * std::pow(kappa, 2.0 - alpha) / (2.0 - alpha);
  const double shift = (exact - moment) / (2.0 * h * h);
  const std::size_t axis[4] = {static_cast<std::size_t>(reach + 1) * side + reach,
                               static_cast<std::size_t>(reach - 1) * side + reach,
                               static_cast<std::size_t>(reach) * side + reach + 1,
                               static_cast<std::size_t>(reach) * side + reach - 1};
  if (table[axis[0]] + shift > 0.0) {
    for (auto i : axis) table[i] += shift;
  }
  return table;
}

// Order range seen by grid pairs, for the 2-D interpolation table.
std::pair<double, double> order_range(const JumpKernel& kernel, const BoxGrid& grid) {
  return std::visit(
      [&](const auto& k) -> std::pair<double, double> {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, LevyStable>) {
          return {k.alpha, k.alpha};
        } else if constexpr (std::is_same_v<K, VariableOrder>) {
          const double far = 2.0 * std::sqrt(double(grid.d)) * grid.L;
          return {k.alpha0 + k.beta1 / std::sqrt(std::log(k.beta2 + far)),
                  k.alpha0 + k.beta1 / std::sqrt(std::log(k.beta2))};
        } else {
          return {k.alpha_lower, k.alpha_upper};
        }
      },
      kernel);
}

struct Triplet {
  int i, j;
  double w;
};

}  // namespace

std::size_t BoxGrid::size() const noexcept {
  std::size_t n = 1;
  for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(N);
  return n;
}

double BoxGrid::frequency(int bin) const noexcept {
  const int k = bin < N / 2 ? bin : bin - N;
  return std::numbers::pi / L * k;
}

void validate(const BoxGrid& grid) {
  if (grid.d < 1 || grid.d > 2) fail(ErrorCode::UnsupportedDimension, "grids support d = 1, 2");
  require(grid.L > 0.0, "box half-length must be positive");
  require(grid.N >= 8 && grid.N % 2 == 0, "points per axis must be even and >= 8");
}

// ---------------------------------------------------------------------------
// MultiplierOperator
// ---------------------------------------------------------------------------

struct MultiplierOperator::Impl {
  BoxGrid grid;
  std::vector<double> m;
  std::vector<double> v;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

MultiplierOperator::MultiplierOperator(const BoxGrid& grid, std::vector<double> multiplier,
                                       std::vector<double> potential)
    : impl_(std::make_unique<Impl>()) {
  validate(grid);
  require(multiplier.size() == spectrum_size(grid), "multiplier sample count mismatch");
  require(potential.size() == grid.size(), "potential sample count mismatch");
  impl_->grid = grid;
  impl_->m = std::move(multiplier);
  impl_->v = std::move(potential);
  std::vector<double> real(grid.size());
  std::vector<fftw_complex> spec(spectrum_size(grid));
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard lock(planner_mutex());
  if (grid.d == 1) {
    impl_->forward = fftw_plan_dft_r2c_1d(grid.N, real.data(), spec.data(), flags);
    impl_->backward = fftw_plan_dft_c2r_1d(grid.N, spec.data(), real.data(), flags);
  } else {
    impl_->forward = fftw_plan_dft_r2c_2d(grid.N, grid.N, real.data(), spec.data(), flags);
    impl_->backward = fftw_plan_dft_c2r_2d(grid.N, grid.N, spec.data(), real.data(), flags);
  }
}

namespace {

std::vector<double> sample_multiplier(const BoxGrid& grid, const Symbol& symbol) {
  validate(grid);
  validate(symbol, grid.d);
  std::vector<double> m(spectrum_size(grid));
  const int half = grid.N / 2 + 1;
  if (grid.d == 1) {
    for (int k = 0; k < half; ++k) {
      const double xi[1] = {grid.frequency(k)};
      m[k] = eval_symbol(symbol, xi);
    }
  } else {
    for (int k1 = 0; k1 < grid.N; ++k1) {
      for (int k2 = 0; k2 < half; ++k2) {
        const double xi[2] = {grid.frequency(k1), grid.frequency(k2)};
        m[static_cast<std::size_t>(k1) * half + k2] = eval_symbol(symbol, xi);
      }
    }
  }
  return m;
}

std::vector<double> sample_potential(const BoxGrid& grid, const Potential& potential) {
  validate(grid);
  validate(potential);
  std::vector<double> v(grid.size());
  if (grid.d == 1) {
    for (int j = 0; j < grid.N; ++j) v[j] = eval_potential(potential, grid.point(j));
  } else {
    for (int j1 = 0; j1 < grid.N; ++j1) {
      for (int j2 = 0; j2 < grid.N; ++j2) {
        const double x[2] = {grid.point(j1), grid.point(j2)};
        v[static_cast<std::size_t>(j1) * grid.N + j2] = eval_potential(potential, x);
      }
    }
  }
  return v;
}

}  // namespace

MultiplierOperator::MultiplierOperator(const BoxGrid& grid, const Symbol& symbol,
                                       const Potential& potential)
    : MultiplierOperator(grid, sample_multiplier(grid, symbol), sample_potential(grid, potential)) {}

MultiplierOperator::~MultiplierOperator() = default;
MultiplierOperator::MultiplierOperator(MultiplierOperator&&) noexcept = default;
MultiplierOperator& MultiplierOperator::operator=(MultiplierOperator&&) noexcept = default;

const BoxGrid& MultiplierOperator::grid() const noexcept { return impl_->grid; }
std::size_t MultiplierOperator::dimension() const noexcept { return impl_->grid.size(); }
const std::vector<double>& MultiplierOperator::multiplier() const noexcept { return impl_->m; }
const std::vector<double>& MultiplierOperator::potential() const noexcept { return impl_->v; }

double MultiplierOperator::spectral_ceiling() const noexcept {
  return *std::max_element(impl_->m.begin(), impl_->m.end());
}

void MultiplierOperator::apply(std::span<const double> f, std::span<double> out) const {
  const std::size_t n = dimension();
  require(f.size() == n && out.size() == n, "grid function length mismatch");
  std::vector<double> real(f.begin(), f.end());
  std::vector<fftw_complex> spec(impl_->m.size());
  fftw_execute_dft_r2c(impl_->forward, real.data(), spec.data());
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    spec[k][0] *= impl_->m[k] * scale;
    spec[k][1] *= impl_->m[k] * scale;
  }
  fftw_execute_dft_c2r(impl_->backward, spec.data(), real.data());
  for (std::size_t j = 0; j < n; ++j) out[j] = real[j] + impl_->v[j] * f[j];
}

std::vector<double> MultiplierOperator::apply(std::span<const double> f) const {
  std::vector<double> out(dimension());
  apply(f, out);
  return out;
}

Eigen::MatrixXd MultiplierOperator::to_dense() const {
  const std::size_t n = dimension();
  Eigen::MatrixXd a(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    apply(e, col);
    for (std::size_t i = 0; i < n; ++i) a(i, j) = col[i];
    e[j] = 0.0;
  }
  return 0.5 * (a + a.transpose());
}

std::vector<double> lattice_symbol_values(const BoxGrid& grid, const Symbol& symbol) {
  validate(grid);
  std::vector<double> values;
  values.reserve(grid.size());
  if (grid.d == 1) {
    for (int k = 0; k < grid.N; ++k) {
      const double xi[1] = {grid.frequency(k)};
      values.push_back(eval_symbol(symbol, xi));
    }
  } else {
    for (int k1 = 0; k1 < grid.N; ++k1) {
      for (int k2 = 0; k2 < grid.N; ++k2) {
        const double xi[2] = {grid.frequency(k1), grid.frequency(k2)};
        values.push_back(eval_symbol(symbol, xi));
      }
    }
  }
  std::sort(values.begin(), values.end());
  return values;
}

// ---------------------------------------------------------------------------
// Stiffness assembly
// ---------------------------------------------------------------------------

double StiffnessMatrix::cell_volume() const noexcept { return std::pow(grid.h(), grid.d); }

double StiffnessMatrix::quadratic_form(std::span<const double> f) const {
  require(f.size() == dimension(), "grid function length mismatch");
  const Eigen::Map<const Eigen::VectorXd> x(f.data(), static_cast<Eigen::Index>(f.size()));
  return x.dot(A * x) + x.dot(D.cwiseProduct(x));
}

void StiffnessMatrix::apply(std::span<const double> f, std::span<double> out) const {
  require(f.size() == dimension() && out.size() == dimension(), "grid function length mismatch");
  const Eigen::Map<const Eigen::VectorXd> x(f.data(), static_cast<Eigen::Index>(f.size()));
  Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
  y = (A * x + D.cwiseProduct(x)) / cell_volume();
}

Eigen::MatrixXd StiffnessMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd(A);
  m.diagonal() += D;
  return m / cell_volume();
}

void StiffnessMatrix::write_coo(std::ostream& out) const {
  Eigen::SparseMatrix<double> full = A;
  for (Eigen::Index i = 0; i < D.size(); ++i) full.coeffRef(i, i) += D[i];
  full.makeCompressed();
  for (Eigen::Index col = 0; col < full.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(full, col); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

StiffnessMatrix assemble_stiffness(const BoxGrid& grid, const JumpKernel& kernel,
                                   const Potential& potential, const StiffnessOptions& options) {
  validate(grid);
  validate(kernel);
  const double kappa = kernel_range(kernel);
  const double h = grid.h();
  if (!std::isfinite(kappa) || kappa / h > options.bandwidth_cap) {
    fail(ErrorCode::BandwidthExceeded, "kappa / h exceeds the bandwidth cap");
  }
  const int reach = offset_reach(kappa, h);
  if (reach >= grid.N / 2) {
    fail(ErrorCode::BandwidthExceeded, "kernel range reaches half the periodic box");
  }
  const int d = grid.d;
  const int N = grid.N;
  const double volume = std::pow(h, d);

  StiffnessMatrix s;
  s.grid = grid;
  s.bandwidth = reach;
  const std::vector<double> v = sample_potential(grid, potential);
  s.D = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())) * volume;

  const bool constant_order = is_translation_invariant(kernel);
  const bool unit_amplitude = !std::holds_alternative<GeneralKernel>(kernel);

  // 2-D weights come from a table over the order range, interpolated in alpha.
  std::vector<double> alpha_nodes;
  std::vector<std::vector<double>> tables;
  if (d == 2) {
    const auto [lo, hi] = order_range(kernel, grid);
    const int nodes = (hi - lo) < 1e-12 ? 1 : std::max(4, options.order_table_nodes);
    alpha_nodes.resize(nodes);
    tables.resize(nodes);
    parallel_for(static_cast<std::size_t>(nodes), [&](std::size_t k) {
      alpha_nodes[k] = nodes == 1 ? lo : lo + (hi - lo) * double(k) / (nodes - 1);
      tables[k] = weight_table_2d(reach, h, alpha_nodes[k], kappa);
    });
  }
  const int side = 2 * reach + 1;
  auto weight_2d = [&](int m1, int m2, double alpha) {
    const std::size_t idx = static_cast<std::size_t>(m1 + reach) * side + (m2 + reach);
    const int nodes = static_cast<int>(alpha_nodes.size());
    if (nodes == 1) return tables[0][idx];
    const double pos = (alpha - alpha_nodes.front()) / (alpha_nodes[1] - alpha_nodes[0]);
    const int first = std::clamp(static_cast<int>(std::floor(pos)) - 1, 0, nodes - 4);
    double value = 0.0;
    for (int a = 0; a < 4; ++a) {
      double basis = 1.0;
      for (int b = 0; b < 4; ++b) {
        if (b != a) basis *= (pos - (first + b)) / double(a - b);
      }
      value += basis * tables[first + a][idx];
    }
    return value;
  };

  std::vector<double> w1d;
  if (d == 1 && constant_order) {
    const double alpha = std::get<LevyStable>(kernel).alpha;
    w1d.resize(reach + 1);
    for (int m = 1; m <= reach; ++m) w1d[m] = weight_1d(m, h, alpha, kappa);
  }

  const std::size_t rows = grid.size();
  std::vector<std::vector<Triplet>> per_row(rows);
  parallel_for(rows, [&](std::size_t row) {
    auto& out = per_row[row];
    if (d == 1) {
      const int i = static_cast<int>(row);
      const double x[1] = {grid.point(i)};
      for (int m = 1; m <= reach; ++m) {
        const int j = (i + m) % N;
        const double y[1] = {x[0] + m * h};  // unwrapped partner
        double w;
        if (constant_order) {
          w = w1d[m];
        } else {
          w = weight_1d(m, h, kernel_order(kernel, x, y), kappa);
          if (!unit_amplitude) w *= kernel_amplitude(kernel, x, y);
        }
        if (w != 0.0) out.push_back({i, j, 2.0 * w * volume});
      }
    } else {
      const int i1 = static_cast<int>(row) / N, i2 = static_cast<int>(row) % N;
      const double x[2] = {grid.point(i1), grid.point(i2)};
      for (int m1 = 0; m1 <= reach; ++m1) {
        for (int m2 = -reach; m2 <= reach; ++m2) {
          if (m1 == 0 && m2 <= 0) continue;  // half-set of offsets
          const double y[2] = {x[0] + m1 * h, x[1] + m2 * h};
          double w;
          if (constant_order) {
            w = weight_2d(m1, m2, alpha_nodes[0]);
          } else {
            w = weight_2d(m1, m2, kernel_order(kernel, x, y));
            if (!unit_amplitude) w *= kernel_amplitude(kernel, x, y);
          }
          if (w == 0.0) continue;
          const int j = ((i1 + m1) % N) * N + ((i2 + m2 + N) % N);
          out.push_back({static_cast<int>(row), j, 2.0 * w * volume});
        }
      }
    }
  });

  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& list : per_row) {
    for (const auto& t : list) {
      triplets.emplace_back(t.i, t.i, t.w);
      triplets.emplace_back(t.j, t.j, t.w);
      triplets.emplace_back(t.i, t.j, -t.w);
      triplets.emplace_back(t.j, t.i, -t.w);
    }
  }
  s.A.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
  s.A.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

double truncation_shift_bound(const JumpKernel& kernel, int d, double kappa_prime) {
  require(kappa_prime > 0.0, "truncation radius must be positive");
  if (std::isinf(kappa_prime)) return 0.0;
  return 4.0 * tail_mass(kernel, d, kappa_prime);
}

}  // namespace nlspec
