#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "nlspec/discretize.hpp"
#include "nlspec/error.hpp"

using namespace nlspec;

namespace {

double sine_integral(double x) {
  if (x == 0.0) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double t) { return t == 0.0 ? 1.0 : std::sin(t) / t; }, 0.0, x, 25, 1e-14);
}

// Exact symbol of the truncated kernel |z|^{-2} 1{|z| <= kappa} in d = 1 under
// the no-1/2 form: 2 int_{|z|<=kappa} (1 - cos z xi) |z|^{-2} dz.
double truncated_symbol_1d(double xi, double kappa) {
  const double a = std::abs(xi);
  if (a == 0.0) return 0.0;
  return 4.0 * (a * sine_integral(a * kappa) - (1.0 - std::cos(a * kappa)) / kappa);
}

// Same in d = 2 for alpha = 1: 2 int_0^kappa rho^{-2} 2 pi (1 - J0(rho |xi|)) drho.
double truncated_symbol_2d(double xi, double kappa) {
  if (xi == 0.0) return 0.0;
  return 4.0 * std::numbers::pi *
         boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
             [&](double r) {
               if (r * xi < 1e-4) return 0.25 * xi * xi;
               return (1.0 - boost::math::cyl_bessel_j(0, r * xi)) / (r * r);
             },
             0.0, kappa, 15, 1e-11);
}

std::vector<double> gaussian_1d(const BoxGrid& g) {
  std::vector<double> f(g.size());
  for (int j = 0; j < g.N; ++j) f[j] = std::exp(-g.point(j) * g.point(j));
  return f;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("grid geometry") {
  const BoxGrid g{1, 40.0, 8192};
  CHECK(g.h() == doctest::Approx(80.0 / 8192));
  CHECK(g.point(0) == -40.0);
  CHECK(g.frequency(1) == doctest::Approx(std::numbers::pi / 40.0));
  CHECK(g.frequency(8191) == doctest::Approx(-std::numbers::pi / 40.0));
  CHECK(g.frequency(4096) == doctest::Approx(-4096 * std::numbers::pi / 40.0));
  CHECK_THROWS_AS(validate(BoxGrid{1, 1.0, 7}), Error);
  try {
    validate(BoxGrid{3, 1.0, 8});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedDimension);
  }
}

TEST_CASE("multiplier annihilates constants and diagonalizes plane waves") {
  const BoxGrid g{1, 5.0, 64};
  const Symbol s = IsotropicStable{1.3};
  std::vector<double> m(g.N / 2 + 1);
  for (int k = 0; k <= g.N / 2; ++k) {
    const double xi[1] = {g.frequency(k)};
    m[k] = eval_symbol(s, xi);
  }
  const MultiplierOperator op(g, m, std::vector<double>(g.size(), 0.0));
  const auto zero = op.apply(std::vector<double>(g.size(), 1.0));
  for (double v : zero) CHECK(std::abs(v) < 1e-12);
  for (int k : {1, 5, 31}) {
    std::vector<double> f(g.size());
    for (int j = 0; j < g.N; ++j) f[j] = std::cos(g.frequency(k) * g.point(j) + 0.3);
    const auto out = op.apply(f);
    const double xi[1] = {g.frequency(k)};
    for (int j = 0; j < g.N; ++j) CHECK(out[j] == doctest::Approx(eval_symbol(s, xi) * f[j]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("multiplier operator is symmetric") {
  AnisotropicSum an;
  an.terms.push_back({1.0, {1.5, 0.7}, 1.0});
  for (const BoxGrid g : {BoxGrid{1, 7.0, 128}, BoxGrid{2, 4.0, 16}}) {
    const Symbol s = g.d == 1 ? Symbol{IsotropicStable{0.8}} : Symbol{an};
    const MultiplierOperator op(g, s, PowerPotential{1.0, 2.0});
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> f(g.size()), h(g.size());
      for (auto& v : f) v = n(rng);
      for (auto& v : h) v = n(rng);
      const double a = dot(op.apply(f), h), b = dot(f, op.apply(h));
      CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("multiplier eigenvalues are the lattice symbol values") {
  AnisotropicSum an;
  an.terms.push_back({1.0, {1.2, 0.9}, 1.0});
  an.terms.push_back({0.5, {0.6, 1.4}, 1.2});
  for (const BoxGrid g : {BoxGrid{1, 3.0, 32}, BoxGrid{2, 2.0, 8}}) {
    const Symbol s = g.d == 1 ? Symbol{IsotropicStable{1.7}} : Symbol{an};
    std::vector<double> m;
    {
      const MultiplierOperator tmp(g, s, PowerPotential{1.0, 2.0});
      m = tmp.multiplier();
    }
    const MultiplierOperator op(g, m, std::vector<double>(g.size(), 0.0));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.to_dense(), Eigen::EigenvaluesOnly);
    const auto expected = lattice_symbol_values(g, s);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(es.eigenvalues()[static_cast<Eigen::Index>(i)] ==
            doctest::Approx(expected[i]).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("multiplier samples scale homogeneously") {
  const BoxGrid g{1, 10.0, 64};
  const double alpha = 1.3;
  const MultiplierOperator op(g, IsotropicStable{alpha}, PowerPotential{1.0, 2.0});
  const auto& m = op.multiplier();
  for (int k = 1; 2 * k <= g.N / 2; ++k) {
    CHECK(m[2 * k] == doctest::Approx(std::pow(2.0, alpha) * m[k]).epsilon(1e-12));
  }
}

TEST_CASE("stiffness form of a constant vector is the potential term") {
  for (const BoxGrid g : {BoxGrid{1, 8.0, 128}, BoxGrid{2, 4.0, 16}}) {
    const auto s = assemble_stiffness(g, LevyStable{1.0, 2.0}, PowerPotential{1.0, 2.0});
    const std::vector<double> ones(g.size(), 1.0);
    CHECK(s.quadratic_form(ones) == doctest::Approx(s.D.sum()).epsilon(1e-12));
    Eigen::VectorXd row_sums = s.A * Eigen::VectorXd::Ones(s.A.rows());
    CHECK(row_sums.cwiseAbs().maxCoeff() < 1e-9 * s.A.diagonal().maxCoeff());
    const Eigen::SparseMatrix<double> diff = s.A - Eigen::SparseMatrix<double>(s.A.transpose());
    CHECK(diff.norm() == 0.0);
  }
}

TEST_CASE("stiffness operator is positive semidefinite") {
  const BoxGrid g{1, 8.0, 128};
  const auto s = assemble_stiffness(g, LevyStable{1.0, 2.0}, PowerPotential{1.0, 2.0});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.to_dense(), Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues()[0] > 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> free_part(Eigen::MatrixXd(s.A),
                                                           Eigen::EigenvaluesOnly);
  CHECK(free_part.eigenvalues()[0] >= -1e-10 * free_part.eigenvalues().maxCoeff());
}

TEST_CASE("variable-order stiffness is symmetric and semidefinite") {
  const BoxGrid g{1, 6.0, 96};
  const auto s = assemble_stiffness(g, VariableOrder{1.0, 0.5, std::exp(1.0), 1.5},
                                    PowerPotential{1.0, 2.0});
  const Eigen::SparseMatrix<double> diff = s.A - Eigen::SparseMatrix<double>(s.A.transpose());
  CHECK(diff.norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(s.A), Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues()[0] >= -1e-10 * es.eigenvalues().maxCoeff());

  const BoxGrid g2{2, 3.0, 16};
  const auto s2 = assemble_stiffness(g2, VariableOrder{1.0, 0.5, std::exp(1.0), 1.0},
                                     PowerPotential{1.0, 2.0});
  const Eigen::SparseMatrix<double> diff2 = s2.A - Eigen::SparseMatrix<double>(s2.A.transpose());
  CHECK(diff2.norm() == 0.0);
}

TEST_CASE("stiffness form matches the truncated-kernel symbol") {
  const BoxGrid g{1, 8.0, 512};
  const double kappa = 2.0;
  const auto s = assemble_stiffness(g, LevyStable{1.0, kappa}, PowerPotential{1.0, 2.0});
  std::vector<double> m(g.N / 2 + 1);
  for (int k = 0; k <= g.N / 2; ++k) m[k] = truncated_symbol_1d(g.frequency(k), kappa);
  std::vector<double> v(g.size());
  for (int j = 0; j < g.N; ++j) v[j] = g.point(j) * g.point(j);
  const MultiplierOperator op(g, m, v);
  const auto f = gaussian_1d(g);
  const double fourier = dot(f, op.apply(f)) * g.h();
  CHECK(s.quadratic_form(f) == doctest::Approx(fourier).epsilon(2e-4));
}

TEST_CASE("stiffness form matches the full-range form within the truncation allowance") {
  const BoxGrid g{1, 8.0, 256};
  const double kappa = 2.0;
  const auto s = assemble_stiffness(g, LevyStable{1.0, kappa}, PowerPotential{1.0, 2.0});
  const MultiplierOperator full(g, equivalent_symbol(LevyStable{1.0}, 1), PowerPotential{1.0, 2.0});
  const auto f = gaussian_1d(g);
  const double norm2 = dot(f, f) * g.h();
  const double fourier = dot(f, full.apply(f)) * g.h();
  const double stiff = s.quadratic_form(f);
  CHECK(std::abs(fourier - stiff) <=
        truncation_shift_bound(LevyStable{1.0}, 1, kappa) * norm2 + 0.02 * fourier);
}

TEST_CASE("two-dimensional stiffness matches the truncated-kernel symbol") {
  const BoxGrid g{2, 5.0, 64};
  const double kappa = 1.5;
  const auto s = assemble_stiffness(g, LevyStable{1.0, kappa}, PowerPotential{1.0, 2.0});
  const int half = g.N / 2 + 1;
  std::vector<double> m(static_cast<std::size_t>(g.N) * half);
  std::map<int, double> by_radius;
  for (int k1 = 0; k1 < g.N; ++k1) {
    for (int k2 = 0; k2 < half; ++k2) {
      const int s1 = k1 < g.N / 2 ? k1 : k1 - g.N, s2 = k2 < g.N / 2 ? k2 : k2 - g.N;
      const int key = s1 * s1 + s2 * s2;
      auto it = by_radius.find(key);
      if (it == by_radius.end()) {
        it = by_radius.emplace(key, truncated_symbol_2d(std::hypot(g.frequency(k1), g.frequency(k2)),
                                                        kappa)).first;
      }
      m[static_cast<std::size_t>(k1) * half + k2] = it->second;
    }
  }
  std::vector<double> v(g.size()), f(g.size());
  for (int a = 0; a < g.N; ++a) {
    for (int b = 0; b < g.N; ++b) {
      const double r2 = g.point(a) * g.point(a) + g.point(b) * g.point(b);
      v[static_cast<std::size_t>(a) * g.N + b] = r2;
      f[static_cast<std::size_t>(a) * g.N + b] = std::exp(-r2);
    }
  }
  const MultiplierOperator op(g, m, v);
  const double fourier = dot(f, op.apply(f)) * g.h() * g.h();
  CHECK(s.quadratic_form(f) == doctest::Approx(fourier).epsilon(2e-3));
}

TEST_CASE("stiffness errors") {
  try {
    assemble_stiffness(BoxGrid{1, 4.0, 32}, LevyStable{1.0}, PowerPotential{1.0, 2.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BandwidthExceeded);
  }
  try {
    assemble_stiffness(BoxGrid{1, 4.0, 32}, LevyStable{1.0, 4.5}, PowerPotential{1.0, 2.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BandwidthExceeded);
  }
  StiffnessOptions narrow;
  narrow.bandwidth_cap = 2.0;
  CHECK_THROWS_AS(assemble_stiffness(BoxGrid{1, 4.0, 64}, LevyStable{1.0, 1.0},
                                     PowerPotential{1.0, 2.0}, narrow),
                  Error);
}

TEST_CASE("coordinate export lists the full operator") {
  const auto s = assemble_stiffness(BoxGrid{1, 2.0, 8}, LevyStable{1.0, 0.6},
                                    PowerPotential{1.0, 2.0});
  std::ostringstream out;
  s.write_coo(out);
  std::istringstream in(out.str());
  int r, c;
  double v;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(8, 8);
  while (in >> r >> c >> v) m(r, c) = v;
  CHECK((m - s.to_dense() * s.cell_volume()).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("truncation shift bound") {
  CHECK(truncation_shift_bound(LevyStable{1.0}, 1, 1.0) == doctest::Approx(8.0));
  CHECK(truncation_shift_bound(LevyStable{1.0}, 1, kInfinity) == 0.0);
  CHECK(truncation_shift_bound(LevyStable{1.0}, 1, 1e12) < 1e-11);
}
