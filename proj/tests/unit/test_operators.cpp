#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nlspec/error.hpp"
#include "nlspec/operators.hpp"

using namespace nlspec;

namespace {

// Independent scan of sup_r (r x - f(r)) on a dense grid, refined by golden search.
double scan_conjugate_1d(const std::function<double(double)>& f, double x, double r_max) {
  constexpr int kGrid = 20001;
  double best_r = 0.0, best = -1e300;
  for (int i = 0; i < kGrid; ++i) {
    const double r = -r_max + 2.0 * r_max * i / (kGrid - 1);
    const double v = r * x - f(r);
    if (v > best) {
      best = v;
      best_r = r;
    }
  }
  double a = best_r - 2.0 * r_max / (kGrid - 1), b = best_r + 2.0 * r_max / (kGrid - 1);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (c * x - f(c) > d * x - f(d)) b = d; else a = c;
  }
  const double r = 0.5 * (a + b);
  return std::max(best, r * x - f(r));
}

}  // namespace

TEST_CASE("symbol evaluation") {
  const Symbol iso = IsotropicStable{1.0};
  const double zero[1] = {0.0};
  const double two[1] = {2.0};
  CHECK(eval_symbol(iso, zero) == 0.0);
  CHECK(eval_symbol(iso, two) == doctest::Approx(2.0).epsilon(1e-15));

  AnisotropicSum an;
  an.terms.push_back({1.0, {1.0, 1.0}, 1.0});
  an.terms.push_back({1.0, {1.0, 1.0}, 1.0});
  const double one_one[2] = {1.0, 1.0};
  CHECK(eval_symbol(an, one_one) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK_NOTHROW(validate(Symbol{an}, 2));
}

TEST_CASE("symbol is even and vanishes at the origin") {
  AnisotropicSum an;
  an.terms.push_back({0.7, {1.5, 0.8}, 1.1});
  an.terms.push_back({2.0, {0.9, 1.7}, 0.6});
  const std::vector<Symbol> symbols{IsotropicStable{0.7}, IsotropicStable{1.9, 3.0}, an};
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (const auto& s : symbols) {
    const double o[2] = {0.0, 0.0};
    CHECK(eval_symbol(s, o) == 0.0);
    for (int i = 0; i < 50; ++i) {
      const double a[2] = {g(rng), g(rng)};
      const double b[2] = {-a[0], -a[1]};
      CHECK(eval_symbol(s, a) == eval_symbol(s, b));
      CHECK(eval_symbol(s, a) >= 0.0);
    }
  }
}

TEST_CASE("symbol validation rejects out-of-range exponents") {
  CHECK_THROWS_AS(validate(Symbol{IsotropicStable{2.0}}, 1), Error);
  AnisotropicSum an;
  an.terms.push_back({1.0, {1.5, 1.0}, 1.5});
  CHECK_THROWS_AS(validate(Symbol{an}, 2), Error);
  an.terms[0].outer = 1.0;
  CHECK_THROWS_AS(validate(Symbol{an}, 1), Error);
}

TEST_CASE("ray exponents lie within the sandwich exponents") {
  AnisotropicSum an;
  an.terms.push_back({1.0, {1.2, 0.6}, 1.0});
  an.terms.push_back({0.5, {0.4, 0.8}, 1.5});
  const Symbol s = an;
  const auto e = sandwich_exponents(s);
  CHECK(e.lower == doctest::Approx(0.6));
  CHECK(e.upper == doctest::Approx(1.2));
  for (double angle : {0.0, 0.3, 0.9, 1.4, 1.5707963267948966, 2.5}) {
    const double w[2] = {std::cos(angle), std::sin(angle)};
    const double slope = ray_exponent(s, w);
    CHECK(slope >= e.lower - 1e-3);
    CHECK(slope <= e.upper + 1e-3);
  }
}

TEST_CASE("legendre transform of a stable power") {
  const Symbol s = IsotropicStable{1.5};
  const double one[1] = {1.0};
  CHECK(legendre(s, one) == doctest::Approx(4.0 / 27.0).epsilon(1e-9));
  const double zero[1] = {0.0};
  CHECK(legendre(s, zero) == doctest::Approx(0.0));
}

TEST_CASE("legendre transform of a norm is the unit-ball indicator") {
  const Symbol s = IsotropicStable{1.0};
  const double half[1] = {0.5};
  const double two[1] = {2.0};
  CHECK(legendre(s, half) == doctest::Approx(0.0));
  CHECK(std::isinf(legendre(s, two)));
  const double in2[2] = {0.3, -0.4};
  const double out2[2] = {1.2, 0.9};
  CHECK(legendre(s, in2) == doctest::Approx(0.0));
  CHECK(std::isinf(legendre(s, out2)));
}

TEST_CASE("legendre transform agrees with a dense scan") {
  const auto f = [](double r) { return std::pow(std::abs(r), 1.3) + 0.2 * r * r; };
  const ConvexFunction cf = [&](std::span<const double> v) { return f(v[0]); };
  for (double x : {-2.0, -0.4, 0.7, 1.9}) {
    const double p[1] = {x};
    CHECK(legendre(cf, 1, p) == doctest::Approx(scan_conjugate_1d(f, x, 20.0)).epsilon(1e-8));
  }
}

TEST_CASE("double legendre transform recovers the symbol") {
  const Symbol s = IsotropicStable{1.5};
  const ConvexFunction conjugate = [&](std::span<const double> x) { return legendre(s, x); };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 20; ++i) {
    const double xi[1] = {u(rng)};
    const double back = legendre(conjugate, 1, xi);
    CHECK(back == doctest::Approx(eval_symbol(s, xi)).epsilon(1e-6));
  }
}

TEST_CASE("legendre transform is convex along rays and vanishes at zero") {
  AnisotropicSum an;
  an.terms.push_back({1.0, {1.5, 1.5}, 1.0});
  an.terms.push_back({0.5, {1.2, 1.6}, 1.1});
  const Symbol s = an;
  const double o[2] = {0.0, 0.0};
  CHECK(legendre(s, o) == doctest::Approx(0.0).scale(1.0));
  const double w[2] = {0.6, 0.8};
  std::vector<double> values;
  for (int i = 0; i <= 8; ++i) {
    const double p[2] = {0.25 * i * w[0], 0.25 * i * w[1]};
    values.push_back(legendre(s, p));
  }
  for (std::size_t i = 1; i + 1 < values.size(); ++i) {
    CHECK(values[i] <= 0.5 * (values[i - 1] + values[i + 1]) + 1e-7);
  }
}

TEST_CASE("non-convex functions are rejected") {
  const ConvexFunction f = [](std::span<const double> v) { return std::sqrt(std::abs(v[0])); };
  const double x[1] = {0.1};
  CHECK_THROWS_AS(legendre(f, 1, x), Error);
  try {
    legendre(f, 1, x);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonConvexSymbol);
  }
}

TEST_CASE("kernel evaluation") {
  const double x0[1] = {0.0}, x2[1] = {2.0}, x15[1] = {1.5}, x1[1] = {1.0};
  CHECK(eval_kernel(LevyStable{1.0}, x0, x2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(eval_kernel(LevyStable{1.0, 1.0}, x0, x15) == 0.0);
  CHECK(eval_kernel(VariableOrder{0.5, 1.0, std::exp(1.0)}, x0, x1) == doctest::Approx(1.0));
  try {
    eval_kernel(LevyStable{1.0}, x1, x1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CoincidentPoints);
  }
}

TEST_CASE("kernels are symmetric") {
  GeneralKernel gk;
  gk.order = [](std::span<const double> x, std::span<const double> y) {
    return 0.8 + 0.3 / (1.0 + x[0] * x[0] + y[0] * y[0]);
  };
  gk.amplitude = [](std::span<const double> x, std::span<const double> y) {
    return 1.0 + 0.5 * std::cos(x[0] + y[0]);
  };
  gk.epsilon = 0.5;
  gk.alpha_lower = 0.8;
  gk.alpha_upper = 1.1;
  gk.kappa = 3.0;
  const std::vector<JumpKernel> kernels{LevyStable{1.3}, LevyStable{0.7, 2.0},
                                        VariableOrder{0.6, 0.4, 2.0, 5.0}, gk};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 2.0);
  for (const auto& k : kernels) {
    CHECK_NOTHROW(validate(k));
    for (int i = 0; i < 40; ++i) {
      const double x[1] = {g(rng)}, y[1] = {g(rng)};
      CHECK(eval_kernel(k, x, y) == eval_kernel(k, y, x));
    }
  }
}

TEST_CASE("variable-order validation") {
  CHECK_THROWS_AS(validate(JumpKernel{VariableOrder{1.5, 1.0, std::exp(1.0)}}), Error);
  CHECK_NOTHROW(validate(JumpKernel{VariableOrder{1.0, 0.5, std::exp(1.0)}}));
}

TEST_CASE("tail mass") {
  CHECK(tail_mass(LevyStable{1.0}, 1, 1.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(tail_mass(LevyStable{1.0, 2.0}, 1, 2.0) == 0.0);
  CHECK(tail_mass(LevyStable{1.0, 2.0}, 1, 3.0) == 0.0);
  CHECK(tail_mass(LevyStable{0.5}, 1, 1.0) == doctest::Approx(4.0).epsilon(1e-14));
  // Truncated: 2 * int_1^8 z^-2 dz.
  CHECK(tail_mass(LevyStable{1.0, 8.0}, 1, 1.0) == doctest::Approx(2.0 * (1.0 - 1.0 / 8.0)));
  // 2-D: 2 pi int_r^inf rho^{-1-alpha}.
  CHECK(tail_mass(LevyStable{1.0}, 2, 0.5) == doctest::Approx(2.0 * M_PI * 2.0));
}

TEST_CASE("variable-order tail mass matches direct quadrature of the envelope") {
  const VariableOrder k{1.0, 0.5, std::exp(1.0), 4.0};
  // Midpoint sum of 2 sup_x J over (0.1, 4) in log coordinates.
  const int n = 400000;
  const double a = std::log(0.1), b = std::log(4.0);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = a + (b - a) * (i + 0.5) / n;
    const double rho = std::exp(u);
    const double order = rho < 1.0 ? 1.0 + 0.5 / std::sqrt(std::log(std::exp(1.0) + rho)) : 1.0;
    sum += 2.0 * std::pow(rho, -1.0 - order) * rho * (b - a) / n;
  }
  CHECK(tail_mass(k, 1, 0.1) == doctest::Approx(sum).epsilon(1e-6));
}

TEST_CASE("tail mass of a kernel with no far decay diverges") {
  GeneralKernel gk;
  gk.order = [](auto, auto) { return 0.5; };
  gk.amplitude = [](auto, auto) { return 1.0; };
  gk.alpha_lower = 0.0;
  gk.alpha_upper = 0.5;
  try {
    tail_mass(gk, 1, 1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivergentTail);
  }
}

TEST_CASE("equivalent symbol constant") {
  CHECK(fractional_laplacian_constant(1, 1.0) == doctest::Approx(1.0 / M_PI));
  const auto s = std::get<IsotropicStable>(equivalent_symbol(LevyStable{1.0}, 1));
  CHECK(s.coefficient == doctest::Approx(2.0 * M_PI));
  // Oracle: 2 int (1 - cos z) |z|^{-2} dz over R equals 2 pi for xi = 1.
  double sum = 0.0;
  const int n = 2000000;
  const double zmax = 2000.0;
  for (int i = 0; i < n; ++i) {
    const double z = (i + 0.5) * zmax / n;
    sum += 2.0 * (1.0 - std::cos(z)) / (z * z) * zmax / n;
  }
  sum += 2.0 / zmax;  // tail of the non-oscillating part
  CHECK(2.0 * sum == doctest::Approx(2.0 * M_PI).epsilon(1e-3));
}

TEST_CASE("growth function and its inverse") {
  const Potential v = PowerPotential{1.0, 2.0};
  CHECK(growth_phi(v, 3.0) == doctest::Approx(9.0));
  CHECK(growth_phi_inverse(v, 4.0) == doctest::Approx(2.0));
  CHECK(growth_phi_inverse(v, 0.0) == 0.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 50.0);
  for (int i = 0; i < 50; ++i) {
    const double r = u(rng);
    CHECK(std::abs(growth_phi_inverse(v, growth_phi(v, r)) - r) <= 1e-12 * r);
  }
}

TEST_CASE("two-sided potential growth") {
  const TwoSidedPower t{1.0, 1.0, 1.0, 2.0, 1.0};
  const Potential v = t;
  CHECK_NOTHROW(validate(v));
  // Envelope property and the infimum definition checked on a scan.
  for (double r = 0.0; r < 60.0; r += 0.37) {
    const double value = eval_potential(v, r);
    CHECK(value >= t.c3 * std::pow(r, t.theta1) - 1e-12);
    if (r >= t.crossover) CHECK(value <= t.c4 * std::pow(r, t.theta2) + 1e-9);
  }
  for (double big_r : {0.5, 2.0, 7.0, 30.0}) {
    double scan = 1e300;
    for (double r = big_r; r < 40.0 * big_r + 100.0; r += 1e-3 * (1.0 + big_r)) {
      scan = std::min(scan, eval_potential(v, r));
    }
    CHECK(growth_phi(v, big_r) <= scan + 1e-9);
    CHECK(growth_phi(v, big_r) >= scan - 1e-4 * scan);
  }
  double previous = 0.0;
  for (double level = 0.0; level < 200.0; level += 3.1) {
    const double r = growth_phi_inverse(v, level);
    CHECK(r >= previous);
    CHECK(growth_phi(v, r) >= level * (1.0 - 1e-12));
    previous = r;
  }
}

TEST_CASE("reference function checks") {
  const auto good = check_reference_function(SimplePower{2.0}, 1);
  CHECK(good.pass());
  // int_0^inf (1+s^2)^{-4} ds = 5 pi / 32.
  CHECK(good.l2_integral == doctest::Approx(5.0 * M_PI / 32.0).epsilon(1e-6));
  CHECK(std::isfinite(good.constant));

  const auto critical = check_reference_function(SimplePower{0.25}, 1);
  CHECK_FALSE(critical.square_integrable);
  CHECK_FALSE(critical.pass());

  const auto flat = check_reference_function(SimplePower{0.0}, 1);
  CHECK_FALSE(flat.square_integrable);

  const auto corrected = check_reference_function(LogCorrected{0, 2.0}, 1);
  CHECK(corrected.pass());
  const auto deeper = check_reference_function(LogCorrected{1, 1.5}, 2);
  CHECK(deeper.square_integrable);
  CHECK(deeper.doubling_bounded);
}
