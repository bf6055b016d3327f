// One line per acceptance criterion; exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlspec/asymptotics.hpp"
#include "nlspec/discretize.hpp"
#include "nlspec/eigensolve.hpp"
#include "nlspec/rates.hpp"
#include "nlspec/ritz.hpp"

using namespace nlspec;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Run {
  BoxGrid grid;
  Symbol symbol;
  Potential potential;
  int k;
  int block;
  FitWindow window;
  double target;
  double tolerance;
  double budget_seconds;
};

// The three exponent-recovery configurations.
const std::map<int, Run> kRuns{
    {1, {{1, 40.0, 8192}, IsotropicStable{1.0}, PowerPotential{1.0, 2.0}, 200, 1, {30, 200}, 2.0 / 3.0, 0.05, 300.0}},
    {2, {{1, 10.0, 2048}, IsotropicStable{1.5}, PowerPotential{1.0, 4.0}, 150, 1, {30, 150}, 12.0 / 11.0, 0.07, 1e9}},
    {3, {{2, 12.0, 256}, IsotropicStable{1.0}, PowerPotential{1.0, 2.0}, 60, 2, {15, 60}, 1.0 / 3.0, 0.08, 1200.0}},
};

struct Solved {
  Spectrum spectrum;
  double seconds = 0.0;
};

std::map<int, Solved> solved;

const Solved& spectrum_of(int config) {
  if (auto it = solved.find(config); it != solved.end()) return it->second;
  const Run& r = kRuns.at(config);
  const auto t0 = Clock::now();
  const MultiplierOperator op(r.grid, r.symbol, r.potential);
  Solved s;
  s.spectrum = lanczos_lowest([&](auto x, auto y) { op.apply(x, y); }, op.dimension(),
                              {.k = r.k, .tol = 1e-9, .seed = 1, .block_size = r.block});
  require_converged(s.spectrum);
  s.seconds = seconds_since(t0);
  return solved[config] = std::move(s);
}

struct Line {
  bool pass;
  std::string detail;
};

char buffer[1024];

template <class... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buffer, sizeof buffer, f, a...);
  return buffer;
}

Line exponent_recovery(int config) {
  const Run& r = kRuns.at(config);
  const auto& s = spectrum_of(config);
  const auto fit = fit_exponent(s.spectrum, r.window);
  const bool ok = std::abs(fit.slope - r.target) <= r.tolerance && s.seconds <= r.budget_seconds;
  std::string detail = fmt("slope %.4f, target %.4f +- %.2f on n in [%zu, %zu], solve %.1f s", fit.slope,
                           r.target, r.tolerance, r.window.first, r.window.last, s.seconds);
  if (r.budget_seconds < 1e9) detail += fmt(" (budget %.0f s)", r.budget_seconds);
  return {ok, detail};
}

Line trace_ordering() {
  std::string detail;
  bool ok = true;
  for (int config : {1, 2, 3}) {
    const Run& r = kRuns.at(config);
    const std::vector<BoundCurve> curve{make_heat_trace_curve(r.symbol, r.potential, r.grid.d)};
    const auto& s = spectrum_of(config).spectrum;
    const auto report = compare_bounds(s, curve);
    // Tightness, so a vanishing curve cannot pass unnoticed.
    double ratio = 0.0;
    for (std::size_t n = 1; n <= s.size(); ++n) ratio = std::max(ratio, curve[0](static_cast<double>(n)) / s(n));
    ok = ok && report.empty() && report.checked == static_cast<std::size_t>(r.k) && ratio > 0.0;
    detail += fmt("%sconfig %d: %zu violations in %zu, max curve/lambda %.3f", detail.empty() ? "" : "; ",
                  config, report.violations.size(), report.checked, ratio);
  }
  return {ok, detail};
}

Line ritz() {
  const double theta = 2.0, alpha = 1.0;
  const RitzProblem problem = SymbolProblem{IsotropicStable{alpha}, PowerPotential{1.0, theta}};
  const std::vector<int> sizes{4, 8, 16, 32};
  std::vector<double> ns, tops, finest;
  for (int n : sizes) {
    const auto basis = build_basis(n, 1, theta, alpha);
    const auto mu = ritz_values(form_matrix(basis, problem), basis.norms);
    ns.push_back(n);
    tops.push_back(mu.back());
    finest = mu;
  }
  const auto& reference = spectrum_of(1).spectrum;
  double worst = kInfinity;
  for (std::size_t j = 1; j <= 10; ++j) worst = std::min(worst, finest[j - 1] / reference(j));
  const double slope = loglog_slope(ns, tops);
  const double target = theta * alpha / (theta + alpha);
  const bool ok = worst >= 1.0 - 1e-2 && std::abs(slope - target) <= 0.10;
  return {ok, fmt("min_j<=10 mu_j / lambda_j = %.3f (>= 0.99); slope %.4f, target %.4f +- 0.10",
                  worst, slope, target)};
}

Line oracles() {
  std::string detail;
  bool ok = true;

  // Dense against Lanczos at dimension 1024.
  {
    const MultiplierOperator op(BoxGrid{1, 20.0, 1024}, IsotropicStable{1.0}, PowerPotential{1.0, 2.0});
    const auto dense = dense_lowest(op.to_dense(), 10);
    const auto krylov = lanczos_lowest([&](auto x, auto y) { op.apply(x, y); }, op.dimension(),
                                       {.k = 10, .tol = 1e-11});
    double diff = 0.0;
    for (int j = 0; j < 10; ++j) diff = std::max(diff, std::abs(dense.eigenvalues[j] - krylov.eigenvalues[j]));
    ok = ok && krylov.converged && diff <= 1e-8;
    detail += fmt("dense vs lanczos %.1e (<= 1e-8)", diff);
  }

  // I_k against adaptive quadrature of the tent products.
  {
    double worst = 0.0;
    for (int d : {1, 2}) {
      const auto b = build_basis(d == 1 ? 16 : 6, d, 2.0, 1.0);
      for (std::size_t f = 0; f < b.size(); ++f) {
        double q = 1.0;
        for (int k : b.index(f)) {
          const Tent t = b.tent(k);
          auto sq = [&](double s) { return t(s) * t(s); };
          q *= boost::math::quadrature::gauss_kronrod<double, 61>::integrate(sq, t.left, t.center(), 15, 1e-15) +
               boost::math::quadrature::gauss_kronrod<double, 61>::integrate(sq, t.center(), t.right, 15, 1e-15);
        }
        worst = std::max(worst, std::abs(b.norms[f] - q) / q);
      }
    }
    ok = ok && worst <= 1e-12;
    detail += fmt("; I_k %.1e (<= 1e-12)", worst);
  }

  // Full-range frequency route against truncated double quadrature plus the
  // exact far-field loss 2 |u|^2 tail_mass (the support is shorter than kappa).
  {
    const double kappa = 8.0;
    const auto b = build_basis(4, 1, 2.0, 1.0);
    const Tent u = b.tent(2);
    const LevyStable full{1.0, kInfinity};
    const double fourier = fourier_pair_form(equivalent_symbol(full, 1), u, u);
    GeneralKernel truncated;
    truncated.order = [](auto, auto) { return 1.0; };
    truncated.amplitude = [](auto, auto) { return 1.0; };
    truncated.alpha_lower = truncated.alpha_upper = 1.0;
    truncated.kappa = kappa;
    const double quadrature = kernel_pair_form(truncated, {u}, {u});
    const double allowance = 2.0 * u.square_integral() * tail_mass(full, 1, kappa);
    const double rel = std::abs(fourier - allowance - quadrature) / std::abs(quadrature);
    ok = ok && rel <= 1e-4;
    detail += fmt("; fourier vs quadrature %.1e (<= 1e-4)", rel);
  }

  // lambda integral of r^{-q} is t^{-q} / q.
  {
    double worst = 0.0;
    for (double q : {0.25, 0.5, 1.0})
      for (double t : {1.0, 10.0, 100.0}) {
        const double v = lambda_integral([q](double r) { return std::pow(r, -q); }, t);
        const double exact = std::pow(t, -q) / q;
        worst = std::max(worst, std::abs(v - exact) / exact);
      }
    ok = ok && worst <= 1e-6;
    detail += fmt("; lambda integral %.1e (<= 1e-6)", worst);
  }
  return {ok, detail};
}

Line rates() {
  const PowerPotential v{1.0, 2.0};
  const double target = weyl_exponent(1, 2.0, 1.0);
  std::vector<double> t;
  for (int i = 0; i <= 24; ++i) t.push_back(std::pow(10.0, 2.0 + i / 6.0));
  auto bound_slope = [&](const RateProfile& p) {
    std::vector<double> b;
    for (double n : t) b.push_back(rate_lower_bound(p, 1.0, 1.0, n));
    return fit_power_law(t, b).slope;
  };
  auto lambda_slope = [&](const RateProfile& p) {
    std::vector<double> l;
    for (double x : t) l.push_back(lambda_integral(p, x));
    return fit_power_law(t, l).slope;
  };
  const VariableOrder order{1.0, 0.5, std::exp(1.0)};
  const ReferenceFunction simple = SimplePower{1.05 * 1 / 4.0};
  const auto constant = constant_order_profile(1, 1.0, v, simple, 1.0);
  const auto variable = variable_order_profile(1, order, v, simple, 1.0);
  const double exponent = bound_slope(constant);
  const double deviation = lambda_slope(constant) - lambda_slope(variable);

  // Same sign test with the reference function of the log-corrected example.
  const ReferenceFunction logged = LogCorrected{0, 4.0};
  const double logged_deviation = lambda_slope(constant_order_profile(1, 1.0, v, logged, 1.0)) -
                                  lambda_slope(variable_order_profile(1, order, v, logged, 1.0));
  const bool ok = std::abs(exponent - target) <= 0.02 && deviation > 0.0 && logged_deviation > 0.0;
  return {ok, fmt("bound exponent %.4f, target %.4f +- 0.02 on n in [1e2, 1e6]; variable-order "
                  "lambda(t) slope deviation %+.4f (> 0), %+.4f with the log-corrected reference",
                  exponent, target, deviation, logged_deviation)};
}

Line truncation() {
  const double kappa = 8.0;
  const BoxGrid grid{1, 40.0, 2048};
  const Potential v = PowerPotential{1.0, 2.0};
  const LevyStable full{1.0, kInfinity}, cut{1.0, kappa};
  const MultiplierOperator op(grid, equivalent_symbol(full, 1), v);
  const auto a = lanczos_lowest([&](auto x, auto y) { op.apply(x, y); }, op.dimension(), {.k = 10, .tol = 1e-10});
  const auto stiffness = assemble_stiffness(grid, cut, v);
  const auto b = lanczos_lowest([&](auto x, auto y) { stiffness.apply(x, y); }, stiffness.dimension(),
                                {.k = 10, .tol = 1e-10});
  require_converged(a);
  require_converged(b);
  double shift = 0.0;
  for (int j = 0; j < 10; ++j) shift = std::max(shift, std::abs(a.eigenvalues[j] - b.eigenvalues[j]));
  const double bound = truncation_shift_bound(full, 1, kappa);
  return {shift <= bound, fmt("max_j<=10 |shift| %.4f <= bound %.4f", shift, bound)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  if (wanted.empty()) wanted = {1, 2, 3, 4, 5, 6, 7, 8};

  const std::map<int, std::pair<const char*, std::function<Line()>>> criteria{
      {1, {"exponent recovery, d = 1, alpha = 1, theta = 2", [] { return exponent_recovery(1); }}},
      {2, {"exponent recovery, d = 1, alpha = 1.5, theta = 4", [] { return exponent_recovery(2); }}},
      {3, {"exponent recovery, d = 2, alpha = 1, theta = 2", [] { return exponent_recovery(3); }}},
      {4, {"heat-trace lower curve below every eigenvalue", trace_ordering}},
      {5, {"Ritz domination and scaling", ritz}},
      {6, {"oracle equivalences", oracles}},
      {7, {"rate pipeline exponent and variable-order sign", rates}},
      {8, {"truncation shift bound", truncation}},
  };

  bool all = true;
  for (int id : wanted) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::printf("criterion %d: FAIL unknown criterion\n", id);
      all = false;
      continue;
    }
    const auto t0 = Clock::now();
    Line line{false, ""};
    try {
      line = it->second.second();
    } catch (const std::exception& e) {
      line = {false, std::string("error: ") + e.what()};
    }
    all = all && line.pass;
    std::printf("criterion %d: %s %s | %s [%.1f s]\n", id, line.pass ? "PASS" : "FAIL", it->second.first,
                line.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
