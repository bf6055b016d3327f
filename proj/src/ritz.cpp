#include "nlspec/ritz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/sinc.hpp>

#include "nlspec/eigensolve.hpp"
#include "nlspec/error.hpp"
#include "nlspec/parallel.hpp"

namespace nlspec {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

// ---------------------------------------------------------------------------
// Tents and the trial basis.
// ---------------------------------------------------------------------------

double Tent::operator()(double s) const noexcept {
  return std::max(0.0, std::min(s - left, right - s));
}

double Tent::difference_quotient(double s, double z) const noexcept {
  const double lo = std::min(s, s + z);
  const double hi = std::max(s, s + z);
  const double c = center();
  if (hi <= left || lo >= right) return 0.0;
  if (lo >= left && hi <= c) return 1.0;
  if (lo >= c && hi <= right) return -1.0;
  const double rise = std::max(0.0, std::min(hi, c) - std::max(lo, left));
  const double fall = std::max(0.0, std::min(hi, right) - std::max(lo, c));
  return (rise - fall) / std::abs(z);
}

double Tent::square_integral() const noexcept {
  const double width = right - left;
  return width * width * width / 12.0;
}

double eval(const TentProduct& u, std::span<const double> x) {
  double value = 1.0;
  for (std::size_t i = 0; i < u.size(); ++i) value *= u[i](x[i]);
  return value;
}

std::complex<double> tent_transform(const Tent& tent, double xi) {
  const double w = tent.half_width();
  const double s = boost::math::sinc_pi(0.5 * w * xi);
  return std::polar(w * w * s * s, -tent.center() * xi);
}

double basis_knot(int k, double theta, double alpha) {
  return std::pow(static_cast<double>(k), alpha / (theta + alpha));
}

std::vector<int> TrialBasis::index(std::size_t flat) const {
  std::vector<int> k(d);
  for (int i = d - 1; i >= 0; --i) {
    k[i] = static_cast<int>(flat % n) + 1;
    flat /= n;
  }
  return k;
}

std::size_t TrialBasis::flat(std::span<const int> k) const {
  std::size_t f = 0;
  for (int i = 0; i < d; ++i) f = f * n + static_cast<std::size_t>(k[i] - 1);
  return f;
}

Tent TrialBasis::tent(int k) const { return Tent{knots.at(k - 1), knots.at(k)}; }

TentProduct TrialBasis::function(std::size_t flat_index) const {
  TentProduct u;
  for (int k : index(flat_index)) u.push_back(tent(k));
  return u;
}

TrialBasis build_basis(int n, int d, double theta, double alpha) {
  require(n >= 1, "basis size must be >= 1");
  require(theta > 0.0, "theta must be positive");
  require(alpha > 0.0 && alpha < 2.0, "alpha must lie in (0, 2)");
  if (d != 1 && d != 2) fail(ErrorCode::UnsupportedDimension, "trial basis needs d in {1, 2}");
  TrialBasis b;
  b.n = n;
  b.d = d;
  b.theta = theta;
  b.alpha = alpha;
  for (int k = 1; k <= n + 1; ++k) b.knots.push_back(basis_knot(k, theta, alpha));
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(n);
  b.norms.resize(total);
  for (std::size_t f = 0; f < total; ++f) {
    double norm = 1.0;
    for (int k : b.index(f)) norm *= b.tent(k).square_integral();
    b.norms[f] = norm;
  }
  return b;
}

std::pair<double, double> knot_spacing_band(double theta, double alpha, int k_max) {
  require(k_max >= 1, "k_max must be >= 1");
  double lo = kInfinity, hi = 0.0;
  const double e = theta / (theta + alpha);
  for (int k = 1; k <= k_max; ++k) {
    const double ratio =
        (basis_knot(k + 1, theta, alpha) - basis_knot(k, theta, alpha)) * std::pow(k, e);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  return {lo, hi};
}

namespace {

// ---------------------------------------------------------------------------
// Fourier route (d = 1).
// ---------------------------------------------------------------------------

struct CosTerm {
  double coef;
  double freq;
};

// sin^2(a xi) sin^2(b xi) cos(c xi) as a sum of cosines.
std::vector<CosTerm> cosine_expansion(double a, double b, double c) {
  std::vector<CosTerm> terms{{1.0, 0.0}};
  auto multiply = [&](const std::vector<CosTerm>& factor) {
    std::vector<CosTerm> out;
    for (const auto& p : terms)
      for (const auto& q : factor) {
        if (q.freq == 0.0) {
          out.push_back({p.coef * q.coef, p.freq});
        } else {
          out.push_back({0.5 * p.coef * q.coef, p.freq + q.freq});
          out.push_back({0.5 * p.coef * q.coef, std::abs(p.freq - q.freq)});
        }
      }
    terms = std::move(out);
  };
  multiply({{0.5, 0.0}, {-0.5, 2.0 * a}});
  multiply({{0.5, 0.0}, {-0.5, 2.0 * b}});
  multiply({{1.0, std::abs(c)}});
  const double scale = 2.0 * a + 2.0 * b + std::abs(c);
  std::sort(terms.begin(), terms.end(), [](auto& x, auto& y) { return x.freq < y.freq; });
  std::vector<CosTerm> merged;
  for (const auto& t : terms) {
    const double f = t.freq < 1e-12 * scale ? 0.0 : t.freq;
    if (!merged.empty() && std::abs(merged.back().freq - f) <= 1e-12 * scale)
      merged.back().coef += t.coef;
    else
      merged.push_back({t.coef, f});
  }
  return merged;
}

// Upper incomplete gamma by the modified Lentz continued fraction.
std::complex<double> upper_gamma(double a, std::complex<double> z) {
  using C = std::complex<double>;
  constexpr double tiny = 1e-300;
  C b = z + 1.0 - a;
  C c = 1.0 / tiny;
  C d = 1.0 / b;
  C h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const C delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) return std::exp(-z + a * std::log(z)) * h;
  }
  fail(ErrorCode::QuadratureNotConverged, "incomplete gamma continued fraction stalled");
}

// int_X^inf xi^p cos(w xi) dxi for p < -1.
double power_cosine_tail(double p, double w, double x) {
  if (w == 0.0) return -std::pow(x, p + 1.0) / (p + 1.0);
  // The continued fraction wants |w X| >= 4; less than a period before that.
  if (w * x < 4.0) {
    const double end = 4.0 / w;
    const double head = gauss_kronrod<double, 31>::integrate(
        [&](double t) {
          const double xi = std::exp(t);
          return std::pow(xi, p + 1.0) * std::cos(w * xi);
        },
        std::log(x), std::log(end), 15, 1e-14);
    return head + power_cosine_tail(p, w, end);
  }
  const double a = p + 1.0;
  const std::complex<double> z(0.0, -w * x);
  const std::complex<double> front = std::pow(w, -a) * std::polar(1.0, 0.5 * std::numbers::pi * a);
  return (front * upper_gamma(a, z)).real();
}

struct PowerTerm {
  double coef;
  double exponent;
};

// psi(xi) = sum c |xi|^s; every one-dimensional symbol has this form.
std::vector<PowerTerm> power_terms(const Symbol& symbol) {
  std::vector<PowerTerm> out;
  if (const auto* iso = std::get_if<IsotropicStable>(&symbol)) {
    out.push_back({iso->coefficient, iso->alpha});
  } else {
    for (const auto& t : std::get<AnisotropicSum>(symbol).terms)
      out.push_back({t.weight, t.inner_exponents.at(0) * t.outer});
  }
  return out;
}

double fourier_form(const Symbol& symbol, const Tent& u, const Tent& v, const FormOptions& opt) {
  const double wu = u.half_width(), wv = v.half_width();
  const double a = 0.5 * wu, b = 0.5 * wv, c = u.center() - v.center();
  auto integrand = [&](double xi) {
    const double su = boost::math::sinc_pi(a * xi), sv = boost::math::sinc_pi(b * xi);
    const double psi = eval_symbol(symbol, std::span<const double>(&xi, 1));
    return psi * wu * wu * wv * wv * su * su * sv * sv * std::cos(c * xi);
  };
  const auto terms = cosine_expansion(a, b, c);
  const auto powers = power_terms(symbol);
  // Exact tail: 16 sum_j c_j int_X^inf psi(xi) xi^{-4} cos(w_j xi).
  auto tail = [&](double x) {
    double total = 0.0;
    for (const auto& t : terms)
      for (const auto& p : powers)
        total += 16.0 * t.coef * p.coef * power_cosine_tail(p.exponent - 4.0, t.freq, x);
    return total;
  };
  const double omega = 2.0 * a + 2.0 * b + std::abs(c);
  const double panel = std::numbers::pi / omega;
  double cutoff = 64.0 / std::min(a, b);
  cutoff = panel * std::ceil(cutoff / panel);

  double body = 0.0, magnitude = 0.0;
  auto integrate_range = [&](double lo, double hi) {
    const int panels = static_cast<int>(std::lround((hi - lo) / panel));
    for (int j = 0; j < panels; ++j) {
      const double p0 = lo + j * panel, p1 = lo + (j + 1) * panel;
      double error = 0.0, l1 = 0.0;
      body += gauss_kronrod<double, 31>::integrate(integrand, p0, p1, 8, 1e-14, &error, &l1);
      magnitude += l1;
    }
  };
  integrate_range(0.0, cutoff);
  double value = body + tail(cutoff);
  for (int doubling = 0; doubling < opt.max_doublings; ++doubling) {
    integrate_range(cutoff, 2.0 * cutoff);
    cutoff *= 2.0;
    const double next = body + tail(cutoff);
    const bool settled = std::abs(next - value) <= opt.tol * magnitude;
    value = next;
    if (settled) return value / std::numbers::pi;
  }
  fail(ErrorCode::QuadratureNotConverged, "frequency cutoff did not settle");
}

// ---------------------------------------------------------------------------
// Correlation route: translation-invariant stable kernels.
// ---------------------------------------------------------------------------

double tent_overlap(const Tent& p, const Tent& q) {
  const double lo = std::max(p.left, q.left), hi = std::min(p.right, q.right);
  if (hi <= lo) return 0.0;
  std::array<double, 4> pts{lo, hi, lo, lo};
  int count = 2;
  for (double k : {p.center(), q.center()})
    if (k > lo && k < hi) pts[count++] = k;
  std::sort(pts.begin(), pts.begin() + count);
  double total = 0.0;
  for (int i = 0; i + 1 < count; ++i) {
    const double x0 = pts[i], x1 = pts[i + 1], xm = 0.5 * (x0 + x1);
    total += (x1 - x0) / 6.0 * (p(x0) * q(x0) + 4.0 * p(xm) * q(xm) + p(x1) * q(x1));
  }
  return total;
}

// c(z) = int u(x + z) v(x) dx.
double correlation(const Tent& u, const Tent& v, double z) {
  return tent_overlap(Tent{u.left - z, u.right - z}, v);
}

// c''(z) = v(a - z) - 2 v(m - z) + v(b - z) over the kinks a, m, b of u.
double correlation_second(const Tent& u, const Tent& v, double z) {
  return v(u.left - z) - 2.0 * v(u.center() - z) + v(u.right - z);
}

std::array<double, 3> kinks(const Tent& t) { return {t.left, t.center(), t.right}; }

// Nonnegative z where the piecewise structure of c(z) + c(-z) changes, with 0.
std::vector<double> lag_breakpoints(const Tent& u, const Tent& v) {
  std::vector<double> out{0.0};
  for (double p : kinks(u))
    for (double q : kinks(v)) out.push_back(std::abs(p - q));
  std::sort(out.begin(), out.end());
  const double scale = out.back();
  std::vector<double> unique;
  for (double z : out)
    if (unique.empty() || z - unique.back() > 1e-14 * scale) unique.push_back(z);
  return unique;
}

// int_p^q z^{-1-alpha} f(z) dz, p > 0, split so each piece has q / p <= 2.
template <class F>
double singular_weight_integral(F&& f, double alpha, double p, double q) {
  double total = 0.0;
  double lo = p;
  while (lo < q) {
    const double hi = std::min(q, 2.0 * lo);
    total += gauss<double, 20>::integrate(
        [&](double z) { return std::pow(z, -1.0 - alpha) * f(z); }, lo, hi);
    lo = hi;
  }
  return total;
}

double correlation_form_1d(double alpha, double amplitude, double kappa, const Tent& u,
                           const Tent& v) {
  const double inner = tent_overlap(u, v);
  const auto lags = lag_breakpoints(u, v);
  auto g2 = [&](double z) {
    return -correlation_second(u, v, z) - correlation_second(u, v, -z);
  };
  // G(z) = 2 <u, v> - c(z) - c(-z) is even, C^1 and piecewise cubic; carry
  // G and G' across pieces from the exact piecewise-linear G''.
  double g = 0.0, g1 = 0.0, total = 0.0;
  for (std::size_t i = 0; i + 1 < lags.size(); ++i) {
    const double p = lags[i], q = lags[i + 1];
    const double h = q - p;
    const double c0 = g2(p), slope = (g2(q) - g2(p)) / h;
    auto cubic = [=](double z) {
      const double t = z - p;
      return g + g1 * t + 0.5 * c0 * t * t + slope * t * t * t / 6.0;
    };
    const double top = std::min(q, kappa);
    if (top > p) {
      if (p == 0.0) {
        total += 0.5 * c0 * std::pow(top, 2.0 - alpha) / (2.0 - alpha) +
                 slope / 6.0 * std::pow(top, 3.0 - alpha) / (3.0 - alpha);
      } else {
        total += singular_weight_integral(cubic, alpha, p, top);
      }
    }
    g = cubic(q);
    g1 += c0 * h + 0.5 * slope * h * h;
  }
  const double reach = lags.back();
  if (kappa > reach) {
    const double far = std::isinf(kappa) ? 0.0 : std::pow(kappa, -alpha);
    total += 2.0 * inner * (std::pow(reach, -alpha) - far) / alpha;
  }
  return 2.0 * amplitude * total;
}

// Two-dimensional correlation route on the rectangular cells of the lag grid.
class Correlation2D {
 public:
  Correlation2D(double alpha, double amplitude, double kappa, const TentProduct& u,
                const TentProduct& v)
      : alpha_(alpha), amplitude_(amplitude), kappa_(kappa), u_(u), v_(v) {
    inner_ = tent_overlap(u[0], v[0]) * tent_overlap(u[1], v[1]);
    for (int i = 0; i < 2; ++i) {
      const auto lags = lag_breakpoints(u[i], v[i]);
      for (auto it = lags.rbegin(); it != lags.rend(); ++it)
        if (*it > 0.0) axis_[i].push_back(-*it);
      for (double z : lags) axis_[i].push_back(z);
    }
  }

  double value() const {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < axis_[0].size(); ++i)
      for (std::size_t j = 0; j + 1 < axis_[1].size(); ++j) {
        const double x0 = axis_[0][i], x1 = axis_[0][i + 1];
        const double y0 = axis_[1][j], y1 = axis_[1][j + 1];
        if ((x0 == 0.0 || x1 == 0.0) && (y0 == 0.0 || y1 == 0.0))
          total += origin_cell(x0 == 0.0 ? x1 : x0, y0 == 0.0 ? y1 : y0);
        else
          total += cell(x0, x1, y0, y1, 0);
      }
    total += 2.0 * inner_ * outside_box();
    return amplitude_ * total;
  }

 private:
  double g(double z1, double z2) const {
    return 2.0 * inner_ - correlation(u_[0], v_[0], z1) * correlation(u_[1], v_[1], z2) -
           correlation(u_[0], v_[0], -z1) * correlation(u_[1], v_[1], -z2);
  }

  double weight(double z1, double z2) const {
    const double r = std::hypot(z1, z2);
    return r > kappa_ ? 0.0 : std::pow(r, -2.0 - alpha_);
  }

  // Cell with a corner at the origin, opposite corner (a, b) (signed). Along
  // each ray G is a polynomial of degree <= 6 without constant or linear
  // part, so the radial integral is exact given its coefficients.
  double origin_cell(double a, double b) const {
    double total = 0.0;
    for (int tri = 0; tri < 2; ++tri) {
      auto f = [&](double sigma) {
        const double ex = tri == 0 ? a : a * sigma;
        const double ey = tri == 0 ? b * sigma : b;
        const double rho = std::hypot(ex, ey);
        const double top = std::min(1.0, kappa_ / rho);
        // G(tau e) / tau^2 = sum_{j=0}^{4} q_j tau^j from samples.
        constexpr int m = 5;
        Eigen::Matrix<double, m, m> vander;
        Eigen::Matrix<double, m, 1> rhs;
        for (int s = 0; s < m; ++s) {
          const double tau = 0.5 * (1.0 + std::cos(std::numbers::pi * (s + 0.5) / m));
          for (int j = 0; j < m; ++j) vander(s, j) = std::pow(tau, j);
          rhs(s) = g(tau * ex, tau * ey) / (tau * tau);
        }
        const Eigen::Matrix<double, m, 1> q = vander.partialPivLu().solve(rhs);
        double radial = 0.0;
        for (int j = 0; j < m; ++j)
          radial += q(j) * std::pow(top, j + 2.0 - alpha_) / (j + 2.0 - alpha_);
        // Jacobian |a b| tau and |z|^{-2-alpha} = tau^{-2-alpha} rho^{-2-alpha}.
        return std::abs(a * b) * std::pow(rho, -2.0 - alpha_) * radial;
      };
      total += gauss<double, 30>::integrate(f, 0.0, 1.0);
    }
    return total;
  }

  double cell(double x0, double x1, double y0, double y1, int depth) const {
    const double dx = std::max({0.0, x0, -x1}), dy = std::max({0.0, y0, -y1});
    const double near = std::hypot(dx, dy);
    const double far = std::hypot(std::max(std::abs(x0), std::abs(x1)),
                                  std::max(std::abs(y0), std::abs(y1)));
    if (near >= kappa_) return 0.0;
    const double diam = std::hypot(x1 - x0, y1 - y0);
    const bool crosses = far > kappa_;
    if (depth < 40 && (near < 1.5 * diam || (crosses && depth < 12))) {
      const double xm = 0.5 * (x0 + x1), ym = 0.5 * (y0 + y1);
      return cell(x0, xm, y0, ym, depth + 1) + cell(xm, x1, y0, ym, depth + 1) +
             cell(x0, xm, ym, y1, depth + 1) + cell(xm, x1, ym, y1, depth + 1);
    }
    return gauss<double, 12>::integrate(
        [&](double z1) {
          return gauss<double, 12>::integrate(
              [&](double z2) { return weight(z1, z2) * g(z1, z2); }, y0, y1);
        },
        x0, x1);
  }

  // int over |z| <= kappa outside the lag box of |z|^{-2-alpha}.
  double outside_box() const {
    const double zx = axis_[0].back(), zy = axis_[1].back();
    const double corner = std::atan2(zy, zx);
    const double cut = std::isinf(kappa_) ? 0.0 : std::pow(kappa_, -alpha_);
    auto radial = [&](double r) { return std::max(0.0, std::pow(r, -alpha_) - cut) / alpha_; };
    auto side = [&](double phi) { return radial(zx / std::cos(phi)); };
    auto top = [&](double phi) { return radial(zy / std::sin(phi)); };
    std::vector<double> a{0.0, corner}, b{corner, 0.5 * std::numbers::pi};
    if (!std::isinf(kappa_)) {
      if (zx < kappa_) {
        const double phi = std::acos(zx / kappa_);
        if (phi < corner) a.insert(a.begin() + 1, phi);
      }
      if (zy < kappa_) {
        const double phi = std::asin(zy / kappa_);
        if (phi > corner) b.insert(b.begin() + 1, phi);
      }
    }
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i)
      total += gauss_kronrod<double, 31>::integrate(side, a[i], a[i + 1], 15, 1e-13);
    for (std::size_t i = 0; i + 1 < b.size(); ++i)
      total += gauss_kronrod<double, 31>::integrate(top, b[i], b[i + 1], 15, 1e-13);
    return 4.0 * total;
  }

  double alpha_, amplitude_, kappa_;
  const TentProduct& u_;
  const TentProduct& v_;
  double inner_ = 0.0;
  std::array<std::vector<double>, 2> axis_;
};

// ---------------------------------------------------------------------------
// Double quadrature route: position-dependent kernels in d = 1.
// ---------------------------------------------------------------------------

double double_quadrature_form(const JumpKernel& kernel, const Tent& u, const Tent& v,
                              const FormOptions& opt) {
  const double kappa = kernel_range(kernel);
  auto local = [&](double x, double z) {
    const double y = x + z;
    const std::span<const double> xs(&x, 1), ys(&y, 1);
    // z^2 J(x, x + z) = n(x, y) z^{1 - alpha(x, y)}, finite as z -> 0.
    return kernel_amplitude(kernel, xs, ys) * std::pow(z, 1.0 - kernel_order(kernel, xs, ys));
  };
  std::vector<double> kx;
  for (double k : kinks(u)) kx.push_back(k);
  for (double k : kinks(v)) kx.push_back(k);
  kx.push_back(0.0);
  // I(z) = int (D_u / z) (D_v / z) z^2 J(x, x + z) dx.
  auto slice = [&](double z) {
    if (!(z > 0.0)) return 0.0;
    std::vector<double> pts;
    for (double k : kx) {
      pts.push_back(k);
      pts.push_back(k - z);
    }
    std::sort(pts.begin(), pts.end());
    const double lo = std::max(std::min(u.left, v.left) - z, pts.front());
    const double hi = std::min(std::max(u.right, v.right), pts.back());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double a = std::max(pts[i], lo), b = std::min(pts[i + 1], hi);
      if (b <= a) continue;
      total += gauss<double, 10>::integrate(
          [&](double x) {
            const double du = u.difference_quotient(x, z);
            const double dv = v.difference_quotient(x, z);
            return du * dv == 0.0 ? 0.0 : du * dv * local(x, z);
          },
          a, b);
    }
    return total;
  };
  std::vector<double> lags;
  for (double p : kx)
    for (double q : kx)
      if (p - q > 0.0) lags.push_back(p - q);
  std::sort(lags.begin(), lags.end());
  lags.erase(std::unique(lags.begin(), lags.end()), lags.end());
  const double reach = std::max(std::max(u.right, v.right) - std::min(u.left, v.left), lags.back());
  std::vector<double> z_pts{0.0};
  for (double z : lags)
    if (z < reach && z > 1e-14 * reach) z_pts.push_back(z);
  z_pts.push_back(reach);

  double total = 0.0;
  boost::math::quadrature::tanh_sinh<double> ts;
  for (std::size_t i = 0; i + 1 < z_pts.size(); ++i) {
    const double a = z_pts[i], b = std::min(z_pts[i + 1], kappa);
    if (b <= a) break;
    if (i == 0)
      total += ts.integrate(slice, a, b, opt.tol);
    else
      total += gauss_kronrod<double, 31>::integrate(slice, a, b, 12, opt.tol);
  }
  // Beyond the reach only u v (x) [J(x, x + z) + J(x, x - z)] survives.
  if (kappa > reach && tent_overlap(u, v) > 0.0) {
    auto far_kernel = [&](double x) {
      auto jump = [&](double z) {
        double s = 0.0;
        for (double sign : {1.0, -1.0}) {
          const double y = x + sign * z;
          s += eval_kernel(kernel, std::span<const double>(&x, 1), std::span<const double>(&y, 1));
        }
        return s;
      };
      if (std::isinf(kappa)) {
        boost::math::quadrature::exp_sinh<double> es;
        return es.integrate([&](double t) { return jump(reach + t); }, opt.tol);
      }
      return gauss_kronrod<double, 31>::integrate(jump, reach, kappa, 12, opt.tol);
    };
    const double lo = std::max(u.left, v.left), hi = std::min(u.right, v.right);
    std::vector<double> pts{lo, hi};
    for (double k : {u.center(), v.center()})
      if (k > lo && k < hi) pts.push_back(k);
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      total += gauss<double, 12>::integrate([&](double x) { return u(x) * v(x) * far_kernel(x); },
                                             pts[i], pts[i + 1]);
    return 2.0 * total;
  }
  return 2.0 * total;
}

bool interiors_overlap(const TentProduct& u, const TentProduct& v) {
  for (std::size_t i = 0; i < u.size(); ++i)
    if (std::min(u[i].right, v[i].right) <= std::max(u[i].left, v[i].left)) return false;
  return true;
}

// Kink points of u and v on their common interval along one axis.
std::vector<double> product_pieces(const Tent& u, const Tent& v) {
  const double lo = std::max(u.left, v.left), hi = std::min(u.right, v.right);
  std::vector<double> pts{lo, hi};
  for (double k : {u.center(), v.center()})
    if (k > lo && k < hi) pts.push_back(k);
  std::sort(pts.begin(), pts.end());
  return pts;
}

}  // namespace

double fourier_pair_form(const Symbol& symbol, const Tent& u, const Tent& v,
                         const FormOptions& options) {
  validate(symbol, 1);
  require(options.tol > 0.0, "tolerance must be positive");
  return fourier_form(symbol, u, v, options);
}

double kernel_pair_form(const JumpKernel& kernel, const TentProduct& u, const TentProduct& v,
                        const FormOptions& options) {
  validate(kernel);
  require(u.size() == v.size() && !u.empty(), "tent products must share a dimension");
  const int d = static_cast<int>(u.size());
  if (d > 2) fail(ErrorCode::UnsupportedDimension, "tent products need d in {1, 2}");
  if (const auto* stable = std::get_if<LevyStable>(&kernel)) {
    if (d == 1) return correlation_form_1d(stable->alpha, 1.0, stable->kappa, u[0], v[0]);
    return Correlation2D(stable->alpha, 1.0, stable->kappa, u, v).value();
  }
  if (d != 1)
    fail(ErrorCode::UnsupportedDimension,
         "position-dependent kernels are integrated in one dimension only");
  return double_quadrature_form(kernel, u[0], v[0], options);
}

double potential_pair_form(const Potential& potential, const TentProduct& u,
                           const TentProduct& v) {
  require(u.size() == v.size() && !u.empty(), "tent products must share a dimension");
  if (!interiors_overlap(u, v)) return 0.0;
  auto pieces = [](const Tent& a, const Tent& b) {
    auto pts = product_pieces(a, b);
    if (pts.front() < 0.0 && pts.back() > 0.0) {
      pts.push_back(0.0);
      std::sort(pts.begin(), pts.end());
    }
    return pts;
  };
  auto integrate_axis = [&](const Tent& a, const Tent& b, auto&& f) {
    const auto pts = pieces(a, b);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      total += gauss_kronrod<double, 31>::integrate(
          [&](double x) { return a(x) * b(x) * f(x); }, pts[i], pts[i + 1], 10, 1e-13);
    return total;
  };
  if (u.size() == 1)
    return integrate_axis(u[0], v[0], [&](double x) { return eval_potential(potential, std::abs(x)); });
  // Outer axis on a fixed rule: the inner values carry rounding noise that
  // would stall an adaptive outer pass.
  const auto outer = pieces(u[0], v[0]);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < outer.size(); ++i)
    total += gauss<double, 40>::integrate(
        [&](double x1) {
          return u[0](x1) * v[0](x1) * integrate_axis(u[1], v[1], [&](double x2) {
                   return eval_potential(potential, std::hypot(x1, x2));
                 });
        },
        outer[i], outer[i + 1]);
  return total;
}

std::string form_route(const RitzProblem& problem, int d) {
  if (const auto* s = std::get_if<SymbolProblem>(&problem)) {
    if (d == 1) return "fourier";
    if (std::holds_alternative<IsotropicStable>(s->symbol)) return "correlation";
    fail(ErrorCode::UnsupportedDimension,
         "two-dimensional Ritz forms need an isotropic stable symbol");
  }
  const auto& k = std::get<KernelProblem>(problem).kernel;
  if (const auto* stable = std::get_if<LevyStable>(&k))
    return d == 1 && std::isinf(stable->kappa) ? "fourier" : "correlation";
  if (d != 1)
    fail(ErrorCode::UnsupportedDimension,
         "position-dependent kernels are integrated in one dimension only");
  return "double-quadrature";
}

Eigen::MatrixXd form_matrix(const TrialBasis& basis, const RitzProblem& problem,
                            const FormOptions& options) {
  const std::string route = form_route(problem, basis.d);
  const Potential& potential = std::visit([](const auto& p) -> const Potential& { return p.potential; },
                                          problem);
  validate(potential);
  // Everything reduces to either a one-dimensional symbol or a kernel.
  std::optional<Symbol> symbol;
  std::optional<JumpKernel> kernel;
  if (const auto* s = std::get_if<SymbolProblem>(&problem)) {
    validate(s->symbol, basis.d);
    if (route == "fourier") {
      symbol = s->symbol;
    } else {
      const auto& iso = std::get<IsotropicStable>(s->symbol);
      kernel = LevyStable{iso.alpha, kInfinity};
      // |xi|^alpha <-> (C / 2) |z|^{-(d + alpha)} under the form convention.
      symbol = IsotropicStable{iso.alpha,
                               iso.coefficient * fractional_laplacian_constant(basis.d, iso.alpha) / 2.0};
    }
  } else {
    const auto& k = std::get<KernelProblem>(problem).kernel;
    validate(k);
    if (route == "fourier")
      symbol = equivalent_symbol(std::get<LevyStable>(k), 1);
    else
      kernel = k;
  }
  bool disjoint_as_kernel = route == "fourier";
  if (disjoint_as_kernel)
    for (const auto& t : power_terms(*symbol))
      disjoint_as_kernel = disjoint_as_kernel && t.exponent > 0.0 && t.exponent <= 2.0;
  const std::size_t m = basis.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) pairs.emplace_back(i, j);
  Eigen::MatrixXd a(m, m);
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    const TentProduct u = basis.function(i), v = basis.function(j);
    double value = 0.0;
    if (route == "fourier" && disjoint_as_kernel && !interiors_overlap(u, v)) {
      // Cancellation-free for separated tents: each |xi|^s is a stable kernel.
      for (const auto& t : power_terms(*symbol))
        if (t.exponent < 2.0)
          value += t.coef * fractional_laplacian_constant(1, t.exponent) / 2.0 *
                   correlation_form_1d(t.exponent, 1.0, kInfinity, u[0], v[0]);
    } else if (route == "fourier") {
      value = fourier_form(*symbol, u[0], v[0], options);
    } else if (route == "correlation" && symbol) {
      const auto& iso = std::get<IsotropicStable>(*symbol);
      value = iso.coefficient * (basis.d == 1
                                     ? correlation_form_1d(iso.alpha, 1.0, kInfinity, u[0], v[0])
                                     : Correlation2D(iso.alpha, 1.0, kInfinity, u, v).value());
    } else {
      value = kernel_pair_form(*kernel, u, v, options);
    }
    value += potential_pair_form(potential, u, v);
    a(i, j) = value;
    a(j, i) = value;
  });
  return a;
}

std::vector<double> ritz_values(const Eigen::MatrixXd& a, std::span<const double> norms) {
  require(a.rows() == a.cols() && static_cast<std::size_t>(a.rows()) == norms.size(),
          "form matrix and norms must match");
  Eigen::VectorXd scale(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    require(norms[i] > 0.0, "norms must be positive");
    scale(i) = 1.0 / std::sqrt(norms[i]);
  }
  const Eigen::MatrixXd b = scale.asDiagonal() * a * scale.asDiagonal();
  return dense_lowest(b, static_cast<int>(b.rows())).eigenvalues;
}

double loglog_slope(std::span<const double> n, std::span<const double> mu) {
  require(n.size() == mu.size() && n.size() >= 2, "need at least two points");
  double sx = 0, sy = 0;
  const double count = static_cast<double>(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    require(n[i] > 0.0 && mu[i] > 0.0, "log-log fit needs positive data");
    sx += std::log(n[i]);
    sy += std::log(mu[i]);
  }
  const double mx = sx / count, my = sy / count;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double dx = std::log(n[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(mu[i]) - my);
  }
  require(sxx > 0.0, "log-log fit needs distinct n");
  return sxy / sxx;
}

RitzScaling ritz_scaling_check(double theta, double alpha, int d, std::span<const int> n_list,
                               const FormOptions& options) {
  require(n_list.size() >= 4, "scaling check needs at least four basis sizes");
  require(std::is_sorted(n_list.begin(), n_list.end()) &&
              std::adjacent_find(n_list.begin(), n_list.end()) == n_list.end(),
          "basis sizes must increase");
  RitzScaling out;
  const RitzProblem problem = SymbolProblem{IsotropicStable{alpha}, PowerPotential{1.0, theta}};
  for (int n : n_list) {
    const auto basis = build_basis(n, d, theta, alpha);
    const auto mu = ritz_values(form_matrix(basis, problem, options), basis.norms);
    out.n.push_back(n);
    out.mu_max.push_back(mu.back());
  }
  out.slope = loglog_slope(out.n, out.mu_max);
  return out;
}

}  // namespace nlspec
