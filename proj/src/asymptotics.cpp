#include "nlspec/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nlspec/error.hpp"
#include "nlspec/format.hpp"

namespace nlspec {

namespace {

void check_window(const Spectrum& spectrum, FitWindow window) {
  require(window.first >= 1 && window.last >= window.first, "window must satisfy 1 <= first <= last");
  require(window.last <= spectrum.size(), "window runs past the spectrum");
}

FitResult least_squares(const std::vector<double>& lx, const std::vector<double>& ly) {
  const std::size_t m = lx.size();
  if (m < kMinFitPoints)
    fail(ErrorCode::WindowTooSmall,
         "fit needs at least " + std::to_string(kMinFitPoints) + " points, got " + std::to_string(m));
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  require(sxx > 0.0, "fit abscissae must not all coincide");
  FitResult r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = ly[i] - r.intercept - r.slope * lx[i];
    ssr += e * e;
  }
  r.standard_error = std::sqrt(ssr / static_cast<double>(m - 2) / sxx);
  r.points = m;
  return r;
}

}  // namespace

FitResult fit_exponent(const Spectrum& spectrum, FitWindow window) {
  check_window(spectrum, window);
  std::vector<double> lx, ly;
  for (std::size_t n = window.first; n <= window.last; ++n) {
    const double v = spectrum(n);
    if (!(v > 0.0))
      fail(ErrorCode::InvalidArgument, "lambda_" + std::to_string(n) + " is not positive");
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(v));
  }
  FitResult r = least_squares(lx, ly);
  r.window = window;
  return r;
}

FitResult fit_power_law(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "x and y must have the same length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "power-law fit needs positive samples");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  FitResult r = least_squares(lx, ly);
  r.window = {1, x.size()};
  return r;
}

FitWindow default_window(const Spectrum& spectrum, double spectral_ceiling) {
  const std::size_t m = spectrum.size();
  require(m >= 1, "empty spectrum");
  FitWindow w{static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(m))) + 1, m};
  if (std::isfinite(spectral_ceiling) && spectral_ceiling > 0.0)
    while (w.last >= w.first && spectrum(w.last) >= 0.9 * spectral_ceiling) --w.last;
  if (w.count() < kMinFitPoints)
    fail(ErrorCode::WindowTooSmall, "default window keeps " + std::to_string(w.count()) +
                                        " of " + std::to_string(m) + " eigenvalues");
  return w;
}

Envelope calibrate_constants(const Spectrum& spectrum, double exponent, FitWindow window) {
  require(exponent > 0.0, "exponent must be positive");
  check_window(spectrum, window);
  Envelope e{kInfinity, -kInfinity};
  for (std::size_t n = window.first; n <= window.last; ++n) {
    const double ratio = spectrum(n) / std::pow(static_cast<double>(n), exponent);
    e.delta_low = std::min(e.delta_low, ratio);
    e.delta_up = std::max(e.delta_up, ratio);
  }
  return e;
}

Envelope calibrate_constants(const Spectrum& spectrum, double exponent) {
  require(spectrum.size() >= 1, "empty spectrum");
  return calibrate_constants(spectrum, exponent, {1, spectrum.size()});
}

ViolationReport compare_bounds(const Spectrum& spectrum, std::span<const BoundCurve> curves,
                               FitWindow window) {
  check_window(spectrum, window);
  ViolationReport report;
  for (const auto& curve : curves) {
    const bool lower = is_lower(curve.source);
    for (std::size_t n = window.first; n <= window.last; ++n) {
      const double nn = static_cast<double>(n);
      if (nn < curve.min_n) continue;
      const double bound = curve(nn);
      const double lambda = spectrum(n);
      const double slack = kOrderingSlack * std::max(std::abs(bound), std::abs(lambda));
      ++report.checked;
      const bool bad = lower ? bound > lambda + slack : bound < lambda - slack;
      if (bad) report.violations.push_back({std::string(to_string(curve.source)), lower, n, bound, lambda});
    }
  }
  return report;
}

ViolationReport compare_bounds(const Spectrum& spectrum, std::span<const BoundCurve> curves) {
  require(spectrum.size() >= 1, "empty spectrum");
  return compare_bounds(spectrum, curves, {1, spectrum.size()});
}

std::vector<BoundCurve> envelope_curves(const Envelope& envelope, double exponent) {
  std::vector<BoundCurve> out;
  for (auto [source, delta] : {std::pair{BoundSource::PowerLower, envelope.delta_low},
                               std::pair{BoundSource::PowerUpper, envelope.delta_up}}) {
    BoundCurve c;
    c.source = source;
    c.constants = {{"delta", delta}, {"exponent", exponent}};
    c.evaluate = [delta, exponent](double n) { return delta * std::pow(n, exponent); };
    out.push_back(std::move(c));
  }
  return out;
}

void write_violations_csv(std::ostream& out, const ViolationReport& report) {
  out << "source,direction,n,bound,lambda\n";
  for (const auto& v : report.violations)
    out << v.source << ',' << (v.lower ? "lower" : "upper") << ',' << v.n << ','
        << format_double(v.bound) << ',' << format_double(v.lambda) << '\n';
}

std::string summarize(const FitResult& fit, const Envelope& envelope,
                      const ViolationReport& report) {
  std::ostringstream s;
  s << "fit window [" << fit.window.first << ", " << fit.window.last << "], " << fit.points
    << " points\n"
    << "slope " << format_double(fit.slope) << " +- " << format_double(fit.standard_error)
    << ", intercept " << format_double(fit.intercept) << '\n'
    << "envelope delta_low " << format_double(envelope.delta_low) << ", delta_up "
    << format_double(envelope.delta_up) << '\n'
    << "bound ordering: " << report.violations.size() << " violations in " << report.checked
    << " comparisons\n";
  return s.str();
}

}  // namespace nlspec
