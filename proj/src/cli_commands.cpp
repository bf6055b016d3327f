#include <unistd.h>

#include <atomic>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>

#include <nlohmann/json.hpp>

#include "nlspec/asymptotics.hpp"
#include "nlspec/cli.hpp"
#include "nlspec/discretize.hpp"
#include "nlspec/error.hpp"
#include "nlspec/format.hpp"
#include "nlspec/rates.hpp"
#include "nlspec/ritz.hpp"

namespace nlspec::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tables: the unit of output, written as CSV or as a JSON array of rows.
// ---------------------------------------------------------------------------

using Cell = std::variant<long long, double, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

std::string cell_text(const Cell& c) {
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  return std::get<std::string>(c);
}

json cell_json(const Cell& c) {
  if (const auto* i = std::get_if<long long>(&c)) return *i;
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? json(*d) : json(format_double(*d));
  return std::get<std::string>(c);
}

std::string render(const Table& t, const std::string& format) {
  if (format == "json") {
    json rows = json::array();
    for (const auto& r : t.rows) {
      json o = json::object();
      for (std::size_t i = 0; i < t.columns.size(); ++i) o[t.columns[i]] = cell_json(r[i]);
      rows.push_back(std::move(o));
    }
    return rows.dump(1) + "\n";
  }
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + cell_text(r[i]);
    out += '\n';
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::CacheCorrupt, "cannot read " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Rows of a rendered table as name -> text maps.
std::vector<std::map<std::string, std::string>> parse_table(const std::string& text,
                                                           const std::string& format) {
  std::vector<std::map<std::string, std::string>> out;
  if (format == "json") {
    for (const auto& row : json::parse(text)) {
      std::map<std::string, std::string> m;
      for (const auto& [k, v] : row.items())
        m[k] = v.is_string() ? v.get<std::string>()
               : v.is_number_integer() ? std::to_string(v.get<long long>())
                                       : format_double(v.get<double>());
      out.push_back(std::move(m));
    }
    return out;
  }
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> columns;
  {
    std::istringstream h(line);
    std::string c;
    while (std::getline(h, c, ',')) columns.push_back(c);
  }
  while (std::getline(in, line)) {
    std::istringstream r(line);
    std::string c;
    std::map<std::string, std::string> m;
    for (std::size_t i = 0; std::getline(r, c, ',') && i < columns.size(); ++i) m[columns[i]] = c;
    out.push_back(std::move(m));
  }
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc()) fail(ErrorCode::CacheCorrupt, "bad number '" + s + "' in cached table");
  return v;
}

// ---------------------------------------------------------------------------
// Cache directories.
// ---------------------------------------------------------------------------

struct Outcome {
  std::vector<Table> tables;
  std::string text_name;
  std::string text;
  json result = json::object();
  json inputs = json::object();
  int exit_code = 0;
};

class Context {
 public:
  Context(RunConfig config, const RunOptions& options) : config_(std::move(config)), options_(options) {
    if (options.seed) config_.solver.seed = *options.seed;
    if (options.format) {
      if (*options.format != "csv" && *options.format != "json")
        fail(ErrorCode::ConfigParse, "--format must be csv or json");
      config_.output.format = *options.format;
    }
    out_ = options.out ? *options.out : fs::path(config_.output.directory);
    canonical_ = canonical_config(config_);
  }

  const RunConfig& config() const { return config_; }
  const std::string& format() const { return config_.output.format; }
  std::string extension() const { return "." + format(); }

  void log(const std::string& line) const {
    if (options_.log) *options_.log << line << '\n';
  }

  std::string digest(const std::string& command) const {
    return sha256_hex(command + "\n" + sections(command) + "\n[output]\nformat = " + format() + "\n");
  }

  CommandResult run(const std::string& command, bool force, bool check) {
    CommandResult r;
    r.digest = digest(command);
    r.directory = out_ / (command + "-" + r.digest.substr(0, 16));
    if (!force && fs::exists(r.directory)) {
      try {
        verify(r.directory, r.digest);
        r.cache_hit = true;
        r.exit_code = read_exit_code(r.directory, check);
        log("cache hit: " + r.directory.string());
        return r;
      } catch (const Error& e) {
        log(std::string("warning: ") + e.what() + "; recomputing");
      }
    }
    Outcome o = compute(command, check);
    write(r.directory, command, r.digest, o);
    r.exit_code = check ? o.exit_code : 0;
    log("wrote " + r.directory.string());
    return r;
  }

  // Rows of a table produced by another command (computed or cached).
  std::vector<std::map<std::string, std::string>> table(const std::string& command,
                                                       const std::string& name, json& inputs) {
    const auto r = run(command, false, false);
    inputs[command] = r.digest;
    return parse_table(read_file(r.directory / (name + extension())), format());
  }

 private:
  // Canonical sections each command depends on.
  std::string sections(const std::string& command) const {
    static const std::map<std::string, std::vector<std::string>> needs{
        {"spectrum", {"problem", "grid", "solver"}},
        {"fit", {"problem", "grid", "solver", "fit"}},
        {"bounds", {"problem", "grid", "solver", "fit", "bounds"}},
        {"ritz", {"problem", "grid", "solver", "ritz"}},
        {"report", {"problem", "grid", "solver", "fit", "bounds", "ritz"}},
    };
    const auto it = needs.find(command);
    if (it == needs.end()) fail(ErrorCode::ConfigParse, "unknown command '" + command + "'");
    std::string out;
    for (const auto& name : it->second) {
      const std::string head = "[" + name + "]\n";
      const auto begin = canonical_.find(head);
      const auto end = canonical_.find("\n[", begin + head.size());
      out += canonical_.substr(begin, end == std::string::npos ? std::string::npos : end + 1 - begin);
    }
    return out;
  }

  Outcome compute(const std::string& command, bool check);

  void verify(const fs::path& dir, const std::string& digest) const {
    json m;
    try {
      m = json::parse(read_file(dir / "manifest.json"));
      if (m.value("digest", "") != digest || m.value("schema_version", 0) != kSchemaVersion)
        fail(ErrorCode::CacheCorrupt, dir.string() + ": digest or schema mismatch");
      for (const auto& [name, hash] : m.at("files").items())
        if (sha256_hex(read_file(dir / name)) != hash.get<std::string>())
          fail(ErrorCode::CacheCorrupt, dir.string() + ": " + name + " does not match its digest");
    } catch (const json::exception& e) {
      fail(ErrorCode::CacheCorrupt, dir.string() + ": unreadable manifest (" + e.what() + ")");
    }
  }

  static int read_exit_code(const fs::path& dir, bool check) {
    const json m = json::parse(read_file(dir / "manifest.json"));
    return check ? m.value("check_exit_code", 0) : 0;
  }

  void write(const fs::path& dir, const std::string& command, const std::string& digest,
             const Outcome& o) const {
    static std::atomic<int> counter{0};
    fs::create_directories(out_);
    const fs::path tmp = out_ / (".tmp-" + dir.filename().string() + "-" + std::to_string(::getpid()) +
                                 "-" + std::to_string(counter++));
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    json files = json::object();
    auto put = [&](const std::string& name, const std::string& bytes) {
      std::ofstream f(tmp / name, std::ios::binary);
      f << bytes;
      f.close();
      if (!f) fail(ErrorCode::InvalidArgument, "cannot write " + (tmp / name).string());
      files[name] = sha256_hex(bytes);
    };
    for (const auto& t : o.tables) put(t.name + extension(), render(t, format()));
    if (!o.text_name.empty()) put(o.text_name, o.text);
    json m = {{"schema_version", kSchemaVersion},
              {"tool", "nlspec"},
              {"tool_version", kToolVersion},
              {"command", command},
              {"digest", digest},
              {"format", format()},
              {"config", canonical_},
              {"inputs", o.inputs},
              {"result", o.result},
              {"check_exit_code", o.exit_code},
              {"files", files}};
    put("manifest.json", m.dump(2) + "\n");
    // manifest.json lists the others, not itself.
    // Publish with a rename so readers never see a partial directory.
    if (fs::exists(dir)) {
      const fs::path old = tmp.string() + ".old";
      fs::rename(dir, old);
      fs::rename(tmp, dir);
      fs::remove_all(old);
    } else {
      std::error_code ec;
      fs::rename(tmp, dir, ec);
      if (ec) fs::remove_all(tmp);  // a concurrent run published the same digest
    }
  }

  RunConfig config_;
  RunOptions options_;
  fs::path out_;
  std::string canonical_;
};

// ---------------------------------------------------------------------------
// Problem plumbing.
// ---------------------------------------------------------------------------

double problem_theta(const ProblemConfig& p) {
  if (const auto* pw = std::get_if<PowerPotential>(&p.potential)) return pw->theta;
  return std::get<TwoSidedPower>(p.potential).theta1;
}

double problem_alpha(const ProblemConfig& p) {
  if (p.form == "symbol") {
    if (const auto* iso = std::get_if<IsotropicStable>(&p.symbol)) return iso->alpha;
    fail(ErrorCode::ConfigParse, "this command needs an isotropic stable symbol or a kernel");
  }
  if (const auto* st = std::get_if<LevyStable>(&p.kernel)) return st->alpha;
  return std::get<VariableOrder>(p.kernel).alpha0;
}

double target_exponent(const RunConfig& c) {
  return c.fit.target ? *c.fit.target : weyl_target(c.problem);
}

struct Loaded {
  Spectrum spectrum;
  double ceiling = kInfinity;
};

Loaded load_spectrum(Context& ctx, json& inputs) {
  Loaded l;
  for (const auto& row : ctx.table("spectrum", "spectrum", inputs)) {
    l.spectrum.eigenvalues.push_back(parse_double(row.at("lambda")));
    l.spectrum.residuals.push_back(parse_double(row.at("residual")));
  }
  const auto r = ctx.run("spectrum", false, false);
  const json m = json::parse(read_file(r.directory / "manifest.json"));
  l.ceiling = m.at("result").at("ceiling").is_number() ? m["result"]["ceiling"].get<double>() : kInfinity;
  l.spectrum.digest = r.digest;
  return l;
}

FitWindow window_for(const RunConfig& c, const Loaded& l) {
  if (c.fit.window) {
    if (c.fit.window->second > l.spectrum.size())
      fail(ErrorCode::ConfigParse, "fit.window ends at " + std::to_string(c.fit.window->second) +
                                       " but solver.k is " + std::to_string(l.spectrum.size()));
    return {c.fit.window->first, c.fit.window->second};
  }
  return default_window(l.spectrum, l.ceiling);
}

std::vector<BoundCurve> build_curves(const RunConfig& c, const Loaded& l) {
  const auto& p = c.problem;
  const int d = p.dimension;
  std::vector<BoundCurve> curves;
  for (const auto& name : c.bounds.curves) {
    if (name == "heat_trace") {
      Symbol symbol = p.symbol;
      if (p.form == "kernel") {
        const auto* st = std::get_if<LevyStable>(&p.kernel);
        if (!st || !std::isinf(st->kappa))
          fail(ErrorCode::ConfigParse, "bounds.curves: heat_trace needs a symbol or a full-range stable kernel");
        symbol = equivalent_symbol(*st, d);
      }
      curves.push_back(make_heat_trace_curve(symbol, p.potential, d));
    } else if (name == "power") {
      const double e = target_exponent(c);
      Envelope env{0.0, 0.0};
      if (!c.bounds.power_delta_low || !c.bounds.power_delta_up)
        env = calibrate_constants(l.spectrum, e, window_for(c, l));
      if (c.bounds.power_delta_low) env.delta_low = *c.bounds.power_delta_low;
      if (c.bounds.power_delta_up) env.delta_up = *c.bounds.power_delta_up;
      // A calibrated envelope only speaks for its window.
      const double first = static_cast<double>(window_for(c, l).first);
      for (auto& curve : envelope_curves(env, e)) {
        curve.min_n = first;
        curves.push_back(std::move(curve));
      }
    } else if (name == "rate") {
      const double pexp = c.bounds.reference_p.value_or(1.05 * d / 4.0);
      const RateProfile profile =
          p.form == "kernel" && std::holds_alternative<VariableOrder>(p.kernel)
              ? variable_order_profile(d, std::get<VariableOrder>(p.kernel), p.potential,
                                       SimplePower{pexp}, c.bounds.range_kappa)
              : constant_order_profile(d, problem_alpha(p), p.potential, SimplePower{pexp},
                                       c.bounds.range_kappa);
      curves.push_back(make_rate_lower_curve(profile, c.bounds.rate_delta1, c.bounds.rate_delta2));
    } else {
      if (p.form != "kernel" || !std::holds_alternative<VariableOrder>(p.kernel))
        fail(ErrorCode::ConfigParse, "bounds.curves: log_corrected needs a variable_order kernel");
      const auto& vo = std::get<VariableOrder>(p.kernel);
      const double theta = problem_theta(p);
      double delta = c.bounds.log_delta;
      if (delta == 0.0) delta = 0.5 * log_corrected_delta_limit(d, theta, vo.alpha0, vo.beta1);
      curves.push_back(make_log_corrected_curve(d, theta, vo.alpha0, vo.beta1, delta, c.bounds.log_c_delta));
    }
  }
  return curves;
}

RitzProblem ritz_problem(const ProblemConfig& p) {
  if (p.form == "symbol") return SymbolProblem{p.symbol, p.potential};
  return KernelProblem{p.kernel, p.potential};
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

Outcome spectrum_command(const RunConfig& c) {
  const auto computed = compute_spectrum(c);
  const auto& s = computed.spectrum;
  Outcome o;
  Table t{"spectrum", {"n", "lambda", "residual"}, {}};
  for (std::size_t n = 1; n <= s.size(); ++n)
    t.add({static_cast<long long>(n), s(n), s.residuals[n - 1]});
  o.tables.push_back(std::move(t));
  o.result = {{"solver", s.solver},
              {"iterations", s.iterations},
              {"seed", s.seed},
              {"converged", s.converged},
              {"ceiling", std::isfinite(computed.ceiling) ? json(computed.ceiling) : json("inf")}};
  return o;
}

struct FitData {
  FitResult fit;
  Envelope envelope;
  double target = 0.0;
};

FitData fit_data(const RunConfig& c, const Loaded& l) {
  FitData f;
  const FitWindow w = window_for(c, l);
  f.fit = fit_exponent(l.spectrum, w);
  f.target = target_exponent(c);
  f.envelope = calibrate_constants(l.spectrum, f.target, w);
  return f;
}

Outcome fit_command(Context& ctx) {
  Outcome o;
  const auto l = load_spectrum(ctx, o.inputs);
  const auto f = fit_data(ctx.config(), l);
  Table t{"fit",
          {"first", "last", "points", "slope", "intercept", "standard_error", "target", "tolerance",
           "delta_low", "delta_up"},
          {}};
  t.add({static_cast<long long>(f.fit.window.first), static_cast<long long>(f.fit.window.last),
         static_cast<long long>(f.fit.points), f.fit.slope, f.fit.intercept, f.fit.standard_error,
         f.target, ctx.config().fit.tolerance, f.envelope.delta_low, f.envelope.delta_up});
  o.tables.push_back(std::move(t));
  return o;
}

Outcome bounds_command(Context& ctx) {
  Outcome o;
  const auto l = load_spectrum(ctx, o.inputs);
  const auto curves = build_curves(ctx.config(), l);
  Table t{"bounds", {"source", "direction", "n", "value"}, {}};
  for (const auto& curve : curves)
    for (std::size_t n = 1; n <= l.spectrum.size(); ++n) {
      if (static_cast<double>(n) < curve.min_n) continue;
      t.add({std::string(to_string(curve.source)), std::string(is_lower(curve.source) ? "lower" : "upper"),
             static_cast<long long>(n), curve(static_cast<double>(n))});
    }
  const auto report = compare_bounds(l.spectrum, curves);
  Table v{"violations", {"source", "direction", "n", "bound", "lambda"}, {}};
  for (const auto& x : report.violations)
    v.add({x.source, std::string(x.lower ? "lower" : "upper"), static_cast<long long>(x.n), x.bound, x.lambda});
  o.tables.push_back(std::move(t));
  o.tables.push_back(std::move(v));
  o.result = {{"checked", report.checked}, {"violations", report.violations.size()}};
  for (const auto& curve : curves) o.result["constants"][std::string(to_string(curve.source))] =
      canonical_constants(curve);
  return o;
}

Outcome ritz_command(Context& ctx) {
  const auto& c = ctx.config();
  Outcome o;
  const RitzProblem problem = ritz_problem(c.problem);
  const double theta = problem_theta(c.problem), alpha = problem_alpha(c.problem);
  const int d = c.problem.dimension;
  Table values{"ritz", {"basis_n", "j", "mu"}, {}};
  Table scaling{"ritz_scaling", {"basis_n", "mu_max"}, {}};
  std::vector<double> ns, tops, last;
  for (int n : c.ritz.n_list) {
    const auto basis = build_basis(n, d, theta, alpha);
    const auto mu = ritz_values(form_matrix(basis, problem, {.tol = c.ritz.tol}), basis.norms);
    for (std::size_t j = 0; j < mu.size(); ++j)
      values.add({static_cast<long long>(n), static_cast<long long>(j + 1), mu[j]});
    scaling.add({static_cast<long long>(n), mu.back()});
    ns.push_back(n);
    tops.push_back(mu.back());
    last = mu;
  }
  const double target = theta * alpha / (theta + alpha);
  o.result["route"] = form_route(problem, d);
  o.result["target_slope"] = target;
  if (ns.size() >= 2) o.result["slope"] = loglog_slope(ns, tops);

  const auto l = load_spectrum(ctx, o.inputs);
  const std::size_t m = std::min({static_cast<std::size_t>(c.ritz.compare), l.spectrum.size(), last.size()});
  Table dom{"domination", {"j", "mu", "lambda", "dominates"}, {}};
  std::size_t failures = 0;
  for (std::size_t j = 1; j <= m; ++j) {
    const bool ok = last[j - 1] >= l.spectrum(j) * (1.0 - c.ritz.allowance);
    failures += ok ? 0 : 1;
    dom.add({static_cast<long long>(j), last[j - 1], l.spectrum(j), std::string(ok ? "yes" : "no")});
  }
  o.result["domination_checked"] = m;
  o.result["domination_failures"] = failures;
  o.tables.push_back(std::move(values));
  o.tables.push_back(std::move(scaling));
  o.tables.push_back(std::move(dom));
  return o;
}

Outcome report_command(Context& ctx) {
  const auto& c = ctx.config();
  Outcome o;
  const auto fit = ctx.table("fit", "fit", o.inputs).at(0);
  const auto violations = ctx.table("bounds", "violations", o.inputs);
  std::string ritz_note;
  std::vector<std::map<std::string, std::string>> domination;
  std::optional<double> ritz_slope;
  double ritz_target = 0.0;
  try {
    (void)form_route(ritz_problem(c.problem), c.problem.dimension);
    domination = ctx.table("ritz", "domination", o.inputs);
    const auto r = ctx.run("ritz", false, false);
    const json m = json::parse(read_file(r.directory / "manifest.json"));
    if (m["result"].contains("slope")) ritz_slope = m["result"]["slope"].get<double>();
    ritz_target = m["result"]["target_slope"].get<double>();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnsupportedDimension) throw;
    ritz_note = e.what();
  }

  Table checks{"checks", {"check", "value", "target", "tolerance", "pass"}, {}};
  bool all = true;
  auto add = [&](const std::string& name, double value, double target, double tol, bool pass) {
    all = all && pass;
    checks.add({name, value, target, tol, std::string(pass ? "yes" : "no")});
  };
  const double slope = parse_double(fit.at("slope")), target = parse_double(fit.at("target"));
  add("fit_slope", slope, target, c.fit.tolerance, std::abs(slope - target) <= c.fit.tolerance);
  std::map<std::string, long long> by_source;
  for (const auto& v : violations) ++by_source[v.at("source")];
  for (const auto& name : c.bounds.curves)
    if (name == "heat_trace") {
      const long long count = by_source["heat_trace_lower"];
      add("heat_trace_ordering", static_cast<double>(count), 0.0, 0.0, count == 0);
    }
  if (ritz_note.empty()) {
    long long failures = 0;
    for (const auto& d : domination) failures += d.at("dominates") == "yes" ? 0 : 1;
    add("ritz_domination", static_cast<double>(failures), 0.0, 0.0, failures == 0);
    if (ritz_slope && c.ritz.n_list.size() >= 4)
      add("ritz_slope", *ritz_slope, ritz_target, 0.10, std::abs(*ritz_slope - ritz_target) <= 0.10);
  }

  std::ostringstream text;
  text << "nlspec report\n\n"
       << "fit window [" << fit.at("first") << ", " << fit.at("last") << "], " << fit.at("points")
       << " points: slope " << fit.at("slope") << " +- " << fit.at("standard_error") << " (target "
       << fit.at("target") << ")\n"
       << "calibrated envelope: delta_low " << fit.at("delta_low") << ", delta_up " << fit.at("delta_up")
       << "\n\nbound ordering\n";
  for (const auto& name : c.bounds.curves) text << "  " << name << '\n';
  text << "  violations: " << violations.size() << '\n';
  for (const auto& [source, count] : by_source) text << "    " << source << ": " << count << '\n';
  text << "\nRitz domination\n";
  if (!ritz_note.empty()) {
    text << "  skipped: " << ritz_note << '\n';
  } else {
    for (const auto& d : domination)
      text << "  j=" << d.at("j") << " mu=" << d.at("mu") << " lambda=" << d.at("lambda") << ' '
           << d.at("dominates") << '\n';
    if (ritz_slope) text << "  scaling slope " << format_double(*ritz_slope) << " (target " << format_double(ritz_target) << ")\n";
  }
  text << "\nchecks\n";
  for (const auto& row : checks.rows)
    text << "  " << cell_text(row[0]) << ": " << cell_text(row[1]) << " (target " << cell_text(row[2])
         << ", tolerance " << cell_text(row[3]) << ") " << (cell_text(row[4]) == "yes" ? "pass" : "FAIL") << '\n';
  o.text_name = "report.txt";
  o.text = text.str();
  o.tables.push_back(std::move(checks));
  o.result["all_checks_pass"] = all;
  o.exit_code = all ? 0 : 3;
  return o;
}

Outcome Context::compute(const std::string& command, bool check) {
  if (command == "spectrum") return spectrum_command(config_);
  if (command == "fit") return fit_command(*this);
  if (command == "bounds") return bounds_command(*this);
  if (command == "ritz") return ritz_command(*this);
  (void)check;
  return report_command(*this);
}

}  // namespace

ComputedSpectrum compute_spectrum(const RunConfig& c) {
  const auto& p = c.problem;
  const BoxGrid grid{p.dimension, c.grid.L, c.grid.N};
  validate(grid);
  std::string route = c.grid.discretization;
  std::optional<Symbol> symbol;
  if (p.form == "symbol") {
    if (route == "stiffness") fail(ErrorCode::ConfigParse, "grid.discretization: symbols need the multiplier route");
    symbol = p.symbol;
    route = "multiplier";
  } else {
    const auto* st = std::get_if<LevyStable>(&p.kernel);
    const bool full = st && std::isinf(st->kappa);
    if (route == "auto") route = full ? "multiplier" : "stiffness";
    if (route == "multiplier") {
      if (!full)
        fail(ErrorCode::ConfigParse,
             "grid.discretization: the multiplier route needs a full-range stable kernel");
      symbol = equivalent_symbol(*st, p.dimension);
    }
  }

  const std::size_t dim = grid.size();
  if (static_cast<std::size_t>(c.solver.k) >= dim)
    fail(ErrorCode::ConfigParse, "solver.k must be below the grid dimension " + std::to_string(dim));

  std::optional<MultiplierOperator> op;
  std::optional<StiffnessMatrix> stiff;
  LinearAction action;
  ComputedSpectrum out;
  if (symbol) {
    op.emplace(grid, *symbol, p.potential);
    action = [&op](std::span<const double> x, std::span<double> y) { op->apply(x, y); };
    out.ceiling = op->spectral_ceiling();
  } else {
    stiff.emplace(assemble_stiffness(grid, p.kernel, p.potential));
    action = [&stiff](std::span<const double> x, std::span<double> y) { stiff->apply(x, y); };
    out.ceiling = kInfinity;
  }
  auto dense = [&] {
    return dense_lowest(op ? op->to_dense() : stiff->to_dense(), c.solver.k);
  };
  if (c.solver.method == "dense") {
    out.spectrum = dense();
  } else {
    out.spectrum = lanczos_lowest(action, dim,
                                  {.k = c.solver.k,
                                   .tol = c.solver.tol,
                                   .seed = c.solver.seed,
                                   .max_iter = c.solver.max_iter,
                                   .block_size = c.solver.block_size});
    if (!out.spectrum.converged && c.solver.method == "auto" && dim <= kDenseLimit) out.spectrum = dense();
    require_converged(out.spectrum);
  }
  out.spectrum.seed = c.solver.seed;
  return out;
}

CommandResult run_command(const std::string& command, RunConfig config, const RunOptions& options) {
  Context ctx(std::move(config), options);
  return ctx.run(command, options.force, options.check);
}

}  // namespace nlspec::cli
