#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "nlspec/cli.hpp"
#include "nlspec/error.hpp"
#include "nlspec/format.hpp"
#include "nlspec/rates.hpp"

namespace nlspec::cli {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

// Reads the ptree and remembers which keys were consumed, so leftovers can be
// reported as unknown.
class Reader {
 public:
  Reader(const std::string& text) {
    std::istringstream in(text);
    try {
      pt::read_ini(in, tree_);
    } catch (const pt::ini_parser_error& e) {
      fail(ErrorCode::ConfigParse, "line " + std::to_string(e.line()) + ": " + e.message());
    }
    std::istringstream scan(text);
    std::string line, section;
    for (int no = 1; std::getline(scan, line); ++no) {
      line = trim(line);
      if (line.empty() || line[0] == ';' || line[0] == '#') continue;
      if (line.front() == '[') {
        section = trim(line.substr(1, line.find(']') - 1));
        continue;
      }
      const auto eq = line.find('=');
      if (eq != std::string::npos) lines_[section + "." + trim(line.substr(0, eq))] = no;
    }
    for (const auto& [name, sub] : tree_) {
      if (sub.empty() && !sub.data().empty())
        fail(ErrorCode::ConfigParse, "key '" + name + "' must be inside a section");
      for (const auto& kv : sub) all_.insert(name + "." + kv.first);
    }
  }

  bool has(const std::string& key) const { return tree_.get_optional<std::string>(path(key)).has_value(); }

  std::optional<std::string> raw(const std::string& key) {
    const auto v = tree_.get_optional<std::string>(path(key));
    if (v) used_.insert(key);
    return v ? std::optional<std::string>(trim(*v)) : std::nullopt;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    return raw(key).value_or(fallback);
  }

  std::string choice(const std::string& key, const std::string& fallback,
                     std::initializer_list<const char*> allowed) {
    const std::string v = text(key, fallback);
    for (const char* a : allowed)
      if (v == a) return v;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    error(key, "expected one of {" + list + "}, got '" + v + "'");
  }

  double number(const std::string& key, std::optional<double> fallback) {
    const auto v = raw(key);
    if (!v) {
      if (fallback) return *fallback;
      fail(ErrorCode::ConfigParse, "missing field " + key);
    }
    return to_number(key, *v);
  }

  double number(const std::string& key) { return number(key, std::nullopt); }

  std::optional<double> optional_number(const std::string& key, const std::string& sentinel) {
    const auto v = raw(key);
    if (!v || *v == sentinel) return std::nullopt;
    return to_number(key, *v);
  }

  long long integer(const std::string& key, long long fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    long long out = 0;
    const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
    if (r.ec != std::errc() || r.ptr != v->data() + v->size())
      error(key, "expected an integer, got '" + *v + "'");
    return out;
  }

  double to_number(const std::string& key, const std::string& v) const {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || std::isnan(out))
      error(key, "expected a number, got '" + v + "'");
    return out;
  }

  [[noreturn]] void error(const std::string& key, const std::string& message) const {
    const auto it = lines_.find(key);
    const std::string where = it == lines_.end() ? "" : "line " + std::to_string(it->second) + ": ";
    fail(ErrorCode::ConfigParse, where + key + ": " + message);
  }

  void reject_unknown() const {
    for (const auto& key : all_)
      if (!used_.count(key)) error(key, "unknown or unused field");
  }

 private:
  static pt::ptree::path_type path(const std::string& key) { return pt::ptree::path_type(key, '.'); }

  pt::ptree tree_;
  std::map<std::string, int> lines_;
  std::set<std::string> all_;
  std::set<std::string> used_;
};

AnisotropicTerm parse_term(Reader& r, const std::string& text) {
  // weight : a_1, ..., a_d : beta
  const auto parts = split(text, ':');
  if (parts.size() != 3) r.error("problem.terms", "term '" + text + "' is not weight:exponents:outer");
  AnisotropicTerm t;
  t.weight = r.to_number("problem.terms", parts[0]);
  for (const auto& a : split(parts[1], ',')) t.inner_exponents.push_back(r.to_number("problem.terms", a));
  t.outer = r.to_number("problem.terms", parts[2]);
  return t;
}

template <class F>
void validated(Reader& r, const std::string& field, F&& check) {
  try {
    check();
  } catch (const Error& e) {
    r.error(field, e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  Reader r(text);
  RunConfig c;
  auto& p = c.problem;
  p.dimension = static_cast<int>(r.integer("problem.dimension", 1));
  if (p.dimension != 1 && p.dimension != 2) r.error("problem.dimension", "must be 1 or 2");
  p.form = r.choice("problem.form", "symbol", {"symbol", "kernel"});
  if (p.form == "symbol") {
    const std::string kind = r.choice("problem.symbol", "stable", {"stable", "anisotropic"});
    if (kind == "stable") {
      p.symbol = IsotropicStable{r.number("problem.alpha"), r.number("problem.coefficient", 1.0)};
    } else {
      AnisotropicSum sum;
      const auto terms = r.raw("problem.terms");
      if (!terms) fail(ErrorCode::ConfigParse, "missing field problem.terms");
      for (const auto& t : split(*terms, '|')) sum.terms.push_back(parse_term(r, t));
      p.symbol = sum;
    }
    validated(r, "problem.symbol", [&] { validate(p.symbol, p.dimension); });
  } else {
    const std::string kind = r.choice("problem.kernel", "stable", {"stable", "variable_order"});
    const double kappa = r.number("problem.kappa", kInfinity);
    if (kind == "stable") {
      p.kernel = LevyStable{r.number("problem.alpha"), kappa};
    } else {
      p.kernel = VariableOrder{r.number("problem.alpha0"), r.number("problem.beta1"),
                               r.number("problem.beta2", VariableOrder{}.beta2), kappa};
    }
    validated(r, "problem.kernel", [&] { validate(p.kernel); });
  }
  const std::string pot = r.choice("problem.potential", "power", {"power", "two_sided"});
  if (pot == "power") {
    p.potential = PowerPotential{r.number("problem.c", 1.0), r.number("problem.theta")};
  } else {
    TwoSidedPower t;
    t.c3 = r.number("problem.c3", 1.0);
    t.theta1 = r.number("problem.theta1");
    t.c4 = r.number("problem.c4", 1.0);
    t.theta2 = r.number("problem.theta2");
    t.crossover = r.number("problem.crossover", 1.0);
    p.potential = t;
  }
  validated(r, "problem.potential", [&] { validate(p.potential); });

  c.grid.L = r.number("grid.L");
  c.grid.N = static_cast<int>(r.integer("grid.N", 0));
  if (!r.has("grid.N")) fail(ErrorCode::ConfigParse, "missing field grid.N");
  c.grid.discretization = r.choice("grid.discretization", "auto", {"auto", "multiplier", "stiffness"});
  if (!(c.grid.L > 0.0) || !std::isfinite(c.grid.L)) r.error("grid.L", "must be positive and finite");
  if (c.grid.N < 4 || c.grid.N % 2) r.error("grid.N", "must be an even integer >= 4");

  c.solver.k = static_cast<int>(r.integer("solver.k", 10));
  c.solver.tol = r.number("solver.tol", 1e-9);
  const long long seed = r.integer("solver.seed", 1);
  if (seed < 0) r.error("solver.seed", "must be nonnegative");
  c.solver.seed = static_cast<std::uint64_t>(seed);
  c.solver.max_iter = static_cast<int>(r.integer("solver.max_iter", 0));
  c.solver.block_size = static_cast<int>(r.integer("solver.block_size", 1));
  c.solver.method = r.choice("solver.method", "auto", {"auto", "lanczos", "dense"});
  if (c.solver.k < 1) r.error("solver.k", "must be >= 1");
  if (!(c.solver.tol > 0.0)) r.error("solver.tol", "must be positive");
  if (c.solver.max_iter < 0) r.error("solver.max_iter", "must be >= 0");
  if (c.solver.block_size < 1) r.error("solver.block_size", "must be >= 1");

  if (const auto curves = r.raw("bounds.curves")) {
    c.bounds.curves.clear();
    for (const auto& name : split(*curves, ',')) {
      if (name.empty()) continue;
      if (name != "heat_trace" && name != "power" && name != "rate" && name != "log_corrected")
        r.error("bounds.curves", "unknown curve '" + name + "'");
      c.bounds.curves.push_back(name);
    }
  }
  c.bounds.power_delta_low = r.optional_number("bounds.power_delta_low", "calibrate");
  c.bounds.power_delta_up = r.optional_number("bounds.power_delta_up", "calibrate");
  c.bounds.rate_delta1 = r.number("bounds.rate_delta1", 1.0);
  c.bounds.rate_delta2 = r.number("bounds.rate_delta2", 1.0);
  c.bounds.reference_p = r.optional_number("bounds.reference_p", "auto");
  c.bounds.range_kappa = r.number("bounds.range_kappa", 1.0);
  c.bounds.log_delta = r.number("bounds.log_delta", 0.0);
  c.bounds.log_c_delta = r.number("bounds.log_c_delta", 1.0);

  if (const auto list = r.raw("ritz.n_list")) {
    c.ritz.n_list.clear();
    for (const auto& item : split(*list, ',')) {
      const double v = r.to_number("ritz.n_list", item);
      if (v < 1 || v != std::floor(v)) r.error("ritz.n_list", "entries must be positive integers");
      c.ritz.n_list.push_back(static_cast<int>(v));
    }
  }
  c.ritz.tol = r.number("ritz.tol", 1e-9);
  c.ritz.compare = static_cast<int>(r.integer("ritz.compare", 10));
  c.ritz.allowance = r.number("ritz.allowance", 1e-2);
  if (!std::is_sorted(c.ritz.n_list.begin(), c.ritz.n_list.end()) || c.ritz.n_list.empty())
    r.error("ritz.n_list", "must be a nonempty increasing list");

  if (const auto w = r.raw("fit.window"); w && *w != "auto") {
    const auto ends = split(*w, ',');
    if (ends.size() != 2) r.error("fit.window", "expected 'first, last' or 'auto'");
    const double a = r.to_number("fit.window", ends[0]), b = r.to_number("fit.window", ends[1]);
    if (a < 1 || b <= a || a != std::floor(a) || b != std::floor(b))
      r.error("fit.window", "expected integers 1 <= first < last");
    c.fit.window = std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  }
  c.fit.target = r.optional_number("fit.target", "auto");
  c.fit.tolerance = r.number("fit.tolerance", 0.05);

  c.output.format = r.choice("output.format", "csv", {"csv", "json"});
  c.output.directory = r.text("output.directory", "nlspec-out");

  r.reject_unknown();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ConfigParse, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      const auto manifest = nlohmann::json::parse(buffer.str());
      return parse_config(manifest.at("config").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ConfigParse, path.string() + ": not a run manifest (" + e.what() + ")");
    }
  }
  return parse_config(buffer.str());
}

std::string canonical_config(const RunConfig& c) {
  std::ostringstream s;
  auto num = [](double v) { return format_double(v); };
  const auto& p = c.problem;
  s << "[problem]\n"
    << "dimension = " << p.dimension << '\n'
    << "form = " << p.form << '\n';
  if (p.form == "symbol") {
    if (const auto* iso = std::get_if<IsotropicStable>(&p.symbol)) {
      s << "symbol = stable\nalpha = " << num(iso->alpha) << "\ncoefficient = " << num(iso->coefficient) << '\n';
    } else {
      s << "symbol = anisotropic\nterms = ";
      const auto& terms = std::get<AnisotropicSum>(p.symbol).terms;
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) s << " | ";
        s << num(terms[i].weight) << ':';
        for (std::size_t j = 0; j < terms[i].inner_exponents.size(); ++j)
          s << (j ? "," : "") << num(terms[i].inner_exponents[j]);
        s << ':' << num(terms[i].outer);
      }
      s << '\n';
    }
  } else if (const auto* st = std::get_if<LevyStable>(&p.kernel)) {
    s << "kernel = stable\nalpha = " << num(st->alpha) << "\nkappa = " << num(st->kappa) << '\n';
  } else {
    const auto& vo = std::get<VariableOrder>(p.kernel);
    s << "kernel = variable_order\nalpha0 = " << num(vo.alpha0) << "\nbeta1 = " << num(vo.beta1)
      << "\nbeta2 = " << num(vo.beta2) << "\nkappa = " << num(vo.kappa) << '\n';
  }
  if (const auto* pw = std::get_if<PowerPotential>(&p.potential)) {
    s << "potential = power\nc = " << num(pw->c) << "\ntheta = " << num(pw->theta) << '\n';
  } else {
    const auto& t = std::get<TwoSidedPower>(p.potential);
    s << "potential = two_sided\nc3 = " << num(t.c3) << "\ntheta1 = " << num(t.theta1)
      << "\nc4 = " << num(t.c4) << "\ntheta2 = " << num(t.theta2) << "\ncrossover = " << num(t.crossover)
      << '\n';
  }
  s << "\n[grid]\nL = " << num(c.grid.L) << "\nN = " << c.grid.N
    << "\ndiscretization = " << c.grid.discretization << '\n';
  s << "\n[solver]\nk = " << c.solver.k << "\ntol = " << num(c.solver.tol) << "\nseed = " << c.solver.seed
    << "\nmax_iter = " << c.solver.max_iter << "\nblock_size = " << c.solver.block_size
    << "\nmethod = " << c.solver.method << '\n';
  auto opt = [&](const std::optional<double>& v, const char* sentinel) {
    return v ? num(*v) : std::string(sentinel);
  };
  s << "\n[bounds]\ncurves = ";
  for (std::size_t i = 0; i < c.bounds.curves.size(); ++i) s << (i ? ", " : "") << c.bounds.curves[i];
  s << "\npower_delta_low = " << opt(c.bounds.power_delta_low, "calibrate")
    << "\npower_delta_up = " << opt(c.bounds.power_delta_up, "calibrate")
    << "\nrate_delta1 = " << num(c.bounds.rate_delta1) << "\nrate_delta2 = " << num(c.bounds.rate_delta2)
    << "\nreference_p = " << opt(c.bounds.reference_p, "auto")
    << "\nrange_kappa = " << num(c.bounds.range_kappa) << "\nlog_delta = " << num(c.bounds.log_delta)
    << "\nlog_c_delta = " << num(c.bounds.log_c_delta) << '\n';
  s << "\n[ritz]\nn_list = ";
  for (std::size_t i = 0; i < c.ritz.n_list.size(); ++i) s << (i ? ", " : "") << c.ritz.n_list[i];
  s << "\ntol = " << num(c.ritz.tol) << "\ncompare = " << c.ritz.compare
    << "\nallowance = " << num(c.ritz.allowance) << '\n';
  s << "\n[fit]\nwindow = ";
  if (c.fit.window)
    s << c.fit.window->first << ", " << c.fit.window->second;
  else
    s << "auto";
  s << "\ntarget = " << opt(c.fit.target, "auto") << "\ntolerance = " << num(c.fit.tolerance) << '\n';
  return s.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::InvalidArgument, "SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

double weyl_target(const ProblemConfig& p) {
  double alpha = 0.0;
  if (p.form == "symbol") {
    if (const auto* iso = std::get_if<IsotropicStable>(&p.symbol))
      alpha = iso->alpha;
    else
      fail(ErrorCode::ConfigParse, "fit.target must be given for anisotropic symbols");
  } else if (const auto* st = std::get_if<LevyStable>(&p.kernel)) {
    alpha = st->alpha;
  } else {
    alpha = std::get<VariableOrder>(p.kernel).alpha0;
  }
  const double theta = std::holds_alternative<PowerPotential>(p.potential)
                           ? std::get<PowerPotential>(p.potential).theta
                           : std::get<TwoSidedPower>(p.potential).theta1;
  return weyl_exponent(p.dimension, theta, alpha);
}

int exit_code_for(const std::exception& error) noexcept {
  if (const auto* e = dynamic_cast<const Error*>(&error))
    return e->code() == ErrorCode::ConfigParse ? 1 : 2;
  return 2;
}

}  // namespace nlspec::cli
