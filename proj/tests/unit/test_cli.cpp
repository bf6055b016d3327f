#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nlspec/cli.hpp"
#include "nlspec/error.hpp"
#include "nlspec/parallel.hpp"

using namespace nlspec;
using namespace nlspec::cli;
namespace fs = std::filesystem;

namespace {

const char* kOscillator = R"(# fractional oscillator
[problem]
alpha = 1
theta = 2

[grid]
L = 16
N = 1024

[solver]
k = 80

[bounds]
curves = heat_trace, power

[ritz]
n_list = 4, 8, 16, 32

[fit]
window = 20, 80
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nlspec-cli-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ErrorCode parse_error(const std::string& text, std::string* message = nullptr) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected a parse error");
  return ErrorCode::InvalidArgument;
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("config parsing and canonical form") {
  const auto c = parse_config(kOscillator);
  CHECK(c.problem.dimension == 1);
  CHECK(std::get<IsotropicStable>(c.problem.symbol).alpha == 1.0);
  CHECK(std::get<PowerPotential>(c.problem.potential).theta == 2.0);
  CHECK(c.grid.N == 1024);
  CHECK(c.solver.k == 80);
  CHECK(c.solver.tol == 1e-9);
  CHECK(c.fit.window->first == 20);
  CHECK(c.ritz.n_list == std::vector<int>{4, 8, 16, 32});
  CHECK(weyl_target(c.problem) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  // Canonical text is a fixed point and ignores layout.
  const std::string canon = canonical_config(c);
  CHECK(canonical_config(parse_config(canon)) == canon);
  const std::string relaid = replace(replace(kOscillator, "alpha = 1", "alpha=1.0"), "N = 1024", "N    =  1024 ");
  CHECK(canonical_config(parse_config(relaid)) == canon);
  CHECK(canon.find("[output]") == std::string::npos);

  const auto k = parse_config(
      "[problem]\nform = kernel\nkernel = variable_order\nalpha0 = 1\nbeta1 = 0.5\nkappa = 8\n"
      "potential = two_sided\ntheta1 = 1\ntheta2 = 2\n[grid]\nL = 10\nN = 64\n");
  CHECK(std::get<VariableOrder>(k.problem.kernel).kappa == 8.0);
  CHECK(canonical_config(parse_config(canonical_config(k))) == canonical_config(k));

  const auto a = parse_config(
      "[problem]\ndimension = 2\nsymbol = anisotropic\nterms = 1:1,1:1 | 0.5:1.5,0.5:1\ntheta = 2\n"
      "[grid]\nL = 4\nN = 16\n[fit]\ntarget = 0.25\n");
  CHECK(std::get<AnisotropicSum>(a.problem.symbol).terms.size() == 2);
  CHECK(canonical_config(parse_config(canonical_config(a))) == canonical_config(a));
}

TEST_CASE("config errors name the field") {
  std::string message;
  CHECK(parse_error(replace(kOscillator, "theta = 2\n", ""), &message) == ErrorCode::ConfigParse);
  CHECK(message.find("problem.theta") != std::string::npos);

  CHECK(parse_error(replace(kOscillator, "alpha = 1", "alpha = one"), &message) == ErrorCode::ConfigParse);
  CHECK(message.find("line 3") != std::string::npos);
  CHECK(message.find("problem.alpha") != std::string::npos);

  CHECK(parse_error(replace(kOscillator, "k = 80", "k = 80\nk_max = 3"), &message) == ErrorCode::ConfigParse);
  CHECK(message.find("solver.k_max") != std::string::npos);

  CHECK(parse_error(replace(kOscillator, "alpha = 1", "alpha = 2.5"), &message) == ErrorCode::ConfigParse);
  CHECK(message.find("problem.symbol") != std::string::npos);

  CHECK(parse_error(replace(kOscillator, "N = 1024", "N = 1023")) == ErrorCode::ConfigParse);
  CHECK(parse_error(replace(kOscillator, "window = 20, 80", "window = 80, 20")) == ErrorCode::ConfigParse);
  CHECK(parse_error("[problem\nalpha = 1\n") == ErrorCode::ConfigParse);
  CHECK(parse_error(replace(kOscillator, "[grid]", "[grid]\ndiscretization = fem")) == ErrorCode::ConfigParse);
}

TEST_CASE("spectrum command is idempotent and reproducible from its manifest") {
  const fs::path out = scratch("idem");
  const auto config = parse_config(kOscillator);
  RunOptions options{.out = out};
  const auto first = run_command("spectrum", config, options);
  CHECK_FALSE(first.cache_hit);
  const std::string csv = slurp(first.directory / "spectrum.csv");
  const std::string manifest = slurp(first.directory / "manifest.json");
  CHECK(csv.rfind("n,lambda,residual\n1,", 0) == 0);

  const auto second = run_command("spectrum", config, options);
  CHECK(second.cache_hit);
  CHECK(second.directory == first.directory);
  CHECK(slurp(second.directory / "spectrum.csv") == csv);
  CHECK(slurp(second.directory / "manifest.json") == manifest);

  const auto m = nlohmann::json::parse(manifest);
  CHECK(m["schema_version"] == kSchemaVersion);
  CHECK(m["tool_version"] == kToolVersion);
  CHECK(m["digest"] == first.digest);

  // A manifest alone is enough to rerun.
  const auto again = run_command("spectrum", load_config(first.directory / "manifest.json"),
                                 {.out = scratch("repro")});
  CHECK_FALSE(again.cache_hit);
  CHECK(slurp(again.directory / "spectrum.csv") == csv);

  // --force recomputes into the same place with the same bytes.
  auto forced = options;
  forced.force = true;
  const auto third = run_command("spectrum", config, forced);
  CHECK_FALSE(third.cache_hit);
  CHECK(slurp(third.directory / "spectrum.csv") == csv);

  // A damaged entry is detected and rebuilt.
  std::ofstream(first.directory / "spectrum.csv") << "damaged\n";
  std::ostringstream log;
  auto logged = options;
  logged.log = &log;
  const auto repaired = run_command("spectrum", config, logged);
  CHECK_FALSE(repaired.cache_hit);
  CHECK(log.str().find("CacheCorrupt") != std::string::npos);
  CHECK(slurp(repaired.directory / "spectrum.csv") == csv);
  fs::remove_all(out);
  fs::remove_all(again.directory.parent_path());
}

TEST_CASE("overrides, formats and thread independence") {
  const fs::path out = scratch("over");
  const auto config = parse_config(kOscillator);
  const auto base = run_command("spectrum", config, {.out = out});
  const auto seeded = run_command("spectrum", config, {.out = out, .seed = 7});
  CHECK(seeded.digest != base.digest);
  const auto m = nlohmann::json::parse(slurp(seeded.directory / "manifest.json"));
  CHECK(m["result"]["seed"] == 7);

  const auto as_json = run_command("spectrum", config, {.out = out, .format = std::string("json")});
  const auto rows = nlohmann::json::parse(slurp(as_json.directory / "spectrum.json"));
  CHECK(rows.size() == 80);
  CHECK(rows[0]["n"] == 1);
  CHECK(rows[0]["lambda"].is_number_float());

  set_thread_count(2);
  const auto threaded = run_command("spectrum", config, {.out = scratch("threads")});
  set_thread_count(1);
  CHECK(slurp(threaded.directory / "spectrum.csv") == slurp(base.directory / "spectrum.csv"));
  fs::remove_all(out);
  fs::remove_all(threaded.directory.parent_path());
}

TEST_CASE("report on the fractional oscillator") {
  const fs::path out = scratch("report");
  const auto config = parse_config(kOscillator);
  const auto r = run_command("report", config, {.out = out, .check = true});
  CHECK(r.exit_code == 0);
  const std::string text = slurp(r.directory / "report.txt");
  CHECK(text.find("slope") != std::string::npos);
  CHECK(text.find("heat_trace_lower: 0") != std::string::npos);
  CHECK(text.find("Ritz domination") != std::string::npos);
  CHECK(text.find("FAIL") == std::string::npos);
  const std::string checks = slurp(r.directory / "checks.csv");
  CHECK(checks.rfind("check,value,target,tolerance,pass\nfit_slope,", 0) == 0);

  // Without --check a failing report still exits 0; with it, 3.
  auto strict = config;
  strict.fit.target = 1.0;
  strict.fit.tolerance = 0.01;
  CHECK(run_command("report", strict, {.out = out}).exit_code == 0);
  CHECK(run_command("report", strict, {.out = out, .check = true}).exit_code == 3);
  fs::remove_all(out);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(Error(ErrorCode::ConfigParse, "x")) == 1);
  CHECK(exit_code_for(Error(ErrorCode::NoConvergence, "x")) == 2);
  CHECK(exit_code_for(std::runtime_error("x")) == 2);

  auto big = parse_config(kOscillator);
  big.grid.N = 8192;
  big.solver.method = "dense";
  try {
    run_command("spectrum", big, {.out = scratch("big")});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionTooLarge);
    CHECK(exit_code_for(e) == 2);
  }
  auto many = parse_config(kOscillator);
  many.solver.k = 1024;
  CHECK_THROWS_AS(run_command("spectrum", many, {.out = scratch("many")}), Error);
}
