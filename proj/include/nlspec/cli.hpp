#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nlspec/eigensolve.hpp"
#include "nlspec/operators.hpp"

namespace nlspec::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

struct ProblemConfig {
  int dimension = 1;
  /// "symbol" or "kernel".
  std::string form = "symbol";
  Symbol symbol = IsotropicStable{};
  JumpKernel kernel = LevyStable{};
  Potential potential = PowerPotential{};
};

struct GridConfig {
  double L = 1.0;
  int N = 8;
  /// "auto", "multiplier" or "stiffness".
  std::string discretization = "auto";
};

struct SolverConfig {
  int k = 10;
  double tol = 1e-9;
  std::uint64_t seed = 1;
  int max_iter = 0;
  int block_size = 1;
  /// "auto" (Lanczos, dense fallback up to 4096 rows), "lanczos" or "dense".
  std::string method = "auto";
};

struct BoundsConfig {
  /// Any of heat_trace, power, rate, log_corrected.
  std::vector<std::string> curves{"heat_trace"};
  /// Power-law constants; nullopt means calibrate on the fit window.
  std::optional<double> power_delta_low;
  std::optional<double> power_delta_up;
  double rate_delta1 = 1.0;
  double rate_delta2 = 1.0;
  /// Reference function exponent of the rate curve; nullopt: 1.05 d / 4.
  std::optional<double> reference_p;
  double range_kappa = 1.0;
  double log_delta = 0.0;
  double log_c_delta = 1.0;
};

struct RitzConfig {
  std::vector<int> n_list{4, 8, 16, 32};
  double tol = 1e-9;
  /// Ritz values compared with the computed spectrum, j = 1..compare.
  int compare = 10;
  /// Relative allowance of the domination test.
  double allowance = 1e-2;
};

struct FitConfig {
  /// nullopt: default window (drop the first 15% and the ceiling zone).
  std::optional<std::pair<std::size_t, std::size_t>> window;
  /// nullopt: theta alpha / (d (theta + alpha)).
  std::optional<double> target;
  double tolerance = 0.05;
};

struct OutputConfig {
  /// "csv" or "json".
  std::string format = "csv";
  std::string directory = "nlspec-out";
};

struct RunConfig {
  ProblemConfig problem;
  GridConfig grid;
  SolverConfig solver;
  BoundsConfig bounds;
  RitzConfig ritz;
  FitConfig fit;
  OutputConfig output;
};

/// INI text with sections [problem] [grid] [solver] [bounds] [ritz] [fit]
/// [output]. Throws ConfigParse naming the offending field (and line, when
/// the field is present).
RunConfig parse_config(const std::string& text);
/// A .json path is read as a run manifest and its embedded config is used.
RunConfig load_config(const std::filesystem::path& path);

/// Every computational parameter with defaults filled in, fixed key order,
/// shortest round-trip numbers. The output section is left out.
std::string canonical_config(const RunConfig& config);

std::string sha256_hex(const std::string& bytes);

/// theta alpha / (d (theta + alpha)) from the problem (alpha0 for
/// variable-order kernels, the lower exponent of a two-sided potential).
double weyl_target(const ProblemConfig& problem);

struct RunOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
  bool force = false;
  /// report only: exit 3 when a check fails.
  bool check = false;
  std::ostream* log = nullptr;
};

struct CommandResult {
  std::filesystem::path directory;
  std::string digest;
  bool cache_hit = false;
  int exit_code = 0;
};

/// "spectrum", "bounds", "ritz", "fit" or "report". Results land in
/// <out>/<command>-<digest prefix>/ next to a manifest.json; an intact
/// cached directory is reused unless options.force.
CommandResult run_command(const std::string& command, RunConfig config, const RunOptions& options);

/// Spectrum of the configured problem (no cache).
struct ComputedSpectrum {
  Spectrum spectrum;
  /// Largest multiplier sample, or +inf for stiffness discretizations.
  double ceiling = 0.0;
};
ComputedSpectrum compute_spectrum(const RunConfig& config);

/// 0 ok, 1 config error, 2 numerical failure.
int exit_code_for(const std::exception& error) noexcept;

}  // namespace nlspec::cli
