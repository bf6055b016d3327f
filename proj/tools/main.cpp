#include <iostream>

#include <CLI11.hpp>

#include "nlspec/cli.hpp"
#include "nlspec/error.hpp"
#include "nlspec/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spectra of nonlocal Schroedinger-type operators"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out, format;
  long long seed = -1;
  int threads = 1;
  bool force = false, check = false;
  app.add_option("--config", config_path, "INI config, or a run manifest.json")->required();
  app.add_option("--out", out, "output directory (overrides [output] directory)");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", seed, "solver seed (overrides [solver] seed)")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--force", force, "recompute even when a cached result exists");
  for (const char* name : {"spectrum", "bounds", "ritz", "fit"}) app.add_subcommand(name);
  app.add_subcommand("report")->add_flag("--check", check, "exit 3 when an acceptance check fails");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    nlspec::set_thread_count(threads);
    nlspec::cli::RunOptions options;
    if (!out.empty()) options.out = out;
    if (!format.empty()) options.format = format;
    if (seed >= 0) options.seed = static_cast<std::uint64_t>(seed);
    options.force = force;
    options.check = check;
    options.log = &std::cerr;
    const auto config = nlspec::cli::load_config(config_path);
    const auto result =
        nlspec::cli::run_command(app.get_subcommands().front()->get_name(), config, options);
    std::cout << result.directory.string() << '\n';
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return nlspec::cli::exit_code_for(e);
  }
}
