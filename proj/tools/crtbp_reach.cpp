// crtbp-reach <scenario> --config <path> [--out <dir>] [--threads <n>] [--verbose]
//
// Exit codes: 0 success, 2 config error, 3 solver failure, 1 anything else.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "crtbp/config.hpp"
#include "crtbp/io.hpp"
#include "crtbp/run.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverError = 3;

int threads_from_env(int cli_threads) {
  const char* env = std::getenv("CRTBP_THREADS");
  if (!env || !*env) return cli_threads;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) throw crtbp::ConfigError("CRTBP_THREADS: expected an integer in [1, 1024]");
  return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar CRTBP reachability and transfer design"};
  std::string scenario, config_path, out_dir;
  int threads = 1;
  bool verbose = false;
  app.add_option("scenario", scenario, "simulate | lagrange | orbit | manifold | reach | transfer")->required();
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_dir, "output directory (default: config output_dir, else ./out)");
  app.add_option("--threads", threads, "worker threads for independent solves")->check(CLI::Range(1, 1024));
  app.add_flag("--verbose", verbose, "progress on stderr");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  crtbp::RunConfig cfg;
  crtbp::RunOptions ro;
  try {
    const crtbp::Scenario sc = crtbp::parse_scenario(scenario);
    std::string text;
    try {
      text = crtbp::io::read_file(config_path);
    } catch (const crtbp::io::IoError& e) {
      throw crtbp::ConfigError(std::string("--config: ") + e.what());
    }
    cfg = crtbp::validate_config(text, sc);
    ro.threads = threads_from_env(threads);
    ro.verbose = verbose;
  } catch (const crtbp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  const std::filesystem::path out = !out_dir.empty() ? out_dir : cfg.output_dir.value_or("out");

  try {
    const crtbp::RunManifest m = crtbp::run(cfg, out, ro);
    std::cout << "scenario " << crtbp::to_string(cfg.scenario) << ": " << m.files.size() << " files in "
              << out.string() << ", manifest " << m.manifest_hash << "\n";
    return 0;
  } catch (const crtbp::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
