#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "starlat/harness.hpp"

using namespace starlat;

namespace {

int fail(const Error& e) {
  std::cerr << error_json(e).dump() << std::endl;
  switch (e.code()) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidParams: return 2;
    case ErrorCode::kIo: return 4;
    default: return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latency optimizer for STAR-RIS assisted edge AR systems"};
  app.require_subcommand(1);

  std::string config, out_dir;
  int workers = 0;
  std::uint64_t seed_offset = 0;

  CLI::App* run = app.add_subcommand("run", "Run a parameter sweep");
  run->add_option("--config", config, "JSON config")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--workers", workers, "Worker threads (default: STARLAT_WORKERS or 1)")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed-offset", seed_offset, "Added to every seed");

  CLI::App* oracle = app.add_subcommand("oracle", "Compare the optimizer with the grid oracle");
  oracle->add_option("--config", config, "JSON config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << error_json(Error(ErrorCode::kConfig, e.what())).dump() << std::endl;
    return 2;
  }

  try {
    const HarnessConfig cfg = load_config(config);
    if (*run) {
      RunOptions opts;
      opts.out_dir = out_dir;
      opts.workers = workers > 0 ? workers : default_workers();
      opts.seed_offset = seed_offset;
      const SweepResult res = run_sweep(cfg, opts);
      for (const auto& [scheme, rows] : res.summary["schemes"].items()) {
        for (const auto& row : rows) {
          if (row["feasible"].get<int>() == 0) {
            throw Error(ErrorCode::kInfeasible, "every run of " + scheme + " at value " +
                                                    row["value"].dump() + " is infeasible");
          }
        }
      }
      std::cout << "wrote " << res.cells.size() << " runs to " << out_dir << std::endl;
    } else {
      std::cout << oracle_check(cfg).dump(2) << std::endl;
    }
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    std::cerr << error_json(Error(ErrorCode::kInvalidParams, e.what())).dump() << std::endl;
    return 1;
  }
  return 0;
}
