// Command-line front end: solve | bench | order | compare, driven by flat
// key=value config files. See docs/CONFIG.md for the key list.

#include "psm/runner.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"proximal Shamanskii solvers for composite optimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  bool quiet = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)")
        ->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", seed, "seed override");
    cmd->add_flag("--quiet", quiet, "suppress progress output");
  };

  CLI::App* solve = app.add_subcommand("solve", "run one configured solve");
  CLI::App* bench =
      app.add_subcommand("bench", "stopping-rule study plus baselines");
  CLI::App* order =
      app.add_subcommand("order", "measured vs predicted convergence orders");
  CLI::App* compare =
      app.add_subcommand("compare", "lazy quasi-Newton vs proximal Newton vs baselines");
  for (CLI::App* cmd : {solve, bench, order, compare}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  psm::CliOverrides overrides;
  if (!out_dir.empty()) overrides.out_dir = out_dir;
  if (seed >= 0) overrides.seed = static_cast<std::uint64_t>(seed);
  overrides.quiet = quiet;

  if (solve->parsed()) return psm::cmd_solve(config_path, overrides);
  if (bench->parsed()) return psm::cmd_bench(config_path, overrides);
  if (order->parsed()) return psm::cmd_order(config_path, overrides);
  return psm::cmd_compare(config_path, overrides);
}
