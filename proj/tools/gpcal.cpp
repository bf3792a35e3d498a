#include "gpcal/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"gpcal: learning-rate calibration for generalized posteriors"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out;
  std::size_t replicates = 1;
  double eta_from = 1.0;
  double eta_to = 1.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "YAML run configuration")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads, 0 = one per core");
    sub->add_option("--out", out, "output report path");
  };

  CLI::App* calibrate = app.add_subcommand("calibrate", "calibrate eta on one dataset");
  add_common(calibrate);
  CLI::App* coverage = app.add_subcommand("coverage", "repeat calibration over synthetic replicates");
  add_common(coverage);
  coverage->add_option("--replicates", replicates, "number of synthetic datasets")->required();
  CLI::App* smc_run = app.add_subcommand("smc-run", "single adaptive SMC pass between two learning rates");
  add_common(smc_run);
  smc_run->add_option("--from", eta_from, "starting learning rate")->required();
  smc_run->add_option("--to", eta_to, "final learning rate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? gpcal::kExitOk : gpcal::kExitConfig;
  }

  gpcal::CliOverrides overrides;
  for (CLI::App* sub : {calibrate, coverage, smc_run}) {
    if (!sub->parsed()) {
      continue;
    }
    if (sub->count("--seed") > 0) {
      overrides.seed = seed;
    }
    if (sub->count("--threads") > 0) {
      overrides.threads = threads;
    }
    if (sub->count("--out") > 0) {
      overrides.out = out;
    }
  }

  if (calibrate->parsed()) {
    return gpcal::cmd_calibrate(config_path, overrides, std::cerr);
  }
  if (coverage->parsed()) {
    return gpcal::cmd_coverage(config_path, replicates, overrides, std::cerr);
  }
  return gpcal::cmd_smc_run(config_path, eta_from, eta_to, overrides, std::cerr);
}
