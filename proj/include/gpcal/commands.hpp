#pragma once

#include "gpcal/report.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>

namespace gpcal {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2, kExitNotConverged = 3 };

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::filesystem::path> out;
};

void apply_overrides(RunConfig& config, const CliOverrides& overrides);

/// Streams for one run with seed s: data from RandomStream(s).derive(0), sampler from derive(1).
RandomStream data_stream(std::uint64_t seed);
RandomStream sampler_stream(std::uint64_t seed);

/// Dispatches on config.algorithm.
CalibrationReport run_calibration(const RunConfig& config, const PseudoPosteriorModel& model, const Dataset& data,
                                  RandomStream rng);

struct CoverageRow {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double eta_hat = 0.0;
  bool converged = false;
  bool covered = false;
  std::size_t iterations = 0;
};

struct CoverageSummary {
  std::vector<CoverageRow> rows;
  double coverage = 0.0;
  double median_eta = 0.0;
  std::size_t converged = 0;
};

/// Replicate r uses seed config.seed + r, so `calibrate --seed` reproduces any single row.
/// A replicate counts as covered when the generating parameter lies in the full-data credible
/// set at the calibrated learning rate.
CoverageSummary run_coverage(const RunConfig& config, std::size_t replicates,
                             const std::function<void(const CoverageRow&)>& on_row = {});

double median(std::vector<double> values);

std::string coverage_csv(const CoverageSummary& summary);

/// The three subcommands. Each loads the config, applies overrides, writes its outputs next to
/// the output path and returns an ExitCode. Messages go to `log`.
int cmd_calibrate(const std::filesystem::path& config_path, const CliOverrides& overrides, std::ostream& log);
int cmd_coverage(const std::filesystem::path& config_path, std::size_t replicates, const CliOverrides& overrides,
                 std::ostream& log);
int cmd_smc_run(const std::filesystem::path& config_path, double eta_from, double eta_to,
                const CliOverrides& overrides, std::ostream& log);

}  // namespace gpcal
