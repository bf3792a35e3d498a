#include "gpcal/commands.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

namespace gpcal {

void apply_overrides(RunConfig& config, const CliOverrides& overrides) {
  if (overrides.seed) {
    config.seed = *overrides.seed;
  }
  if (overrides.threads) {
    config.threads = *overrides.threads;
  }
  if (overrides.out) {
    config.output = *overrides.out;
  }
  config.gpc.threads = config.threads;
}

RandomStream data_stream(std::uint64_t seed) { return RandomStream(seed, 0).derive(0); }

RandomStream sampler_stream(std::uint64_t seed) { return RandomStream(seed, 0).derive(1); }

CalibrationReport run_calibration(const RunConfig& config, const PseudoPosteriorModel& model, const Dataset& data,
                                  RandomStream rng) {
  GpcOptions options = config.gpc;
  options.threads = config.threads;
  if (config.algorithm == "gpc-mcmc") {
    return gpc_mcmc(model, data, options, rng);
  }
  return gpc_smc(model, data, options, rng);
}

double median(std::vector<double> values) {
  if (values.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

CoverageSummary run_coverage(const RunConfig& config, std::size_t replicates,
                             const std::function<void(const CoverageRow&)>& on_row) {
  if (config.data.source != "synthetic") {
    throw ConfigError("coverage needs synthetic data");
  }
  if (replicates < 1) {
    throw ConfigError("coverage: replicates must be at least 1");
  }
  Vector truth = config.data.synthetic.theta;
  if (config.data.synthetic.kind == "gaussian") {
    truth = Vector::Constant(1, config.data.synthetic.mean);
  }
  CoverageSummary summary;
  std::vector<double> etas;
  std::size_t covered = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    CoverageRow row;
    row.replicate = r;
    row.seed = config.seed + r;
    RandomStream data_rng = data_stream(row.seed);
    const Dataset data = build_dataset(config, data_rng);
    const auto model = build_model(config, data);
    const CalibrationReport report = run_calibration(config, *model, data, sampler_stream(row.seed));
    row.eta_hat = report.eta_hat;
    row.converged = report.converged;
    row.covered = membership(report.full_data_set, truth);
    row.iterations = report.iterations;
    covered += row.covered ? 1 : 0;
    summary.converged += row.converged ? 1 : 0;
    etas.push_back(row.eta_hat);
    summary.rows.push_back(row);
    if (on_row) {
      on_row(row);
    }
  }
  summary.coverage = static_cast<double>(covered) / static_cast<double>(replicates);
  summary.median_eta = median(etas);
  return summary;
}

std::string coverage_csv(const CoverageSummary& summary) {
  std::ostringstream out;
  out << "replicate,seed,eta_hat,converged,covered,iterations\n";
  for (const auto& row : summary.rows) {
    out << row.replicate << ',' << row.seed << ',' << format_number(row.eta_hat) << ',' << (row.converged ? 1 : 0)
        << ',' << (row.covered ? 1 : 0) << ',' << row.iterations << '\n';
  }
  out << "summary,coverage_percent=" << format_number(100.0 * summary.coverage)
      << ",median_eta_hat=" << format_number(summary.median_eta) << ",converged=" << summary.converged << ",,\n";
  return out.str();
}

namespace {

template <class Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

RunConfig prepare(const std::filesystem::path& config_path, const CliOverrides& overrides) {
  RunConfig config = load_config(config_path);
  apply_overrides(config, overrides);
  config.validate();
  return config;
}

}  // namespace

int cmd_calibrate(const std::filesystem::path& config_path, const CliOverrides& overrides, std::ostream& log) {
  return guarded(log, [&] {
    RunConfig config = prepare(config_path, overrides);
    RandomStream data_rng = data_stream(config.seed);
    const Dataset data = build_dataset(config, data_rng);
    const auto model = build_model(config, data);
    config.gpc.on_iteration = [&log](const IterationRecord& rec) {
      log << "s=" << rec.s << " eta=" << format_number(rec.eta) << " coverage=" << format_number(rec.coverage)
          << '\n';
    };
    const CalibrationReport report = run_calibration(config, *model, data, sampler_stream(config.seed));
    write_json(config.output, calibration_json(report, config));
    write_text(sibling_path(config.output, ".trajectory.csv"), trajectory_csv(report));
    write_json(sibling_path(config.output, ".timing.json"), timing_json(report));
    log << "eta_hat=" << format_number(report.eta_hat) << " converged=" << (report.converged ? "true" : "false")
        << " iterations=" << report.iterations << '\n';
    return report.converged ? kExitOk : kExitNotConverged;
  });
}

int cmd_coverage(const std::filesystem::path& config_path, std::size_t replicates, const CliOverrides& overrides,
                 std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig config = prepare(config_path, overrides);
    const CoverageSummary summary = run_coverage(config, replicates, [&log](const CoverageRow& row) {
      log << "replicate " << row.replicate << " seed=" << row.seed << " eta_hat=" << format_number(row.eta_hat)
          << " covered=" << (row.covered ? 1 : 0) << '\n';
    });
    write_text(sibling_path(config.output, ".csv"), coverage_csv(summary));
    Json doc;
    doc["replicates"] = summary.rows.size();
    doc["coverage_percent"] = 100.0 * summary.coverage;
    doc["median_eta_hat"] = summary.median_eta;
    doc["converged"] = summary.converged;
    doc["config"] = config_echo(config);
    write_json(sibling_path(config.output, ".json"), doc);
    log << "coverage=" << format_number(100.0 * summary.coverage)
        << "% median_eta_hat=" << format_number(summary.median_eta) << '\n';
    return kExitOk;
  });
}

int cmd_smc_run(const std::filesystem::path& config_path, double eta_from, double eta_to,
                const CliOverrides& overrides, std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig config = prepare(config_path, overrides);
    if (!(eta_from > 0.0) || !(eta_to > 0.0)) {
      throw ConfigError("smc-run: --from and --to must be positive");
    }
    RandomStream data_rng = data_stream(config.seed);
    const Dataset data = build_dataset(config, data_rng);
    const auto model = build_model(config, data);
    RandomStream rng = sampler_stream(config.seed);
    RandomStream chain_rng = rng.derive(0);
    RandomStream smc_rng = rng.derive(1);

    const GpcOptions& g = config.gpc;
    ChainOptions chain_options;
    chain_options.draws = g.smc.particles;
    chain_options.thin = g.init_thin;
    chain_options.warmup = g.smc.particles * g.init_thin;
    chain_options.init = model->initial_point(data);
    const ChainResult chain = run_chain(*model, data, eta_from, chain_options, chain_rng);
    ParticleSystem system = initialize_particles_from_chain(chain.draws, *model, data, eta_from);
    const AsmcDiagnostics diag = asmc_star(system, eta_to, *model, data, g.smc, smc_rng);
    const WeightedMoments moments = weighted_mean_cov(system.particles, system.weights());

    Json doc;
    doc["seed"] = config.seed;
    doc["eta_from"] = eta_from;
    doc["eta_to"] = eta_to;
    doc["particles"] = system.size();
    doc["final_ess"] = system.ess();
    doc["weighted_mean"] = to_json(moments.mean);
    doc["weighted_cov"] = to_json(moments.cov);
    if (const auto* gauss = dynamic_cast<const GaussianConjugateModel*>(model.get())) {
      const ConjugateMoments exact = conjugate_posterior_moments(*gauss, data, eta_to);
      Json oracle;
      oracle["mean"] = exact.mean;
      oracle["var"] = exact.var;
      oracle["log_normalizer_ratio"] =
          conjugate_log_normalizer(*gauss, data, eta_to) - conjugate_log_normalizer(*gauss, data, eta_from);
      doc["conjugate_oracle"] = oracle;
    }
    doc["diagnostics"] = to_json(diag);
    doc["config"] = config_echo(config);
    write_json(config.output, doc);

    std::ostringstream csv;
    csv << "step,eta,ess,resampled,accept_rate,log_zeta\n";
    for (std::size_t i = 0; i < diag.ladder.size(); ++i) {
      const LadderStep& step = diag.ladder[i];
      csv << i + 1 << ',' << format_number(step.eta) << ',' << format_number(step.ess) << ','
          << (step.resampled ? 1 : 0) << ',' << format_number(step.accept_rate) << ','
          << format_number(step.log_zeta) << '\n';
    }
    write_text(sibling_path(config.output, ".ladder.csv"), csv.str());
    log << "ladder steps=" << diag.ladder.size() << " resamples=" << diag.resample_count << '\n';
    return kExitOk;
  });
}

}  // namespace gpcal
