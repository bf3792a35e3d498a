#include "gpcal/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gpcal {

namespace {

Json number(double value) {
  if (std::isfinite(value)) {
    return value;
  }
  return nullptr;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  if (std::isinf(value)) {
    return value > 0 ? "inf" : "-inf";
  }
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return {buffer, result.ptr};
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (const double x : v) {
    out.push_back(number(x));
  }
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.push_back(to_json(Vector(m.row(r).transpose())));
  }
  return out;
}

Json to_json(const CredibleSet& set) {
  Json out;
  out["shape"] = set.shape == CredibleShape::Box ? "box" : "ellipsoid";
  out["center"] = to_json(set.center);
  if (set.shape == CredibleShape::Box) {
    out["lower"] = to_json(set.lower);
    out["upper"] = to_json(set.upper);
  } else {
    out["radius2"] = number(set.radius2);
    out["chol_prec"] = to_json(set.chol_prec);
  }
  return out;
}

Json to_json(const NumericHealth& health) {
  Json out;
  out["checks"] = health.checks;
  out["nonfinite_weights"] = health.nonfinite_weights;
  out["nonfinite_ess"] = health.nonfinite_ess;
  out["nonfinite_targets"] = health.nonfinite_targets;
  out["violations"] = health.violations();
  return out;
}

Json to_json(const AsmcDiagnostics& diag) {
  Json out;
  Json ladder = Json::array();
  for (const auto& step : diag.ladder) {
    Json row;
    row["eta"] = number(step.eta);
    row["ess"] = number(step.ess);
    row["resampled"] = step.resampled;
    row["accept_rate"] = number(step.accept_rate);
    row["log_zeta"] = number(step.log_zeta);
    row["fallback"] = step.fallback;
    ladder.push_back(row);
  }
  out["steps"] = diag.ladder.size();
  out["resample_count"] = diag.resample_count;
  out["fallback_count"] = diag.fallback_count;
  out["log_normalizer_ratio"] = number(diag.log_normalizer_ratio);
  out["health"] = to_json(diag.health);
  out["ladder"] = ladder;
  return out;
}

Json config_echo(const RunConfig& config) {
  Json out;
  out["seed"] = config.seed;
  out["threads"] = config.threads;
  out["output"] = config.output.string();
  out["algorithm"] = config.algorithm;

  Json model;
  model["kind"] = config.model.kind;
  if (config.model.kind == "quantile") {
    model["tau"] = config.model.tau;
    model["prior_sd"] = config.model.prior_sd;
  } else if (config.model.kind == "svm") {
    model["nu"] = config.model.nu;
  } else {
    model["sigma2"] = config.model.sigma2;
    model["prior_mean"] = config.model.prior_mean;
    model["prior_var"] = config.model.prior_var;
  }
  out["model"] = model;

  Json data;
  if (config.data.source == "synthetic") {
    const auto& syn = config.data.synthetic;
    Json s;
    s["kind"] = syn.kind;
    s["n"] = syn.n;
    if (syn.kind == "gaussian") {
      s["mean"] = syn.mean;
    } else {
      s["theta"] = to_json(syn.theta);
    }
    s["sigma2"] = syn.sigma2;
    data["synthetic"] = s;
  } else {
    Json c;
    c["path"] = config.data.csv_path.generic_string();
    c["label_column"] = config.data.schema.label_column;
    Json mapping = Json::object();
    for (const auto& [key, value] : config.data.schema.label_mapping) {
      mapping[key] = value;
    }
    c["label_mapping"] = mapping;
    c["predictor_columns"] = config.data.schema.predictor_columns;
    data["csv"] = c;
  }
  out["data"] = data;

  const GpcOptions& g = config.gpc;
  Json gpc;
  gpc["alpha"] = g.alpha;
  gpc["B"] = g.bootstrap;
  gpc["epsilon"] = g.epsilon;
  gpc["eta_init"] = g.eta_init;
  gpc["eta_min"] = g.eta_min;
  gpc["max_iters"] = g.max_iters;
  gpc["credible_set"] = g.shape == CredibleShape::Box ? "box" : "ellipsoid";
  out["gpc"] = gpc;

  Json smc;
  smc["M"] = g.smc.particles;
  smc["xi"] = g.smc.xi;
  smc["psi"] = g.smc.psi;
  smc["mutation_sweeps"] = g.smc.mutation_sweeps;
  smc["bisect_tol"] = g.smc.bisect_tol;
  smc["max_steps"] = g.smc.max_steps;
  smc["init_thin"] = g.init_thin;
  out["smc"] = smc;

  Json mcmc;
  mcmc["R"] = g.mcmc_draws;
  mcmc["warmup_fraction"] = g.warmup_fraction;
  out["mcmc"] = mcmc;
  return out;
}

Json calibration_json(const CalibrationReport& report, const RunConfig& config) {
  Json out;
  out["algorithm"] = report.algorithm;
  out["seed"] = config.seed;
  out["eta_hat"] = number(report.eta_hat);
  out["converged"] = report.converged;
  out["iterations"] = report.iterations;
  out["final_coverage"] = report.trajectory.empty() ? Json(nullptr) : number(report.trajectory.back().coverage);
  out["theta_hat"] = to_json(report.theta_hat);
  out["credible_set"] = to_json(report.full_data_set);

  Json trajectory = Json::array();
  for (const auto& rec : report.trajectory) {
    Json row;
    row["s"] = rec.s;
    row["eta"] = number(rec.eta);
    row["coverage"] = number(rec.coverage);
    row["ladder_full"] = rec.ladder_full;
    row["ladder_min"] = rec.ladder_min;
    row["ladder_mean"] = number(rec.ladder_mean);
    row["ladder_max"] = rec.ladder_max;
    trajectory.push_back(row);
  }
  out["trajectory"] = trajectory;

  Json diagnostics;
  diagnostics["total_ladder_steps"] = report.total_ladder_steps;
  diagnostics["resample_count"] = report.resample_count;
  diagnostics["fallback_count"] = report.fallback_count;
  diagnostics["mean_accept_rate"] = number(report.mean_accept_rate);
  diagnostics["health"] = to_json(report.health);
  out["diagnostics"] = diagnostics;
  out["config"] = config_echo(config);
  return out;
}

Json timing_json(const CalibrationReport& report) {
  Json out;
  out["wall_time_seconds"] = report.wall_time_seconds;
  Json per_iteration = Json::array();
  for (const auto& rec : report.trajectory) {
    per_iteration.push_back(rec.seconds);
  }
  out["iteration_seconds"] = per_iteration;
  return out;
}

std::string trajectory_csv(const CalibrationReport& report) {
  std::ostringstream out;
  out << "s,eta,coverage,ladder_full,ladder_min,ladder_mean,ladder_max\n";
  for (const auto& rec : report.trajectory) {
    out << rec.s << ',' << format_number(rec.eta) << ',' << format_number(rec.coverage) << ',' << rec.ladder_full
        << ',' << rec.ladder_min << ',' << format_number(rec.ladder_mean) << ',' << rec.ladder_max << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw Error("write failed for " + path.string());
  }
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

std::filesystem::path sibling_path(const std::filesystem::path& path, const std::string& suffix) {
  std::filesystem::path out = path;
  out.replace_extension(suffix);
  return out;
}

}  // namespace gpcal
