#include "gpcal/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace gpcal {

namespace {

void require_map(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) {
    throw ConfigError(where + ": expected a mapping");
  }
  for (const auto& entry : node) {
    const auto key = entry.first.as<std::string>();
    if (!allowed.contains(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <class T>
void read(const YAML::Node& node, const std::string& key, const std::string& where, T& out) {
  const YAML::Node value = node[key];
  if (!value) {
    return;
  }
  try {
    out = value.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": invalid value");
  }
}

void read_count(const YAML::Node& node, const std::string& key, const std::string& where, std::size_t& out) {
  const YAML::Node value = node[key];
  if (!value) {
    return;
  }
  long long parsed = 0;
  try {
    parsed = value.as<long long>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": expected an integer");
  }
  if (parsed < 0) {
    throw ConfigError(where + "." + key + ": must be non-negative");
  }
  out = static_cast<std::size_t>(parsed);
}

void parse_model(const YAML::Node& node, ModelConfig& model) {
  require_map(node, "model", {"kind", "tau", "prior_sd", "nu", "sigma2", "prior_mean", "prior_var"});
  read(node, "kind", "model", model.kind);
  read(node, "tau", "model", model.tau);
  read(node, "prior_sd", "model", model.prior_sd);
  read(node, "nu", "model", model.nu);
  read(node, "sigma2", "model", model.sigma2);
  read(node, "prior_mean", "model", model.prior_mean);
  read(node, "prior_var", "model", model.prior_var);
}

void parse_data(const YAML::Node& node, DataConfig& data, const std::filesystem::path& base_dir) {
  require_map(node, "data", {"synthetic", "csv"});
  if (node["synthetic"] && node["csv"]) {
    throw ConfigError("data: give either 'synthetic' or 'csv', not both");
  }
  if (const YAML::Node syn = node["synthetic"]) {
    data.source = "synthetic";
    require_map(syn, "data.synthetic", {"kind", "n", "theta", "sigma2", "mean"});
    read(syn, "kind", "data.synthetic", data.synthetic.kind);
    read_count(syn, "n", "data.synthetic", data.synthetic.n);
    read(syn, "sigma2", "data.synthetic", data.synthetic.sigma2);
    read(syn, "mean", "data.synthetic", data.synthetic.mean);
    if (syn["theta"]) {
      std::vector<double> theta;
      read(syn, "theta", "data.synthetic", theta);
      data.synthetic.theta = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    }
  }
  if (const YAML::Node csv = node["csv"]) {
    data.source = "csv";
    require_map(csv, "data.csv", {"path", "label_column", "label_mapping", "predictor_columns"});
    std::string path;
    read(csv, "path", "data.csv", path);
    if (path.empty()) {
      throw ConfigError("data.csv.path: required");
    }
    data.csv_path = std::filesystem::path(path);
    if (data.csv_path.is_relative() && !base_dir.empty()) {
      data.csv_path = base_dir / data.csv_path;
    }
    read(csv, "label_column", "data.csv", data.schema.label_column);
    read(csv, "predictor_columns", "data.csv", data.schema.predictor_columns);
    if (const YAML::Node mapping = csv["label_mapping"]) {
      if (!mapping.IsMap()) {
        throw ConfigError("data.csv.label_mapping: expected a mapping");
      }
      for (const auto& entry : mapping) {
        try {
          data.schema.label_mapping[entry.first.as<std::string>()] = entry.second.as<double>();
        } catch (const YAML::Exception&) {
          throw ConfigError("data.csv.label_mapping: invalid entry");
        }
      }
    }
  }
}

void parse_gpc(const YAML::Node& node, GpcOptions& gpc) {
  require_map(node, "gpc", {"alpha", "B", "epsilon", "eta_init", "eta_min", "max_iters", "credible_set"});
  read(node, "alpha", "gpc", gpc.alpha);
  read_count(node, "B", "gpc", gpc.bootstrap);
  read(node, "epsilon", "gpc", gpc.epsilon);
  read(node, "eta_init", "gpc", gpc.eta_init);
  read(node, "eta_min", "gpc", gpc.eta_min);
  read_count(node, "max_iters", "gpc", gpc.max_iters);
  std::string shape = "ellipsoid";
  read(node, "credible_set", "gpc", shape);
  if (shape == "ellipsoid") {
    gpc.shape = CredibleShape::Ellipsoid;
  } else if (shape == "box") {
    gpc.shape = CredibleShape::Box;
  } else {
    throw ConfigError("gpc.credible_set: expected 'ellipsoid' or 'box'");
  }
}

void parse_smc(const YAML::Node& node, GpcOptions& gpc) {
  require_map(node, "smc", {"M", "xi", "psi", "mutation_sweeps", "bisect_tol", "max_steps", "init_thin"});
  read_count(node, "M", "smc", gpc.smc.particles);
  read(node, "xi", "smc", gpc.smc.xi);
  read(node, "psi", "smc", gpc.smc.psi);
  read_count(node, "mutation_sweeps", "smc", gpc.smc.mutation_sweeps);
  read(node, "bisect_tol", "smc", gpc.smc.bisect_tol);
  read_count(node, "max_steps", "smc", gpc.smc.max_steps);
  read_count(node, "init_thin", "smc", gpc.init_thin);
}

void parse_mcmc(const YAML::Node& node, GpcOptions& gpc) {
  require_map(node, "mcmc", {"R", "warmup_fraction"});
  read_count(node, "R", "mcmc", gpc.mcmc_draws);
  read(node, "warmup_fraction", "mcmc", gpc.warmup_fraction);
}

}  // namespace

void RunConfig::validate() const {
  if (model.kind != "quantile" && model.kind != "svm" && model.kind != "gaussian") {
    throw ConfigError("model.kind: expected quantile, svm or gaussian");
  }
  if (algorithm != "gpc-smc" && algorithm != "gpc-mcmc") {
    throw ConfigError("algorithm: expected gpc-smc or gpc-mcmc");
  }
  if (!(model.tau > 0.0 && model.tau < 1.0)) {
    throw ConfigError("model.tau: must lie in (0, 1)");
  }
  if (!(model.prior_sd > 0.0) || !(model.nu > 0.0) || !(model.sigma2 > 0.0) || !(model.prior_var > 0.0)) {
    throw ConfigError("model: scale parameters must be positive");
  }
  if (data.source == "synthetic") {
    const auto& syn = data.synthetic;
    if (syn.kind != "quantile" && syn.kind != "gaussian") {
      throw ConfigError("data.synthetic.kind: expected quantile or gaussian");
    }
    if (syn.n < 1) {
      throw ConfigError("data.synthetic.n: must be at least 1");
    }
    if (syn.sigma2 < 0.0) {
      throw ConfigError("data.synthetic.sigma2: must be non-negative");
    }
    if (syn.kind == "quantile" && syn.theta.size() != 2) {
      throw ConfigError("data.synthetic.theta: expected two entries");
    }
    if ((syn.kind == "gaussian") != (model.kind == "gaussian")) {
      throw ConfigError("data.synthetic.kind does not match model.kind");
    }
    if (model.kind == "svm") {
      throw ConfigError("model.kind svm needs csv data");
    }
  } else {
    try {
      data.schema.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("data.csv: ") + e.what());
    }
    if ((model.kind == "svm") != !data.schema.label_mapping.empty()) {
      throw ConfigError("data.csv.label_mapping: required for svm and only for svm");
    }
  }
  try {
    gpc.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig config;
  if (!root || root.IsNull()) {
    config.validate();
    return config;
  }
  require_map(root, "config", {"seed", "threads", "output", "algorithm", "model", "data", "gpc", "smc", "mcmc"});
  read(root, "seed", "config", config.seed);
  read_count(root, "threads", "config", config.threads);
  std::string output;
  read(root, "output", "config", output);
  if (!output.empty()) {
    config.output = output;
  }
  read(root, "algorithm", "config", config.algorithm);
  if (root["model"]) {
    parse_model(root["model"], config.model);
  }
  if (root["data"]) {
    parse_data(root["data"], config.data, base_dir);
  }
  if (root["gpc"]) {
    parse_gpc(root["gpc"], config.gpc);
  }
  if (root["smc"]) {
    parse_smc(root["smc"], config.gpc);
  }
  if (root["mcmc"]) {
    parse_mcmc(root["mcmc"], config.gpc);
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

Dataset build_dataset(const RunConfig& config, RandomStream& rng) {
  if (config.data.source == "csv") {
    return load_csv(config.data.csv_path, config.data.schema);
  }
  const auto& syn = config.data.synthetic;
  if (syn.kind == "gaussian") {
    return generate_gaussian(syn.n, syn.mean, syn.sigma2, rng);
  }
  SyntheticSpec spec;
  spec.n = syn.n;
  spec.theta_true = syn.theta;
  spec.sigma2 = syn.sigma2;
  return generate_synthetic(spec, rng);
}

std::unique_ptr<PseudoPosteriorModel> build_model(const RunConfig& config, const Dataset& data) {
  const auto& m = config.model;
  if (m.kind == "svm") {
    return std::make_unique<SvmModel>(SvmModel::from_data(data, m.nu));
  }
  if (m.kind == "gaussian") {
    return std::make_unique<GaussianConjugateModel>(m.sigma2, m.prior_mean, m.prior_var);
  }
  return std::make_unique<QuantileRegressionModel>(data.dim(), m.tau, m.prior_sd);
}

}  // namespace gpcal
