#pragma once

#include "gpcal/data.hpp"
#include "gpcal/gpc.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

namespace gpcal {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ModelConfig {
  std::string kind = "quantile";  // quantile | svm | gaussian
  double tau = 0.5;
  double prior_sd = 100.0;
  double nu = 10.0;
  double sigma2 = 1.0;
  double prior_mean = 0.0;
  double prior_var = 1.0;
};

struct SyntheticConfig {
  std::string kind = "quantile";  // quantile | gaussian
  std::size_t n = 100;
  Vector theta = (Vector(2) << 2.0, 1.0).finished();
  double sigma2 = 1.0;
  double mean = 0.0;
};

struct DataConfig {
  std::string source = "synthetic";  // synthetic | csv
  SyntheticConfig synthetic;
  std::filesystem::path csv_path;
  CsvSchema schema;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::filesystem::path output = "report.json";
  std::string algorithm = "gpc-smc";  // gpc-smc | gpc-mcmc
  ModelConfig model;
  DataConfig data;
  GpcOptions gpc;

  /// Throws ConfigError on any inconsistent or out-of-range setting.
  void validate() const;
};

/// Parses a YAML document. Relative CSV paths resolve against base_dir. Unknown keys are errors.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

RunConfig load_config(const std::filesystem::path& path);

/// Synthetic data are drawn from rng; CSV data are read from disk.
Dataset build_dataset(const RunConfig& config, RandomStream& rng);

std::unique_ptr<PseudoPosteriorModel> build_model(const RunConfig& config, const Dataset& data);

}  // namespace gpcal
