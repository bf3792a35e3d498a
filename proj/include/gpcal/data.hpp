#pragma once

#include "gpcal/model.hpp"
#include "gpcal/random.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gpcal {

/// Linear DGP y = theta'(1, x1) + eps with x1 + 2 ~ chi^2_4 and eps ~ N(0, sigma2).
struct SyntheticSpec {
  std::size_t n = 100;
  Vector theta_true = Vector::Constant(2, 0.0);
  double sigma2 = 1.0;

  SyntheticSpec();
  void validate() const;
};

Dataset generate_synthetic(const SyntheticSpec& spec, RandomStream& rng);

/// y_i = mean + N(0, sigma2) with an intercept-only design, for the conjugate oracle.
Dataset generate_gaussian(std::size_t n, double mean, double sigma2, RandomStream& rng);

struct CsvSchema {
  std::string label_column;
  /// Source label text -> +-1. Empty means the label column is read as a numeric response.
  std::map<std::string, double> label_mapping;
  std::vector<std::string> predictor_columns;
  bool add_intercept = true;

  void validate() const;
};

class CsvError : public Error {
 public:
  using Error::Error;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Writes y and the non-intercept predictor columns with shortest round-trip decimals.
void save_csv(const Dataset& data, const std::filesystem::path& path, const std::string& label_column,
              const std::vector<std::string>& predictor_columns);

/// Gathers rows of y and X by index.
Dataset materialize_bootstrap(const Dataset& data, const std::vector<std::size_t>& indices);

}  // namespace gpcal
