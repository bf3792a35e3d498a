#include "gpcal/data.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

using namespace gpcal;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

const std::filesystem::path kFixtures = GPCAL_FIXTURE_DIR;

CsvSchema two_row_schema() {
  CsvSchema schema;
  schema.label_column = "label";
  schema.label_mapping = {{"0", -1.0}, {"1", 1.0}};
  schema.predictor_columns = {"x1", "x2"};
  return schema;
}

}  // namespace

TEST_CASE("chi-square design has the right moments") {
  RandomStream rng(31, 0);
  SyntheticSpec spec;
  spec.n = 100000;
  const Dataset data = generate_synthetic(spec, rng);
  const Vector x1 = data.X().col(1);
  const double mean = x1.mean();
  const double var = (x1.array() - mean).square().mean();
  CHECK(std::abs(mean - 2.0) < 0.05);
  CHECK(std::abs(var - 8.0) / 8.0 < 0.05);
  CHECK((data.X().col(0).array() == 1.0).all());
}

TEST_CASE("noiseless design is exactly linear") {
  RandomStream rng(32, 0);
  SyntheticSpec spec;
  spec.n = 50;
  spec.sigma2 = 0.0;
  const Dataset data = generate_synthetic(spec, rng);
  CHECK((data.y() - data.X() * spec.theta_true).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic generation is bit reproducible") {
  SyntheticSpec spec;
  spec.n = 200;
  RandomStream a(33, 1);
  RandomStream b(33, 1);
  const Dataset da = generate_synthetic(spec, a);
  const Dataset db = generate_synthetic(spec, b);
  CHECK(da.y() == db.y());
  CHECK(da.X() == db.X());
}

TEST_CASE("conditional median of y is the linear predictor") {
  // Symmetric noise: about half of the responses fall below theta'x in every x-bin.
  RandomStream rng(34, 0);
  SyntheticSpec spec;
  spec.n = 40000;
  const Dataset data = generate_synthetic(spec, rng);
  const Vector fit = data.X() * spec.theta_true;
  for (const auto& [lo, hi] : std::vector<std::pair<double, double>>{{-2.0, 0.0}, {0.0, 2.0}, {2.0, 6.0}, {6.0, 40.0}}) {
    int below = 0;
    int total = 0;
    for (Eigen::Index i = 0; i < data.y().size(); ++i) {
      const double x = data.X()(i, 1);
      if (x >= lo && x < hi) {
        ++total;
        below += data.y()[i] < fit[i] ? 1 : 0;
      }
    }
    REQUIRE(total > 1000);
    CHECK(std::abs(static_cast<double>(below) / total - 0.5) < 4.0 * 0.5 / std::sqrt(total));
  }
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.n = 0;
  CHECK_THROWS(spec.validate());
  spec.n = 10;
  spec.sigma2 = -1.0;
  CHECK_THROWS(spec.validate());
  spec.sigma2 = 1.0;
  spec.theta_true = Vector::Zero(3);
  CHECK_THROWS(spec.validate());
}

TEST_CASE("two-row fixture with a binary label map") {
  const Dataset data = load_csv(kFixtures / "two_rows.csv", two_row_schema());
  REQUIRE(data.size() == 2);
  REQUIRE(data.dim() == 3);
  CHECK(data.y()[0] == -1.0);
  CHECK(data.y()[1] == 1.0);
  CHECK(data.X()(0, 0) == 1.0);
  CHECK(data.X()(1, 1) == -1.5);
  CHECK(data.X()(0, 2) == 2.25);
  CHECK(data.classification());
}

TEST_CASE("csv error paths") {
  CsvSchema missing = two_row_schema();
  missing.predictor_columns = {"x1", "nope"};
  CHECK_THROWS_WITH(load_csv(kFixtures / "two_rows.csv", missing), ContainsSubstring("schema mismatch"));

  CsvSchema simple;
  simple.label_column = "label";
  simple.label_mapping = {{"0", -1.0}, {"1", 1.0}};
  simple.predictor_columns = {"x1"};
  CHECK_THROWS_WITH(load_csv(kFixtures / "bad_label.csv", simple), ContainsSubstring("label domain error"));
  CHECK_THROWS_WITH(load_csv(kFixtures / "bad_number.csv", simple),
                    ContainsSubstring("parse error at row 3") && ContainsSubstring("x1"));
  CHECK_THROWS_WITH(load_csv(kFixtures / "missing_cell.csv", simple), ContainsSubstring("parse error"));
  CHECK_THROWS(load_csv(kFixtures / "does_not_exist.csv", simple));

  CsvSchema bad_map = simple;
  bad_map.label_mapping = {{"0", 1.0}, {"1", 1.0}};
  CHECK_THROWS(load_csv(kFixtures / "two_rows.csv", bad_map));
}

TEST_CASE("save then load round-trips the data") {
  RandomStream rng(35, 0);
  SyntheticSpec spec;
  spec.n = 300;
  const Dataset data = generate_synthetic(spec, rng);
  const auto path = std::filesystem::temp_directory_path() / "gpcal_roundtrip.csv";
  save_csv(data, path, "y", {"x1"});
  CsvSchema schema;
  schema.label_column = "y";
  schema.predictor_columns = {"x1"};
  const Dataset back = load_csv(path, schema);
  std::filesystem::remove(path);
  REQUIRE(back.size() == data.size());
  CHECK((back.y() - data.y()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.X() - data.X()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("bootstrap materialization") {
  RandomStream rng(36, 0);
  SyntheticSpec spec;
  spec.n = 20;
  const Dataset data = generate_synthetic(spec, rng);
  std::vector<std::size_t> identity(20);
  for (std::size_t i = 0; i < 20; ++i) {
    identity[i] = i;
  }
  const Dataset same = materialize_bootstrap(data, identity);
  CHECK(same.y() == data.y());
  CHECK(same.X() == data.X());

  const Dataset zeros = materialize_bootstrap(data, std::vector<std::size_t>(20, 0));
  CHECK((zeros.y().array() == data.y()[0]).all());

  std::vector<std::size_t> perm = identity;
  std::reverse(perm.begin(), perm.end());
  const Dataset permuted = materialize_bootstrap(data, perm);
  std::vector<double> a(data.y().begin(), data.y().end());
  std::vector<double> b(permuted.y().begin(), permuted.y().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);

  CHECK_THROWS(materialize_bootstrap(data, std::vector<std::size_t>(20, 20)));
}
