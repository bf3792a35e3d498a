#include "gpcal/data.hpp"
#include "gpcal/gpc.hpp"

#include <catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <set>

using namespace gpcal;
using Catch::Approx;

namespace {

ParticleMatrix normal_cloud(Eigen::Index m, Eigen::Index k, RandomStream& rng) {
  ParticleMatrix p(m, k);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      p(i, j) = rng.normal();
    }
  }
  return p;
}

Vector uniform(Eigen::Index m) { return Vector::Constant(m, 1.0 / static_cast<double>(m)); }

CalibrationState step_through(const std::vector<double>& chats, CalibrationState state = {}) {
  for (const double c : chats) {
    state = sa_update(state, c, 0.05);
  }
  return state;
}

}  // namespace

TEST_CASE("credible radius of a standard normal cloud is the chi-square quantile") {
  RandomStream rng(61, 0);
  const ParticleMatrix p = normal_cloud(100000, 2, rng);
  const CredibleSet set = credible_set(p, uniform(p.rows()), 0.05);
  const double expected = boost::math::quantile(boost::math::chi_squared(2.0), 0.95);
  CHECK(expected == Approx(5.99).margin(0.01));
  CHECK(std::abs(set.radius2 - expected) < 0.15);
  CHECK(membership(set, set.center));
}

TEST_CASE("degenerate and concentrated clouds") {
  const ParticleMatrix same = ParticleMatrix::Constant(10, 2, 1.5);
  const CredibleSet point = credible_set(same, uniform(10), 0.05);
  CHECK(point.radius2 == 0.0);
  CHECK(membership(point, Vector::Constant(2, 1.5)));
  CHECK_FALSE(membership(point, Vector::Constant(2, 1.5 + 1e-9)));

  RandomStream rng(62, 0);
  ParticleMatrix p = normal_cloud(20, 2, rng);
  Vector w = Vector::Constant(20, 1e-300);
  w[7] = 1.0;
  w /= w.sum();
  const CredibleSet set = credible_set(p, w, 0.05);
  CHECK((set.center - p.row(7).transpose()).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS(credible_set(normal_cloud(2, 2, rng), uniform(2), 0.05));
  CHECK_THROWS(credible_set(p, uniform(20), 0.0));
}

TEST_CASE("collinear clouds are degenerate posteriors") {
  ParticleMatrix p(10, 2);
  for (Eigen::Index i = 0; i < 10; ++i) {
    p(i, 0) = static_cast<double>(i);
    p(i, 1) = std::nan("");
  }
  CHECK_THROWS(credible_set(p, uniform(10), 0.05));
}

TEST_CASE("membership boundary is inclusive") {
  CredibleSet set;
  set.center = Vector::Zero(2);
  set.chol_prec = Matrix::Identity(2, 2);
  set.radius2 = 4.0;
  Vector theta(2);
  theta << 2.0, 0.0;
  CHECK(membership(set, theta));
  theta << 2.0, 1e-6;
  CHECK_FALSE(membership(set, theta));
  set.radius2 = 0.0;
  CHECK_FALSE(membership(set, theta));
  CHECK(membership(set, set.center));
}

TEST_CASE("membership is invariant under affine reparameterization") {
  RandomStream rng(63, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const ParticleMatrix p = normal_cloud(400, 3, rng);
    Vector w(400);
    for (auto& v : w) {
      v = rng.uniform();
    }
    w /= w.sum();
    Matrix a(3, 3);
    for (auto& v : a.reshaped()) {
      v = rng.normal();
    }
    a += 3.0 * Matrix::Identity(3, 3);
    Vector b(3);
    for (auto& v : b) {
      v = 5.0 * rng.normal();
    }
    const ParticleMatrix q = (p * a.transpose()).rowwise() + b.transpose();
    const CredibleSet s1 = credible_set(p, w, 0.1);
    const CredibleSet s2 = credible_set(q, w, 0.1);
    CHECK(s1.radius2 == Approx(s2.radius2).epsilon(1e-8));
    for (int k = 0; k < 50; ++k) {
      Vector theta(3);
      for (auto& v : theta) {
        v = 2.0 * rng.normal();
      }
      const Vector mapped = a * theta + b;
      const double d1 = s1.mahalanobis2(theta);
      const double d2 = s2.mahalanobis2(mapped);
      CHECK(d1 == Approx(d2).epsilon(1e-8));
      if (std::abs(d1 - s1.radius2) > 1e-6) {
        CHECK(membership(s1, theta) == membership(s2, mapped));
      }
    }
  }
}

TEST_CASE("box credible sets use equal-tailed intervals") {
  RandomStream rng(64, 0);
  const ParticleMatrix p = normal_cloud(100000, 2, rng);
  const CredibleSet box = credible_set(p, uniform(p.rows()), 0.05, CredibleShape::Box);
  CHECK(std::abs(box.lower[0] + 1.96) < 0.05);
  CHECK(std::abs(box.upper[1] - 1.96) < 0.05);
  CHECK(membership(box, Vector::Zero(2)));
  CHECK_FALSE(membership(box, Vector::Constant(2, 2.5)));
}

TEST_CASE("coverage estimate examples") {
  CHECK(coverage_estimate({true, true, false, true}) == 0.75);
  CHECK(coverage_estimate(std::vector<bool>(9, true)) == 1.0);
  CHECK(coverage_estimate(std::vector<bool>(9, false)) == 0.0);
  CHECK_THROWS(coverage_estimate({}));
  RandomStream rng(65, 0);
  std::vector<bool> flags(777);
  int hits = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    flags[i] = rng.uniform() < 0.3;
    hits += flags[i] ? 1 : 0;
  }
  CHECK(coverage_estimate(flags) == static_cast<double>(hits) / 777.0);
}

TEST_CASE("bootstrap indices") {
  RandomStream rng(66, 0);
  for (const auto& row : bootstrap_indices(1, 5, rng)) {
    CHECK(row == std::vector<std::size_t>{0});
  }
  const auto rows = bootstrap_indices(100, 500, rng);
  REQUIRE(rows.size() == 500);
  double distinct = 0.0;
  for (const auto& row : rows) {
    REQUIRE(row.size() == 100);
    distinct += static_cast<double>(std::set<std::size_t>(row.begin(), row.end()).size()) / 100.0;
    for (const auto i : row) {
      REQUIRE(i < 100);
    }
  }
  CHECK(std::abs(distinct / 500.0 - (1.0 - std::exp(-1.0))) < 0.05);

  RandomStream a(67, 3);
  RandomStream b(67, 3);
  CHECK(bootstrap_indices(50, 20, a) == bootstrap_indices(50, 20, b));
  CHECK_THROWS(bootstrap_indices(0, 3, a));
  CHECK_THROWS(bootstrap_indices(3, 0, a));
}

TEST_CASE("stochastic approximation examples") {
  CalibrationState s;
  const CalibrationState same = sa_update(s, 0.95, 0.05);
  CHECK(same.eta == 1.0);
  CHECK(same.s == 2);

  const CalibrationState down = sa_update(s, 0.90, 0.05);
  CHECK(down.eta == Approx(0.95).epsilon(1e-15));
  CHECK(down.l == 1);
  CHECK(down.last_direction == -1);

  const CalibrationState flip = step_through({0.90, 0.99});
  CHECK(flip.l == 2);
  CHECK(flip.eta == Approx(0.95 + std::pow(2.0, -0.51) * 0.04));
}

TEST_CASE("Kesten counter branches") {
  SECTION("no change at the target level") {
    const CalibrationState s = step_through({0.90, 0.95, 0.95});
    CHECK(s.l == 1);
    CHECK(s.eta == Approx(0.95));
    CHECK(s.last_direction == -1);
    CHECK(s.s == 4);
  }
  SECTION("l frozen while the coverage estimate is one") {
    const CalibrationState s = step_through({0.90, 1.0, 1.0, 1.0});
    CHECK(s.l == 1);
    CHECK(s.last_direction == 1);
    CHECK(s.eta == Approx(1.0 - 0.05 + 3 * 0.05));
  }
  SECTION("l increments on each sign flip below one") {
    const CalibrationState s = step_through({0.90, 1.0, 0.90, 0.99, 0.99, 0.90});
    // flips: 1.0 (frozen), 0.90 (l=2), 0.99 (l=3), 0.99 (same), 0.90 (l=4)
    CHECK(s.l == 4);
  }
  SECTION("same-direction steps never increment") {
    const CalibrationState s = step_through({0.5, 0.6, 0.7, 0.8});
    CHECK(s.l == 1);
  }
  SECTION("clamp at eta_min does not count as a reversal") {
    CalibrationState s;
    s.eta = 0.01;
    s = sa_update(s, 0.5, 0.05);
    CHECK(s.eta == 1e-6);
    CHECK(s.last_direction == -1);
    s = sa_update(s, 0.5, 0.05);
    CHECK(s.eta == 1e-6);
    CHECK(s.l == 1);
    s = sa_update(s, 0.99, 0.05);
    CHECK(s.l == 2);
  }
}

TEST_CASE("stochastic approximation direction and counter properties") {
  RandomStream rng(68, 0);
  CalibrationState s;
  std::size_t previous_l = s.l;
  for (int i = 0; i < 2000; ++i) {
    const double c = std::floor(rng.uniform() * 101.0) / 100.0;
    const CalibrationState next = sa_update(s, c, 0.05);
    if (c < 0.95 && s.eta > 1e-6 + 1e-12) {
      CHECK(next.eta < s.eta);
    }
    if (c > 0.95) {
      CHECK(next.eta > s.eta);
    }
    CHECK(next.l >= previous_l);
    CHECK(next.l <= previous_l + 1);
    CHECK(next.l <= next.s);
    CHECK(next.eta > 0.0);
    previous_l = next.l;
    s = next;
  }
}

namespace {

GpcOptions small_options() {
  GpcOptions o;
  o.bootstrap = 40;
  o.mcmc_draws = 1000;
  o.smc.particles = 200;
  o.init_thin = 5;
  return o;
}

}  // namespace

TEST_CASE("a loose tolerance stops after one iteration") {
  RandomStream data_rng(69, 0);
  SyntheticSpec spec;
  spec.n = 60;
  const Dataset data = generate_synthetic(spec, data_rng);
  const QuantileRegressionModel model(2);
  GpcOptions o = small_options();
  o.epsilon = 0.5;
  o.eta_init = 1.3;
  for (const bool smc : {false, true}) {
    const CalibrationReport r =
        smc ? gpc_smc(model, data, o, RandomStream(69, 1)) : gpc_mcmc(model, data, o, RandomStream(69, 1));
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK(r.eta_hat == 1.3);
    REQUIRE(r.trajectory.size() == 1);
    CHECK(std::abs(r.trajectory[0].coverage - 0.95) < 0.5);
  }
}

TEST_CASE("the iteration cap reports non-convergence") {
  RandomStream data_rng(70, 0);
  SyntheticSpec spec;
  spec.n = 60;
  const Dataset data = generate_synthetic(spec, data_rng);
  const QuantileRegressionModel model(2);
  GpcOptions o = small_options();
  o.bootstrap = 30;  // 0.95 is not a multiple of 1/30
  o.epsilon = 1e-9;
  o.max_iters = 3;
  const CalibrationReport r = gpc_smc(model, data, o, RandomStream(70, 1));
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 3);
  CHECK(r.trajectory.size() == 3);
  CHECK(r.eta_hat == r.trajectory.back().eta);
  CHECK(r.health.violations() == 0);
  CHECK(r.health.checks > 0);
}

TEST_CASE("invalid calibration options are rejected") {
  GpcOptions o;
  o.bootstrap = 0;
  CHECK_THROWS(o.validate());
  o = GpcOptions{};
  o.epsilon = 0.0;
  CHECK_THROWS(o.validate());
  o = GpcOptions{};
  o.eta_init = -1.0;
  CHECK_THROWS(o.validate());
  o = GpcOptions{};
  o.alpha = 1.0;
  CHECK_THROWS(o.validate());
  CHECK(GpcOptions{}.mcmc_warmup() == 20000);
}

TEST_CASE("results do not depend on the worker count") {
  RandomStream data_rng(71, 0);
  SyntheticSpec spec;
  spec.n = 50;
  const Dataset data = generate_synthetic(spec, data_rng);
  const QuantileRegressionModel model(2);
  GpcOptions o = small_options();
  o.max_iters = 4;
  o.threads = 1;
  const CalibrationReport one = gpc_smc(model, data, o, RandomStream(71, 1));
  o.threads = 3;
  const CalibrationReport three = gpc_smc(model, data, o, RandomStream(71, 1));
  REQUIRE(one.trajectory.size() == three.trajectory.size());
  for (std::size_t i = 0; i < one.trajectory.size(); ++i) {
    CHECK(one.trajectory[i].eta == three.trajectory[i].eta);
    CHECK(one.trajectory[i].coverage == three.trajectory[i].coverage);
  }
  CHECK(one.theta_hat == three.theta_hat);
}

TEST_CASE("well-specified conjugate model calibrates near one") {
  const GaussianConjugateModel model(1.0, 0.0, 100.0);
  std::vector<double> etas;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RandomStream data_rng(72 + seed, 0);
    const Dataset data = generate_gaussian(50, 1.5, 1.0, data_rng);
    GpcOptions o;
    o.bootstrap = 200;
    o.mcmc_draws = 2000;
    const CalibrationReport r = gpc_mcmc(model, data, o, RandomStream(72 + seed, 1));
    etas.push_back(r.eta_hat);
  }
  std::sort(etas.begin(), etas.end());
  CHECK(std::abs(etas[1] - 1.0) <= 0.35);
}
