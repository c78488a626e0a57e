#include "erot/error.hpp"
#include "erot/resampling.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace erot;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ExperimentConfig small_config(std::uint64_t seed, int threads) {
  std::mt19937_64 gen(211);
  auto inst = testing::random_instance(4, 5, 0.5, gen);
  ExperimentConfig cfg(inst.r, inst.s, inst.model);
  cfg.lambda = inst.lambda;
  cfg.n = 300;
  cfg.replications = 64;
  cfg.seed = seed;
  cfg.threads = threads;
  return cfg;
}

}  // namespace

TEST_CASE("bootstrap of a point-mass sample is identically zero") {
  std::mt19937_64 gen(191);
  auto X = IndexedSpace::integers(0, 3);
  auto Y = IndexedSpace::integers(0, 3);
  auto model = testing::matrix_cost(testing::random_matrix(3, 3, gen), X, Y);
  const std::vector<int> sample(50, 1);
  DiscreteMeasure s(Y, testing::random_simplex(3, gen));
  for (double d : bootstrap_value(sample, X, s, model, 1.0, 20, 5)) CHECK(d == 0.0);
}

TEST_CASE("bootstrap draws are reproducible") {
  std::mt19937_64 gen(193);
  auto inst = testing::random_instance(4, 4, 0.5, gen);
  const std::vector<int> sample = sample_indices(inst.r.weights(), 200, gen);
  auto one = bootstrap_value(sample, inst.r.space(), inst.s, inst.model, 0.5, 1, 42);
  REQUIRE(one.size() == 1);
  CHECK(one == bootstrap_value(sample, inst.r.space(), inst.s, inst.model, 0.5, 1, 42));
  CHECK(bootstrap_value(sample, inst.r.space(), inst.s, inst.model, 0.5, 16, 42, {}, 1) ==
        bootstrap_value(sample, inst.r.space(), inst.s, inst.model, 0.5, 16, 42, {}, 4));
}

TEST_CASE("bootstrap of the constant functional is zero") {
  std::mt19937_64 gen(197);
  auto inst = testing::random_instance(4, 4, 0.5, gen);
  const std::vector<int> sample = sample_indices(inst.r.weights(), 200, gen);
  const Matrix ones = Matrix::Ones(4, 4);
  for (double d : bootstrap_plan_functional(sample, inst.r.space(), inst.s, inst.model, 0.5, ones, 20, 3))
    CHECK(std::abs(d) < 1e-9);
}

TEST_CASE("multinomial counts add up and follow the weights") {
  std::mt19937_64 gen(199);
  const Vector p = vec({0.1, 0.0, 0.6, 0.3});
  std::vector<long> totals(4, 0);
  for (int rep = 0; rep < 200; ++rep) {
    auto c = multinomial_counts(p, 1000, gen);
    long sum = 0;
    for (int k = 0; k < 4; ++k) {
      sum += c[k];
      totals[k] += c[k];
    }
    CHECK(sum == 1000);
    CHECK(c[1] == 0);
  }
  CHECK(totals[2] / 200000.0 == doctest::Approx(0.6).epsilon(0.01));
}

TEST_CASE("ks statistic examples") {
  std::vector<double> a{0.1, -0.4, 1.3, 2.0};
  CHECK(ks_statistic(a, a) == 0.0);

  std::mt19937_64 gen(223);
  std::normal_distribution<double> g;
  std::vector<double> z(10000);
  for (double& v : z) v = g(gen);
  CHECK(ks_statistic(z, [](double x) { return normal_cdf(x, 1.0); }) <= 0.02);

  const double c = 0.3, F = normal_cdf(c, 1.0);
  CHECK(ks_statistic(std::vector<double>(50, c), [](double x) { return normal_cdf(x, 1.0); }) ==
        doctest::Approx(std::max(F, 1 - F)).epsilon(1e-12));
}

TEST_CASE("experiments are reproducible across thread counts") {
  auto a = mc_clt_experiment(small_config(7, 1));
  auto b = mc_clt_experiment(small_config(7, 4));
  CHECK(a.standardized_draws == b.standardized_draws);
  CHECK(a.ks_distance == b.ks_distance);
  auto c = mc_clt_experiment(small_config(8, 1));
  CHECK(c.standardized_draws != a.standardized_draws);

  auto cfg = small_config(9, 1);
  cfg.statistic = Statistic::Bootstrap;
  auto cfg4 = small_config(9, 3);
  cfg4.statistic = Statistic::Bootstrap;
  CHECK(bootstrap_experiment(cfg).standardized_draws == bootstrap_experiment(cfg4).standardized_draws);
}

TEST_CASE("value CLT draws are centred on a small instance") {
  auto cfg = small_config(13, 0);
  cfg.n = 2000;
  cfg.replications = 1000;
  auto rep = mc_clt_experiment(cfg);
  CHECK(std::abs(rep.sample_mean) <= 3.0 * std::sqrt(rep.sample_var / rep.replications));
  CHECK(rep.ks_distance <= 0.06);
}

TEST_CASE("Sinkhorn cost variance matches simulation on a 5x5 instance") {
  std::mt19937_64 gen(227);
  auto inst = testing::random_instance(5, 5, 1.0, gen);
  ExperimentConfig cfg(inst.r, inst.s, inst.model);
  cfg.lambda = 1.0;
  cfg.n = 5000;
  cfg.replications = 2000;
  cfg.statistic = Statistic::SinkhornCostCLT;
  cfg.seed = 17;
  cfg.threads = 0;
  auto rep = mc_clt_experiment(cfg);
  CHECK(rep.sample_var == doctest::Approx(rep.target_sigma2).epsilon(0.10));
}

TEST_CASE("vanishing lambda needs unique optimal potentials") {
  auto X = IndexedSpace::integers(0, 3);
  auto u = testing::uniform(X);
  ExperimentConfig cfg(u, u, testing::indicator_cost(X, X));
  cfg.statistic = Statistic::VanishingLambda;
  cfg.schedule = LambdaSchedule{};
  cfg.sample_sizes = {100, 200};
  cfg.replications = 5;
  try {
    vanishing_lambda_experiment(cfg);
    FAIL("expected NonUniquePotentials");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonUniquePotentials);
  }
}

TEST_CASE("variance trace approaches the unregularized variance") {
  auto X = IndexedSpace::points({0.0, 1.0, 2.0});
  auto r = DiscreteMeasure(X, vec({0.13, 0.29, 0.58}));
  auto s = DiscreteMeasure(X, vec({0.21, 0.35, 0.44}));
  FamilySpec spec;
  spec.base = "metric";
  spec.p = 2.0;
  ExperimentConfig cfg(r, s, build_cost(spec, X, X, 1.0).first);
  cfg.statistic = Statistic::VanishingLambda;
  cfg.schedule = LambdaSchedule{};
  cfg.sample_sizes = {500, 2000, 8000};
  cfg.replications = 200;
  cfg.seed = 5;
  cfg.threads = 0;
  auto rep = vanishing_lambda_experiment(cfg);
  REQUIRE(rep.variance_trace.size() == 3);
  CHECK(rep.variance_trace[2].mean_abs_error < rep.variance_trace[0].mean_abs_error);
}

TEST_CASE("experiment configs are validated") {
  auto cfg = small_config(1, 1);
  cfg.replications = 0;
  try {
    cfg.validate();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigParse);
  }
}
