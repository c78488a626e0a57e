#include "erot/conditions.hpp"
#include "erot/costs.hpp"
#include "erot/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace erot;
using erot::testing::random_int;

namespace {

FamilySpec metric_spec(CostFamily family, double p, const std::string& setting = {}) {
  FamilySpec spec;
  spec.family = family;
  spec.p = p;
  spec.setting = setting;
  return spec;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

}  // namespace

TEST_CASE("bounded indicator cost has constant weights") {
  auto X = IndexedSpace::integers(0, 4);
  auto Y = IndexedSpace::integers(2, 3);
  FamilySpec spec;
  auto [model, w] = build_cost(spec, X, Y, 1.0);
  CHECK(model.cost(2, 0) == 0.0);
  CHECK(model.cost(0, 0) == 1.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(w.C_X.values[i] == doctest::Approx(1.5));
    CHECK(w.e_X.values[i] == doctest::Approx(std::exp(0.5)));
  }
  for (int j = 0; j < 3; ++j) {
    CHECK(w.C_Y.values[j] == doctest::Approx(1.5));
    CHECK(w.e_Y.values[j] == doctest::Approx(std::exp(0.5)));
  }
}

TEST_CASE("separated supports give the separability family") {
  auto X = IndexedSpace::points({-3.0, -1.5, 0.0});
  auto Y = IndexedSpace::points({1.0, 2.0, 4.0, 8.0});
  const double lambda = 0.7;
  auto [model, w] = build_cost(metric_spec(CostFamily::SeparabilityMetric, 1.0), X, Y, lambda);
  CHECK(model.setting == "separability");
  for (int i = 0; i < 3; ++i) {
    const double ax = std::abs(X->coord(i)[0]);
    CHECK(model.primary.x_upper[i] == doctest::Approx(ax));
    CHECK(model.primary.x_lower[i] == doctest::Approx(ax - model.kappa / 2));
    CHECK(w.e_X.values[i] == doctest::Approx(std::exp(model.kappa / (2 * lambda))));
  }
  CHECK(sandwich_violation(model.cost, model.primary) == 0.0);
}

TEST_CASE("separability constant is bounded by kappa_max") {
  auto X = IndexedSpace::points({0.0, 1.0});
  auto Y = IndexedSpace::points({0.0, 1.0});
  auto spec = metric_spec(CostFamily::SeparabilityMetric, 1.0);
  spec.kappa_max = 0.5;
  try {
    build_cost(spec, X, Y, 1.0);
    FAIL("expected SeparabilityViolated");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SeparabilityViolated);
  }
}

TEST_CASE("semi-bounded metric family on a bounded X") {
  auto X = IndexedSpace::points(linspace(0.0, 1.0, 5));
  auto Y = IndexedSpace::integers(0, 51);
  auto [model, w] = build_cost(metric_spec(CostFamily::MetricPower, 1.0, "semi_bounded"), X, Y, 1.0);
  CHECK(model.family == CostFamily::SemiBoundedMetricPower);
  for (int j = 0; j <= 50; ++j) {
    CHECK(model.primary.y_upper[j] == doctest::Approx(j + 1.0));
    CHECK(model.primary.y_lower[j] == doctest::Approx(std::max(j - 1.0, 0.0)));
  }
  CHECK(sandwich_violation(model.cost, model.primary) == 0.0);
}

TEST_CASE("metric families need coordinates") {
  auto X = std::make_shared<const IndexedSpace>(std::vector<std::string>{"a", "b"});
  try {
    build_cost(metric_spec(CostFamily::MetricPower, 1.0, "bounded"), X, X, 1.0);
    FAIL("expected MissingCoordinates");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingCoordinates);
  }
}

TEST_CASE("shift_nonnegative examples") {
  std::mt19937_64 gen(3);
  auto X = IndexedSpace::integers(0, 3);
  auto Y = IndexedSpace::integers(0, 4);
  const Matrix c0 = testing::random_matrix(3, 4, gen);
  auto r = testing::uniform(X);
  auto s = testing::uniform(Y);

  FamilySpec plain;
  plain.base = "matrix";
  plain.matrix = c0;
  auto same = shift_nonnegative(build_cost(plain, X, Y, 1.0).first, r, s);
  CHECK(same.offset == 0.0);
  CHECK(same.model.cost == c0);

  FamilySpec shifted;
  shifted.family = CostFamily::Custom;
  shifted.matrix = (c0.array() - 3.0).matrix();
  shifted.dominating = DominatingFunctions{Vector::Constant(3, -3.0), Vector::Constant(3, -2.0), Vector::Zero(4),
                                           Vector::Ones(4)};
  auto back = shift_nonnegative(build_cost(shifted, X, Y, 1.0).first, r, s);
  CHECK(back.offset == doctest::Approx(-3.0));
  CHECK((back.model.cost - c0).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("every constructed family satisfies its sandwich") {
  std::mt19937_64 gen(19);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const std::vector<std::string> settings{"bounded", "semi_bounded", "semi_bounded_y", "unbounded", "separability"};
  for (int trial = 0; trial < 100; ++trial) {
    const std::string setting = settings[trial % settings.size()];
    const int nx = random_int(1, 12, gen), ny = random_int(1, 12, gen);
    std::vector<double> xs(nx), ys(ny);
    for (double& x : xs) x = setting == "semi_bounded" ? u(gen) / 5 : u(gen);
    for (double& y : ys) y = setting == "semi_bounded_y" ? u(gen) / 5 : u(gen);
    if (setting == "separability") {
      for (double& x : xs) x = -std::abs(x);
      for (double& y : ys) y = 1.0 + std::abs(y);
    }
    const double p = setting == "separability" ? 1.0 : random_int(1, 3, gen);
    auto X = IndexedSpace::points(xs);
    auto Y = IndexedSpace::points(ys);
    auto spec = metric_spec(CostFamily::MetricPower, p, setting);
    CAPTURE(setting);
    CAPTURE(trial);
    auto [model, w] = build_cost(spec, X, Y, testing::random_log_uniform(0.1, 10.0, gen));
    CHECK(sandwich_violation(model.cost, model.primary) <= 1e-9 * (1 + model.cost.cwiseAbs().maxCoeff()));
    if (model.secondary)
      CHECK(sandwich_violation(model.cost, *model.secondary) <= 1e-9 * (1 + model.cost.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("e weights decrease in lambda") {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int nx = random_int(1, 10, gen), ny = random_int(1, 10, gen);
    auto X = IndexedSpace::integers(0, nx);
    auto Y = IndexedSpace::integers(0, ny);
    auto model = testing::matrix_cost(testing::random_matrix(nx, ny, gen, 0.0, 3.0), X, Y);
    const double l1 = testing::random_log_uniform(0.05, 5.0, gen);
    const double l2 = l1 * (1.0 + testing::random_log_uniform(0.01, 10.0, gen));
    auto w1 = weight_profile(model, l1);
    auto w2 = weight_profile(model, l2);
    CHECK((w2.e_X.values.array() <= w1.e_X.values.array()).all());
    CHECK((w2.e_Y.values.array() <= w1.e_Y.values.array()).all());
  }
}

TEST_CASE("value conditions under a bounded cost follow the tail") {
  auto X = IndexedSpace::integers(0, 200);
  FamilySpec spec;
  auto [model, w] = build_cost(spec, X, X, 1.0);
  auto geo = family_measure(TailModel::geometric(0.5), X, true);
  auto poly = family_measure(TailModel::polynomial(2.0), X, true);
  auto finite = family_measure(TailModel::geometric(0.5), X, false);
  CHECK(check_value_conditions(geo, geo, w, SampleMode::OneSampleR).verdict == Verdict::Pass);
  CHECK(check_value_conditions(poly, geo, w, SampleMode::OneSampleR).verdict == Verdict::Fail);
  CHECK(check_value_conditions(finite, finite, w, SampleMode::OneSampleR).verdict == Verdict::Pass);
  CHECK(check_plan_conditions(finite, finite, w).verdict == Verdict::Pass);
}

TEST_CASE("plan conditions fail for the unbounded metric family") {
  auto X = IndexedSpace::integers(0, 40);
  auto [model, w] = build_cost(metric_spec(CostFamily::MetricPower, 2.0, "unbounded"), X, X, 1.0);
  auto r = family_measure(TailModel::geometric(0.5), X, true);
  auto rep = check_plan_conditions(r, r, w);
  CHECK(rep.verdict == Verdict::Fail);
  CHECK_FALSE(rep.x_variation_bounded);
}

TEST_CASE("plan Pass implies value Pass on bounded families") {
  std::mt19937_64 gen(29);
  auto X = IndexedSpace::integers(0, 100);
  FamilySpec spec;
  auto [model, w] = build_cost(spec, X, X, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    std::uniform_real_distribution<double> u(0.05, 0.95), a(1.1, 6.0);
    auto tail = trial % 2 ? TailModel::geometric(u(gen)) : TailModel::polynomial(a(gen));
    auto other = trial % 3 ? TailModel::geometric(u(gen)) : TailModel::polynomial(a(gen));
    auto r = family_measure(tail, X, true);
    auto s = family_measure(other, X, true);
    if (check_plan_conditions(r, s, w).verdict == Verdict::Pass)
      CHECK(check_value_conditions(r, s, w, SampleMode::OneSampleR).verdict == Verdict::Pass);
  }
}

TEST_CASE("series verdicts for the shipped tails") {
  CHECK(series_verdict(Growth::constant(), TailModel::geometric(0.5), 0.5) == SeriesVerdict::Converges);
  CHECK(series_verdict(Growth::constant(), TailModel::polynomial(2.0), 0.5) == SeriesVerdict::Diverges);
  CHECK(series_verdict(Growth::constant(), TailModel::polynomial(3.0), 0.5) == SeriesVerdict::Converges);
  CHECK(series_verdict(Growth::polynomial(3.0), TailModel::sub_weibull(1.0, 1.5), 0.5) == SeriesVerdict::Converges);
  CHECK(series_verdict(Growth::constant(), TailModel{}, 0.5) == SeriesVerdict::Unknown);
}
