// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include "erot/conditions.hpp"
#include "erot/costs.hpp"
#include "erot/error.hpp"
#include "erot/exact_ot.hpp"
#include "erot/io.hpp"
#include "erot/parallel.hpp"
#include "erot/resampling.hpp"
#include "erot/sensitivity.hpp"
#include "erot/sinkhorn.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace erot;
namespace fs = std::filesystem;

namespace {

// Tolerances, pinned.
constexpr double kMarginalTol = 1e-10;
constexpr double kGapTol = 1e-8;
constexpr double kSolverBudgetSeconds = 30.0;
constexpr double kClosedFormTol = 1e-8;
constexpr double kBoundTol = 1e-7;
constexpr double kMinSlope = 0.9;
constexpr double kMarginalIdentityTol = 1e-9;
constexpr double kNeumannTol = 1e-8;
constexpr double kNeumannNormCap = 0.9;
constexpr double kValueKsTol = 0.05;
constexpr double kValueBudgetSeconds = 600.0;
constexpr double kCostVarRelTol = 0.10;
constexpr double kCostPathTol = 1e-9;
constexpr double kBootstrapKsTol = 0.07;
constexpr double kDivergenceZeroTol = 1e-10;
constexpr double kZeroSigmaTol = 1e-12;

const fs::path kFixtures = EROT_FIXTURE_DIR;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("criterion %2d [%s] %s: %s\n", id, pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector random_simplex(int n, std::mt19937_64& gen) {
  std::exponential_distribution<double> e(1.0);
  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = e(gen) + 1e-3;
  return w / w.sum();
}

struct Instance {
  DiscreteMeasure r, s;
  CostModel model;
  double lambda;
};

Instance random_bounded_instance(int nx, int ny, double lambda, std::mt19937_64& gen) {
  auto X = IndexedSpace::integers(0, nx);
  auto Y = IndexedSpace::integers(0, ny);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix c(nx, ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) c(i, j) = u(gen);
  FamilySpec spec;
  spec.family = CostFamily::Bounded;
  spec.base = "matrix";
  spec.matrix = c;
  auto model = build_cost(spec, X, Y, lambda).first;
  return {DiscreteMeasure(X, random_simplex(nx, gen)), DiscreteMeasure(Y, random_simplex(ny, gen)), std::move(model),
          lambda};
}

std::vector<Instance> criterion1_instances() {
  std::mt19937_64 gen(101);
  std::uniform_int_distribution<int> size(2, 50);
  std::uniform_real_distribution<double> loglam(std::log(0.05), std::log(10.0));
  std::vector<Instance> out;
  for (int k = 0; k < 200; ++k) {
    const int nx = size(gen), ny = size(gen);
    out.push_back(random_bounded_instance(nx, ny, std::exp(loglam(gen)), gen));
  }
  return out;
}

// Primal and dual objectives recomputed from the returned plan and potentials.
double independent_gap(const SinkhornSolution& sol, const Instance& in) {
  const Matrix& pi = sol.plan;
  double primal = 0.0, mass = 0.0;
  for (Eigen::Index x = 0; x < pi.rows(); ++x)
    for (Eigen::Index y = 0; y < pi.cols(); ++y) {
      const double p = pi(x, y);
      mass += p;
      primal += in.model.cost(x, y) * p;
      if (p > 0.0) primal += in.lambda * p * std::log(p / (in.r[x] * in.s[y]));
    }
  const double dual = sol.alpha.dot(in.r.weights()) + sol.beta.dot(in.s.weights()) - in.lambda * (mass - 1.0);
  return std::abs(primal - dual);
}

void criteria_1_3_5(const std::vector<Instance>& instances) {
  // 1: marginals, duality gap and runtime.
  double worst_marginal = 0.0, worst_gap = 0.0;
  std::vector<SinkhornSolution> sols;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& in : instances) sols.push_back(solve(in.r, in.s, in.model, in.lambda));
  const double elapsed = seconds_since(t0);
  bool ok = true;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const auto& in = instances[k];
    const auto& sol = sols[k];
    const double res = (sol.plan.rowwise().sum() - in.r.weights()).cwiseAbs().sum() +
                       (sol.plan.colwise().sum().transpose() - in.s.weights()).cwiseAbs().sum();
    const double gap = independent_gap(sol, in) / (1.0 + std::abs(sol.value));
    worst_marginal = std::max(worst_marginal, res);
    worst_gap = std::max(worst_gap, gap);
    ok = ok && res <= kMarginalTol && gap <= kGapTol;
  }
  ok = ok && elapsed < kSolverBudgetSeconds;
  report(1, "solver correctness", ok,
         "200 instances, max l1 residual " + fmt("%.3g", worst_marginal) + ", max relative gap " +
             fmt("%.3g", worst_gap) + ", runtime " + fmt("%.2f", elapsed) + " s");

  // 3: potential and plan bounds.
  double worst_bound = 0.0;
  for (std::size_t k = 0; k < instances.size(); ++k)
    worst_bound = std::max(worst_bound, verify_bounds(sols[k], instances[k].model, instances[k].r, instances[k].s)
                                            .max_violation());
  report(3, "potential and plan bounds", worst_bound <= kBoundTol,
         "max violation " + fmt("%.3g", worst_bound) + " over 200 instances");

  // 5: contraction and block inverse vs Neumann series.
  double worst_norm = 0.0, worst_diff = 0.0;
  int neumann_cases = 0;
  bool contraction_ok = true;
  std::mt19937_64 gen(505);
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const auto& in = instances[k];
    try {
      const DerivativeOperators ops = build_operators(sols[k], in.r, in.s, in.model.x_variation_bounded);
      worst_norm = std::max(worst_norm, ops.contraction_norm);
      contraction_ok = contraction_ok && ops.contraction_norm < 1.0;
      if (ops.contraction_norm <= kNeumannNormCap) {
        ++neumann_cases;
        const Vector hx = random_simplex(in.r.size(), gen) - in.r.weights();
        const Vector hy = random_simplex(in.s.size(), gen) - in.s.weights();
        const Matrix direct = plan_derivative_raw(ops, hx, hy);
        const Matrix neumann = plan_derivative_neumann(ops, hx, hy);
        worst_diff = std::max(worst_diff, (direct - neumann).cwiseAbs().maxCoeff());
      }
    } catch (const Error& e) {
      contraction_ok = false;
      std::printf("  instance %zu: %s\n", k, e.what());
    }
  }
  report(5, "contraction", contraction_ok && worst_diff <= kNeumannTol,
         "max norm " + fmt("%.12f", worst_norm) + " over 200 instances; " + std::to_string(neumann_cases) +
             " instances with norm <= 0.9, max |direct - Neumann| " + fmt("%.3g", worst_diff));
}

void criterion_2() {
  auto X = IndexedSpace::integers(0, 2);
  const DiscreteMeasure u(X, Vector::Constant(2, 0.5));
  FamilySpec spec;
  spec.family = CostFamily::Bounded;
  spec.base = "indicator";
  double worst = 0.0;
  for (double lambda : {0.5, 1.0, 2.0}) {
    const auto model = build_cost(spec, X, X, lambda).first;
    const auto sol = solve(u, u, model, lambda);
    const double e = std::exp(1.0 / lambda);
    const double expected = e / (2.0 * (1.0 + e));
    worst = std::max({worst, std::abs(sol.plan(0, 0) - expected), std::abs(sol.plan(1, 1) - expected)});
  }
  report(2, "closed-form 2x2", worst <= kClosedFormTol, "max error " + fmt("%.3g", worst) + " for lambda in {0.5,1,2}");
}

void criterion_4() {
  std::mt19937_64 gen(404);
  std::uniform_real_distribution<double> lam(0.5, 2.0);
  double min_slope = 1e300, worst_identity = 0.0;
  SolverConfig tight;
  tight.tol = 1e-14;
  for (int k = 0; k < 20; ++k) {
    const Instance in = random_bounded_instance(5, 5, lam(gen), gen);
    const SignedVector hx(in.r.space(), random_simplex(5, gen) - in.r.weights(), true);
    const SignedVector hy(in.s.space(), random_simplex(5, gen) - in.s.weights(), true);
    const auto fd = finite_difference_check(in.r, in.s, in.model, in.lambda, hx, hy, {1e-2, 1e-3, 1e-4}, tight);
    for (std::size_t i = 0; i + 1 < fd.steps.size(); ++i) {
      const double dlt = std::log(fd.steps[i]) - std::log(fd.steps[i + 1]);
      min_slope = std::min(min_slope, (std::log(fd.plan_errors[i]) - std::log(fd.plan_errors[i + 1])) / dlt);
      min_slope = std::min(min_slope, (std::log(fd.value_errors[i]) - std::log(fd.value_errors[i + 1])) / dlt);
    }
    worst_identity = std::max(worst_identity, fd.marginal_residual);
  }
  report(4, "derivative check", min_slope >= kMinSlope && worst_identity <= kMarginalIdentityTol,
         "20 instances, min consecutive log-log slope " + fmt("%.3f", min_slope) + ", max marginal identity error " +
             fmt("%.3g", worst_identity));
}

struct McRuns {
  MCReport value;
  bool ok = false;
};

McRuns criterion_6() {
  McRuns out;
  io::ExperimentFile ef = io::load_experiment(kFixtures / "reference" / "value_clt.json");
  ef.config.threads = default_threads();
  const auto t0 = std::chrono::steady_clock::now();
  out.value = mc_clt_experiment(ef.config);
  const double elapsed = seconds_since(t0);
  const auto& rep = out.value;
  out.ok = true;
  report(6, "value CLT", rep.ks_distance <= kValueKsTol && elapsed <= kValueBudgetSeconds,
         "KS " + fmt("%.4f", rep.ks_distance) + " (n = 2000, 2000 replications), sigma2 " +
             fmt("%.5f", rep.target_sigma2) + ", sample mean " + fmt("%.4f", rep.sample_mean) + ", sample var " +
             fmt("%.5f", rep.sample_var) + ", runtime " + fmt("%.1f", elapsed) + " s");
  return out;
}

void criterion_7() {
  io::ExperimentFile ef = io::load_experiment(kFixtures / "reference" / "cost_clt.json");
  ef.config.threads = default_threads();
  const MCReport rep = mc_clt_experiment(ef.config);
  const double rel = std::abs(rep.sample_var - rep.target_sigma2) / rep.target_sigma2;

  // f = c through the generic functional path, the dedicated cost path, and an
  // explicit sum over coordinate directions e_x - r.
  const auto& cfg = ef.config;
  const SinkhornSolution pop = solve(cfg.r, cfg.s, cfg.cost, cfg.lambda);
  const DerivativeOperators ops = build_operators(pop, cfg.r, cfg.s);
  const VarianceMode vm{SampleMode::OneSampleR, 0.5};
  const double generic = functional_covariance(ops, {cfg.cost.cost}, vm)(0, 0);
  const double dedicated = sinkhorn_cost_variance(ops, cfg.cost.cost, vm);
  double explicit_sum = 0.0;
  for (int x = 0; x < cfg.r.size(); ++x) {
    Vector h = -cfg.r.weights();
    h[x] += 1.0;
    const Matrix d = plan_derivative_raw(ops, h, Vector::Zero(cfg.s.size()));
    const double g = (cfg.cost.cost.array() * d.array()).sum();
    explicit_sum += cfg.r[x] * g * g;
  }
  const double path_diff = std::max(std::abs(generic - dedicated), std::abs(generic - explicit_sum));
  report(7, "Sinkhorn-cost CLT", rel <= kCostVarRelTol && path_diff <= kCostPathTol,
         "MC variance " + fmt("%.5f", rep.sample_var) + " vs sigma~2 " + fmt("%.5f", rep.target_sigma2) +
             " (relative error " + fmt("%.3f", rel) + ", n = 5000), sample mean " + fmt("%.4f", rep.sample_mean) +
             ", f = c path difference " + fmt("%.3g", path_diff));
}

void criterion_8(const MCReport& mc) {
  io::ExperimentFile ef = io::load_experiment(kFixtures / "reference" / "bootstrap.json");
  ef.config.threads = default_threads();
  const MCReport boot = bootstrap_experiment(ef.config);
  const double ks = ks_statistic(boot.standardized_draws, mc.standardized_draws);
  report(8, "bootstrap", ks <= kBootstrapKsTol,
         "two-sample KS " + fmt("%.4f", ks) + " between B = 2000 bootstrap draws and 2000 MC draws at n = 2000");
}

void criterion_9() {
  std::mt19937_64 gen(909);
  std::uniform_int_distribution<int> size(2, 8);
  bool gaps_ok = true;
  double worst_excess = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Instance in = random_bounded_instance(size(gen), size(gen), 1.0, gen);
    const GapReport rep = vanishing_reg_gap(in.r, in.s, in.model, {1.0, 0.5, 0.1, 0.01});
    gaps_ok = gaps_ok && rep.all_hold;
    for (const auto& e : rep.entries)
      worst_excess = std::max({worst_excess, -e.cost_gap, e.cost_gap - e.value_gap, e.value_gap - e.bound});
  }

  auto X = IndexedSpace::points({0.0, 1.0, 2.0});
  const DiscreteMeasure r(X, (Vector(3) << 0.13, 0.29, 0.58).finished());
  const DiscreteMeasure s(X, (Vector(3) << 0.21, 0.35, 0.44).finished());
  FamilySpec spec;
  spec.family = CostFamily::MetricPower;
  spec.p = 2.0;
  spec.setting = "bounded";
  ExperimentConfig cfg(r, s, build_cost(spec, X, X, 1.0).first);
  cfg.statistic = Statistic::VanishingLambda;
  cfg.schedule = LambdaSchedule{1.0, -0.6};
  cfg.sample_sizes = {500, 2000, 8000};
  cfg.replications = 400;
  cfg.seed = 99;
  cfg.threads = default_threads();
  const MCReport rep = vanishing_lambda_experiment(cfg);
  bool monotone = true;
  std::string trace;
  for (std::size_t i = 0; i < rep.variance_trace.size(); ++i) {
    trace += (i ? ", " : "") + fmt("%.3g", rep.variance_trace[i].mean_abs_error);
    if (i > 0) monotone = monotone && rep.variance_trace[i].mean_abs_error < rep.variance_trace[i - 1].mean_abs_error;
  }
  report(9, "vanishing lambda", gaps_ok && monotone,
         "gap chain holds on 20 instances (worst excess " + fmt("%.3g", worst_excess) +
             "); |Var - Var0| trace at n = 500, 2000, 8000: " + trace);
}

void criterion_10() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"bounded_geometric", "bounded_polynomial", "semi_bounded_sub_weibull", "unbounded_plan"}) {
    const io::json j = io::read_json_file(kFixtures / "families" / (std::string(name) + ".json"));
    const DiscreteMeasure r = io::measure_from_json(j.at("r"));
    const DiscreteMeasure s = io::measure_from_json(j.at("s"));
    const auto profile =
        build_cost(io::family_spec_from_json(j.at("cost")), r.space(), s.space(), j.at("lambda").get<double>()).second;
    const SampleMode mode = io::sample_mode_from_string(j.at("mode").get<std::string>());
    const std::string theorem = j.at("theorem").get<std::string>();
    const ConditionReport rep = theorem == "plan" ? check_plan_conditions(r, s, profile, mode)
                                                  : check_value_conditions(r, s, profile, mode);
    const std::string got = to_string(rep.verdict);
    const std::string want = j.at("expected").get<std::string>();
    ok = ok && got == want;
    detail += std::string(detail.empty() ? "" : "; ") + name + " " + got + " (expected " + want + ")";
  }
  report(10, "condition verdicts", ok, detail);
}

void criterion_11() {
  // Divergence variance at r = s on the reference space and on random instances.
  double worst = 0.0;
  {
    const DiscreteMeasure r = io::load_measure(kFixtures / "reference" / "r.json");
    const auto model = build_cost(io::load_family_spec(kFixtures / "reference" / "cost.json"), r.space(), r.space(),
                                  1.0).first;
    for (SampleMode m : {SampleMode::OneSampleR, SampleMode::TwoSample})
      worst = std::max(worst, std::abs(divergence_variance(r, r, model, 1.0, {m, 0.5})));
  }
  std::mt19937_64 gen(1111);
  for (int k = 0; k < 5; ++k) {
    auto X = IndexedSpace::integers(0, 6);
    const DiscreteMeasure r(X, random_simplex(6, gen));
    FamilySpec spec;
    spec.family = CostFamily::MetricPower;
    spec.p = 2.0;
    spec.setting = "bounded";
    const auto model = build_cost(spec, X, X, 0.7).first;
    worst = std::max(worst, std::abs(divergence_variance(r, r, model, 0.7, {SampleMode::OneSampleR, 0.5})));
  }

  auto X = IndexedSpace::integers(0, 2);
  const DiscreteMeasure u(X, Vector::Constant(2, 0.5));
  FamilySpec spec;
  spec.family = CostFamily::Bounded;
  spec.base = "indicator";
  ExperimentConfig cfg(u, u, build_cost(spec, X, X, 1.0).first);
  cfg.replications = 1000;
  cfg.seed = 11;
  cfg.threads = default_threads();
  double target = 0.0;
  std::vector<double> vars;
  for (int n : {500, 2000, 8000}) {
    cfg.n = n;
    const MCReport rep = mc_clt_experiment(cfg);
    target = std::max(target, std::abs(rep.target_sigma2));
    vars.push_back(rep.sample_var);
  }
  const bool shrinking = vars[1] < vars[0] && vars[2] < vars[1];
  report(11, "degeneracy", worst <= kDivergenceZeroTol && target <= kZeroSigmaTol && shrinking,
         "max |divergence variance at r = s| " + fmt("%.3g", worst) + ", 2x2 target sigma2 " + fmt("%.3g", target) +
             ", draw variance at n = 500, 2000, 8000: " + fmt("%.3g", vars[0]) + ", " + fmt("%.3g", vars[1]) + ", " +
             fmt("%.3g", vars[2]));
}

void guarded(int id, const std::string& name, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("threw ") + e.what());
  }
}

}  // namespace

int main() {
  const std::vector<Instance> instances = criterion1_instances();
  guarded(1, "solver correctness", [&] { criteria_1_3_5(instances); });
  guarded(2, "closed-form 2x2", criterion_2);
  guarded(4, "derivative check", criterion_4);
  McRuns mc;
  guarded(6, "value CLT", [&] { mc = criterion_6(); });
  guarded(7, "Sinkhorn-cost CLT", criterion_7);
  if (mc.ok) {
    guarded(8, "bootstrap", [&] { criterion_8(mc.value); });
  } else {
    report(8, "bootstrap", false, "no Monte Carlo draws to compare against");
  }
  guarded(9, "vanishing lambda", criterion_9);
  guarded(10, "condition verdicts", criterion_10);
  guarded(11, "degeneracy", criterion_11);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
