#include "erot/resampling.hpp"

#include "erot/error.hpp"
#include "erot/exact_ot.hpp"
#include "erot/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace erot {

std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::ValueCLT: return "value";
    case Statistic::SinkhornCostCLT: return "sinkhorn_cost";
    case Statistic::DivergenceCLT: return "divergence";
    case Statistic::PlanFunctionalCLT: return "plan_functional";
    case Statistic::Bootstrap: return "bootstrap";
    case Statistic::VanishingLambda: return "vanishing_lambda";
  }
  return "value";
}

Statistic statistic_from_string(const std::string& name) {
  for (Statistic s : {Statistic::ValueCLT, Statistic::SinkhornCostCLT, Statistic::DivergenceCLT,
                      Statistic::PlanFunctionalCLT, Statistic::Bootstrap, Statistic::VanishingLambda})
    if (to_string(s) == name) return s;
  throw Error(ErrorCode::ConfigParse, "unknown statistic '" + name + "'");
}

double LambdaSchedule::at(int n) const { return scale * std::pow(static_cast<double>(n), exponent); }

void ExperimentConfig::validate() const {
  if (replications < 1) throw Error(ErrorCode::ConfigParse, "replications must be >= 1");
  if (n < 2 || (m != 0 && m < 2)) throw Error(ErrorCode::ConfigParse, "sample sizes must be >= 2");
  for (int k : sample_sizes)
    if (k < 2) throw Error(ErrorCode::ConfigParse, "sample sizes must be >= 2");
  if (!schedule && !(lambda > 0.0)) throw Error(ErrorCode::ConfigParse, "lambda must be positive");
  if (statistic == Statistic::PlanFunctionalCLT && !function)
    throw Error(ErrorCode::ConfigParse, "plan_functional statistic needs a function table");
  if (r.size() != cost.rows() || s.size() != cost.cols())
    throw Error(ErrorCode::SpaceMismatch, "measures do not match the cost shape");
}

std::vector<int> multinomial_counts(const Vector& p, int n, std::mt19937_64& gen) {
  std::vector<int> counts(p.size(), 0);
  double remaining_mass = 1.0;
  int remaining = n;
  for (Eigen::Index i = 0; i < p.size() && remaining > 0; ++i) {
    if (i == p.size() - 1) {
      counts[i] = remaining;
      break;
    }
    const double q = remaining_mass > 0.0 ? std::clamp(p[i] / remaining_mass, 0.0, 1.0) : 1.0;
    std::binomial_distribution<int> bin(remaining, q);
    counts[i] = bin(gen);
    remaining -= counts[i];
    remaining_mass -= p[i];
  }
  return counts;
}

std::vector<int> sample_indices(const Vector& p, int n, std::mt19937_64& gen) {
  std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
  std::vector<int> out(n);
  for (int& v : out) v = dist(gen);
  return out;
}

double normal_cdf(double x, double sigma2) {
  if (sigma2 <= 0.0) return x >= 0.0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * sigma2));
}

double ks_statistic(std::vector<double> draws, const std::function<double(double)>& cdf) {
  if (draws.empty()) throw Error(ErrorCode::EmptyInput, "KS statistic of an empty sample");
  std::sort(draws.begin(), draws.end());
  const double N = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double F = cdf(draws[i]);
    d = std::max({d, (i + 1) / N - F, F - i / N});
  }
  return std::clamp(d, 0.0, 1.0);
}

double ks_statistic(std::vector<double> draws, std::vector<double> reference) {
  if (draws.empty() || reference.empty()) throw Error(ErrorCode::EmptyInput, "KS statistic of an empty sample");
  std::sort(draws.begin(), draws.end());
  std::sort(reference.begin(), reference.end());
  const double na = static_cast<double>(draws.size()), nb = static_cast<double>(reference.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < draws.size() && j < reference.size()) {
    const double v = std::min(draws[i], reference[j]);
    while (i < draws.size() && draws[i] == v) ++i;
    while (j < reference.size() && reference[j] == v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return std::clamp(d, 0.0, 1.0);
}

SampleMoments sample_moments(const std::vector<double>& v) {
  SampleMoments m;
  if (v.empty()) return m;
  double acc = 0.0;
  for (double x : v) acc += x;
  m.mean = acc / v.size();
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.var = ss / (v.size() - 1);
  return m;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void finish_report(MCReport& rep) {
  const auto mom = sample_moments(rep.standardized_draws);
  rep.sample_mean = mom.mean;
  rep.sample_var = mom.var;
  const double target = rep.target_sigma2;
  rep.ks_distance = ks_statistic(rep.standardized_draws, [target](double x) { return normal_cdf(x, target); });
}

void record_conditions(MCReport& rep, const ConditionReport& cond) {
  rep.condition_verdict = to_string(cond.verdict);
  if (cond.verdict != Verdict::Pass) {
    std::string msg = "ground truth " + cond.theorem_tag + " conditions: " + rep.condition_verdict;
    for (const auto& reason : cond.reasons) msg += "; " + reason;
    rep.warnings.push_back(msg);
  }
}

std::vector<double> bootstrap_statistic(std::span<const int> sample, const SpacePtr& x_space,
                                        const DiscreteMeasure& s, const CostModel& model, double lambda, int B,
                                        std::uint64_t seed, const SolverConfig& cfg, int threads,
                                        const std::function<double(const SinkhornSolution&)>& stat) {
  if (B < 1) throw Error(ErrorCode::ConfigParse, "bootstrap needs B >= 1");
  const DiscreteMeasure rhat = empirical_measure(sample, x_space);
  const SinkhornSolution base = solve(rhat, s, model, lambda, cfg);
  const double center = stat(base);
  const int n = static_cast<int>(sample.size());
  const double rate = std::sqrt(static_cast<double>(n));
  SolverConfig warm = cfg;
  warm.warm_beta = base.beta;
  std::vector<double> draws(B);
  parallel_for(B, threads, [&](int b) {
    std::mt19937_64 gen(stream_seed(seed, static_cast<std::uint64_t>(b), 2));
    const auto counts = multinomial_counts(rhat.weights(), n, gen);
    const DiscreteMeasure rstar = empirical_from_counts(counts, x_space);
    draws[b] = rate * (stat(solve(rstar, s, model, lambda, warm)) - center);
  });
  return draws;
}

}  // namespace

std::vector<double> bootstrap_value(std::span<const int> sample, const SpacePtr& x_space, const DiscreteMeasure& s,
                                    const CostModel& model, double lambda, int B, std::uint64_t seed,
                                    const SolverConfig& cfg, int threads) {
  return bootstrap_statistic(sample, x_space, s, model, lambda, B, seed, cfg, threads,
                             [](const SinkhornSolution& sol) { return sol.value; });
}

std::vector<double> bootstrap_plan_functional(std::span<const int> sample, const SpacePtr& x_space,
                                              const DiscreteMeasure& s, const CostModel& model, double lambda,
                                              const Matrix& f, int B, std::uint64_t seed, const SolverConfig& cfg,
                                              int threads) {
  if (f.rows() != model.rows() || f.cols() != model.cols())
    throw Error(ErrorCode::SpaceMismatch, "function table shape differs from the cost");
  return bootstrap_statistic(sample, x_space, s, model, lambda, B, seed, cfg, threads,
                             [&f](const SinkhornSolution& sol) { return (f.array() * sol.plan.array()).sum(); });
}

MCReport mc_clt_experiment(const ExperimentConfig& cfg) {
  if (cfg.statistic == Statistic::Bootstrap) return bootstrap_experiment(cfg);
  if (cfg.statistic == Statistic::VanishingLambda) return vanishing_lambda_experiment(cfg);
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  MCReport rep;
  rep.statistic = cfg.statistic;
  rep.mode = cfg.mode;
  rep.n = cfg.n;
  rep.m = cfg.m > 0 ? cfg.m : cfg.n;
  rep.replications = cfg.replications;
  rep.lambda = cfg.schedule ? cfg.schedule->at(cfg.n) : cfg.lambda;
  const double n = rep.n, m = rep.m;
  const double delta = m / (n + m);
  const VarianceMode vm{cfg.mode, delta};
  switch (cfg.mode) {
    case SampleMode::OneSampleR: rep.rate = std::sqrt(n); break;
    case SampleMode::OneSampleS: rep.rate = std::sqrt(m); break;
    case SampleMode::TwoSample: rep.rate = std::sqrt(n * m / (n + m)); break;
  }

  const double lambda = rep.lambda;
  const SinkhornSolution pop = solve(cfg.r, cfg.s, cfg.cost, lambda, cfg.solver);
  const WeightProfile profile = weight_profile(cfg.cost, lambda);
  double pop_ss = 0.0;  // EROT(s, s), reused by the divergence statistic
  double pop_rr = 0.0;
  std::function<double(const DiscreteMeasure&, const DiscreteMeasure&, const SolverConfig&)> statistic;
  switch (cfg.statistic) {
    case Statistic::ValueCLT:
      rep.population_value = pop.value;
      rep.target_sigma2 = value_variance(pop, cfg.r, cfg.s, vm);
      record_conditions(rep, check_value_conditions(cfg.r, cfg.s, profile, cfg.mode));
      statistic = [&](const DiscreteMeasure& r, const DiscreteMeasure& s, const SolverConfig& sc) {
        return solve(r, s, cfg.cost, lambda, sc).value;
      };
      break;
    case Statistic::SinkhornCostCLT:
    case Statistic::PlanFunctionalCLT: {
      const Matrix f = cfg.statistic == Statistic::SinkhornCostCLT ? cfg.cost.cost : *cfg.function;
      if (f.rows() != cfg.cost.rows() || f.cols() != cfg.cost.cols())
        throw Error(ErrorCode::SpaceMismatch, "function table shape differs from the cost");
      record_conditions(rep, check_plan_conditions(cfg.r, cfg.s, profile, cfg.mode));
      const DerivativeOperators ops = build_operators(pop, cfg.r, cfg.s, cfg.cost.x_variation_bounded);
      if (!ops.warning.empty()) rep.warnings.push_back(ops.warning);
      rep.population_value = (f.array() * pop.plan.array()).sum();
      rep.target_sigma2 = std::max(0.0, functional_covariance(ops, {f}, vm, cfg.threads)(0, 0));
      statistic = [&, f](const DiscreteMeasure& r, const DiscreteMeasure& s, const SolverConfig& sc) {
        return (f.array() * solve(r, s, cfg.cost, lambda, sc).plan.array()).sum();
      };
      break;
    }
    case Statistic::DivergenceCLT:
      require_symmetric(cfg.r, cfg.s, cfg.cost);
      record_conditions(rep, check_divergence_conditions(cfg.r, cfg.s, profile, cfg.mode));
      pop_rr = solve(cfg.r, cfg.r, cfg.cost, lambda, cfg.solver).value;
      pop_ss = solve(cfg.s, cfg.s, cfg.cost, lambda, cfg.solver).value;
      rep.population_value = pop.value - 0.5 * (pop_rr + pop_ss);
      rep.target_sigma2 = divergence_variance(cfg.r, cfg.s, cfg.cost, lambda, vm, cfg.solver);
      statistic = [&](const DiscreteMeasure& r, const DiscreteMeasure& s, const SolverConfig& sc) {
        SolverConfig plain = sc;
        plain.warm_alpha.reset();
        plain.warm_beta.reset();
        const double rr = cfg.mode == SampleMode::OneSampleS ? pop_rr : solve(r, r, cfg.cost, lambda, plain).value;
        const double ss = cfg.mode == SampleMode::OneSampleR ? pop_ss : solve(s, s, cfg.cost, lambda, plain).value;
        return solve(r, s, cfg.cost, lambda, sc).value - 0.5 * (rr + ss);
      };
      break;
    default: break;
  }

  SolverConfig warm = cfg.solver;
  warm.warm_beta = pop.beta;
  rep.standardized_draws.assign(cfg.replications, 0.0);
  parallel_for(cfg.replications, cfg.threads, [&](int b) {
    std::mt19937_64 gen_r(stream_seed(cfg.seed, static_cast<std::uint64_t>(b), 0));
    std::mt19937_64 gen_s(stream_seed(cfg.seed, static_cast<std::uint64_t>(b), 1));
    const bool sample_r = cfg.mode != SampleMode::OneSampleS;
    const bool sample_s = cfg.mode != SampleMode::OneSampleR;
    const DiscreteMeasure rhat =
        sample_r ? empirical_from_counts(multinomial_counts(cfg.r.weights(), rep.n, gen_r), cfg.r.space()) : cfg.r;
    const DiscreteMeasure shat =
        sample_s ? empirical_from_counts(multinomial_counts(cfg.s.weights(), rep.m, gen_s), cfg.s.space()) : cfg.s;
    rep.standardized_draws[b] = rep.rate * (statistic(rhat, shat, warm) - rep.population_value);
  });
  finish_report(rep);
  rep.runtime_seconds = seconds_since(t0);
  return rep;
}

MCReport bootstrap_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  MCReport rep;
  rep.statistic = Statistic::Bootstrap;
  rep.mode = SampleMode::OneSampleR;
  rep.n = rep.m = cfg.n;
  rep.replications = cfg.replications;
  rep.lambda = cfg.schedule ? cfg.schedule->at(cfg.n) : cfg.lambda;
  rep.rate = std::sqrt(static_cast<double>(cfg.n));
  const SinkhornSolution pop = solve(cfg.r, cfg.s, cfg.cost, rep.lambda, cfg.solver);
  rep.target_sigma2 = value_variance(pop, cfg.r, cfg.s, {SampleMode::OneSampleR, 0.5});
  record_conditions(rep, check_value_conditions(cfg.r, cfg.s, weight_profile(cfg.cost, rep.lambda),
                                                SampleMode::OneSampleR));
  std::mt19937_64 gen(stream_seed(cfg.seed, 0, 3));
  const std::vector<int> sample = sample_indices(cfg.r.weights(), cfg.n, gen);
  const DiscreteMeasure rhat = empirical_measure(sample, cfg.r.space());
  rep.population_value = solve(rhat, cfg.s, cfg.cost, rep.lambda, cfg.solver).value;
  rep.standardized_draws = bootstrap_value(sample, cfg.r.space(), cfg.s, cfg.cost, rep.lambda, cfg.replications,
                                           cfg.seed, cfg.solver, cfg.threads);
  finish_report(rep);
  rep.runtime_seconds = seconds_since(t0);
  return rep;
}

MCReport vanishing_lambda_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const OTSolution ot = exact_ot_small(cfg.r, cfg.s, cfg.cost);
  if (!ot.unique_potentials)
    throw Error(ErrorCode::NonUniquePotentials, "optimal transport potentials are not unique for the ground truth");
  MCReport rep;
  rep.statistic = Statistic::VanishingLambda;
  rep.mode = SampleMode::OneSampleR;
  rep.replications = cfg.replications;
  rep.reference_variance = weighted_variance(ot.alpha0, cfg.r.weights());
  rep.target_sigma2 = rep.reference_variance;
  rep.population_value = ot.value;
  record_conditions(rep, check_value_conditions(cfg.r, cfg.s, weight_profile(cfg.cost, 1.0), SampleMode::OneSampleR));
  const LambdaSchedule schedule = cfg.schedule.value_or(LambdaSchedule{});
  std::vector<int> sizes = cfg.sample_sizes;
  if (sizes.empty()) sizes.push_back(cfg.n);

  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const int n = sizes[k];
    const double lambda = schedule.at(n);
    SolverConfig warm = cfg.solver;
    warm.warm_beta = solve(cfg.r, cfg.s, cfg.cost, lambda, cfg.solver).beta;
    std::vector<double> variances(cfg.replications), draws(cfg.replications);
    parallel_for(cfg.replications, cfg.threads, [&](int b) {
      std::mt19937_64 gen(stream_seed(cfg.seed, static_cast<std::uint64_t>(b), 10 + k));
      const DiscreteMeasure rhat =
          empirical_from_counts(multinomial_counts(cfg.r.weights(), n, gen), cfg.r.space());
      const SinkhornSolution sol = solve(rhat, cfg.s, cfg.cost, lambda, warm);
      variances[b] = weighted_variance(sol.alpha, rhat.weights());
      draws[b] = std::sqrt(static_cast<double>(n)) * (sol.value - ot.value);
    });
    VarianceTraceEntry e;
    e.n = n;
    e.lambda = lambda;
    for (double v : variances) {
      e.mean_empirical_variance += v / cfg.replications;
      e.mean_abs_error += std::abs(v - rep.reference_variance) / cfg.replications;
    }
    rep.variance_trace.push_back(e);
    if (k + 1 == sizes.size()) {
      rep.n = rep.m = n;
      rep.lambda = lambda;
      rep.rate = std::sqrt(static_cast<double>(n));
      rep.standardized_draws = std::move(draws);
    }
  }
  finish_report(rep);
  rep.runtime_seconds = seconds_since(t0);
  return rep;
}

}  // namespace erot
