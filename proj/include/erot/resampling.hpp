#pragma once

#include "erot/conditions.hpp"
#include "erot/costs.hpp"
#include "erot/measures.hpp"
#include "erot/sensitivity.hpp"
#include "erot/sinkhorn.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace erot {

enum class Statistic { ValueCLT, SinkhornCostCLT, DivergenceCLT, PlanFunctionalCLT, Bootstrap, VanishingLambda };

std::string to_string(Statistic s);
Statistic statistic_from_string(const std::string& name);

/// lambda(n) = scale * n^exponent.
struct LambdaSchedule {
  double scale = 1.0;
  double exponent = -0.6;

  double at(int n) const;
};

struct ExperimentConfig {
  ExperimentConfig(DiscreteMeasure r_, DiscreteMeasure s_, CostModel cost_)
      : r(std::move(r_)), s(std::move(s_)), cost(std::move(cost_)) {}

  DiscreteMeasure r, s;
  CostModel cost;
  double lambda = 1.0;
  std::optional<LambdaSchedule> schedule;
  int n = 1000;
  int m = 0;  // two-sample size; 0 means m = n
  SampleMode mode = SampleMode::OneSampleR;
  int replications = 1000;
  Statistic statistic = Statistic::ValueCLT;
  std::optional<Matrix> function;  // PlanFunctionalCLT
  std::uint64_t seed = 0;
  std::vector<int> sample_sizes;  // VanishingLambda
  int threads = 1;
  SolverConfig solver;

  void validate() const;
};

struct VarianceTraceEntry {
  int n = 0;
  double lambda = 0.0;
  double mean_empirical_variance = 0.0;  // mean over replications of Var_{r_n}[alpha^{lambda_n}]
  double mean_abs_error = 0.0;           // mean of |Var_{r_n}[alpha^{lambda_n}] - Var_r[alpha^0]|
};

struct MCReport {
  Statistic statistic = Statistic::ValueCLT;
  SampleMode mode = SampleMode::OneSampleR;
  int n = 0, m = 0, replications = 0;
  double lambda = 0.0;
  double rate = 0.0;  // sqrt(n), sqrt(m) or sqrt(nm/(n+m))
  double population_value = 0.0;
  double target_sigma2 = 0.0;
  std::vector<double> standardized_draws;
  double ks_distance = 0.0;
  double sample_mean = 0.0, sample_var = 0.0;
  double runtime_seconds = 0.0;
  std::string condition_verdict;
  std::vector<std::string> warnings;
  std::vector<VarianceTraceEntry> variance_trace;  // VanishingLambda
  double reference_variance = 0.0;                 // Var_r[alpha^0] for VanishingLambda
};

/// Counts of n draws from p, by sequential conditional binomials.
std::vector<int> multinomial_counts(const Vector& p, int n, std::mt19937_64& gen);
/// n i.i.d. atom indices drawn from p.
std::vector<int> sample_indices(const Vector& p, int n, std::mt19937_64& gen);

std::vector<double> bootstrap_value(std::span<const int> sample, const SpacePtr& x_space, const DiscreteMeasure& s,
                                    const CostModel& model, double lambda, int B, std::uint64_t seed,
                                    const SolverConfig& cfg = {}, int threads = 1);
std::vector<double> bootstrap_plan_functional(std::span<const int> sample, const SpacePtr& x_space,
                                              const DiscreteMeasure& s, const CostModel& model, double lambda,
                                              const Matrix& f, int B, std::uint64_t seed,
                                              const SolverConfig& cfg = {}, int threads = 1);

MCReport mc_clt_experiment(const ExperimentConfig& cfg);
/// Draws one sample of size n from r, then bootstraps the value statistic.
MCReport bootstrap_experiment(const ExperimentConfig& cfg);
MCReport vanishing_lambda_experiment(const ExperimentConfig& cfg);

double normal_cdf(double x, double sigma2);
double ks_statistic(std::vector<double> draws, const std::function<double(double)>& cdf);
double ks_statistic(std::vector<double> draws, std::vector<double> reference);

struct SampleMoments {
  double mean = 0.0, var = 0.0;
};
SampleMoments sample_moments(const std::vector<double>& v);

}  // namespace erot
