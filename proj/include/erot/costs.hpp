#pragma once

#include "erot/measures.hpp"

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace erot {

enum class CostFamily { Bounded, MetricPower, SemiBoundedMetricPower, SeparabilityMetric, NormPower, Custom };

std::string to_string(CostFamily family);

/// Separable sandwich c_X^-(x) + c_Y^-(y) <= c(x,y) <= c_X^+(x) + c_Y^+(y).
struct DominatingFunctions {
  Vector x_lower, x_upper, y_lower, y_upper;
};

/// Asymptotic shape of a positive weight in the radius t of an atom:
///   w(t) ≍ t^degree * exp(sum_k rate_k * t^power_k).
struct Growth {
  bool known = true;
  double degree = 0.0;
  std::map<double, double> exp_terms;  // power -> rate

  static Growth constant() { return {}; }
  static Growth unknown() { return {false, 0.0, {}}; }
  static Growth polynomial(double degree) { return {true, degree, {}}; }

  Growth operator*(const Growth& other) const;
  Growth pow(double k) const;
  /// (power, rate) of the dominating exponential term; nullopt when there is none.
  std::optional<std::pair<double, double>> leading_exp() const;
};

/// Large-radius description of one side of a dominating collection.
struct SideAsymptotics {
  bool known = false;
  double c_degree = 0.0;                      // growth degree of 1 + |c^+| + |c^-|
  std::map<double, double> variation_terms;  // c^+ - c^- ≍ sum coef * t^power
};

struct CollectionAsymptotics {
  SideAsymptotics x, y;
};

struct CostModel {
  Matrix cost;
  DominatingFunctions primary;
  std::optional<DominatingFunctions> secondary;
  CostFamily family = CostFamily::Custom;
  std::string setting;  // bounded | semi_bounded | semi_bounded_y | unbounded | separability | custom
  /// Analytic statements about the countable family behind the truncation.
  bool x_variation_bounded = true;
  bool y_variation_bounded = true;
  CollectionAsymptotics primary_asymptotics;
  std::optional<CollectionAsymptotics> secondary_asymptotics;
  double kappa = 0.0;  // separability constant, when computed
  SpacePtr x_space, y_space;

  const DominatingFunctions& tilde() const { return secondary ? *secondary : primary; }
  const CollectionAsymptotics& tilde_asymptotics() const {
    return secondary_asymptotics ? *secondary_asymptotics : primary_asymptotics;
  }
  int rows() const { return static_cast<int>(cost.rows()); }
  int cols() const { return static_cast<int>(cost.cols()); }
};

/// Weight functions C, e (and their tilde versions from the secondary
/// collection) at a fixed regularization, together with their growth shapes.
struct WeightProfile {
  double lambda = 1.0;
  WeightFunction C_X, C_Y, e_X, e_Y;
  WeightFunction Ct_X, Ct_Y, et_X, et_Y;
  Growth gC_X, gC_Y, ge_X, ge_Y;
  Growth gCt_X, gCt_Y, get_X, get_Y;
  CostFamily family = CostFamily::Custom;
  bool x_variation_bounded = true;
  bool y_variation_bounded = true;

  /// k^δ = C · e^δ.
  WeightFunction k_X(double delta) const;
  WeightFunction k_Y(double delta) const;
};

struct FamilySpec {
  CostFamily family = CostFamily::Bounded;
  /// bounded family: "indicator" (1{x != y} by label), "metric" (d^p), or "matrix".
  std::string base = "indicator";
  /// metric/norm families: "bounded", "semi_bounded", "semi_bounded_y", "unbounded",
  /// "separability"; empty means dispatch from x_bounded / y_bounded.
  std::string setting;
  double p = 1.0;
  std::vector<double> anchor;  // defaults to the origin
  double epsilon = 0.5;
  double gamma = 1.0;
  std::string norm = "l2";  // l1 | l2 | linf
  bool x_bounded = false;
  bool y_bounded = false;
  bool separated = false;
  double kappa_max = std::numeric_limits<double>::infinity();
  std::optional<Matrix> matrix;
  std::optional<DominatingFunctions> dominating;
  std::optional<DominatingFunctions> dominating_secondary;
  std::optional<bool> declared_x_variation_bounded;
  std::optional<bool> declared_y_variation_bounded;
};

WeightProfile weight_profile(const CostModel& model, double lambda);

std::pair<CostModel, WeightProfile> build_cost(const FamilySpec& spec, SpacePtr x_space, SpacePtr y_space,
                                               double lambda);

/// Largest violation of the sandwich inequalities over the truncation (0 when it holds).
double sandwich_violation(const Matrix& cost, const DominatingFunctions& dom);

struct ShiftedCost {
  CostModel model;
  double offset = 0.0;  // EROT_c = EROT_shifted + offset
};

/// c - c_X^- ⊕ c_Y^-, which is nonnegative by the sandwich.
ShiftedCost shift_nonnegative(const CostModel& model, const DiscreteMeasure& r, const DiscreteMeasure& s);

/// Binomial Young-inequality constants used by the integer-p unbounded family:
/// binom(p,i) u^{p-i} v^i <= eta u^{p-1+eps} + K_i v^{q_i}.
struct YoungTerm {
  int i;
  double coefficient;  // K_i
  double exponent;     // q_i
};
std::vector<YoungTerm> young_terms(int p, double epsilon, double gamma, double lambda);

}  // namespace erot
