#pragma once

#include "erot/costs.hpp"
#include "erot/measures.hpp"

#include <optional>
#include <string>

namespace erot {

enum class Normalization { Balanced, AnchoredAtY1 };

std::string to_string(Normalization n);

struct SolverConfig {
  double tol = 1e-10;  // l1 row-marginal residual
  int max_iter = 100000;
  Normalization normalization = Normalization::Balanced;
  /// Optional starting potentials (full length, unscaled).
  std::optional<Vector> warm_alpha, warm_beta;
};

struct SinkhornSolution {
  Vector alpha, beta;
  Matrix plan;
  double lambda = 1.0;
  double value = 0.0;      // <alpha, r> + <beta, s>
  double cost_part = 0.0;  // <c, plan>
  double mutual_info = 0.0;
  double duality_gap = 0.0;  // primal objective minus dual objective
  int iterations = 0;
  double marginal_residual = 0.0;  // l1 over rows and columns
  Normalization normalization = Normalization::Balanced;
  int y1_index = -1;  // first atom of Y with positive mass
};

SinkhornSolution solve(const DiscreteMeasure& r, const DiscreteMeasure& s, const Matrix& cost, double lambda,
                       const SolverConfig& cfg = {});
SinkhornSolution solve(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model, double lambda,
                       const SolverConfig& cfg = {});

/// Shifts (alpha, beta) by a constant to the requested normalization.
SinkhornSolution renormalize(const SinkhornSolution& sol, const DiscreteMeasure& r, const DiscreteMeasure& s,
                             Normalization target);

/// Sum pi log(pi / (r s)) with 0 log 0 = 0.
double mutual_information(const Matrix& plan, const DiscreteMeasure& r, const DiscreteMeasure& s);

/// EROT(r,s) - (EROT(r,r) + EROT(s,s)) / 2.
double sinkhorn_divergence(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model, double lambda,
                           const SolverConfig& cfg = {});

/// Throws AsymmetricSetup unless the cost lives on X = Y and is symmetric.
void require_symmetric(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model);

/// Largest amount by which each family of bounds is exceeded (0 when it holds).
struct BoundReport {
  double alpha_lower = 0.0, alpha_upper = 0.0;
  double beta_lower = 0.0, beta_upper = 0.0;
  double plan_lower = 0.0, plan_upper = 0.0;
  /// Smallest slack of the plan bounds relative to r_x s_y (tightness diagnostic).
  double plan_lower_ratio = 0.0, plan_upper_ratio = 0.0;

  double max_violation() const;
};

BoundReport verify_bounds(const SinkhornSolution& sol, const CostModel& model, const DiscreteMeasure& r,
                          const DiscreteMeasure& s);

}  // namespace erot
