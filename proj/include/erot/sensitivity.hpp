#pragma once

#include "erot/conditions.hpp"
#include "erot/costs.hpp"
#include "erot/measures.hpp"
#include "erot/sinkhorn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace erot {

/// Linearization of the potential fixed point at a solution with beta_{y1} = 0.
/// Indices on Y \ {y1} are the Y indices with y1 removed, in order.
struct DerivativeOperators {
  SinkhornSolution base;  // AnchoredAtY1
  int y1_index = 0;
  Matrix AX;  // |X| x (|Y|-1): pi_xy / r_x
  Matrix AY;  // (|Y|-1) x |X|: pi_xy / s_y
  Matrix BX;  // |X| x |Y|: pi_xy / (r_x s_y), all y
  Matrix BY;  // (|Y|-1) x |X|: pi_xy / (r_x s_y)
  double contraction_norm = 0.0;  // ||AX AY|| in the max-row-sum norm
  std::string warning;
  Eigen::PartialPivLU<Matrix> lu_x;  // Id - AX AY
  Eigen::PartialPivLU<Matrix> lu_y;  // Id - AY AX
  Vector r, s;

  int nx() const { return static_cast<int>(AX.rows()); }
  int ny() const { return static_cast<int>(BX.cols()); }
};

DerivativeOperators build_operators(const SinkhornSolution& sol, const DiscreteMeasure& r, const DiscreteMeasure& s,
                                    bool x_variation_bounded = true);

/// Dpi(hX, hY). Both directions must sum to zero.
Matrix plan_derivative(const DerivativeOperators& ops, const SignedVector& hX, const SignedVector& hY);
/// Same linear map without the tangent-cone check (used for coordinate columns).
Matrix plan_derivative_raw(const DerivativeOperators& ops, const Vector& hX, const Vector& hY);
/// Same map with the block inverse realized by truncated Neumann series.
/// Requires contraction_norm <= 0.9.
Matrix plan_derivative_neumann(const DerivativeOperators& ops, const Vector& hX, const Vector& hY,
                               double tol = 1e-15);

double value_derivative(const SinkhornSolution& sol, const SignedVector& hX, const SignedVector& hY);

/// Sum_{x,y} (C_X(x) + C_Y(y)) |xi_xy|.
double weighted_plan_norm(const Matrix& xi, const WeightProfile& profile);

/// diag(r) - r r^T.
Matrix multinomial_covariance(const DiscreteMeasure& r);
Matrix multinomial_covariance(const Vector& r);

/// Var_{X~mu}[f(X)].
double weighted_variance(const Vector& f, const Vector& mu);

struct VarianceMode {
  SampleMode mode = SampleMode::OneSampleR;
  double delta = 0.5;  // limit of m / (n + m), used in TwoSample
};

double value_variance(const SinkhornSolution& sol, const DiscreteMeasure& r, const DiscreteMeasure& s,
                      VarianceMode mode);
double divergence_variance(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model, double lambda,
                           VarianceMode mode, const SolverConfig& cfg = {});

/// Rows: functionals; columns: coordinate perturbations e_x (JX) and e_y (JY).
struct FunctionalJacobian {
  Matrix JX, JY;
};
FunctionalJacobian functional_jacobian(const DerivativeOperators& ops, const std::vector<Matrix>& fns,
                                       int threads = 1);

Matrix functional_covariance(const DerivativeOperators& ops, const std::vector<Matrix>& fns, VarianceMode mode,
                             int threads = 1);
double sinkhorn_cost_variance(const DerivativeOperators& ops, const Matrix& cost, VarianceMode mode,
                              int threads = 1);

struct CovarianceReport {
  double sigma2_value = 0.0;             // Var_r[alpha]
  double sigma2_value_s = 0.0;           // Var_s[beta]
  double sigma2_value_two_sample = 0.0;  // delta Var_r[alpha] + (1 - delta) Var_s[beta]
  double delta = 0.5;
  bool has_divergence = false;
  double sigma2_divergence = 0.0;
  double sigma_tilde2_cost = 0.0;
  Matrix functional_cov;
};

CovarianceReport covariance_report(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model,
                                   double lambda, VarianceMode mode, const std::vector<Matrix>& fns,
                                   const SolverConfig& cfg = {}, int threads = 1);

/// Linear maps whose pushforward of the multinomial Gaussian gives the limits.
struct LimitInputs {
  Vector r, s;
  Vector value_x, value_y;  // alpha, beta (value functional)
  FunctionalJacobian jacobian;
};

struct LimitDraws {
  std::vector<double> value;
  Matrix functionals;  // n_draws x k
};

/// Draws of the limiting Gaussian statistics, G_r = sqrt(r) z - r (sqrt(r) . z).
LimitDraws sample_limit(const LimitInputs& in, VarianceMode mode, int n_draws, std::uint64_t seed);

/// Finite-difference comparison of the plan and value derivatives along (hX, hY).
struct FiniteDifferenceCheck {
  std::vector<double> steps;
  std::vector<double> plan_errors;   // l1 norm of pi(t) - pi - t Dpi
  std::vector<double> value_errors;  // |EROT(t) - EROT - t DEROT|
  double plan_slope = 0.0;           // least-squares slope of log error against log t
  double value_slope = 0.0;
  double marginal_residual = 0.0;  // max |row sums of Dpi - hX|, |column sums - hY|
  double contraction_norm = 0.0;
};

/// r + t hX and s + t hY must stay nonnegative for every step.
FiniteDifferenceCheck finite_difference_check(const DiscreteMeasure& r, const DiscreteMeasure& s,
                                              const CostModel& model, double lambda, const SignedVector& hX,
                                              const SignedVector& hY, const std::vector<double>& steps = {1e-2, 1e-3,
                                                                                                          1e-4},
                                              const SolverConfig& cfg = {});

}  // namespace erot
