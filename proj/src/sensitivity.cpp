#include "erot/sensitivity.hpp"

#include "erot/error.hpp"
#include "erot/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace erot {

namespace {

double clamp_variance(double v) { return (v < 0.0 && v >= -1e-12) ? 0.0 : v; }

void require_tangent(const SignedVector& h, const char* name) {
  if (std::abs(h.entries().sum()) > 1e-10)
    throw Error(ErrorCode::NotInTangentCone, std::string(name) + " does not sum to zero");
}

// Column k of the Y \ {y1} block corresponds to Y index y_of(k).
int y_of(int k, int y1) { return k < y1 ? k : k + 1; }

Matrix assemble(const DerivativeOperators& ops, const Vector& hX, const Vector& hY, const Vector& u, const Vector& v) {
  const Matrix& pi = ops.base.plan;
  Matrix out(pi.rows(), pi.cols());
  for (Eigen::Index y = 0; y < pi.cols(); ++y) {
    const double vy = (y == ops.y1_index) ? 0.0 : v[y < ops.y1_index ? y : y - 1];
    for (Eigen::Index x = 0; x < pi.rows(); ++x)
      out(x, y) = pi(x, y) * (hX[x] / ops.r[x] + hY[y] / ops.s[y] - u[x] - vy);
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_lengths(const DerivativeOperators& ops, const Vector& hX, const Vector& hY) {
  if (hX.size() != ops.nx() || hY.size() != ops.ny())
    throw Error(ErrorCode::SpaceMismatch, "direction lengths differ from the operator spaces");
}

}  // namespace

DerivativeOperators build_operators(const SinkhornSolution& sol, const DiscreteMeasure& r, const DiscreteMeasure& s,
                                    bool x_variation_bounded) {
  if (!x_variation_bounded)
    throw Error(ErrorCode::UnboundedXVariation, "plan derivative needs a cost with bounded X-variation");
  if (!r.full_support() || !s.full_support())
    throw Error(ErrorCode::ZeroMassAtom, "plan derivative needs full support on the truncation");
  if (sol.plan.rows() != r.size() || sol.plan.cols() != s.size())
    throw Error(ErrorCode::SpaceMismatch, "solution shape differs from the measures");
  DerivativeOperators ops;
  ops.base = renormalize(sol, r, s, Normalization::AnchoredAtY1);
  ops.y1_index = ops.base.y1_index;
  ops.r = r.weights();
  ops.s = s.weights();
  const int n = r.size(), m = s.size();
  const Matrix& pi = ops.base.plan;
  ops.AX.resize(n, m - 1);
  ops.AY.resize(m - 1, n);
  ops.BY.resize(m - 1, n);
  ops.BX.resize(n, m);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < m; ++y) ops.BX(x, y) = pi(x, y) / (ops.r[x] * ops.s[y]);
  for (int k = 0; k < m - 1; ++k) {
    const int y = y_of(k, ops.y1_index);
    for (int x = 0; x < n; ++x) {
      ops.AX(x, k) = pi(x, y) / ops.r[x];
      ops.AY(k, x) = pi(x, y) / ops.s[y];
      ops.BY(k, x) = pi(x, y) / (ops.r[x] * ops.s[y]);
    }
  }
  const Matrix AXAY = ops.AX * ops.AY;
  ops.contraction_norm = n > 0 ? AXAY.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  if (!(ops.contraction_norm < 1.0))
    throw Error(ErrorCode::ContractionViolated, "||AX AY|| = " + format_double(ops.contraction_norm));
  if (ops.contraction_norm > 0.999)
    ops.warning = "contraction norm " + format_double(ops.contraction_norm) + " is close to one";
  ops.lu_x.compute(Matrix::Identity(n, n) - AXAY);
  ops.lu_y.compute(Matrix::Identity(m - 1, m - 1) - ops.AY * ops.AX);
  return ops;
}

Matrix plan_derivative_raw(const DerivativeOperators& ops, const Vector& hX, const Vector& hY) {
  check_lengths(ops, hX, hY);
  const Vector bX = ops.BX * hY;
  const Vector bY = ops.BY * hX;
  const Vector u = ops.lu_x.solve(bX - ops.AX * bY);
  const Vector v = ops.lu_y.solve(bY - ops.AY * bX);
  return assemble(ops, hX, hY, u, v);
}

Matrix plan_derivative(const DerivativeOperators& ops, const SignedVector& hX, const SignedVector& hY) {
  require_tangent(hX, "hX");
  require_tangent(hY, "hY");
  return plan_derivative_raw(ops, hX.entries(), hY.entries());
}

Matrix plan_derivative_neumann(const DerivativeOperators& ops, const Vector& hX, const Vector& hY, double tol) {
  check_lengths(ops, hX, hY);
  if (ops.contraction_norm > 0.9)
    throw Error(ErrorCode::ContractionViolated, "Neumann summation needs a contraction norm <= 0.9");
  const Vector bX = ops.BX * hY;
  const Vector bY = ops.BY * hX;
  auto series = [&](const Matrix& A, const Matrix& B, const Vector& rhs) {
    Vector term = rhs, acc = rhs;
    for (int k = 0; k < 100000 && term.lpNorm<Eigen::Infinity>() > tol; ++k) {
      term = A * (B * term);
      acc += term;
    }
    return acc;
  };
  const Vector u = series(ops.AX, ops.AY, bX - ops.AX * bY);
  const Vector v = series(ops.AY, ops.AX, bY - ops.AY * bX);
  return assemble(ops, hX, hY, u, v);
}

double value_derivative(const SinkhornSolution& sol, const SignedVector& hX, const SignedVector& hY) {
  require_tangent(hX, "hX");
  require_tangent(hY, "hY");
  if (hX.size() != sol.alpha.size() || hY.size() != sol.beta.size())
    throw Error(ErrorCode::SpaceMismatch, "direction lengths differ from the potentials");
  return sol.alpha.dot(hX.entries()) + sol.beta.dot(hY.entries());
}

double weighted_plan_norm(const Matrix& xi, const WeightProfile& profile) {
  if (xi.rows() != profile.C_X.size() || xi.cols() != profile.C_Y.size())
    throw Error(ErrorCode::SpaceMismatch, "table shape differs from the weight profile");
  double acc = 0.0;
  for (Eigen::Index y = 0; y < xi.cols(); ++y)
    for (Eigen::Index x = 0; x < xi.rows(); ++x)
      acc += (profile.C_X.values[x] + profile.C_Y.values[y]) * std::abs(xi(x, y));
  return acc;
}

Matrix multinomial_covariance(const Vector& r) {
  Matrix out = -r * r.transpose();
  out.diagonal() += r;
  return out;
}

Matrix multinomial_covariance(const DiscreteMeasure& r) { return multinomial_covariance(r.weights()); }

double weighted_variance(const Vector& f, const Vector& mu) {
  if (f.size() != mu.size()) throw Error(ErrorCode::SpaceMismatch, "function and measure lengths differ");
  const double mean = f.dot(mu);
  return clamp_variance((mu.array() * (f.array() - mean).square()).sum());
}

double value_variance(const SinkhornSolution& sol, const DiscreteMeasure& r, const DiscreteMeasure& s,
                      VarianceMode mode) {
  const double vr = weighted_variance(sol.alpha, r.weights());
  const double vs = weighted_variance(sol.beta, s.weights());
  switch (mode.mode) {
    case SampleMode::OneSampleR: return vr;
    case SampleMode::OneSampleS: return vs;
    case SampleMode::TwoSample: return mode.delta * vr + (1.0 - mode.delta) * vs;
  }
  return vr;
}

double divergence_variance(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model, double lambda,
                           VarianceMode mode, const SolverConfig& cfg) {
  require_symmetric(r, s, model);
  const SinkhornSolution rs = solve(r, s, model, lambda, cfg);
  double vr = 0.0, vs = 0.0;
  // For the self-transport problems alpha and beta agree up to a constant; the
  // average keeps the symmetric representative.
  if (mode.mode != SampleMode::OneSampleS) {
    const SinkhornSolution rr = solve(r, r, model, lambda, cfg);
    vr = weighted_variance(rs.alpha - 0.5 * (rr.alpha + rr.beta), r.weights());
  }
  if (mode.mode != SampleMode::OneSampleR) {
    const SinkhornSolution ss = solve(s, s, model, lambda, cfg);
    vs = weighted_variance(rs.beta - 0.5 * (ss.alpha + ss.beta), s.weights());
  }
  switch (mode.mode) {
    case SampleMode::OneSampleR: return vr;
    case SampleMode::OneSampleS: return vs;
    case SampleMode::TwoSample: return mode.delta * vr + (1.0 - mode.delta) * vs;
  }
  return vr;
}

FunctionalJacobian functional_jacobian(const DerivativeOperators& ops, const std::vector<Matrix>& fns, int threads) {
  const int n = ops.nx(), m = ops.ny(), k = static_cast<int>(fns.size());
  for (const auto& f : fns)
    if (f.rows() != n || f.cols() != m) throw Error(ErrorCode::SpaceMismatch, "function table shape differs");
  FunctionalJacobian J{Matrix::Zero(k, n), Matrix::Zero(k, m)};
  parallel_for(n + m, threads, [&](int col) {
    Vector hX = Vector::Zero(n), hY = Vector::Zero(m);
    if (col < n) {
      hX[col] = 1.0;
    } else {
      hY[col - n] = 1.0;
    }
    const Matrix d = plan_derivative_raw(ops, hX, hY);
    for (int f = 0; f < k; ++f) {
      const double val = (fns[f].array() * d.array()).sum();
      if (col < n) {
        J.JX(f, col) = val;
      } else {
        J.JY(f, col - n) = val;
      }
    }
  });
  return J;
}

namespace {

Matrix covariance_from_jacobian(const FunctionalJacobian& J, const Vector& r, const Vector& s, VarianceMode mode) {
  Matrix out = Matrix::Zero(J.JX.rows(), J.JX.rows());
  if (mode.mode != SampleMode::OneSampleS) {
    const double w = mode.mode == SampleMode::TwoSample ? mode.delta : 1.0;
    out += w * J.JX * multinomial_covariance(r) * J.JX.transpose();
  }
  if (mode.mode != SampleMode::OneSampleR) {
    const double w = mode.mode == SampleMode::TwoSample ? 1.0 - mode.delta : 1.0;
    out += w * J.JY * multinomial_covariance(s) * J.JY.transpose();
  }
  Matrix sym = 0.5 * (out + out.transpose());
  for (Eigen::Index i = 0; i < sym.rows(); ++i) sym(i, i) = clamp_variance(sym(i, i));
  return sym;
}

}  // namespace

Matrix functional_covariance(const DerivativeOperators& ops, const std::vector<Matrix>& fns, VarianceMode mode,
                             int threads) {
  return covariance_from_jacobian(functional_jacobian(ops, fns, threads), ops.r, ops.s, mode);
}

double sinkhorn_cost_variance(const DerivativeOperators& ops, const Matrix& cost, VarianceMode mode, int threads) {
  return std::max(0.0, functional_covariance(ops, {cost}, mode, threads)(0, 0));
}

CovarianceReport covariance_report(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model,
                                   double lambda, VarianceMode mode, const std::vector<Matrix>& fns,
                                   const SolverConfig& cfg, int threads) {
  CovarianceReport rep;
  rep.delta = mode.delta;
  const SinkhornSolution sol = solve(r, s, model, lambda, cfg);
  rep.sigma2_value = value_variance(sol, r, s, {SampleMode::OneSampleR, mode.delta});
  rep.sigma2_value_s = value_variance(sol, r, s, {SampleMode::OneSampleS, mode.delta});
  rep.sigma2_value_two_sample = value_variance(sol, r, s, {SampleMode::TwoSample, mode.delta});
  try {
    require_symmetric(r, s, model);
    rep.has_divergence = true;
  } catch (const Error&) {
    rep.has_divergence = false;
  }
  if (rep.has_divergence) rep.sigma2_divergence = divergence_variance(r, s, model, lambda, mode, cfg);
  const DerivativeOperators ops = build_operators(sol, r, s, model.x_variation_bounded);
  std::vector<Matrix> all{model.cost};
  all.insert(all.end(), fns.begin(), fns.end());
  const Matrix cov = functional_covariance(ops, all, mode, threads);
  rep.sigma_tilde2_cost = std::max(0.0, cov(0, 0));
  rep.functional_cov = cov.bottomRightCorner(fns.size(), fns.size());
  return rep;
}

LimitDraws sample_limit(const LimitInputs& in, VarianceMode mode, int n_draws, std::uint64_t seed) {
  LimitDraws out;
  const int k = static_cast<int>(in.jacobian.JX.rows());
  out.functionals = Matrix::Zero(std::max(n_draws, 0), k);
  if (n_draws <= 0) return out;
  out.value.resize(n_draws);
  const Vector sr = in.r.cwiseSqrt();
  const Vector ss = in.s.cwiseSqrt();
  const bool use_r = mode.mode != SampleMode::OneSampleS;
  const bool use_s = mode.mode != SampleMode::OneSampleR;
  const double wr = mode.mode == SampleMode::TwoSample ? std::sqrt(mode.delta) : 1.0;
  const double ws = mode.mode == SampleMode::TwoSample ? std::sqrt(1.0 - mode.delta) : 1.0;
  std::mt19937_64 gen(splitmix64(seed));
  std::normal_distribution<double> normal;
  Vector zr(in.r.size()), zs(in.s.size());
  for (int d = 0; d < n_draws; ++d) {
    double value = 0.0;
    Vector fvals = Vector::Zero(k);
    if (use_r) {
      for (Eigen::Index i = 0; i < zr.size(); ++i) zr[i] = normal(gen);
      const Vector G = sr.cwiseProduct(zr) - in.r * sr.dot(zr);
      value += wr * in.value_x.dot(G);
      if (k > 0) fvals += wr * (in.jacobian.JX * G);
    }
    if (use_s) {
      for (Eigen::Index j = 0; j < zs.size(); ++j) zs[j] = normal(gen);
      const Vector G = ss.cwiseProduct(zs) - in.s * ss.dot(zs);
      value += ws * in.value_y.dot(G);
      if (k > 0) fvals += ws * (in.jacobian.JY * G);
    }
    out.value[d] = value;
    if (k > 0) out.functionals.row(d) = fvals.transpose();
  }
  return out;
}

namespace {

double log_slope(const std::vector<double>& t, const std::vector<double>& e) {
  const int n = static_cast<int>(t.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += std::log(t[i]) / n;
    my += std::log(std::max(e[i], 1e-300)) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = std::log(t[i]) - mx;
    sxy += dx * (std::log(std::max(e[i], 1e-300)) - my);
    sxx += dx * dx;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

FiniteDifferenceCheck finite_difference_check(const DiscreteMeasure& r, const DiscreteMeasure& s,
                                              const CostModel& model, double lambda, const SignedVector& hX,
                                              const SignedVector& hY, const std::vector<double>& steps,
                                              const SolverConfig& cfg) {
  if (steps.size() < 2) throw Error(ErrorCode::EmptyInput, "finite-difference check needs at least two steps");
  const SinkhornSolution base = solve(r, s, model, lambda, cfg);
  const DerivativeOperators ops = build_operators(base, r, s, model.x_variation_bounded);
  const Matrix dpi = plan_derivative(ops, hX, hY);
  const double dvalue = value_derivative(base, hX, hY);

  FiniteDifferenceCheck out;
  out.steps = steps;
  out.contraction_norm = ops.contraction_norm;
  out.marginal_residual = std::max((dpi.rowwise().sum() - hX.entries()).cwiseAbs().maxCoeff(),
                                   (dpi.colwise().sum().transpose() - hY.entries()).cwiseAbs().maxCoeff());
  SolverConfig warm = cfg;
  warm.warm_alpha = base.alpha;
  warm.warm_beta = base.beta;
  for (double t : steps) {
    const DiscreteMeasure rt(r.space(), Vector(r.weights() + t * hX.entries()), {true, r.tail()});
    const DiscreteMeasure st(s.space(), Vector(s.weights() + t * hY.entries()), {true, s.tail()});
    const SinkhornSolution sol = solve(rt, st, model, lambda, warm);
    out.plan_errors.push_back((sol.plan - base.plan - t * dpi).cwiseAbs().sum());
    out.value_errors.push_back(std::abs(sol.value - base.value - t * dvalue));
  }
  out.plan_slope = log_slope(out.steps, out.plan_errors);
  out.value_slope = log_slope(out.steps, out.value_errors);
  return out;
}

}  // namespace erot
