#include "erot/sinkhorn.hpp"

#include "erot/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace erot {

std::string to_string(Normalization n) {
  return n == Normalization::Balanced ? "balanced" : "anchored_at_y1";
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// out_i = -LSE_j(K(i, j) + g_j) over the rows listed in `rows` and columns in `cols`.
// K is stored row-major per direction so both updates stream through memory.
void lse_update(const std::vector<double>& K, int stride, const std::vector<double>& g, std::vector<double>& out) {
  const int n = static_cast<int>(out.size());
  const int m = static_cast<int>(g.size());
  for (int i = 0; i < n; ++i) {
    const double* row = K.data() + static_cast<std::size_t>(i) * stride;
    double mx = kNegInf;
    for (int j = 0; j < m; ++j) mx = std::max(mx, row[j] + g[j]);
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += std::exp(row[j] + g[j] - mx);
    out[i] = -(mx + std::log(acc));
  }
}

double log_sum_exp(const Vector& v) {
  double mx = kNegInf;
  for (Eigen::Index k = 0; k < v.size(); ++k) mx = std::max(mx, v[k]);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) acc += std::exp(v[k] - mx);
  return mx + std::log(acc);
}

void check_inputs(const DiscreteMeasure& r, const DiscreteMeasure& s, const Matrix& cost, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidFamilyParams, "lambda must be positive");
  if (cost.rows() != r.size() || cost.cols() != s.size())
    throw Error(ErrorCode::SpaceMismatch, "cost shape differs from the measures");
  if (!cost.allFinite()) throw Error(ErrorCode::InvalidFamilyParams, "cost contains non-finite entries");
}

void apply_normalization(SinkhornSolution& sol, const DiscreteMeasure& r, const DiscreteMeasure& s,
                         Normalization target) {
  double shift = 0.0;  // alpha += shift, beta -= shift
  if (target == Normalization::Balanced) {
    shift = -(sol.alpha.dot(r.weights()) - sol.beta.dot(s.weights())) / 2.0;
  } else {
    shift = sol.beta[sol.y1_index];
  }
  sol.alpha.array() += shift;
  sol.beta.array() -= shift;
  if (target == Normalization::AnchoredAtY1) sol.beta[sol.y1_index] = 0.0;
  sol.normalization = target;
}

}  // namespace

SinkhornSolution solve(const DiscreteMeasure& r, const DiscreteMeasure& s, const Matrix& cost, double lambda,
                       const SolverConfig& cfg) {
  check_inputs(r, s, cost, lambda);
  const std::vector<int> I = r.support();
  const std::vector<int> J = s.support();
  const int n = static_cast<int>(I.size());
  const int m = static_cast<int>(J.size());

  // Scaled potentials f = alpha / lambda, g = beta / lambda. The update for f
  // reads the row kernel Kr(i, j) = -c/lambda + log s_j, the update for g the
  // column kernel Kc(j, i) = -c/lambda + log r_i.
  std::vector<double> Kr(static_cast<std::size_t>(n) * m), Kc(static_cast<std::size_t>(m) * n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < m; ++b) {
      const double kc = -cost(I[a], J[b]) / lambda;
      Kr[static_cast<std::size_t>(a) * m + b] = kc + std::log(s[J[b]]);
      Kc[static_cast<std::size_t>(b) * n + a] = kc + std::log(r[I[a]]);
    }
  }
  std::vector<double> f(n, 0.0), g(m, 0.0), f_next(n);
  if (cfg.warm_beta) {
    if (cfg.warm_beta->size() != s.size()) throw Error(ErrorCode::SpaceMismatch, "warm start length differs");
    for (int b = 0; b < m; ++b) g[b] = (*cfg.warm_beta)[J[b]] / lambda;
  } else if (cfg.warm_alpha) {
    if (cfg.warm_alpha->size() != r.size()) throw Error(ErrorCode::SpaceMismatch, "warm start length differs");
    for (int a = 0; a < n; ++a) f[a] = (*cfg.warm_alpha)[I[a]] / lambda;
    lse_update(Kc, n, f, g);
  }
  lse_update(Kr, m, g, f);

  int it = 0;
  double residual = std::numeric_limits<double>::infinity();
  for (;;) {
    // Column marginals are exact after the g update; the row marginal of
    // (f, g) is r_x exp(f_x - f_next_x), so the residual comes from f_next.
    lse_update(Kc, n, f, g);
    lse_update(Kr, m, g, f_next);
    residual = 0.0;
    for (int a = 0; a < n; ++a) residual += r[I[a]] * std::abs(std::expm1(f[a] - f_next[a]));
    ++it;
    if (!std::isfinite(residual)) throw Error(ErrorCode::NumericOverflow, "non-finite marginal residual");
    if (residual <= cfg.tol) break;
    if (it >= cfg.max_iter)
      throw Error(ErrorCode::NonConvergence, "marginal residual " + std::to_string(residual) + " after " +
                                                 std::to_string(it) + " iterations");
    f.swap(f_next);
  }

  SinkhornSolution sol;
  sol.lambda = lambda;
  sol.iterations = it;
  sol.y1_index = J.front();
  sol.alpha = Vector::Zero(r.size());
  sol.beta = Vector::Zero(s.size());
  for (int a = 0; a < n; ++a) sol.alpha[I[a]] = lambda * f[a];
  for (int b = 0; b < m; ++b) sol.beta[J[b]] = lambda * g[b];

  // Extend to zero-mass atoms through the fixed-point right-hand sides.
  for (int x = 0; x < r.size(); ++x) {
    if (r[x] > 0.0) continue;
    Vector terms(m);
    for (int b = 0; b < m; ++b) terms[b] = (sol.beta[J[b]] - cost(x, J[b])) / lambda + std::log(s[J[b]]);
    sol.alpha[x] = -lambda * log_sum_exp(terms);
  }
  for (int y = 0; y < s.size(); ++y) {
    if (s[y] > 0.0) continue;
    Vector terms(n);
    for (int a = 0; a < n; ++a) terms[a] = (sol.alpha[I[a]] - cost(I[a], y)) / lambda + std::log(r[I[a]]);
    sol.beta[y] = -lambda * log_sum_exp(terms);
  }
  if (!sol.alpha.allFinite() || !sol.beta.allFinite())
    throw Error(ErrorCode::NumericOverflow, "non-finite potentials");

  apply_normalization(sol, r, s, cfg.normalization);

  sol.plan = Matrix::Zero(r.size(), s.size());
  double mi = 0.0, mass = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < m; ++b) {
      const int x = I[a], y = J[b];
      const double z = (sol.alpha[x] + sol.beta[y] - cost(x, y)) / lambda;
      const double p = std::exp(z) * r[x] * s[y];
      sol.plan(x, y) = p;
      mi += p * z;
      mass += p;
    }
  }
  sol.cost_part = (sol.plan.array() * cost.array()).sum();
  sol.mutual_info = std::max(mi, 0.0);
  sol.value = sol.alpha.dot(r.weights()) + sol.beta.dot(s.weights());
  const double primal = sol.cost_part + lambda * mi;
  const double dual = sol.value - lambda * (mass - 1.0);
  sol.duality_gap = primal - dual;
  sol.marginal_residual = (sol.plan.rowwise().sum() - r.weights()).lpNorm<1>() +
                          (sol.plan.colwise().sum().transpose() - s.weights()).lpNorm<1>();
  return sol;
}

SinkhornSolution solve(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model, double lambda,
                       const SolverConfig& cfg) {
  return solve(r, s, model.cost, lambda, cfg);
}

SinkhornSolution renormalize(const SinkhornSolution& sol, const DiscreteMeasure& r, const DiscreteMeasure& s,
                             Normalization target) {
  SinkhornSolution out = sol;
  apply_normalization(out, r, s, target);
  return out;
}

double mutual_information(const Matrix& plan, const DiscreteMeasure& r, const DiscreteMeasure& s) {
  if (plan.rows() != r.size() || plan.cols() != s.size())
    throw Error(ErrorCode::SpaceMismatch, "plan shape differs from the measures");
  const double dev = (plan.rowwise().sum() - r.weights()).lpNorm<Eigen::Infinity>() +
                     (plan.colwise().sum().transpose() - s.weights()).lpNorm<Eigen::Infinity>();
  if (dev > 1e-8) throw Error(ErrorCode::MarginalMismatch, "plan marginals deviate by " + std::to_string(dev));
  double acc = 0.0;
  for (Eigen::Index x = 0; x < plan.rows(); ++x)
    for (Eigen::Index y = 0; y < plan.cols(); ++y) {
      const double p = plan(x, y);
      if (p > 0.0) acc += p * std::log(p / (r[x] * s[y]));
    }
  return std::max(acc, 0.0);
}

void require_symmetric(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model) {
  if (!r.space()->same_as(*s.space()) || model.rows() != model.cols() || model.rows() != r.size())
    throw Error(ErrorCode::AsymmetricSetup, "divergence needs r and s on the same space");
  const double scale = 1.0 + model.cost.cwiseAbs().maxCoeff();
  if ((model.cost - model.cost.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error(ErrorCode::AsymmetricSetup, "divergence needs a symmetric cost");
}

double sinkhorn_divergence(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model, double lambda,
                           const SolverConfig& cfg) {
  require_symmetric(r, s, model);
  const double rs = solve(r, s, model, lambda, cfg).value;
  const double rr = solve(r, r, model, lambda, cfg).value;
  const double ss = solve(s, s, model, lambda, cfg).value;
  return rs - 0.5 * (rr + ss);
}

double BoundReport::max_violation() const {
  return std::max({alpha_lower, alpha_upper, beta_lower, beta_upper, plan_lower, plan_upper});
}

BoundReport verify_bounds(const SinkhornSolution& sol_in, const CostModel& model, const DiscreteMeasure& r,
                          const DiscreteMeasure& s) {
  const SinkhornSolution sol = renormalize(sol_in, r, s, Normalization::Balanced);
  const auto& d = model.primary;
  const double lambda = sol.lambda;
  const Vector& rw = r.weights();
  const Vector& sw = s.weights();
  const double mid = (d.x_lower.dot(rw) + d.y_lower.dot(sw)) / 2.0;
  const double cxp_r = d.x_upper.dot(rw);
  const double cyp_s = d.y_upper.dot(sw);

  // log <e, mu> evaluated without forming e.
  auto log_e_mass = [&](const Vector& lo, const Vector& up, const Vector& w) {
    std::vector<double> terms;
    for (Eigen::Index k = 0; k < w.size(); ++k)
      if (w[k] > 0.0) terms.push_back((up[k] - lo[k]) / lambda + std::log(w[k]));
    return log_sum_exp(Eigen::Map<const Vector>(terms.data(), static_cast<Eigen::Index>(terms.size())));
  };
  const double LX = log_e_mass(d.x_lower, d.x_upper, rw);
  const double LY = log_e_mass(d.y_lower, d.y_upper, sw);

  BoundReport rep;
  for (int x = 0; x < r.size(); ++x) {
    const double lo = d.x_lower[x] - cxp_r + mid - lambda * LY;
    const double up = d.x_upper[x] + cyp_s - mid;
    rep.alpha_lower = std::max(rep.alpha_lower, lo - sol.alpha[x]);
    rep.alpha_upper = std::max(rep.alpha_upper, sol.alpha[x] - up);
  }
  for (int y = 0; y < s.size(); ++y) {
    const double lo = d.y_lower[y] - cyp_s + mid - lambda * LX;
    const double up = d.y_upper[y] + cxp_r - mid;
    rep.beta_lower = std::max(rep.beta_lower, lo - sol.beta[y]);
    rep.beta_upper = std::max(rep.beta_upper, sol.beta[y] - up);
  }
  rep.plan_lower_ratio = 0.0;
  rep.plan_upper_ratio = 0.0;
  for (int x = 0; x < r.size(); ++x) {
    if (!(rw[x] > 0.0)) continue;
    const double vx = (d.x_upper[x] - d.x_lower[x]) / lambda;
    for (int y = 0; y < s.size(); ++y) {
      if (!(sw[y] > 0.0)) continue;
      const double vy = (d.y_upper[y] - d.y_lower[y]) / lambda;
      const double rs = rw[x] * sw[y];
      const double log_lo = -vx - vy - 2.0 * LX - 2.0 * LY;
      const double log_up = vx + vy + LX + LY;
      const double p = sol.plan(x, y);
      const double lo = rs * std::exp(log_lo);
      const double up = rs * std::exp(log_up);
      rep.plan_lower = std::max(rep.plan_lower, lo - p);
      rep.plan_upper = std::max(rep.plan_upper, p - up);
      rep.plan_lower_ratio = std::max(rep.plan_lower_ratio, lo / p);
      rep.plan_upper_ratio = std::max(rep.plan_upper_ratio, p / up);
    }
  }
  return rep;
}

}  // namespace erot
