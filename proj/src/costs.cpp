#include "erot/costs.hpp"

#include "erot/error.hpp"

#include <algorithm>
#include <cmath>

namespace erot {

std::string to_string(CostFamily family) {
  switch (family) {
    case CostFamily::Bounded: return "bounded";
    case CostFamily::MetricPower: return "metric_power";
    case CostFamily::SemiBoundedMetricPower: return "semi_bounded_metric_power";
    case CostFamily::SeparabilityMetric: return "separability_metric";
    case CostFamily::NormPower: return "norm_power";
    case CostFamily::Custom: return "custom";
  }
  return "custom";
}

Growth Growth::operator*(const Growth& other) const {
  if (!known || !other.known) return unknown();
  Growth out = *this;
  out.degree += other.degree;
  for (const auto& [power, rate] : other.exp_terms) out.exp_terms[power] += rate;
  return out;
}

Growth Growth::pow(double k) const {
  if (!known) return unknown();
  Growth out = *this;
  out.degree *= k;
  for (auto& [power, rate] : out.exp_terms) rate *= k;
  return out;
}

std::optional<std::pair<double, double>> Growth::leading_exp() const {
  for (auto it = exp_terms.rbegin(); it != exp_terms.rend(); ++it) {
    if (it->first > 0.0 && std::abs(it->second) > 1e-12) return *it;
  }
  return std::nullopt;
}

namespace {

Growth weight_growth(const SideAsymptotics& side) {
  if (!side.known) return Growth::unknown();
  return Growth::polynomial(side.c_degree);
}

Growth exp_growth(const SideAsymptotics& side, double lambda) {
  if (!side.known) return Growth::unknown();
  Growth g;
  for (const auto& [power, coef] : side.variation_terms)
    if (power > 0.0 && coef != 0.0) g.exp_terms[power] += coef / lambda;
  return g;
}

Vector c_weight(const Vector& lower, const Vector& upper) {
  return (1.0 + upper.array().abs() + lower.array().abs()).matrix();
}

Vector e_weight(const Vector& lower, const Vector& upper, double lambda) {
  return ((upper - lower).array() / lambda).exp().matrix();
}

double binomial(int n, int k) {
  double out = 1.0;
  for (int j = 1; j <= k; ++j) out = out * (n - k + j) / j;
  return out;
}

bool is_integer(double p) { return std::abs(p - std::round(p)) < 1e-12; }

double norm_of(const std::vector<double>& v, const std::string& norm) {
  double acc = 0.0;
  if (norm == "l1") {
    for (double c : v) acc += std::abs(c);
    return acc;
  }
  if (norm == "linf") {
    for (double c : v) acc = std::max(acc, std::abs(c));
    return acc;
  }
  for (double c : v) acc += c * c;
  return std::sqrt(acc);
}

struct Geometry {
  Vector dx, dy;  // distances to the anchor
  Matrix dxy;     // pairwise distances
};

Geometry geometry(const FamilySpec& spec, const IndexedSpace& X, const IndexedSpace& Y) {
  if (!X.has_coords() || !Y.has_coords())
    throw Error(ErrorCode::MissingCoordinates, "metric cost families need atom coordinates");
  if (X.dim() != Y.dim()) throw Error(ErrorCode::SpaceMismatch, "X and Y coordinates differ in dimension");
  if (spec.norm != "l1" && spec.norm != "l2" && spec.norm != "linf")
    throw Error(ErrorCode::InvalidFamilyParams, "unknown norm '" + spec.norm + "'");
  std::vector<double> z = spec.anchor;
  if (z.empty()) z.assign(X.dim(), 0.0);
  if (static_cast<int>(z.size()) != X.dim())
    throw Error(ErrorCode::InvalidFamilyParams, "anchor dimension differs from coordinate dimension");
  auto diff = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
    return d;
  };
  Geometry g;
  g.dx.resize(X.size());
  g.dy.resize(Y.size());
  g.dxy.resize(X.size(), Y.size());
  for (int i = 0; i < X.size(); ++i) g.dx[i] = norm_of(diff(X.coord(i), z), spec.norm);
  for (int j = 0; j < Y.size(); ++j) g.dy[j] = norm_of(diff(Y.coord(j), z), spec.norm);
  for (int i = 0; i < X.size(); ++i)
    for (int j = 0; j < Y.size(); ++j) g.dxy(i, j) = norm_of(diff(X.coord(i), Y.coord(j)), spec.norm);
  return g;
}

SideAsymptotics constant_side() { return {true, 0.0, {}}; }

void set_bounded(CostModel& m) {
  const double cmax = m.cost.maxCoeff();
  if (m.cost.minCoeff() < 0.0)
    throw Error(ErrorCode::InvalidFamilyParams, "bounded family needs a nonnegative cost");
  const int nx = m.rows(), ny = m.cols();
  m.primary = {Vector::Zero(nx), Vector::Constant(nx, cmax / 2.0), Vector::Zero(ny), Vector::Constant(ny, cmax / 2.0)};
  m.primary_asymptotics = {constant_side(), constant_side()};
  m.x_variation_bounded = m.y_variation_bounded = true;
  m.setting = "bounded";
}

// Bounded side has radius R; the other side is at distance t from the anchor.
// Returns (lower, upper) = ((t - R)_+^p, (t + R)^p) and the variation asymptotics.
std::pair<Vector, Vector> semi_bounded_side(const Vector& t, double R, double p, SideAsymptotics& asym) {
  Vector lower(t.size()), upper(t.size());
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    lower[k] = std::pow(std::max(t[k] - R, 0.0), p);
    upper[k] = std::pow(t[k] + R, p);
  }
  asym = {true, p, {}};
  if (R > 0.0) {
    if (is_integer(p)) {
      const int pi = static_cast<int>(std::lround(p));
      for (int i = 1; i <= pi; i += 2) asym.variation_terms[p - i] += 2.0 * binomial(pi, i) * std::pow(R, i);
    } else {
      asym.variation_terms[p - 1.0] += 2.0 * p * R;
    }
  }
  return {lower, upper};
}

void set_semi_bounded(CostModel& m, const Geometry& g, double p, bool x_is_bounded) {
  const int nx = m.rows(), ny = m.cols();
  SideAsymptotics unbounded_side;
  if (x_is_bounded) {
    const double R = g.dx.maxCoeff();
    auto [lo, up] = semi_bounded_side(g.dy, R, p, unbounded_side);
    m.primary = {Vector::Zero(nx), Vector::Zero(nx), lo, up};
    m.primary_asymptotics = {constant_side(), unbounded_side};
    m.x_variation_bounded = true;
    m.y_variation_bounded = std::abs(p - 1.0) < 1e-12;
    m.setting = "semi_bounded";
  } else {
    const double R = g.dy.maxCoeff();
    auto [lo, up] = semi_bounded_side(g.dx, R, p, unbounded_side);
    m.primary = {lo, up, Vector::Zero(ny), Vector::Zero(ny)};
    m.primary_asymptotics = {unbounded_side, constant_side()};
    m.x_variation_bounded = std::abs(p - 1.0) < 1e-12;
    m.y_variation_bounded = true;
    m.setting = "semi_bounded_y";
  }
}

void set_separability(CostModel& m, const Geometry& g, const FamilySpec& spec) {
  if (std::abs(spec.p - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidFamilyParams, "separability family requires p = 1");
  double kappa = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) kappa = std::max(kappa, g.dx[i] + g.dy[j] - g.dxy(i, j));
  if (kappa > spec.kappa_max)
    throw Error(ErrorCode::SeparabilityViolated, "kappa = " + std::to_string(kappa) + " exceeds kappa_max = " +
                                                     std::to_string(spec.kappa_max));
  m.kappa = kappa;
  m.primary = {(g.dx.array() - kappa / 2.0).matrix(), g.dx, (g.dy.array() - kappa / 2.0).matrix(), g.dy};
  SideAsymptotics side{true, 1.0, {}};
  m.primary_asymptotics = {side, side};
  m.x_variation_bounded = m.y_variation_bounded = true;
  m.setting = "separability";
}

// Collection where `a` carries (-1)^p t^p ∓ sum K_i t^{q_i} and `b` carries t^p ± (λγ/2) t^{p-1+ε}.
void young_collection(const Vector& ta, const Vector& tb, int p, const FamilySpec& spec, double lambda,
                      Vector& a_lo, Vector& a_up, Vector& b_lo, Vector& b_up, SideAsymptotics& a_asym,
                      SideAsymptotics& b_asym) {
  const auto terms = young_terms(p, spec.epsilon, spec.gamma, lambda);
  const double half = lambda * spec.gamma / 2.0;
  const double sign = (p % 2 == 0) ? 1.0 : -1.0;
  const double pe = p - 1.0 + spec.epsilon;
  a_lo.resize(ta.size());
  a_up.resize(ta.size());
  for (Eigen::Index k = 0; k < ta.size(); ++k) {
    double young = 0.0;
    for (const auto& term : terms) young += term.coefficient * std::pow(ta[k], term.exponent);
    const double tp = std::pow(ta[k], p);
    a_lo[k] = sign * tp - young;
    a_up[k] = tp + young;
  }
  b_lo.resize(tb.size());
  b_up.resize(tb.size());
  for (Eigen::Index k = 0; k < tb.size(); ++k) {
    const double tp = std::pow(tb[k], p);
    const double slack = half * std::pow(tb[k], pe);
    b_lo[k] = tp - slack;
    b_up[k] = tp + slack;
  }
  a_asym = {true, static_cast<double>(p), {}};
  if (sign < 0.0) a_asym.variation_terms[p] += 2.0;
  for (const auto& term : terms) {
    a_asym.variation_terms[term.exponent] += 2.0 * term.coefficient;
    a_asym.c_degree = std::max(a_asym.c_degree, term.exponent);
  }
  b_asym = {true, static_cast<double>(p), {{pe, 2.0 * half}}};
}

void set_unbounded(CostModel& m, const Geometry& g, const FamilySpec& spec, double lambda) {
  const double p = spec.p;
  m.x_variation_bounded = m.y_variation_bounded = false;
  m.setting = "unbounded";
  if (!is_integer(p)) {
    const double k = std::pow(2.0, p - 1.0);
    const Vector ux = (k * g.dx.array().pow(p)).matrix();
    const Vector uy = (k * g.dy.array().pow(p)).matrix();
    m.primary = {Vector::Zero(m.rows()), ux, Vector::Zero(m.cols()), uy};
    SideAsymptotics side{true, p, {{p, k}}};
    m.primary_asymptotics = {side, side};
    return;
  }
  if (!(spec.epsilon > 0.0) || !(spec.gamma > 0.0))
    throw Error(ErrorCode::InvalidFamilyParams, "epsilon and gamma must be positive");
  const int pi = static_cast<int>(std::lround(p));
  DominatingFunctions primary, secondary;
  CollectionAsymptotics pa, sa;
  young_collection(g.dx, g.dy, pi, spec, lambda, primary.x_lower, primary.x_upper, primary.y_lower, primary.y_upper,
                   pa.x, pa.y);
  young_collection(g.dy, g.dx, pi, spec, lambda, secondary.y_lower, secondary.y_upper, secondary.x_lower,
                   secondary.x_upper, sa.y, sa.x);
  m.primary = primary;
  m.secondary = secondary;
  m.primary_asymptotics = pa;
  m.secondary_asymptotics = sa;
}

std::string dispatch_setting(const FamilySpec& spec) {
  if (!spec.setting.empty()) return spec.setting;
  if (spec.x_bounded && spec.y_bounded) return "bounded";
  if (spec.x_bounded) return "semi_bounded";
  if (spec.y_bounded) return "semi_bounded_y";
  return spec.separated ? "separability" : "unbounded";
}

void build_metric(CostModel& m, const FamilySpec& spec, double lambda, const std::string& setting) {
  if (!(spec.p >= 1.0)) throw Error(ErrorCode::InvalidFamilyParams, "metric power needs p >= 1");
  const Geometry g = geometry(spec, *m.x_space, *m.y_space);
  m.cost = g.dxy.array().pow(spec.p).matrix();
  if (setting == "bounded") {
    set_bounded(m);
  } else if (setting == "semi_bounded") {
    set_semi_bounded(m, g, spec.p, true);
  } else if (setting == "semi_bounded_y") {
    set_semi_bounded(m, g, spec.p, false);
  } else if (setting == "unbounded") {
    set_unbounded(m, g, spec, lambda);
  } else if (setting == "separability") {
    set_separability(m, g, spec);
  } else {
    throw Error(ErrorCode::InvalidFamilyParams, "unknown setting '" + setting + "'");
  }
}

void check_dominating_shape(const DominatingFunctions& d, int nx, int ny) {
  if (d.x_lower.size() != nx || d.x_upper.size() != nx || d.y_lower.size() != ny || d.y_upper.size() != ny)
    throw Error(ErrorCode::SpaceMismatch, "dominating functions do not match the space sizes");
}

}  // namespace

std::vector<YoungTerm> young_terms(int p, double epsilon, double gamma, double lambda) {
  std::vector<YoungTerm> out;
  if (p < 2) return out;
  const double pe = p - 1.0 + epsilon;
  const double eta = lambda * gamma / (2.0 * (p - 1));
  for (int i = 1; i <= p - 1; ++i) {
    const double P = pe / (p - i);
    const double Q = pe / (i - 1.0 + epsilon);
    const double K = std::pow(binomial(p, i), Q) * std::pow(eta * P, -Q / P) / Q;
    out.push_back({i, K, i * Q});
  }
  return out;
}

WeightFunction WeightProfile::k_X(double delta) const {
  return {(C_X.values.array() * e_X.values.array().pow(delta)).matrix()};
}

WeightFunction WeightProfile::k_Y(double delta) const {
  return {(C_Y.values.array() * e_Y.values.array().pow(delta)).matrix()};
}

WeightProfile weight_profile(const CostModel& model, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidFamilyParams, "lambda must be positive");
  WeightProfile w;
  w.lambda = lambda;
  const auto& d = model.primary;
  const auto& t = model.tilde();
  w.C_X = {c_weight(d.x_lower, d.x_upper)};
  w.C_Y = {c_weight(d.y_lower, d.y_upper)};
  w.e_X = {e_weight(d.x_lower, d.x_upper, lambda)};
  w.e_Y = {e_weight(d.y_lower, d.y_upper, lambda)};
  w.Ct_X = {c_weight(t.x_lower, t.x_upper)};
  w.Ct_Y = {c_weight(t.y_lower, t.y_upper)};
  w.et_X = {e_weight(t.x_lower, t.x_upper, lambda)};
  w.et_Y = {e_weight(t.y_lower, t.y_upper, lambda)};
  const auto& pa = model.primary_asymptotics;
  const auto& ta = model.tilde_asymptotics();
  w.gC_X = weight_growth(pa.x);
  w.gC_Y = weight_growth(pa.y);
  w.ge_X = exp_growth(pa.x, lambda);
  w.ge_Y = exp_growth(pa.y, lambda);
  w.gCt_X = weight_growth(ta.x);
  w.gCt_Y = weight_growth(ta.y);
  w.get_X = exp_growth(ta.x, lambda);
  w.get_Y = exp_growth(ta.y, lambda);
  w.family = model.family;
  w.x_variation_bounded = model.x_variation_bounded;
  w.y_variation_bounded = model.y_variation_bounded;
  return w;
}

double sandwich_violation(const Matrix& cost, const DominatingFunctions& dom) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      const double c = cost(i, j);
      const double scale = 1.0 + std::abs(c);
      worst = std::max(worst, (dom.x_lower[i] + dom.y_lower[j] - c) / scale);
      worst = std::max(worst, (c - dom.x_upper[i] - dom.y_upper[j]) / scale);
    }
  }
  for (Eigen::Index i = 0; i < dom.x_lower.size(); ++i) worst = std::max(worst, dom.x_lower[i] - dom.x_upper[i]);
  for (Eigen::Index j = 0; j < dom.y_lower.size(); ++j) worst = std::max(worst, dom.y_lower[j] - dom.y_upper[j]);
  return worst;
}

std::pair<CostModel, WeightProfile> build_cost(const FamilySpec& spec, SpacePtr x_space, SpacePtr y_space,
                                               double lambda) {
  if (!x_space || !y_space) throw Error(ErrorCode::SpaceMismatch, "cost needs both spaces");
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidFamilyParams, "lambda must be positive");
  CostModel m;
  m.x_space = x_space;
  m.y_space = y_space;
  m.family = spec.family;
  const int nx = x_space->size(), ny = y_space->size();

  switch (spec.family) {
    case CostFamily::Bounded: {
      if (spec.base == "indicator") {
        m.cost.resize(nx, ny);
        for (int i = 0; i < nx; ++i)
          for (int j = 0; j < ny; ++j) m.cost(i, j) = x_space->label(i) == y_space->label(j) ? 0.0 : 1.0;
      } else if (spec.base == "metric") {
        if (!(spec.p >= 1.0)) throw Error(ErrorCode::InvalidFamilyParams, "metric power needs p >= 1");
        m.cost = geometry(spec, *x_space, *y_space).dxy.array().pow(spec.p).matrix();
      } else if (spec.base == "matrix") {
        if (!spec.matrix) throw Error(ErrorCode::InvalidFamilyParams, "bounded matrix cost without a matrix");
        m.cost = *spec.matrix;
      } else {
        throw Error(ErrorCode::InvalidFamilyParams, "unknown bounded base '" + spec.base + "'");
      }
      if (m.cost.rows() != nx || m.cost.cols() != ny)
        throw Error(ErrorCode::SpaceMismatch, "cost matrix shape differs from the spaces");
      set_bounded(m);
      break;
    }
    case CostFamily::MetricPower:
    case CostFamily::NormPower: {
      if (spec.family == CostFamily::NormPower && (!is_integer(spec.p) || spec.p < 1.0))
        throw Error(ErrorCode::InvalidFamilyParams, "norm power needs an integer p >= 1");
      const std::string setting = dispatch_setting(spec);
      build_metric(m, spec, lambda, setting);
      if (spec.family == CostFamily::MetricPower) {
        if (setting == "semi_bounded" || setting == "semi_bounded_y") m.family = CostFamily::SemiBoundedMetricPower;
        if (setting == "separability") m.family = CostFamily::SeparabilityMetric;
      }
      break;
    }
    case CostFamily::SemiBoundedMetricPower: {
      const std::string setting = spec.setting.empty() ? "semi_bounded" : spec.setting;
      if (setting != "semi_bounded" && setting != "semi_bounded_y")
        throw Error(ErrorCode::InvalidFamilyParams, "semi-bounded family with setting '" + setting + "'");
      build_metric(m, spec, lambda, setting);
      break;
    }
    case CostFamily::SeparabilityMetric:
      build_metric(m, spec, lambda, "separability");
      break;
    case CostFamily::Custom: {
      if (!spec.matrix) throw Error(ErrorCode::InvalidFamilyParams, "custom cost without a matrix");
      m.cost = *spec.matrix;
      if (m.cost.rows() != nx || m.cost.cols() != ny)
        throw Error(ErrorCode::SpaceMismatch, "cost matrix shape differs from the spaces");
      if (spec.dominating) {
        m.primary = *spec.dominating;
      } else {
        m.primary = {m.cost.rowwise().minCoeff(), m.cost.rowwise().maxCoeff(), Vector::Zero(ny), Vector::Zero(ny)};
      }
      check_dominating_shape(m.primary, nx, ny);
      if (spec.dominating_secondary) {
        m.secondary = *spec.dominating_secondary;
        check_dominating_shape(*m.secondary, nx, ny);
      }
      m.x_variation_bounded = spec.declared_x_variation_bounded.value_or(true);
      m.y_variation_bounded = spec.declared_y_variation_bounded.value_or(true);
      m.setting = "custom";
      break;
    }
  }

  if (!m.cost.allFinite()) throw Error(ErrorCode::InvalidFamilyParams, "cost contains non-finite entries");
  if (sandwich_violation(m.cost, m.primary) > 1e-9)
    throw Error(ErrorCode::InvalidFamilyParams, "dominating functions violate the cost sandwich");
  if (m.secondary && sandwich_violation(m.cost, *m.secondary) > 1e-9)
    throw Error(ErrorCode::InvalidFamilyParams, "secondary dominating functions violate the cost sandwich");
  WeightProfile profile = weight_profile(m, lambda);
  return {std::move(m), std::move(profile)};
}

ShiftedCost shift_nonnegative(const CostModel& model, const DiscreteMeasure& r, const DiscreteMeasure& s) {
  if (r.size() != model.rows() || s.size() != model.cols())
    throw Error(ErrorCode::SpaceMismatch, "measures do not match the cost shape");
  const Vector& lx = model.primary.x_lower;
  const Vector& ly = model.primary.y_lower;
  ShiftedCost out{model, lx.dot(r.weights()) + ly.dot(s.weights())};
  out.model.cost = model.cost - lx * Vector::Ones(model.cols()).transpose() - Vector::Ones(model.rows()) * ly.transpose();
  // Rounding can leave entries a few ulps below zero where the sandwich is tight.
  out.model.cost = out.model.cost.cwiseMax(0.0);
  auto shift = [&](DominatingFunctions& d) {
    d.x_lower -= lx;
    d.x_upper -= lx;
    d.y_lower -= ly;
    d.y_upper -= ly;
  };
  shift(out.model.primary);
  if (out.model.secondary) shift(*out.model.secondary);
  return out;
}

}  // namespace erot
