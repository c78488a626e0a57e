#include "erot/conditions.hpp"

#include "erot/error.hpp"

#include <cmath>
#include <cstdio>

namespace erot {

std::string to_string(SampleMode mode) {
  switch (mode) {
    case SampleMode::OneSampleR: return "one_sample_r";
    case SampleMode::OneSampleS: return "one_sample_s";
    case SampleMode::TwoSample: return "two_sample";
  }
  return "one_sample_r";
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Pass: return "Pass";
    case Verdict::Fail: return "Fail";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

std::string to_string(SeriesVerdict verdict) {
  switch (verdict) {
    case SeriesVerdict::Converges: return "converges";
    case SeriesVerdict::Diverges: return "diverges";
    case SeriesVerdict::Unknown: return "unknown";
  }
  return "unknown";
}

SeriesVerdict series_verdict(const Growth& weight, const TailModel& tail, double power) {
  if (tail.kind == TailModel::Kind::Finite) return SeriesVerdict::Converges;
  if (tail.kind == TailModel::Kind::Unknown || !weight.known) return SeriesVerdict::Unknown;
  Growth density;
  switch (tail.kind) {
    case TailModel::Kind::Geometric: density.exp_terms[1.0] = std::log(tail.q); break;
    case TailModel::Kind::Polynomial: density.degree = -tail.a; break;
    case TailModel::Kind::SubWeibull: density.exp_terms[tail.theta] = -tail.gamma; break;
    default: return SeriesVerdict::Unknown;
  }
  Growth total = weight * density.pow(power);
  total.degree += tail.shell_degree;
  if (auto lead = total.leading_exp()) return lead->second < 0.0 ? SeriesVerdict::Converges : SeriesVerdict::Diverges;
  return total.degree < -1.0 ? SeriesVerdict::Converges : SeriesVerdict::Diverges;
}

namespace {

struct Term {
  std::string description;
  Vector weight;
  Growth growth;
  const DiscreteMeasure* measure;
  double power;
};

std::string tail_note(const Vector& contributions) {
  const Eigen::Index n = contributions.size();
  const double total = contributions.sum();
  if (!std::isfinite(total)) return "partial sum is not finite on the truncation";
  const Eigen::Index start = n - std::max<Eigen::Index>(1, n / 4);
  const double last = contributions.tail(n - start).sum();
  char buf[160];
  std::snprintf(buf, sizeof buf, "last quarter of atoms contributes %.3g of the partial sum",
                total > 0.0 ? last / total : 0.0);
  return buf;
}

GatedSum evaluate(const Term& t) {
  GatedSum g;
  g.description = t.description;
  const Vector& w = t.measure->weights();
  Vector contributions = (t.weight.array() * w.array().pow(t.power)).matrix();
  g.partial_sum = contributions.sum();
  g.analytic = series_verdict(t.growth, t.measure->tail(), t.power);
  if (g.analytic == SeriesVerdict::Unknown) g.note = tail_note(contributions);
  return g;
}

Vector sq(const WeightFunction& w) { return w.values.array().square().matrix(); }

ConditionReport finish(std::string tag, SampleMode mode, const std::vector<Term>& terms, bool x_variation_bounded,
                       bool needs_x_variation) {
  ConditionReport rep;
  rep.theorem_tag = std::move(tag);
  rep.mode = mode;
  rep.x_variation_bounded = x_variation_bounded;
  bool diverges = false, unknown = false;
  for (const auto& t : terms) {
    rep.checked_sums.push_back(evaluate(t));
    const auto& g = rep.checked_sums.back();
    if (g.analytic == SeriesVerdict::Diverges) {
      diverges = true;
      rep.reasons.push_back("divergent series: " + g.description);
    } else if (g.analytic == SeriesVerdict::Unknown) {
      unknown = true;
      rep.reasons.push_back("no analytic verdict: " + g.description);
    }
  }
  if (needs_x_variation && !x_variation_bounded) {
    diverges = true;
    rep.reasons.push_back("unbounded X-variation");
  }
  rep.verdict = diverges ? Verdict::Fail : (unknown ? Verdict::Inconclusive : Verdict::Pass);
  return rep;
}

void check_sizes(const DiscreteMeasure& r, const DiscreteMeasure& s, const WeightProfile& p) {
  if (r.size() != p.C_X.size() || s.size() != p.C_Y.size())
    throw Error(ErrorCode::SpaceMismatch, "measures do not match the weight profile");
}

}  // namespace

ConditionReport check_value_conditions(const DiscreteMeasure& r, const DiscreteMeasure& s,
                                       const WeightProfile& p, SampleMode mode) {
  check_sizes(r, s, p);
  std::vector<Term> t;
  // r side: sampled when mode is OneSampleR or TwoSample.
  if (mode != SampleMode::OneSampleS) {
    t.push_back({"sum C_X(x) sqrt(r_x)", p.C_X.values, p.gC_X, &r, 0.5});
    t.push_back({"sum Ct_X(x)^2 r_x", sq(p.Ct_X), p.gCt_X.pow(2), &r, 1.0});
    t.push_back({"sum et_X(x)^2 r_x", sq(p.et_X), p.get_X.pow(2), &r, 1.0});
  } else {
    t.push_back({"sum C_X(x) r_x", p.C_X.values, p.gC_X, &r, 1.0});
    t.push_back({"sum Ct_X(x) r_x", p.Ct_X.values, p.gCt_X, &r, 1.0});
    t.push_back({"sum et_X(x) r_x", p.et_X.values, p.get_X, &r, 1.0});
  }
  if (mode == SampleMode::OneSampleR) {
    t.push_back({"sum C_Y(y) s_y", p.C_Y.values, p.gC_Y, &s, 1.0});
    t.push_back({"sum Ct_Y(y) s_y", p.Ct_Y.values, p.gCt_Y, &s, 1.0});
    t.push_back({"sum e_Y(y) s_y", p.e_Y.values, p.ge_Y, &s, 1.0});
  } else {
    t.push_back({"sum Ct_Y(y) sqrt(s_y)", p.Ct_Y.values, p.gCt_Y, &s, 0.5});
    t.push_back({"sum C_Y(y)^2 s_y", sq(p.C_Y), p.gC_Y.pow(2), &s, 1.0});
    t.push_back({"sum e_Y(y)^2 s_y", sq(p.e_Y), p.ge_Y.pow(2), &s, 1.0});
  }
  return finish("value", mode, t, p.x_variation_bounded, false);
}

ConditionReport check_plan_conditions(const DiscreteMeasure& r, const DiscreteMeasure& s,
                                      const WeightProfile& p, SampleMode mode) {
  check_sizes(r, s, p);
  const double rho_r = mode == SampleMode::OneSampleS ? 1.0 : 0.5;
  const double rho_s = mode == SampleMode::OneSampleR ? 1.0 : 0.5;
  const Vector cy_e4 = (p.C_Y.values.array() * p.e_Y.values.array().pow(4)).matrix();
  std::vector<Term> t{
      {rho_r == 0.5 ? "sum C_X(x) sqrt(r_x)" : "sum C_X(x) r_x", p.C_X.values, p.gC_X, &r, rho_r},
      {rho_s == 0.5 ? "sum C_Y(y) e_Y(y)^4 sqrt(s_y)" : "sum C_Y(y) e_Y(y)^4 s_y", cy_e4, p.gC_Y * p.ge_Y.pow(4), &s,
       rho_s},
  };
  return finish("plan", mode, t, p.x_variation_bounded, true);
}

ConditionReport check_divergence_conditions(const DiscreteMeasure& r, const DiscreteMeasure& s,
                                            const WeightProfile& p, SampleMode mode) {
  check_sizes(r, s, p);
  if (r.size() != s.size()) throw Error(ErrorCode::AsymmetricSetup, "divergence needs X = Y");
  // On X = Y every weight lives on the same space; the r-side block applies to
  // each sampled measure, the linear block to s.
  auto root_block = [&](const DiscreteMeasure& mu, const std::string& name, std::vector<Term>& t) {
    const std::string sub = name + "_x";
    t.push_back({"sum C_X(x) sqrt(" + sub + ")", p.C_X.values, p.gC_X, &mu, 0.5});
    t.push_back({"sum C_Y(x) sqrt(" + sub + ")", p.C_Y.values, p.gC_Y, &mu, 0.5});
    t.push_back({"sum Ct_X(x)^2 " + sub, sq(p.Ct_X), p.gCt_X.pow(2), &mu, 1.0});
    t.push_back({"sum Ct_Y(x)^2 " + sub, sq(p.Ct_Y), p.gCt_Y.pow(2), &mu, 1.0});
    t.push_back({"sum et_X(x)^2 " + sub, sq(p.et_X), p.get_X.pow(2), &mu, 1.0});
    t.push_back({"sum e_Y(x)^2 " + sub, sq(p.e_Y), p.ge_Y.pow(2), &mu, 1.0});
  };
  std::vector<Term> t;
  if (mode == SampleMode::OneSampleS) {
    root_block(s, "s", t);
  } else {
    root_block(r, "r", t);
    if (mode == SampleMode::TwoSample) root_block(s, "s", t);
  }
  const DiscreteMeasure& lin = mode == SampleMode::OneSampleS ? r : s;
  const std::string sub = mode == SampleMode::OneSampleS ? "r_x" : "s_x";
  t.push_back({"sum C_X(x) " + sub, p.C_X.values, p.gC_X, &lin, 1.0});
  t.push_back({"sum C_Y(x) " + sub, p.C_Y.values, p.gC_Y, &lin, 1.0});
  t.push_back({"sum Ct_X(x) " + sub, p.Ct_X.values, p.gCt_X, &lin, 1.0});
  t.push_back({"sum Ct_Y(x) " + sub, p.Ct_Y.values, p.gCt_Y, &lin, 1.0});
  t.push_back({"sum et_X(x) " + sub, p.et_X.values, p.get_X, &lin, 1.0});
  t.push_back({"sum e_Y(x) " + sub, p.e_Y.values, p.ge_Y, &lin, 1.0});
  return finish("divergence", mode, t, p.x_variation_bounded, false);
}

}  // namespace erot
