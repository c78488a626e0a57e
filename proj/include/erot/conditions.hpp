#pragma once

#include "erot/costs.hpp"
#include "erot/measures.hpp"

#include <string>
#include <vector>

namespace erot {

enum class SampleMode { OneSampleR, OneSampleS, TwoSample };
enum class Verdict { Pass, Fail, Inconclusive };
enum class SeriesVerdict { Converges, Diverges, Unknown };

std::string to_string(SampleMode mode);
std::string to_string(Verdict verdict);
std::string to_string(SeriesVerdict verdict);

/// One gated series sum_x w(x) r_x^power.
struct GatedSum {
  std::string description;
  double partial_sum = 0.0;
  SeriesVerdict analytic = SeriesVerdict::Unknown;
  std::string note;
};

struct ConditionReport {
  std::string theorem_tag;  // value | plan | divergence
  SampleMode mode = SampleMode::OneSampleR;
  std::vector<GatedSum> checked_sums;
  bool x_variation_bounded = true;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<std::string> reasons;
};

/// Analytic verdict for sum over atoms of (weight growth) * (tail density)^power,
/// with shell counts t^shell_degree.
SeriesVerdict series_verdict(const Growth& weight, const TailModel& tail, double power);

ConditionReport check_value_conditions(const DiscreteMeasure& r, const DiscreteMeasure& s,
                                       const WeightProfile& profile, SampleMode mode);
ConditionReport check_plan_conditions(const DiscreteMeasure& r, const DiscreteMeasure& s,
                                      const WeightProfile& profile, SampleMode mode = SampleMode::OneSampleR);
ConditionReport check_divergence_conditions(const DiscreteMeasure& r, const DiscreteMeasure& s,
                                            const WeightProfile& profile, SampleMode mode);

}  // namespace erot
