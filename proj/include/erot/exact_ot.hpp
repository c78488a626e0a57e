#pragma once

#include "erot/costs.hpp"
#include "erot/measures.hpp"
#include "erot/sinkhorn.hpp"

#include <vector>

namespace erot {

inline constexpr int kExactOtMaxSize = 512;

struct OTSolution {
  double value = 0.0;
  Matrix plan;
  Vector alpha0, beta0;
  /// Support graph of the optimal vertex plan spans supp(r) and supp(s).
  bool unique_potentials = false;
  int pivots = 0;
};

/// Exact solution of min <c, pi> over couplings of r and s (transportation simplex).
OTSolution exact_ot_small(const DiscreteMeasure& r, const DiscreteMeasure& s, const Matrix& cost);
OTSolution exact_ot_small(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model);

struct GapEntry {
  double lambda = 0.0;
  double ot = 0.0;
  double erot = 0.0;
  double sinkhorn_cost = 0.0;
  double cost_gap = 0.0;   // S - OT
  double value_gap = 0.0;  // EROT - OT
  double bound = 0.0;      // lambda * H(r, s)
  bool holds = false;
};

struct GapReport {
  double ot = 0.0;
  double entropy = 0.0;
  std::vector<GapEntry> entries;
  bool all_hold = false;
};

GapReport vanishing_reg_gap(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model,
                            const std::vector<double>& lambdas, const SolverConfig& cfg = {});

}  // namespace erot
