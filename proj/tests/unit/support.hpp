#pragma once

#include "erot/costs.hpp"
#include "erot/measures.hpp"

#include <cmath>
#include <random>

namespace erot::testing {

/// Hand-rolled generators for property tests. Every generator takes the
/// engine explicitly so a failing case can be replayed from its seed.
inline Vector random_simplex(int n, std::mt19937_64& gen, double floor = 1e-3) {
  std::exponential_distribution<double> e(1.0);
  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = e(gen) + floor;
  return w / w.sum();
}

inline Vector random_tangent(const Vector& base, std::mt19937_64& gen) { return random_simplex(static_cast<int>(base.size()), gen) - base; }

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& gen, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(gen);
  return m;
}

inline int random_int(int lo, int hi, std::mt19937_64& gen) { return std::uniform_int_distribution<int>(lo, hi)(gen); }

inline double random_log_uniform(double lo, double hi, std::mt19937_64& gen) {
  return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(gen));
}

struct RandomInstance {
  DiscreteMeasure r, s;
  CostModel model;
  WeightProfile profile;
  double lambda;
};

inline CostModel matrix_cost(const Matrix& c, SpacePtr X, SpacePtr Y, double lambda = 1.0) {
  FamilySpec spec;
  spec.family = CostFamily::Bounded;
  spec.base = "matrix";
  spec.matrix = c;
  return build_cost(spec, std::move(X), std::move(Y), lambda).first;
}

inline RandomInstance random_instance(int nx, int ny, double lambda, std::mt19937_64& gen) {
  auto X = IndexedSpace::integers(0, nx);
  auto Y = IndexedSpace::integers(0, ny);
  FamilySpec spec;
  spec.family = CostFamily::Bounded;
  spec.base = "matrix";
  spec.matrix = random_matrix(nx, ny, gen);
  auto [model, profile] = build_cost(spec, X, Y, lambda);
  return {DiscreteMeasure(X, random_simplex(nx, gen)), DiscreteMeasure(Y, random_simplex(ny, gen)), std::move(model),
          std::move(profile), lambda};
}

inline CostModel indicator_cost(SpacePtr X, SpacePtr Y, double lambda = 1.0) {
  FamilySpec spec;
  spec.family = CostFamily::Bounded;
  spec.base = "indicator";
  return build_cost(spec, std::move(X), std::move(Y), lambda).first;
}

inline DiscreteMeasure uniform(SpacePtr X) {
  const int n = X->size();
  return DiscreteMeasure(std::move(X), Vector::Constant(n, 1.0 / n));
}

}  // namespace erot::testing
