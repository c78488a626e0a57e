#include "erot/error.hpp"
#include "erot/measures.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace erot;
using erot::testing::random_int;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an erot::Error");
  return ErrorCode::EmptyInput;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("validate_measure accepts probability vectors and rejects the rest") {
  auto X2 = IndexedSpace::integers(0, 2);
  auto mu = validate_measure(vec({0.5, 0.5}), X2);
  CHECK(mu.size() == 2);
  CHECK(mu.full_support());
  CHECK(code_of([&] { validate_measure(vec({0.3, 0.8}), X2); }) == ErrorCode::MassMismatch);
  CHECK(code_of([&] { validate_measure(vec({0.5, -0.5, 1.0}), IndexedSpace::integers(0, 3)); }) ==
        ErrorCode::NegativeWeight);
  CHECK(code_of([&] { validate_measure(vec({1.0}), X2); }) == ErrorCode::SpaceMismatch);
}

TEST_CASE("small mass drift is renormalized, larger drift needs the flag") {
  auto X2 = IndexedSpace::integers(0, 2);
  CHECK(validate_measure(vec({0.5, 0.5 + 5e-10}), X2).weights().sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(code_of([&] { validate_measure(vec({0.5, 0.5 + 1e-6}), X2); }) == ErrorCode::MassMismatch);
  auto mu = validate_measure(vec({1.0, 3.0}), X2, true);
  CHECK(mu[0] == doctest::Approx(0.25));
  CHECK(mu[1] == doctest::Approx(0.75));
}

TEST_CASE("weighted_l1_norm examples") {
  auto X2 = IndexedSpace::integers(0, 2);
  CHECK(weighted_l1_norm(SignedVector(X2, vec({1, -1})), {vec({1, 1})}) == 2.0);
  CHECK(weighted_l1_norm(SignedVector(X2, vec({0, 0})), {vec({1, 1})}) == 0.0);
  CHECK(weighted_l1_norm(SignedVector(X2, vec({0.5, -0.5})), {vec({2, 4})}) == doctest::Approx(3.0));
}

TEST_CASE("weighted_l1_norm is a norm on random vectors") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = random_int(1, 30, gen);
    auto X = IndexedSpace::integers(0, n);
    Vector a(n), b(n), w(n);
    for (int i = 0; i < n; ++i) {
      a[i] = g(gen);
      b[i] = g(gen);
      w[i] = std::exp(g(gen));
    }
    const double t = g(gen);
    const WeightFunction W{w}, ones{Vector::Ones(n)};
    CHECK(weighted_l1_norm(SignedVector(X, a), ones) == doctest::Approx(a.lpNorm<1>()).epsilon(1e-13));
    CHECK(weighted_l1_norm(SignedVector(X, t * a), W) ==
          doctest::Approx(std::abs(t) * weighted_l1_norm(SignedVector(X, a), W)).epsilon(1e-12));
    CHECK(weighted_l1_norm(SignedVector(X, a + b), W) <=
          weighted_l1_norm(SignedVector(X, a), W) + weighted_l1_norm(SignedVector(X, b), W) + 1e-12);
  }
}

TEST_CASE("truncate_signed examples") {
  auto X4 = IndexedSpace::integers(0, 4);
  auto t = truncate_signed(SignedVector(X4, vec({0.1, 0.2, 0.3, 0.4})), 2);
  CHECK(t.entries()[0] == doctest::Approx(0.8));
  CHECK(t.entries()[1] == doctest::Approx(0.2));
  CHECK(t.entries()[2] == 0.0);
  CHECK(t.entries()[3] == 0.0);

  const Vector short_support = vec({0.4, -0.1, 0.0, 0.0});
  CHECK(truncate_signed(SignedVector(X4, short_support), 2).entries() == short_support);

  auto z = truncate_signed(SignedVector(X4, vec({0.3, -0.1, 0.2, -0.4}), true), 3);
  CHECK(z.sums_to_zero());
  CHECK(std::abs(z.entries().sum()) < 1e-15);

  CHECK(code_of([&] { truncate_signed(SignedVector(X4, short_support), 1); }) == ErrorCode::OrderOutOfRange);
  CHECK(code_of([&] { truncate_signed(SignedVector(X4, short_support), 5); }) == ErrorCode::OrderOutOfRange);
}

TEST_CASE("truncate_signed preserves the total for random inputs") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = random_int(2, 40, gen);
    Vector h(n);
    for (int i = 0; i < n; ++i) h[i] = g(gen);
    const int l = random_int(2, n, gen);
    auto t = truncate_signed(SignedVector(IndexedSpace::integers(0, n), h), l);
    CHECK(t.entries().sum() == doctest::Approx(h.sum()).epsilon(1e-12));
    for (int i = l; i < n; ++i) CHECK(t.entries()[i] == 0.0);
  }
}

TEST_CASE("entropy_pair examples") {
  auto X2 = IndexedSpace::integers(0, 2);
  auto X4 = IndexedSpace::integers(0, 4);
  auto u2 = testing::uniform(X2);
  CHECK(entropy_pair(u2, u2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(entropy_pair(DiscreteMeasure(X4, vec({0, 1, 0, 0})), testing::uniform(X4)) == 0.0);
  auto r = DiscreteMeasure(X2, vec({0.25, 0.75}));
  CHECK(entropy_pair(r, testing::uniform(X4)) == doctest::Approx(0.562335).epsilon(1e-6));
}

TEST_CASE("entropy_pair is symmetric") {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int nx = random_int(1, 20, gen), ny = random_int(1, 20, gen);
    DiscreteMeasure a(IndexedSpace::integers(0, nx), testing::random_simplex(nx, gen));
    DiscreteMeasure b(IndexedSpace::integers(0, ny), testing::random_simplex(ny, gen));
    CHECK(entropy_pair(a, b) == entropy_pair(b, a));
  }
}

TEST_CASE("empirical_measure examples") {
  auto X2 = IndexedSpace::integers(0, 2);
  auto X3 = IndexedSpace::integers(0, 3);
  const std::vector<int> a{0, 0, 1, 1}, b{2, 2, 2}, c{0, 1, 1, 2};
  CHECK(empirical_measure(a, X2).weights() == vec({0.5, 0.5}));
  CHECK(empirical_measure(b, X3).weights() == vec({0, 0, 1}));
  CHECK(empirical_measure(c, X3).weights() == vec({0.25, 0.5, 0.25}));
  const std::vector<int> none, bad{0, 3};
  CHECK(code_of([&] { empirical_measure(none, X3); }) == ErrorCode::EmptySample);
  CHECK(code_of([&] { empirical_measure(bad, X3); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("empirical_measure approaches the sampled measure on average") {
  std::mt19937_64 gen(17);
  auto X = IndexedSpace::integers(0, 8);
  const Vector r = testing::random_simplex(8, gen);
  std::discrete_distribution<int> draw(r.data(), r.data() + r.size());
  auto mean_l1 = [&](int n) {
    double acc = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<int> s(n);
      for (int& v : s) v = draw(gen);
      acc += (empirical_measure(s, X).weights() - r).lpNorm<1>();
    }
    return acc / 50;
  };
  CHECK(mean_l1(4000) < mean_l1(100));
}

TEST_CASE("countable truncation keeps the tail below tolerance") {
  auto t = truncate_countable(TailModel::geometric(0.7), 1e-12);
  CHECK(t.dropped_tail_mass < 1e-12);
  CHECK(t.measure.weights().sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(t.measure.weights()[1] / t.measure.weights()[0] == doctest::Approx(0.7));
  CHECK(code_of([] { truncate_countable(TailModel::geometric(1.5)); }) == ErrorCode::InvalidFamilyParams);
}
