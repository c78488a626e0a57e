#include "erot/measures.hpp"

#include "erot/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace erot {

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

IndexedSpace::IndexedSpace(std::vector<std::string> labels, std::vector<std::vector<double>> coords)
    : labels_(std::move(labels)), coords_(std::move(coords)) {
  if (labels_.empty()) throw Error(ErrorCode::InvalidFamilyParams, "space must contain at least one atom");
  if (!coords_.empty()) {
    if (coords_.size() != labels_.size())
      throw Error(ErrorCode::SpaceMismatch, "coordinate count differs from label count");
    const auto d = coords_.front().size();
    if (d == 0) throw Error(ErrorCode::InvalidFamilyParams, "coordinates must have dimension >= 1");
    for (const auto& c : coords_)
      if (c.size() != d) throw Error(ErrorCode::InvalidFamilyParams, "ragged coordinates");
  }
  lookup_.reserve(labels_.size());
  for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
    if (!lookup_.emplace(labels_[i], i).second)
      throw Error(ErrorCode::InvalidFamilyParams, "duplicate atom label '" + labels_[i] + "'");
  }
}

SpacePtr IndexedSpace::integers(int first, int count) {
  std::vector<double> xs(count);
  std::iota(xs.begin(), xs.end(), static_cast<double>(first));
  return points(xs);
}

SpacePtr IndexedSpace::points(const std::vector<double>& xs) {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> coords;
  labels.reserve(xs.size());
  coords.reserve(xs.size());
  for (double x : xs) {
    labels.push_back(format_number(x));
    coords.push_back({x});
  }
  return std::make_shared<const IndexedSpace>(std::move(labels), std::move(coords));
}

std::optional<int> IndexedSpace::index_of(const std::string& label) const {
  auto it = lookup_.find(label);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

double IndexedSpace::radius(int i) const {
  if (!has_coords()) return static_cast<double>(i);
  double acc = 0.0;
  for (double c : coords_[i]) acc += c * c;
  return std::sqrt(acc);
}

bool IndexedSpace::same_as(const IndexedSpace& other) const {
  return this == &other || (labels_ == other.labels_ && coords_ == other.coords_);
}

double TailModel::density(double t) const {
  switch (kind) {
    case Kind::Geometric: return std::pow(q, t);
    case Kind::Polynomial: return std::pow(1.0 + t, -a);
    case Kind::SubWeibull: return std::exp(-gamma * std::pow(t, theta));
    case Kind::Finite:
    case Kind::Unknown: break;
  }
  throw Error(ErrorCode::InvalidFamilyParams, "tail model has no parametric density");
}

std::string to_string(TailModel::Kind kind) {
  switch (kind) {
    case TailModel::Kind::Unknown: return "unknown";
    case TailModel::Kind::Finite: return "finite";
    case TailModel::Kind::Geometric: return "geometric";
    case TailModel::Kind::Polynomial: return "polynomial";
    case TailModel::Kind::SubWeibull: return "sub_weibull";
  }
  return "unknown";
}

DiscreteMeasure::DiscreteMeasure(SpacePtr space, Vector weights, MeasureOptions options)
    : space_(std::move(space)), weights_(std::move(weights)), tail_(options.tail) {
  if (!space_) throw Error(ErrorCode::SpaceMismatch, "measure without a space");
  if (weights_.size() != space_->size())
    throw Error(ErrorCode::SpaceMismatch, "weight vector length " + std::to_string(weights_.size()) +
                                              " differs from space size " + std::to_string(space_->size()));
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0))
      throw Error(ErrorCode::NegativeWeight, "weight at atom " + space_->label(static_cast<int>(i)) +
                                                 " is " + format_number(weights_[i]));
  }
  const double total = weights_.sum();
  const double deviation = std::abs(total - 1.0);
  if (deviation > kMassTolerance) {
    if (deviation > kRenormalizeTolerance && !options.renormalize)
      throw Error(ErrorCode::MassMismatch, "weights sum to " + format_number(total));
    if (total <= 0.0) throw Error(ErrorCode::MassMismatch, "weights sum to zero");
    weights_ /= total;
  }
}

DiscreteMeasure DiscreteMeasure::with_tail(TailModel tail) const {
  DiscreteMeasure copy = *this;
  copy.tail_ = tail;
  return copy;
}

std::vector<int> DiscreteMeasure::support() const {
  std::vector<int> idx;
  for (int i = 0; i < size(); ++i)
    if (weights_[i] > 0.0) idx.push_back(i);
  return idx;
}

SignedVector::SignedVector(SpacePtr space, Vector entries, bool sums_to_zero)
    : space_(std::move(space)), entries_(std::move(entries)), sums_to_zero_(sums_to_zero) {
  if (!space_ || entries_.size() != space_->size())
    throw Error(ErrorCode::SpaceMismatch, "signed vector length differs from space size");
  if (sums_to_zero_ && std::abs(entries_.sum()) > kMassTolerance)
    throw Error(ErrorCode::NotInTangentCone, "entries sum to " + format_number(entries_.sum()));
}

DiscreteMeasure validate_measure(const Vector& weights, SpacePtr space, bool renormalize) {
  return DiscreteMeasure(std::move(space), weights, MeasureOptions{renormalize, {}});
}

double weighted_l1_norm(const SignedVector& a, const WeightFunction& w) {
  if (a.size() != w.size()) throw Error(ErrorCode::SpaceMismatch, "weight and vector lengths differ");
  return (w.values.array() * a.entries().array().abs()).sum();
}

SignedVector truncate_signed(const SignedVector& h, int order) {
  const int n = h.size();
  if (order < 2 || order > n)
    throw Error(ErrorCode::OrderOutOfRange, "order " + std::to_string(order) + " outside [2, " +
                                                std::to_string(n) + "]");
  Vector out = Vector::Zero(n);
  const Vector& e = h.entries();
  out.head(order) = e.head(order);
  out[0] += e.tail(n - order).sum();
  return SignedVector(h.space(), std::move(out), h.sums_to_zero());
}

double shannon_entropy(const Vector& weights) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (w > 0.0) acc -= w * std::log(w);
  }
  return std::max(acc, 0.0);
}

double entropy_pair(const DiscreteMeasure& r, const DiscreteMeasure& s) {
  return std::min(shannon_entropy(r.weights()), shannon_entropy(s.weights()));
}

DiscreteMeasure empirical_measure(std::span<const int> sample_indices, SpacePtr space) {
  if (sample_indices.empty()) throw Error(ErrorCode::EmptySample, "empirical measure of an empty sample");
  std::vector<int> counts(space->size(), 0);
  for (int idx : sample_indices) {
    if (idx < 0 || idx >= space->size())
      throw Error(ErrorCode::IndexOutOfRange, "sample index " + std::to_string(idx) + " outside space");
    ++counts[idx];
  }
  return empirical_from_counts(counts, std::move(space));
}

DiscreteMeasure empirical_from_counts(std::span<const int> counts, SpacePtr space) {
  if (static_cast<int>(counts.size()) != space->size())
    throw Error(ErrorCode::SpaceMismatch, "count vector length differs from space size");
  long long n = 0;
  for (int c : counts) {
    if (c < 0) throw Error(ErrorCode::NegativeWeight, "negative count");
    n += c;
  }
  if (n == 0) throw Error(ErrorCode::EmptySample, "empirical measure of an empty sample");
  Vector w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
  // Rounding of counts/n can leave the sum a few ulps away from one.
  return DiscreteMeasure(std::move(space), std::move(w), MeasureOptions{true, TailModel::finite()});
}

DiscreteMeasure family_measure(const TailModel& tail, SpacePtr space, bool countable) {
  Vector w(space->size());
  for (int i = 0; i < space->size(); ++i) w[i] = tail.density(space->radius(i));
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw Error(ErrorCode::InvalidFamilyParams, "tail density does not normalize on the space");
  w /= total;
  return DiscreteMeasure(std::move(space), std::move(w),
                         MeasureOptions{true, countable ? tail : TailModel::finite()});
}

namespace {

// Normalizing constant of the density over t = 0, 1, 2, ...
double series_total(const TailModel& tail) {
  switch (tail.kind) {
    case TailModel::Kind::Geometric:
      if (!(tail.q > 0.0 && tail.q < 1.0)) throw Error(ErrorCode::InvalidFamilyParams, "geometric q must lie in (0,1)");
      return 1.0 / (1.0 - tail.q);
    case TailModel::Kind::Polynomial:
      if (!(tail.a > 1.0)) throw Error(ErrorCode::InvalidFamilyParams, "polynomial tail needs a > 1");
      return std::riemann_zeta(tail.a);
    case TailModel::Kind::SubWeibull: {
      if (!(tail.gamma > 0.0 && tail.theta > 0.0))
        throw Error(ErrorCode::InvalidFamilyParams, "sub-Weibull tail needs gamma, theta > 0");
      double acc = 0.0;
      for (long t = 0;; ++t) {
        const double term = tail.density(static_cast<double>(t));
        acc += term;
        if (term < 1e-20 * acc) break;
      }
      return acc;
    }
    default: break;
  }
  throw Error(ErrorCode::InvalidFamilyParams, "tail model is not a countable parametric family");
}

}  // namespace

Truncation truncate_countable(const TailModel& tail, double tail_tol, int max_atoms) {
  const double total = series_total(tail);
  std::vector<double> w;
  double partial = 0.0;
  while (static_cast<int>(w.size()) < max_atoms) {
    const double d = tail.density(static_cast<double>(w.size())) / total;
    w.push_back(d);
    partial += d;
    if (1.0 - partial < tail_tol && w.size() >= 2) break;
  }
  const double dropped = std::max(0.0, 1.0 - partial);
  w.back() += dropped;
  auto space = IndexedSpace::integers(0, static_cast<int>(w.size()));
  Vector weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return {DiscreteMeasure(space, std::move(weights), MeasureOptions{true, tail}), dropped};
}

}  // namespace erot
