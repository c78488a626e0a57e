#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace erot {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kRenormalizeTolerance = 1e-9;

/// Ordered, finite truncation of a countable ground space. Atoms carry unique
/// labels and, optionally, real coordinates of a common dimension.
class IndexedSpace {
 public:
  explicit IndexedSpace(std::vector<std::string> labels,
                        std::vector<std::vector<double>> coords = {});

  /// Atoms {first, first+1, ..., first+count-1} on the real line.
  static std::shared_ptr<const IndexedSpace> integers(int first, int count);
  /// Atoms at the given real points, labelled by their value.
  static std::shared_ptr<const IndexedSpace> points(const std::vector<double>& xs);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& label(int i) const { return labels_[i]; }
  const std::vector<std::string>& labels() const { return labels_; }
  bool has_coords() const { return !coords_.empty(); }
  int dim() const { return has_coords() ? static_cast<int>(coords_.front().size()) : 0; }
  const std::vector<double>& coord(int i) const { return coords_[i]; }
  std::optional<int> index_of(const std::string& label) const;

  /// Euclidean norm of the coordinate vector; the index when no coordinates exist.
  double radius(int i) const;

  bool same_as(const IndexedSpace& other) const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<double>> coords_;
  std::unordered_map<std::string, int> lookup_;
};

using SpacePtr = std::shared_ptr<const IndexedSpace>;

/// Parametric description of how the weights of a countable measure decay in
/// the radius t of an atom. Used for analytic summability verdicts.
struct TailModel {
  enum class Kind { Unknown, Finite, Geometric, Polynomial, SubWeibull };
  Kind kind = Kind::Unknown;
  double q = 0.0;      // geometric: r_t ∝ q^t
  double a = 0.0;      // polynomial: r_t ∝ (1+t)^{-a}
  double gamma = 0.0;  // sub-Weibull: r_t ∝ exp(-gamma t^theta)
  double theta = 0.0;
  /// Number of atoms with radius in [n-1, n) grows like n^shell_degree.
  double shell_degree = 0.0;

  static TailModel finite() { return {Kind::Finite}; }
  static TailModel geometric(double q) { return {Kind::Geometric, q}; }
  static TailModel polynomial(double a) { return {Kind::Polynomial, 0.0, a}; }
  static TailModel sub_weibull(double gamma, double theta) {
    return {Kind::SubWeibull, 0.0, 0.0, gamma, theta};
  }

  /// Unnormalized density at radius t.
  double density(double t) const;
};

std::string to_string(TailModel::Kind kind);

struct MeasureOptions {
  bool renormalize = false;
  TailModel tail{};
};

/// Probability vector on an IndexedSpace. Weights are nonnegative and sum to
/// one within kMassTolerance.
class DiscreteMeasure {
 public:
  DiscreteMeasure(SpacePtr space, Vector weights, MeasureOptions options = {});

  const SpacePtr& space() const { return space_; }
  const Vector& weights() const { return weights_; }
  double operator[](int i) const { return weights_[i]; }
  int size() const { return static_cast<int>(weights_.size()); }
  const TailModel& tail() const { return tail_; }
  DiscreteMeasure with_tail(TailModel tail) const;

  bool full_support() const { return (weights_.array() > 0.0).all(); }
  std::vector<int> support() const;

 private:
  SpacePtr space_;
  Vector weights_;
  TailModel tail_;
};

/// Perturbation direction on a space (e.g. a tangent vector h^X).
class SignedVector {
 public:
  SignedVector(SpacePtr space, Vector entries, bool sums_to_zero = false);

  const SpacePtr& space() const { return space_; }
  const Vector& entries() const { return entries_; }
  bool sums_to_zero() const { return sums_to_zero_; }
  int size() const { return static_cast<int>(entries_.size()); }

 private:
  SpacePtr space_;
  Vector entries_;
  bool sums_to_zero_;
};

/// Positive weights aligned with a space.
struct WeightFunction {
  Vector values;

  int size() const { return static_cast<int>(values.size()); }
};

DiscreteMeasure validate_measure(const Vector& weights, SpacePtr space, bool renormalize = false);

/// Sum_x w(x)|a_x|.
double weighted_l1_norm(const SignedVector& a, const WeightFunction& w);

/// Finite support approximation of order l: entries 2..l are kept, the mass of
/// entries beyond l is added to the first atom, everything else is zeroed.
SignedVector truncate_signed(const SignedVector& h, int order);

double shannon_entropy(const Vector& weights);
/// min of the two Shannon entropies (0 log 0 = 0).
double entropy_pair(const DiscreteMeasure& r, const DiscreteMeasure& s);

DiscreteMeasure empirical_measure(std::span<const int> sample_indices, SpacePtr space);
DiscreteMeasure empirical_from_counts(std::span<const int> counts, SpacePtr space);

/// Tail model evaluated on every atom of the space and normalized there. When
/// `countable` is set the resulting measure keeps the tail model as its
/// description (it stands for a truncation of a countable measure), otherwise
/// it is marked finitely supported.
DiscreteMeasure family_measure(const TailModel& tail, SpacePtr space, bool countable = false);

struct Truncation {
  DiscreteMeasure measure;
  double dropped_tail_mass = 0.0;
};

/// Integer truncation {0, ..., N-1} of a countable measure with the given tail,
/// N chosen so that the normalized tail beyond N is below tail_tol (capped at
/// max_atoms). The remaining tail mass is moved onto the last retained atom.
Truncation truncate_countable(const TailModel& tail, double tail_tol = 1e-12, int max_atoms = 100000);

}  // namespace erot
