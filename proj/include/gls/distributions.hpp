#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gls {

/// A probability vector over k >= 2 classes.
///
/// Construction validates (entries >= 0, sum within 1e-9 of one); use
/// Categorical::normalize to build one from unnormalized mass.
class Categorical {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit Categorical(std::vector<double> probs);

  /// Rescales nonnegative mass to sum to one. Throws on negative or all-zero input.
  static Categorical normalize(std::span<const double> mass);
  static Categorical uniform(std::size_t k);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::span<const double> view() const noexcept { return probs_; }

  bool strictly_positive() const noexcept;
  double min() const noexcept;

 private:
  std::vector<double> probs_;
};

/// KL(p || q) in nats. 0 * ln(0 / x) is taken as 0.
double kl(const Categorical& p, const Categorical& q);

/// Jensen-Shannon divergence in nats, bounded by ln 2. Symmetric bit-for-bit.
double jsd(const Categorical& p, const Categorical& q);

/// Square root of jsd; a metric on the simplex.
double js_distance(const Categorical& p, const Categorical& q);

double l1_distance(const Categorical& p, const Categorical& q);
double tv_distance(const Categorical& p, const Categorical& q);

/// Class frequencies of labels in [0, k).
Categorical empirical_label_dist(std::span<const int> labels, std::size_t k);

}  // namespace gls
