#include "gls/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gls/error.hpp"

namespace gls {
namespace {

void require_same_length(const Categorical& p, const Categorical& q) {
  if (p.size() != q.size()) {
    throw Error(Errc::LengthMismatch, "categoricals of length " + std::to_string(p.size()) +
                                          " and " + std::to_string(q.size()));
  }
}

// p * ln(p / q) with the 0 * ln(0 / x) = 0 convention; caller guarantees q > 0 when p > 0.
double xlogy_ratio(double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; }

}  // namespace

Categorical::Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw Error(Errc::InvalidDistribution, "a categorical needs at least 2 classes");
  }
  double sum = 0.0;
  for (double v : probs_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(Errc::InvalidDistribution, "negative or non-finite probability");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw Error(Errc::InvalidDistribution, "probabilities sum to " + std::to_string(sum));
  }
}

Categorical Categorical::normalize(std::span<const double> mass) {
  double total = 0.0;
  for (double v : mass) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(Errc::InvalidDistribution, "negative or non-finite mass");
    }
    total += v;
  }
  if (total <= 0.0) throw Error(Errc::InvalidDistribution, "all-zero mass");
  std::vector<double> probs(mass.begin(), mass.end());
  for (double& v : probs) v /= total;
  return Categorical(std::move(probs));
}

Categorical Categorical::uniform(std::size_t k) {
  return Categorical(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

bool Categorical::strictly_positive() const noexcept {
  return std::all_of(probs_.begin(), probs_.end(), [](double v) { return v > 0.0; });
}

double Categorical::min() const noexcept { return *std::min_element(probs_.begin(), probs_.end()); }

double kl(const Categorical& p, const Categorical& q) {
  require_same_length(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && q[i] == 0.0) {
      throw Error(Errc::SupportMismatch, "p has mass at class " + std::to_string(i) + " where q has none");
    }
    sum += xlogy_ratio(p[i], q[i]);
  }
  return std::max(sum, 0.0);
}

double jsd(const Categorical& p, const Categorical& q) {
  require_same_length(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    // The two addends commute exactly, so jsd(p, q) == jsd(q, p) bitwise.
    sum += xlogy_ratio(p[i], m) + xlogy_ratio(q[i], m);
  }
  return std::clamp(0.5 * sum, 0.0, std::log(2.0));
}

double js_distance(const Categorical& p, const Categorical& q) { return std::sqrt(jsd(p, q)); }

double l1_distance(const Categorical& p, const Categorical& q) {
  require_same_length(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return sum;
}

double tv_distance(const Categorical& p, const Categorical& q) { return 0.5 * l1_distance(p, q); }

Categorical empirical_label_dist(std::span<const int> labels, std::size_t k) {
  if (labels.empty()) throw Error(Errc::EmptyInput, "no labels");
  std::vector<double> counts(k, 0.0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
    }
    counts[static_cast<std::size_t>(y)] += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  for (double& c : counts) c /= n;
  return Categorical::normalize(counts);
}

}  // namespace gls
