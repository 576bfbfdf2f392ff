#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "gls/distributions.hpp"

namespace gls {

/// Per-class importance weights w_y = D_T(Y = y) / D_S(Y = y), or an estimate of them.
///
/// Producers that solve the constrained problem guarantee w >= 0 and
/// w . p_S = 1; the unconstrained exact inverse does not, so the type itself
/// only stores the values and offers the check.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(Eigen::VectorXd values) : values_(std::move(values)) {}
  explicit WeightVector(const std::vector<double>& values)
      : values_(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))) {}

  static WeightVector ones(std::size_t k) { return WeightVector(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k))); }

  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_(static_cast<Eigen::Index>(i)); }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  std::vector<double> to_vector() const { return {values_.data(), values_.data() + values_.size()}; }

  double max() const { return values_.maxCoeff(); }
  double distance(const WeightVector& other) const { return (values_ - other.values_).norm(); }

  /// w >= -tol elementwise and |w . p_S - 1| <= tol.
  bool satisfies_constraints(const Categorical& p_source, double tol) const;

 private:
  Eigen::VectorXd values_;
};

/// Normalized soft confusion matrix and target prediction marginal.
struct FinalizedConfusion {
  /// C(y, y') = D_S(Yhat = y, Y = y'); columns indexed by the true class.
  Eigen::MatrixXd joint;
  Categorical target_marginal;
  /// True classes that never appeared in the accumulated source samples.
  std::vector<int> absent_classes;
};

/// Running soft confusion counts for one epoch of weight estimation.
///
/// Each source sample adds its full prediction vector into the column of its
/// true label; each target sample adds its prediction vector into the marginal.
class ConfusionAccumulator {
 public:
  static constexpr double kRowSumTolerance = 1e-6;

  explicit ConfusionAccumulator(std::size_t k);

  void add_source(const Eigen::MatrixXd& predictions, std::span<const int> labels);
  void add_target(const Eigen::MatrixXd& predictions);
  void accumulate(const Eigen::MatrixXd& source_predictions, std::span<const int> source_labels,
                  const Eigen::MatrixXd& target_predictions);
  void reset();

  /// Divides the counts by the number of samples seen on each side.
  FinalizedConfusion finalize() const;

  std::size_t classes() const noexcept { return k_; }
  const Eigen::MatrixXd& joint_counts() const noexcept { return joint_counts_; }
  const Eigen::VectorXd& marginal_counts() const noexcept { return marginal_counts_; }
  std::size_t source_count() const noexcept { return n_source_; }
  std::size_t target_count() const noexcept { return n_target_; }

 private:
  void check_predictions(const Eigen::MatrixXd& predictions) const;

  std::size_t k_;
  Eigen::MatrixXd joint_counts_;
  Eigen::VectorXd marginal_counts_;
  std::size_t n_source_ = 0;
  std::size_t n_target_ = 0;
};

/// C^{-1} mu without any constraint; throws SingularMatrix above the condition cap.
WeightVector exact_inverse_weights(const Eigen::MatrixXd& joint, const Categorical& target_marginal,
                                   double condition_cap = 1e8);

/// 2-norm condition number of a square matrix (infinity when singular).
double condition_number(const Eigen::MatrixXd& m);

struct QpOptions {
  /// Relative pivot threshold for the rank-revealing face solves; 0 keeps Eigen's default.
  double rank_tolerance = 0.0;
  int max_iterations = 0;  // 0: 50 * k + 100
};

struct QpSolution {
  WeightVector weights;
  double objective = 0.0;
  int iterations = 0;
  /// Indices pinned at zero in the final working set.
  std::vector<int> active_set;
};

/// Minimizes 0.5 * ||mu - C w||^2 subject to w >= 0 and w . p_S = 1.
///
/// Primal active-set method over the nonnegativity bounds, starting from the
/// all-ones vector (always feasible). On each working set the equality
/// constraint is eliminated by substitution and the reduced least-squares
/// problem is solved with a rank-revealing decomposition, so rank-deficient C
/// yields the minimum-norm optimum. Constraints are added and released by
/// lowest index, so the result is deterministic.
QpSolution solve_qp_detailed(const Eigen::MatrixXd& joint, const Categorical& target_marginal,
                             const Categorical& p_source, const QpOptions& options = {});

WeightVector solve_qp(const Eigen::MatrixXd& joint, const Categorical& target_marginal,
                      const Categorical& p_source, const QpOptions& options = {});

double qp_objective(const Eigen::MatrixXd& joint, const Categorical& target_marginal,
                    const Eigen::VectorXd& w);

/// lambda * w_qp + (1 - lambda) * w_prev.
WeightVector ema_update(const WeightVector& w_prev, const WeightVector& w_qp, double lambda);

/// p_T / p_S elementwise.
WeightVector true_weights(const Categorical& p_source, const Categorical& p_target);

}  // namespace gls
