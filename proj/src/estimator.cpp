#include "gls/estimator.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gls/error.hpp"

namespace gls {
namespace {

Eigen::VectorXd to_eigen(const Categorical& c) {
  return Eigen::Map<const Eigen::VectorXd>(c.probs().data(), static_cast<Eigen::Index>(c.size()));
}

void check_problem_shape(const Eigen::MatrixXd& joint, const Categorical& mu) {
  if (joint.rows() != joint.cols() || static_cast<std::size_t>(joint.rows()) != mu.size()) {
    throw Error(Errc::ShapeMismatch, "confusion matrix is " + std::to_string(joint.rows()) + "x" +
                                         std::to_string(joint.cols()) + ", marginal has " +
                                         std::to_string(mu.size()) + " entries");
  }
}

}  // namespace

bool WeightVector::satisfies_constraints(const Categorical& p_source, double tol) const {
  if (size() != p_source.size()) return false;
  double dot = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    if ((*this)[i] < -tol) return false;
    dot += (*this)[i] * p_source[i];
  }
  return std::abs(dot - 1.0) <= tol;
}

// ---------------------------------------------------------------------------
// ConfusionAccumulator

ConfusionAccumulator::ConfusionAccumulator(std::size_t k)
    : k_(k),
      joint_counts_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))),
      marginal_counts_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k))) {
  if (k < 2) throw Error(Errc::ShapeMismatch, "need at least 2 classes");
}

void ConfusionAccumulator::check_predictions(const Eigen::MatrixXd& predictions) const {
  if (static_cast<std::size_t>(predictions.cols()) != k_) {
    throw Error(Errc::ShapeMismatch, "prediction rows have " + std::to_string(predictions.cols()) +
                                         " entries, expected " + std::to_string(k_));
  }
  for (Eigen::Index i = 0; i < predictions.rows(); ++i) {
    if (std::abs(predictions.row(i).sum() - 1.0) > kRowSumTolerance || predictions.row(i).minCoeff() < 0.0) {
      throw Error(Errc::InvalidDistribution, "prediction row " + std::to_string(i) + " is not a probability vector");
    }
  }
}

void ConfusionAccumulator::add_source(const Eigen::MatrixXd& predictions, std::span<const int> labels) {
  check_predictions(predictions);
  if (static_cast<std::size_t>(predictions.rows()) != labels.size()) {
    throw Error(Errc::ShapeMismatch, std::to_string(predictions.rows()) + " predictions for " +
                                         std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k_) {
      throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y));
    }
  }
  for (Eigen::Index i = 0; i < predictions.rows(); ++i) {
    joint_counts_.col(labels[static_cast<std::size_t>(i)]) += predictions.row(i).transpose();
  }
  n_source_ += labels.size();
}

void ConfusionAccumulator::add_target(const Eigen::MatrixXd& predictions) {
  check_predictions(predictions);
  for (Eigen::Index i = 0; i < predictions.rows(); ++i) marginal_counts_ += predictions.row(i).transpose();
  n_target_ += static_cast<std::size_t>(predictions.rows());
}

void ConfusionAccumulator::accumulate(const Eigen::MatrixXd& source_predictions,
                                      std::span<const int> source_labels,
                                      const Eigen::MatrixXd& target_predictions) {
  check_predictions(target_predictions);
  add_source(source_predictions, source_labels);
  add_target(target_predictions);
}

void ConfusionAccumulator::reset() {
  joint_counts_.setZero();
  marginal_counts_.setZero();
  n_source_ = 0;
  n_target_ = 0;
}

FinalizedConfusion ConfusionAccumulator::finalize() const {
  if (n_source_ == 0 || n_target_ == 0) {
    throw Error(Errc::EmptyAccumulator, "finalize needs at least one source and one target sample");
  }
  Eigen::MatrixXd joint = joint_counts_ / static_cast<double>(n_source_);
  std::vector<double> mu(k_);
  for (std::size_t y = 0; y < k_; ++y) mu[y] = marginal_counts_(static_cast<Eigen::Index>(y)) / static_cast<double>(n_target_);
  std::vector<int> absent;
  for (std::size_t y = 0; y < k_; ++y) {
    if (joint.col(static_cast<Eigen::Index>(y)).sum() == 0.0) absent.push_back(static_cast<int>(y));
  }
  return {std::move(joint), Categorical::normalize(mu), std::move(absent)};
}

// ---------------------------------------------------------------------------
// Weight estimation

double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

WeightVector exact_inverse_weights(const Eigen::MatrixXd& joint, const Categorical& target_marginal,
                                   double condition_cap) {
  check_problem_shape(joint, target_marginal);
  const double cond = condition_number(joint);
  if (!(cond <= condition_cap)) {
    throw Error(Errc::SingularMatrix, "condition number " + std::to_string(cond) + " exceeds cap " +
                                          std::to_string(condition_cap));
  }
  return WeightVector(Eigen::VectorXd(joint.partialPivLu().solve(to_eigen(target_marginal))));
}

double qp_objective(const Eigen::MatrixXd& joint, const Categorical& target_marginal, const Eigen::VectorXd& w) {
  return 0.5 * (to_eigen(target_marginal) - joint * w).squaredNorm();
}

QpSolution solve_qp_detailed(const Eigen::MatrixXd& joint, const Categorical& target_marginal,
                             const Categorical& p_source, const QpOptions& options) {
  check_problem_shape(joint, target_marginal);
  if (p_source.size() != target_marginal.size()) {
    throw Error(Errc::ShapeMismatch, "source label distribution has the wrong length");
  }
  if (!p_source.strictly_positive()) {
    throw Error(Errc::DegenerateProblem, "source label distribution has a zero entry");
  }

  const Eigen::Index k = joint.rows();
  const Eigen::VectorXd p = to_eigen(p_source);
  const Eigen::VectorXd mu = to_eigen(target_marginal);
  const int max_iterations = options.max_iterations > 0 ? options.max_iterations : 50 * static_cast<int>(k) + 100;

  // All-ones satisfies w . p = 1 because p sums to one.
  Eigen::VectorXd w = Eigen::VectorXd::Ones(k);
  std::vector<bool> at_zero(static_cast<std::size_t>(k), false);

  const double scale = 1.0 + (joint.transpose() * mu).cwiseAbs().maxCoeff() + joint.squaredNorm();
  int iteration = 0;
  for (; iteration < max_iterations; ++iteration) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!at_zero[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd c_f(k, nf);
    Eigen::VectorXd p_f(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      c_f.col(a) = joint.col(free[a]);
      p_f(a) = p(free[a]);
    }

    // Minimizer on the free face {w_active = 0, p . w = 1}: substitute
    // x = x0 + N z, N an orthonormal basis of p_f's complement, and solve the
    // reduced least-squares problem. x0 is orthogonal to N, so the
    // minimum-norm z gives the minimum-norm optimum when C is rank deficient.
    const Eigen::VectorXd x0 = p_f / p_f.squaredNorm();
    Eigen::VectorXd target = x0;
    if (nf > 1) {
      const Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(p_f)};
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(nf, nf);
      const Eigen::MatrixXd basis = q.rightCols(nf - 1);
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(c_f * basis);
      if (options.rank_tolerance > 0.0) cod.setThreshold(options.rank_tolerance);
      target += basis * cod.solve(mu - c_f * x0);
    }

    Eigen::VectorXd step(nf);
    for (Eigen::Index a = 0; a < nf; ++a) step(a) = target(a) - w(free[a]);

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index a = 0; a < nf; ++a) {
      if (step(a) < 0.0) {
        const double ratio = -w(free[a]) / step(a);
        if (ratio < alpha) {
          alpha = ratio;
          blocking = free[a];
        }
      }
    }
    if (blocking >= 0) {
      for (Eigen::Index a = 0; a < nf; ++a) w(free[a]) += alpha * step(a);
      w(blocking) = 0.0;
      at_zero[static_cast<std::size_t>(blocking)] = true;
      continue;
    }

    // Full step: w minimizes the objective on this face. The gradient there is
    // nu * p on free coordinates; bounds with g_i - nu * p_i < 0 want to leave
    // zero. Release the lowest such index, or stop.
    for (Eigen::Index a = 0; a < nf; ++a) w(free[a]) = target(a);
    const Eigen::VectorXd gradient = joint.transpose() * (joint * w - mu);
    double nu = 0.0;
    for (Eigen::Index a = 0; a < nf; ++a) nu += p_f(a) * gradient(free[a]);
    nu /= p_f.squaredNorm();
    Eigen::Index release = -1;
    for (Eigen::Index i = 0; i < k && release < 0; ++i) {
      if (at_zero[static_cast<std::size_t>(i)] && gradient(i) - nu * p(i) < -1e-12 * scale) release = i;
    }
    if (release < 0) break;
    at_zero[static_cast<std::size_t>(release)] = false;
  }

  QpSolution solution;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (at_zero[static_cast<std::size_t>(i)] || w(i) < 0.0) w(i) = 0.0;
    if (at_zero[static_cast<std::size_t>(i)]) solution.active_set.push_back(static_cast<int>(i));
  }
  solution.objective = qp_objective(joint, target_marginal, w);
  solution.iterations = iteration;
  solution.weights = WeightVector(std::move(w));
  return solution;
}

WeightVector solve_qp(const Eigen::MatrixXd& joint, const Categorical& target_marginal,
                      const Categorical& p_source, const QpOptions& options) {
  return solve_qp_detailed(joint, target_marginal, p_source, options).weights;
}

WeightVector ema_update(const WeightVector& w_prev, const WeightVector& w_qp, double lambda) {
  if (w_prev.size() != w_qp.size()) throw Error(Errc::LengthMismatch, "weight vectors differ in length");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(Errc::LambdaOutOfRange, "lambda " + std::to_string(lambda) + " outside [0, 1]");
  }
  if (lambda == 0.0) return w_prev;
  if (lambda == 1.0) return w_qp;
  return WeightVector(Eigen::VectorXd(lambda * w_qp.values() + (1.0 - lambda) * w_prev.values()));
}

WeightVector true_weights(const Categorical& p_source, const Categorical& p_target) {
  if (p_source.size() != p_target.size()) throw Error(Errc::LengthMismatch, "label distributions differ in length");
  Eigen::VectorXd w(static_cast<Eigen::Index>(p_source.size()));
  for (std::size_t y = 0; y < p_source.size(); ++y) {
    if (p_source[y] <= 0.0) throw Error(Errc::ZeroSourceClass, "class " + std::to_string(y) + " has no source mass");
    w(static_cast<Eigen::Index>(y)) = p_target[y] / p_source[y];
  }
  return WeightVector(std::move(w));
}

}  // namespace gls
