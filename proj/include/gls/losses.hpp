#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "gls/distributions.hpp"
#include "gls/estimator.hpp"

namespace gls {

/// Floor applied to probabilities inside every log.
inline constexpr double kLogFloor = 1e-12;

/// Value of a batch loss with its gradient w.r.t. the two inputs it consumes.
struct LossGrad {
  double value = 0.0;
  Eigen::MatrixXd d_first;   // same shape as the first input
  Eigen::MatrixXd d_second;  // same shape as the second input (may be empty)
};

/// -(1/s) sum_i [w_{y_i} ln d(src_i) + ln(1 - d(tgt_i))], discriminator outputs in [0, 1].
double weighted_da_loss(const Eigen::VectorXd& d_src, const Eigen::VectorXd& d_tgt, std::span<const int> labels_src,
                        const WeightVector& w);
/// Unweighted adversarial loss, -(1/s) sum_i [ln d(src_i) + ln(1 - d(tgt_i))].
double dann_da_loss(const Eigen::VectorXd& d_src, const Eigen::VectorXd& d_tgt);

/// d_first / d_second are s x 1 columns of dL/d(d_src), dL/d(d_tgt).
LossGrad weighted_da_loss_grad(const Eigen::VectorXd& d_src, const Eigen::VectorXd& d_tgt,
                               std::span<const int> labels_src, const WeightVector& w);

/// -(1/s) sum_i ln preds[i, y_i] / (k p_S(y_i)).
double weighted_classification_loss(const Eigen::MatrixXd& preds, std::span<const int> labels,
                                    const Categorical& p_source);
/// Importance-weighted variant: per-sample factor w_{y_i} / (k p_S(y_i)).
double weighted_classification_loss(const Eigen::MatrixXd& preds, std::span<const int> labels,
                                    const Categorical& p_source, const WeightVector& w);
/// -(1/s) sum_i ln preds[i, y_i].
double cross_entropy_loss(const Eigen::MatrixXd& preds, std::span<const int> labels);

/// d_first is dL/dpreds of the plain cross-entropy.
LossGrad cross_entropy_loss_grad(const Eigen::MatrixXd& preds, std::span<const int> labels);

/// d_first is dL/dpreds. Pass w = nullptr for the unweighted balanced form.
LossGrad weighted_classification_loss_grad(const Eigen::MatrixXd& preds, std::span<const int> labels,
                                           const Categorical& p_source, const WeightVector* w = nullptr);

/// Row i is preds_i (x) feats_i flattened class-major: [p_i1 f_i, ..., p_ik f_i].
Eigen::MatrixXd cdan_feature_map(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& feats);

/// Sum of Gaussian kernels exp(-|x - y|^2 / beta) over a set of bandwidths.
struct RbfKernel {
  std::vector<double> bandwidths;

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Eigen::Ref<const Eigen::RowVectorXd>& y) const;

  /// Median pairwise squared distance over both batches times each multiplier.
  static RbfKernel median_heuristic(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    std::span<const double> multipliers = kDefaultMultipliers);

  static constexpr double kDefaultMultipliers[3] = {0.5, 1.0, 2.0};
};

/// -(1/s^2) sum w_i w_j k(x_i, x_j) - (1/s^2) sum k(t_i, t_j) + (2/s^2) sum w_i k(x_i, t_j).
/// Equals minus the biased squared MMD between the reweighted source and the target.
double weighted_mmd_loss(const Eigen::MatrixXd& feats_src, std::span<const int> labels_src,
                         const Eigen::MatrixXd& feats_tgt, const WeightVector& w, const RbfKernel& kernel);
/// The unweighted form.
double jan_mmd_loss(const Eigen::MatrixXd& feats_src, const Eigen::MatrixXd& feats_tgt, const RbfKernel& kernel);

/// Gradients w.r.t. both feature batches; the kernel bandwidths are held fixed.
LossGrad weighted_mmd_loss_grad(const Eigen::MatrixXd& feats_src, std::span<const int> labels_src,
                                const Eigen::MatrixXd& feats_tgt, const WeightVector& w, const RbfKernel& kernel);

}  // namespace gls
