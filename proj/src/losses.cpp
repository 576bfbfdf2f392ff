#include "gls/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gls/error.hpp"

namespace gls {
namespace {

double clamped_log(double p) { return std::log(std::max(p, kLogFloor)); }

// d/dp of clamped_log.
double clamped_log_slope(double p) { return p > kLogFloor ? 1.0 / p : 0.0; }

void check_disc_outputs(const Eigen::VectorXd& d_src, const Eigen::VectorXd& d_tgt) {
  if (d_src.size() != d_tgt.size()) {
    throw Error(Errc::BatchSizeMismatch, std::to_string(d_src.size()) + " source and " +
                                             std::to_string(d_tgt.size()) + " target outputs");
  }
  if (d_src.size() == 0) throw Error(Errc::EmptyInput, "empty discriminator batch");
  for (const auto* v : {&d_src, &d_tgt}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      const double x = (*v)(i);
      if (!(x >= 0.0 && x <= 1.0)) {
        throw Error(Errc::OutOfRangeDiscriminatorOutput, "discriminator output " + std::to_string(x));
      }
    }
  }
}

void check_labels(std::span<const int> labels, Eigen::Index rows, std::size_t k) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw Error(Errc::ShapeMismatch, std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y));
  }
}

std::vector<double> class_factors(const Categorical& p_source, const WeightVector* w) {
  const std::size_t k = p_source.size();
  if (w && w->size() != k) throw Error(Errc::LengthMismatch, "weights and source distribution differ in length");
  std::vector<double> f(k);
  for (std::size_t y = 0; y < k; ++y) {
    if (p_source[y] <= 0.0) throw Error(Errc::ZeroSourceClass, "class " + std::to_string(y) + " has no source mass");
    f[y] = 1.0 / (static_cast<double>(k) * p_source[y]);
    if (w) f[y] *= (*w)[y];
  }
  return f;
}

double balanced_ce(const Eigen::MatrixXd& preds, std::span<const int> labels, const std::vector<double>& factors) {
  if (static_cast<std::size_t>(preds.cols()) != factors.size()) {
    throw Error(Errc::ShapeMismatch, "predictions have " + std::to_string(preds.cols()) + " columns");
  }
  check_labels(labels, preds.rows(), factors.size());
  if (labels.empty()) throw Error(Errc::EmptyInput, "empty classification batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    sum += factors[static_cast<std::size_t>(y)] * clamped_log(preds(static_cast<Eigen::Index>(i), y));
  }
  return -sum / static_cast<double>(labels.size());
}

void check_mmd_inputs(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt) {
  if (src.rows() != tgt.rows()) {
    throw Error(Errc::BatchSizeMismatch, std::to_string(src.rows()) + " source and " + std::to_string(tgt.rows()) +
                                             " target samples");
  }
  if (src.rows() == 0) throw Error(Errc::EmptyInput, "empty kernel batch");
  if (src.cols() != tgt.cols()) throw Error(Errc::ShapeMismatch, "feature dimensions differ");
}

Eigen::VectorXd per_sample_weights(std::span<const int> labels, const WeightVector& w, Eigen::Index rows) {
  check_labels(labels, rows, w.size());
  Eigen::VectorXd out(rows);
  for (Eigen::Index i = 0; i < rows; ++i) out(i) = w[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Adversarial

double weighted_da_loss(const Eigen::VectorXd& d_src, const Eigen::VectorXd& d_tgt, std::span<const int> labels_src,
                        const WeightVector& w) {
  check_disc_outputs(d_src, d_tgt);
  check_labels(labels_src, d_src.size(), w.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < d_src.size(); ++i) {
    sum += w[static_cast<std::size_t>(labels_src[static_cast<std::size_t>(i)])] * clamped_log(d_src(i)) +
           clamped_log(1.0 - d_tgt(i));
  }
  return -sum / static_cast<double>(d_src.size());
}

double dann_da_loss(const Eigen::VectorXd& d_src, const Eigen::VectorXd& d_tgt) {
  check_disc_outputs(d_src, d_tgt);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < d_src.size(); ++i) sum += clamped_log(d_src(i)) + clamped_log(1.0 - d_tgt(i));
  return -sum / static_cast<double>(d_src.size());
}

LossGrad weighted_da_loss_grad(const Eigen::VectorXd& d_src, const Eigen::VectorXd& d_tgt,
                               std::span<const int> labels_src, const WeightVector& w) {
  LossGrad out;
  out.value = weighted_da_loss(d_src, d_tgt, labels_src, w);
  const auto s = static_cast<double>(d_src.size());
  out.d_first.resize(d_src.size(), 1);
  out.d_second.resize(d_tgt.size(), 1);
  for (Eigen::Index i = 0; i < d_src.size(); ++i) {
    const double wy = w[static_cast<std::size_t>(labels_src[static_cast<std::size_t>(i)])];
    out.d_first(i, 0) = -wy * clamped_log_slope(d_src(i)) / s;
    out.d_second(i, 0) = clamped_log_slope(1.0 - d_tgt(i)) / s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification

double weighted_classification_loss(const Eigen::MatrixXd& preds, std::span<const int> labels,
                                    const Categorical& p_source) {
  return balanced_ce(preds, labels, class_factors(p_source, nullptr));
}

double weighted_classification_loss(const Eigen::MatrixXd& preds, std::span<const int> labels,
                                    const Categorical& p_source, const WeightVector& w) {
  return balanced_ce(preds, labels, class_factors(p_source, &w));
}

double cross_entropy_loss(const Eigen::MatrixXd& preds, std::span<const int> labels) {
  check_labels(labels, preds.rows(), static_cast<std::size_t>(preds.cols()));
  if (labels.empty()) throw Error(Errc::EmptyInput, "empty classification batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum += clamped_log(preds(static_cast<Eigen::Index>(i), labels[i]));
  return -sum / static_cast<double>(labels.size());
}

LossGrad cross_entropy_loss_grad(const Eigen::MatrixXd& preds, std::span<const int> labels) {
  LossGrad out;
  out.value = cross_entropy_loss(preds, labels);
  out.d_first = Eigen::MatrixXd::Zero(preds.rows(), preds.cols());
  const auto s = static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out.d_first(row, labels[i]) = -clamped_log_slope(preds(row, labels[i])) / s;
  }
  return out;
}

LossGrad weighted_classification_loss_grad(const Eigen::MatrixXd& preds, std::span<const int> labels,
                                           const Categorical& p_source, const WeightVector* w) {
  const auto factors = class_factors(p_source, w);
  LossGrad out;
  out.value = balanced_ce(preds, labels, factors);
  out.d_first = Eigen::MatrixXd::Zero(preds.rows(), preds.cols());
  const auto s = static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const int y = labels[i];
    out.d_first(row, y) = -factors[static_cast<std::size_t>(y)] * clamped_log_slope(preds(row, y)) / s;
  }
  return out;
}

Eigen::MatrixXd cdan_feature_map(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& feats) {
  if (preds.rows() != feats.rows()) {
    throw Error(Errc::ShapeMismatch, std::to_string(preds.rows()) + " prediction rows vs " +
                                         std::to_string(feats.rows()) + " feature rows");
  }
  const Eigen::Index k = preds.cols();
  const Eigen::Index z = feats.cols();
  Eigen::MatrixXd out(preds.rows(), k * z);
  for (Eigen::Index i = 0; i < preds.rows(); ++i)
    for (Eigen::Index c = 0; c < k; ++c) out.block(i, c * z, 1, z) = preds(i, c) * feats.row(i);
  return out;
}

// ---------------------------------------------------------------------------
// Kernel losses

double RbfKernel::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                             const Eigen::Ref<const Eigen::RowVectorXd>& y) const {
  const double sq = (x - y).squaredNorm();
  double v = 0.0;
  for (double beta : bandwidths) v += std::exp(-sq / beta);
  return v;
}

RbfKernel RbfKernel::median_heuristic(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                      std::span<const double> multipliers) {
  if (a.cols() != b.cols()) throw Error(Errc::ShapeMismatch, "feature dimensions differ");
  Eigen::MatrixXd all(a.rows() + b.rows(), a.cols());
  all << a, b;
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(all.rows() * (all.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < all.rows(); ++i)
    for (Eigen::Index j = i + 1; j < all.rows(); ++j) d2.push_back((all.row(i) - all.row(j)).squaredNorm());
  double median = 1.0;
  if (!d2.empty()) {
    auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    median = *mid;
  }
  if (!(median > 0.0)) median = 1.0;
  RbfKernel kernel;
  for (double m : multipliers) kernel.bandwidths.push_back(m * median);
  return kernel;
}

double weighted_mmd_loss(const Eigen::MatrixXd& feats_src, std::span<const int> labels_src,
                         const Eigen::MatrixXd& feats_tgt, const WeightVector& w, const RbfKernel& kernel) {
  check_mmd_inputs(feats_src, feats_tgt);
  const Eigen::VectorXd ws = per_sample_weights(labels_src, w, feats_src.rows());
  const Eigen::Index s = feats_src.rows();
  double ss = 0.0, tt = 0.0, st = 0.0;
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = 0; j < s; ++j) {
      ss += ws(i) * ws(j) * kernel(feats_src.row(i), feats_src.row(j));
      tt += kernel(feats_tgt.row(i), feats_tgt.row(j));
      st += ws(i) * kernel(feats_src.row(i), feats_tgt.row(j));
    }
  }
  const double s2 = static_cast<double>(s) * static_cast<double>(s);
  return -ss / s2 - tt / s2 + 2.0 * st / s2;
}

double jan_mmd_loss(const Eigen::MatrixXd& feats_src, const Eigen::MatrixXd& feats_tgt, const RbfKernel& kernel) {
  check_mmd_inputs(feats_src, feats_tgt);
  const Eigen::Index s = feats_src.rows();
  double ss = 0.0, tt = 0.0, st = 0.0;
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = 0; j < s; ++j) {
      ss += kernel(feats_src.row(i), feats_src.row(j));
      tt += kernel(feats_tgt.row(i), feats_tgt.row(j));
      st += kernel(feats_src.row(i), feats_tgt.row(j));
    }
  }
  const double s2 = static_cast<double>(s) * static_cast<double>(s);
  return -ss / s2 - tt / s2 + 2.0 * st / s2;
}

LossGrad weighted_mmd_loss_grad(const Eigen::MatrixXd& feats_src, std::span<const int> labels_src,
                                const Eigen::MatrixXd& feats_tgt, const WeightVector& w, const RbfKernel& kernel) {
  check_mmd_inputs(feats_src, feats_tgt);
  const Eigen::VectorXd ws = per_sample_weights(labels_src, w, feats_src.rows());
  const Eigen::Index s = feats_src.rows();
  const double s2 = static_cast<double>(s) * static_cast<double>(s);

  // d/dx k(x, y) = sum_beta -(2 / beta) (x - y) exp(-|x - y|^2 / beta).
  auto kernel_and_slope = [&](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y, double& value) {
    const Eigen::RowVectorXd diff = x - y;
    const double sq = diff.squaredNorm();
    value = 0.0;
    double slope = 0.0;
    for (double beta : kernel.bandwidths) {
      const double e = std::exp(-sq / beta);
      value += e;
      slope += -2.0 / beta * e;
    }
    return Eigen::RowVectorXd(slope * diff);
  };

  LossGrad out;
  out.d_first = Eigen::MatrixXd::Zero(s, feats_src.cols());
  out.d_second = Eigen::MatrixXd::Zero(s, feats_tgt.cols());
  double ss = 0.0, tt = 0.0, st = 0.0;
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = 0; j < s; ++j) {
      double k = 0.0;
      Eigen::RowVectorXd gx = kernel_and_slope(feats_src.row(i), feats_src.row(j), k);
      ss += ws(i) * ws(j) * k;
      // Pair (i, j) touches x_i with +gx and x_j with -gx.
      out.d_first.row(i) -= ws(i) * ws(j) * gx / s2;
      out.d_first.row(j) += ws(i) * ws(j) * gx / s2;

      gx = kernel_and_slope(feats_tgt.row(i), feats_tgt.row(j), k);
      tt += k;
      out.d_second.row(i) -= gx / s2;
      out.d_second.row(j) += gx / s2;

      gx = kernel_and_slope(feats_src.row(i), feats_tgt.row(j), k);
      st += ws(i) * k;
      out.d_first.row(i) += 2.0 * ws(i) * gx / s2;
      out.d_second.row(j) -= 2.0 * ws(i) * gx / s2;
    }
  }
  out.value = -ss / s2 - tt / s2 + 2.0 * st / s2;
  return out;
}

}  // namespace gls
