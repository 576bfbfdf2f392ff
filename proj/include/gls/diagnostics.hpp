#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gls/distributions.hpp"
#include "gls/estimator.hpp"

namespace gls {

enum class Relation { AtMost, AtLeast, Equal };

/// One side-by-side comparison. `holds` is lhs <= rhs + tolerance for
/// AtMost, lhs >= rhs - tolerance for AtLeast, |lhs - rhs| <= tolerance for
/// Equal; `slack` is the signed margin in the direction of the relation.
struct BoundReport {
  std::string name;
  Relation relation = Relation::AtMost;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  bool holds = true;
  double slack = 0.0;
  /// False when the premise of the statement fails; `holds` is then moot.
  bool applicable = true;
  std::vector<std::pair<std::string, double>> components;

  double component(const std::string& key) const;
};

BoundReport make_report(std::string name, Relation relation, double lhs, double rhs, double tolerance);

inline constexpr double kInequalitySlack = 0.02;
inline constexpr double kIdentityTolerance = 1e-8;

/// max_j (1 - conf[j, j]) on a row-normalized confusion (rows = true class).
double balanced_error_rate(const Eigen::MatrixXd& confusion_rows);

/// max over y != y' of |conf_src[y, y'] - conf_tgt[y, y']|.
double conditional_error_gap(const Eigen::MatrixXd& conf_src, const Eigen::MatrixXd& conf_tgt);

/// Row-normalized argmax confusion, rows = true class. Rows of absent classes are zero.
Eigen::MatrixXd confusion_rows(std::span<const int> labels, std::span<const int> predictions, int k);

struct HistogramSpec {
  int bins = 16;
  int max_dims = 2;
  int min_count = 50;
  int permutations = 20;
  std::uint64_t seed = 0;
};

/// Common grid for both domains: the bounding box of the union, first
/// min(d, max_dims) coordinates, `bins` cells per coordinate.
struct HistogramGrid {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  int bins = 16;

  static HistogramGrid covering(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const HistogramSpec& spec);
  int cell_count() const;
  std::vector<int> cells(const Eigen::MatrixXd& features) const;
};

struct GlsGap {
  std::vector<double> raw;        // per-class TV of the binned conditionals
  std::vector<double> baseline;   // mean TV under random relabeling of the domain
  std::vector<double> corrected;  // max(0, raw - baseline)
  double max_raw() const;
  double max_corrected() const;
};

/// Per-class TV between binned D_S(Z | Y = y) and D_T(Z | Y = y). Uses target
/// labels; throws InsufficientSamples below spec.min_count in either domain.
GlsGap gls_conditional_gap(const Eigen::MatrixXd& feats_src, std::span<const int> labels_src,
                           const Eigen::MatrixXd& feats_tgt, std::span<const int> labels_tgt, int k,
                           const HistogramSpec& spec = {});

/// eps_S + eps_T >= (sqrt(jsd_labels) - sqrt(jsd_features))^2 / 2 when jsd_labels >= jsd_features.
BoundReport check_lower_bound(double eps_s, double eps_t, double jsd_labels, double jsd_features,
                              double tolerance = kInequalitySlack);

/// |eps_S - eps_T| <= l1_labels * ber + 2 (k - 1) delta_ce.
BoundReport check_error_decomposition(double eps_s, double eps_t, double l1_labels, double ber, double delta_ce,
                                      int k, double tolerance = kInequalitySlack);

/// eps_S + eps_T <= 2 ber; applicable only when measured_gls_gap < gap_threshold.
BoundReport check_joint_error_bound(double eps_s, double eps_t, double ber, double measured_gls_gap,
                                    double gap_threshold = 0.1, double tolerance = kInequalitySlack);

/// measured_gap <= (w_M eps_S + eps_T + sqrt(8 jsd_weighted)) / gamma, gamma = min p_T.
/// The reported rhs is capped at 1; "rhs_raw" keeps the uncapped value.
BoundReport check_sufficiency_bound(double eps_s, double eps_t, const WeightVector& w, const Categorical& p_target,
                                    double jsd_weighted, double measured_gap, double tolerance = kInequalitySlack);

/// Optimal discriminator value on binned densities against ln 4 - 2 jsd(p_w, q),
/// plus random perturbations of the optimum that must not do better.
BoundReport check_discriminator_optimum(const Categorical& p_w, const Categorical& q, std::uint64_t seed = 0,
                                        int perturbations = 100);

/// Population form of the weighted adversarial loss on bins:
/// -sum_b p_w[b] ln d[b] - sum_b q[b] ln(1 - d[b]).
double binned_discriminator_loss(const Categorical& p_w, const Categorical& q, std::span<const double> d);

struct Contraction {
  std::vector<bool> per_class;
  double fraction = 0.0;
};

/// |w_next - w*| <= |w_prev - w*| per class.
Contraction check_weight_contraction(const WeightVector& w_prev, const WeightVector& w_next,
                                     const WeightVector& w_true);

/// Everything the per-epoch bound suite reads, evaluated on full datasets.
struct SuiteInput {
  int k = 0;
  Eigen::MatrixXd feats_src;  // representation g(x)
  Eigen::MatrixXd feats_tgt;
  std::vector<int> labels_src;
  std::vector<int> labels_tgt;
  std::vector<int> pred_src;  // argmax predictions
  std::vector<int> pred_tgt;
};

struct SuiteOptions {
  HistogramSpec histogram;
  double slack = kInequalitySlack;
  double gls_threshold = 0.1;
};

/// Runs every bound on the empirical measures of one epoch. Checks with the
/// "_pred" suffix take Z~ = Yhat; "_cells" take Z' = (histogram cell, Yhat),
/// a discrete representation of which Yhat is a function.
std::vector<BoundReport> run_bound_suite(const SuiteInput& input, const SuiteOptions& options = {});

}  // namespace gls
