#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gls/distributions.hpp"

namespace gls {

enum class DomainTag { Source, Target };

/// Labeled samples from one domain. Target labels are kept for diagnostics
/// and oracle weights; training never reads them.
struct Dataset {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;
  int k = 0;
  DomainTag tag = DomainTag::Source;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  Categorical label_distribution() const { return empirical_label_dist(labels, static_cast<std::size_t>(k)); }
  std::vector<int> class_counts() const;
  /// Checks the type invariants; throws InvalidSpec.
  void validate() const;
  /// Rows `indices`, in that order.
  Dataset select(std::span<const Eigen::Index> indices) const;
};

/// Isotropic Gaussian class conditionals.
struct DomainSpec {
  int k = 3;
  int d = 2;
  Eigen::MatrixXd class_means;  // k x d; empty means circle_means(k, d)
  double sigma = -1.0;          // negative means default_sigma(k)
  std::vector<double> label_dist;
  int n = 1000;
  std::uint64_t seed = 0;
  DomainTag tag = DomainTag::Source;
  /// Exact class counts (largest remainder of n * label_dist) in shuffled
  /// order instead of i.i.d. labels.
  bool stratified = false;
  /// Per-class mean offset (k x d), used to break the shared conditionals.
  std::optional<Eigen::MatrixXd> conditional_shift;
};

/// Means evenly spaced on the unit circle in the first two coordinates.
Eigen::MatrixXd circle_means(int k, int d);

/// Noise level putting the Bayes error of circle_means around 2%.
double default_sigma(int k);

Dataset make_gaussian_domain(const DomainSpec& spec);

/// Classes 0..ceil(k/2)-1 keep floor(fraction * n_y) uniformly chosen samples.
Dataset subsample_protocol(const Dataset& data, double fraction, std::uint64_t seed);

/// Per-class version: class y keeps floor(keep[y] * n_y) samples. Original
/// order is preserved among the kept rows.
Dataset subsample_classes(const Dataset& data, std::span<const double> keep, std::uint64_t seed);

struct ShiftTask {
  Dataset source;
  Dataset target;
  double jsd_label = 0.0;
  std::vector<double> keep;
  bool subsampled_source = true;
};

struct TaskSuiteOptions {
  double keep_min = 0.1;
  /// Stratification range for the label divergence; values beyond it fall in the edge bins.
  double jsd_low = 0.0;
  double jsd_high = 0.1;
  int bins = 8;
  /// Candidates drawn per requested task before the stratification quota is relaxed.
  int attempts_per_task = 400;
};

/// Tasks alternate between subsampling the source (even index) and the
/// target (odd index) with keep vectors in [keep_min, 1]^k, and are accepted
/// so the label divergences spread evenly over the bins.
std::vector<ShiftTask> jsd_task_suite(const Dataset& base_source, const Dataset& base_target, int count,
                                      std::uint64_t seed, const TaskSuiteOptions& options = {});

}  // namespace gls
