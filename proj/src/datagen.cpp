#include "gls/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <utility>

#include "gls/error.hpp"

namespace gls {
namespace {

// floor(f * n), robust to products such as 0.29 * 100 landing just below an integer.
int kept_count(double fraction, int n) {
  return static_cast<int>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

std::vector<int> counts_of(std::span<const int> labels, int k) {
  std::vector<int> c(static_cast<std::size_t>(k), 0);
  for (int y : labels) ++c[static_cast<std::size_t>(y)];
  return c;
}

double jsd_of_counts(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<double> pa(a.begin(), a.end()), pb(b.begin(), b.end());
  return jsd(Categorical::normalize(pa), Categorical::normalize(pb));
}

}  // namespace

std::vector<int> Dataset::class_counts() const { return counts_of(labels, k); }

void Dataset::validate() const {
  if (k < 2) throw Error(Errc::InvalidSpec, "dataset needs k >= 2");
  if (features.rows() < 1) throw Error(Errc::InvalidSpec, "dataset is empty");
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw Error(Errc::InvalidSpec, std::to_string(labels.size()) + " labels for " +
                                       std::to_string(features.rows()) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= k) throw Error(Errc::InvalidSpec, "label " + std::to_string(y) + " outside [0, k)");
  }
  if (!features.allFinite()) throw Error(Errc::InvalidSpec, "non-finite feature");
}

Dataset Dataset::select(std::span<const Eigen::Index> indices) const {
  Dataset out;
  out.k = k;
  out.tag = tag;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(indices[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(indices[i])]);
  }
  return out;
}

Eigen::MatrixXd circle_means(int k, int d) {
  if (k < 2 || d < 2) throw Error(Errc::InvalidSpec, "circle means need k >= 2 and d >= 2");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, d);
  for (int y = 0; y < k; ++y) {
    const double angle = 2.0 * std::numbers::pi * y / k;
    m(y, 0) = std::cos(angle);
    m(y, 1) = std::sin(angle);
  }
  return m;
}

double default_sigma(int k) {
  // Neighbouring means sit 2 sin(pi/k) apart; put the midpoint 2.33 sigma out.
  return std::sin(std::numbers::pi / k) / 2.33;
}

Dataset make_gaussian_domain(const DomainSpec& spec) {
  if (spec.k < 2 || spec.d < 1 || spec.n < 1) throw Error(Errc::InvalidSpec, "need k >= 2, d >= 1, n >= 1");
  const Eigen::MatrixXd means = spec.class_means.size() ? spec.class_means : circle_means(spec.k, spec.d);
  if (means.rows() != spec.k || means.cols() != spec.d || !means.allFinite()) {
    throw Error(Errc::InvalidSpec, "class means must be a finite k x d matrix");
  }
  if (spec.conditional_shift &&
      (spec.conditional_shift->rows() != spec.k || spec.conditional_shift->cols() != spec.d ||
       !spec.conditional_shift->allFinite())) {
    throw Error(Errc::InvalidSpec, "conditional shift must be a finite k x d matrix");
  }
  if (static_cast<int>(spec.label_dist.size()) != spec.k) {
    throw Error(Errc::InvalidSpec, "label distribution has " + std::to_string(spec.label_dist.size()) +
                                       " entries for k = " + std::to_string(spec.k));
  }
  const double sigma = spec.sigma < 0.0 ? default_sigma(spec.k) : spec.sigma;
  if (!std::isfinite(sigma)) throw Error(Errc::InvalidSpec, "sigma must be finite");
  try {
    Categorical check(spec.label_dist);
  } catch (const Error& e) {
    throw Error(Errc::InvalidSpec, std::string("label distribution: ") + e.what());
  }

  std::mt19937_64 rng(spec.seed);
  std::discrete_distribution<int> label(spec.label_dist.begin(), spec.label_dist.end());
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset out;
  out.k = spec.k;
  out.tag = spec.tag;
  out.features.resize(spec.n, spec.d);
  out.labels.resize(static_cast<std::size_t>(spec.n));
  std::vector<int> fixed;
  if (spec.stratified) {
    std::vector<int> counts(static_cast<std::size_t>(spec.k));
    std::vector<std::pair<double, int>> remainder;
    int assigned = 0;
    for (int y = 0; y < spec.k; ++y) {
      const double exact = spec.n * spec.label_dist[static_cast<std::size_t>(y)];
      counts[static_cast<std::size_t>(y)] = static_cast<int>(std::floor(exact + 1e-9));
      assigned += counts[static_cast<std::size_t>(y)];
      remainder.emplace_back(-(exact - counts[static_cast<std::size_t>(y)]), y);
    }
    std::sort(remainder.begin(), remainder.end());
    for (int i = 0; assigned < spec.n; ++i, ++assigned) ++counts[static_cast<std::size_t>(remainder[static_cast<std::size_t>(i)].second)];
    for (int y = 0; y < spec.k; ++y) fixed.insert(fixed.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(y)]), y);
    std::shuffle(fixed.begin(), fixed.end(), rng);
  }
  for (int i = 0; i < spec.n; ++i) {
    const int y = spec.stratified ? fixed[static_cast<std::size_t>(i)] : label(rng);
    out.labels[static_cast<std::size_t>(i)] = y;
    Eigen::RowVectorXd mean = means.row(y);
    if (spec.conditional_shift) mean += spec.conditional_shift->row(y);
    for (int j = 0; j < spec.d; ++j) {
      const double e = noise(rng);
      out.features(i, j) = sigma == 0.0 ? mean(j) : mean(j) + sigma * e;
    }
  }
  return out;
}

Dataset subsample_classes(const Dataset& data, std::span<const double> keep, std::uint64_t seed) {
  if (static_cast<int>(keep.size()) != data.k) {
    throw Error(Errc::InvalidSpec, "keep vector has " + std::to_string(keep.size()) + " entries");
  }
  for (double f : keep) {
    if (!(f > 0.0 && f <= 1.0)) throw Error(Errc::InvalidSpec, "keep fractions must lie in (0, 1]");
  }
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(data.k));
  for (Eigen::Index i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> kept;
  for (int y = 0; y < data.k; ++y) {
    auto& idx = by_class[static_cast<std::size_t>(y)];
    const double f = keep[static_cast<std::size_t>(y)];
    if (f == 1.0) {
      kept.insert(kept.end(), idx.begin(), idx.end());
      continue;
    }
    const int m = kept_count(f, static_cast<int>(idx.size()));
    if (m == 0 && !idx.empty()) {
      throw Error(Errc::EmptyClassAfterSubsample, "class " + std::to_string(y) + " has " +
                                                      std::to_string(idx.size()) + " samples, keeping none");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    kept.insert(kept.end(), idx.begin(), idx.begin() + m);
  }
  std::sort(kept.begin(), kept.end());
  return data.select(kept);
}

Dataset subsample_protocol(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(Errc::InvalidSpec, "fraction must lie in (0, 1]");
  std::vector<double> keep(static_cast<std::size_t>(data.k), 1.0);
  for (int y = 0; y < (data.k + 1) / 2; ++y) keep[static_cast<std::size_t>(y)] = fraction;
  return subsample_classes(data, keep, seed);
}

std::vector<ShiftTask> jsd_task_suite(const Dataset& base_source, const Dataset& base_target, int count,
                                      std::uint64_t seed, const TaskSuiteOptions& options) {
  if (count < 1) throw Error(Errc::InvalidCount, "task count must be at least 1");
  if (base_source.k != base_target.k) throw Error(Errc::InvalidSpec, "base domains disagree on k");
  if (!(options.keep_min > 0.0 && options.keep_min <= 1.0) || options.bins < 1 ||
      !(options.jsd_high > options.jsd_low)) {
    throw Error(Errc::InvalidSpec, "bad task suite options");
  }
  const int k = base_source.k;
  const auto src_counts = base_source.class_counts();
  const auto tgt_counts = base_target.class_counts();
  const int quota = (count + options.bins - 1) / options.bins;
  std::vector<int> filled(static_cast<std::size_t>(options.bins), 0);

  auto bin_of = [&](double j) {
    const double t = (j - options.jsd_low) / (options.jsd_high - options.jsd_low);
    return std::clamp(static_cast<int>(std::floor(t * options.bins)), 0, options.bins - 1);
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ShiftTask> tasks;
  for (int slot = 0; slot < count; ++slot) {
    const bool on_source = slot % 2 == 0;
    const auto& counts = on_source ? src_counts : tgt_counts;
    std::vector<double> best_keep;
    double best_jsd = 0.0;
    for (int attempt = 0; attempt < options.attempts_per_task; ++attempt) {
      // Per-vector strength and shape spread the candidates from near-uniform
      // keep vectors to strongly skewed ones; every other candidate is two-level
      // (each class either mostly dropped or mostly kept), which is what reaches
      // the largest divergences.
      const double strength = unit(rng);
      const double shape = std::exp(3.0 * unit(rng) - 1.5);
      const bool two_level = attempt % 2 == 1;
      const double drop_rate = unit(rng);
      std::vector<double> keep(static_cast<std::size_t>(k));
      std::vector<int> after = counts;
      bool empty = false;
      for (int y = 0; y < k; ++y) {
        double v = std::pow(unit(rng), shape);
        if (two_level) v = unit(rng) < drop_rate ? 1.0 - 0.1 * v : 0.1 * v;
        keep[static_cast<std::size_t>(y)] = 1.0 - (1.0 - options.keep_min) * strength * v;
        after[static_cast<std::size_t>(y)] = kept_count(keep[static_cast<std::size_t>(y)], counts[static_cast<std::size_t>(y)]);
        if (after[static_cast<std::size_t>(y)] == 0 && counts[static_cast<std::size_t>(y)] > 0) empty = true;
      }
      if (empty) continue;
      const double j = on_source ? jsd_of_counts(after, tgt_counts) : jsd_of_counts(src_counts, after);
      best_keep = keep;
      best_jsd = j;
      if (filled[static_cast<std::size_t>(bin_of(j))] < quota) break;
    }
    if (best_keep.empty()) throw Error(Errc::EmptyClassAfterSubsample, "no keep vector leaves every class populated");
    ++filled[static_cast<std::size_t>(bin_of(best_jsd))];

    ShiftTask task;
    task.keep = best_keep;
    task.subsampled_source = on_source;
    const std::uint64_t sub_seed = rng();
    task.source = on_source ? subsample_classes(base_source, best_keep, sub_seed) : base_source;
    task.target = on_source ? base_target : subsample_classes(base_target, best_keep, sub_seed);
    task.jsd_label = jsd(task.source.label_distribution(), task.target.label_distribution());
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace gls
