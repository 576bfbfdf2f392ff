#include "gls/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "gls/error.hpp"

namespace gls {
namespace {

constexpr double kRowTolerance = 1e-6;

void check_confusion(const Eigen::MatrixXd& c, const char* what) {
  if (c.rows() != c.cols() || c.rows() < 2) {
    throw Error(Errc::MalformedConfusion, std::string(what) + " is not a square k x k matrix");
  }
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    if (c.row(i).minCoeff() < 0.0 || std::abs(c.row(i).sum() - 1.0) > kRowTolerance) {
      throw Error(Errc::MalformedConfusion, std::string(what) + " row " + std::to_string(i) + " is not normalized");
    }
  }
}

double tv_of_counts(const std::vector<double>& a, double na, const std::vector<double>& b, double nb) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += std::abs(a[c] / na - b[c] / nb);
  return 0.5 * s;
}

double error_rate(std::span<const int> labels, std::span<const int> preds) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += labels[i] != preds[i];
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

}  // namespace

double BoundReport::component(const std::string& key) const {
  for (const auto& [k, v] : components)
    if (k == key) return v;
  return std::numeric_limits<double>::quiet_NaN();
}

BoundReport make_report(std::string name, Relation relation, double lhs, double rhs, double tolerance) {
  BoundReport r;
  r.name = std::move(name);
  r.relation = relation;
  r.lhs = lhs;
  r.rhs = rhs;
  r.tolerance = tolerance;
  switch (relation) {
    case Relation::AtMost: r.slack = rhs - lhs; break;
    case Relation::AtLeast: r.slack = lhs - rhs; break;
    case Relation::Equal: r.slack = -std::abs(lhs - rhs); break;
  }
  r.holds = relation == Relation::Equal ? -r.slack <= tolerance : r.slack >= -tolerance;
  return r;
}

double balanced_error_rate(const Eigen::MatrixXd& confusion_rows) {
  check_confusion(confusion_rows, "confusion");
  double worst = 0.0;
  for (Eigen::Index j = 0; j < confusion_rows.rows(); ++j) worst = std::max(worst, 1.0 - confusion_rows(j, j));
  return worst;
}

double conditional_error_gap(const Eigen::MatrixXd& conf_src, const Eigen::MatrixXd& conf_tgt) {
  check_confusion(conf_src, "source confusion");
  check_confusion(conf_tgt, "target confusion");
  if (conf_src.rows() != conf_tgt.rows()) throw Error(Errc::MalformedConfusion, "confusions differ in size");
  double gap = 0.0;
  for (Eigen::Index y = 0; y < conf_src.rows(); ++y)
    for (Eigen::Index yp = 0; yp < conf_src.cols(); ++yp)
      if (y != yp) gap = std::max(gap, std::abs(conf_src(y, yp) - conf_tgt(y, yp)));
  return gap;
}

Eigen::MatrixXd confusion_rows(std::span<const int> labels, std::span<const int> predictions, int k) {
  if (labels.size() != predictions.size()) throw Error(Errc::ShapeMismatch, "labels and predictions differ in length");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k || predictions[i] < 0 || predictions[i] >= k) {
      throw Error(Errc::LabelOutOfRange, "label or prediction outside [0, k)");
    }
    m(labels[i], predictions[i]) += 1.0;
  }
  for (Eigen::Index y = 0; y < k; ++y) {
    const double n = m.row(y).sum();
    if (n > 0.0) m.row(y) /= n;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Histograms

HistogramGrid HistogramGrid::covering(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const HistogramSpec& spec) {
  if (a.cols() != b.cols() || a.cols() < 1) throw Error(Errc::ShapeMismatch, "feature dimensions differ");
  if (spec.bins < 1 || spec.max_dims < 1) throw Error(Errc::InvalidSpec, "histogram needs bins >= 1, max_dims >= 1");
  const Eigen::Index dims = std::min<Eigen::Index>(a.cols(), spec.max_dims);
  HistogramGrid g;
  g.bins = spec.bins;
  g.lo = Eigen::VectorXd::Constant(dims, std::numeric_limits<double>::infinity());
  g.hi = Eigen::VectorXd::Constant(dims, -std::numeric_limits<double>::infinity());
  for (const auto* m : {&a, &b}) {
    if (m->rows() == 0) continue;
    g.lo = g.lo.cwiseMin(m->leftCols(dims).colwise().minCoeff().transpose());
    g.hi = g.hi.cwiseMax(m->leftCols(dims).colwise().maxCoeff().transpose());
  }
  return g;
}

int HistogramGrid::cell_count() const {
  int n = 1;
  for (Eigen::Index j = 0; j < lo.size(); ++j) n *= bins;
  return n;
}

std::vector<int> HistogramGrid::cells(const Eigen::MatrixXd& features) const {
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    int cell = 0;
    for (Eigen::Index j = lo.size(); j-- > 0;) {
      const double width = hi(j) - lo(j);
      int b = 0;
      if (width > 0.0) b = std::clamp(static_cast<int>(std::floor((features(i, j) - lo(j)) / width * bins)), 0, bins - 1);
      cell = cell * bins + b;
    }
    out[static_cast<std::size_t>(i)] = cell;
  }
  return out;
}

double GlsGap::max_raw() const { return raw.empty() ? 0.0 : *std::max_element(raw.begin(), raw.end()); }
double GlsGap::max_corrected() const {
  return corrected.empty() ? 0.0 : *std::max_element(corrected.begin(), corrected.end());
}

GlsGap gls_conditional_gap(const Eigen::MatrixXd& feats_src, std::span<const int> labels_src,
                           const Eigen::MatrixXd& feats_tgt, std::span<const int> labels_tgt, int k,
                           const HistogramSpec& spec) {
  if (static_cast<std::size_t>(feats_src.rows()) != labels_src.size() ||
      static_cast<std::size_t>(feats_tgt.rows()) != labels_tgt.size()) {
    throw Error(Errc::ShapeMismatch, "features and labels differ in length");
  }
  const auto grid = HistogramGrid::covering(feats_src, feats_tgt, spec);
  const auto cells_s = grid.cells(feats_src);
  const auto cells_t = grid.cells(feats_tgt);
  const auto n_cells = static_cast<std::size_t>(grid.cell_count());

  std::vector<std::vector<int>> by_class_s(static_cast<std::size_t>(k)), by_class_t(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < cells_s.size(); ++i) by_class_s.at(static_cast<std::size_t>(labels_src[i])).push_back(cells_s[i]);
  for (std::size_t i = 0; i < cells_t.size(); ++i) by_class_t.at(static_cast<std::size_t>(labels_tgt[i])).push_back(cells_t[i]);

  GlsGap gap;
  std::mt19937_64 rng(spec.seed);
  for (int y = 0; y < k; ++y) {
    const auto& s = by_class_s[static_cast<std::size_t>(y)];
    const auto& t = by_class_t[static_cast<std::size_t>(y)];
    if (static_cast<int>(s.size()) < spec.min_count || static_cast<int>(t.size()) < spec.min_count) {
      throw Error(Errc::InsufficientSamples, "class " + std::to_string(y) + " has " + std::to_string(s.size()) +
                                                 " source and " + std::to_string(t.size()) + " target samples");
    }
    auto tv_of = [&](const std::vector<int>& pooled, std::size_t split) {
      std::vector<double> a(n_cells, 0.0), b(n_cells, 0.0);
      for (std::size_t i = 0; i < pooled.size(); ++i) (i < split ? a : b)[static_cast<std::size_t>(pooled[i])] += 1.0;
      return tv_of_counts(a, static_cast<double>(split), b, static_cast<double>(pooled.size() - split));
    };
    std::vector<int> pooled(s);
    pooled.insert(pooled.end(), t.begin(), t.end());
    const double raw = tv_of(pooled, s.size());
    double base = 0.0;
    for (int p = 0; p < spec.permutations; ++p) {
      std::shuffle(pooled.begin(), pooled.end(), rng);
      base += tv_of(pooled, s.size());
    }
    if (spec.permutations > 0) base /= spec.permutations;
    gap.raw.push_back(raw);
    gap.baseline.push_back(base);
    gap.corrected.push_back(std::max(0.0, raw - base));
  }
  return gap;
}

// ---------------------------------------------------------------------------
// Bounds

BoundReport check_lower_bound(double eps_s, double eps_t, double jsd_labels, double jsd_features, double tolerance) {
  const double gap = std::sqrt(jsd_labels) - std::sqrt(jsd_features);
  auto r = make_report("lower_bound", Relation::AtLeast, eps_s + eps_t, 0.5 * gap * gap, tolerance);
  r.applicable = jsd_labels >= jsd_features && jsd_labels > 0.0;
  r.components = {{"eps_s", eps_s}, {"eps_t", eps_t}, {"jsd_labels", jsd_labels}, {"jsd_features", jsd_features}};
  return r;
}

BoundReport check_error_decomposition(double eps_s, double eps_t, double l1_labels, double ber, double delta_ce,
                                      int k, double tolerance) {
  auto r = make_report("error_decomposition", Relation::AtMost, std::abs(eps_s - eps_t),
                       l1_labels * ber + 2.0 * (k - 1) * delta_ce, tolerance);
  r.components = {{"eps_s", eps_s}, {"eps_t", eps_t}, {"l1_labels", l1_labels}, {"ber", ber}, {"delta_ce", delta_ce}};
  return r;
}

BoundReport check_joint_error_bound(double eps_s, double eps_t, double ber, double measured_gls_gap,
                                    double gap_threshold, double tolerance) {
  auto r = make_report("joint_error", Relation::AtMost, eps_s + eps_t, 2.0 * ber, tolerance);
  r.applicable = measured_gls_gap < gap_threshold;
  r.components = {{"eps_s", eps_s}, {"eps_t", eps_t}, {"ber", ber}, {"gls_gap", measured_gls_gap}};
  return r;
}

BoundReport check_sufficiency_bound(double eps_s, double eps_t, const WeightVector& w, const Categorical& p_target,
                                    double jsd_weighted, double measured_gap, double tolerance) {
  if (w.size() != p_target.size()) throw Error(Errc::LengthMismatch, "weights and target distribution differ");
  const double gamma = p_target.min();
  if (!(gamma > 0.0)) throw Error(Errc::DegenerateGamma, "target label distribution has an empty class");
  const double w_max = w.max();
  const double raw = (w_max * eps_s + eps_t + std::sqrt(8.0 * std::max(0.0, jsd_weighted))) / gamma;
  auto r = make_report("sufficiency", Relation::AtMost, measured_gap, std::min(1.0, raw), tolerance);
  r.components = {{"eps_s", eps_s},        {"eps_t", eps_t}, {"w_max", w_max},
                  {"gamma", gamma},        {"jsd_weighted", jsd_weighted}, {"rhs_raw", raw}};
  return r;
}

double binned_discriminator_loss(const Categorical& p_w, const Categorical& q, std::span<const double> d) {
  if (p_w.size() != q.size() || d.size() != q.size()) throw Error(Errc::LengthMismatch, "bin counts differ");
  double v = 0.0;
  for (std::size_t b = 0; b < d.size(); ++b) {
    if (p_w[b] > 0.0) v -= p_w[b] * std::log(d[b]);
    if (q[b] > 0.0) v -= q[b] * std::log(1.0 - d[b]);
  }
  return v;
}

BoundReport check_discriminator_optimum(const Categorical& p_w, const Categorical& q, std::uint64_t seed,
                                        int perturbations) {
  if (p_w.size() != q.size()) throw Error(Errc::LengthMismatch, "bin counts differ");
  const std::size_t n = q.size();
  std::vector<double> d_star(n, 0.5);
  for (std::size_t b = 0; b < n; ++b) {
    if (p_w[b] + q[b] > 0.0) d_star[b] = p_w[b] / (p_w[b] + q[b]);
  }
  const double at_optimum = binned_discriminator_loss(p_w, q, d_star);
  auto r = make_report("discriminator_optimum", Relation::Equal, at_optimum, std::log(4.0) - 2.0 * jsd(p_w, q),
                       kIdentityTolerance);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  int beaten = 0;
  double closest = std::numeric_limits<double>::infinity();
  for (int t = 0; t < perturbations; ++t) {
    std::vector<double> d(n);
    for (std::size_t b = 0; b < n; ++b) d[b] = std::clamp(d_star[b] + noise(rng), 1e-9, 1.0 - 1e-9);
    const double v = binned_discriminator_loss(p_w, q, d);
    closest = std::min(closest, v - at_optimum);
    beaten += v < at_optimum;
  }
  r.components = {{"perturbed_min_excess", closest}, {"perturbed_better", static_cast<double>(beaten)}};
  r.holds = r.holds && beaten == 0;
  return r;
}

Contraction check_weight_contraction(const WeightVector& w_prev, const WeightVector& w_next,
                                     const WeightVector& w_true) {
  if (w_prev.size() != w_next.size() || w_prev.size() != w_true.size()) {
    throw Error(Errc::LengthMismatch, "weight vectors differ in length");
  }
  Contraction c;
  std::size_t good = 0;
  for (std::size_t y = 0; y < w_true.size(); ++y) {
    const bool ok = std::abs(w_next[y] - w_true[y]) <= std::abs(w_prev[y] - w_true[y]);
    c.per_class.push_back(ok);
    good += ok;
  }
  c.fraction = w_true.size() ? static_cast<double>(good) / static_cast<double>(w_true.size()) : 1.0;
  return c;
}

// ---------------------------------------------------------------------------
// Suite

std::vector<BoundReport> run_bound_suite(const SuiteInput& in, const SuiteOptions& options) {
  const int k = in.k;
  const auto ks = static_cast<std::size_t>(k);
  if (in.labels_src.size() != in.pred_src.size() || in.labels_tgt.size() != in.pred_tgt.size()) {
    throw Error(Errc::ShapeMismatch, "labels and predictions differ in length");
  }
  const Categorical p_s = empirical_label_dist(in.labels_src, ks);
  const Categorical p_t = empirical_label_dist(in.labels_tgt, ks);
  if (!p_s.strictly_positive() || !p_t.strictly_positive()) {
    throw Error(Errc::InsufficientSamples, "every class must appear in both domains");
  }
  const Eigen::MatrixXd conf_s = confusion_rows(in.labels_src, in.pred_src, k);
  const Eigen::MatrixXd conf_t = confusion_rows(in.labels_tgt, in.pred_tgt, k);
  const double eps_s = error_rate(in.labels_src, in.pred_src);
  const double eps_t = error_rate(in.labels_tgt, in.pred_tgt);
  const double ber = balanced_error_rate(conf_s);
  const double delta_ce = conditional_error_gap(conf_s, conf_t);
  const double jsd_labels = jsd(p_s, p_t);
  const WeightVector w_true = true_weights(p_s, p_t);

  std::vector<BoundReport> out;

  // Z~ = Yhat: every quantity is an exact categorical plug-in.
  const Categorical q_s = empirical_label_dist(in.pred_src, ks);
  const Categorical q_t = empirical_label_dist(in.pred_tgt, ks);
  out.push_back(check_lower_bound(eps_s, eps_t, jsd_labels, jsd(q_s, q_t), options.slack));
  out.back().name = "lower_bound_pred";
  out.push_back(check_error_decomposition(eps_s, eps_t, l1_distance(p_s, p_t), ber, delta_ce, k, options.slack));

  double gap = std::numeric_limits<double>::quiet_NaN();
  double gap_raw = gap;
  try {
    const auto g = gls_conditional_gap(in.feats_src, in.labels_src, in.feats_tgt, in.labels_tgt, k, options.histogram);
    gap = g.max_corrected();
    gap_raw = g.max_raw();
  } catch (const Error& e) {
    if (e.code() != Errc::InsufficientSamples) throw;
  }
  out.push_back(check_joint_error_bound(eps_s, eps_t, ber, gap, options.gls_threshold, options.slack));
  out.back().components.emplace_back("gls_gap_raw", gap_raw);

  std::vector<double> weighted_pred(ks, 0.0);
  double tv_pred = 0.0;
  for (int y = 0; y < k; ++y) {
    for (int j = 0; j < k; ++j) weighted_pred[static_cast<std::size_t>(j)] += p_t[static_cast<std::size_t>(y)] * conf_s(y, j);
    tv_pred = std::max(tv_pred, 0.5 * (conf_s.row(y) - conf_t.row(y)).cwiseAbs().sum());
  }
  out.push_back(check_sufficiency_bound(eps_s, eps_t, w_true, p_t, jsd(Categorical::normalize(weighted_pred), q_t),
                                        tv_pred, options.slack));
  out.back().name = "sufficiency_pred";

  // Z' = (histogram cell of g(x), Yhat).
  const auto grid = HistogramGrid::covering(in.feats_src, in.feats_tgt, options.histogram);
  const auto n_cells = static_cast<std::size_t>(grid.cell_count()) * ks;
  auto joint_cells = [&](const Eigen::MatrixXd& f, const std::vector<int>& pred) {
    auto c = grid.cells(f);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = c[i] * k + pred[i];
    return c;
  };
  const auto cells_s = joint_cells(in.feats_src, in.pred_src);
  const auto cells_t = joint_cells(in.feats_tgt, in.pred_tgt);
  std::vector<double> plain_s(n_cells, 0.0), weighted_s(n_cells, 0.0), mass_t(n_cells, 0.0);
  std::vector<std::vector<double>> cond_s(ks, std::vector<double>(n_cells, 0.0)), cond_t = cond_s;
  for (std::size_t i = 0; i < cells_s.size(); ++i) {
    const auto c = static_cast<std::size_t>(cells_s[i]);
    const auto y = static_cast<std::size_t>(in.labels_src[i]);
    plain_s[c] += 1.0;
    weighted_s[c] += w_true[y];
    cond_s[y][c] += 1.0;
  }
  for (std::size_t i = 0; i < cells_t.size(); ++i) {
    const auto c = static_cast<std::size_t>(cells_t[i]);
    mass_t[c] += 1.0;
    cond_t[static_cast<std::size_t>(in.labels_tgt[i])][c] += 1.0;
  }
  double tv_cells = 0.0;
  std::vector<double> n_s(ks, 0.0), n_t(ks, 0.0);
  for (int y : in.labels_src) n_s[static_cast<std::size_t>(y)] += 1.0;
  for (int y : in.labels_tgt) n_t[static_cast<std::size_t>(y)] += 1.0;
  for (std::size_t y = 0; y < ks; ++y) tv_cells = std::max(tv_cells, tv_of_counts(cond_s[y], n_s[y], cond_t[y], n_t[y]));

  const Categorical cells_dist_t = Categorical::normalize(mass_t);
  out.push_back(check_sufficiency_bound(eps_s, eps_t, w_true, p_t,
                                        jsd(Categorical::normalize(weighted_s), cells_dist_t), tv_cells, options.slack));
  out.back().name = "sufficiency_cells";
  out.back().components.emplace_back("gls_gap_corrected", gap);
  out.push_back(check_lower_bound(eps_s, eps_t, jsd_labels, jsd(Categorical::normalize(plain_s), cells_dist_t),
                                  options.slack));
  out.back().name = "lower_bound_cells";
  return out;
}

}  // namespace gls
