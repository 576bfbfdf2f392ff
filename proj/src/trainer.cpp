#include "gls/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "gls/error.hpp"
#include "gls/losses.hpp"

namespace gls {
namespace {

struct Named {
  Algorithm algorithm;
  const char* name;
};

constexpr std::array<Named, 10> kNames{{{Algorithm::None, "none"},
                                        {Algorithm::Dann, "dann"},
                                        {Algorithm::Iwdan, "iwdan"},
                                        {Algorithm::IwdanO, "iwdan_o"},
                                        {Algorithm::Cdan, "cdan"},
                                        {Algorithm::Iwcdan, "iwcdan"},
                                        {Algorithm::IwcdanO, "iwcdan_o"},
                                        {Algorithm::Jan, "jan"},
                                        {Algorithm::Iwjan, "iwjan"},
                                        {Algorithm::IwjanO, "iwjan_o"}}};

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index j = 0;
    probs.row(i).maxCoeff(&j);
    out[static_cast<std::size_t>(i)] = static_cast<int>(j);
  }
  return out;
}

void check_pair(const Dataset& source, const Dataset& target) {
  source.validate();
  target.validate();
  if (source.k != target.k || source.dim() != target.dim()) {
    throw Error(Errc::DimensionMismatch, "source (k = " + std::to_string(source.k) + ", d = " +
                                             std::to_string(source.dim()) + ") and target (k = " +
                                             std::to_string(target.k) + ", d = " + std::to_string(target.dim()) +
                                             ") disagree");
  }
}

}  // namespace

AlgorithmTraits traits(Algorithm a) {
  AlgorithmTraits t;
  switch (a) {
    case Algorithm::None:
      break;
    case Algorithm::Dann:
    case Algorithm::Iwdan:
    case Algorithm::IwdanO:
      t.family = Family::Adversarial;
      break;
    case Algorithm::Cdan:
    case Algorithm::Iwcdan:
    case Algorithm::IwcdanO:
      t.family = Family::Adversarial;
      t.discriminator_input = DiscriminatorInput::Outer;
      break;
    case Algorithm::Jan:
    case Algorithm::Iwjan:
    case Algorithm::IwjanO:
      t.family = Family::Kernel;
      break;
  }
  t.oracle = a == Algorithm::IwdanO || a == Algorithm::IwcdanO || a == Algorithm::IwjanO;
  t.importance_weighted = t.oracle || a == Algorithm::Iwdan || a == Algorithm::Iwcdan || a == Algorithm::Iwjan;
  return t;
}

Algorithm base_algorithm(Algorithm a) {
  switch (a) {
    case Algorithm::Iwdan:
    case Algorithm::IwdanO:
      return Algorithm::Dann;
    case Algorithm::Iwcdan:
    case Algorithm::IwcdanO:
      return Algorithm::Cdan;
    case Algorithm::Iwjan:
    case Algorithm::IwjanO:
      return Algorithm::Jan;
    default:
      return a;
  }
}

std::string algorithm_name(Algorithm a) {
  for (const auto& n : kNames)
    if (n.algorithm == a) return n.name;
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (const auto& n : kNames)
    if (name == n.name) return n.algorithm;
  throw Error(Errc::ConfigInvalid, "unknown algorithm '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::ConfigInvalid, msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batches_per_epoch < 1) fail("batches_per_epoch must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (weight_update_period < 1) fail("weight_update_period must be >= 1");
  if (!(da_coefficient >= 0.0) || !std::isfinite(da_coefficient)) fail("da_coefficient must be >= 0");
  if (lr_decay_every < 0 || !(lr_decay > 0.0)) fail("bad step decay");
  if (architecture.feature_dim < 1) fail("feature_dim must be >= 1");
}

double TrainTrace::best_acc_tgt() const {
  double best = 0.0;
  for (const auto& e : epochs) best = std::max(best, e.acc_tgt);
  return best;
}

double TrainTrace::final_acc_tgt() const { return epochs.empty() ? 0.0 : epochs.back().acc_tgt; }

Evaluation evaluate(const ModelState& state, const Dataset& data) {
  if (data.dim() != state.input_dim() || data.k != state.classes()) {
    throw Error(Errc::DimensionMismatch, "dataset (d = " + std::to_string(data.dim()) + ", k = " +
                                             std::to_string(data.k) + ") does not fit the model");
  }
  const auto pass = forward(state, data.features, ForwardMode::Classify);
  Evaluation out;
  out.predictions = argmax_rows(pass.probs);
  out.features = pass.features;
  int correct = 0;
  for (std::size_t i = 0; i < data.labels.size(); ++i) correct += out.predictions[i] == data.labels[i];
  out.accuracy = data.labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(data.labels.size());
  out.confusion = confusion_rows(data.labels, out.predictions, data.k);
  return out;
}

TrainResult train(const TrainConfig& config, const Dataset& source, const Dataset& target) {
  config.validate();
  check_pair(source, target);
  const AlgorithmTraits t = traits(config.algorithm);
  const int k = source.k;
  const auto ks = static_cast<std::size_t>(k);

  Architecture arch = config.architecture;
  arch.discriminator_input = t.discriminator_input;
  TrainResult result{make_model(static_cast<int>(source.dim()), k, arch, config.seed), {}};
  ModelState& state = result.state;

  const Categorical p_s = source.label_distribution();
  const Categorical p_t = target.label_distribution();
  const WeightVector w_true = true_weights(p_s, p_t);
  const double jsd_label = jsd(p_s, p_t);
  const WeightVector ones = WeightVector::ones(ks);
  TrainTrace& trace = result.trace;
  trace.algorithm = config.algorithm;
  trace.seed = config.seed;
  trace.w_true = w_true;

  WeightVector w = t.oracle ? w_true : ones;
  const bool weighted_da = t.importance_weighted && config.weight_da_loss;
  const bool weighted_c = t.importance_weighted && config.weight_c_loss;

  // Model init consumes its own generator; this one only draws batch indices.
  std::seed_seq seq{config.seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<Eigen::Index> pick_s(0, source.size() - 1), pick_t(0, target.size() - 1);

  const ForwardMode disc_mode = t.discriminator_input == DiscriminatorInput::Outer ? ForwardMode::DiscriminateOuter
                                                                                   : ForwardMode::DiscriminateZ;
  const ForwardMode mode_s = t.family == Family::Adversarial ? disc_mode : ForwardMode::Classify;
  const ForwardMode mode_t = t.family == Family::Adversarial ? disc_mode : ForwardMode::Features;
  BackwardOptions reverse;
  reverse.adversarial_scale = -config.da_coefficient;
  reverse.adversarial_into_classifier = false;

  ConfusionAccumulator acc(ks);
  const auto s = static_cast<std::size_t>(config.batch_size);
  std::vector<Eigen::Index> idx_s(s), idx_t(s);
  std::vector<int> ys(s);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.lr_decay_every > 0
                          ? config.lr * std::pow(config.lr_decay, (epoch - 1) / config.lr_decay_every)
                          : config.lr;
    double sum_da = 0.0, sum_c = 0.0;
    for (int b = 0; b < config.batches_per_epoch; ++b) {
      for (std::size_t i = 0; i < s; ++i) idx_s[i] = pick_s(rng);
      for (std::size_t i = 0; i < s; ++i) idx_t[i] = pick_t(rng);
      for (std::size_t i = 0; i < s; ++i) ys[i] = source.labels[static_cast<std::size_t>(idx_s[i])];
      const Eigen::MatrixXd xs = gather(source.features, idx_s);
      const Eigen::MatrixXd xt = gather(target.features, idx_t);

      const ForwardPass ps = forward(state, xs, mode_s);
      const LossGrad lc = !weighted_c                   ? cross_entropy_loss_grad(ps.probs, ys)
                          : t.family == Family::Kernel ? weighted_classification_loss_grad(ps.probs, ys, p_s, &w)
                                                       : weighted_classification_loss_grad(ps.probs, ys, p_s);
      sum_c += lc.value;
      Upstream up_s, up_t;
      up_s.d_probs = lc.d_first;

      ModelGradients grads;
      if (t.family == Family::SourceOnly) {
        grads = backward(state, ps, up_s);
      } else {
        const ForwardPass pt = forward(state, xt, mode_t);
        const WeightVector& wd = weighted_da ? w : ones;
        if (t.family == Family::Adversarial) {
          const LossGrad ld = weighted_da_loss_grad(ps.disc, pt.disc, ys, wd);
          sum_da += ld.value;
          up_s.d_disc = ld.d_first.col(0);
          up_t.d_disc = ld.d_second.col(0);
        } else {
          // The feature extractor maximizes -MMD^2; the bandwidths are fixed per batch.
          const RbfKernel kernel = RbfKernel::median_heuristic(ps.features, pt.features);
          const LossGrad ld = weighted_mmd_loss_grad(ps.features, ys, pt.features, wd, kernel);
          sum_da += ld.value;
          up_s.d_features = -config.da_coefficient * ld.d_first;
          up_t.d_features = -config.da_coefficient * ld.d_second;
        }
        grads = backward(state, ps, up_s, reverse);
        accumulate(grads, backward(state, pt, up_t, reverse));
      }
      sgd_step(state, grads, lr, config.momentum);

      acc.accumulate(forward(state, xs, ForwardMode::Classify).probs, ys,
                     forward(state, xt, ForwardMode::Classify).probs);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_c = sum_c / config.batches_per_epoch;
    rec.loss_da = sum_da / config.batches_per_epoch;
    rec.jsd_label = jsd_label;
    rec.jsd_discriminator = t.family == Family::Adversarial ? (2.0 * std::numbers::ln2 - rec.loss_da) / 2.0 : 0.0;

    const WeightVector w_prev = w;
    if (epoch % config.weight_update_period == 0) {
      const FinalizedConfusion fin = acc.finalize();
      rec.w_qp = solve_qp(fin.joint, fin.target_marginal, p_s);
      if (!t.oracle) w = ema_update(w, rec.w_qp, config.lambda);
      acc.reset();
    }
    rec.w = w;
    rec.w_dist = w.distance(w_true);
    rec.contraction = check_weight_contraction(w_prev, w, w_true);

    const Evaluation es = evaluate(state, source);
    const Evaluation et = evaluate(state, target);
    rec.acc_src = es.accuracy;
    rec.acc_tgt = et.accuracy;
    if (config.run_bounds) {
      SuiteInput in;
      in.k = k;
      in.feats_src = es.features;
      in.feats_tgt = et.features;
      in.labels_src = source.labels;
      in.labels_tgt = target.labels;
      in.pred_src = es.predictions;
      in.pred_tgt = et.predictions;
      SuiteOptions opts = config.bounds;
      opts.histogram.seed = config.bounds.histogram.seed + static_cast<std::uint64_t>(epoch);
      try {
        rec.bounds = run_bound_suite(in, opts);
      } catch (const Error& e) {
        if (e.code() != Errc::InsufficientSamples) throw;
      }
    }
    trace.epochs.push_back(std::move(rec));
  }
  return result;
}

}  // namespace gls
