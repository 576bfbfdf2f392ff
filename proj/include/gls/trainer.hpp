#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gls/datagen.hpp"
#include "gls/diagnostics.hpp"
#include "gls/estimator.hpp"
#include "gls/network.hpp"

namespace gls {

enum class Algorithm { None, Dann, Iwdan, IwdanO, Cdan, Iwcdan, IwcdanO, Jan, Iwjan, IwjanO };

enum class Family { SourceOnly, Adversarial, Kernel };

struct AlgorithmTraits {
  Family family = Family::SourceOnly;
  DiscriminatorInput discriminator_input = DiscriminatorInput::Features;
  bool importance_weighted = false;
  bool oracle = false;
};

AlgorithmTraits traits(Algorithm a);
/// The unweighted algorithm a weighted variant builds on (dann for iwdan_o).
Algorithm base_algorithm(Algorithm a);
std::string algorithm_name(Algorithm a);
/// Accepts the names returned by algorithm_name; throws ConfigInvalid.
Algorithm parse_algorithm(std::string_view name);

struct TrainConfig {
  Algorithm algorithm = Algorithm::Iwdan;
  int epochs = 30;
  int batches_per_epoch = 100;
  int batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  double lambda = 0.5;  // EMA factor for the weight update
  std::uint64_t seed = 0;
  int weight_update_period = 1;
  bool weight_da_loss = true;
  bool weight_c_loss = true;
  /// Gradient reversal strength: the feature extractor receives
  /// -da_coefficient times the adversarial gradient. Low-dimensional tasks
  /// need a strong reversal before the alignment visibly distorts g.
  double da_coefficient = 5.0;
  /// Step decay: lr is multiplied by lr_decay every lr_decay_every epochs (0 = constant).
  int lr_decay_every = 0;
  double lr_decay = 1.0;
  Architecture architecture;
  bool run_bounds = true;
  SuiteOptions bounds;

  /// Throws ConfigInvalid.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double acc_src = 0.0;
  double acc_tgt = 0.0;
  double loss_da = 0.0;  // mean over the epoch's batches
  double loss_c = 0.0;
  /// Weights after the end-of-epoch update, i.e. the ones the next epoch trains with.
  WeightVector w;
  /// This epoch's raw QP solution (empty on epochs that skip the update).
  WeightVector w_qp;
  double w_dist = 0.0;  // |w - w*|_2
  double jsd_label = 0.0;
  /// Feature divergence read off the adversarial loss, (ln 4 - loss_da) / 2.
  double jsd_discriminator = 0.0;
  Contraction contraction;
  std::vector<BoundReport> bounds;
};

struct TrainTrace {
  Algorithm algorithm = Algorithm::None;
  std::uint64_t seed = 0;
  WeightVector w_true;
  std::vector<EpochRecord> epochs;

  /// Max target accuracy over the epoch records.
  double best_acc_tgt() const;
  double final_acc_tgt() const;
};

struct TrainResult {
  ModelState state;
  TrainTrace trace;
};

/// Runs the importance-weighted training loop. Target labels are read only by
/// the oracle variants and the diagnostics. Throws ConfigInvalid, DimensionMismatch.
TrainResult train(const TrainConfig& config, const Dataset& source, const Dataset& target);

struct Evaluation {
  double accuracy = 0.0;
  Eigen::MatrixXd confusion;  // row-normalized, rows = true class
  std::vector<int> predictions;
  Eigen::MatrixXd features;
};

/// Argmax accuracy and confusion on a labeled set. Throws DimensionMismatch.
Evaluation evaluate(const ModelState& state, const Dataset& data);

}  // namespace gls
