#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace gls {

enum class Activation { Tanh, Relu };

/// What the last layer emits. `Hidden` reuses the hidden activation.
enum class OutputHead { Linear, Hidden, Softmax, Sigmoid };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Parameter-shaped container, used for gradients and momentum buffers.
struct MlpParams {
  std::vector<DenseLayer> layers;

  void set_zero();
  void add_scaled(const MlpParams& other, double scale);
  double squared_norm() const;
};

/// Feed-forward network on row-major batches (one sample per row).
class Mlp {
 public:
  struct Cache {
    /// inputs[l] is the batch entering layer l; inputs.back() is the head output.
    std::vector<Eigen::MatrixXd> inputs;
  };

  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Activation activation, OutputHead head);

  /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init_uniform(std::mt19937_64& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  /// Given dL/d(output), accumulates parameter gradients into `grads` (if not
  /// null) and returns dL/d(input).
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_output, MlpParams* grads) const;

  MlpParams zeros_like() const;

  const std::vector<int>& layer_sizes() const noexcept { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  Activation activation() const noexcept { return activation_; }
  OutputHead head() const noexcept { return head_; }
  MlpParams& params() noexcept { return params_; }
  const MlpParams& params() const noexcept { return params_; }

 private:
  std::vector<int> sizes_;
  Activation activation_ = Activation::Tanh;
  OutputHead head_ = OutputHead::Linear;
  MlpParams params_;
};

enum class DiscriminatorInput { Features, Outer };

struct Architecture {
  std::vector<int> feature_hidden{64};
  int feature_dim = 32;
  std::vector<int> discriminator_hidden{32};
  Activation activation = Activation::Tanh;
  DiscriminatorInput discriminator_input = DiscriminatorInput::Features;
};

struct ModelGradients {
  MlpParams g;
  MlpParams h;
  MlpParams d;
};

/// g (features), h (softmax classifier), d (sigmoid discriminator) plus
/// momentum buffers. `version` changes on every parameter update so caches
/// taken before the update are rejected by backward.
struct ModelState {
  Mlp g;
  Mlp h;
  Mlp d;
  DiscriminatorInput discriminator_input = DiscriminatorInput::Features;
  ModelGradients velocity;
  std::uint64_t step = 0;
  std::uint64_t version = 0;

  int input_dim() const { return g.input_dim(); }
  int feature_dim() const { return g.output_dim(); }
  int classes() const { return h.output_dim(); }
};

ModelState make_model(int input_dim, int classes, const Architecture& arch, std::uint64_t seed);

enum class ForwardMode { Features, Classify, DiscriminateZ, DiscriminateOuter };

/// Everything a backward pass needs. Discriminator modes also fill the
/// classifier outputs, so one forward serves both losses.
struct ForwardPass {
  ForwardMode mode = ForwardMode::Features;
  std::uint64_t version = 0;
  Eigen::MatrixXd features;        // n x z
  Eigen::MatrixXd probs;           // n x k, empty in Features mode
  Eigen::MatrixXd disc_input;      // n x z or n x (k z)
  Eigen::VectorXd disc;            // n, empty unless discriminating
  Mlp::Cache g_cache;
  Mlp::Cache h_cache;
  Mlp::Cache d_cache;

  /// Returns the mode's primary output as an n x out matrix.
  Eigen::MatrixXd output() const;
};

ForwardPass forward(const ModelState& state, const Eigen::MatrixXd& x, ForwardMode mode);

/// Upstream gradients of the batch loss. Empty members contribute nothing.
struct Upstream {
  Eigen::MatrixXd d_probs;     // dL/dprobs, from the classification loss
  Eigen::VectorXd d_disc;      // dL/d(discriminator output)
  Eigen::MatrixXd d_features;  // dL/dfeatures, e.g. from a kernel loss
};

struct BackwardOptions {
  /// Multiplies the gradient that leaves d toward g (and h, in outer mode).
  /// 1 gives the true gradient; training passes -reversal.
  double adversarial_scale = 1.0;
  /// Whether the discriminator path also updates h's parameters (outer mode).
  bool adversarial_into_classifier = true;
};

ModelGradients backward(const ModelState& state, const ForwardPass& pass, const Upstream& upstream,
                        const BackwardOptions& options = {});

ModelGradients zero_gradients(const ModelState& state);
void accumulate(ModelGradients& into, const ModelGradients& from);

/// v <- momentum * v + grad; param <- param - lr * v.
void sgd_step(ModelState& state, const ModelGradients& grads, double lr, double momentum);

/// Text checkpoint: one line of layer sizes per network, then row-major
/// weights and biases per layer.
void save_checkpoint(const ModelState& state, std::ostream& out);
ModelState load_checkpoint(std::istream& in);

}  // namespace gls
