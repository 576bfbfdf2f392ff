#include "gls/network.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "gls/error.hpp"

namespace gls {
namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_same_shape(const MlpParams& a, const MlpParams& b, const char* what) {
  bool ok = a.layers.size() == b.layers.size();
  for (std::size_t l = 0; ok && l < a.layers.size(); ++l) {
    ok = a.layers[l].weight.rows() == b.layers[l].weight.rows() &&
         a.layers[l].weight.cols() == b.layers[l].weight.cols() &&
         a.layers[l].bias.size() == b.layers[l].bias.size();
  }
  if (!ok) throw Error(Errc::ShapeMismatch, std::string(what) + " does not match the parameter shapes");
}

Eigen::MatrixXd apply_hidden(const Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::Tanh) return z.array().tanh().matrix();
  return z.cwiseMax(0.0);
}

// d(act)/dz expressed through the activation output y.
Eigen::MatrixXd hidden_backward(const Eigen::MatrixXd& y, const Eigen::MatrixXd& dy, Activation act) {
  if (act == Activation::Tanh) return (dy.array() * (1.0 - y.array().square())).matrix();
  return (dy.array() * (y.array() > 0.0).cast<double>()).matrix();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Eigen::RowVectorXd e = (z.row(i).array() - z.row(i).maxCoeff()).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Row i of the result is [p_i1 * f_i, ..., p_ik * f_i].
Eigen::MatrixXd outer_rows(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& feats) {
  const Eigen::Index k = probs.cols();
  const Eigen::Index z = feats.cols();
  Eigen::MatrixXd out(probs.rows(), k * z);
  for (Eigen::Index c = 0; c < k; ++c) {
    out.middleCols(c * z, z) = feats.array().colwise() * probs.col(c).array();
  }
  return out;
}

const char* head_name(OutputHead h) {
  switch (h) {
    case OutputHead::Linear: return "linear";
    case OutputHead::Hidden: return "hidden";
    case OutputHead::Softmax: return "softmax";
    case OutputHead::Sigmoid: return "sigmoid";
  }
  return "linear";
}

OutputHead parse_head(const std::string& s) {
  if (s == "linear") return OutputHead::Linear;
  if (s == "hidden") return OutputHead::Hidden;
  if (s == "softmax") return OutputHead::Softmax;
  if (s == "sigmoid") return OutputHead::Sigmoid;
  throw Error(Errc::ParseError, "unknown output head '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// MlpParams

void MlpParams::set_zero() {
  for (auto& layer : layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
}

void MlpParams::add_scaled(const MlpParams& other, double scale) {
  check_same_shape(*this, other, "added parameters");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += scale * other.layers[l].weight;
    layers[l].bias += scale * other.layers[l].bias;
  }
}

double MlpParams::squared_norm() const {
  double s = 0.0;
  for (const auto& layer : layers) s += layer.weight.squaredNorm() + layer.bias.squaredNorm();
  return s;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation, OutputHead head)
    : sizes_(std::move(layer_sizes)), activation_(activation), head_(head) {
  if (sizes_.size() < 2) throw Error(Errc::ShapeMismatch, "an mlp needs an input and an output size");
  for (int s : sizes_) {
    if (s < 1) throw Error(Errc::ShapeMismatch, "layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    params_.layers.push_back({Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]), Eigen::VectorXd::Zero(sizes_[l + 1])});
  }
}

void Mlp::init_uniform(std::mt19937_64& rng) {
  for (auto& layer : params_.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = u(rng);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = u(rng);
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.cols() != input_dim()) {
    throw Error(Errc::ShapeMismatch, "input is " + shape_str(x) + ", network expects " +
                                         std::to_string(input_dim()) + " columns");
  }
  if (cache) {
    cache->inputs.clear();
    cache->inputs.push_back(x);
  }
  Eigen::MatrixXd a = x;
  const std::size_t n_layers = params_.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = params_.layers[l];
    Eigen::MatrixXd z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < n_layers) {
      a = apply_hidden(z, activation_);
    } else {
      switch (head_) {
        case OutputHead::Linear: a = std::move(z); break;
        case OutputHead::Hidden: a = apply_hidden(z, activation_); break;
        case OutputHead::Softmax: a = softmax_rows(z); break;
        case OutputHead::Sigmoid: a = z.unaryExpr([](double v) { return sigmoid(v); }); break;
      }
    }
    if (cache) cache->inputs.push_back(a);
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_output, MlpParams* grads) const {
  const std::size_t n_layers = params_.layers.size();
  if (cache.inputs.size() != n_layers + 1) throw Error(Errc::StaleCache, "cache does not belong to this network");
  const Eigen::MatrixXd& y = cache.inputs.back();
  if (d_output.rows() != y.rows() || d_output.cols() != y.cols()) {
    throw Error(Errc::ShapeMismatch, "upstream gradient is " + shape_str(d_output) + ", output is " + shape_str(y));
  }
  if (grads) check_same_shape(*grads, params_, "gradient buffer");

  Eigen::MatrixXd dz;
  switch (head_) {
    case OutputHead::Linear: dz = d_output; break;
    case OutputHead::Hidden: dz = hidden_backward(y, d_output, activation_); break;
    case OutputHead::Softmax: {
      const Eigen::VectorXd dots = (d_output.array() * y.array()).rowwise().sum();
      dz = (y.array() * (d_output.colwise() - dots).array()).matrix();
      break;
    }
    case OutputHead::Sigmoid: dz = (d_output.array() * y.array() * (1.0 - y.array())).matrix(); break;
  }

  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = params_.layers[l];
    const Eigen::MatrixXd& a_in = cache.inputs[l];
    if (grads) {
      grads->layers[l].weight.noalias() += dz.transpose() * a_in;
      grads->layers[l].bias += dz.colwise().sum().transpose();
    }
    Eigen::MatrixXd da = dz * layer.weight;
    if (l == 0) return da;
    dz = hidden_backward(a_in, da, activation_);
  }
  return {};
}

MlpParams Mlp::zeros_like() const {
  MlpParams z = params_;
  z.set_zero();
  return z;
}

// ---------------------------------------------------------------------------
// ModelState

ModelState make_model(int input_dim, int classes, const Architecture& arch, std::uint64_t seed) {
  if (input_dim < 1 || classes < 2 || arch.feature_dim < 1) {
    throw Error(Errc::ShapeMismatch, "model needs input_dim >= 1, classes >= 2, feature_dim >= 1");
  }
  std::vector<int> g_sizes{input_dim};
  g_sizes.insert(g_sizes.end(), arch.feature_hidden.begin(), arch.feature_hidden.end());
  g_sizes.push_back(arch.feature_dim);

  const int d_in = arch.discriminator_input == DiscriminatorInput::Outer ? classes * arch.feature_dim : arch.feature_dim;
  std::vector<int> d_sizes{d_in};
  d_sizes.insert(d_sizes.end(), arch.discriminator_hidden.begin(), arch.discriminator_hidden.end());
  d_sizes.push_back(1);

  ModelState state;
  state.g = Mlp(g_sizes, arch.activation, OutputHead::Hidden);
  state.h = Mlp({arch.feature_dim, classes}, arch.activation, OutputHead::Softmax);
  state.d = Mlp(d_sizes, arch.activation, OutputHead::Sigmoid);
  state.discriminator_input = arch.discriminator_input;

  std::mt19937_64 rng(seed);
  state.g.init_uniform(rng);
  state.h.init_uniform(rng);
  state.d.init_uniform(rng);
  state.velocity = zero_gradients(state);
  return state;
}

Eigen::MatrixXd ForwardPass::output() const {
  switch (mode) {
    case ForwardMode::Features: return features;
    case ForwardMode::Classify: return probs;
    case ForwardMode::DiscriminateZ:
    case ForwardMode::DiscriminateOuter: return disc;
  }
  return features;
}

ForwardPass forward(const ModelState& state, const Eigen::MatrixXd& x, ForwardMode mode) {
  ForwardPass pass;
  pass.mode = mode;
  pass.version = state.version;
  pass.features = state.g.forward(x, &pass.g_cache);
  if (mode == ForwardMode::Features) return pass;
  pass.probs = state.h.forward(pass.features, &pass.h_cache);
  if (mode == ForwardMode::Classify) return pass;

  if (mode == ForwardMode::DiscriminateOuter) {
    pass.disc_input = outer_rows(pass.probs, pass.features);
  } else {
    pass.disc_input = pass.features;
  }
  if (pass.disc_input.cols() != state.d.input_dim()) {
    throw Error(Errc::ShapeMismatch, "discriminator expects " + std::to_string(state.d.input_dim()) +
                                         " inputs, mode provides " + std::to_string(pass.disc_input.cols()));
  }
  pass.disc = state.d.forward(pass.disc_input, &pass.d_cache).col(0);
  return pass;
}

ModelGradients zero_gradients(const ModelState& state) {
  return {state.g.zeros_like(), state.h.zeros_like(), state.d.zeros_like()};
}

void accumulate(ModelGradients& into, const ModelGradients& from) {
  into.g.add_scaled(from.g, 1.0);
  into.h.add_scaled(from.h, 1.0);
  into.d.add_scaled(from.d, 1.0);
}

ModelGradients backward(const ModelState& state, const ForwardPass& pass, const Upstream& upstream,
                        const BackwardOptions& options) {
  if (pass.version != state.version) {
    throw Error(Errc::StaleCache, "forward pass taken at version " + std::to_string(pass.version) +
                                      ", parameters are at version " + std::to_string(state.version));
  }
  const Eigen::Index n = pass.features.rows();
  const Eigen::Index z = pass.features.cols();
  ModelGradients grads = zero_gradients(state);

  Eigen::MatrixXd d_features = Eigen::MatrixXd::Zero(n, z);
  if (upstream.d_features.size() > 0) {
    if (upstream.d_features.rows() != n || upstream.d_features.cols() != z) {
      throw Error(Errc::ShapeMismatch, "feature gradient is " + shape_str(upstream.d_features));
    }
    d_features += upstream.d_features;
  }

  const bool has_class = upstream.d_probs.size() > 0;
  const bool has_disc = upstream.d_disc.size() > 0;
  if ((has_class || has_disc) && pass.mode == ForwardMode::Features) {
    throw Error(Errc::ShapeMismatch, "features-only pass has no classifier or discriminator output");
  }
  if (has_disc && pass.disc.size() == 0) {
    throw Error(Errc::ShapeMismatch, "pass has no discriminator output");
  }

  Eigen::MatrixXd d_probs_adv;
  if (has_disc) {
    if (upstream.d_disc.size() != n) throw Error(Errc::ShapeMismatch, "discriminator gradient has the wrong length");
    Eigen::MatrixXd d_in = state.d.backward(pass.d_cache, Eigen::MatrixXd(upstream.d_disc), &grads.d);
    d_in *= options.adversarial_scale;
    if (pass.mode == ForwardMode::DiscriminateOuter) {
      const Eigen::Index k = pass.probs.cols();
      d_probs_adv.resize(n, k);
      for (Eigen::Index c = 0; c < k; ++c) {
        const auto block = d_in.middleCols(c * z, z);
        d_probs_adv.col(c) = (block.array() * pass.features.array()).rowwise().sum();
        d_features += (block.array().colwise() * pass.probs.col(c).array()).matrix();
      }
    } else {
      d_features += d_in;
    }
  }

  if (has_class && (upstream.d_probs.rows() != n || upstream.d_probs.cols() != pass.probs.cols())) {
    throw Error(Errc::ShapeMismatch, "probability gradient is " + shape_str(upstream.d_probs));
  }
  const bool has_adv_probs = d_probs_adv.size() > 0;
  if (has_class || has_adv_probs) {
    if (has_adv_probs && !options.adversarial_into_classifier) {
      if (has_class) d_features += state.h.backward(pass.h_cache, upstream.d_probs, &grads.h);
      d_features += state.h.backward(pass.h_cache, d_probs_adv, nullptr);
    } else {
      Eigen::MatrixXd total = has_class ? upstream.d_probs : Eigen::MatrixXd::Zero(n, pass.probs.cols());
      if (has_adv_probs) total += d_probs_adv;
      d_features += state.h.backward(pass.h_cache, total, &grads.h);
    }
  }

  state.g.backward(pass.g_cache, d_features, &grads.g);
  return grads;
}

void sgd_step(ModelState& state, const ModelGradients& grads, double lr, double momentum) {
  check_same_shape(grads.g, state.g.params(), "g gradient");
  check_same_shape(grads.h, state.h.params(), "h gradient");
  check_same_shape(grads.d, state.d.params(), "d gradient");
  auto step_one = [&](MlpParams& params, MlpParams& velocity, const MlpParams& grad) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      velocity.layers[l].weight = momentum * velocity.layers[l].weight + grad.layers[l].weight;
      velocity.layers[l].bias = momentum * velocity.layers[l].bias + grad.layers[l].bias;
      params.layers[l].weight -= lr * velocity.layers[l].weight;
      params.layers[l].bias -= lr * velocity.layers[l].bias;
    }
  };
  step_one(state.g.params(), state.velocity.g, grads.g);
  step_one(state.h.params(), state.velocity.h, grads.h);
  step_one(state.d.params(), state.velocity.d, grads.d);
  ++state.step;
  ++state.version;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const ModelState& state, std::ostream& out) {
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "gls-checkpoint 1\n";
  out << "activation " << (state.g.activation() == Activation::Tanh ? "tanh" : "relu") << '\n';
  out << "discriminator_input " << (state.discriminator_input == DiscriminatorInput::Outer ? "outer" : "features")
      << '\n';
  out << "step " << state.step << '\n';
  for (const auto* net : {&state.g, &state.h, &state.d}) {
    out << "mlp " << head_name(net->head()) << ' ' << net->layer_sizes().size();
    for (int s : net->layer_sizes()) out << ' ' << s;
    out << '\n';
  }
  for (const auto* net : {&state.g, &state.h, &state.d}) {
    for (const auto& layer : net->params().layers) {
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) out << (j ? " " : "") << layer.weight(i, j);
        out << '\n';
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) out << (i ? " " : "") << layer.bias(i);
      out << '\n';
    }
  }
  if (!out) throw Error(Errc::IoError, "failed to write checkpoint");
}

ModelState load_checkpoint(std::istream& in) {
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) throw Error(Errc::ParseError, "checkpoint: expected '" + word + "'");
  };
  expect("gls-checkpoint");
  int format = 0;
  in >> format;
  if (format != 1) throw Error(Errc::ParseError, "checkpoint: unsupported format");
  std::string act, disc;
  expect("activation");
  in >> act;
  expect("discriminator_input");
  in >> disc;
  if ((act != "tanh" && act != "relu") || (disc != "outer" && disc != "features")) {
    throw Error(Errc::ParseError, "checkpoint: bad activation or discriminator input");
  }
  const Activation activation = act == "tanh" ? Activation::Tanh : Activation::Relu;

  ModelState state;
  state.discriminator_input = disc == "outer" ? DiscriminatorInput::Outer : DiscriminatorInput::Features;
  expect("step");
  in >> state.step;
  for (Mlp* net : {&state.g, &state.h, &state.d}) {
    expect("mlp");
    std::string head;
    std::size_t count = 0;
    in >> head >> count;
    if (!in || count < 2 || count > 64) throw Error(Errc::ParseError, "checkpoint: bad layer header");
    std::vector<int> sizes(count);
    for (int& s : sizes) in >> s;
    if (!in) throw Error(Errc::ParseError, "checkpoint: bad layer sizes");
    *net = Mlp(sizes, activation, parse_head(head));
  }
  for (Mlp* net : {&state.g, &state.h, &state.d}) {
    for (auto& layer : net->params().layers) {
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) in >> layer.weight(i, j);
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) in >> layer.bias(i);
    }
  }
  if (!in) throw Error(Errc::ParseError, "checkpoint: truncated parameters");
  if (state.h.input_dim() != state.g.output_dim()) throw Error(Errc::ShapeMismatch, "checkpoint: g and h disagree");
  state.velocity = zero_gradients(state);
  return state;
}

}  // namespace gls
