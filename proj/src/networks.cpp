#include "maae/networks.hpp"

#include "maae/errors.hpp"
#include "maae/rng.hpp"

#include <cmath>

namespace maae {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::linear: return "linear";
    case Activation::sigmoid: return "sigmoid";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "linear") return Activation::linear;
  if (s == "sigmoid") return Activation::sigmoid;
  throw InvalidArgument("unknown activation '" + s + "'");
}

std::string to_string(Variant v) { return v == Variant::maskaae ? "maskaae" : "wae_baseline"; }

Variant variant_from_string(const std::string& s) {
  if (s == "maskaae") return Variant::maskaae;
  if (s == "wae_baseline" || s == "wae") return Variant::wae_baseline;
  throw InvalidArgument("unknown variant '" + s + "'");
}

// ---------------------------------------------------------------------------
// MlpConfig

void MlpConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) throw InvalidArgument("mlp: dims must be >= 1");
  for (int w : hidden_widths) {
    if (w < 1) throw InvalidArgument("mlp: hidden widths must be >= 1");
  }
  if (hidden_activation != Activation::relu && hidden_activation != Activation::leaky_relu) {
    throw InvalidArgument("mlp: hidden activation must be relu or leaky_relu");
  }
  if (output_activation != Activation::linear && output_activation != Activation::sigmoid) {
    throw InvalidArgument("mlp: output activation must be linear or sigmoid");
  }
}

nlohmann::json MlpConfig::to_json() const {
  return {{"input_dim", input_dim},
          {"hidden_widths", hidden_widths},
          {"output_dim", output_dim},
          {"hidden_activation", to_string(hidden_activation)},
          {"output_activation", to_string(output_activation)},
          {"leaky_slope", leaky_slope}};
}

MlpConfig MlpConfig::from_json(const nlohmann::json& j) {
  MlpConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
  c.output_dim = j.at("output_dim").get<int>();
  c.hidden_activation = activation_from_string(j.value("hidden_activation", std::string("relu")));
  c.output_activation = activation_from_string(j.value("output_activation", std::string("linear")));
  c.leaky_slope = j.value("leaky_slope", 0.2);
  return c;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(MlpConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  int fan_in = config_.input_dim;
  const std::size_t layers = config_.hidden_widths.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const bool last = l + 1 == layers;
    const int fan_out = last ? config_.output_dim : config_.hidden_widths[l];
    const double gain = last ? 1.0 : 2.0;
    const double stddev = std::sqrt(gain / static_cast<double>(fan_in));
    weights_.push_back(ad::leaf(normal_matrix(rng, fan_in, fan_out, stddev)));
    biases_.push_back(ad::leaf(ad::Matrix::Zero(1, fan_out)));
    fan_in = fan_out;
  }
}

Mlp::Mlp(const Mlp& other) : config_(other.config_) {
  for (const auto& w : other.weights_) weights_.push_back(ad::clone_leaf(w));
  for (const auto& b : other.biases_) biases_.push_back(ad::clone_leaf(b));
}

Mlp& Mlp::operator=(const Mlp& other) {
  if (this != &other) {
    Mlp copy(other);
    *this = std::move(copy);
  }
  return *this;
}

ad::Var Mlp::forward(const ad::Var& input) const {
  if (input.cols() != config_.input_dim) {
    throw ShapeError("mlp expects " + std::to_string(config_.input_dim) + " input columns, got " +
                     std::to_string(input.cols()));
  }
  ad::Var h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ad::add_row(ad::matmul(h, weights_[l]), biases_[l]);
    if (l + 1 < weights_.size()) {
      h = ad::leaky_relu(h, config_.hidden_activation == Activation::relu ? 0.0 : config_.leaky_slope);
    } else if (config_.output_activation == Activation::sigmoid) {
      h = ad::sigmoid(h);
    }
  }
  return h;
}

ad::Matrix Mlp::forward(const ad::Matrix& input) const {
  ad::NoGradGuard no_grad;
  return forward(ad::constant(input)).value();
}

std::vector<ad::Var> Mlp::parameters() const {
  std::vector<ad::Var> params;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    params.push_back(weights_[l]);
    params.push_back(biases_[l]);
  }
  return params;
}

std::vector<std::string> Mlp::parameter_names(const std::string& prefix) const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    names.push_back(prefix + ".w" + std::to_string(l));
    names.push_back(prefix + ".b" + std::to_string(l));
  }
  return names;
}

// ---------------------------------------------------------------------------
// Mask

MaskState::MaskState(ad::RowVector values, bool trainable)
    : theta(ad::leaf(ad::Matrix(std::move(values)), trainable)) {}

MaskState::MaskState(const MaskState& other)
    : theta(other.theta.defined() ? ad::clone_leaf(other.theta) : ad::Var()) {}

MaskState& MaskState::operator=(const MaskState& other) {
  if (this != &other) theta = other.theta.defined() ? ad::clone_leaf(other.theta) : ad::Var();
  return *this;
}

MaskState mask_init(int m, double a, std::uint64_t seed) {
  if (m < 1) throw InvalidArgument("mask_init: m must be >= 1");
  if (!(a > 0.0)) throw InvalidArgument("mask_init: a must be > 0");
  Rng rng(seed);
  return MaskState(uniform_matrix(rng, 1, m, 0.0, a).row(0));
}

ad::RowVector mask_forward(const MaskState& state) {
  return state.theta.value().row(0).unaryExpr([](double t) { return std::max(0.0, 1.0 - std::exp(-t)); });
}

ad::Var mask_forward_var(const MaskState& state) { return ad::mask_gate(state.theta); }

int active_dimensions(const ad::RowVector& mu, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("active_dimensions: tau must lie in (0, 1)");
  return static_cast<int>((mu.array() > tau).count());
}

// ---------------------------------------------------------------------------
// Architecture and bundle

void ArchitectureConfig::validate() const {
  if (data_dim < 1) throw InvalidArgument("architecture: data_dim must be >= 1");
  if (latent_dim < 1) throw InvalidArgument("architecture: latent_dim must be >= 1");
  if (!(mask_init_upper > 0.0)) throw InvalidArgument("architecture: mask_init_upper must be > 0");
  encoder_config().validate();
  decoder_config().validate();
  discriminator_config().validate();
}

MlpConfig ArchitectureConfig::encoder_config() const {
  return {data_dim, encoder_hidden, latent_dim, hidden_activation, Activation::linear, 0.2};
}

MlpConfig ArchitectureConfig::decoder_config() const {
  return {latent_dim, decoder_hidden, data_dim, hidden_activation, Activation::linear, 0.2};
}

MlpConfig ArchitectureConfig::discriminator_config() const {
  return {latent_dim, discriminator_hidden, 1, hidden_activation, Activation::linear, 0.2};
}

nlohmann::json ArchitectureConfig::to_json() const {
  return {{"data_dim", data_dim},
          {"latent_dim", latent_dim},
          {"encoder_hidden", encoder_hidden},
          {"decoder_hidden", decoder_hidden},
          {"discriminator_hidden", discriminator_hidden},
          {"hidden_activation", to_string(hidden_activation)},
          {"mask_init_upper", mask_init_upper}};
}

ArchitectureConfig ArchitectureConfig::from_json(const nlohmann::json& j) {
  ArchitectureConfig c;
  c.data_dim = j.value("data_dim", c.data_dim);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
  c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
  c.discriminator_hidden = j.value("discriminator_hidden", c.discriminator_hidden);
  c.hidden_activation = activation_from_string(j.value("hidden_activation", to_string(c.hidden_activation)));
  c.mask_init_upper = j.value("mask_init_upper", c.mask_init_upper);
  return c;
}

ModelBundle ModelBundle::create(const ArchitectureConfig& arch, Variant variant, std::uint64_t seed) {
  arch.validate();
  ModelBundle b;
  b.variant = variant;
  b.encoder = Mlp(arch.encoder_config(), derive_seed(seed, stream_id("encoder")));
  b.decoder = Mlp(arch.decoder_config(), derive_seed(seed, stream_id("decoder")));
  b.discriminator = Mlp(arch.discriminator_config(), derive_seed(seed, stream_id("discriminator")));
  b.mask = mask_init(arch.latent_dim, arch.mask_init_upper, derive_seed(seed, stream_id("mask")));
  if (variant == Variant::wae_baseline) b.mask = MaskState(b.mask.theta.value().row(0), false);
  return b;
}

void ModelBundle::validate() const {
  const int m = latent_dim();
  if (decoder.config().input_dim != m || discriminator.config().input_dim != m || mask.m() != m) {
    throw ShapeError("bundle: encoder output, decoder input, discriminator input and mask must agree");
  }
  if (decoder.config().output_dim != data_dim()) throw ShapeError("bundle: decoder output != data dim");
  if (discriminator.config().output_dim != 1) throw ShapeError("bundle: discriminator must be scalar");
}

ad::Var ModelBundle::mask_var() const {
  if (variant == Variant::wae_baseline) return ad::constant(ad::Matrix::Ones(1, latent_dim()));
  return mask_forward_var(mask);
}

ad::RowVector ModelBundle::mask_values(MaskMode mode) const {
  if (variant == Variant::wae_baseline) return ad::RowVector::Ones(latent_dim());
  ad::RowVector mu = mask_forward(mask);
  if (mode == MaskMode::rounded) mu = mu.unaryExpr([](double v) { return v > 0.5 ? 1.0 : 0.0; });
  return mu;
}

std::vector<ad::Var> ModelBundle::mask_parameters() const {
  if (variant == Variant::wae_baseline) return {};
  return {mask.theta};
}

std::vector<std::pair<std::string, ad::Var>> ModelBundle::named_parameters() const {
  std::vector<std::pair<std::string, ad::Var>> out;
  auto push = [&out](const Mlp& net, const std::string& prefix) {
    auto names = net.parameter_names(prefix);
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) out.emplace_back(names[i], params[i]);
  };
  push(encoder, "encoder");
  push(decoder, "decoder");
  push(discriminator, "discriminator");
  out.emplace_back("mask.theta", mask.theta);
  return out;
}

ad::Matrix encode(const ModelBundle& bundle, const ad::Matrix& x) { return bundle.encoder.forward(x); }

ad::Matrix decode(const ModelBundle& bundle, const ad::Matrix& z_masked) {
  return bundle.decoder.forward(z_masked);
}

Eigen::VectorXd discriminate(const ModelBundle& bundle, const ad::Matrix& z_masked) {
  return bundle.discriminator.forward(z_masked).col(0);
}

ad::Matrix apply_mask(const ad::Matrix& z, const ad::RowVector& mu) {
  if (z.cols() != mu.size()) throw ShapeError("apply_mask: mask length differs from latent width");
  return z.array().rowwise() * mu.array();
}

}  // namespace maae
