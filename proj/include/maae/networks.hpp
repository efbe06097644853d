#pragma once

#include "maae/autodiff.hpp"
#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace maae {

enum class Activation { relu, leaky_relu, linear, sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpConfig {
  int input_dim = 1;
  std::vector<int> hidden_widths;
  int output_dim = 1;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::linear;
  double leaky_slope = 0.2;

  void validate() const;
  nlohmann::json to_json() const;
  static MlpConfig from_json(const nlohmann::json& j);
};

// Fully connected network. Parameters are autodiff leaves; copies are deep.
class Mlp {
 public:
  Mlp() = default;
  // He-normal hidden weights, 1/sqrt(fan_in) output weights, zero biases.
  Mlp(MlpConfig config, std::uint64_t seed);

  Mlp(const Mlp& other);
  Mlp& operator=(const Mlp& other);
  Mlp(Mlp&&) noexcept = default;
  Mlp& operator=(Mlp&&) noexcept = default;

  const MlpConfig& config() const { return config_; }
  std::size_t num_layers() const { return weights_.size(); }

  ad::Var forward(const ad::Var& input) const;
  ad::Matrix forward(const ad::Matrix& input) const;

  // Alternating weight/bias leaves, layer by layer: w0, b0, w1, b1, ...
  std::vector<ad::Var> parameters() const;
  std::vector<std::string> parameter_names(const std::string& prefix) const;

  ad::Var& weight(std::size_t layer) { return weights_.at(layer); }
  ad::Var& bias(std::size_t layer) { return biases_.at(layer); }

 private:
  MlpConfig config_;
  std::vector<ad::Var> weights_;  // fan_in x fan_out
  std::vector<ad::Var> biases_;   // 1 x fan_out
};

// Trainable relaxed binary mask, mu = max(0, 1 - exp(-theta)).
struct MaskState {
  ad::Var theta;  // 1 x m leaf

  MaskState() = default;
  explicit MaskState(ad::RowVector values, bool trainable = true);
  MaskState(const MaskState& other);
  MaskState& operator=(const MaskState& other);
  MaskState(MaskState&&) noexcept = default;
  MaskState& operator=(MaskState&&) noexcept = default;

  int m() const { return static_cast<int>(theta.cols()); }
};

// theta_j ~ U[0, a], i.i.d.
MaskState mask_init(int m, double a, std::uint64_t seed);
ad::RowVector mask_forward(const MaskState& state);
ad::Var mask_forward_var(const MaskState& state);

// Number of entries with mu_j > tau; tau must lie in (0, 1).
int active_dimensions(const ad::RowVector& mu, double tau);

enum class Variant { maskaae, wae_baseline };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// How the mask is applied outside training (generation, evaluation).
enum class MaskMode { raw, rounded };

struct ArchitectureConfig {
  int data_dim = 128;
  int latent_dim = 16;  // m
  std::vector<int> encoder_hidden{256, 256, 256};
  std::vector<int> decoder_hidden{256, 256, 256};
  std::vector<int> discriminator_hidden{256, 256, 256};
  Activation hidden_activation = Activation::relu;
  double mask_init_upper = 3.0;  // a in U[0, a]

  void validate() const;
  MlpConfig encoder_config() const;
  MlpConfig decoder_config() const;
  MlpConfig discriminator_config() const;
  nlohmann::json to_json() const;
  static ArchitectureConfig from_json(const nlohmann::json& j);
};

struct ModelBundle {
  Mlp encoder;        // R^d -> R^m
  Mlp decoder;        // R^m -> R^d
  Mlp discriminator;  // R^m -> R
  MaskState mask;
  Variant variant = Variant::maskaae;

  static ModelBundle create(const ArchitectureConfig& arch, Variant variant, std::uint64_t seed);

  int latent_dim() const { return encoder.config().output_dim; }
  int data_dim() const { return encoder.config().input_dim; }
  void validate() const;

  // Differentiable mask; a constant vector of ones for the WAE baseline.
  ad::Var mask_var() const;
  ad::RowVector mask_values(MaskMode mode = MaskMode::raw) const;

  std::vector<ad::Var> encoder_parameters() const { return encoder.parameters(); }
  std::vector<ad::Var> decoder_parameters() const { return decoder.parameters(); }
  std::vector<ad::Var> discriminator_parameters() const { return discriminator.parameters(); }
  std::vector<ad::Var> mask_parameters() const;

  // Every named parameter, in a fixed order (used by checkpoints).
  std::vector<std::pair<std::string, ad::Var>> named_parameters() const;
};

ad::Matrix encode(const ModelBundle& bundle, const ad::Matrix& x);
ad::Matrix decode(const ModelBundle& bundle, const ad::Matrix& z_masked);
Eigen::VectorXd discriminate(const ModelBundle& bundle, const ad::Matrix& z_masked);

// Applies a mask row to every row of z.
ad::Matrix apply_mask(const ad::Matrix& z, const ad::RowVector& mu);

}  // namespace maae
