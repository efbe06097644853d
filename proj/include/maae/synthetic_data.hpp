#pragma once

// Ground-truth data generation: draw a low-dimensional Gaussian latent and
// push it through a fixed random leaky-ReLU MLP into the data space.

#include "json.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace maae {

struct GeneratorSpec {
  int n = 8;                   // true latent dimension
  int k = 128;                 // hidden width
  int d = 128;                 // data dimension
  int num_hidden_layers = 2;
  double leaky_slope = 0.2;
  // Standard deviation of every weight; unset means 1/sqrt(fan_in) per layer.
  std::optional<double> weight_scale;
  // Diagonal of the latent covariance; empty means identity.
  std::vector<double> cov_diag;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> covariance() const;

  nlohmann::json to_json() const;
  static GeneratorSpec from_json(const nlohmann::json& j);
  // Stable hex digest of the canonical JSON form.
  std::string fingerprint() const;
};

// Realized weights of the generating function. Weights are stored as
// fan_in x fan_out so a batch maps as rows: h' = act(h W + b).
struct GeneratorNetwork {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::RowVectorXd> biases;
  double leaky_slope = 0.2;

  static GeneratorNetwork realize(const GeneratorSpec& spec);
  Eigen::Index input_dim() const { return weights.front().rows(); }
  Eigen::Index output_dim() const { return weights.back().cols(); }
  // Leaky-ReLU after every layer except the last.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& latents) const;
};

struct Dataset {
  Eigen::MatrixXd samples;  // count x d, values exactly representable as float32
  std::string spec_fingerprint;
  std::optional<GeneratorSpec> spec;

  Eigen::Index count() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }
};

Eigen::MatrixXd sample_true_latent(const GeneratorSpec& spec, Eigen::Index count,
                                   std::uint64_t stream_seed);

Eigen::MatrixXd generating_function(const GeneratorSpec& spec, const Eigen::MatrixXd& latents);

// Product of layer spectral norms (leaky-ReLU contributes a factor of 1).
double lipschitz_upper_bound(const GeneratorSpec& spec);
double lipschitz_upper_bound(const GeneratorNetwork& net);

// In-memory generation with the fixed dataset stream; no file IO.
Dataset generate_dataset(const GeneratorSpec& spec, Eigen::Index count);

// Generates and persists a dataset in the MAAE-DS1 format.
Dataset make_dataset(const GeneratorSpec& spec, Eigen::Index count,
                     const std::filesystem::path& path);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Wraps externally produced samples (count x d). The tag stands in for the
// generator fingerprint.
Dataset external_dataset(const Eigen::MatrixXd& samples, const std::string& source_tag);

}  // namespace maae
