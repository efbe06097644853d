#pragma once

#include "maae/autodiff.hpp"
#include "maae/networks.hpp"
#include "maae/rng.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace maae::test {

// Central-difference gradient of `f` with respect to every entry of `param`.
inline ad::Matrix numeric_gradient(ad::Var param, const std::function<double()>& f, double h = 1e-4) {
  ad::Matrix g(param.rows(), param.cols());
  for (Eigen::Index r = 0; r < param.rows(); ++r) {
    for (Eigen::Index c = 0; c < param.cols(); ++c) {
      const double orig = param.value()(r, c);
      param.mutable_value()(r, c) = orig + h;
      const double up = f();
      param.mutable_value()(r, c) = orig - h;
      const double down = f();
      param.mutable_value()(r, c) = orig;
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

// ||a - n|| / max(||a||, ||n||), with an absolute floor for vanishing gradients.
inline double relative_error(const ad::Matrix& analytic, const ad::Matrix& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-6});
  return (analytic - numeric).norm() / scale;
}

// Largest relative error over all parameters in `params` between ad::grad of
// `build()` and central differences of its value.
inline double max_gradient_error(const std::function<ad::Var()>& build, const std::vector<ad::Var>& params,
                                 double h = 1e-4) {
  const ad::Var out = build();
  const auto grads = ad::grad(out, params);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ad::Matrix num = numeric_gradient(params[i], [&] {
      ad::NoGradGuard guard;
      return build().scalar();
    }, h);
    worst = std::max(worst, relative_error(grads[i].value(), num));
  }
  return worst;
}

// Small three-layer bundle with randomised biases so activation patterns are
// generic.
inline ModelBundle toy_bundle(int d, int m, Variant variant, std::uint64_t seed,
                              Activation act = Activation::leaky_relu) {
  ArchitectureConfig arch;
  arch.data_dim = d;
  arch.latent_dim = m;
  arch.encoder_hidden = {6, 5};
  arch.decoder_hidden = {5, 6};
  arch.discriminator_hidden = {6, 5};
  arch.hidden_activation = act;
  ModelBundle b = ModelBundle::create(arch, variant, seed);
  Rng rng(derive_seed(seed, 99));
  for (Mlp* net : {&b.encoder, &b.decoder, &b.discriminator}) {
    for (std::size_t l = 0; l < net->num_layers(); ++l) {
      net->bias(l).mutable_value() = normal_matrix(rng, 1, net->bias(l).cols(), 0.3);
    }
  }
  return b;
}

// One-hidden-layer ReLU nets of width 2 * input, so each can be set to an
// exact affine map u -> u W + b via relu(u) - relu(-u) = u.
inline ModelBundle affine_bundle(int d, int m, Variant variant) {
  ArchitectureConfig arch;
  arch.data_dim = d;
  arch.latent_dim = m;
  arch.encoder_hidden = {2 * d};
  arch.decoder_hidden = {2 * m};
  arch.discriminator_hidden = {2 * m};
  arch.hidden_activation = Activation::relu;
  return ModelBundle::create(arch, variant, 1);
}

inline void set_affine(Mlp& net, const ad::Matrix& w, const ad::RowVector& b) {
  const auto in = w.rows();
  ad::Matrix first(in, 2 * in);
  first << ad::Matrix::Identity(in, in), -ad::Matrix::Identity(in, in);
  ad::Matrix second(2 * in, w.cols());
  second << w, -w;
  net.weight(0).mutable_value() = first;
  net.bias(0).mutable_value().setZero();
  net.weight(1).mutable_value() = second;
  net.bias(1).mutable_value() = b;
}

inline void set_affine(Mlp& net, double w, double b) {
  set_affine(net, ad::Matrix::Constant(1, 1, w), ad::RowVector::Constant(1, b));
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("maae_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace maae::test
