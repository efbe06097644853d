#include "doctest.h"
#include "support.hpp"

#include "maae/errors.hpp"
#include "maae/networks.hpp"

using namespace maae;
using maae::test::max_gradient_error;
using maae::test::toy_bundle;

TEST_CASE("mask_init: range, mean, determinism, errors") {
  const MaskState tiny = mask_init(4, 1e-9, 1);
  CHECK(mask_forward(tiny).maxCoeff() < 1e-8);

  const MaskState big = mask_init(1000, 3.0, 42);
  CHECK(std::abs(big.theta.value().mean() - 1.5) < 0.15);
  CHECK(big.theta.value().minCoeff() >= 0.0);
  CHECK(big.theta.value().maxCoeff() <= 3.0);
  CHECK(mask_forward(big).maxCoeff() <= 1.0 - std::exp(-3.0));

  CHECK(mask_init(16, 3.0, 5).theta.value() == mask_init(16, 3.0, 5).theta.value());
  CHECK_THROWS_AS(mask_init(0, 3.0, 1), InvalidArgument);
  CHECK_THROWS_AS(mask_init(4, 0.0, 1), InvalidArgument);
}

TEST_CASE("mask_forward: closed-form values") {
  const MaskState s(ad::RowVector{{0.0, std::log(2.0), -5.0}});
  const ad::RowVector mu = mask_forward(s);
  CHECK(mu(0) == 0.0);
  CHECK(mu(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mu(2) == 0.0);
  const auto g = ad::grad(ad::sum(mask_forward_var(s)), std::vector<ad::Var>{s.theta});
  CHECK(g[0].value()(0, 2) == 0.0);
}

TEST_CASE("property: mask gate is monotone with range [0, 1)") {
  Rng rng(77);
  std::uniform_real_distribution<double> theta(-20.0, 20.0);
  for (int i = 0; i < 2000; ++i) {
    double t1 = theta(rng), t2 = theta(rng);
    if (t1 > t2) std::swap(t1, t2);
    const ad::RowVector mu = mask_forward(MaskState(ad::RowVector{{t1, t2}}));
    CHECK(mu(0) <= mu(1));
    CHECK(mu(0) >= 0.0);
    CHECK(mu(1) < 1.0);
  }
}

TEST_CASE("property: mask gradient matches differences away from zero") {
  Rng rng(8);
  std::uniform_real_distribution<double> theta(0.05, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    ad::RowVector t(5);
    for (int j = 0; j < 5; ++j) t(j) = (j % 2 == 0 ? 1.0 : -1.0) * theta(rng);
    const MaskState s(t);
    const ad::RowVector w = ad::RowVector::LinSpaced(5, 1.0, 3.0);
    CHECK(max_gradient_error([&] { return ad::sum(ad::mul_row(ad::square(mask_forward_var(s)), ad::constant(w))); },
                             {s.theta}, 1e-6) < 1e-4);
  }
}

TEST_CASE("active_dimensions") {
  CHECK(active_dimensions(ad::RowVector{{0.9, 0.1, 0.6}}, 0.5) == 2);
  CHECK(active_dimensions(ad::RowVector::Zero(7), 0.5) == 0);
  CHECK(active_dimensions(ad::RowVector::Constant(32, 0.999), 0.5) == 32);
  CHECK_THROWS_AS(active_dimensions(ad::RowVector::Zero(3), 0.0), InvalidArgument);
  CHECK_THROWS_AS(active_dimensions(ad::RowVector::Zero(3), 1.0), InvalidArgument);
}

TEST_CASE("encode/decode/discriminate: shapes and errors") {
  const ModelBundle b = toy_bundle(7, 3, Variant::maskaae, 1);
  const ad::Matrix x = ad::Matrix::Random(5, 7);
  const ad::Matrix z = encode(b, x);
  CHECK(z.rows() == 5);
  CHECK(z.cols() == 3);
  CHECK(decode(b, apply_mask(z, b.mask_values())).cols() == 7);
  CHECK(discriminate(b, z).size() == 5);
  CHECK_THROWS_AS(encode(b, ad::Matrix::Zero(2, 6)), ShapeError);
  CHECK_THROWS_AS(apply_mask(z, ad::RowVector::Ones(4)), ShapeError);
}

TEST_CASE("zero-weight encoder is the output bias") {
  ModelBundle b = toy_bundle(4, 3, Variant::maskaae, 2);
  for (std::size_t l = 0; l < b.encoder.num_layers(); ++l) b.encoder.weight(l).mutable_value().setZero();
  b.encoder.bias(b.encoder.num_layers() - 1).mutable_value() = ad::Matrix{{0.5, -1.0, 2.0}};
  const ad::Matrix z = encode(b, ad::Matrix::Random(6, 4));
  for (int i = 0; i < 6; ++i) CHECK(z.row(i) == ad::RowVector{{0.5, -1.0, 2.0}});
}

TEST_CASE("input and parameter gradients of the networks match differences") {
  for (Activation act : {Activation::leaky_relu, Activation::relu}) {
    ModelBundle b = toy_bundle(4, 3, Variant::maskaae, 3, act);
    Rng rng(4);
    ad::Var x = ad::leaf(normal_matrix(rng, 6, 4));
    ad::Var z = ad::leaf(normal_matrix(rng, 6, 3));
    CAPTURE(to_string(act));
    CHECK(max_gradient_error([&] { return ad::sum(b.discriminator.forward(z)); }, {z}) < 1e-4);
    CHECK(max_gradient_error([&] { return ad::sum(ad::square(b.encoder.forward(x))); },
                             b.encoder_parameters()) < 1e-4);
    CHECK(max_gradient_error([&] { return ad::sum(ad::row_norm(b.decoder.forward(z))); },
                             b.decoder_parameters()) < 1e-4);
  }
}

TEST_CASE("wae baseline: mask is exactly one and not trainable") {
  const ModelBundle b = toy_bundle(4, 5, Variant::wae_baseline, 6);
  CHECK(b.mask_values() == ad::RowVector::Ones(5));
  CHECK(b.mask_parameters().empty());
  Rng rng(3);
  const ad::Matrix z = normal_matrix(rng, 10, 5);
  CHECK(apply_mask(z, b.mask_values()) == z);
}

TEST_CASE("Mlp copies are deep") {
  ModelBundle a = toy_bundle(3, 2, Variant::maskaae, 1);
  ModelBundle c = a;
  c.encoder.weight(0).mutable_value().setZero();
  c.mask.theta.mutable_value().setZero();
  CHECK_FALSE(a.encoder.weight(0).value().isZero());
  CHECK_FALSE(a.mask.theta.value().isZero());
}

TEST_CASE("MlpConfig and ArchitectureConfig validation and JSON") {
  MlpConfig c;
  c.input_dim = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  MlpConfig ok;
  ok.input_dim = 3;
  ok.hidden_widths = {4, 5};
  ok.output_dim = 2;
  ok.hidden_activation = Activation::leaky_relu;
  CHECK(MlpConfig::from_json(ok.to_json()).to_json() == ok.to_json());

  ArchitectureConfig arch;
  arch.mask_init_upper = -1.0;
  CHECK_THROWS_AS(arch.validate(), InvalidArgument);
  ArchitectureConfig a2;
  a2.latent_dim = 9;
  CHECK(ArchitectureConfig::from_json(a2.to_json()).latent_dim == 9);
  CHECK_THROWS_AS(activation_from_string("tanh"), InvalidArgument);
  CHECK(variant_from_string("wae") == Variant::wae_baseline);
}
