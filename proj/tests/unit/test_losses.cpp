#include "doctest.h"
#include "support.hpp"

#include "maae/errors.hpp"
#include "maae/losses.hpp"

using namespace maae;
using maae::test::max_gradient_error;
using maae::test::affine_bundle;
using maae::test::set_affine;
using maae::test::toy_bundle;

namespace {

ad::RowVector unbiased_variance(const ad::Matrix& z) {
  const ad::RowVector mean = z.colwise().mean();
  return (z.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(z.rows() - 1);
}

Eigen::VectorXd fixed_beta(int s) { return Eigen::VectorXd::LinSpaced(s, 0.1, 0.9); }

}  // namespace

TEST_CASE("loss_ae: closed forms") {
  LossWeights w;
  Rng rng(1);
  const ad::Matrix x = normal_matrix(rng, 6, 2);

  SUBCASE("perfect reconstruction, mu = 1") {
    ModelBundle b = affine_bundle(2, 2, Variant::wae_baseline);
    set_affine(b.encoder, ad::Matrix::Identity(2, 2), ad::RowVector::Zero(2));
    set_affine(b.decoder, ad::Matrix::Identity(2, 2), ad::RowVector::Zero(2));
    const double expected = 100.0 * std::exp(-10.0) * unbiased_variance(x).sum();
    CHECK(loss_ae(x, b, w).scalar() == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("constant encoder carries no variance") {
    ModelBundle b = affine_bundle(2, 2, Variant::wae_baseline);
    set_affine(b.encoder, ad::Matrix::Zero(2, 2), ad::RowVector{{0.3, -0.7}});
    set_affine(b.decoder, ad::Matrix::Zero(2, 2), ad::RowVector::Zero(2));
    CHECK(loss_ae(x, b, w).scalar() == doctest::Approx(x.rowwise().norm().mean()).epsilon(1e-12));
  }
  SUBCASE("mu = 0 penalises the full trace") {
    ModelBundle b = affine_bundle(2, 2, Variant::maskaae);
    b.mask = MaskState(ad::RowVector::Zero(2));
    set_affine(b.encoder, ad::Matrix::Identity(2, 2), ad::RowVector::Zero(2));
    set_affine(b.decoder, ad::Matrix::Identity(2, 2), ad::RowVector::Zero(2));
    const double expected = x.rowwise().norm().mean() + 100.0 * unbiased_variance(x).sum();
    CHECK(loss_ae(x, b, w).scalar() == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK_THROWS_AS(loss_ae(x.topRows(1), affine_bundle(2, 2, Variant::maskaae), w), InvalidArgument);
}

TEST_CASE("loss_gen: closed forms") {
  ModelBundle b = affine_bundle(1, 1, Variant::maskaae);
  b.mask = MaskState(ad::RowVector{{std::log(2.0)}});
  set_affine(b.encoder, 1.0, 0.0);
  const ad::Matrix x{{1.0}, {3.0}};
  set_affine(b.discriminator, 0.0, 0.0);
  CHECK(loss_gen(x, b).scalar() == 0.0);
  set_affine(b.discriminator, 0.0, 1.25);
  CHECK(loss_gen(x, b).scalar() == doctest::Approx(-1.25));
  // H(u) = 2u + 0.5 at mu = 0.5: H = 1.5 and 3.5.
  set_affine(b.discriminator, 2.0, 0.5);
  CHECK(loss_gen(x, b).scalar() == doctest::Approx(-2.5).epsilon(1e-14));
}

TEST_CASE("loss_dm and omega: one-dimensional toy") {
  ModelBundle b = affine_bundle(1, 1, Variant::wae_baseline);
  set_affine(b.encoder, 0.0, 0.0);
  set_affine(b.discriminator, 2.0, 0.0);
  const ad::Matrix x{{0.4}};
  const ad::Matrix prior{{1.0}};
  LossWeights w;
  CHECK(loss_dm(x, prior, Eigen::VectorXd::Constant(1, 0.3), b, w).scalar() == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(wasserstein_gap(x, prior, b).scalar() == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("gradient penalty: unit linear critic and constant critic") {
  Rng rng(2);
  const ad::Matrix x = normal_matrix(rng, 5, 3);
  const ad::Matrix prior = normal_matrix(rng, 5, 3);
  LossWeights w;

  ModelBundle b = affine_bundle(3, 3, Variant::wae_baseline);
  set_affine(b.encoder, normal_matrix(rng, 3, 3), ad::RowVector::Zero(3));
  const ad::Matrix unit = ad::Matrix{{0.48}, {0.6}, {0.64}};
  set_affine(b.discriminator, unit, ad::RowVector::Zero(1));
  const ad::Var z_avg = ad::constant(prior);
  CHECK(std::abs(gradient_penalty(z_avg, b, w.beta2).scalar()) < 1e-24);

  set_affine(b.discriminator, ad::Matrix::Zero(3, 1), ad::RowVector::Constant(1, 4.0));
  CHECK(loss_dm(x, prior, fixed_beta(5), b, w).scalar() == doctest::Approx(w.beta2).epsilon(1e-14));
  CHECK(wasserstein_gap(x, prior, b).scalar() == 0.0);
}

TEST_CASE("wasserstein_gap: identical batches give zero") {
  // Identity encoder; the critic keeps its random nonlinear initialisation.
  ModelBundle b = affine_bundle(3, 3, Variant::maskaae);
  set_affine(b.encoder, ad::Matrix::Identity(3, 3), ad::RowVector::Zero(3));
  Rng rng(3);
  const ad::Matrix z = normal_matrix(rng, 8, 3);
  CHECK(std::abs(wasserstein_gap(z, z, b).scalar()) < 1e-14);
}

TEST_CASE("loss_mask: zero case and hand evaluation") {
  SUBCASE("perfect reconstruction, binary mask, omega = -1") {
    ModelBundle b = affine_bundle(1, 1, Variant::wae_baseline);
    set_affine(b.encoder, 1.0, 0.0);
    set_affine(b.decoder, 1.0, 0.0);
    set_affine(b.discriminator, 1.0, 0.0);
    LossWeights w;
    CHECK(loss_mask(ad::Matrix{{1.0}}, ad::Matrix{{0.0}}, b, w).scalar() == 0.0);
  }
  SUBCASE("toy values") {
    // recon = 3, omega = 2 * 0.5 * 1 - 0 = 1, polarization 0.25, lambda3 = 2/m = 2.
    ModelBundle b = affine_bundle(1, 1, Variant::maskaae);
    b.mask = MaskState(ad::RowVector{{std::log(2.0)}});
    set_affine(b.encoder, 0.0, 0.0);
    set_affine(b.decoder, 0.0, 0.0);
    set_affine(b.discriminator, 2.0, 0.0);
    LossWeights w;
    CHECK(loss_mask(ad::Matrix{{3.0}}, ad::Matrix{{1.0}}, b, w).scalar() == doctest::Approx(3004.5).epsilon(1e-14));
    w.mask_gap_center = 0.0;
    CHECK(loss_mask(ad::Matrix{{3.0}}, ad::Matrix{{1.0}}, b, w).scalar() == doctest::Approx(3001.5).epsilon(1e-14));
  }
}

TEST_CASE("mask polarization: 0.5 contributes a quarter") {
  CHECK(mask_polarization(ad::RowVector{{0.5}}) == 0.25);
  CHECK(mask_polarization(ad::RowVector{{0.5, 0.0, 1.0}}) == 0.25);
}

TEST_CASE("property: mask polarization vanishes exactly on binary vectors") {
  Rng rng(31);
  std::bernoulli_distribution bit(0.5);
  std::uniform_real_distribution<double> eps(1e-6, 0.5);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = len(rng);
    ad::RowVector mu(m);
    for (int j = 0; j < m; ++j) mu(j) = bit(rng) ? 1.0 : 0.0;
    CHECK(mask_polarization(mu) == 0.0);
    const int j = std::uniform_int_distribution<int>(0, m - 1)(rng);
    mu(j) = mu(j) == 1.0 ? 1.0 - eps(rng) : eps(rng);
    CHECK(mask_polarization(mu) > 0.0);
  }
}

TEST_CASE("property: loss terms are non-negative") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelBundle b = toy_bundle(4, 3, Variant::maskaae, 100 + trial);
    const ad::Matrix x = normal_matrix(rng, 6, 4);
    CHECK(reconstruction_error(x, b).scalar() >= 0.0);
    CHECK(mask_polarization(b.mask_values()) >= 0.0);
    CHECK(loss_mask(x, normal_matrix(rng, 6, 3), b, LossWeights{}).scalar() >= 0.0);
  }
}

TEST_CASE("loss gradients match central differences on three-layer toy nets") {
  for (Activation act : {Activation::leaky_relu, Activation::relu}) {
    CAPTURE(to_string(act));
    ModelBundle b = toy_bundle(4, 3, Variant::maskaae, 21, act);
    Rng rng(22);
    const ad::Matrix x = normal_matrix(rng, 6, 4);
    const ad::Matrix prior = normal_matrix(rng, 6, 3);
    const Eigen::VectorXd beta = fixed_beta(6);
    LossWeights w;
    w.alpha2 = 3.0;  // keeps the terms on a comparable scale
    w.lambda1 = 2.0;
    // A 1e-4 step can straddle a ReLU kink of these random nets; 1e-6 does not.
    const double h = 1e-6;

    auto all = [&] {
      std::vector<ad::Var> p = b.encoder_parameters();
      for (const auto& v : b.decoder_parameters()) p.push_back(v);
      for (const auto& v : b.discriminator_parameters()) p.push_back(v);
      for (const auto& v : b.mask_parameters()) p.push_back(v);
      return p;
    }();
    CHECK(max_gradient_error([&] { return loss_ae(x, b, w); }, all, h) < 1e-4);
    CHECK(max_gradient_error([&] { return loss_gen(x, b); }, all, h) < 1e-4);
    CHECK(max_gradient_error([&] { return loss_dm(x, prior, beta, b, w); }, all, h) < 1e-4);
    CHECK(max_gradient_error([&] { return loss_mask(x, prior, b, w); }, all, h) < 1e-4);
    CHECK(max_gradient_error([&] { return wasserstein_gap(x, prior, b); }, all, h) < 1e-4);
    CHECK(max_gradient_error([&] { return gradient_penalty(ad::constant(prior), b, w.beta2); },
                             b.discriminator_parameters(), h) < 1e-4);
    w.squared_reconstruction = true;
    CHECK(max_gradient_error([&] { return loss_ae(x, b, w); }, all, h) < 1e-4);
  }
}

TEST_CASE("wae baseline: the mask receives no gradient") {
  const ModelBundle b = toy_bundle(4, 3, Variant::wae_baseline, 5);
  Rng rng(6);
  const ad::Matrix x = normal_matrix(rng, 6, 4);
  const ad::Var l = loss_mask(x, normal_matrix(rng, 6, 3), b, LossWeights{});
  CHECK(b.mask_parameters().empty());
  const auto g = ad::grad(l, std::vector<ad::Var>{b.mask.theta});
  CHECK(g[0].value().isZero());
}

TEST_CASE("shape and weight validation") {
  const ModelBundle b = toy_bundle(4, 3, Variant::maskaae, 5);
  const ad::Matrix x = ad::Matrix::Ones(4, 4);
  CHECK_THROWS_AS(loss_dm(x, ad::Matrix::Ones(4, 2), fixed_beta(4), b, LossWeights{}), ShapeError);
  CHECK_THROWS_AS(loss_dm(x, ad::Matrix::Ones(3, 3), fixed_beta(3), b, LossWeights{}), ShapeError);
  CHECK_THROWS_AS(loss_gen(ad::Matrix::Ones(4, 5), b), ShapeError);
  LossWeights w;
  w.mask_gap_center = 0.5;
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
  LossWeights neg;
  neg.alpha1 = 0.0;
  CHECK_THROWS_AS(neg.validate(), InvalidArgument);
  LossWeights l3;
  l3.lambda3 = 0.125;
  CHECK(LossWeights::from_json(l3.to_json()).lambda3 == 0.125);
  CHECK_FALSE(LossWeights::from_json(LossWeights{}.to_json()).lambda3.has_value());
}
