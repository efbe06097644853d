#include "doctest.h"
#include "support.hpp"

#include "maae/errors.hpp"
#include "maae/theory_checks.hpp"

#include <numbers>

using namespace maae;

namespace {

CoveringSpec spec_of(int alpha, int beta, double L, int epsilon) {
  CoveringSpec s;
  s.alpha = alpha;
  s.beta = beta;
  s.L = L;
  s.epsilon = epsilon;
  return s;
}

double sample_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("lemma1_constant: closed forms") {
  const double pi = std::numbers::pi;
  CHECK(lemma1_constant(spec_of(1, 2, 1.0, 1)) == doctest::Approx(pi).epsilon(1e-14));
  CHECK(lemma1_constant(spec_of(1, 1, 1.0, 1)) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(lemma1_constant(spec_of(1, 2, 0.0, 1)) == 0.0);
  // Gamma(5/2) = (3/2)(1/2) sqrt(pi).
  const double oracle = std::pow(1.5, 3) * std::pow(2.0 * pi, 1.5) / (0.75 * std::sqrt(pi));
  CHECK(lemma1_constant(spec_of(2, 3, 1.5, 1)) == doctest::Approx(oracle).epsilon(1e-13));
  CHECK_THROWS_AS(lemma1_constant(spec_of(1, 400, 1e10, 1)), RangeError);
  CHECK_THROWS_AS(spec_of(0, 1, 1.0, 1).validate(), InvalidArgument);
  CHECK_THROWS_AS(spec_of(1, 1, 1.0, 0).validate(), InvalidArgument);
}

TEST_CASE("lemma1_volume_bound: closed forms") {
  const double pi = std::numbers::pi;
  CHECK(lemma1_volume_bound(spec_of(1, 2, 1.0, 10)) == doctest::Approx(pi / 10).epsilon(1e-14));
  CHECK(lemma1_volume_bound(spec_of(1, 2, 1.0, 20)) == doctest::Approx(lemma1_volume_bound(spec_of(1, 2, 1.0, 10)) / 2).epsilon(1e-14));
  for (int eps : {1, 3, 17}) {
    CHECK(lemma1_volume_bound(spec_of(3, 3, 2.0, eps)) == doctest::Approx(lemma1_constant(spec_of(3, 3, 2.0, 1))).epsilon(1e-14));
  }
}

TEST_CASE("property: volume bound decreases in epsilon iff beta > alpha") {
  Rng rng(51);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_int_distribution<int> eps(1, 50);
  std::uniform_real_distribution<double> lip(0.1, 3.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int alpha = dim(rng), beta = dim(rng), e = eps(rng);
    const double L = lip(rng);
    const double here = lemma1_volume_bound(spec_of(alpha, beta, L, e));
    const double next = lemma1_volume_bound(spec_of(alpha, beta, L, e + 1));
    CAPTURE(alpha);
    CAPTURE(beta);
    CHECK((next < here) == (beta > alpha));
  }
}

TEST_CASE("covering: nearest centers and completeness") {
  CHECK(nearest_center_distance(Eigen::VectorXd::Constant(1, 0.375), 4) == 0.0);
  CHECK(nearest_center_distance(Eigen::VectorXd::Constant(1, 0.25), 4) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(nearest_center_distance(Eigen::VectorXd::Constant(1, 1.0), 4) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(nearest_center_distance(Eigen::VectorXd::Constant(2, 0.0), 4) ==
        doctest::Approx(std::sqrt(2.0) / 8).epsilon(1e-15));
  CHECK(covering_radius(2, 4) == doctest::Approx(std::sqrt(2.0) / 8).epsilon(1e-15));
  CHECK(covering_completeness(2, 4, 100000, 1) <= std::sqrt(2.0) / 8 + 1e-12);
}

TEST_CASE("property: covering never exceeds the radius") {
  Rng rng(52);
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_int_distribution<int> eps(1, 30);
  std::uniform_int_distribution<int> probes(1, 3000);
  for (int trial = 0; trial < 60; ++trial) {
    const int alpha = dim(rng), e = eps(rng);
    CHECK(covering_completeness(alpha, e, probes(rng), rng()) <= covering_radius(alpha, e) + 1e-12);
  }
}

TEST_CASE("ball_volume") {
  CHECK(ball_volume(1, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ball_volume(2, 2.0) == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-14));
  CHECK(ball_volume(3, 1.0) == doctest::Approx(4.0 / 3.0 * std::numbers::pi).epsilon(1e-14));
}

TEST_CASE("image_volume_estimate: constant map and linear embedding") {
  const CubeMap constant = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(2, 3.0); };
  const auto c = image_volume_estimate(constant, 1, 2, 8, 4, 1);
  CHECK(c.cells == 8);
  CHECK(c.estimate == 0.0);

  const CubeMap embed = [](const Eigen::VectorXd& t) {
    return Eigen::VectorXd::Constant(2, t(0) / std::sqrt(2.0));
  };
  double previous = std::numeric_limits<double>::infinity();
  for (int eps : {4, 8, 16, 32}) {
    const auto e = image_volume_estimate(embed, 1, 2, eps, 8, 2);
    CAPTURE(eps);
    CHECK(e.empirical_lipschitz <= 1.0 + 1e-9);
    CHECK(e.estimate <= std::numbers::pi / eps + 1e-12);
    CHECK(e.estimate < previous);
    previous = e.estimate;
  }

  const CubeMap broken = [](const Eigen::VectorXd& t) {
    return Eigen::VectorXd::Constant(2, t(0) > 0.5 ? std::nan("") : 0.0);
  };
  CHECK_THROWS_AS(image_volume_estimate(broken, 1, 2, 4, 2, 1), NumericError);
}

TEST_CASE("image_volume_estimate: generator slice into three dimensions") {
  GeneratorSpec g;
  g.n = 2;
  g.k = 16;
  g.d = 3;
  g.seed = 4;
  const GeneratorNetwork net = GeneratorNetwork::realize(g);
  const CubeMap slice = [&](const Eigen::VectorXd& p) {
    return Eigen::VectorXd(net.forward((2.0 * p.array() - 1.0).matrix().transpose()).row(0).transpose());
  };
  const double map_lipschitz = 2.0 * lipschitz_upper_bound(net);
  double previous = std::numeric_limits<double>::infinity();
  for (int eps : {4, 8, 16}) {
    const auto e = image_volume_estimate(slice, 2, 3, eps, 4, 3);
    CAPTURE(eps);
    CHECK(e.empirical_lipschitz <= map_lipschitz);
    CHECK(e.estimate <= lemma1_volume_bound(spec_of(2, 3, map_lipschitz, eps)));
    CHECK(e.estimate < previous);
    previous = e.estimate;
  }
}

TEST_CASE("cross-entropy proxy: Gaussian oracle and subspace gap") {
  Rng rng(53);
  const double matched = estimate_cross_entropy_proxy(normal_matrix(rng, 5000, 4), normal_matrix(rng, 5000, 4), 5);
  CHECK(gaussian_entropy(4) == doctest::Approx(2.0 * std::log(2.0 * std::numbers::pi * std::numbers::e)).epsilon(1e-14));
  CHECK(std::abs(matched - gaussian_entropy(4)) <= 0.15 * gaussian_entropy(4));

  const Eigen::MatrixXd prior8 = normal_matrix(rng, 3000, 8);
  Eigen::MatrixXd sub = Eigen::MatrixXd::Zero(3000, 8);
  sub.leftCols(2) = normal_matrix(rng, 3000, 2);
  const double full = estimate_cross_entropy_proxy(prior8, normal_matrix(rng, 3000, 8), 5);
  const double confined = estimate_cross_entropy_proxy(prior8, sub, 5);
  CHECK(confined >= full + 2.0);

  CHECK_THROWS_AS(estimate_cross_entropy_proxy(prior8, sub.topRows(5), 5), InvalidArgument);
  // Duplicated encodings get jitter and still yield a finite value.
  const Eigen::MatrixXd dup = Eigen::MatrixXd::Zero(50, 2);
  CHECK(std::isfinite(estimate_cross_entropy_proxy(normal_matrix(rng, 50, 2), dup, 5)));
}

TEST_CASE("property: cross-entropy proxy grows with the ambient dimension") {
  const CrossEntropyGrowth g = cross_entropy_growth(4, {4, 8, 16}, 10, 1000, 5, 54);
  REQUIRE(g.medians.size() == 3);
  for (std::size_t i = 0; i + 1 < g.medians.size(); ++i) {
    const double noise = 3.0 * std::max(sample_sd(g.estimates[i]), sample_sd(g.estimates[i + 1]));
    CHECK(g.medians[i + 1] >= g.medians[i] - noise);
  }
}

TEST_CASE("r1_residual: identity and zero decoder") {
  GeneratorSpec spec;
  spec.n = 2;
  spec.k = 8;
  spec.d = 3;
  spec.seed = 1;
  const Dataset data = generate_dataset(spec, 500);
  ModelBundle b = test::affine_bundle(3, 3, Variant::wae_baseline);
  test::set_affine(b.encoder, ad::Matrix::Identity(3, 3), ad::RowVector::Zero(3));
  test::set_affine(b.decoder, ad::Matrix::Identity(3, 3), ad::RowVector::Zero(3));
  CHECK(r1_residual(b, data) == doctest::Approx(0.0).epsilon(1e-15));
  test::set_affine(b.decoder, ad::Matrix::Zero(3, 3), ad::RowVector::Zero(3));
  CHECK(r1_residual(b, data) == doctest::Approx(data.samples.rowwise().norm().mean()).epsilon(1e-12));
}

TEST_CASE("theory_check_report: every check passes and reports values") {
  const nlohmann::json report = theory_check_report(7);
  CHECK(report.at("seed") == 7);
  REQUIRE(report.at("checks").is_array());
  CHECK(report.at("checks").size() >= 7);
  for (const auto& c : report.at("checks")) {
    CAPTURE(c.at("name").get<std::string>());
    CHECK(c.at("passed").get<bool>());
    CHECK(c.contains("values"));
  }
  CHECK(report.at("all_passed").get<bool>());
}
