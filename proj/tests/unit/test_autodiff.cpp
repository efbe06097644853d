#include "doctest.h"
#include "support.hpp"

#include "maae/autodiff.hpp"
#include "maae/rng.hpp"

using namespace maae;
using maae::test::max_gradient_error;

namespace {

ad::Matrix randm(Rng& rng, int r, int c) { return normal_matrix(rng, r, c); }

}  // namespace

TEST_CASE("elementwise and reduction ops match central differences") {
  Rng rng(11);
  ad::Var a = ad::leaf(randm(rng, 4, 3));
  ad::Var b = ad::leaf(randm(rng, 4, 3));
  ad::Var row = ad::leaf(randm(rng, 1, 3));
  ad::Var col = ad::leaf(randm(rng, 4, 1));
  ad::Var w = ad::leaf(randm(rng, 3, 2));
  const std::vector<ad::Var> params{a, b, row, col, w};

  const std::vector<std::pair<const char*, std::function<ad::Var()>>> cases = {
      {"add/sub/mul", [&] { return ad::sum(ad::mul(ad::add(a, b), ad::sub(a, b))); }},
      {"scale/neg/add_scalar", [&] { return ad::mean(ad::neg(ad::add_scalar(ad::scale(a, 2.5), 0.3))); }},
      {"matmul", [&] { return ad::sum(ad::square(ad::matmul(a, w))); }},
      {"row broadcast", [&] { return ad::sum(ad::square(ad::mul_row(ad::add_row(a, row), row))); }},
      {"col broadcast", [&] { return ad::sum(ad::square(ad::mul_col(a, col))); }},
      {"sum_rows/sum_cols", [&] { return ad::sum(ad::mul(ad::sum_rows(a), ad::sum_rows(b))) +
                                          ad::sum(ad::square(ad::sum_cols(b))); }},
      {"expand", [&] { return ad::sum(ad::mul(ad::expand_rows(row, 4), a)) +
                               ad::sum(ad::mul(ad::expand_cols(col, 3), b)) +
                               ad::sum(ad::expand_scalar(ad::sum(row), 2, 2)); }},
      {"exp/sigmoid", [&] { return ad::sum(ad::mul(ad::exp(ad::scale(a, 0.3)), ad::sigmoid(b))); }},
      {"abs", [&] { return ad::sum(ad::abs(a)); }},
      {"leaky_relu", [&] { return ad::sum(ad::square(ad::leaky_relu(a, 0.2))); }},
      {"relu", [&] { return ad::sum(ad::square(ad::leaky_relu(b, 0.0))); }},
      {"row_norm", [&] { return ad::sum(ad::row_norm(a)); }},
      {"safe_reciprocal", [&] { return ad::sum(ad::safe_reciprocal(ad::add_scalar(ad::square(a), 0.5))); }},
  };
  for (const auto& [name, build] : cases) {
    CAPTURE(name);
    CHECK(max_gradient_error(build, params) < 1e-6);
  }
}

TEST_CASE("mask gate: value, clamped region and gradient") {
  ad::Var theta = ad::leaf((ad::Matrix(1, 4) << 0.0, std::log(2.0), -5.0, 1.3).finished());
  const ad::Var mu = ad::mask_gate(theta);
  CHECK(mu.value()(0, 0) == 0.0);
  CHECK(mu.value()(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mu.value()(0, 2) == 0.0);
  const auto g = ad::grad(ad::sum(mu), std::vector<ad::Var>{theta});
  CHECK(g[0].value()(0, 0) == 0.0);
  CHECK(g[0].value()(0, 2) == 0.0);
  CHECK(g[0].value()(0, 1) == doctest::Approx(0.5));
  CHECK(g[0].value()(0, 3) == doctest::Approx(std::exp(-1.3)));
}

TEST_CASE("second-order: gradient of an input-gradient norm") {
  Rng rng(5);
  ad::Var w1 = ad::leaf(randm(rng, 3, 5));
  ad::Var b1 = ad::leaf(randm(rng, 1, 5));
  ad::Var w2 = ad::leaf(randm(rng, 5, 4));
  ad::Var w3 = ad::leaf(randm(rng, 4, 1));
  const ad::Matrix xv = randm(rng, 6, 3);
  auto build = [&] {
    ad::GradModeGuard on(true);
    ad::Var x = ad::leaf(xv);
    ad::Var h = ad::leaky_relu(ad::add_row(ad::matmul(x, w1), b1), 0.2);
    h = ad::sigmoid(ad::matmul(h, w2));
    ad::Var out = ad::sum(ad::matmul(h, w3));
    ad::Var gx = ad::grad(out, std::vector<ad::Var>{x}, true)[0];
    return ad::mean(ad::square(ad::add_scalar(ad::row_norm(gx), -1.0)));
  };
  CHECK(max_gradient_error(build, {w1, b1, w2, w3}) < 1e-6);
}

TEST_CASE("grad: unreachable targets get zeros and no-grad mode records nothing") {
  ad::Var a = ad::leaf(ad::Matrix::Ones(2, 2));
  ad::Var unused = ad::leaf(ad::Matrix::Ones(3, 1));
  const auto g = ad::grad(ad::sum(a), std::vector<ad::Var>{a, unused});
  CHECK(g[1].value().isZero());
  CHECK(g[1].rows() == 3);
  {
    ad::NoGradGuard guard;
    CHECK_FALSE(ad::grad_enabled());
    CHECK_FALSE(ad::square(a).requires_grad());
  }
  CHECK(ad::grad_enabled());
}

TEST_CASE("property: matmul gradient matches differences for random shapes") {
  Rng rng(2024);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 25; ++trial) {
    const int r = dim(rng), k = dim(rng), c = dim(rng);
    ad::Var a = ad::leaf(randm(rng, r, k));
    ad::Var b = ad::leaf(randm(rng, k, c));
    CAPTURE(trial);
    CHECK(max_gradient_error([&] { return ad::sum(ad::exp(ad::scale(ad::matmul(a, b), 0.2))); }, {a, b}) < 1e-6);
  }
}
