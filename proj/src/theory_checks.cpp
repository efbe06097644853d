#include "maae/theory_checks.hpp"

#include "maae/errors.hpp"
#include "maae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <vector>

namespace maae {

void CoveringSpec::validate() const {
  if (alpha < 1 || beta < 1) throw InvalidArgument("covering spec: alpha and beta must be >= 1");
  if (epsilon < 1) throw InvalidArgument("covering spec: epsilon must be >= 1");
  if (!(L >= 0.0) || !std::isfinite(L)) throw InvalidArgument("covering spec: L must be finite and >= 0");
}

double lemma1_constant(const CoveringSpec& spec) {
  spec.validate();
  if (spec.L == 0.0) return 0.0;
  const double b = spec.beta;
  const double log_c = b * std::log(spec.L) + 0.5 * b * std::log(spec.alpha * std::numbers::pi) -
                       std::lgamma(0.5 * b + 1.0);
  if (log_c > std::log(std::numeric_limits<double>::max())) {
    throw RangeError("lemma1_constant overflows for beta = " + std::to_string(spec.beta));
  }
  // Direct evaluation where tgamma is finite keeps small cases exact to the ulp.
  const double g = std::tgamma(0.5 * b + 1.0);
  const double direct = std::pow(spec.L, b) * std::pow(spec.alpha * std::numbers::pi, 0.5 * b) / g;
  if (std::isfinite(g) && std::isfinite(direct) && direct > 0.0) return direct;
  return std::exp(log_c);
}

double lemma1_volume_bound(const CoveringSpec& spec) {
  const double c = lemma1_constant(spec);
  return c / std::pow(static_cast<double>(spec.epsilon), spec.beta - spec.alpha);
}

double covering_radius(int alpha, int epsilon) {
  if (alpha < 1 || epsilon < 1) throw InvalidArgument("covering_radius: alpha and epsilon must be >= 1");
  return std::sqrt(static_cast<double>(alpha)) / (2.0 * epsilon);
}

double nearest_center_distance(const Eigen::VectorXd& p, int epsilon) {
  if (epsilon < 1) throw InvalidArgument("nearest_center_distance: epsilon must be >= 1");
  double sq = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    // Cell index of the nearest center, clamped so p = 1 maps into the last cell.
    const double a = std::clamp(std::floor(p(j) * epsilon), 0.0, static_cast<double>(epsilon - 1));
    const double diff = p(j) - (a + 0.5) / epsilon;
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

double covering_completeness(int alpha, int epsilon, std::int64_t probes, std::uint64_t seed) {
  if (alpha < 1 || epsilon < 1) throw InvalidArgument("covering_completeness: alpha and epsilon must be >= 1");
  if (probes < 1) throw InvalidArgument("covering_completeness: probes must be >= 1");
  Rng rng(derive_seed(seed, stream_id("covering")));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd p(alpha);
  double worst = 0.0;
  for (std::int64_t i = 0; i < probes; ++i) {
    for (int j = 0; j < alpha; ++j) p(j) = unit(rng);
    worst = std::max(worst, nearest_center_distance(p, epsilon));
  }
  return worst;
}

double ball_volume(int beta, double r) {
  if (beta < 1) throw InvalidArgument("ball_volume: beta must be >= 1");
  if (r == 0.0) return 0.0;
  const double b = beta;
  return std::exp(0.5 * b * std::log(std::numbers::pi) + b * std::log(r) - std::lgamma(0.5 * b + 1.0));
}

ImageVolumeEstimate image_volume_estimate(const CubeMap& map, int alpha, int beta, int epsilon,
                                          int samples_per_cell, std::uint64_t seed) {
  if (alpha < 1 || beta < 1 || epsilon < 1) {
    throw InvalidArgument("image_volume_estimate: alpha, beta, epsilon must be >= 1");
  }
  if (samples_per_cell < 1) throw InvalidArgument("image_volume_estimate: samples_per_cell must be >= 1");
  const double cells_d = std::pow(static_cast<double>(epsilon), alpha);
  if (cells_d > 1e7) throw InvalidArgument("image_volume_estimate: grid has more than 1e7 cells");
  const auto cells = static_cast<std::int64_t>(cells_d);

  auto checked = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd y = map(p);
    if (y.size() != beta) throw ShapeError("image_volume_estimate: map output has the wrong dimension");
    if (!y.allFinite()) throw NumericError("image_volume_estimate: map produced a non-finite value", 0);
    return y;
  };

  Rng rng(derive_seed(seed, stream_id("image-volume")));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> images;
  images.reserve(static_cast<std::size_t>(cells));
  double lip = 0.0;
  std::vector<int> index(alpha, 0);
  Eigen::VectorXd center(alpha), probe(alpha);
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    for (int j = 0; j < alpha; ++j) center(j) = (index[j] + 0.5) / epsilon;
    const Eigen::VectorXd yc = checked(center);
    for (int s = 0; s < samples_per_cell; ++s) {
      for (int j = 0; j < alpha; ++j) probe(j) = (index[j] + unit(rng)) / epsilon;
      const double dist = (probe - center).norm();
      if (dist == 0.0) continue;
      lip = std::max(lip, (checked(probe) - yc).norm() / dist);
    }
    images.push_back(yc);
    for (int j = 0; j < alpha; ++j) {
      if (++index[j] < epsilon) break;
      index[j] = 0;
    }
  }

  // Coincident images share one ball; the union of identical balls is that ball.
  std::sort(images.begin(), images.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  const auto distinct = std::unique(images.begin(), images.end(),
                                    [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a == b; }) -
                        images.begin();

  ImageVolumeEstimate out;
  out.cells = cells;
  out.empirical_lipschitz = lip;
  out.estimate = static_cast<double>(distinct) * ball_volume(beta, lip * covering_radius(alpha, epsilon));
  return out;
}

namespace {

// Digamma at a positive integer.
double digamma_int(int k) {
  constexpr double euler_gamma = 0.57721566490153286061;
  double s = -euler_gamma;
  for (int i = 1; i < k; ++i) s += 1.0 / i;
  return s;
}

// k-th smallest distance from each prior row to the encoded rows.
Eigen::VectorXd kth_distances(const Eigen::MatrixXd& prior, const Eigen::MatrixXd& encoded_t, int k) {
  Eigen::VectorXd out(prior.rows());
  Eigen::VectorXd sq(encoded_t.cols());
  for (Eigen::Index i = 0; i < prior.rows(); ++i) {
    const Eigen::VectorXd p = prior.row(i).transpose();
    sq = (encoded_t.colwise() - p).colwise().squaredNorm().transpose();
    std::nth_element(sq.data(), sq.data() + (k - 1), sq.data() + sq.size());
    out(i) = std::sqrt(sq(k - 1));
  }
  return out;
}

}  // namespace

double gaussian_entropy(int m) { return 0.5 * m * std::log(2.0 * std::numbers::pi * std::numbers::e); }

double estimate_cross_entropy_proxy(const Eigen::MatrixXd& prior_samples,
                                    const Eigen::MatrixXd& encoded_samples, int k) {
  if (k < 1) throw InvalidArgument("estimate_cross_entropy_proxy: k must be >= 1");
  if (prior_samples.cols() != encoded_samples.cols()) {
    throw ShapeError("estimate_cross_entropy_proxy: prior and encoded dimensions differ");
  }
  if (prior_samples.rows() < 1) throw InvalidArgument("estimate_cross_entropy_proxy: no prior samples");
  if (encoded_samples.rows() <= k) {
    throw InvalidArgument("estimate_cross_entropy_proxy: need more than k encoded samples");
  }
  if (!prior_samples.allFinite() || !encoded_samples.allFinite()) {
    throw NumericError("estimate_cross_entropy_proxy: non-finite input", 0);
  }
  const int m = static_cast<int>(prior_samples.cols());
  Eigen::MatrixXd encoded_t = encoded_samples.transpose();
  Eigen::VectorXd rho = kth_distances(prior_samples, encoded_t, k);
  if ((rho.array() == 0.0).any()) {
    std::cerr << "warning: zero nearest-neighbour distance in cross-entropy estimate; adding 1e-12 jitter\n";
    Rng rng(derive_seed(0, stream_id("ce-jitter")));
    encoded_t += normal_matrix(rng, encoded_t.rows(), encoded_t.cols(), 1e-12);
    rho = kth_distances(prior_samples, encoded_t, k);
    rho = rho.cwiseMax(1e-12);
  }
  const double n_enc = static_cast<double>(encoded_samples.rows());
  const double log_unit_ball = 0.5 * m * std::log(std::numbers::pi) - std::lgamma(0.5 * m + 1.0);
  return std::log(n_enc) - digamma_int(k) + log_unit_ball + m * rho.array().log().mean();
}

CrossEntropyGrowth cross_entropy_growth(int support_dim, const std::vector<int>& m_values, int repeats,
                                        int samples, int k, std::uint64_t seed) {
  if (support_dim < 1) throw InvalidArgument("cross_entropy_growth: support_dim must be >= 1");
  if (repeats < 1) throw InvalidArgument("cross_entropy_growth: repeats must be >= 1");
  CrossEntropyGrowth out;
  out.support_dim = support_dim;
  out.m_values = m_values;
  for (std::size_t mi = 0; mi < m_values.size(); ++mi) {
    const int m = m_values[mi];
    if (m < support_dim) throw InvalidArgument("cross_entropy_growth: every m must be >= support_dim");
    std::vector<double> est;
    for (int r = 0; r < repeats; ++r) {
      Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(m)), static_cast<std::uint64_t>(r)));
      const Eigen::MatrixXd prior = normal_matrix(rng, samples, m);
      Eigen::MatrixXd encoded = Eigen::MatrixXd::Zero(samples, m);
      encoded.leftCols(support_dim) = normal_matrix(rng, samples, support_dim);
      est.push_back(estimate_cross_entropy_proxy(prior, encoded, k));
    }
    std::vector<double> sorted = est;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    out.medians.push_back(n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]));
    out.estimates.push_back(std::move(est));
  }
  return out;
}

namespace {

nlohmann::json check(const std::string& name, bool passed, nlohmann::json values) {
  return {{"name", name}, {"passed", passed}, {"values", std::move(values)}};
}

}  // namespace

nlohmann::json theory_check_report(std::uint64_t seed) {
  nlohmann::json checks = nlohmann::json::array();
  constexpr double tol = 1e-12;

  {
    const double c2 = lemma1_constant({1, 2, 1.0, 1});
    const double c1 = lemma1_constant({1, 1, 1.0, 1});
    const double c0 = lemma1_constant({1, 2, 0.0, 1});
    checks.push_back(check("lemma1_constant", std::abs(c2 - std::numbers::pi) <= tol && std::abs(c1 - 2.0) <= tol &&
                                                  c0 == 0.0,
                           {{"L1_a1_b2", c2}, {"L1_a1_b1", c1}, {"L0_a1_b2", c0}}));
  }
  {
    const double b10 = lemma1_volume_bound({1, 2, 1.0, 10});
    const double b20 = lemma1_volume_bound({1, 2, 1.0, 20});
    const double same4 = lemma1_volume_bound({2, 2, 1.0, 4});
    const double same9 = lemma1_volume_bound({2, 2, 1.0, 9});
    checks.push_back(check("lemma1_volume_bound",
                           std::abs(b10 - std::numbers::pi / 10) <= tol && std::abs(b20 - b10 / 2) <= tol &&
                               same4 == same9,
                           {{"L1_a1_b2_eps10", b10}, {"L1_a1_b2_eps20", b20}, {"equal_dims_eps4", same4},
                            {"equal_dims_eps9", same9}}));
  }
  {
    nlohmann::json cells = nlohmann::json::array();
    bool ok = true;
    for (int alpha : {1, 2, 3}) {
      for (int eps : {2, 4, 8}) {
        const double worst = covering_completeness(alpha, eps, 100000, derive_seed(seed, alpha * 16 + eps));
        const double radius = covering_radius(alpha, eps);
        ok = ok && worst <= radius + tol;
        cells.push_back({{"alpha", alpha}, {"epsilon", eps}, {"max_distance", worst}, {"radius", radius}});
      }
    }
    checks.push_back(check("covering_completeness", ok, cells));
  }
  {
    const CubeMap line = [](const Eigen::VectorXd& p) {
      return Eigen::VectorXd::Constant(2, p(0) / std::sqrt(2.0)).eval();
    };
    nlohmann::json rows = nlohmann::json::array();
    bool ok = true;
    double prev = INFINITY;
    for (int eps : {4, 8, 16}) {
      const auto est = image_volume_estimate(line, 1, 2, eps, 8, seed);
      const double bound = lemma1_volume_bound({1, 2, 1.0, eps});
      ok = ok && est.estimate <= bound && est.estimate < prev;
      prev = est.estimate;
      rows.push_back({{"epsilon", eps}, {"estimate", est.estimate}, {"bound", bound},
                      {"empirical_lipschitz", est.empirical_lipschitz}});
    }
    checks.push_back(check("image_volume_linear_embedding", ok, rows));
  }
  {
    GeneratorSpec spec;
    spec.seed = seed;
    const GeneratorNetwork net = GeneratorNetwork::realize(spec);
    const double lip = lipschitz_upper_bound(net);
    const CubeMap slice = [&](const Eigen::VectorXd& p) {
      Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, spec.n);
      z(0, 0) = 2.0 * p(0) - 1.0;
      z(0, 1) = 2.0 * p(1) - 1.0;
      return net.forward(z).row(0).head(3).transpose().eval();
    };
    // The cube is stretched by 2 before entering the generator.
    const double map_lip = 2.0 * lip;
    nlohmann::json rows = nlohmann::json::array();
    bool ok = true;
    double prev = INFINITY;
    for (int eps : {4, 8, 16}) {
      const auto est = image_volume_estimate(slice, 2, 3, eps, 4, seed);
      const double bound = lemma1_volume_bound({2, 3, map_lip, eps});
      ok = ok && est.estimate <= bound && est.estimate < prev;
      prev = est.estimate;
      rows.push_back({{"epsilon", eps}, {"estimate", est.estimate}, {"bound", bound},
                      {"empirical_lipschitz", est.empirical_lipschitz}});
    }
    checks.push_back(check("image_volume_generator_slice", ok, rows));
  }
  {
    Rng rng(derive_seed(seed, stream_id("ce-gaussian")));
    const Eigen::MatrixXd prior = normal_matrix(rng, 5000, 4);
    const Eigen::MatrixXd encoded = normal_matrix(rng, 5000, 4);
    const double est = estimate_cross_entropy_proxy(prior, encoded, 5);
    const double analytic = gaussian_entropy(4);
    checks.push_back(check("cross_entropy_matched_gaussian", std::abs(est - analytic) <= 0.15 * analytic,
                           {{"estimate", est}, {"analytic", analytic}}));
  }
  {
    const auto g = cross_entropy_growth(4, {4, 8, 16}, 10, 2000, 5, seed);
    bool increasing = true;
    for (std::size_t i = 1; i < g.medians.size(); ++i) increasing = increasing && g.medians[i] > g.medians[i - 1];
    const double gap = g.medians.back() - g.medians.front();
    checks.push_back(check("cross_entropy_growth", increasing && gap >= 2.0,
                           {{"support_dim", g.support_dim}, {"m_values", g.m_values}, {"medians", g.medians},
                            {"gap_nats", gap}}));
  }

  bool all = true;
  for (const auto& c : checks) all = all && c["passed"].get<bool>();
  return {{"seed", seed}, {"checks", checks}, {"all_passed", all}};
}

double r1_residual(const ModelBundle& bundle, const Dataset& dataset, MaskMode mode) {
  if (dataset.dim() != bundle.data_dim()) throw ShapeError("r1_residual: dataset dimension mismatch");
  if (dataset.count() == 0) return 0.0;
  const ad::RowVector mu = bundle.mask_values(mode);
  constexpr Eigen::Index chunk = 4096;
  double total = 0.0;
  for (Eigen::Index start = 0; start < dataset.count(); start += chunk) {
    const Eigen::Index rows = std::min(chunk, dataset.count() - start);
    const ad::Matrix x = dataset.samples.middleRows(start, rows);
    const ad::Matrix recon = decode(bundle, apply_mask(encode(bundle, x), mu));
    total += (x - recon).rowwise().norm().sum();
  }
  return total / static_cast<double>(dataset.count());
}

}  // namespace maae
