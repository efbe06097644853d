#pragma once

// Numerical probes of the capacity argument: the covering-grid volume bound
// for Lipschitz images of a cube, a kNN cross-entropy estimator, and the
// reconstruction residual of a trained bundle.

#include "maae/networks.hpp"
#include "maae/synthetic_data.hpp"
#include "json.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace maae {

struct CoveringSpec {
  int alpha = 1;         // domain dimension
  int beta = 1;          // codomain dimension
  double L = 1.0;        // Lipschitz constant
  int epsilon = 1;       // grid cells per unit edge

  // alpha, beta, epsilon >= 1 and L >= 0; InvalidArgument otherwise.
  void validate() const;
};

// L^beta (alpha pi)^{beta/2} / Gamma(beta/2 + 1). RangeError when the result
// is not representable.
double lemma1_constant(const CoveringSpec& spec);

// c / epsilon^{beta - alpha}.
double lemma1_volume_bound(const CoveringSpec& spec);

// Distance from p (in [0,1]^alpha) to the nearest grid center
// ((a + 0.5) / epsilon, ...), found by coordinate-wise rounding.
double nearest_center_distance(const Eigen::VectorXd& p, int epsilon);

// Max nearest-center distance over `probes` uniform points in [0,1]^alpha.
double covering_completeness(int alpha, int epsilon, std::int64_t probes, std::uint64_t seed);

// Radius sqrt(alpha) / (2 epsilon) that every point of the cube lies within.
double covering_radius(int alpha, int epsilon);

// Volume of a beta-dimensional ball of radius r.
double ball_volume(int beta, double r);

using CubeMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct ImageVolumeEstimate {
  double estimate = 0.0;
  double empirical_lipschitz = 0.0;  // max |map(p) - map(c)| / |p - c| over probes
  std::int64_t cells = 0;
};

// Pushes the grid centers through `map` and sums the volumes of balls of
// radius L_emp sqrt(alpha) / (2 epsilon) around the distinct images. Overlaps
// are ignored, so this is an upper bound on the cover volume. A non-finite
// map output raises NumericError.
ImageVolumeEstimate image_volume_estimate(const CubeMap& map, int alpha, int beta, int epsilon,
                                          int samples_per_cell, std::uint64_t seed);

// kNN estimate of the cross-entropy H(prior, encoded): the encoded density is
// estimated from k-th neighbour distances and evaluated at the prior samples.
// Needs at least k + 1 encoded rows. Zero neighbour distances get 1e-12
// jitter and a warning on stderr.
double estimate_cross_entropy_proxy(const Eigen::MatrixXd& prior_samples,
                                    const Eigen::MatrixXd& encoded_samples, int k = 5);

// Entropy of N(0, I_m) in nats.
double gaussian_entropy(int m);

struct CrossEntropyGrowth {
  int support_dim = 0;
  std::vector<int> m_values;
  std::vector<std::vector<double>> estimates;  // [m index][repeat]
  std::vector<double> medians;
};

// Encoded samples occupy a support_dim-dimensional coordinate subspace of
// R^m (remaining coordinates zero); the prior is N(0, I_m). One estimate per
// (m, repeat) with `samples` rows on each side.
CrossEntropyGrowth cross_entropy_growth(int support_dim, const std::vector<int>& m_values, int repeats,
                                        int samples, int k, std::uint64_t seed);

// Runs every covering, volume, and cross-entropy check and reports values
// with pass/fail flags. "all_passed" summarises the lot.
nlohmann::json theory_check_report(std::uint64_t seed);

// Mean Euclidean reconstruction error ||x - D(mu * E(x))|| over the dataset.
double r1_residual(const ModelBundle& bundle, const Dataset& dataset,
                   MaskMode mode = MaskMode::raw);

}  // namespace maae
