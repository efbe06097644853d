#pragma once

// Training objectives of the masked adversarial auto-encoder.
//
// Every loss returns a differentiable scalar built from the bundle's
// parameter leaves. Losses never decide which parameters move; the trainer
// asks ad::grad for the group each objective is allowed to update.

#include "maae/autodiff.hpp"
#include "maae/networks.hpp"
#include "json.hpp"

#include <optional>

namespace maae {

struct LossWeights {
  double alpha1 = 1.0;    // reconstruction weight in L_ae
  double alpha2 = 100.0;  // variance penalty weight in L_ae
  double gamma = 10.0;    // sharpness of delta_j = exp(-gamma mu_j)
  double beta2 = 10.0;    // gradient-penalty weight in L_dm; beta1 ~ U[0,1] per sample
  double lambda1 = 1000.0;
  double lambda2 = 1.0;
  // Unset means 2/m, resolved when training starts.
  std::optional<double> lambda3;
  // The gap term in L_mask is lambda2 * (omega - mask_gap_center)^2.
  double mask_gap_center = -1.0;
  bool squared_reconstruction = false;

  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
  double lambda3_or_default(int m) const { return lambda3.value_or(2.0 / m); }
};

// (1/s) sum_i ||x_i - D(mu . E(x_i))||, squared if requested.
ad::Var reconstruction_error(const ad::Matrix& x, const ModelBundle& bundle, bool squared = false);

// Unbiased per-column batch variance of an s x m matrix, returned as 1 x m.
ad::Var batch_variance(const ad::Var& z);

ad::Var loss_ae(const ad::Matrix& x, const ModelBundle& bundle, const LossWeights& weights);

ad::Var loss_gen(const ad::Matrix& x, const ModelBundle& bundle);

// `beta1` holds one interpolation coefficient per sample.
ad::Var loss_dm(const ad::Matrix& x, const ad::Matrix& z_prior, const Eigen::VectorXd& beta1,
                const ModelBundle& bundle, const LossWeights& weights);

// Same objective with the encoded batch supplied directly.
ad::Var loss_dm_from_encoded(const ad::Var& z_encoded, const ad::Matrix& z_prior,
                             const Eigen::VectorXd& beta1, const ModelBundle& bundle,
                             const LossWeights& weights);

// (beta2/s) sum_i (||grad_{z_avg} H(mu . z_avg_i)|| - 1)^2 for the given
// interpolates; differentiable with respect to the critic.
ad::Var gradient_penalty(const ad::Var& z_avg, const ModelBundle& bundle, double beta2);

// omega = mean H(mu . z_prior) - mean H(mu . E(x)).
ad::Var wasserstein_gap(const ad::Matrix& x, const ad::Matrix& z_prior, const ModelBundle& bundle);

ad::Var loss_mask(const ad::Matrix& x, const ad::Matrix& z_prior, const ModelBundle& bundle,
                  const LossWeights& weights);

// sum_j |mu_j (mu_j - 1)|; zero iff mu is binary.
ad::Var mask_polarization(const ad::Var& mu);
double mask_polarization(const ad::RowVector& mu);

}  // namespace maae
