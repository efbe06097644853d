#include "maae/losses.hpp"

#include "maae/errors.hpp"

namespace maae {

namespace {

void check_rows(const ad::Matrix& m, int cols, const char* what) {
  if (m.cols() != cols) {
    throw ShapeError(std::string(what) + " has " + std::to_string(m.cols()) + " columns, expected " +
                     std::to_string(cols));
  }
}

ad::Var encode_var(const ad::Matrix& x, const ModelBundle& bundle) {
  check_rows(x, bundle.data_dim(), "data batch");
  return bundle.encoder.forward(ad::constant(x));
}

ad::Var critic_mean(const ad::Var& z_masked, const ModelBundle& bundle) {
  return ad::mean(bundle.discriminator.forward(z_masked));
}

ad::Var reconstruction_term(const ad::Matrix& x, const ad::Var& z, const ModelBundle& bundle,
                            const ad::Var& mu, bool squared) {
  const ad::Var recon = bundle.decoder.forward(ad::mul_row(z, mu));
  const ad::Var diff = ad::sub(ad::constant(x), recon);
  const ad::Var per_sample = squared ? ad::sum_cols(ad::square(diff)) : ad::row_norm(diff);
  return ad::mean(per_sample);
}

ad::Var gap_term(const ad::Var& z, const ad::Matrix& z_prior, const ModelBundle& bundle,
                 const ad::Var& mu) {
  check_rows(z_prior, bundle.latent_dim(), "prior batch");
  const ad::Var prior_term = critic_mean(ad::mul_row(ad::constant(z_prior), mu), bundle);
  const ad::Var encoded_term = critic_mean(ad::mul_row(z, mu), bundle);
  return ad::sub(prior_term, encoded_term);
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {alpha1, alpha2, gamma, beta2, lambda1, lambda2}) {
    if (!(v > 0.0)) throw InvalidArgument("loss weights must be > 0");
  }
  if (lambda3 && !(*lambda3 > 0.0)) throw InvalidArgument("lambda3 must be > 0");
  if (mask_gap_center != -1.0 && mask_gap_center != 0.0) {
    throw InvalidArgument("mask_gap_center must be -1 or 0");
  }
}

nlohmann::json LossWeights::to_json() const {
  return {{"alpha1", alpha1},
          {"alpha2", alpha2},
          {"gamma", gamma},
          {"beta1", "uniform[0,1] per sample"},
          {"beta2", beta2},
          {"lambda1", lambda1},
          {"lambda2", lambda2},
          {"lambda3", lambda3 ? nlohmann::json(*lambda3) : nlohmann::json("2/m")},
          {"mask_gap_center", mask_gap_center},
          {"squared_reconstruction", squared_reconstruction}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.alpha1 = j.value("alpha1", w.alpha1);
  w.alpha2 = j.value("alpha2", w.alpha2);
  w.gamma = j.value("gamma", w.gamma);
  w.beta2 = j.value("beta2", w.beta2);
  w.lambda1 = j.value("lambda1", w.lambda1);
  w.lambda2 = j.value("lambda2", w.lambda2);
  if (j.contains("lambda3") && j["lambda3"].is_number()) w.lambda3 = j["lambda3"].get<double>();
  w.mask_gap_center = j.value("mask_gap_center", w.mask_gap_center);
  w.squared_reconstruction = j.value("squared_reconstruction", w.squared_reconstruction);
  return w;
}

ad::Var reconstruction_error(const ad::Matrix& x, const ModelBundle& bundle, bool squared) {
  return reconstruction_term(x, encode_var(x, bundle), bundle, bundle.mask_var(), squared);
}

ad::Var batch_variance(const ad::Var& z) {
  const auto s = z.rows();
  if (s < 2) throw InvalidArgument("batch variance needs at least 2 samples");
  const ad::Var mean_row = ad::scale(ad::sum_rows(z), 1.0 / static_cast<double>(s));
  const ad::Var centered = ad::sub(z, ad::expand_rows(mean_row, s));
  return ad::scale(ad::sum_rows(ad::square(centered)), 1.0 / static_cast<double>(s - 1));
}

ad::Var loss_ae(const ad::Matrix& x, const ModelBundle& bundle, const LossWeights& weights) {
  if (x.rows() < 2) throw InvalidArgument("loss_ae needs a batch of at least 2 samples");
  const ad::Var mu = bundle.mask_var();
  const ad::Var z = encode_var(x, bundle);
  const ad::Var recon = reconstruction_term(x, z, bundle, mu, weights.squared_reconstruction);
  const ad::Var delta = ad::exp(ad::scale(mu, -weights.gamma));
  const ad::Var penalty = ad::sum(ad::mul(delta, batch_variance(z)));
  return ad::add(ad::scale(recon, weights.alpha1), ad::scale(penalty, weights.alpha2));
}

ad::Var loss_gen(const ad::Matrix& x, const ModelBundle& bundle) {
  return ad::neg(critic_mean(ad::mul_row(encode_var(x, bundle), bundle.mask_var()), bundle));
}

ad::Var gradient_penalty(const ad::Var& z_avg, const ModelBundle& bundle, double beta2) {
  // The penalty differentiates the critic, so it must record a graph even
  // when the caller only wants values.
  ad::GradModeGuard enable(true);
  const ad::Var point = z_avg.requires_grad() ? z_avg : ad::leaf(z_avg.value(), true);
  const ad::Var critic = ad::sum(bundle.discriminator.forward(ad::mul_row(point, bundle.mask_var())));
  const std::vector<ad::Var> wrt{point};
  const ad::Var g = ad::grad(critic, wrt, /*create_graph=*/true)[0];
  return ad::scale(ad::mean(ad::square(ad::add_scalar(ad::row_norm(g), -1.0))), beta2);
}

ad::Var loss_dm_from_encoded(const ad::Var& z_encoded, const ad::Matrix& z_prior,
                             const Eigen::VectorXd& beta1, const ModelBundle& bundle,
                             const LossWeights& weights) {
  const int m = bundle.latent_dim();
  check_rows(z_prior, m, "prior batch");
  if (z_encoded.cols() != m) throw ShapeError("encoded batch width differs from latent dimension");
  if (z_encoded.rows() != z_prior.rows() || beta1.size() != z_prior.rows()) {
    throw ShapeError("loss_dm: prior, encoded and beta1 batches must have equal length");
  }
  const ad::Var mu = bundle.mask_var();
  const ad::Var prior = ad::constant(z_prior);
  const ad::Var prior_term = critic_mean(ad::mul_row(prior, mu), bundle);
  const ad::Var encoded_term = critic_mean(ad::mul_row(z_encoded, mu), bundle);

  const ad::Var b1 = ad::constant(beta1);
  const ad::Var b1c = ad::constant((1.0 - beta1.array()).matrix());
  const ad::Var z_avg = ad::add(ad::mul_col(prior, b1), ad::mul_col(z_encoded, b1c));
  const ad::Var penalty = gradient_penalty(z_avg, bundle, weights.beta2);
  return ad::add(ad::sub(encoded_term, prior_term), penalty);
}

ad::Var loss_dm(const ad::Matrix& x, const ad::Matrix& z_prior, const Eigen::VectorXd& beta1,
                const ModelBundle& bundle, const LossWeights& weights) {
  return loss_dm_from_encoded(encode_var(x, bundle), z_prior, beta1, bundle, weights);
}

ad::Var wasserstein_gap(const ad::Matrix& x, const ad::Matrix& z_prior, const ModelBundle& bundle) {
  return gap_term(encode_var(x, bundle), z_prior, bundle, bundle.mask_var());
}

ad::Var mask_polarization(const ad::Var& mu) {
  return ad::sum(ad::abs(ad::mul(mu, ad::add_scalar(mu, -1.0))));
}

double mask_polarization(const ad::RowVector& mu) {
  return (mu.array() * (mu.array() - 1.0)).abs().sum();
}

ad::Var loss_mask(const ad::Matrix& x, const ad::Matrix& z_prior, const ModelBundle& bundle,
                  const LossWeights& weights) {
  const ad::Var mu = bundle.mask_var();
  const ad::Var z = encode_var(x, bundle);
  const ad::Var recon = reconstruction_term(x, z, bundle, mu, weights.squared_reconstruction);
  const ad::Var omega = gap_term(z, z_prior, bundle, mu);
  const ad::Var gap = ad::square(ad::add_scalar(omega, -weights.mask_gap_center));
  const double lambda3 = weights.lambda3_or_default(bundle.latent_dim());
  return ad::add(ad::add(ad::scale(recon, weights.lambda1), ad::scale(gap, weights.lambda2)),
                 ad::scale(mask_polarization(mu), lambda3));
}

}  // namespace maae
