#include "maae/metrics.hpp"

#include "maae/errors.hpp"
#include "maae/rng.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace maae {

namespace {

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, Eigen::RowVectorXd& mean) {
  mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

// ---------------------------------------------------------------------------
// MetricsRecord

nlohmann::json MetricsRecord::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["frechet"] = number_or_null(frechet);
  j["nac"] = number_or_null(nac);
  j["m_A"] = m_A;
  j["loss_ae"] = number_or_null(loss_ae);
  j["loss_dm"] = number_or_null(loss_dm);
  j["loss_gen"] = number_or_null(loss_gen);
  j["loss_mask"] = number_or_null(loss_mask);
  j["omega"] = number_or_null(omega);
  j["mu"] = std::vector<double>(mu.data(), mu.data() + mu.size());
  return j;
}

MetricsRecord MetricsRecord::from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.frechet = number_or_nan(j.at("frechet"));
  r.nac = number_or_nan(j.at("nac"));
  r.m_A = j.at("m_A").get<int>();
  r.loss_ae = number_or_nan(j.at("loss_ae"));
  r.loss_dm = number_or_nan(j.at("loss_dm"));
  r.loss_gen = number_or_nan(j.at("loss_gen"));
  r.loss_mask = number_or_nan(j.at("loss_mask"));
  r.omega = number_or_nan(j.at("omega"));
  const auto mu = j.at("mu").get<std::vector<double>>();
  r.mu = Eigen::Map<const Eigen::RowVectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  return r;
}

std::string MetricsRecord::to_jsonl() const { return to_json().dump(); }

// ---------------------------------------------------------------------------
// Fréchet distance

double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  // (A B)^{1/2} is similar to (A^{1/2} B A^{1/2})^{1/2}, which is symmetric.
  const Eigen::MatrixXd root_a = sym_sqrt(a);
  const Eigen::MatrixXd inner = root_a * b * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()),
                                                      Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

double frechet_from_moments(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                            const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2) {
  if (mean1.size() != mean2.size() || cov1.rows() != mean1.size() || cov2.rows() != mean2.size()) {
    throw ShapeError("frechet: moment dimensions disagree");
  }
  if (!mean1.allFinite() || !mean2.allFinite() || !cov1.allFinite() || !cov2.allFinite()) {
    throw InvalidArgument("frechet: non-finite moments");
  }
  // The cross term is evaluated in both orders and averaged so the result is
  // symmetric in its arguments to rounding.
  const double cross = 0.5 * (trace_sqrt_product(cov1, cov2) + trace_sqrt_product(cov2, cov1));
  return (mean1 - mean2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * cross;
}

double frechet_distance(const Eigen::MatrixXd& real_feats, const Eigen::MatrixXd& gen_feats) {
  if (real_feats.cols() != gen_feats.cols()) throw ShapeError("frechet: feature widths differ");
  if (!real_feats.allFinite() || !gen_feats.allFinite()) {
    throw InvalidArgument("frechet: non-finite features");
  }
  if (real_feats.rows() < 2 || gen_feats.rows() < 2) {
    throw InvalidArgument("frechet: need at least 2 samples per set");
  }
  const auto p = real_feats.cols();
  if (real_feats.rows() < p + 1 || gen_feats.rows() < p + 1) {
    std::cerr << "warning: frechet with fewer than p+1 samples; covariance is rank deficient\n";
  }
  Eigen::RowVectorXd m1;
  Eigen::RowVectorXd m2;
  const Eigen::MatrixXd c1 = covariance(real_feats, m1);
  const Eigen::MatrixXd c2 = covariance(gen_feats, m2);
  return frechet_from_moments(m1.transpose(), c1, m2.transpose(), c2);
}

// ---------------------------------------------------------------------------
// Feature extraction

std::string to_string(ExtractorKind k) { return k == ExtractorKind::identity ? "identity" : "pca_w"; }

ExtractorKind extractor_from_string(const std::string& s) {
  if (s == "identity") return ExtractorKind::identity;
  if (s == "pca_w") return ExtractorKind::pca_w;
  throw InvalidArgument("unknown feature extractor '" + s + "'");
}

FeatureExtractor FeatureExtractor::identity() { return FeatureExtractor{}; }

FeatureExtractor FeatureExtractor::fit_pca_whitening(const Eigen::MatrixXd& reference, int p) {
  const auto d = reference.cols();
  if (p < 1 || p > d) throw InvalidArgument("pca_w: p must lie in [1, d]");
  if (reference.rows() < 2) throw InvalidArgument("pca_w: need at least 2 reference samples");
  FeatureExtractor fx;
  fx.kind_ = ExtractorKind::pca_w;
  fx.fitted_ = true;
  const Eigen::MatrixXd cov = covariance(reference, fx.mean_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  fx.projection_.resize(d, p);
  // Eigenvalues are ascending; take the top p.
  const double floor = std::max(eig.eigenvalues()(d - 1), 1.0) * 1e-12;
  for (int c = 0; c < p; ++c) {
    const auto idx = d - 1 - c;
    const double lambda = std::max(eig.eigenvalues()(idx), floor);
    fx.projection_.col(c) = eig.eigenvectors().col(idx) / std::sqrt(lambda);
  }
  return fx;
}

Eigen::MatrixXd FeatureExtractor::extract(const Eigen::MatrixXd& x) const {
  if (kind_ == ExtractorKind::identity) return x;
  if (!fitted_) throw StateError("pca_w feature extractor used before fitting");
  if (x.cols() != projection_.rows()) throw ShapeError("pca_w: input width differs from fitted data");
  return (x.rowwise() - mean_) * projection_;
}

nlohmann::json FeatureExtractor::describe() const {
  nlohmann::json j{{"kind", to_string(kind_)}};
  if (kind_ == ExtractorKind::pca_w) j["p"] = projection_.cols();
  return j;
}

Eigen::MatrixXd feature_extract(const Eigen::MatrixXd& x, const FeatureExtractor& extractor) {
  return extractor.extract(x);
}

// ---------------------------------------------------------------------------
// NAC

double nac(const Eigen::MatrixXd& encodings, const std::vector<int>& active) {
  const auto b = encodings.rows();
  const auto m = encodings.cols();
  if (b < 2) throw InvalidArgument("nac: need at least 2 encodings");
  if (active.empty()) throw InvalidArgument("nac: active index set is empty");
  for (int j : active) {
    if (j < 0 || j >= m) throw InvalidArgument("nac: active index out of range");
  }
  const Eigen::MatrixXd centered = encodings.rowwise() - encodings.colwise().mean();
  const Eigen::MatrixXd scatter = (centered.transpose() * centered).cwiseAbs();
  const double lo = scatter.minCoeff();
  const double hi = scatter.maxCoeff();
  if (!(hi > lo)) throw DegenerateError("nac: scatter matrix is constant (constant encodings)");
  if (active.size() == 1) return 0.0;
  double total = 0.0;
  std::size_t count = 0;
  for (int r : active) {
    for (int c : active) {
      if (r == c) continue;
      total += (scatter(r, c) - lo) / (hi - lo);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Evaluation

void EvalConfig::validate() const {
  if (eval_samples < 2) throw InvalidArgument("eval_samples must be >= 2");
  if (nac_samples < 2) throw InvalidArgument("nac_samples must be >= 2");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  if (pca_dim < 1) throw InvalidArgument("pca_dim must be >= 1");
}

nlohmann::json EvalConfig::to_json() const {
  return {{"eval_samples", eval_samples},
          {"nac_samples", nac_samples},
          {"tau", tau},
          {"mask_mode", mask_mode == MaskMode::raw ? "raw" : "rounded"},
          {"extractor", to_string(extractor)},
          {"pca_dim", pca_dim}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json& j) {
  EvalConfig c;
  c.eval_samples = j.value("eval_samples", c.eval_samples);
  c.nac_samples = j.value("nac_samples", c.nac_samples);
  c.tau = j.value("tau", c.tau);
  const std::string mode = j.value("mask_mode", std::string("raw"));
  if (mode != "raw" && mode != "rounded") throw InvalidArgument("mask_mode must be raw or rounded");
  c.mask_mode = mode == "raw" ? MaskMode::raw : MaskMode::rounded;
  c.extractor = extractor_from_string(j.value("extractor", std::string("identity")));
  c.pca_dim = j.value("pca_dim", c.pca_dim);
  return c;
}

std::vector<int> active_index_set(const ModelBundle& bundle, double tau) {
  const ad::RowVector mu = bundle.mask_values();
  std::vector<int> active;
  for (int j = 0; j < mu.size(); ++j) {
    if (bundle.variant == Variant::wae_baseline || mu(j) > tau) active.push_back(j);
  }
  return active;
}

MetricsRecord evaluate(const ModelBundle& bundle, const Dataset& dataset, const EvalConfig& config,
                       const LossWeights& weights, int batch_size, std::int64_t step,
                       std::uint64_t eval_seed, const FeatureExtractor* extractor) {
  config.validate();
  if (dataset.dim() != bundle.data_dim()) throw ShapeError("evaluate: dataset width differs from model");
  const int m = bundle.latent_dim();
  Rng rng(eval_seed);

  MetricsRecord rec;
  rec.step = step;
  rec.mu = bundle.mask_values();
  rec.m_A = bundle.variant == Variant::wae_baseline ? m : active_dimensions(rec.mu, config.tau);

  // Generation quality.
  const Eigen::Index n_eval = std::min<Eigen::Index>(config.eval_samples, dataset.count());
  const Eigen::MatrixXd real = dataset.samples.topRows(n_eval);
  const Eigen::MatrixXd prior = normal_matrix(rng, config.eval_samples, m);
  const Eigen::MatrixXd generated = decode(bundle, apply_mask(prior, bundle.mask_values(config.mask_mode)));
  const FeatureExtractor identity = FeatureExtractor::identity();
  const FeatureExtractor& fx = extractor ? *extractor : identity;
  if (generated.allFinite()) {
    rec.frechet = frechet_distance(fx.extract(real), fx.extract(generated));
  } else {
    rec.frechet = std::numeric_limits<double>::quiet_NaN();
  }

  // Latent covariance structure.
  const Eigen::Index n_nac = std::min<Eigen::Index>(config.nac_samples, dataset.count());
  const Eigen::MatrixXd encodings = apply_mask(encode(bundle, dataset.samples.topRows(n_nac)), rec.mu);
  const auto active = active_index_set(bundle, config.tau);
  rec.nac = std::numeric_limits<double>::quiet_NaN();
  if (!active.empty() && n_nac >= 2) {
    try {
      rec.nac = nac(encodings, active);
    } catch (const DegenerateError&) {
    }
  }

  // Loss values on one fresh batch.
  const int s = std::max(2, batch_size);
  Eigen::MatrixXd x(s, dataset.dim());
  std::uniform_int_distribution<Eigen::Index> pick(0, dataset.count() - 1);
  for (int i = 0; i < s; ++i) x.row(i) = dataset.samples.row(pick(rng));
  const Eigen::MatrixXd z = normal_matrix(rng, s, m);
  const Eigen::VectorXd beta1 = uniform_matrix(rng, s, 1).col(0);
  {
    ad::NoGradGuard no_grad;
    rec.loss_ae = loss_ae(x, bundle, weights).scalar();
    rec.loss_gen = loss_gen(x, bundle).scalar();
    rec.loss_dm = loss_dm(x, z, beta1, bundle, weights).scalar();
    rec.loss_mask = loss_mask(x, z, bundle, weights).scalar();
    rec.omega = wasserstein_gap(x, z, bundle).scalar();
  }
  return rec;
}

}  // namespace maae
