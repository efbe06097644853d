#pragma once

#include "maae/losses.hpp"
#include "maae/networks.hpp"
#include "maae/synthetic_data.hpp"
#include "json.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace maae {

struct MetricsRecord {
  std::int64_t step = 0;
  double frechet = 0.0;
  double nac = 0.0;  // NaN when undefined (no active dims, degenerate encodings)
  int m_A = 0;
  double loss_ae = 0.0;
  double loss_dm = 0.0;
  double loss_gen = 0.0;
  double loss_mask = 0.0;
  double omega = 0.0;
  Eigen::RowVectorXd mu;

  nlohmann::json to_json() const;
  static MetricsRecord from_json(const nlohmann::json& j);
  // One JSONL line, no trailing newline.
  std::string to_jsonl() const;
};

// ||m1 - m2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2})
double frechet_from_moments(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                            const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2);

// Fréchet distance between Gaussian fits of two feature sets (rows are
// samples).
double frechet_distance(const Eigen::MatrixXd& real_feats, const Eigen::MatrixXd& gen_feats);

// Tr((A B)^{1/2}) for symmetric positive semi-definite A and B.
double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

enum class ExtractorKind { identity, pca_w };

std::string to_string(ExtractorKind k);
ExtractorKind extractor_from_string(const std::string& s);

// Feature hook for the Fréchet score. pca_w projects onto the top-p
// principal components of a reference set and whitens them.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  // Unfitted extractor of the given kind; pca_w needs fit_pca_whitening.
  explicit FeatureExtractor(ExtractorKind kind) : kind_(kind) {}
  static FeatureExtractor identity();
  static FeatureExtractor fit_pca_whitening(const Eigen::MatrixXd& reference, int p);

  ExtractorKind kind() const { return kind_; }
  bool fitted() const { return kind_ == ExtractorKind::identity || fitted_; }
  int output_dim() const { return static_cast<int>(projection_.cols()); }

  Eigen::MatrixXd extract(const Eigen::MatrixXd& x) const;
  nlohmann::json describe() const;

 private:
  ExtractorKind kind_ = ExtractorKind::identity;
  bool fitted_ = false;
  Eigen::RowVectorXd mean_;
  Eigen::MatrixXd projection_;  // d x p
};

// An unfitted pca_w extractor raises StateError.
Eigen::MatrixXd feature_extract(const Eigen::MatrixXd& x, const FeatureExtractor& extractor);

// Averaged off-diagonal entry of the min-max normalised absolute scatter
// matrix, restricted to `active`.
double nac(const Eigen::MatrixXd& encodings, const std::vector<int>& active);

struct EvalConfig {
  int eval_samples = 2000;
  int nac_samples = 5000;
  double tau = 0.5;
  MaskMode mask_mode = MaskMode::raw;
  ExtractorKind extractor = ExtractorKind::identity;
  int pca_dim = 64;

  void validate() const;
  nlohmann::json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j);
};

std::vector<int> active_index_set(const ModelBundle& bundle, double tau);

// Deterministic snapshot evaluation. `eval_seed` drives the prior samples and
// loss batches; the real-feature set is the first rows of the dataset.
MetricsRecord evaluate(const ModelBundle& bundle, const Dataset& dataset, const EvalConfig& config,
                       const LossWeights& weights, int batch_size, std::int64_t step,
                       std::uint64_t eval_seed, const FeatureExtractor* extractor = nullptr);

}  // namespace maae
