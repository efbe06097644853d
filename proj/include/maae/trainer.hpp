#pragma once

#include "maae/errors.hpp"
#include "maae/losses.hpp"
#include "maae/metrics.hpp"
#include "maae/networks.hpp"
#include "maae/rng.hpp"
#include "maae/synthetic_data.hpp"
#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace maae {

struct RmsPropConfig {
  double eta = 1e-4;
  double rho = 0.9;
  double eps = 1e-8;
};

// Running second-moment accumulators, one per parameter tensor.
struct OptimizerState {
  std::vector<ad::Matrix> accumulators;
  std::int64_t steps = 0;
};

// acc <- rho acc + (1 - rho) g^2;  p <- p - eta g / sqrt(acc + eps).
// A non-finite gradient raises NumericError tagged with `step_index` before
// anything is modified.
void rmsprop_step(std::span<ad::Var> params, std::span<const ad::Matrix> grads, OptimizerState& state,
                  const RmsPropConfig& config, std::int64_t step_index = 0);

struct TrainConfig {
  int training_steps = 20000;
  int ae_training_ratio = 1;
  int disc_training_ratio = 5;
  int batch_size = 64;
  double eta_ae = 1e-4;
  double eta_disc = 1e-4;
  double eta_gen = 1e-4;
  double eta_mask = 1e-3;
  double rmsprop_rho = 0.9;
  double rmsprop_eps = 1e-8;
  int reg_schedule_interval = 2000;
  double lambda3_cap = 1e6;
  LossWeights weights;
  Variant variant = Variant::maskaae;
  int eval_every = 1000;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  bool epoch_batching = false;
  std::uint64_t seed = 1;
  ArchitectureConfig arch;
  EvalConfig eval;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainState {
  ModelBundle bundle;
  OptimizerState ae_opt;
  OptimizerState disc_opt;
  OptimizerState gen_opt;
  OptimizerState mask_opt;
  std::int64_t step = 0;
  double lambda3 = 0.0;
  Rng rng;
  std::int64_t samples_drawn = 0;  // position in the epoch-batching stream
};

// Fresh bundle from config.arch and config.seed.
TrainState initial_state(const TrainConfig& config);
TrainState initial_state(const TrainConfig& config, ModelBundle bundle);

// Single optimizer updates, one per objective. Each moves only its own
// parameter group: (encoder, decoder) for L_ae, the critic for L_dm, the
// encoder for L_gen, and theta for L_mask (a no-op for the WAE baseline).
void ae_update(TrainState& state, const ad::Matrix& x, const LossWeights& weights,
               const RmsPropConfig& config, std::int64_t step);
void disc_update(TrainState& state, const ad::Matrix& x, const ad::Matrix& z_prior,
                 const Eigen::VectorXd& beta1, const LossWeights& weights, const RmsPropConfig& config,
                 std::int64_t step);
void gen_update(TrainState& state, const ad::Matrix& x, const RmsPropConfig& config, std::int64_t step);
void mask_update(TrainState& state, const ad::Matrix& x, const ad::Matrix& z_prior,
                 const LossWeights& weights, const RmsPropConfig& config, std::int64_t step);

// λ3 after `step` completed outer steps.
double lambda3_schedule(const TrainConfig& config, std::int64_t step);

class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_metrics(const MetricsRecord&, const TrainState&) {}
  virtual void on_checkpoint(const TrainState&) {}
  // Called with the state as of the last completed step before rethrowing.
  virtual void on_failure(const TrainState&, const NumericError&) {}
};

// Runs outer steps state.step+1 .. config.training_steps in place and returns
// the metrics emitted along the way.
std::vector<MetricsRecord> train(const TrainConfig& config, const Dataset& dataset, TrainState& state,
                                 TrainObserver* observer = nullptr);

struct TrainResult {
  TrainState state;
  std::vector<MetricsRecord> trace;
};

TrainResult train(const TrainConfig& config, const Dataset& dataset, ModelBundle bundle,
                  TrainObserver* observer = nullptr);

// Bit-exact checkpoint of the full training state (parameters, optimizer
// accumulators, λ3, RNG). Corruption raises IntegrityError on load.
void checkpoint_save(const TrainState& state, const TrainConfig& config,
                     const std::filesystem::path& path);

struct Checkpoint {
  TrainState state;
  nlohmann::json config;
};

Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace maae
