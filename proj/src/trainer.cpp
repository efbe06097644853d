#include "maae/trainer.hpp"

#include "maae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace maae {

namespace {

std::vector<ad::Matrix> values_of(const std::vector<ad::Var>& grads) {
  std::vector<ad::Matrix> out;
  out.reserve(grads.size());
  for (const auto& g : grads) out.push_back(g.value());
  return out;
}

std::vector<ad::Var> concat(std::vector<ad::Var> a, const std::vector<ad::Var>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Draws minibatches either uniformly with replacement or by walking
// per-epoch permutations.
class BatchSampler {
 public:
  BatchSampler(const Dataset& dataset, const TrainConfig& config, TrainState& state)
      : dataset_(dataset), config_(config), state_(state) {}

  ad::Matrix next() {
    const int s = config_.batch_size;
    ad::Matrix x(s, dataset_.dim());
    if (!config_.epoch_batching) {
      std::uniform_int_distribution<Eigen::Index> pick(0, dataset_.count() - 1);
      for (int i = 0; i < s; ++i) x.row(i) = dataset_.samples.row(pick(state_.rng));
      return x;
    }
    const auto count = dataset_.count();
    for (int i = 0; i < s; ++i, ++state_.samples_drawn) {
      const std::int64_t epoch = state_.samples_drawn / count;
      if (epoch != cached_epoch_) {
        order_.resize(static_cast<std::size_t>(count));
        std::iota(order_.begin(), order_.end(), Eigen::Index{0});
        Rng perm_rng(derive_seed(config_.seed, stream_id("epoch") + static_cast<std::uint64_t>(epoch)));
        std::shuffle(order_.begin(), order_.end(), perm_rng);
        cached_epoch_ = epoch;
      }
      x.row(i) = dataset_.samples.row(order_[static_cast<std::size_t>(state_.samples_drawn % count)]);
    }
    return x;
  }

 private:
  const Dataset& dataset_;
  const TrainConfig& config_;
  TrainState& state_;
  std::vector<Eigen::Index> order_;
  std::int64_t cached_epoch_ = -1;
};

}  // namespace

void rmsprop_step(std::span<ad::Var> params, std::span<const ad::Matrix> grads, OptimizerState& state,
                  const RmsPropConfig& config, std::int64_t step_index) {
  if (params.size() != grads.size()) throw ShapeError("rmsprop: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols()) {
      throw ShapeError("rmsprop: gradient shape differs from parameter shape");
    }
    if (!grads[i].allFinite()) throw NumericError("non-finite gradient", step_index);
  }
  if (state.accumulators.empty()) {
    for (const auto& p : params) state.accumulators.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
  }
  if (state.accumulators.size() != params.size()) throw ShapeError("rmsprop: optimizer state mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& acc = state.accumulators[i];
    if (acc.rows() != params[i].rows() || acc.cols() != params[i].cols()) {
      throw ShapeError("rmsprop: accumulator shape differs from parameter shape");
    }
    acc = config.rho * acc + (1.0 - config.rho) * grads[i].cwiseAbs2();
    params[i].mutable_value().array() -=
        config.eta * grads[i].array() / (acc.array() + config.eps).sqrt();
  }
  ++state.steps;
}

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::validate() const {
  if (training_steps < 0) throw InvalidArgument("training_steps must be >= 0");
  if (ae_training_ratio < 1 || disc_training_ratio < 1) throw InvalidArgument("training ratios must be >= 1");
  if (batch_size < 2) throw InvalidArgument("batch_size must be >= 2");
  for (double eta : {eta_ae, eta_disc, eta_gen, eta_mask}) {
    if (!(eta > 0.0)) throw InvalidArgument("learning rates must be > 0");
  }
  if (!(rmsprop_rho > 0.0 && rmsprop_rho < 1.0)) throw InvalidArgument("rmsprop_rho must lie in (0, 1)");
  if (!(rmsprop_eps > 0.0)) throw InvalidArgument("rmsprop_eps must be > 0");
  if (reg_schedule_interval < 1) throw InvalidArgument("reg_schedule_interval must be >= 1");
  if (!(lambda3_cap > 0.0)) throw InvalidArgument("lambda3_cap must be > 0");
  if (eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
  if (checkpoint_every < 0) throw InvalidArgument("checkpoint_every must be >= 0");
  weights.validate();
  arch.validate();
  eval.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"training_steps", training_steps},
          {"ae_training_ratio", ae_training_ratio},
          {"disc_training_ratio", disc_training_ratio},
          {"batch_size", batch_size},
          {"eta_ae", eta_ae},
          {"eta_disc", eta_disc},
          {"eta_gen", eta_gen},
          {"eta_mask", eta_mask},
          {"rmsprop_rho", rmsprop_rho},
          {"rmsprop_eps", rmsprop_eps},
          {"reg_schedule_interval", reg_schedule_interval},
          {"lambda3_cap", lambda3_cap},
          {"weights", weights.to_json()},
          {"variant", to_string(variant)},
          {"eval_every", eval_every},
          {"checkpoint_every", checkpoint_every},
          {"epoch_batching", epoch_batching},
          {"seed", seed},
          {"arch", arch.to_json()},
          {"eval", eval.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.training_steps = j.value("training_steps", c.training_steps);
    c.ae_training_ratio = j.value("ae_training_ratio", c.ae_training_ratio);
    c.disc_training_ratio = j.value("disc_training_ratio", c.disc_training_ratio);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.eta_ae = j.value("eta_ae", c.eta_ae);
    c.eta_disc = j.value("eta_disc", c.eta_disc);
    c.eta_gen = j.value("eta_gen", c.eta_gen);
    c.eta_mask = j.value("eta_mask", c.eta_mask);
    c.rmsprop_rho = j.value("rmsprop_rho", c.rmsprop_rho);
    c.rmsprop_eps = j.value("rmsprop_eps", c.rmsprop_eps);
    c.reg_schedule_interval = j.value("reg_schedule_interval", c.reg_schedule_interval);
    c.lambda3_cap = j.value("lambda3_cap", c.lambda3_cap);
    if (j.contains("weights")) c.weights = LossWeights::from_json(j["weights"]);
    if (j.contains("variant")) c.variant = variant_from_string(j["variant"].get<std::string>());
    c.eval_every = j.value("eval_every", c.eval_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.epoch_batching = j.value("epoch_batching", c.epoch_batching);
    c.seed = j.value("seed", c.seed);
    if (j.contains("arch")) c.arch = ArchitectureConfig::from_json(j["arch"]);
    if (j.contains("eval")) c.eval = EvalConfig::from_json(j["eval"]);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("train config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Training

TrainState initial_state(const TrainConfig& config) {
  return initial_state(config, ModelBundle::create(config.arch, config.variant, config.seed));
}

TrainState initial_state(const TrainConfig& config, ModelBundle bundle) {
  TrainState state;
  state.bundle = std::move(bundle);
  state.lambda3 = config.weights.lambda3_or_default(state.bundle.latent_dim());
  state.rng = Rng(derive_seed(config.seed, stream_id("train")));
  return state;
}

void ae_update(TrainState& state, const ad::Matrix& x, const LossWeights& weights,
               const RmsPropConfig& config, std::int64_t step) {
  auto params = concat(state.bundle.encoder_parameters(), state.bundle.decoder_parameters());
  const auto grads = values_of(ad::grad(loss_ae(x, state.bundle, weights), params));
  rmsprop_step(params, grads, state.ae_opt, config, step);
}

void disc_update(TrainState& state, const ad::Matrix& x, const ad::Matrix& z_prior,
                 const Eigen::VectorXd& beta1, const LossWeights& weights, const RmsPropConfig& config,
                 std::int64_t step) {
  auto params = state.bundle.discriminator_parameters();
  const auto grads = values_of(ad::grad(loss_dm(x, z_prior, beta1, state.bundle, weights), params));
  rmsprop_step(params, grads, state.disc_opt, config, step);
}

void gen_update(TrainState& state, const ad::Matrix& x, const RmsPropConfig& config, std::int64_t step) {
  auto params = state.bundle.encoder_parameters();
  const auto grads = values_of(ad::grad(loss_gen(x, state.bundle), params));
  rmsprop_step(params, grads, state.gen_opt, config, step);
}

void mask_update(TrainState& state, const ad::Matrix& x, const ad::Matrix& z_prior,
                 const LossWeights& weights, const RmsPropConfig& config, std::int64_t step) {
  if (state.bundle.variant != Variant::maskaae) return;
  auto params = state.bundle.mask_parameters();
  const auto grads = values_of(ad::grad(loss_mask(x, z_prior, state.bundle, weights), params));
  rmsprop_step(params, grads, state.mask_opt, config, step);
}

double lambda3_schedule(const TrainConfig& config, std::int64_t step) {
  double lambda3 = config.weights.lambda3_or_default(config.arch.latent_dim);
  for (std::int64_t i = 1; i <= step; ++i) {
    if (i % config.reg_schedule_interval == 0) lambda3 = std::min(lambda3 * 2.0, config.lambda3_cap);
  }
  return lambda3;
}

std::vector<MetricsRecord> train(const TrainConfig& config, const Dataset& dataset, TrainState& state,
                                 TrainObserver* observer) {
  config.validate();
  ModelBundle& bundle = state.bundle;
  bundle.validate();
  if (dataset.dim() != bundle.data_dim()) {
    throw InvalidArgument("dataset dimension " + std::to_string(dataset.dim()) +
                          " differs from encoder input " + std::to_string(bundle.data_dim()));
  }
  if (bundle.variant != config.variant) throw InvalidArgument("bundle variant differs from config variant");
  if (dataset.count() < 1) throw InvalidArgument("dataset is empty");

  std::vector<MetricsRecord> trace;
  if (state.step >= config.training_steps) return trace;

  const int m = bundle.latent_dim();
  const int s = config.batch_size;
  FeatureExtractor extractor = FeatureExtractor::identity();
  if (config.eval.extractor == ExtractorKind::pca_w) {
    const Eigen::Index rows = std::min<Eigen::Index>(dataset.count(), 10000);
    extractor = FeatureExtractor::fit_pca_whitening(dataset.samples.topRows(rows), config.eval.pca_dim);
  }

  const RmsPropConfig ae_cfg{config.eta_ae, config.rmsprop_rho, config.rmsprop_eps};
  const RmsPropConfig disc_cfg{config.eta_disc, config.rmsprop_rho, config.rmsprop_eps};
  const RmsPropConfig gen_cfg{config.eta_gen, config.rmsprop_rho, config.rmsprop_eps};
  const RmsPropConfig mask_cfg{config.eta_mask, config.rmsprop_rho, config.rmsprop_eps};
  const std::uint64_t eval_stream = derive_seed(config.seed, stream_id("eval"));

  BatchSampler sampler(dataset, config, state);
  LossWeights weights = config.weights;
  TrainState last_good = state;

  for (std::int64_t i = state.step + 1; i <= config.training_steps; ++i) {
    try {
      for (int j = 0; j < config.ae_training_ratio; ++j) ae_update(state, sampler.next(), weights, ae_cfg, i);

      for (int j = 0; j < config.disc_training_ratio; ++j) {
        const ad::Matrix x = sampler.next();
        const ad::Matrix z = normal_matrix(state.rng, s, m);
        const Eigen::VectorXd beta1 = uniform_matrix(state.rng, s, 1).col(0);
        disc_update(state, x, z, beta1, weights, disc_cfg, i);
      }

      gen_update(state, sampler.next(), gen_cfg, i);

      if (i % config.reg_schedule_interval == 0) {
        state.lambda3 = std::min(state.lambda3 * 2.0, config.lambda3_cap);
      }

      if (bundle.variant == Variant::maskaae) {
        weights.lambda3 = state.lambda3;
        const ad::Matrix x = sampler.next();
        const ad::Matrix z = normal_matrix(state.rng, s, m);
        mask_update(state, x, z, weights, mask_cfg, i);
      }
      for (const auto& [name, p] : bundle.named_parameters()) {
        if (!p.value().allFinite()) throw NumericError("parameter " + name + " became non-finite", i);
      }
    } catch (const NumericError& e) {
      if (observer) observer->on_failure(last_good, e);
      throw;
    }
    state.step = i;

    if (i % config.eval_every == 0 || i == config.training_steps) {
      weights.lambda3 = state.lambda3;
      MetricsRecord rec = evaluate(bundle, dataset, config.eval, weights, s, i,
                                   derive_seed(eval_stream, static_cast<std::uint64_t>(i)), &extractor);
      if (observer) observer->on_metrics(rec, state);
      trace.push_back(std::move(rec));
    }
    if (observer && config.checkpoint_every > 0 && i % config.checkpoint_every == 0) {
      observer->on_checkpoint(state);
    }
    if (observer) last_good = state;
  }
  return trace;
}

TrainResult train(const TrainConfig& config, const Dataset& dataset, ModelBundle bundle,
                  TrainObserver* observer) {
  TrainResult result{initial_state(config, std::move(bundle)), {}};
  result.trace = train(config, dataset, result.state, observer);
  return result;
}

}  // namespace maae
