#include "maae/container.hpp"
#include "maae/errors.hpp"
#include "maae/trainer.hpp"

#include <map>

namespace maae {

namespace {

constexpr std::string_view kCheckpointMagic = "MAAE-CK1";

struct Blob {
  std::string name;
  const ad::Matrix* value;
};

void append_optimizer(std::vector<Blob>& blobs, nlohmann::json& meta, const std::string& name,
                      const OptimizerState& opt) {
  meta[name] = {{"steps", opt.steps}, {"tensors", opt.accumulators.size()}};
  for (std::size_t i = 0; i < opt.accumulators.size(); ++i) {
    blobs.push_back({"opt." + name + "." + std::to_string(i), &opt.accumulators[i]});
  }
}

}  // namespace

void checkpoint_save(const TrainState& state, const TrainConfig& config,
                     const std::filesystem::path& path) {
  std::vector<Blob> blobs;
  const auto named = state.bundle.named_parameters();
  for (const auto& [name, var] : named) blobs.push_back({name, &var.value()});

  nlohmann::json optimizers;
  append_optimizer(blobs, optimizers, "ae", state.ae_opt);
  append_optimizer(blobs, optimizers, "disc", state.disc_opt);
  append_optimizer(blobs, optimizers, "gen", state.gen_opt);
  append_optimizer(blobs, optimizers, "mask", state.mask_opt);

  std::vector<std::uint8_t> payload;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& blob : blobs) {
    const ad::Matrix& v = *blob.value;
    tensors.push_back({{"name", blob.name}, {"rows", v.rows()}, {"cols", v.cols()}, {"offset", payload.size()}});
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) append_f64_le(payload, v(r, c));
  }

  const std::string_view bytes(reinterpret_cast<const char*>(payload.data()), payload.size());
  nlohmann::json header;
  header["format"] = "maae-checkpoint";
  header["dtype"] = "float64-le";
  header["step"] = state.step;
  header["variant"] = to_string(state.bundle.variant);
  header["lambda3"] = state.lambda3;
  header["samples_drawn"] = state.samples_drawn;
  header["rng_state"] = rng_state_to_string(state.rng);
  header["networks"] = {{"encoder", state.bundle.encoder.config().to_json()},
                        {"decoder", state.bundle.decoder.config().to_json()},
                        {"discriminator", state.bundle.discriminator.config().to_json()}};
  header["optimizers"] = optimizers;
  header["tensors"] = tensors;
  header["config"] = config.to_json();
  header["payload_bytes"] = payload.size();
  header["payload_fnv1a"] = hex64(fnv1a(bytes));
  write_container(path, kCheckpointMagic, header, payload);
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  const Container c = read_container(path, kCheckpointMagic);
  const auto& h = c.header;
  try {
    if (h.at("payload_bytes").get<std::size_t>() != c.payload.size()) {
      throw IntegrityError(path.string() + ": payload truncated or padded");
    }
    const std::string_view bytes(reinterpret_cast<const char*>(c.payload.data()), c.payload.size());
    if (h.at("payload_fnv1a").get<std::string>() != hex64(fnv1a(bytes))) {
      throw IntegrityError(path.string() + ": payload checksum mismatch");
    }

    Checkpoint ck;
    TrainState& st = ck.state;
    ck.config = h.at("config");
    st.step = h.at("step").get<std::int64_t>();
    st.lambda3 = h.at("lambda3").get<double>();
    st.samples_drawn = h.at("samples_drawn").get<std::int64_t>();
    st.rng = rng_state_from_string(h.at("rng_state").get<std::string>());

    ModelBundle& b = st.bundle;
    b.variant = variant_from_string(h.at("variant").get<std::string>());
    b.encoder = Mlp(MlpConfig::from_json(h.at("networks").at("encoder")), 0);
    b.decoder = Mlp(MlpConfig::from_json(h.at("networks").at("decoder")), 0);
    b.discriminator = Mlp(MlpConfig::from_json(h.at("networks").at("discriminator")), 0);
    b.mask = MaskState(ad::RowVector::Zero(b.latent_dim()), b.variant == Variant::maskaae);

    std::map<std::string, ad::Matrix> tensors;
    for (const auto& t : h.at("tensors")) {
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset + static_cast<std::size_t>(rows * cols) * 8 > c.payload.size()) {
        throw IntegrityError(path.string() + ": tensor extends past payload");
      }
      ad::Matrix v(rows, cols);
      const std::uint8_t* p = c.payload.data() + offset;
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index col = 0; col < cols; ++col, p += 8) v(r, col) = read_f64_le(p);
      tensors.emplace(t.at("name").get<std::string>(), std::move(v));
    }

    auto take = [&](const std::string& name) -> ad::Matrix& {
      auto it = tensors.find(name);
      if (it == tensors.end()) throw IntegrityError(path.string() + ": missing tensor " + name);
      return it->second;
    };
    for (auto& [name, var] : b.named_parameters()) {
      ad::Var target = var;
      ad::Matrix& v = take(name);
      if (v.rows() != target.rows() || v.cols() != target.cols()) {
        throw IntegrityError(path.string() + ": tensor " + name + " has the wrong shape");
      }
      target.mutable_value() = v;
    }
    auto load_opt = [&](const std::string& name, OptimizerState& opt) {
      const auto& meta = h.at("optimizers").at(name);
      opt.steps = meta.at("steps").get<std::int64_t>();
      const auto n = meta.at("tensors").get<std::size_t>();
      for (std::size_t i = 0; i < n; ++i) opt.accumulators.push_back(take("opt." + name + "." + std::to_string(i)));
    };
    load_opt("ae", st.ae_opt);
    load_opt("disc", st.disc_opt);
    load_opt("gen", st.gen_opt);
    load_opt("mask", st.mask_opt);
    b.validate();
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": malformed checkpoint header: " + e.what());
  } catch (const ShapeError& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

}  // namespace maae
