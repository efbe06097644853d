#include "maae/synthetic_data.hpp"

#include "maae/container.hpp"
#include "maae/errors.hpp"
#include "maae/rng.hpp"

#include <chrono>
#include <cmath>
#include <ctime>

namespace maae {

namespace {

constexpr std::string_view kDatasetMagic = "MAAE-DS1";
constexpr std::uint64_t kDatasetStream = 0x44415441ULL;  // "DATA"

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Eigen::MatrixXd round_to_float(const Eigen::MatrixXd& m) {
  return m.cast<float>().cast<double>();
}

}  // namespace

void GeneratorSpec::validate() const {
  if (n < 1) throw InvalidArgument("generator: n must be >= 1");
  if (k < 1) throw InvalidArgument("generator: k must be >= 1");
  if (d < n) throw InvalidArgument("generator: d must be >= n");
  if (num_hidden_layers < 0) throw InvalidArgument("generator: num_hidden_layers must be >= 0");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
    throw InvalidArgument("generator: leaky_slope must lie in (0, 1)");
  }
  if (weight_scale && !(*weight_scale > 0.0)) {
    throw InvalidArgument("generator: weight_scale must be positive");
  }
  if (!cov_diag.empty()) {
    if (static_cast<int>(cov_diag.size()) != n) {
      throw InvalidArgument("generator: cov_diag must have n entries");
    }
    for (double v : cov_diag) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("generator: cov_diag entries must be > 0");
    }
  }
}

std::vector<double> GeneratorSpec::covariance() const {
  return cov_diag.empty() ? std::vector<double>(static_cast<std::size_t>(n), 1.0) : cov_diag;
}

nlohmann::json GeneratorSpec::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["k"] = k;
  j["d"] = d;
  j["num_hidden_layers"] = num_hidden_layers;
  j["leaky_slope"] = leaky_slope;
  j["weight_scale"] = weight_scale ? nlohmann::json(*weight_scale) : nlohmann::json(nullptr);
  j["cov_diag"] = covariance();
  j["seed"] = seed;
  return j;
}

GeneratorSpec GeneratorSpec::from_json(const nlohmann::json& j) {
  GeneratorSpec s;
  try {
    s.n = j.value("n", s.n);
    s.k = j.value("k", s.k);
    s.d = j.value("d", s.d);
    s.num_hidden_layers = j.value("num_hidden_layers", s.num_hidden_layers);
    s.leaky_slope = j.value("leaky_slope", s.leaky_slope);
    if (j.contains("weight_scale") && !j["weight_scale"].is_null()) {
      s.weight_scale = j["weight_scale"].get<double>();
    }
    if (j.contains("cov_diag")) s.cov_diag = j["cov_diag"].get<std::vector<double>>();
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("generator spec: ") + e.what());
  }
  // An all-ones covariance is the default; keep the canonical form compact.
  bool identity = true;
  for (double v : s.cov_diag) identity = identity && v == 1.0;
  if (identity && static_cast<int>(s.cov_diag.size()) == s.n) s.cov_diag.clear();
  return s;
}

std::string GeneratorSpec::fingerprint() const { return hex64(fnv1a(to_json().dump())); }

GeneratorNetwork GeneratorNetwork::realize(const GeneratorSpec& spec) {
  spec.validate();
  GeneratorNetwork net;
  net.leaky_slope = spec.leaky_slope;
  Rng rng(derive_seed(spec.seed, stream_id("generator-weights")));
  int fan_in = spec.n;
  for (int layer = 0; layer <= spec.num_hidden_layers; ++layer) {
    const int fan_out = layer == spec.num_hidden_layers ? spec.d : spec.k;
    const double stddev = spec.weight_scale.value_or(1.0 / std::sqrt(static_cast<double>(fan_in)));
    net.weights.push_back(normal_matrix(rng, fan_in, fan_out, stddev));
    net.biases.push_back(Eigen::RowVectorXd::Zero(fan_out));
    fan_in = fan_out;
  }
  return net;
}

Eigen::MatrixXd GeneratorNetwork::forward(const Eigen::MatrixXd& latents) const {
  if (latents.cols() != input_dim()) {
    throw ShapeError("generating function expects " + std::to_string(input_dim()) +
                     " latent columns, got " + std::to_string(latents.cols()));
  }
  Eigen::MatrixXd h = latents;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd a = (h * weights[l]).rowwise() + biases[l];
    if (l + 1 < weights.size()) {
      const double slope = leaky_slope;
      a = a.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    }
    h = std::move(a);
  }
  return h;
}

Eigen::MatrixXd sample_true_latent(const GeneratorSpec& spec, Eigen::Index count,
                                   std::uint64_t stream_seed) {
  spec.validate();
  if (count < 1) throw InvalidArgument("sample_true_latent: count must be >= 1");
  Rng rng(derive_seed(spec.seed, stream_seed));
  Eigen::MatrixXd z = normal_matrix(rng, count, spec.n);
  const auto cov = spec.covariance();
  for (int j = 0; j < spec.n; ++j) z.col(j) *= std::sqrt(cov[static_cast<std::size_t>(j)]);
  return z;
}

Eigen::MatrixXd generating_function(const GeneratorSpec& spec, const Eigen::MatrixXd& latents) {
  return GeneratorNetwork::realize(spec).forward(latents);
}

double lipschitz_upper_bound(const GeneratorNetwork& net) {
  double bound = 1.0;
  for (const auto& w : net.weights) {
    if (w.size() == 0) continue;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
    bound *= svd.singularValues()(0);
  }
  // Leaky-ReLU with slope in (0,1) is 1-Lipschitz.
  return bound * std::max(1.0, net.leaky_slope);
}

double lipschitz_upper_bound(const GeneratorSpec& spec) {
  return lipschitz_upper_bound(GeneratorNetwork::realize(spec));
}

Dataset generate_dataset(const GeneratorSpec& spec, Eigen::Index count) {
  spec.validate();
  if (count < 1) throw InvalidArgument("dataset count must be >= 1");
  const auto net = GeneratorNetwork::realize(spec);
  Dataset ds;
  ds.samples = round_to_float(net.forward(sample_true_latent(spec, count, kDatasetStream)));
  if (!ds.samples.allFinite()) throw NumericError("generated dataset contains non-finite values", 0);
  ds.spec_fingerprint = spec.fingerprint();
  ds.spec = spec;
  return ds;
}

Dataset make_dataset(const GeneratorSpec& spec, Eigen::Index count,
                     const std::filesystem::path& path) {
  Dataset ds = generate_dataset(spec, count);
  save_dataset(ds, path);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  if (!dataset.samples.allFinite()) throw InvalidArgument("dataset contains NaN/Inf entries");
  nlohmann::json header;
  header["spec"] = dataset.spec ? dataset.spec->to_json() : nlohmann::json(nullptr);
  header["fingerprint"] = dataset.spec_fingerprint;
  header["count"] = dataset.count();
  header["d"] = dataset.dim();
  header["created"] = utc_timestamp();

  std::vector<std::uint8_t> payload;
  payload.reserve(static_cast<std::size_t>(dataset.samples.size()) * 4);
  for (Eigen::Index i = 0; i < dataset.count(); ++i) {
    for (Eigen::Index j = 0; j < dataset.dim(); ++j) {
      append_f32_le(payload, static_cast<float>(dataset.samples(i, j)));
    }
  }
  write_container(path, kDatasetMagic, header, payload);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const Container c = read_container(path, kDatasetMagic);
  Dataset ds;
  Eigen::Index count = 0;
  Eigen::Index d = 0;
  try {
    count = c.header.at("count").get<Eigen::Index>();
    d = c.header.at("d").get<Eigen::Index>();
    if (c.header.contains("spec") && !c.header["spec"].is_null()) {
      ds.spec = GeneratorSpec::from_json(c.header["spec"]);
    }
    ds.spec_fingerprint = c.header.value("fingerprint", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": malformed header: " + e.what());
  }
  if (count < 0 || d < 1) throw IntegrityError(path.string() + ": bad shape in header");
  const auto expected = static_cast<std::size_t>(count * d) * 4;
  if (c.payload.size() != expected) {
    throw IntegrityError(path.string() + ": payload has " + std::to_string(c.payload.size()) +
                         " bytes, expected " + std::to_string(expected));
  }
  ds.samples.resize(count, d);
  const std::uint8_t* p = c.payload.data();
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < d; ++j, p += 4) ds.samples(i, j) = read_f32_le(p);
  }
  if (!ds.samples.allFinite()) throw IntegrityError(path.string() + ": non-finite samples");
  return ds;
}

Dataset external_dataset(const Eigen::MatrixXd& samples, const std::string& source_tag) {
  if (samples.rows() < 1) throw InvalidArgument("external dataset is empty");
  if (!samples.allFinite()) throw InvalidArgument("external dataset contains NaN/Inf entries");
  Dataset ds;
  ds.samples = round_to_float(samples);
  ds.spec_fingerprint = "external:" + source_tag;
  return ds;
}

}  // namespace maae
