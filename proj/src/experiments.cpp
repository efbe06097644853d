#include "maae/experiments.hpp"

#include "maae/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace fs = std::filesystem;

namespace maae {

// ---------------------------------------------------------------------------
// Presets

Preset preset(const std::string& name) {
  Preset p;
  p.name = name;
  p.data.n = 8;
  p.data.k = 128;
  p.data.d = 128;
  p.data.seed = 7;
  p.samples = 20000;
  p.train.training_steps = 20000;
  p.train.eval_every = 1000;
  if (name == "synthetic8-desk") {
    p.train.arch.encoder_hidden = p.train.arch.decoder_hidden = p.train.arch.discriminator_hidden = {256, 256, 256};
  } else if (name == "synthetic16-desk") {
    p.data.n = 16;
    p.train.arch.latent_dim = 32;
    p.train.arch.encoder_hidden = p.train.arch.decoder_hidden = p.train.arch.discriminator_hidden = {256, 256, 256};
  } else if (name == "synthetic8-paper" || name == "paper-synthetic") {
    p.samples = 50000;
    p.train.training_steps = 100000;
    p.train.eval_every = 5000;
    p.train.arch.encoder_hidden = p.train.arch.decoder_hidden = p.train.arch.discriminator_hidden =
        std::vector<int>(5, 1000);
  } else if (name == "synthetic8-acceptance") {
    p.train.arch.encoder_hidden = p.train.arch.decoder_hidden = p.train.arch.discriminator_hidden = {128, 128, 128};
  } else if (name == "synthetic8-quick") {
    p.train.training_steps = 2000;
    p.train.eval_every = 500;
    p.train.arch.encoder_hidden = p.train.arch.decoder_hidden = p.train.arch.discriminator_hidden = {64, 64, 64};
  } else {
    throw InvalidArgument("unknown preset '" + name + "'");
  }
  if (name.ends_with("-desk") || name == "synthetic8-acceptance") {
    // At 3-layer widths the default mask rate drives every gate below 0.5
    // before the polarization weight grows; slower gates with a faster
    // lambda3 schedule keep the surviving dims and polarize them.
    p.train.eta_mask = 5e-4;
    p.train.reg_schedule_interval = 1000;
  }
  return p;
}

std::vector<std::string> preset_names() {
  return {"synthetic8-desk", "synthetic16-desk", "synthetic8-paper", "paper-synthetic", "synthetic8-acceptance",
          "synthetic8-quick"};
}

// ---------------------------------------------------------------------------
// Files

fs::path runs_root() {
  if (const char* env = std::getenv("MAAE_RUNS_DIR"); env && *env) return fs::path(env);
  return fs::path("runs");
}

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Shortest round-trip decimal form; identical doubles give identical bytes.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InvalidArgument("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fs::path checkpoint_dir(const fs::path& run_dir) { return run_dir / "checkpoints"; }

fs::path checkpoint_path(const fs::path& run_dir, std::int64_t step) {
  return checkpoint_dir(run_dir) / ("step_" + std::to_string(step) + ".ckpt");
}

std::optional<std::pair<std::int64_t, fs::path>> newest_checkpoint(const fs::path& run_dir) {
  std::optional<std::pair<std::int64_t, fs::path>> best;
  if (!fs::is_directory(checkpoint_dir(run_dir))) return best;
  static const std::regex pattern(R"(step_(\d+)\.ckpt)");
  for (const auto& entry : fs::directory_iterator(checkpoint_dir(run_dir))) {
    std::smatch match;
    const std::string fname = entry.path().filename().string();
    if (!std::regex_match(fname, match, pattern)) continue;
    const std::int64_t step = std::stoll(match[1].str());
    if (!best || step > best->first) best = {step, entry.path()};
  }
  return best;
}

std::string mask_trace_header(int m) {
  std::string h = "step";
  for (int j = 0; j < m; ++j) h += ",mu_" + std::to_string(j);
  return h + "\n";
}

std::string mask_trace_line(const MetricsRecord& r) {
  std::string line = std::to_string(r.step);
  for (Eigen::Index j = 0; j < r.mu.size(); ++j) line += "," + fmt(r.mu(j));
  return line + "\n";
}

// Drops lines whose step exceeds `max_step` so a resumed run appends cleanly.
void truncate_metrics(const fs::path& run_dir, std::int64_t max_step, int m) {
  std::string metrics, trace = mask_trace_header(m);
  if (fs::exists(run_dir / "metrics.jsonl")) {
    // An interrupted run can leave a torn last line; anything unparsable or
    // past the checkpoint is dropped.
    std::stringstream lines(read_text_file(run_dir / "metrics.jsonl"));
    std::string line;
    while (std::getline(lines, line)) {
      MetricsRecord rec;
      try {
        rec = MetricsRecord::from_json(nlohmann::json::parse(line));
      } catch (const std::exception&) {
        continue;
      }
      if (rec.step > max_step) continue;
      metrics += rec.to_jsonl() + "\n";
      trace += mask_trace_line(rec);
    }
  }
  write_text_file(run_dir / "metrics.jsonl", metrics);
  write_text_file(run_dir / "mask_trace.csv", trace);
}

class RunObserver : public TrainObserver {
 public:
  RunObserver(const fs::path& dir, const TrainConfig& config) : dir_(dir), config_(config) {
    metrics_.open(dir / "metrics.jsonl", std::ios::binary | std::ios::app);
    trace_.open(dir / "mask_trace.csv", std::ios::binary | std::ios::app);
    if (!metrics_ || !trace_) throw IoError("cannot open metrics files in " + dir.string());
  }

  void on_metrics(const MetricsRecord& r, const TrainState&) override {
    metrics_ << r.to_jsonl() << "\n";
    metrics_.flush();
    trace_ << mask_trace_line(r);
    trace_.flush();
  }

  void on_checkpoint(const TrainState& state) override {
    checkpoint_save(state, config_, checkpoint_path(dir_, state.step));
  }

  void on_failure(const TrainState& last_good, const NumericError&) override {
    checkpoint_save(last_good, config_, checkpoint_path(dir_, last_good.step));
  }

 private:
  fs::path dir_;
  const TrainConfig& config_;
  std::ofstream metrics_;
  std::ofstream trace_;
};

}  // namespace

void write_json_file(const fs::path& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IntegrityError(path.string() + ": invalid JSON: " + e.what());
  }
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::completed: return "completed";
    case RunStatus::failed: return "failed";
  }
  return "running";
}

RunStatus run_status_from_string(const std::string& s) {
  if (s == "running") return RunStatus::running;
  if (s == "completed") return RunStatus::completed;
  if (s == "failed") return RunStatus::failed;
  throw InvalidArgument("unknown run status '" + s + "'");
}

std::vector<MetricsRecord> read_metrics(const fs::path& jsonl) {
  std::ifstream in(jsonl, std::ios::binary);
  if (!in) throw IoError("cannot read " + jsonl.string());
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(MetricsRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError(jsonl.string() + ": malformed metrics line: " + e.what());
    }
  }
  return out;
}

RunRecord load_run(const fs::path& run_dir) {
  RunRecord r;
  r.dir = run_dir;
  r.manifest = read_json_file(run_dir / "manifest.json");
  r.status = run_status_from_string(r.manifest.value("status", "running"));
  if (fs::exists(run_dir / "metrics.jsonl")) {
    auto trace = read_metrics(run_dir / "metrics.jsonl");
    if (!trace.empty()) r.final_record = trace.back();
  }
  return r;
}

RunOutcome run_training(const TrainConfig& config, const Dataset& dataset, const fs::path& run_dir,
                        const RunOptions& options) {
  config.validate();
  RunOutcome outcome;
  const fs::path manifest_path = run_dir / "manifest.json";

  double previous_wall = 0.0;
  if (fs::exists(manifest_path)) {
    const nlohmann::json existing = read_json_file(manifest_path);
    previous_wall = existing.value("wall_seconds", 0.0);
    if (run_status_from_string(existing.value("status", "running")) == RunStatus::completed) {
      outcome.status = RunStatus::completed;
      outcome.final_record = load_run(run_dir).final_record;
      outcome.wall_seconds = previous_wall;
      return outcome;
    }
  }

  fs::create_directories(checkpoint_dir(run_dir));
  nlohmann::json manifest = {
      {"status", to_string(RunStatus::running)},
      {"config", config.to_json()},
      {"dataset", {{"fingerprint", dataset.spec_fingerprint}, {"count", dataset.count()}, {"d", dataset.dim()}}},
      {"started_at", utc_now()},
  };
  if (dataset.spec) manifest["dataset"]["spec"] = dataset.spec->to_json();
  for (const auto& [k, v] : options.manifest_extra.items()) manifest[k] = v;

  TrainState state;
  const auto ckpt = options.resume ? newest_checkpoint(run_dir) : std::nullopt;
  if (ckpt) {
    Checkpoint loaded = checkpoint_load(ckpt->second);
    state = std::move(loaded.state);
    manifest["resumed_from_step"] = state.step;
    manifest["previous_wall_seconds"] = previous_wall;
  } else {
    state = initial_state(config);
  }
  if (state.bundle.data_dim() != dataset.dim()) {
    throw InvalidArgument("dataset dimension " + std::to_string(dataset.dim()) + " differs from encoder input " +
                          std::to_string(state.bundle.data_dim()));
  }
  truncate_metrics(run_dir, state.step, state.bundle.latent_dim());
  write_json_file(manifest_path, manifest);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<MetricsRecord> trace;
  try {
    RunObserver observer(run_dir, config);
    trace = train(config, dataset, state, &observer);
    checkpoint_save(state, config, checkpoint_path(run_dir, state.step));
    outcome.status = RunStatus::completed;
  } catch (const NumericError& e) {
    outcome.status = RunStatus::failed;
    outcome.error = e.what();
    outcome.exit_code = 3;
  }
  outcome.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const RunRecord after = load_run(run_dir);
  outcome.final_record = after.final_record;
  manifest["status"] = to_string(outcome.status);
  manifest["finished_at"] = utc_now();
  manifest["wall_seconds"] = outcome.wall_seconds + manifest.value("previous_wall_seconds", 0.0);
  if (!outcome.error.empty()) manifest["error"] = outcome.error;
  if (outcome.final_record) manifest["final"] = outcome.final_record->to_json();
  write_json_file(manifest_path, manifest);
  outcome.wall_seconds = manifest["wall_seconds"].get<double>();
  return outcome;
}

// ---------------------------------------------------------------------------
// Sweeps

void SweepSpec::validate() const {
  if (m_values.empty()) throw InvalidArgument("sweep: m_values must be nonempty");
  for (int m : m_values) {
    if (m < 1) throw InvalidArgument("sweep: every m must be >= 1");
  }
  if (variants.empty()) throw InvalidArgument("sweep: variants must be nonempty");
  if (repeats < 1) throw InvalidArgument("sweep: repeats must be >= 1");
  if (jobs < 1) throw InvalidArgument("sweep: jobs must be >= 1");
  if (output_dir.empty()) throw InvalidArgument("sweep: output_dir must be set");
  base.validate();
}

nlohmann::json SweepSpec::to_json() const {
  nlohmann::json vs = nlohmann::json::array();
  for (Variant v : variants) vs.push_back(to_string(v));
  return {{"dataset", dataset.string()}, {"variants", vs},          {"m_values", m_values},
          {"base", base.to_json()},      {"repeats", repeats},      {"output_dir", output_dir.string()},
          {"jobs", jobs}};
}

SweepSpec SweepSpec::from_json(const nlohmann::json& j) {
  SweepSpec s;
  try {
    s.dataset = j.value("dataset", std::string());
    if (j.contains("variants")) {
      s.variants.clear();
      for (const auto& v : j["variants"]) s.variants.push_back(variant_from_string(v.get<std::string>()));
    }
    s.m_values = j.value("m_values", s.m_values);
    if (j.contains("base")) s.base = TrainConfig::from_json(j["base"]);
    s.repeats = j.value("repeats", s.repeats);
    s.output_dir = j.value("output_dir", std::string());
    s.jobs = j.value("jobs", s.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("sweep spec: ") + e.what());
  }
  return s;
}

std::uint64_t sweep_cell_seed(std::uint64_t base_seed, int repeat) {
  return derive_seed(base_seed, stream_id("repeat") + static_cast<std::uint64_t>(repeat));
}

std::string sweep_cell_name(Variant v, int m, int repeat) {
  return to_string(v) + "_m" + std::to_string(m) + "_r" + std::to_string(repeat);
}

namespace {

struct Cell {
  Variant variant;
  int m;
  int repeat;
};

std::vector<Cell> sweep_cells(const SweepSpec& spec) {
  std::vector<Cell> cells;
  for (Variant v : spec.variants)
    for (int m : spec.m_values)
      for (int r = 0; r < spec.repeats; ++r) cells.push_back({v, m, r});
  return cells;
}

TrainConfig cell_config(const SweepSpec& spec, const Cell& cell) {
  TrainConfig c = spec.base;
  c.variant = cell.variant;
  c.arch.latent_dim = cell.m;
  c.seed = sweep_cell_seed(spec.base.seed, cell.repeat);
  return c;
}

SweepRow row_from(const Cell& cell, const RunOutcome& outcome) {
  SweepRow row;
  row.variant = to_string(cell.variant);
  row.m = cell.m;
  row.repeat = cell.repeat;
  row.wall_seconds = outcome.wall_seconds;
  row.failed = outcome.status != RunStatus::completed || !outcome.final_record;
  if (row.failed) {
    row.final_frechet = row.final_nac = std::nan("");
    row.m_A = -1;
  } else {
    row.final_frechet = outcome.final_record->frechet;
    row.final_nac = outcome.final_record->nac;
    row.m_A = outcome.final_record->m_A;
  }
  return row;
}

bool row_less(const SweepRow& a, const SweepRow& b) {
  return std::tie(a.variant, a.m, a.repeat) < std::tie(b.variant, b.m, b.repeat);
}

}  // namespace

SweepSummary run_sweep(const SweepSpec& spec, const Dataset& dataset) {
  spec.validate();
  fs::create_directories(spec.output_dir);
  write_json_file(spec.output_dir / "sweep.json", spec.to_json());

  const std::vector<Cell> cells = sweep_cells(spec);
  std::vector<SweepRow> rows(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      const std::string name = sweep_cell_name(cell.variant, cell.m, cell.repeat);
      RunOutcome outcome;
      try {
        RunOptions options;
        options.manifest_extra = {{"sweep_cell", {{"variant", to_string(cell.variant)},
                                                  {"m", cell.m},
                                                  {"repeat", cell.repeat}}}};
        outcome = run_training(cell_config(spec, cell), dataset, spec.output_dir / name, options);
      } catch (const std::exception& e) {
        outcome.status = RunStatus::failed;
        outcome.error = e.what();
        try {
          const fs::path manifest = spec.output_dir / name / "manifest.json";
          nlohmann::json j = fs::exists(manifest) ? read_json_file(manifest) : nlohmann::json::object();
          j["status"] = to_string(RunStatus::failed);
          j["error"] = outcome.error;
          write_json_file(manifest, j);
        } catch (const std::exception&) {
        }
      }
      rows[i] = row_from(cell, outcome);
      if (rows[i].failed) {
        errors[i] = outcome.error.empty() ? "no metrics recorded" : outcome.error;
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "sweep cell " << name << " failed: " << errors[i] << "\n";
      }
    }
  };

  const int jobs = std::min<int>(spec.jobs, static_cast<int>(cells.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepSummary summary;
  summary.rows = rows;
  std::sort(summary.rows.begin(), summary.rows.end(), row_less);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (rows[i].failed) summary.failed_cells.push_back(sweep_cell_name(cells[i].variant, cells[i].m, cells[i].repeat));
  }
  std::sort(summary.failed_cells.begin(), summary.failed_cells.end());
  write_text_file(spec.output_dir / "sweep_summary.csv", sweep_summary_csv(summary.rows));
  return summary;
}

SweepSummary run_sweep(const SweepSpec& spec) {
  if (spec.dataset.empty()) throw InvalidArgument("sweep: dataset path must be set");
  return run_sweep(spec, load_dataset(spec.dataset));
}

std::string sweep_summary_csv(const std::vector<SweepRow>& rows) {
  std::string out = "variant,m,repeat,final_frechet,final_nac,m_A,wall_seconds\n";
  for (const auto& r : rows) {
    out += r.variant + "," + std::to_string(r.m) + "," + std::to_string(r.repeat) + "," + fmt(r.final_frechet) +
           "," + fmt(r.final_nac) + "," + std::to_string(r.m_A) + "," + fmt(r.wall_seconds) + "\n";
  }
  return out;
}

std::vector<SweepRow> read_sweep_summary(const fs::path& csv) {
  std::istringstream in(read_text_file(csv));
  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) != std::vector<std::string>{"variant", "m", "repeat", "final_frechet", "final_nac",
                                                       "m_A", "wall_seconds"}) {
    throw IntegrityError(csv.string() + ": unexpected sweep summary header");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw IntegrityError(csv.string() + ": malformed row '" + line + "'");
    try {
      SweepRow r;
      r.variant = f[0];
      r.m = std::stoi(f[1]);
      r.repeat = std::stoi(f[2]);
      r.final_frechet = parse_double(f[3]);
      r.final_nac = parse_double(f[4]);
      r.m_A = std::stoi(f[5]);
      r.wall_seconds = parse_double(f[6]);
      r.failed = r.m_A < 0;
      rows.push_back(r);
    } catch (const std::exception&) {
      throw IntegrityError(csv.string() + ": malformed row '" + line + "'");
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Exports

std::vector<UCurvePoint> ucurve_points(const std::vector<SweepRow>& rows) {
  std::map<std::pair<int, std::string>, std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) {
    if (!r.failed) groups[{r.m, r.variant}].push_back(&r);
  }
  std::vector<UCurvePoint> points;
  for (const auto& [key, members] : groups) {
    std::vector<double> f, ma;
    for (const SweepRow* r : members) {
      f.push_back(r->final_frechet);
      ma.push_back(r->m_A);
    }
    UCurvePoint p;
    p.m = key.first;
    p.variant = key.second;
    p.repeats = static_cast<int>(members.size());
    p.median_frechet = median(f);
    p.min_frechet = *std::min_element(f.begin(), f.end());
    p.max_frechet = *std::max_element(f.begin(), f.end());
    p.median_m_A = median(ma);
    points.push_back(p);
  }
  return points;
}

std::string ucurve_csv(const std::vector<UCurvePoint>& points) {
  std::string out = "variant,m,repeats,median_frechet,min_frechet,max_frechet,median_m_A\n";
  for (const auto& p : points) {
    out += p.variant + "," + std::to_string(p.m) + "," + std::to_string(p.repeats) + "," + fmt(p.median_frechet) +
           "," + fmt(p.min_frechet) + "," + fmt(p.max_frechet) + "," + fmt(p.median_m_A) + "\n";
  }
  return out;
}

namespace {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> xy;
};

// Minimal line chart; log-scaled x when requested.
std::string line_chart_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<Series>& series, bool log_x) {
  constexpr double W = 640, H = 400, L = 60, R = 140, T = 40, B = 50;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  auto tx = [&](double x) { return log_x ? std::log2(x) : x; };
  for (const auto& s : series)
    for (auto [x, y] : s.xy) {
      if (!std::isfinite(y)) continue;
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return L + (tx(x) - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                 "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << xlabel << "</text>\n";
  svg << "<text x=\"15\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 15 "
      << (T + H - B) / 2 << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  svg << "<text x=\"" << L - 5 << "\" y=\"" << py(ymin) << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(ymin)
      << "</text>\n";
  svg << "<text x=\"" << L - 5 << "\" y=\"" << py(ymax) << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(ymax)
      << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = colors[k % 10];
    std::ostringstream pts;
    for (auto [x, y] : series[k].xy) {
      if (!std::isfinite(y)) continue;
      pts << px(x) << "," << py(y) << " ";
      svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << pts.str() << "\"/>\n";
    svg << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 14 * (k + 1) << "\" font-size=\"11\" fill=\"" << color
        << "\">" << series[k].label << "</text>\n";
  }
  std::set<double> xs;
  for (const auto& s : series)
    for (auto [x, y] : s.xy) xs.insert(x);
  if (xs.size() <= 12) {
    for (double x : xs) {
      svg << "<text x=\"" << px(x) << "\" y=\"" << H - B + 14 << "\" text-anchor=\"middle\" font-size=\"10\">"
          << fmt(x) << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_best_effort(const fs::path& path, const std::function<std::string()>& render) {
  try {
    write_text_file(path, render());
  } catch (const std::exception& e) {
    std::cerr << "warning: could not render " << path.string() << ": " << e.what() << "\n";
  }
}

}  // namespace

std::string ucurve_svg(const std::vector<UCurvePoint>& points) {
  std::map<std::string, Series> by_variant;
  for (const auto& p : points) {
    by_variant[p.variant].label = p.variant;
    by_variant[p.variant].xy.emplace_back(p.m, p.median_frechet);
  }
  std::vector<Series> series;
  for (auto& [k, s] : by_variant) series.push_back(s);
  return line_chart_svg("median final Frechet distance vs latent size", "m", "Frechet", series, true);
}

std::vector<std::string> missing_cells(const SweepSpec& spec) {
  std::vector<std::string> missing;
  for (const Cell& cell : sweep_cells(spec)) {
    const std::string name = sweep_cell_name(cell.variant, cell.m, cell.repeat);
    const fs::path dir = spec.output_dir / name;
    bool ok = false;
    if (fs::exists(dir / "manifest.json")) {
      try {
        const RunRecord r = load_run(dir);
        ok = r.status == RunStatus::completed && r.final_record.has_value();
      } catch (const Error&) {
      }
    }
    if (!ok) missing.push_back(name);
  }
  return missing;
}

void export_ucurve(const SweepSpec& spec, const fs::path& out_dir) {
  const auto missing = missing_cells(spec);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw InvalidArgument("sweep has no completed run for: " + list);
  }
  std::vector<SweepRow> rows;
  for (const Cell& cell : sweep_cells(spec)) {
    const RunRecord r = load_run(spec.output_dir / sweep_cell_name(cell.variant, cell.m, cell.repeat));
    RunOutcome o;
    o.status = r.status;
    o.final_record = r.final_record;
    o.wall_seconds = r.manifest.value("wall_seconds", 0.0);
    rows.push_back(row_from(cell, o));
  }
  const auto points = ucurve_points(rows);
  write_text_file(out_dir / "ucurve.csv", ucurve_csv(points));
  write_best_effort(out_dir / "ucurve.svg", [&] { return ucurve_svg(points); });
}

std::string mask_trace_svg(const std::vector<MetricsRecord>& trace) {
  std::vector<Series> series;
  if (!trace.empty()) {
    const Eigen::Index m = trace.front().mu.size();
    for (Eigen::Index j = 0; j < m; ++j) {
      Series s;
      s.label = "mu_" + std::to_string(j);
      for (const auto& r : trace) {
        if (r.mu.size() == m) s.xy.emplace_back(static_cast<double>(r.step), r.mu(j));
      }
      series.push_back(std::move(s));
    }
  }
  return line_chart_svg("mask values during training", "step", "mu", series, false);
}

void export_mask_trace(const fs::path& run_dir, const fs::path& out_dir) {
  const fs::path jsonl = run_dir / "metrics.jsonl";
  if (!fs::exists(jsonl)) throw InvalidArgument("missing run: " + run_dir.string() + " has no metrics.jsonl");
  const auto trace = read_metrics(jsonl);
  if (trace.empty()) throw InvalidArgument("run " + run_dir.string() + " has no recorded evaluations");
  const int m = static_cast<int>(trace.front().mu.size());
  std::string csv = mask_trace_header(m);
  for (const auto& r : trace) {
    if (r.mu.size() != m) throw IntegrityError(jsonl.string() + ": mask width changes between records");
    csv += mask_trace_line(r);
  }
  write_text_file(out_dir / "mask_trace.csv", csv);
  write_best_effort(out_dir / "mask_trace.svg", [&] { return mask_trace_svg(trace); });
}

// ---------------------------------------------------------------------------
// NAC comparison

std::vector<NacRow> nac_table(const std::vector<RunRecord>& runs) {
  struct Entry {
    std::vector<double> nac, m_A;
  };
  std::map<std::tuple<std::string, int, std::string>, Entry> groups;
  std::map<std::pair<std::string, int>, std::pair<std::string, fs::path>> extractor_of;
  for (const auto& run : runs) {
    if (run.status != RunStatus::completed || !run.final_record) continue;
    const auto& cfg = run.manifest.at("config");
    const std::string dataset = run.manifest.at("dataset").value("fingerprint", std::string());
    const int m = cfg.at("arch").at("latent_dim").get<int>();
    const std::string variant = cfg.at("variant").get<std::string>();
    const auto& eval = cfg.at("eval");
    std::string extractor = eval.value("extractor", std::string("identity"));
    if (extractor == "pca_w") extractor += "(p=" + std::to_string(eval.value("pca_dim", 0)) + ")";

    const auto key = std::make_pair(dataset, m);
    auto [it, inserted] = extractor_of.emplace(key, std::make_pair(extractor, run.dir));
    if (!inserted && it->second.first != extractor) {
      throw InvalidArgument("cannot compare runs " + it->second.second.string() + " and " + run.dir.string() +
                            ": feature extractors differ (" + it->second.first + " vs " + extractor +
                            "); re-evaluate with a common extractor");
    }
    auto& e = groups[{dataset, m, variant}];
    e.nac.push_back(run.final_record->nac);
    e.m_A.push_back(run.final_record->m_A);
  }

  std::vector<NacRow> rows;
  for (const auto& [key, e] : groups) {
    NacRow r;
    r.dataset = std::get<0>(key);
    r.m = std::get<1>(key);
    r.variant = std::get<2>(key);
    r.runs = static_cast<int>(e.nac.size());
    r.nac = median(e.nac);
    r.m_A = median(e.m_A);
    rows.push_back(r);
  }
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].dataset == rows[i].dataset && rows[j].m == rows[i].m) ++j;
    if (j - i > 1) {
      std::size_t best = rows.size();
      for (std::size_t k = i; k < j; ++k) {
        if (std::isnan(rows[k].nac)) continue;
        if (best == rows.size() || rows[k].nac < rows[best].nac) best = k;
      }
      if (best != rows.size()) rows[best].lower = true;
    }
    i = j;
  }
  return rows;
}

std::string nac_table_csv(const std::vector<NacRow>& rows) {
  std::string out = "dataset,variant,m,runs,m_A,nac,lower\n";
  for (const auto& r : rows) {
    out += r.dataset + "," + r.variant + "," + std::to_string(r.m) + "," + std::to_string(r.runs) + "," +
           fmt(r.m_A) + "," + fmt(r.nac) + "," + (r.lower ? "*" : "") + "\n";
  }
  return out;
}

}  // namespace maae
