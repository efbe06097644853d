#pragma once

// Experiment orchestration: presets, run directories, capacity sweeps, and
// the CSV/SVG exports built from them.
//
// Run directory layout:
//   <run>/manifest.json          resolved config and status, written before training
//   <run>/metrics.jsonl          one MetricsRecord per evaluation
//   <run>/mask_trace.csv         step,mu_0,...,mu_{m-1}
//   <run>/checkpoints/step_<i>.ckpt

#include "maae/synthetic_data.hpp"
#include "maae/trainer.hpp"
#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace maae {

struct Preset {
  std::string name;
  GeneratorSpec data;
  Eigen::Index samples = 0;
  TrainConfig train;
};

// Known names: synthetic8-desk, synthetic8-paper (alias paper-synthetic),
// synthetic16-desk, synthetic8-acceptance (desk data, 3x128 nets),
// synthetic8-quick. Unknown names raise InvalidArgument.
Preset preset(const std::string& name);
std::vector<std::string> preset_names();

// Root for run directories: $MAAE_RUNS_DIR if set, else ./runs.
std::filesystem::path runs_root();

// Writes `j` to `path` atomically (temp file + rename).
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

enum class RunStatus { running, completed, failed };
std::string to_string(RunStatus s);
RunStatus run_status_from_string(const std::string& s);

struct RunOutcome {
  RunStatus status = RunStatus::running;
  std::optional<MetricsRecord> final_record;
  double wall_seconds = 0.0;
  std::string error;
  int exit_code = 0;  // 0 ok, 3 numeric failure
};

struct RunOptions {
  // Pick up from the newest checkpoint when the directory holds a partial run.
  bool resume = true;
  // Extra manifest fields (sweep cell coordinates, command line).
  nlohmann::json manifest_extra = nlohmann::json::object();
};

// Trains one configuration inside `run_dir`. A completed directory is left
// untouched and its recorded outcome is returned. Numeric failures are
// reported through the outcome (status failed, exit_code 3) after the last
// good state has been checkpointed.
RunOutcome run_training(const TrainConfig& config, const Dataset& dataset,
                        const std::filesystem::path& run_dir, const RunOptions& options = {});

// Final record and manifest of a finished run directory.
struct RunRecord {
  std::filesystem::path dir;
  nlohmann::json manifest;
  RunStatus status = RunStatus::running;
  std::optional<MetricsRecord> final_record;
};

RunRecord load_run(const std::filesystem::path& run_dir);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& jsonl);

struct SweepSpec {
  std::filesystem::path dataset;  // MAAE-DS1 file
  std::vector<Variant> variants{Variant::wae_baseline, Variant::maskaae};
  std::vector<int> m_values;
  TrainConfig base;
  int repeats = 3;
  std::filesystem::path output_dir;
  int jobs = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static SweepSpec from_json(const nlohmann::json& j);
};

// Seed of repeat r; shared by every variant and m so paired runs line up.
std::uint64_t sweep_cell_seed(std::uint64_t base_seed, int repeat);
std::string sweep_cell_name(Variant v, int m, int repeat);

struct SweepRow {
  std::string variant;
  int m = 0;
  int repeat = 0;
  double final_frechet = 0.0;
  double final_nac = 0.0;
  int m_A = 0;
  double wall_seconds = 0.0;
  bool failed = false;
};

struct SweepSummary {
  std::vector<SweepRow> rows;  // sorted by variant, m, repeat
  std::vector<std::string> failed_cells;
};

// Runs every (variant, m, repeat) cell under output_dir, skipping cells whose
// manifest says completed, and writes sweep_summary.csv. A failing cell is
// marked failed and the rest continue.
SweepSummary run_sweep(const SweepSpec& spec, const Dataset& dataset);
SweepSummary run_sweep(const SweepSpec& spec);

// Columns: variant,m,repeat,final_frechet,final_nac,m_A,wall_seconds.
std::string sweep_summary_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_summary(const std::filesystem::path& csv);

struct UCurvePoint {
  std::string variant;
  int m = 0;
  int repeats = 0;
  double median_frechet = 0.0;
  double min_frechet = 0.0;
  double max_frechet = 0.0;
  double median_m_A = 0.0;
};

// Per (variant, m) medians over completed repeats, sorted by m then variant.
std::vector<UCurvePoint> ucurve_points(const std::vector<SweepRow>& rows);
std::string ucurve_csv(const std::vector<UCurvePoint>& points);
std::string ucurve_svg(const std::vector<UCurvePoint>& points);

// Cells named by `spec` that have no completed run directory.
std::vector<std::string> missing_cells(const SweepSpec& spec);

// Writes ucurve.csv (and ucurve.svg, best effort) into out_dir. Missing cells
// raise InvalidArgument listing them.
void export_ucurve(const SweepSpec& spec, const std::filesystem::path& out_dir);

// Copies <run>/mask_trace.csv to out_dir/mask_trace.csv in canonical form and
// renders mask_trace.svg (best effort). The CSV has m + 1 columns.
void export_mask_trace(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);
std::string mask_trace_svg(const std::vector<MetricsRecord>& trace);

struct NacRow {
  std::string dataset;  // generator fingerprint
  std::string variant;
  int m = 0;
  int runs = 0;
  double m_A = 0.0;  // median over runs
  double nac = 0.0;  // median over runs
  bool lower = false;
};

// Groups completed runs by (dataset, m, variant), takes medians, and marks
// the variant with the lower NAC within each (dataset, m) group that holds
// more than one variant. Runs compared within a group must share the Fréchet
// feature extractor; otherwise InvalidArgument explains the mismatch.
std::vector<NacRow> nac_table(const std::vector<RunRecord>& runs);
std::string nac_table_csv(const std::vector<NacRow>& rows);

}  // namespace maae
