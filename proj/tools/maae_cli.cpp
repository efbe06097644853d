// Command-line front end: dataset creation, training runs, capacity sweeps,
// theory checks, exports, and NAC tables.
//
// Exit codes: 0 success, 2 invalid configuration or input, 3 numeric
// failure, 4 partial sweep failure, 1 anything else.

#include "maae/errors.hpp"
#include "maae/experiments.hpp"
#include "maae/theory_checks.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitPartial = 4;

std::vector<std::string> g_argv;

json invocation(const std::string& command) {
  return {{"command", command}, {"argv", g_argv}};
}

// Parses "a.b.c=value"; the value is read as JSON when it parses, otherwise
// kept as a string.
json override_patch(const std::vector<std::string>& sets) {
  json patch = json::object();
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw maae::InvalidArgument("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json* node = &patch;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) (*node)[parts[i]] = json::object();
      node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = value;
  }
  return patch;
}

json read_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  if (!fs::exists(path)) throw maae::InvalidArgument("config file not found: " + path);
  try {
    return maae::read_json_file(path);
  } catch (const maae::IntegrityError& e) {
    throw maae::InvalidArgument(e.what());
  }
}

// Every key in `patch` must already exist in `base`, so typos fail loudly.
void check_known_keys(const json& base, const json& patch, const std::string& prefix) {
  for (const auto& [k, v] : patch.items()) {
    if (!base.contains(k)) throw maae::InvalidArgument("unknown config key '" + prefix + k + "'");
    if (v.is_object() && base[k].is_object()) check_known_keys(base[k], v, prefix + k + ".");
  }
}

maae::TrainConfig resolve_train_config(const maae::TrainConfig& base, const json& file, const json& patch) {
  json j = base.to_json();
  check_known_keys(j, file, "");
  check_known_keys(j, patch, "");
  j.merge_patch(file);
  j.merge_patch(patch);
  maae::TrainConfig c = maae::TrainConfig::from_json(j);
  c.validate();
  return c;
}

maae::Dataset dataset_for(const std::string& path, const maae::Preset& p) {
  if (!path.empty()) {
    if (!fs::exists(path)) throw maae::InvalidArgument("dataset not found: " + path);
    return maae::load_dataset(path);
  }
  return maae::generate_dataset(p.data, p.samples);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw maae::InvalidArgument("not an integer list: '" + s + "'");
    }
  }
  return out;
}

std::vector<maae::Variant> parse_variants(const std::string& s) {
  std::vector<maae::Variant> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(maae::variant_from_string(item));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw maae::IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"Masked adversarial auto-encoder experiments"};
  app.require_subcommand(1);

  // make-data
  auto* make_data = app.add_subcommand("make-data", "Generate a synthetic dataset file");
  std::string md_preset = "synthetic8-desk", md_out, md_spec_file;
  std::vector<std::string> md_sets;
  long long md_count = -1;
  make_data->add_option("--preset", md_preset, "Preset supplying the generator spec and sample count");
  make_data->add_option("--spec", md_spec_file, "JSON generator spec overriding the preset");
  make_data->add_option("--set", md_sets, "Generator spec override key=value");
  make_data->add_option("--count", md_count, "Number of samples");
  make_data->add_option("--out", md_out, "Output dataset path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model into a run directory");
  std::string tr_preset = "synthetic8-desk", tr_config, tr_data, tr_name, tr_variant;
  std::vector<std::string> tr_sets;
  int tr_m = 0;
  long long tr_seed = -1;
  bool tr_fresh = false;
  train_cmd->add_option("--preset", tr_preset, "Base preset");
  train_cmd->add_option("--config", tr_config, "JSON TrainConfig file layered over the preset");
  train_cmd->add_option("--set", tr_sets, "Config override key.path=value");
  train_cmd->add_option("--data", tr_data, "Dataset file (default: generate from the preset)");
  train_cmd->add_option("--name", tr_name, "Run name under $MAAE_RUNS_DIR")->required();
  train_cmd->add_option("--variant", tr_variant, "maskaae or wae_baseline");
  train_cmd->add_option("--m", tr_m, "Latent dimension");
  train_cmd->add_option("--seed", tr_seed, "Run seed");
  train_cmd->add_flag("--fresh", tr_fresh, "Ignore existing checkpoints");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a (variant, m, repeat) grid");
  std::string sw_preset = "synthetic8-desk", sw_config, sw_data, sw_name, sw_variants, sw_ms;
  std::vector<std::string> sw_sets;
  int sw_repeats = 0, sw_jobs = 0;
  sweep_cmd->add_option("--preset", sw_preset, "Base preset for the per-cell TrainConfig");
  sweep_cmd->add_option("--config", sw_config, "JSON SweepSpec file");
  sweep_cmd->add_option("--set", sw_sets, "Base config override key.path=value");
  sweep_cmd->add_option("--data", sw_data, "Dataset file (default: generate from the preset)");
  sweep_cmd->add_option("--name", sw_name, "Sweep directory name under $MAAE_RUNS_DIR")->required();
  sweep_cmd->add_option("--variants", sw_variants, "Comma-separated variants");
  sweep_cmd->add_option("--m-values", sw_ms, "Comma-separated latent sizes");
  sweep_cmd->add_option("--repeats", sw_repeats, "Repeats per cell");
  sweep_cmd->add_option("--jobs", sw_jobs, "Cells trained concurrently");

  // theory-check
  auto* theory_cmd = app.add_subcommand("theory-check", "Run covering, volume and cross-entropy checks");
  unsigned long long th_seed = 1;
  std::string th_out;
  theory_cmd->add_option("--seed", th_seed, "Seed for Monte-Carlo probes");
  theory_cmd->add_option("--out", th_out, "Output directory (default $MAAE_RUNS_DIR/theory-check)");

  // export
  auto* export_cmd = app.add_subcommand("export", "Write plot-ready CSV and SVG files");
  export_cmd->require_subcommand(1);
  auto* ex_ucurve = export_cmd->add_subcommand("ucurve", "Median Frechet distance per (variant, m)");
  std::string ex_sweep, ex_run, ex_out;
  ex_ucurve->add_option("--sweep", ex_sweep, "Sweep directory")->required();
  ex_ucurve->add_option("--out", ex_out, "Output directory (default: the sweep directory)");
  auto* ex_mask = export_cmd->add_subcommand("mask-trace", "Mask values over training");
  ex_mask->add_option("--run", ex_run, "Run directory")->required();
  ex_mask->add_option("--out", ex_out, "Output directory (default: the run directory)");

  // nac-table
  auto* nac_cmd = app.add_subcommand("nac-table", "Compare NAC across runs");
  std::vector<std::string> nac_runs;
  std::string nac_sweep, nac_out;
  nac_cmd->add_option("runs", nac_runs, "Run directories");
  nac_cmd->add_option("--sweep", nac_sweep, "Include every cell of this sweep directory");
  nac_cmd->add_option("--out", nac_out, "Output directory (default $MAAE_RUNS_DIR/nac-table)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*make_data) {
      const maae::Preset p = maae::preset(md_preset);
      json spec_json = p.data.to_json();
      const json file = read_config_file(md_spec_file);
      const json patch = override_patch(md_sets);
      check_known_keys(spec_json, file, "");
      check_known_keys(spec_json, patch, "");
      spec_json.merge_patch(file);
      spec_json.merge_patch(patch);
      const maae::GeneratorSpec spec = maae::GeneratorSpec::from_json(spec_json);
      spec.validate();
      const long long count = md_count >= 0 ? md_count : p.samples;
      json manifest = invocation("make-data");
      manifest["spec"] = spec.to_json();
      manifest["count"] = count;
      manifest["out"] = md_out;
      maae::write_json_file(md_out + ".manifest.json", manifest);
      const maae::Dataset ds = maae::make_dataset(spec, count, md_out);
      std::cout << "wrote " << md_out << " (" << ds.count() << " x " << ds.dim() << ", fingerprint "
                << ds.spec_fingerprint << ")\n";
      return 0;
    }

    if (*train_cmd) {
      const maae::Preset p = maae::preset(tr_preset);
      json patch = override_patch(tr_sets);
      if (!tr_variant.empty()) patch["variant"] = tr_variant;
      if (tr_m > 0) patch["arch"]["latent_dim"] = tr_m;
      if (tr_seed >= 0) patch["seed"] = tr_seed;
      const maae::TrainConfig config = resolve_train_config(p.train, read_config_file(tr_config), patch);
      const maae::Dataset ds = dataset_for(tr_data, p);
      const fs::path dir = maae::runs_root() / tr_name;
      maae::RunOptions options;
      options.resume = !tr_fresh;
      options.manifest_extra = invocation("train");
      options.manifest_extra["preset"] = tr_preset;
      if (!tr_data.empty()) options.manifest_extra["dataset_path"] = tr_data;
      const maae::RunOutcome out = maae::run_training(config, ds, dir, options);
      if (out.status != maae::RunStatus::completed) {
        std::cerr << "training failed: " << out.error << "\n";
        return kExitNumeric;
      }
      if (out.final_record) std::cout << out.final_record->to_jsonl() << "\n";
      std::cout << "run directory: " << dir.string() << "\n";
      return 0;
    }

    if (*sweep_cmd) {
      const maae::Preset p = maae::preset(sw_preset);
      json file = read_config_file(sw_config);
      maae::SweepSpec spec;
      json base_file = file.contains("base") ? file["base"] : json::object();
      spec.base = resolve_train_config(p.train, base_file, override_patch(sw_sets));
      if (file.contains("variants") || file.contains("m_values") || file.contains("repeats") || file.contains("jobs")) {
        file.erase("base");
        file.erase("output_dir");
        const maae::SweepSpec from_file = maae::SweepSpec::from_json(file);
        if (file.contains("variants")) spec.variants = from_file.variants;
        if (file.contains("m_values")) spec.m_values = from_file.m_values;
        if (file.contains("repeats")) spec.repeats = from_file.repeats;
        if (file.contains("jobs")) spec.jobs = from_file.jobs;
      }
      if (file.contains("dataset") && sw_data.empty()) sw_data = file["dataset"].get<std::string>();
      if (!sw_variants.empty()) spec.variants = parse_variants(sw_variants);
      if (!sw_ms.empty()) spec.m_values = parse_int_list(sw_ms);
      if (spec.m_values.empty()) spec.m_values = {2, 4, 8, 16, 32};
      if (sw_repeats > 0) spec.repeats = sw_repeats;
      if (sw_jobs > 0) spec.jobs = sw_jobs;
      spec.dataset = sw_data;
      spec.output_dir = maae::runs_root() / sw_name;
      spec.validate();

      json manifest = invocation("sweep");
      manifest["preset"] = sw_preset;
      manifest["sweep"] = spec.to_json();
      maae::write_json_file(spec.output_dir / "manifest.json", manifest);

      const maae::Dataset ds = dataset_for(sw_data, p);
      const maae::SweepSummary summary = maae::run_sweep(spec, ds);
      std::cout << maae::sweep_summary_csv(summary.rows);
      if (!summary.failed_cells.empty()) {
        std::cerr << summary.failed_cells.size() << " cell(s) failed\n";
        return kExitPartial;
      }
      return 0;
    }

    if (*theory_cmd) {
      const fs::path dir = th_out.empty() ? maae::runs_root() / "theory-check" : fs::path(th_out);
      json manifest = invocation("theory-check");
      manifest["seed"] = th_seed;
      maae::write_json_file(dir / "manifest.json", manifest);
      const json report = maae::theory_check_report(th_seed);
      maae::write_json_file(dir / "report.json", report);
      std::cout << report.dump(2) << "\n";
      return report["all_passed"].get<bool>() ? 0 : kExitNumeric;
    }

    if (*export_cmd) {
      if (*ex_ucurve) {
        const fs::path sweep_dir = ex_sweep;
        if (!fs::exists(sweep_dir / "sweep.json")) {
          throw maae::InvalidArgument(sweep_dir.string() + " has no sweep.json");
        }
        maae::SweepSpec spec = maae::SweepSpec::from_json(maae::read_json_file(sweep_dir / "sweep.json"));
        spec.output_dir = sweep_dir;
        const fs::path out = ex_out.empty() ? sweep_dir : fs::path(ex_out);
        json manifest = invocation("export ucurve");
        manifest["sweep"] = spec.to_json();
        maae::write_json_file(out / "export_manifest.json", manifest);
        maae::export_ucurve(spec, out);
        std::cout << "wrote " << (out / "ucurve.csv").string() << "\n";
      } else {
        const fs::path run = ex_run;
        const fs::path out = ex_out.empty() ? run : fs::path(ex_out);
        json manifest = invocation("export mask-trace");
        manifest["run"] = run.string();
        maae::write_json_file(out / "export_manifest.json", manifest);
        maae::export_mask_trace(run, out);
        std::cout << "wrote " << (out / "mask_trace.csv").string() << "\n";
      }
      return 0;
    }

    if (*nac_cmd) {
      std::vector<fs::path> dirs(nac_runs.begin(), nac_runs.end());
      if (!nac_sweep.empty()) {
        if (!fs::is_directory(nac_sweep)) throw maae::InvalidArgument("not a directory: " + nac_sweep);
        std::vector<fs::path> cells;
        for (const auto& e : fs::directory_iterator(nac_sweep)) {
          if (e.is_directory() && fs::exists(e.path() / "manifest.json")) cells.push_back(e.path());
        }
        std::sort(cells.begin(), cells.end());
        dirs.insert(dirs.end(), cells.begin(), cells.end());
      }
      const fs::path out = nac_out.empty() ? maae::runs_root() / "nac-table" : fs::path(nac_out);
      json manifest = invocation("nac-table");
      json listed = json::array();
      for (const auto& d : dirs) listed.push_back(d.string());
      manifest["runs"] = listed;
      maae::write_json_file(out / "manifest.json", manifest);
      std::vector<maae::RunRecord> runs;
      for (const auto& d : dirs) {
        if (!fs::exists(d / "manifest.json")) throw maae::InvalidArgument("missing run: " + d.string());
        runs.push_back(maae::load_run(d));
      }
      const std::string csv = maae::nac_table_csv(maae::nac_table(runs));
      write_text(out / "nac_table.csv", csv);
      std::cout << csv;
      return 0;
    }
  } catch (const maae::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const maae::InvalidArgument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const maae::ShapeError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const maae::IntegrityError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const maae::IoError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
