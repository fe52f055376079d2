#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <json.hpp>

#include "dirfocus/app/commands.hpp"
#include "dirfocus/app/config.hpp"
#include "dirfocus/app/experiment.hpp"
#include "dirfocus/app/report.hpp"

namespace fs = std::filesystem;
using namespace dirfocus;

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  dirfocus::app::tune_allocator();
  CLI::App cli{"Directional focus decoding from EEG and audio spatial spectra"};
  cli.require_subcommand(1);

  std::string spec_in, spec_out, spec_config;
  bool spec_force = false;
  double spacing = 0.18, speed = 343.0, loading = 1e-3;
  auto* spectrum = cli.add_subcommand("spectrum", "Precompute MVDR spatial spectra for a dataset with audio");
  spectrum->add_option("input", spec_in, "Dataset directory (manifest.json with audio_file entries)")->required();
  spectrum->add_option("--out", spec_out, "Output directory (default: <input>/spectra)");
  spectrum->add_option("--config", spec_config, "JSON file with spectrum settings");
  spectrum->add_option("--spacing", spacing, "Microphone spacing in metres");
  spectrum->add_option("--speed-of-sound", speed, "Speed of sound in m/s");
  spectrum->add_option("--loading", loading, "Diagonal loading factor");
  spectrum->add_flag("--force", spec_force, "Recompute existing spectra");

  std::string synth_config, synth_out;
  std::uint64_t synth_seed = 0;
  bool synth_audio = false;
  auto* synth = cli.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--config", synth_config, "JSON file with synth settings (defaults otherwise)");
  synth->add_option("--seed", synth_seed, "Master seed");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_flag("--audio", synth_audio, "Also write the rendered two-microphone audio");

  std::string run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  int jobs = 1;
  bool resume = false, no_checkpoints = false;
  auto* run = cli.add_subcommand("run", "Train and evaluate one experiment over all CV folds");
  run->add_option("--config", run_config, "Experiment JSON")->required();
  run->add_option("--seed", run_seed, "Override the experiment seed");
  run->add_option("--out", run_out, "Override the output directory");
  run->add_option("--jobs", jobs, "Folds trained in parallel")->check(CLI::PositiveNumber);
  run->add_flag("--resume", resume, "Reuse completed folds from a previous run");
  run->add_flag("--no-checkpoints", no_checkpoints, "Skip writing model checkpoints");

  std::vector<std::string> report_inputs;
  std::string report_out = "report";
  bool no_plots = false;
  auto* report = cli.add_subcommand("report", "Consolidate results files into CSV tables and SVG plots");
  report->add_option("results", report_inputs, "results.json files, directories or glob patterns")->required();
  report->add_option("--out", report_out, "Output directory");
  report->add_flag("--no-plots", no_plots, "Write only the CSV files");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*spectrum) {
      spatial::SpectrumPipeline pipeline;
      if (!spec_config.empty()) pipeline = app::parse_pipeline(read_json_file(spec_config));
      if (spectrum->count("--spacing")) pipeline.geometry.spacing = spacing;
      if (spectrum->count("--speed-of-sound")) pipeline.geometry.speed_of_sound = speed;
      if (spectrum->count("--loading")) pipeline.mvdr.loading = loading;
      pipeline.geometry.validate();
      const fs::path out = spec_out.empty() ? fs::path(spec_in) / "spectra" : fs::path(spec_out);
      const auto stats = app::cmd_spectrum(spec_in, out, pipeline, spec_force);
      std::cout << "spectra computed: " << stats.computed << ", skipped: " << stats.skipped << "\n";
    } else if (*synth) {
      dataset::SynthConfig cfg;
      if (!synth_config.empty()) cfg = app::parse_synth(read_json_file(synth_config));
      const int n = app::cmd_synth(cfg, synth_seed, synth_out, synth_audio);
      std::cout << "wrote " << n << " trials to " << synth_out << "\n";
    } else if (*run) {
      auto cfg = app::load_experiment(run_config);
      if (run_seed) {
        cfg.seed = *run_seed;
        cfg.train.rng_seed = *run_seed;
      }
      if (!run_out.empty()) cfg.out_dir = run_out;
      app::RunOptions opts;
      opts.jobs = jobs;
      opts.resume = resume;
      opts.write_checkpoints = !no_checkpoints;
      const auto result = app::run_experiment(cfg, opts);
      std::cout << cfg.name << ": " << models::to_string(cfg.model.kind) << " " << dataset::to_string(cfg.cv) << " "
                << dataset::to_string(cfg.labels) << " " << cfg.window_seconds << " s, balanced accuracy "
                << 100 * result.balanced_acc_mean << "% " << result.stars << "\n";
      for (const auto& v : result.audit_violations) std::cerr << "audit: " << v << "\n";
      if (result.failed()) {
        std::cerr << "one or more folds failed; see " << (cfg.out_dir / "folds").string() << "\n";
        return 1;
      }
    } else if (*report) {
      const auto files = app::expand_result_paths(report_inputs);
      const auto written = app::write_report(files, report_out, !no_plots);
      std::cout << "summary: " << written.summary_csv.string() << "\n";
      for (const auto& p : written.plots) std::cout << "plot: " << p.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
