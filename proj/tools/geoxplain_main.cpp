#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "geoxplain/config.hpp"
#include "geoxplain/errors.hpp"
#include "geoxplain/pipeline.hpp"
#include "geoxplain/report.hpp"
#include "geoxplain/synth.hpp"

namespace {

using geoxplain::Error;
using geoxplain::ErrorCode;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
      return 1;
    case ErrorCode::MissingArtifacts:
    case ErrorCode::MissingResults:
      return 2;
    case ErrorCode::FatalBackendError:
      return 3;
    default:
      return 1;
  }
}

struct GlobalFlags {
  std::string config_path;
  std::int64_t seed = -1;
  int workers = -1;
  int limit = -1;
};

void add_global_flags(CLI::App* cmd, GlobalFlags& flags, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "Run configuration file (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--seed", flags.seed, "Override run.seed");
  cmd->add_option("--workers", flags.workers, "Override run.workers (0 = hardware)");
  cmd->add_option("--limit", flags.limit, "Process only the first N eval images");
}

geoxplain::config::RunConfig load_with_overrides(const GlobalFlags& flags) {
  auto config = geoxplain::config::load_run_config(flags.config_path);
  if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.workers >= 0) config.workers = flags.workers;
  if (flags.limit >= 0) config.limit = flags.limit;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-centric faithfulness analysis for image geolocation classifiers"};
  app.require_subcommand(1);

  GlobalFlags extract_flags, evaluate_flags, sweep_flags, train_flags;
  std::string report_run_dir, sweep_grid;
  int report_top_k = 4, report_max_images = 24;

  auto* extract_cmd =
      app.add_subcommand("extract", "Attribution -> saliency -> segments -> ranked crops");
  add_global_flags(extract_cmd, extract_flags);

  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "Deletion/insertion tests for guided and random conditions");
  add_global_flags(evaluate_cmd, evaluate_flags);

  auto* report_cmd = app.add_subcommand("report", "Plots and crop gallery from persisted results");
  report_cmd->add_option("--run-dir", report_run_dir, "Run directory (…/<config hash>)")->required();
  report_cmd->add_option("--top-k", report_top_k, "Crops per image in the gallery");
  report_cmd->add_option("--max-images", report_max_images, "Images per pair in the gallery");

  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate over a parameter grid");
  add_global_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--grid", sweep_grid, "JSON object of parameter value lists")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the desk-scale toy classifier");
  add_global_flags(train_cmd, train_flags);

  std::string synth_out;
  geoxplain::synth::SynthConfig synth_config;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the planted-cue synthetic dataset");
  synth_cmd->add_option("--out", synth_out, "Output dataset directory")->required();
  synth_cmd->add_option("--side", synth_config.side, "Image side length");
  synth_cmd->add_option("--train-per-class", synth_config.train_per_class, "Train images per class");
  synth_cmd->add_option("--eval-per-class", synth_config.eval_per_class, "Eval images per class");
  synth_cmd->add_option("--seed", synth_config.seed, "Dataset seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (extract_cmd->parsed()) {
      auto config = load_with_overrides(extract_flags);
      auto outcome = geoxplain::pipeline::cmd_extract(config);
      for (const auto& [pair, counts] : outcome.counts) {
        std::cerr << "extract " << pair << ": " << counts.ok << "/" << counts.images
                  << " images, " << counts.crops << " crops (" << counts.zero_crop
                  << " empty, " << counts.failed << " failed)\n";
      }
      std::cout << outcome.run_directory.string() << "\n";
    } else if (evaluate_cmd->parsed()) {
      auto config = load_with_overrides(evaluate_flags);
      auto outcome = geoxplain::pipeline::cmd_evaluate(config);
      std::cerr << "evaluate: " << outcome.pairs_evaluated << " pair(s) summarized\n";
      std::cout << outcome.run_directory.string() << "\n";
    } else if (report_cmd->parsed()) {
      auto dir = geoxplain::pipeline::cmd_report(report_run_dir, report_top_k, report_max_images);
      std::cout << dir.string() << "\n";
    } else if (sweep_cmd->parsed()) {
      auto config = load_with_overrides(sweep_flags);
      std::filesystem::path table_dir;
      auto rows = geoxplain::pipeline::cmd_sweep(config, sweep_grid, &table_dir);
      std::cout << geoxplain::report::sweep_table_csv(rows);
      std::cerr << "sweep table: " << (table_dir / "sweep.csv").string() << "\n";
    } else if (train_cmd->parsed()) {
      auto config = load_with_overrides(train_flags);
      auto outcome = geoxplain::pipeline::cmd_train(config);
      std::cerr << "train: best epoch " << outcome.report.best_epoch << ", train acc "
                << outcome.report.final_train_accuracy << ", val acc "
                << outcome.report.final_val_accuracy << "\n";
      std::cout << outcome.weights_path.string() << "\n";
    } else if (synth_cmd->parsed()) {
      auto manifest = geoxplain::synth::write_dataset(synth_config, synth_out);
      std::cerr << "synth: " << manifest.records.size() << " images, "
                << manifest.num_classes << " classes\n";
      std::cout << (std::filesystem::path(synth_out) / "manifest.jsonl").string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
