#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>

#include "posedp/config.hpp"
#include "posedp/dataset_io.hpp"
#include "posedp/env.hpp"
#include "posedp/harness.hpp"
#include "posedp/report.hpp"

namespace fs = std::filesystem;
using namespace posedp;

namespace {

ExperimentConfig read_config(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

void print_epoch(int epoch, float loss, double seconds) {
  std::cerr << "epoch " << std::setw(3) << epoch << "  loss " << std::fixed
            << std::setprecision(5) << loss << "  " << std::setprecision(2)
            << seconds << " s\n";
}

Dataset generate(const ExperimentConfig& cfg) {
  std::cerr << "generating " << cfg.demo_episodes << " demonstrations for "
            << cfg.task.name() << "\n";
  return generate_demonstrations(cfg.task, cfg.demo_episodes, cfg.effective_tracker(),
                                 cfg.data_seed, cfg.grid_resolution);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose-conditioned diffusion policy workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string data_path;
  std::string checkpoint_path;
  std::string results_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> rollouts;

  auto* gen = app.add_subcommand("gen-data", "Record scripted-expert demonstrations");
  gen->add_option("--config", config_path, "Experiment config file");
  gen->add_option("--seed", seed, "Override seed.data");
  gen->add_option("--out", out_path, "Dataset file to write")->required();

  auto* tr = app.add_subcommand("train", "Train a diffusion policy on a dataset");
  tr->add_option("--config", config_path, "Experiment config file");
  tr->add_option("--data", data_path, "Dataset file")->required();
  tr->add_option("--seed", seed, "Override seed.train");
  tr->add_option("--out", out_path, "Checkpoint file to write")->required();

  auto* ev = app.add_subcommand("eval", "Roll out a checkpoint and report its success rate");
  ev->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  ev->add_option("--rollouts", rollouts, "Override eval.rollouts");
  ev->add_option("--seed", seed, "Override seed.eval");
  ev->add_option("--out", out_path, "Append the result row to this JSON-lines file");

  auto* bench = app.add_subcommand("bench", "Generate data, train and evaluate all observation modes");
  bench->add_option("--config", config_path, "Experiment config file");
  bench->add_option("--seed", seed, "Override seed.data and seed.train");
  bench->add_option("--out", out_path, "Output directory")->required();

  auto* rep = app.add_subcommand("report", "Render result rows as CSV and text tables");
  rep->add_option("--results", results_path, "JSON-lines result file")->required();
  rep->add_option("--out", out_path, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      ExperimentConfig cfg = read_config(config_path);
      if (seed) cfg.data_seed = *seed;
      const Dataset data = generate(cfg);
      save_dataset(data, out_path);
      std::cout << "wrote " << data.episodes.size() << " episodes, "
                << data.frame_count() << " frames to " << out_path << "\n";
    } else if (tr->parsed()) {
      ExperimentConfig cfg = read_config(config_path);
      if (seed) cfg.train_seed = *seed;
      const Dataset data = load_dataset(data_path);
      const Checkpoint ck = train(cfg, data, print_epoch);
      save_checkpoint(ck, out_path);
      std::cout << "params " << ck.params.size() << "  TE "
                << ck.metrics.mean_epoch_seconds() << " s  wrote " << out_path << "\n";
    } else if (ev->parsed()) {
      const Checkpoint ck = load_checkpoint(checkpoint_path);
      const ExperimentConfig& cfg = ck.config;
      const int n = rollouts.value_or(cfg.eval_rollouts);
      const EvaluationResult result =
          evaluate(ck, cfg.task, cfg.effective_tracker(), n, seed.value_or(cfg.eval_seed));
      BenchmarkRow row{cfg.task.name(), to_string(cfg.mode), "-", ck.params.size(),
                       result.success_rate, ck.metrics.mean_epoch_seconds(),
                       result.mean_position_error(), result.mean_orientation_error()};
      std::cout << report_table({row});
      if (!out_path.empty()) {
        std::vector<BenchmarkRow> rows;
        if (fs::exists(out_path)) rows = load_results(out_path);
        rows.push_back(row);
        save_results(rows, out_path);
      }
    } else if (bench->parsed()) {
      ExperimentConfig cfg = read_config(config_path);
      if (seed) {
        cfg.data_seed = *seed;
        cfg.train_seed = *seed;
      }
      fs::create_directories(out_path);
      const Dataset data = generate(cfg);
      save_dataset(data, fs::path(out_path) / "dataset.bin");
      std::vector<BenchmarkRow> rows;
      for (const auto& variant : standard_variants(cfg)) {
        std::cerr << "== " << to_string(variant.mode) << " (" << variant.tier << ")\n";
        const BenchOutcome outcome = run_variant(cfg, data, variant, print_epoch);
        save_checkpoint(outcome.checkpoint,
                        fs::path(out_path) / (to_string(variant.mode) + "_" + variant.tier + ".ckpt"));
        rows.push_back(outcome.row);
        save_results(rows, fs::path(out_path) / "results.jsonl");
      }
      write_report(rows, out_path);
      std::cout << report_table(rows);
    } else if (rep->parsed()) {
      const auto rows = load_results(results_path);
      write_report(rows, out_path);
      std::cout << report_table(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
