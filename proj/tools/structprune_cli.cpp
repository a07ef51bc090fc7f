/* Copyright 2026 The StructPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line front end: inspection, scoring, sparsifying, pruning and
// benchmark runs over model and dataset directories.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "structprune/bench.hpp"
#include "structprune/error.hpp"
#include "structprune/flops.hpp"
#include "structprune/groups.hpp"
#include "structprune/importance.hpp"
#include "structprune/model_io.hpp"
#include "structprune/prune.hpp"
#include "structprune/sparse_reg.hpp"
#include "structprune/train.hpp"
#include "structprune/zoo.hpp"

namespace sp = structprune;
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw sp::IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

void print_history(const std::vector<sp::EpochMetrics>& history) {
  for (const auto& e : history) {
    fmt::print("epoch {:>3}  lr {:.5f}  loss {:.4f}  train acc {:.2f}%  {:.2f}s\n", e.epoch,
               e.learning_rate, e.loss, 100.0 * e.train_accuracy, e.seconds);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural pruning engine and benchmark harness"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // groups dump
  auto* groups = app.add_subcommand("groups", "Dependency groups of a model");
  groups->require_subcommand(1);
  auto* groups_dump = groups->add_subcommand("dump", "Print groups as JSON");
  std::string model_dir;
  groups_dump->add_option("model", model_dir, "Model directory")->required();

  // cost
  auto* cost = app.add_subcommand("cost", "Per-layer parameters and FLOPs");
  cost->add_option("model", model_dir, "Model directory")->required();
  std::string cost_format = "table";
  cost->add_option("--format", cost_format, "table or json")
      ->check(CLI::IsMember({"table", "json"}));

  // score
  auto* score = app.add_subcommand("score", "Per-group importance scores as JSON");
  score->add_option("model", model_dir, "Model directory")->required();
  std::string criterion = "magnitude_l2";
  std::string calib_dir;
  std::uint64_t seed = 0;
  std::string normalization = "max";
  std::int64_t calib_samples = 32;
  score->add_option("--criterion", criterion, "Importance criterion");
  score->add_option("--calib", calib_dir, "Calibration dataset directory");
  score->add_option("--samples", calib_samples, "Calibration samples drawn");
  score->add_option("--seed", seed, "Seed");
  score->add_option("--normalization", normalization, "none, max, mean or gaussian");

  // sparsify
  auto* sparsify = app.add_subcommand("sparsify", "Sparse-learning stage");
  std::string data_dir, out_dir;
  sparsify->add_option("model", model_dir, "Model directory")->required();
  sparsify->add_option("data", data_dir, "Training dataset directory")->required();
  sparsify->add_option("--out", out_dir, "Output model directory")->required();
  std::string preset;
  sp::RegConfig reg;
  std::optional<double> lambda, eta, delta;
  int reg_epochs = 10;
  std::int64_t batch_size = 128;
  sparsify->add_option("--preset", preset, "reg/[criterion/]model/dataset preset");
  sparsify->add_option("--reg", reg.name, "group_lasso, group_norm, bnscale or growing_reg");
  sparsify->add_option("--lambda", lambda, "Regularization coefficient");
  sparsify->add_option("--eta", eta, "Sparse-learning rate");
  sparsify->add_option("--delta", delta, "Growing_reg increment");
  sparsify->add_option("--interval", reg.interval, "Growing_reg interval in epochs");
  sparsify->add_option("--epochs", reg_epochs, "Sparse epochs");
  sparsify->add_option("--batch-size", batch_size, "Batch size");
  sparsify->add_option("--seed", seed, "Seed");

  // prune
  auto* prune = app.add_subcommand("prune", "Prune to a FLOPs target");
  prune->add_option("model", model_dir, "Model directory")->required();
  prune->add_option("--out", out_dir, "Output directory (model/ and telemetry.json)")->required();
  sp::PruneConfig pcfg;
  std::string scheme = "protected_global";
  prune->add_option("--speedup", pcfg.speedup, "FLOPs speedup target")->required();
  prune->add_option("--steps", pcfg.steps, "Pruning steps S");
  prune->add_option("--scheme", scheme, "local, global or protected_global");
  prune->add_option("--criterion", criterion, "Importance criterion");
  prune->add_option("--calib", calib_dir, "Calibration dataset directory");
  prune->add_option("--samples", pcfg.calibration_samples, "Calibration samples drawn");
  prune->add_option("--seed", seed, "Seed");
  prune->add_option("--protect", pcfg.protection, "Protected fraction per group");

  // bench
  auto* bench = app.add_subcommand("bench", "Benchmark matrix");
  bench->require_subcommand(1);
  auto* bench_run = bench->add_subcommand("run", "Run an experiment config");
  std::string config_path;
  bench_run->add_option("config", config_path, "Experiment JSON")->required();
  std::string bench_out;
  bench_run->add_option("--out", bench_out, "Override output directory");
  auto* bench_report = bench->add_subcommand("report", "Print a leaderboard");
  std::string report_dir;
  std::string report_format = "md";
  bench_report->add_option("dir", report_dir, "Experiment output directory")->required();
  bench_report->add_option("--format", report_format, "md, csv or json")
      ->check(CLI::IsMember({"md", "csv", "json"}));

  // train / eval
  auto* train = app.add_subcommand("train", "Train or finetune a model");
  train->add_option("model", model_dir, "Model directory")->required();
  train->add_option("data", data_dir, "Dataset directory")->required();
  train->add_option("--out", out_dir, "Output model directory")->required();
  sp::TrainConfig tcfg;
  train->add_option("--epochs", tcfg.epochs, "Epochs");
  train->add_option("--lr", tcfg.learning_rate, "Learning rate");
  train->add_option("--momentum", tcfg.momentum, "Momentum");
  train->add_option("--weight-decay", tcfg.weight_decay, "Weight decay");
  train->add_option("--batch-size", tcfg.batch_size, "Batch size");
  train->add_option("--milestones", tcfg.milestones, "Epochs where lr decays")->delimiter(',');
  train->add_option("--seed", seed, "Seed");

  auto* eval = app.add_subcommand("eval", "Top-1 accuracy on a dataset");
  eval->add_option("model", model_dir, "Model directory")->required();
  eval->add_option("data", data_dir, "Dataset directory")->required();

  // synthetic fixtures
  auto* synth_model = app.add_subcommand("synth-model", "Write a bundled architecture");
  std::string arch = "desk_cnn";
  synth_model->add_option("name", arch, "Architecture")->check(CLI::IsMember(sp::zoo::names()));
  synth_model->add_option("--out", out_dir, "Output model directory")->required();
  synth_model->add_option("--seed", seed, "Initialization seed");

  auto* synth_data = app.add_subcommand("synth-data", "Write a synthetic dataset");
  sp::SyntheticSpec synth;
  synth_data->add_option("--out", out_dir, "Output dataset directory")->required();
  synth_data->add_option("--samples", synth.samples, "Samples");
  synth_data->add_option("--classes", synth.classes, "Classes");
  synth_data->add_option("--channels", synth.channels, "Channels");
  synth_data->add_option("--height", synth.height, "Height");
  synth_data->add_option("--width", synth.width, "Width");
  synth_data->add_option("--noise", synth.noise, "Noise std");
  synth_data->add_option("--prototype-seed", synth.prototype_seed, "Task seed");
  synth_data->add_option("--seed", synth.sample_seed, "Sample seed");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*groups_dump) {
      const auto m = sp::load_model(model_dir);
      std::cout << sp::groups_to_json(sp::build_groups(m)).dump(2) << "\n";
    } else if (*cost) {
      const auto report = sp::model_cost(sp::load_model(model_dir));
      if (cost_format == "json") {
        std::cout << report.to_json().dump(2) << "\n";
      } else {
        std::cout << report.to_table();
      }
    } else if (*score) {
      const auto m = sp::load_model(model_dir);
      sp::CriterionSpec crit = sp::CriterionSpec::named(criterion, seed);
      crit.normalization = sp::parse_normalization(normalization);
      std::optional<sp::CalibrationData> cd;
      if (!crit.data_free()) {
        if (calib_dir.empty()) throw sp::ConfigError(criterion + " needs --calib");
        const auto data = sp::load_dataset(calib_dir);
        cd = sp::calibrate(m, crit,
                           sp::sample_subset(data, std::min(calib_samples, data.size()), seed));
      }
      const auto scores = sp::score_groups(m, sp::build_groups(m), crit, cd ? &*cd : nullptr);
      std::cout << nlohmann::json{{"criterion", criterion}, {"groups", sp::scores_to_json(scores)}}
                       .dump(2)
                << "\n";
    } else if (*sparsify) {
      if (!preset.empty()) {
        const sp::RegConfig p = sp::preset_config(preset);
        const bool reg_given = sparsify->count("--reg") > 0;
        const std::string name = reg.name;
        const int interval = reg.interval;
        reg = p;
        if (reg_given) reg.name = name;
        reg.interval = interval;
      }
      if (lambda) reg.lambda = *lambda;
      if (eta) reg.eta = *eta;
      if (delta) reg.delta = *delta;
      sp::TrainConfig tc;
      tc.epochs = reg_epochs;
      tc.batch_size = batch_size;
      tc.seed = seed;
      const auto m = sp::load_model(model_dir);
      const auto r = sp::sparsify(m, sp::load_dataset(data_dir), reg, tc);
      print_history(r.history);
      const auto stat_before = sp::reg_statistic(reg, m, sp::build_groups(m));
      const auto stat_after = sp::reg_statistic(reg, r.model, sp::build_groups(r.model));
      fmt::print("{} statistic {:.6g} -> {:.6g}; reg time {}\n", reg.name, stat_before, stat_after,
                 sp::format_seconds(r.reg_time));
      sp::save_model(r.model, out_dir);
    } else if (*prune) {
      pcfg.scheme = sp::parse_prune_scheme(scheme);
      pcfg.criterion = sp::CriterionSpec::named(criterion);
      pcfg.seed = seed;
      const auto m = sp::load_model(model_dir);
      std::optional<sp::Dataset> calib;
      if (!calib_dir.empty()) calib = sp::load_dataset(calib_dir);
      const auto r = sp::prune_to_target(m, pcfg, calib ? &*calib : nullptr);
      sp::save_model(r.model, fs::path(out_dir) / "model");
      nlohmann::json tel = r.telemetry_json();
      tel["config"] = pcfg.to_json();
      write_json(fs::path(out_dir) / "telemetry.json", tel);
      fmt::print("{} steps; FLOPs {} -> {} ({:.2f}%), params {} -> {} ({:.2f}%)\n", r.steps.size(),
                 r.original.total_flops, r.final_cost.total_flops,
                 100.0 * r.final_cost.flops_ratio.value_or(1.0), r.original.total_params,
                 r.final_cost.total_params, 100.0 * r.final_cost.params_ratio.value_or(1.0));
    } else if (*bench_run) {
      sp::ExperimentConfig cfg = sp::ExperimentConfig::load(config_path);
      if (!bench_out.empty()) cfg.output = bench_out;
      const auto result = sp::run_experiment(cfg);
      std::cout << sp::emit_leaderboard(result.rows, sp::ReportFormat::kMarkdown);
      if (result.any_failed()) {
        spdlog::error("at least one cell failed");
        return 1;
      }
    } else if (*bench_report) {
      const auto rows = sp::load_rows(report_dir);
      std::cout << sp::emit_leaderboard(rows, sp::parse_report_format(report_format));
    } else if (*train) {
      tcfg.seed = seed;
      const auto r = sp::train(sp::load_model(model_dir), sp::load_dataset(data_dir), tcfg);
      print_history(r.history);
      sp::save_model(r.model, out_dir);
    } else if (*eval) {
      const double acc = sp::evaluate(sp::load_model(model_dir), sp::load_dataset(data_dir));
      fmt::print("accuracy {:.2f}%\n", 100.0 * acc);
    } else if (*synth_model) {
      sp::save_model(sp::zoo::by_name(arch, seed), out_dir);
    } else if (*synth_data) {
      sp::save_dataset(sp::make_synthetic(synth), out_dir);
    }
  } catch (const sp::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("unexpected: {}", e.what());
    return 1;
  }
  return 0;
}
