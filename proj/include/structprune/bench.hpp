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

#ifndef STRUCTPRUNE_BENCH_HPP_
#define STRUCTPRUNE_BENCH_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "structprune/dataset.hpp"
#include "structprune/prune.hpp"
#include "structprune/sparse_reg.hpp"
#include "structprune/train.hpp"

namespace structprune {

// One sparsify-then-prune method: a regularizer paired with the criterion
// used at the pruning stage.
struct RegularizerCell {
  RegConfig reg;
  std::string criterion = "magnitude_l2";
};

struct ExperimentConfig {
  std::filesystem::path model;
  std::filesystem::path train;
  std::filesystem::path val;
  std::filesystem::path calibration;  // defaults to `train`
  std::vector<std::string> criteria;
  std::vector<RegularizerCell> regularizers;
  std::vector<double> speedups = {2.0, 4.0, 8.0};
  int repeats = 3;  // seeds per stochastic cell
  std::uint64_t seed = 0;
  PruneConfig prune;       // criterion and speedup are set per cell
  TrainConfig finetune;
  TrainConfig sparse;      // learning rate comes from each RegConfig's eta
  std::filesystem::path output;  // empty: no artifacts

  void validate() const;
  nlohmann::json to_json() const;
  // Relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& file);
  // CRC32 of the canonical JSON form.
  std::string hash() const;
};

struct LeaderboardRow {
  double speedup = 1.0;
  std::string importance;           // criterion name
  std::optional<std::string> regularizer;
  bool stochastic = false;
  int rank = 0;                     // 0 for failed rows
  double base = 0.0;                // accuracy in percent
  double pruned = 0.0;              // mean over seeds
  double delta = 0.0;               // from values rounded to 2 decimals
  double params = 0.0;              // mean parameter count
  double params_pct = 0.0;          // percent of the base model
  double flops_pct = 0.0;
  double step_time = 0.0;           // seconds per pruning step
  std::optional<double> reg_time;   // seconds per sparse epoch
  int seeds = 0;
  bool failed = false;
  std::string error;

  nlohmann::json to_json() const;
  static LeaderboardRow from_json(const nlohmann::json& j);
  // Equality ignoring wall-clock fields.
  bool same_result(const LeaderboardRow& other) const;
};

struct ExperimentInputs {
  ModelGraph model;
  Dataset train;
  Dataset val;
  Dataset calibration;

  static ExperimentInputs load(const ExperimentConfig& cfg);
};

struct ExperimentResult {
  std::vector<LeaderboardRow> rows;  // ranked
  bool any_failed() const;
};

// Runs every (speedup, method, seed) cell. Failures are recorded in their row
// and the matrix continues. With an output directory, writes rows.json,
// leaderboard.{md,csv,json} and runs/<cell>/seed<k>/{model,telemetry.json,run.json}.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentInputs& inputs);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Assigns ranks within each (speedup, section): Δacc descending, then fewer
// parameters, then method name. Returns rows sorted for display.
std::vector<LeaderboardRow> rank_rows(std::vector<LeaderboardRow> rows);

enum class ReportFormat { kMarkdown, kCsv, kJson };
ReportFormat parse_report_format(std::string_view name);

// Column headers shared by every format.
const std::vector<std::string>& leaderboard_columns();
// Display cells of a row in leaderboard_columns() order.
std::vector<std::string> row_cells(const LeaderboardRow& row);

std::string emit_leaderboard(const std::vector<LeaderboardRow>& rows, ReportFormat format);

std::vector<LeaderboardRow> load_rows(const std::filesystem::path& dir);
void save_rows(const std::vector<LeaderboardRow>& rows, const std::filesystem::path& dir);

// "0.136s" below a minute, "2m51s" above.
std::string format_seconds(double seconds);
// "16.51 M (69.66%)" style.
std::string format_params(double params, double pct);

}  // namespace structprune

#endif  // STRUCTPRUNE_BENCH_HPP_
