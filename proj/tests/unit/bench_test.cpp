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

#include <gtest/gtest.h>

#include <sstream>

#include "../support/oracles.hpp"
#include "../support/report_parse.hpp"
#include "json.hpp"
#include "structprune/bench.hpp"
#include "structprune/model_io.hpp"
#include "structprune/zoo.hpp"

namespace structprune {
namespace {

LeaderboardRow row(double speedup, std::string crit, double base, double pruned, double params,
                   std::optional<std::string> reg = std::nullopt) {
  LeaderboardRow r;
  r.speedup = speedup;
  r.importance = std::move(crit);
  r.regularizer = std::move(reg);
  r.stochastic = CriterionSpec::named(r.importance).stochastic();
  r.base = base;
  r.pruned = pruned;
  r.delta = std::round(100.0 * (std::round(100.0 * pruned) / 100.0 - std::round(100.0 * base) / 100.0)) / 100.0;
  r.params = params;
  r.params_pct = 100.0 * params / 1000.0;
  r.flops_pct = 50.0;
  r.step_time = 0.136;
  if (r.regularizer) r.reg_time = 171.0;
  r.seeds = r.stochastic ? 3 : 1;
  return r;
}

TEST(RankRows, DeltaDescendingThenFewerParams) {
  const auto ranked = rank_rows({row(2, "magnitude_l1", 70.00, 69.97, 500),
                                 row(2, "taylor", 70.00, 70.33, 600),
                                 row(2, "lamp", 70.00, 69.97, 400)});
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].importance, "taylor");
  EXPECT_DOUBLE_EQ(ranked[0].delta, 0.33);
  EXPECT_EQ(ranked[0].rank, 1);
  EXPECT_EQ(ranked[1].importance, "lamp");
  EXPECT_EQ(ranked[2].importance, "magnitude_l1");
  EXPECT_DOUBLE_EQ(ranked[2].delta, -0.03);
  EXPECT_EQ(ranked[2].rank, 3);
}

TEST(RankRows, SectionsRankIndependentlyAndFailuresGoLast) {
  auto failed = row(2, "fpgm", 70, 0, 0);
  failed.failed = true;
  const auto ranked = rank_rows({row(4, "lamp", 70, 60, 100), failed,
                                 row(2, "magnitude_l2", 70, 65, 100, "group_lasso"),
                                 row(2, "lamp", 70, 69, 100)});
  std::vector<std::pair<double, int>> got;
  for (const auto& r : ranked) got.emplace_back(r.speedup, r.rank);
  EXPECT_EQ(got, (std::vector<std::pair<double, int>>{{2, 1}, {2, 0}, {2, 1}, {4, 1}}));
  EXPECT_TRUE(ranked[1].failed);
}

TEST(Format, SecondsAndParams) {
  EXPECT_EQ(format_seconds(0.136), "0.136s");
  EXPECT_EQ(format_seconds(171.0), "2m51s");
  EXPECT_EQ(format_params(16.51e6, 69.66), "16.51 M (69.66%)");
  EXPECT_EQ(format_params(2500, 12.5), "2.50 K (12.50%)");
}

TEST(Leaderboard, ColumnSetIsFixed) {
  EXPECT_EQ(leaderboard_columns(),
            (std::vector<std::string>{"Speed Up", "Importance", "Regularizer", "Rank", "Base",
                                      "Pruned", "ΔAcc", "Parameters", "Step Time", "Reg Time"}));
}

TEST(Leaderboard, StochasticRowsCarryAnAsterisk) {
  const auto cells = row_cells(row(2, "random", 70, 10, 100));
  EXPECT_EQ(cells[1], "Random*");
  EXPECT_EQ(row_cells(row(2, "lamp", 70, 10, 100))[1], "LAMP");
  EXPECT_EQ(row_cells(row(2, "lamp", 70, 10, 100))[2], "N/A");
}

TEST(Leaderboard, FormatsAgreeCellForCell) {
  auto failed = row(4, "fpgm", 70, 0, 0);
  failed.failed = true;
  const auto rows = rank_rows({row(2, "magnitude_l2", 70.12, 68.5, 600), row(2, "random", 70.12, 40.25, 550),
                               row(2, "magnitude_l2", 70.12, 69.1, 590, "growing_reg"),
                               row(4, "lamp", 70.12, 50.0, 300), failed});
  const auto csv = oracle::parse_csv(emit_leaderboard(rows, ReportFormat::kCsv));
  std::vector<std::string> md_header, json_header;
  const auto md = oracle::parse_md(emit_leaderboard(rows, ReportFormat::kMarkdown), &md_header);
  const auto js = oracle::parse_json_rows(emit_leaderboard(rows, ReportFormat::kJson), &json_header);
  ASSERT_EQ(csv.size(), rows.size() + 1);
  EXPECT_EQ(csv[0], leaderboard_columns());
  EXPECT_EQ(md_header, leaderboard_columns());
  EXPECT_EQ(json_header, leaderboard_columns());
  const std::vector<std::vector<std::string>> csv_rows(csv.begin() + 1, csv.end());
  EXPECT_EQ(csv_rows, md);
  EXPECT_EQ(csv_rows, js);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(csv_rows[i], row_cells(rows[i]));
}

TEST(Rows, JsonRoundTrip) {
  oracle::TempDir dir("rows");
  const auto rows = rank_rows({row(2, "lamp", 70, 69, 500), row(2, "magnitude_l2", 70, 68, 400, "bnscale")});
  save_rows(rows, dir.path());
  const auto back = load_rows(dir.path());
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_TRUE(back[i].same_result(rows[i]));
    EXPECT_EQ(back[i].reg_time, rows[i].reg_time);
  }
}

TEST(ExperimentConfig, ResolvesPathsAndRejectsEmptyMatrix) {
  const nlohmann::json j = {{"model", "m"}, {"train", "t"}, {"val", "v"}, {"criteria", {"lamp"}},
                            {"regularizers", {{{"preset", "group_lasso/desk_cnn/synthetic"}}}}};
  const auto cfg = ExperimentConfig::from_json(j, "/base");
  EXPECT_EQ(cfg.model, std::filesystem::path("/base/m"));
  ASSERT_EQ(cfg.regularizers.size(), 1u);
  EXPECT_EQ(cfg.regularizers[0].reg.lambda, 5e-4);
  EXPECT_EQ(cfg.hash(), ExperimentConfig::from_json(j, "/base").hash());
  nlohmann::json empty = j;
  empty["criteria"] = nlohmann::json::array();
  empty.erase("regularizers");
  EXPECT_THROW(ExperimentConfig::from_json(empty), ConfigError);
}

ExperimentInputs tiny_inputs() {
  SyntheticSpec s;
  s.samples = 40;
  s.classes = 4;
  const Dataset train = make_synthetic(s);
  s.sample_seed = 1;
  s.samples = 20;
  const Dataset val = make_synthetic(s);
  ModelBuilder b("tiny", {3, 8, 8}, 4, 0);
  auto x = b.conv_bn_relu("c1", ModelBuilder::kInput, 3, 8, 3, 1, 1);
  x = b.conv_bn_relu("c2", x, 8, 8, 3, 2, 1);
  const ModelGraph m = b.build(b.linear("fc", b.global_avgpool("gap", x), 8, 4));
  return {m, train, val, train};
}

TEST(RunExperiment, SmallestMatrixWritesArtifacts) {
  oracle::TempDir dir("bench");
  ExperimentConfig cfg;
  cfg.criteria = {"magnitude_l2", "random", "bnscale"};
  cfg.regularizers = {{preset_config("bnscale/desk_cnn/synthetic"), "bnscale"}};
  cfg.speedups = {2.0};
  cfg.repeats = 2;
  cfg.prune.steps = 10;
  cfg.finetune.epochs = 1;
  cfg.sparse.epochs = 1;
  cfg.output = dir.path();
  const auto res = run_experiment(cfg, tiny_inputs());
  ASSERT_EQ(res.rows.size(), 4u);
  EXPECT_FALSE(res.any_failed());
  for (const auto& r : res.rows) {
    EXPECT_LE(r.flops_pct, 50.0);
    EXPECT_EQ(r.seeds, r.stochastic ? 2 : 1);
    EXPECT_EQ(r.reg_time.has_value(), r.regularizer.has_value());
  }
  for (const char* f : {"rows.json", "leaderboard.md", "leaderboard.csv", "leaderboard.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / f)) << f;
  }
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "runs" / "2x_random" / "seed1" / "run.json"));
  const auto loaded = load_rows(dir.path());
  ASSERT_EQ(loaded.size(), res.rows.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) EXPECT_TRUE(loaded[i].same_result(res.rows[i]));
}

TEST(RunExperiment, FailingCellIsRecordedAndMatrixContinues) {
  ExperimentConfig cfg;
  cfg.criteria = {"magnitude_l1"};
  cfg.speedups = {2.0, 1000.0};
  cfg.prune.steps = 10;
  cfg.finetune.epochs = 0;
  const auto res = run_experiment(cfg, tiny_inputs());
  ASSERT_EQ(res.rows.size(), 2u);
  EXPECT_TRUE(res.any_failed());
  EXPECT_FALSE(res.rows[0].failed);
  EXPECT_TRUE(res.rows[1].failed);
  EXPECT_NE(res.rows[1].error.find("infeasible"), std::string::npos);
}

}  // namespace
}  // namespace structprune
