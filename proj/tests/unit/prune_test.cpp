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

#include "../support/oracles.hpp"
#include "structprune/prune.hpp"
#include "structprune/zoo.hpp"

namespace structprune {
namespace {

std::vector<PruneGroup> two_groups() {
  PruneGroup a, b;
  a.id = 1;
  a.width = 4;
  b.id = 2;
  b.width = 4;
  return {a, b};
}

std::vector<ImportanceScores> two_scores() { return {{1, {1, 2, 3, 4}}, {2, {5, 6, 7, 8}}}; }

PruneConfig plain(PruneScheme scheme) {
  PruneConfig c;
  c.scheme = scheme;
  c.global_normalization = Normalization::kNone;
  return c;
}

TEST(PlanStep, GlobalThresholdTakesLowestScores) {
  const auto plan = plan_step(two_groups(), two_scores(), plain(PruneScheme::kGlobal), 2, {});
  EXPECT_EQ(plan.actions, (std::vector<PruneAction>{{1, 0}, {1, 1}}));
}

TEST(PlanStep, LocalTakesTheSameShareFromEachGroup) {
  const auto plan = plan_step(two_groups(), two_scores(), plain(PruneScheme::kLocal), 2, {});
  EXPECT_EQ(plan.actions, (std::vector<PruneAction>{{1, 0}, {2, 0}}));
}

TEST(PlanStep, ProtectedFloorSkipsTheLastIndex) {
  auto groups = two_groups();
  groups.resize(1);
  const auto plan = plan_step(groups, two_scores(), plain(PruneScheme::kProtectedGlobal), 4, {});
  EXPECT_EQ(plan.actions, (std::vector<PruneAction>{{1, 0}, {1, 1}, {1, 2}}));
}

TEST(PlanStep, FloorUsesOriginalWidth) {
  EXPECT_EQ(group_floor(PruneScheme::kProtectedGlobal, 0.1, 4), 1);
  EXPECT_EQ(group_floor(PruneScheme::kProtectedGlobal, 0.1, 32), 4);
  EXPECT_EQ(group_floor(PruneScheme::kProtectedGlobal, 0.1, 30), 3);
  EXPECT_EQ(group_floor(PruneScheme::kGlobal, 0.1, 32), 1);
  auto groups = two_groups();
  groups.resize(1);
  // Original width 32 means a floor of 4, which a width-4 group has reached.
  EXPECT_THROW(plan_step(groups, two_scores(), plain(PruneScheme::kProtectedGlobal), 1, {{1, 32}}),
               InfeasibleTarget);
}

TEST(PlanStep, InfeasibleNamesBindingGroups) {
  PruneGroup g;
  g.id = 7;
  g.width = 1;
  try {
    plan_step({g}, {{7, {0.5}}}, plain(PruneScheme::kGlobal), 1, {});
    FAIL() << "expected InfeasibleTarget";
  } catch (const InfeasibleTarget& e) {
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
  }
}

TEST(ApplyPlan, EmptyPlanLeavesGraphUnchanged) {
  const ModelGraph m = zoo::vgg_style(0);
  EXPECT_EQ(apply_plan(m, build_groups(m), {}), m);
}

TEST(ApplyPlan, ResidualRemovalShrinksDownsamplePath) {
  const ModelGraph m = zoo::resnet_tiny(0);
  PrunePlan plan;
  plan.actions = {{4, 3}};
  const ModelGraph p = apply_plan(m, build_groups(m), plan);
  for (const char* id : {"conv2b", "down2"}) EXPECT_EQ(p.node(id).attrs.out_channels, 15) << id;
  EXPECT_EQ(p.node("bn2b").param("gamma").numel(), 15);
  EXPECT_EQ(p.node("fc").attrs.in_channels, 15);
}

TEST(ApplyPlan, UnprunableGroupIsRejected) {
  const ModelGraph m = zoo::chain_cnn(0);
  PrunePlan plan;
  plan.actions = {{0, 0}};
  EXPECT_THROW(apply_plan(m, build_groups(m), plan), ConfigError);
}

TEST(PruneToTarget, SpeedupOneTakesNoSteps) {
  const ModelGraph m = zoo::chain_cnn(0);
  PruneConfig cfg;
  cfg.speedup = 1.0;
  const auto r = prune_to_target(m, cfg);
  EXPECT_TRUE(r.steps.empty());
  EXPECT_EQ(r.model, m);
  EXPECT_EQ(r.step_time(), 0.0);
}

TEST(PruneToTarget, ReachesBudgetAndRespectsFloors) {
  const ModelGraph m = zoo::resnet_tiny(1);
  PruneConfig cfg;
  cfg.speedup = 3.0;
  cfg.steps = 50;
  const auto r = prune_to_target(m, cfg);
  EXPECT_LE(static_cast<double>(r.final_cost.total_flops), r.budget);
  EXPECT_EQ(r.quantum, (8 + 8 + 16 + 16 + 49) / 50);
  for (const auto& [gid, w] : r.original_widths) {
    EXPECT_GE(r.final_widths.at(gid), group_floor(cfg.scheme, cfg.protection, w));
  }
  ASSERT_FALSE(r.steps.empty());
  EXPECT_EQ(r.steps.back().flops, r.final_cost.total_flops);
  EXPECT_EQ(r.telemetry_json()["steps"].size(), r.steps.size());
}

TEST(PruneToTarget, DeterministicForFixedSeed) {
  const ModelGraph m = zoo::vgg_style(2);
  PruneConfig cfg;
  cfg.speedup = 2.0;
  cfg.steps = 20;
  cfg.criterion = CriterionSpec::named("random");
  cfg.seed = 9;
  EXPECT_EQ(prune_to_target(m, cfg).model, prune_to_target(m, cfg).model);
  PruneConfig other = cfg;
  other.seed = 10;
  EXPECT_NE(prune_to_target(m, other).model, prune_to_target(m, cfg).model);
}

TEST(PruneToTarget, DataDrivenCriteriaNeedCalibration) {
  const ModelGraph m = zoo::chain_cnn(0);
  PruneConfig cfg;
  cfg.criterion = CriterionSpec::named("taylor");
  EXPECT_THROW(prune_to_target(m, cfg), ConfigError);
  const Dataset calib = oracle::random_batch({3, 8, 8}, 40, 10, 1);
  cfg.steps = 10;
  const auto r = prune_to_target(m, cfg, &calib);
  EXPECT_LE(static_cast<double>(r.final_cost.total_flops), r.budget);
}

TEST(PruneToTarget, UnreachableTargetIsInfeasible) {
  PruneConfig cfg;
  cfg.speedup = 1000.0;
  cfg.steps = 10;
  EXPECT_THROW(prune_to_target(zoo::chain_cnn(0), cfg), InfeasibleTarget);
}

TEST(PruneConfig, JsonRoundTripAndValidation) {
  PruneConfig c;
  c.speedup = 4.0;
  c.scheme = PruneScheme::kLocal;
  c.criterion = CriterionSpec::named("lamp");
  EXPECT_EQ(PruneConfig::from_json(c.to_json()).to_json(), c.to_json());
  c.protection = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_prune_scheme("greedy"), ConfigError);
}

}  // namespace
}  // namespace structprune
