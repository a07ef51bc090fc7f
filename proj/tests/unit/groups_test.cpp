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

#include <random>
#include <set>
#include <tuple>

#include "../support/group_tables.hpp"
#include "structprune/error.hpp"
#include "structprune/flops.hpp"
#include "structprune/groups.hpp"
#include "structprune/zoo.hpp"

namespace structprune {
namespace {

// Tables live in the shared support header so the acceptance suite checks
// the same hand derivation.
TEST(BuildGroups, MatchesHandTables) {
  for (const auto& t : oracle::hand_group_tables()) {
    EXPECT_EQ(oracle::table_mismatch(build_groups(zoo::by_name(t.model, 0)), t.groups), "") << t.model;
  }
}

TEST(BuildGroups, SingleConvHasTwoGroups) {
  ModelBuilder b("single", {2, 4, 4}, 3, 0);
  const ModelGraph m = b.build(b.conv("conv", ModelBuilder::kInput, 2, 3, 3));
  const auto groups = build_groups(m);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_FALSE(groups[0].prunable);
  EXPECT_EQ(groups[0].unprunable_reason, "input");
  EXPECT_TRUE(groups[1].has_role(ParamRole::kConvOut));
}

TEST(BuildGroups, PartitionCoversEverySiteOnce) {
  for (const auto& name : zoo::names()) {
    const ModelGraph m = zoo::by_name(name, 1);
    std::set<std::pair<std::string, ParamRole>> seen;
    std::size_t count = 0;
    for (const auto& g : build_groups(m)) {
      for (const auto& mem : g.members) {
        EXPECT_TRUE(seen.insert({mem.layer, mem.role}).second) << name << " " << mem.layer;
        ++count;
      }
    }
    EXPECT_EQ(count, count_prunable_sites(m)) << name;
  }
}

TEST(BuildGroups, StableAcrossCalls) {
  const ModelGraph m = zoo::desk_cnn(4);
  EXPECT_EQ(build_groups(m), build_groups(m));
}

PruneGroup expanded_group() {
  PruneGroup g;
  g.width = 4;
  g.members = {{"conv", ParamRole::kConvOut, 1, ""}, {"fc", ParamRole::kLinearIn, 4, "flatten"}};
  return g;
}

TEST(GroupMask, ExpandsFlattenedMembers) {
  const auto keep = group_prunable_mask(expanded_group(), {1});
  ASSERT_EQ(keep.size(), 2u);
  EXPECT_EQ(keep[0], (std::vector<std::int64_t>{0, 2, 3}));
  std::vector<std::int64_t> want;
  for (std::int64_t i = 0; i < 4; ++i) want.push_back(i);
  for (std::int64_t i = 8; i < 16; ++i) want.push_back(i);
  EXPECT_EQ(keep[1], want);
}

TEST(GroupMask, EmptyRemovalKeepsEverything) {
  const auto keep = group_prunable_mask(expanded_group(), {});
  EXPECT_EQ(keep[0].size(), 4u);
  EXPECT_EQ(keep[1].size(), 16u);
}

TEST(GroupMask, FloorAndRangeViolationsThrow) {
  PruneGroup g = expanded_group();
  g.protected_floor = 2;
  EXPECT_THROW(group_prunable_mask(g, {0, 1, 2}), ConfigError);
  EXPECT_THROW(group_prunable_mask(g, {4}), ConfigError);
}

TEST(PruneGroup, ResidualRemovalShrinksEveryMember) {
  const ModelGraph m = zoo::resnet_tiny(0);
  const auto groups = build_groups(m);
  const ModelGraph p = prune_group(m, groups[4], {0, 5});
  EXPECT_EQ(p.node("conv2b").attrs.out_channels, 14);
  EXPECT_EQ(p.node("down2").attrs.out_channels, 14);
  EXPECT_EQ(p.node("bn_down2").param("gamma").numel(), 14);
  EXPECT_EQ(p.node("fc").attrs.in_channels, 14);
}

// Random removals on every group of every zoo architecture must leave a graph
// that passes full validation and reports the expected widths.
TEST(PruneGroup, RandomRemovalFuzzKeepsGraphsValid) {
  std::mt19937_64 gen(123);
  for (int trial = 0; trial < 200; ++trial) {
    const auto& names = zoo::names();
    const std::string name = names[static_cast<std::size_t>(trial) % names.size()];
    ModelGraph m = zoo::by_name(name, static_cast<std::uint64_t>(trial));
    for (int round = 0; round < 2; ++round) {
      const auto groups = build_groups(m);
      std::map<int, std::int64_t> expect;
      for (const auto& g : groups) {
        if (!g.prunable) continue;
        std::uniform_int_distribution<std::int64_t> count(0, g.width - 1);
        const std::int64_t k = count(gen);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(g.width));
        for (std::int64_t i = 0; i < g.width; ++i) idx[static_cast<std::size_t>(i)] = i;
        std::shuffle(idx.begin(), idx.end(), gen);
        const std::set<std::int64_t> removed(idx.begin(), idx.begin() + k);
        ASSERT_NO_THROW(m = prune_group(m, g, removed)) << name;
        expect[g.id] = g.width - k;
      }
      for (const auto& g : build_groups(m)) {
        if (g.prunable) EXPECT_EQ(g.width, expect[g.id]) << name;
      }
      EXPECT_NO_THROW(model_cost(m));
    }
  }
}

}  // namespace
}  // namespace structprune
