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

#ifndef STRUCTPRUNE_GROUPS_HPP_
#define STRUCTPRUNE_GROUPS_HPP_

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "structprune/model.hpp"

namespace structprune {

// One prunable site. `expansion` > 1 marks a linear input fed through a
// flatten: channel k owns features [k*expansion, (k+1)*expansion).
struct GroupMember {
  std::string layer;
  ParamRole role = ParamRole::kConvOut;
  std::int64_t expansion = 1;
  // Node whose output tensor this member reads (consumers only); used by
  // activation-based criteria.
  std::string feed;

  friend bool operator==(const GroupMember&, const GroupMember&) = default;
};

struct PruneGroup {
  int id = 0;
  std::vector<GroupMember> members;
  std::int64_t width = 0;  // channel extent shared by all members
  std::int64_t protected_floor = 1;
  bool prunable = true;
  std::string unprunable_reason;  // "input" or "output" when !prunable

  bool has_role(ParamRole role) const;
  friend bool operator==(const PruneGroup&, const PruneGroup&) = default;
};

// Partitions every prunable (layer, role) site into index-coupled groups.
// Groups are ordered by the position at which their channel space first
// appears in topological order, so ids are stable across runs.
std::vector<PruneGroup> build_groups(const ModelGraph& model);

// Number of (layer, role) sites in the model (the partition's ground set).
std::size_t count_prunable_sites(const ModelGraph& model);

// Keep-index lists for each member (same order as g.members) after removing
// `removed` channel indices from the group.
std::vector<std::vector<std::int64_t>> group_prunable_mask(
    const PruneGroup& g, const std::set<std::int64_t>& removed);

// Applies `removed` to every member of `g`; the result is revalidated.
ModelGraph prune_group(const ModelGraph& model, const PruneGroup& g,
                       const std::set<std::int64_t>& removed);

nlohmann::json groups_to_json(const std::vector<PruneGroup>& groups);

}  // namespace structprune

#endif  // STRUCTPRUNE_GROUPS_HPP_
