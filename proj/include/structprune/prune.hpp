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

#ifndef STRUCTPRUNE_PRUNE_HPP_
#define STRUCTPRUNE_PRUNE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "structprune/dataset.hpp"
#include "structprune/flops.hpp"
#include "structprune/groups.hpp"
#include "structprune/importance.hpp"

namespace structprune {

enum class PruneScheme { kLocal, kGlobal, kProtectedGlobal };

std::string_view to_string(PruneScheme s);
PruneScheme parse_prune_scheme(std::string_view name);

struct PruneConfig {
  double speedup = 2.0;
  int steps = 400;
  PruneScheme scheme = PruneScheme::kProtectedGlobal;
  double protection = 0.10;  // share of each group's original width kept
  CriterionSpec criterion;
  std::uint64_t seed = 0;
  // Applied to each group's scores before the cross-group threshold.
  Normalization global_normalization = Normalization::kMax;
  std::int64_t calibration_samples = 32;

  void validate() const;
  nlohmann::json to_json() const;
  static PruneConfig from_json(const nlohmann::json& j);
  static PruneConfig from_json(const nlohmann::json& j, PruneConfig base);
};

struct PruneAction {
  int group_id = 0;
  std::int64_t index = 0;
  friend bool operator==(const PruneAction&, const PruneAction&) = default;
};

struct PrunePlan {
  std::vector<PruneAction> actions;  // in removal order
  std::optional<std::int64_t> flops_after;

  bool empty() const { return actions.empty(); }
};

// Minimum width a group keeps under `scheme`.
std::int64_t group_floor(PruneScheme scheme, double protection, std::int64_t original_width);

// One step: removes up to `quantum` indices. `original_widths` maps group id
// to its width before the first step. Throws InfeasibleTarget, naming the
// groups at their floor, when nothing can be removed.
PrunePlan plan_step(const std::vector<PruneGroup>& groups,
                    const std::vector<ImportanceScores>& scores, const PruneConfig& cfg,
                    std::int64_t quantum, const std::map<int, std::int64_t>& original_widths);

ModelGraph apply_plan(const ModelGraph& model, const std::vector<PruneGroup>& groups,
                      const PrunePlan& plan);

struct StepTelemetry {
  int step = 0;
  std::int64_t removed = 0;
  std::int64_t flops = 0;
  std::int64_t params = 0;
  double seconds = 0.0;  // scoring plus removal
};

struct PruneResult {
  ModelGraph model;
  CostReport original;
  CostReport final_cost;  // compared to `original`
  double budget = 0.0;
  std::int64_t quantum = 0;
  std::vector<StepTelemetry> steps;
  std::map<int, std::int64_t> original_widths;
  std::map<int, std::int64_t> final_widths;

  double step_time() const;  // mean seconds per step, 0 without steps
  nlohmann::json telemetry_json() const;
};

// Iterates score/plan/apply with quantum = ceil(original prunable width / S)
// until FLOPs <= budget. Data-driven criteria draw `calibration_samples`
// samples from `calibration` (seeded by cfg.seed) and rescore every step.
PruneResult prune_to_target(const ModelGraph& model, const PruneConfig& cfg,
                            const Dataset* calibration = nullptr);

}  // namespace structprune

#endif  // STRUCTPRUNE_PRUNE_HPP_
