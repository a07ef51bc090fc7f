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

#ifndef STRUCTPRUNE_SPARSE_REG_HPP_
#define STRUCTPRUNE_SPARSE_REG_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "structprune/dataset.hpp"
#include "structprune/groups.hpp"
#include "structprune/train.hpp"

namespace structprune {

struct RegConfig {
  std::string name = "group_lasso";  // group_lasso | group_norm | bnscale | growing_reg
  double lambda = 1e-4;
  double eta = 1e-2;     // learning rate of the sparse-learning stage
  double delta = 0.0;    // growing_reg increment per interval
  int interval = 1;      // growing_reg interval in epochs
  double epsilon = 1e-8;
  double fraction = 0.5;  // growing_reg: share of each group's indices penalized

  void validate() const;
  nlohmann::json to_json() const;
  static RegConfig from_json(const nlohmann::json& j);
  static RegConfig from_json(const nlohmann::json& j, RegConfig base);
};

const std::vector<std::string>& regularizer_names();
// Leaderboard label, e.g. "GroupLASSO".
std::string regularizer_display_name(std::string_view name);

// λ_t = λ + δ·floor(epoch / interval).
double growing_lambda(const RegConfig& cfg, int epoch);

// Published hyperparameters keyed by (regularizer, pruning criterion, model,
// dataset). `eta` is absent where it follows the finetuning schedule.
struct RegPreset {
  std::string reg;
  std::string criterion;
  std::string model;
  std::string dataset;
  double lambda = 0.0;
  std::optional<double> eta;
  double delta = 0.0;
};

const std::vector<RegPreset>& reg_presets();
// Key "reg/criterion/model/dataset"; a shorter "reg/model/dataset" matches the
// first criterion listed. Throws ConfigError when nothing matches.
RegConfig preset_config(std::string_view key);

// Gradient adjustment applied after backward and before the optimizer step.
// Only prunable groups are regularized. Throws ConfigError for bnscale on a
// model without batchnorm.
GradHook make_grad_hook(const RegConfig& cfg, const ModelGraph& model,
                        const std::vector<PruneGroup>& groups);

// The quantity each regularizer drives down:
//   group_lasso  Σ over members and indices of ||member k-slice||₂
//   group_norm   Σ over indices of the norm of the concatenated k-slices
//   bnscale      Σ |γ|
//   growing_reg  Σ of squared group norms over the bottom `fraction` indices
double reg_statistic(const RegConfig& cfg, const ModelGraph& model,
                     const std::vector<PruneGroup>& groups);

struct SparsifyResult {
  ModelGraph model;
  std::vector<EpochMetrics> history;
  double reg_time = 0.0;  // mean seconds per sparse epoch
};

// Trains with the hook at learning rate η; other settings come from `train_cfg`.
SparsifyResult sparsify(const ModelGraph& model, const Dataset& data, const RegConfig& cfg,
                        const TrainConfig& train_cfg);

}  // namespace structprune

#endif  // STRUCTPRUNE_SPARSE_REG_HPP_
