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

#ifndef STRUCTPRUNE_FLOPS_HPP_
#define STRUCTPRUNE_FLOPS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "structprune/model.hpp"

namespace structprune {

// Cost of one layer for a single input sample. One multiply-accumulate is
// counted as one FLOP.
struct LayerCost {
  std::int64_t params = 0;
  std::int64_t flops = 0;
  std::int64_t out_h = 1;
  std::int64_t out_w = 1;

  friend bool operator==(const LayerCost&, const LayerCost&) = default;
};

// conv: params N̂·N·K² (+N̂), flops N·N̂·Ĥ·Ŵ·K²
// linear: params N̂·N (+N̂), flops N·N̂
// batchnorm: params 4·N̂ (running stats included), flops 2·N̂·Ĥ·Ŵ
// relu / pools / add: flops = output element count
// input, output, flatten, loss: free
LayerCost layer_cost(const LayerNode& layer, const FeatureShape& input);

struct LayerCostEntry {
  std::string id;
  LayerKind kind = LayerKind::kRelu;
  LayerCost cost;
};

struct CostReport {
  std::vector<LayerCostEntry> layers;  // topological order
  std::int64_t total_params = 0;
  std::int64_t total_flops = 0;

  // Filled by compare_to(); fraction of the baseline that remains.
  std::optional<double> params_ratio;
  std::optional<double> flops_ratio;

  CostReport compare_to(const CostReport& baseline) const;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

CostReport model_cost(const ModelGraph& model);

// FLOPs allowed for a model `speedup` times cheaper than `original`.
double flops_budget(const CostReport& original, double speedup);

}  // namespace structprune

#endif  // STRUCTPRUNE_FLOPS_HPP_
