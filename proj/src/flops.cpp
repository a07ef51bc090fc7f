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

#include "structprune/flops.hpp"

#include <fmt/format.h>

namespace structprune {

LayerCost layer_cost(const LayerNode& layer, const FeatureShape& input) {
  const LayerAttrs& a = layer.attrs;
  LayerCost c;
  c.out_h = input.h;
  c.out_w = input.w;
  switch (layer.kind) {
    case LayerKind::kConv2d: {
      c.out_h = window_output_extent(input.h, a.kernel, a.stride, a.padding);
      c.out_w = window_output_extent(input.w, a.kernel, a.stride, a.padding);
      const std::int64_t k2 = a.kernel * a.kernel;
      c.params = a.out_channels * a.in_channels * k2 + (a.bias ? a.out_channels : 0);
      c.flops = a.in_channels * a.out_channels * c.out_h * c.out_w * k2;
      break;
    }
    case LayerKind::kLinear:
      c.out_h = c.out_w = 1;
      c.params = a.out_channels * a.in_channels + (a.bias ? a.out_channels : 0);
      c.flops = a.in_channels * a.out_channels;
      break;
    case LayerKind::kBatchNorm2d:
      c.params = 4 * a.out_channels;
      c.flops = 2 * a.out_channels * input.h * input.w;
      break;
    case LayerKind::kMaxPool2d:
    case LayerKind::kAvgPool2d:
      c.out_h = window_output_extent(input.h, a.kernel, a.stride, a.padding);
      c.out_w = window_output_extent(input.w, a.kernel, a.stride, a.padding);
      c.flops = input.c * c.out_h * c.out_w;
      break;
    case LayerKind::kGlobalAvgPool:
      c.out_h = c.out_w = 1;
      c.flops = input.c;
      break;
    case LayerKind::kRelu:
    case LayerKind::kAdd:
      c.flops = input.numel();
      break;
    case LayerKind::kFlatten:
      c.out_h = c.out_w = 1;
      break;
    case LayerKind::kInput:
    case LayerKind::kOutput:
    case LayerKind::kSoftmaxCrossEntropy:
      break;
  }
  return c;
}

CostReport model_cost(const ModelGraph& model) {
  CostReport r;
  for (std::size_t i : model.topo_order()) {
    const LayerNode& n = model.node(i);
    LayerCostEntry e{n.id, n.kind, layer_cost(n, model.input_shape(i))};
    const FeatureShape& produced = model.output_shape(i);
    if (e.cost.out_h != produced.h || e.cost.out_w != produced.w) {
      throw ModelError(n.id, "cost propagation disagrees with graph shapes");
    }
    r.total_params += e.cost.params;
    r.total_flops += e.cost.flops;
    r.layers.push_back(std::move(e));
  }
  return r;
}

CostReport CostReport::compare_to(const CostReport& baseline) const {
  CostReport out = *this;
  out.params_ratio = baseline.total_params > 0
                         ? static_cast<double>(total_params) / baseline.total_params
                         : 1.0;
  out.flops_ratio = baseline.total_flops > 0
                        ? static_cast<double>(total_flops) / baseline.total_flops
                        : 1.0;
  return out;
}

double flops_budget(const CostReport& original, double speedup) {
  if (!(speedup >= 1.0)) {
    throw ConfigError(fmt::format("speedup must be >= 1, got {}", speedup));
  }
  return static_cast<double>(original.total_flops) / speedup;
}

nlohmann::json CostReport::to_json() const {
  nlohmann::json layers_json = nlohmann::json::array();
  for (const LayerCostEntry& e : layers) {
    layers_json.push_back({{"id", e.id},
                           {"kind", std::string(to_string(e.kind))},
                           {"params", e.cost.params},
                           {"flops", e.cost.flops},
                           {"out_h", e.cost.out_h},
                           {"out_w", e.cost.out_w}});
  }
  nlohmann::json j = {{"layers", std::move(layers_json)},
                      {"total_params", total_params},
                      {"total_flops", total_flops}};
  if (params_ratio) j["params_ratio"] = *params_ratio;
  if (flops_ratio) j["flops_ratio"] = *flops_ratio;
  return j;
}

std::string CostReport::to_table() const {
  std::string out = fmt::format("{:<20} {:<16} {:>12} {:>14} {:>9}\n", "Layer",
                                "Kind", "Parameters", "FLOPs", "Out HxW");
  for (const LayerCostEntry& e : layers) {
    if (e.cost.params == 0 && e.cost.flops == 0) continue;
    out += fmt::format("{:<20} {:<16} {:>12} {:>14} {:>9}\n", e.id,
                       to_string(e.kind), e.cost.params, e.cost.flops,
                       fmt::format("{}x{}", e.cost.out_h, e.cost.out_w));
  }
  out += fmt::format("{:<37} {:>12} {:>14}\n", "Total", total_params, total_flops);
  if (params_ratio && flops_ratio) {
    out += fmt::format("Retained: parameters {:.2f}%, FLOPs {:.2f}%\n",
                       *params_ratio * 100.0, *flops_ratio * 100.0);
  }
  return out;
}

}  // namespace structprune
