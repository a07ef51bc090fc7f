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

#include "structprune/model.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <sstream>

namespace structprune {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 12> kKindNames{{
    {LayerKind::kInput, "input"},
    {LayerKind::kOutput, "output"},
    {LayerKind::kConv2d, "conv2d"},
    {LayerKind::kLinear, "linear"},
    {LayerKind::kBatchNorm2d, "batchnorm2d"},
    {LayerKind::kRelu, "relu"},
    {LayerKind::kMaxPool2d, "maxpool2d"},
    {LayerKind::kAvgPool2d, "avgpool2d"},
    {LayerKind::kGlobalAvgPool, "globalavgpool"},
    {LayerKind::kFlatten, "flatten"},
    {LayerKind::kAdd, "add"},
    {LayerKind::kSoftmaxCrossEntropy, "softmax_ce_loss"},
}};

constexpr std::array<std::pair<ParamRole, std::string_view>, 5> kRoleNames{{
    {ParamRole::kConvOut, "ConvOut"},
    {ParamRole::kConvIn, "ConvIn"},
    {ParamRole::kLinearOut, "LinearOut"},
    {ParamRole::kLinearIn, "LinearIn"},
    {ParamRole::kNormScaleShift, "NormScaleShift"},
}};

std::size_t arity(LayerKind kind) {
  switch (kind) {
    case LayerKind::kInput:
      return 0;
    case LayerKind::kAdd:
      return 2;
    default:
      return 1;
  }
}

void expect_shape(const LayerNode& node, const std::string& name,
                  const Shape& expected) {
  auto it = node.params.find(name);
  if (it == node.params.end()) {
    throw ModelError(node.id, "missing parameter '" + name + "'");
  }
  if (it->second.shape() != expected) {
    throw ModelError(node.id, "parameter '" + name + "' has shape " +
                                  shape_to_string(it->second.shape()) +
                                  ", expected " + shape_to_string(expected));
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("unsupported layer kind '" + std::string(name) + "'");
}

std::string_view to_string(ParamRole role) {
  for (const auto& [r, name] : kRoleNames) {
    if (r == role) return name;
  }
  return "unknown";
}

ParamRole parse_param_role(std::string_view name) {
  for (const auto& [r, n] : kRoleNames) {
    if (n == name) return r;
  }
  throw ConfigError("unknown parameter role '" + std::string(name) + "'");
}

const std::vector<RoleSlice>& role_slices(ParamRole role) {
  static const std::vector<RoleSlice> kOut{{"weight", 0}, {"bias", 0}};
  static const std::vector<RoleSlice> kIn{{"weight", 1}};
  static const std::vector<RoleSlice> kNorm{{"gamma", 0},
                                            {"beta", 0},
                                            {"running_mean", 0},
                                            {"running_var", 0}};
  switch (role) {
    case ParamRole::kConvOut:
    case ParamRole::kLinearOut:
      return kOut;
    case ParamRole::kConvIn:
    case ParamRole::kLinearIn:
      return kIn;
    case ParamRole::kNormScaleShift:
      return kNorm;
  }
  return kIn;
}

LayerKind role_layer_kind(ParamRole role) {
  switch (role) {
    case ParamRole::kConvOut:
    case ParamRole::kConvIn:
      return LayerKind::kConv2d;
    case ParamRole::kLinearOut:
    case ParamRole::kLinearIn:
      return LayerKind::kLinear;
    case ParamRole::kNormScaleShift:
      return LayerKind::kBatchNorm2d;
  }
  return LayerKind::kConv2d;
}

bool is_producer_role(ParamRole role) {
  return role == ParamRole::kConvOut || role == ParamRole::kLinearOut;
}

bool is_consumer_role(ParamRole role) {
  return role == ParamRole::kConvIn || role == ParamRole::kLinearIn;
}

std::int64_t role_extent(const LayerNode& layer, ParamRole role) {
  if (layer.kind != role_layer_kind(role)) {
    throw ModelError(layer.id, "role " + std::string(to_string(role)) +
                                   " does not apply to a " +
                                   std::string(to_string(layer.kind)));
  }
  return is_consumer_role(role) ? layer.attrs.in_channels
                                : layer.attrs.out_channels;
}

std::vector<RoleSlice> trainable_role_slices(const LayerNode& layer,
                                             ParamRole role) {
  std::vector<RoleSlice> out;
  for (const RoleSlice& s : role_slices(role)) {
    if (s.param == "running_mean" || s.param == "running_var") continue;
    if (!layer.has_param(s.param)) continue;
    out.push_back(s);
  }
  return out;
}

std::string FeatureShape::to_string() const {
  std::ostringstream os;
  if (flat) {
    os << '[' << c << ']';
  } else {
    os << '[' << c << ',' << h << ',' << w << ']';
  }
  return os.str();
}

std::int64_t window_output_extent(std::int64_t in, std::int64_t kernel,
                                  std::int64_t stride, std::int64_t padding) {
  const std::int64_t span = in + 2 * padding - kernel;
  if (span < 0 || stride <= 0) {
    throw ShapeError("window of size " + std::to_string(kernel) +
                     " does not fit input extent " + std::to_string(in) +
                     " with padding " + std::to_string(padding));
  }
  return span / stride + 1;
}

const Tensor& LayerNode::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw ModelError(id, "missing parameter '" + name + "'");
  }
  return it->second;
}

ModelGraph::ModelGraph(ModelMetadata metadata, std::vector<LayerNode> nodes,
                       std::vector<Edge> edges)
    : metadata_(std::move(metadata)),
      nodes_(std::move(nodes)),
      edges_(std::move(edges)) {
  validate();
}

const LayerNode& ModelGraph::node(std::string_view id) const {
  return nodes_[index_of(id)];
}

std::size_t ModelGraph::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) {
    throw ModelError(std::string(id), "no such node");
  }
  return it->second;
}

bool ModelGraph::contains(std::string_view id) const {
  return by_id_.contains(std::string(id));
}

const FeatureShape& ModelGraph::input_shape(std::size_t index) const {
  if (inputs_[index].empty()) return shapes_[index];
  return shapes_[inputs_[index].front()];
}

std::int64_t ModelGraph::param_count() const {
  std::int64_t total = 0;
  for (const LayerNode& n : nodes_) {
    for (const auto& [name, t] : n.params) total += t.numel();
  }
  return total;
}

ModelGraph ModelGraph::with_nodes(std::vector<LayerNode> nodes) const {
  return ModelGraph(metadata_, std::move(nodes), edges_);
}

ModelGraph ModelGraph::with_node(LayerNode replacement) const {
  std::vector<LayerNode> nodes = nodes_;
  nodes.at(index_of(replacement.id)) = std::move(replacement);
  return ModelGraph(metadata_, std::move(nodes), edges_);
}

void ModelGraph::validate() {
  if (metadata_.input_shape.size() != 3) {
    throw ModelError("", "input shape must be [C,H,W], got " +
                             shape_to_string(metadata_.input_shape));
  }
  for (std::int64_t e : metadata_.input_shape) {
    if (e <= 0) throw ModelError("", "input extents must be positive");
  }

  by_id_.clear();
  std::size_t n_inputs = 0;
  std::size_t n_outputs = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const LayerNode& n = nodes_[i];
    if (n.id.empty()) throw ModelError("", "node with empty id");
    if (!by_id_.emplace(n.id, i).second) {
      throw ModelError(n.id, "duplicate node id");
    }
    if (n.kind == LayerKind::kInput) {
      input_ = i;
      ++n_inputs;
    }
    if (n.kind == LayerKind::kOutput) {
      output_ = i;
      ++n_outputs;
    }
  }
  if (n_inputs != 1) throw ModelError("", "graph needs exactly one input node");
  if (n_outputs != 1) {
    throw ModelError("", "graph needs exactly one output node");
  }

  const std::size_t count = nodes_.size();
  inputs_.assign(count, {});
  consumers_.assign(count, {});
  std::vector<std::vector<int>> slots(count);
  std::vector<std::vector<std::size_t>> by_slot(count);
  for (const Edge& e : edges_) {
    auto src = by_id_.find(e.src);
    auto dst = by_id_.find(e.dst);
    if (src == by_id_.end()) throw ModelError(e.src, "edge from unknown node");
    if (dst == by_id_.end()) throw ModelError(e.dst, "edge to unknown node");
    const std::size_t d = dst->second;
    const std::size_t need = arity(nodes_[d].kind);
    if (e.slot < 0 || static_cast<std::size_t>(e.slot) >= std::max<std::size_t>(need, 1)) {
      throw ModelError(e.dst, "input slot " + std::to_string(e.slot) +
                                  " out of range");
    }
    if (by_slot[d].empty()) by_slot[d].assign(need, count);
    if (need == 0) throw ModelError(e.dst, "input node cannot have inputs");
    if (by_slot[d][static_cast<std::size_t>(e.slot)] != count) {
      throw ModelError(e.dst, "input slot " + std::to_string(e.slot) +
                                  " connected twice");
    }
    by_slot[d][static_cast<std::size_t>(e.slot)] = src->second;
    consumers_[src->second].push_back(d);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t need = arity(nodes_[i].kind);
    if (need == 0) continue;
    if (by_slot[i].size() != need ||
        std::find(by_slot[i].begin(), by_slot[i].end(), count) !=
            by_slot[i].end()) {
      throw ModelError(nodes_[i].id, "expects " + std::to_string(need) +
                                         " connected input(s)");
    }
    inputs_[i] = by_slot[i];
  }
  if (!consumers_[output_].empty()) {
    throw ModelError(nodes_[output_].id, "output node cannot feed other nodes");
  }

  // Kahn's algorithm with a min-heap on declaration index for stable order.
  std::vector<std::size_t> indegree(count, 0);
  for (std::size_t i = 0; i < count; ++i) indegree[i] = inputs_[i].size();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>>
      ready;
  for (std::size_t i = 0; i < count; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  topo_.clear();
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    topo_.push_back(i);
    for (std::size_t c : consumers_[i]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (topo_.size() != count) {
    for (std::size_t i = 0; i < count; ++i) {
      if (indegree[i] != 0) throw ModelError(nodes_[i].id, "graph has a cycle");
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (i != input_ && inputs_[i].empty()) {
      throw ModelError(nodes_[i].id, "node is not connected to the input");
    }
  }
  topo_pos_.assign(count, 0);
  for (std::size_t p = 0; p < count; ++p) topo_pos_[topo_[p]] = p;

  shapes_.assign(count, {});
  for (std::size_t i : topo_) {
    check_params(nodes_[i]);
    shapes_[i] = infer_shape(i);
  }
}

void ModelGraph::check_params(const LayerNode& node) const {
  const LayerAttrs& a = node.attrs;
  std::vector<std::string> allowed;
  switch (node.kind) {
    case LayerKind::kConv2d:
      if (a.in_channels <= 0 || a.out_channels <= 0 || a.kernel <= 0 ||
          a.stride <= 0 || a.padding < 0) {
        throw ModelError(node.id, "invalid conv2d attributes");
      }
      expect_shape(node, "weight",
                   {a.out_channels, a.in_channels, a.kernel, a.kernel});
      allowed = {"weight"};
      if (a.bias) {
        expect_shape(node, "bias", {a.out_channels});
        allowed.emplace_back("bias");
      }
      break;
    case LayerKind::kLinear:
      if (a.in_channels <= 0 || a.out_channels <= 0) {
        throw ModelError(node.id, "invalid linear attributes");
      }
      expect_shape(node, "weight", {a.out_channels, a.in_channels});
      allowed = {"weight"};
      if (a.bias) {
        expect_shape(node, "bias", {a.out_channels});
        allowed.emplace_back("bias");
      }
      break;
    case LayerKind::kBatchNorm2d:
      if (a.out_channels <= 0 || !(a.epsilon > 0.0) || a.momentum < 0.0 ||
          a.momentum > 1.0) {
        throw ModelError(node.id, "invalid batchnorm2d attributes");
      }
      allowed = {"gamma", "beta", "running_mean", "running_var"};
      for (const std::string& name : allowed) {
        expect_shape(node, name, {a.out_channels});
      }
      for (float v : node.params.at("running_var").data()) {
        if (!(v >= 0.0f)) {
          throw ModelError(node.id, "running_var must be nonnegative");
        }
      }
      break;
    case LayerKind::kMaxPool2d:
    case LayerKind::kAvgPool2d:
      if (a.kernel <= 0 || a.stride <= 0 || a.padding < 0 ||
          2 * a.padding > a.kernel) {
        throw ModelError(node.id, "invalid pooling attributes");
      }
      break;
    default:
      break;
  }
  for (const auto& [name, t] : node.params) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      throw ModelError(node.id, "unexpected parameter '" + name + "'");
    }
    if (!t.all_finite()) {
      throw ModelError(node.id, "parameter '" + name + "' is not finite");
    }
  }
}

FeatureShape ModelGraph::infer_shape(std::size_t index) const {
  const LayerNode& n = nodes_[index];
  const LayerAttrs& a = n.attrs;
  if (n.kind == LayerKind::kInput) {
    return {metadata_.input_shape[0], metadata_.input_shape[1],
            metadata_.input_shape[2], false};
  }
  const FeatureShape in = shapes_[inputs_[index].front()];
  auto need_spatial = [&] {
    if (in.flat) {
      throw ModelError(n.id, std::string(to_string(n.kind)) +
                                 " needs a [C,H,W] input, got " +
                                 in.to_string());
    }
  };
  try {
    switch (n.kind) {
      case LayerKind::kConv2d: {
        need_spatial();
        if (in.c != a.in_channels) {
          throw ModelError(n.id, "expects " + std::to_string(a.in_channels) +
                                     " input channels, predecessor provides " +
                                     std::to_string(in.c));
        }
        return {a.out_channels,
                window_output_extent(in.h, a.kernel, a.stride, a.padding),
                window_output_extent(in.w, a.kernel, a.stride, a.padding),
                false};
      }
      case LayerKind::kLinear: {
        if (!in.flat) {
          throw ModelError(n.id, "linear needs a flat input, got " +
                                     in.to_string());
        }
        if (in.c != a.in_channels) {
          throw ModelError(n.id, "expects " + std::to_string(a.in_channels) +
                                     " input features, predecessor provides " +
                                     std::to_string(in.c));
        }
        return {a.out_channels, 1, 1, true};
      }
      case LayerKind::kBatchNorm2d:
        need_spatial();
        if (in.c != a.out_channels) {
          throw ModelError(n.id, "expects " + std::to_string(a.out_channels) +
                                     " channels, predecessor provides " +
                                     std::to_string(in.c));
        }
        return in;
      case LayerKind::kMaxPool2d:
      case LayerKind::kAvgPool2d:
        need_spatial();
        return {in.c, window_output_extent(in.h, a.kernel, a.stride, a.padding),
                window_output_extent(in.w, a.kernel, a.stride, a.padding),
                false};
      case LayerKind::kGlobalAvgPool:
        need_spatial();
        return {in.c, 1, 1, true};
      case LayerKind::kFlatten:
        return {in.numel(), 1, 1, true};
      case LayerKind::kAdd: {
        const FeatureShape other = shapes_[inputs_[index][1]];
        if (!(in == other)) {
          throw ModelError(n.id, "add operands differ: " + in.to_string() +
                                     " vs " + other.to_string());
        }
        return in;
      }
      case LayerKind::kSoftmaxCrossEntropy:
        if (!in.flat) {
          throw ModelError(n.id, "loss needs flat logits, got " +
                                     in.to_string());
        }
        return in;
      case LayerKind::kRelu:
      case LayerKind::kOutput:
      case LayerKind::kInput:
        return in;
    }
  } catch (const ShapeError& e) {
    throw ModelError(n.id, e.what());
  }
  return in;
}

LayerNode slice_param(const LayerNode& layer, ParamRole role,
                      std::span<const std::int64_t> keep) {
  const std::int64_t extent = role_extent(layer, role);
  if (keep.empty()) {
    throw ModelError(layer.id, "slice would remove every index of " +
                                   std::string(to_string(role)));
  }
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= extent) {
      throw ModelError(layer.id, "keep index " + std::to_string(keep[i]) +
                                     " outside [0," + std::to_string(extent) +
                                     ")");
    }
    if (i > 0 && keep[i] <= keep[i - 1]) {
      throw ModelError(layer.id, "keep indices must be strictly increasing");
    }
  }
  LayerNode out = layer;
  for (const RoleSlice& s : role_slices(role)) {
    auto it = out.params.find(s.param);
    if (it == out.params.end()) continue;
    it->second = gather_axis(it->second, s.axis, keep);
  }
  const auto kept = static_cast<std::int64_t>(keep.size());
  if (is_consumer_role(role)) {
    out.attrs.in_channels = kept;
  } else {
    out.attrs.out_channels = kept;
  }
  return out;
}

}  // namespace structprune
