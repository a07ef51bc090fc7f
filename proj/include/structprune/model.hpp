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

#ifndef STRUCTPRUNE_MODEL_HPP_
#define STRUCTPRUNE_MODEL_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "structprune/tensor.hpp"

namespace structprune {

enum class LayerKind {
  kInput,
  kOutput,
  kConv2d,
  kLinear,
  kBatchNorm2d,
  kRelu,
  kMaxPool2d,
  kAvgPool2d,
  kGlobalAvgPool,
  kFlatten,
  kAdd,
  kSoftmaxCrossEntropy,
};

std::string_view to_string(LayerKind kind);
// Throws ConfigError for names outside the supported op set.
LayerKind parse_layer_kind(std::string_view name);

// Kind-specific attributes. Fields a kind does not use stay at their defaults
// and are neither serialized nor compared in a meaningful way.
struct LayerAttrs {
  std::int64_t in_channels = 0;   // conv N, linear in-features
  std::int64_t out_channels = 0;  // conv N̂, linear out-features, norm channels
  std::int64_t kernel = 0;        // conv and windowed pools
  std::int64_t stride = 1;
  std::int64_t padding = 0;
  bool bias = false;
  double epsilon = 1e-5;
  double momentum = 0.1;

  friend bool operator==(const LayerAttrs&, const LayerAttrs&) = default;
};

struct LayerNode {
  std::string id;
  LayerKind kind = LayerKind::kRelu;
  LayerAttrs attrs;
  std::map<std::string, Tensor> params;

  const Tensor& param(const std::string& name) const;
  bool has_param(const std::string& name) const {
    return params.contains(name);
  }

  friend bool operator==(const LayerNode&, const LayerNode&) = default;
};

// Which axis of which parameters a removal of channel index k touches.
enum class ParamRole {
  kConvOut,
  kConvIn,
  kLinearOut,
  kLinearIn,
  kNormScaleShift,
};

std::string_view to_string(ParamRole role);
ParamRole parse_param_role(std::string_view name);

struct RoleSlice {
  std::string param;
  std::size_t axis;
};

// Tensors (by name) and axes a role slices. Absent optional tensors (bias)
// are skipped by callers.
const std::vector<RoleSlice>& role_slices(ParamRole role);
LayerKind role_layer_kind(ParamRole role);
bool is_producer_role(ParamRole role);  // ConvOut / LinearOut
bool is_consumer_role(ParamRole role);  // ConvIn / LinearIn
std::int64_t role_extent(const LayerNode& layer, ParamRole role);
// Trainable tensors (excludes running statistics) touched by a role.
std::vector<RoleSlice> trainable_role_slices(const LayerNode& layer,
                                             ParamRole role);

// Activation shape flowing along an edge; flat tensors carry features in `c`.
struct FeatureShape {
  std::int64_t c = 0;
  std::int64_t h = 1;
  std::int64_t w = 1;
  bool flat = false;

  std::int64_t numel() const { return c * h * w; }
  std::string to_string() const;
  friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

struct Edge {
  std::string src;
  std::string dst;
  int slot = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct ModelMetadata {
  std::string name;
  Shape input_shape;  // [C, H, W]
  std::int64_t num_classes = 0;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

// Output extent of a windowed op; throws ShapeError when non-positive.
std::int64_t window_output_extent(std::int64_t in, std::int64_t kernel,
                                  std::int64_t stride, std::int64_t padding);

// Validated, immutable layer graph. Every transform returns a new graph and
// the constructor rejects anything that breaks the structural invariants.
class ModelGraph {
 public:
  ModelGraph(ModelMetadata metadata, std::vector<LayerNode> nodes,
             std::vector<Edge> edges);

  const ModelMetadata& metadata() const { return metadata_; }
  const std::vector<LayerNode>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  std::size_t size() const { return nodes_.size(); }
  const LayerNode& node(std::size_t index) const { return nodes_.at(index); }
  const LayerNode& node(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;
  bool contains(std::string_view id) const;

  // Kahn order; ties broken by declaration order.
  const std::vector<std::size_t>& topo_order() const { return topo_; }
  std::size_t topo_position(std::size_t index) const { return topo_pos_[index]; }
  // Predecessors ordered by destination slot.
  const std::vector<std::size_t>& inputs_of(std::size_t index) const {
    return inputs_[index];
  }
  const std::vector<std::size_t>& consumers_of(std::size_t index) const {
    return consumers_[index];
  }
  const FeatureShape& output_shape(std::size_t index) const {
    return shapes_[index];
  }
  // Shape of the first input of a node (the input node reports its own).
  const FeatureShape& input_shape(std::size_t index) const;

  std::size_t input_index() const { return input_; }
  std::size_t output_index() const { return output_; }
  // Index of the node producing the logits that reach the output node.
  std::size_t logits_index() const { return inputs_[output_].front(); }

  std::int64_t param_count() const;

  ModelGraph with_nodes(std::vector<LayerNode> nodes) const;
  ModelGraph with_node(LayerNode replacement) const;

  friend bool operator==(const ModelGraph& a, const ModelGraph& b) {
    return a.metadata_ == b.metadata_ && a.nodes_ == b.nodes_ &&
           a.edges_ == b.edges_;
  }

 private:
  void validate();
  void check_params(const LayerNode& node) const;
  FeatureShape infer_shape(std::size_t index) const;

  ModelMetadata metadata_;
  std::vector<LayerNode> nodes_;
  std::vector<Edge> edges_;

  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::vector<std::size_t>> inputs_;
  std::vector<std::vector<std::size_t>> consumers_;
  std::vector<std::size_t> topo_;
  std::vector<std::size_t> topo_pos_;
  std::vector<FeatureShape> shapes_;
  std::size_t input_ = 0;
  std::size_t output_ = 0;
};

// Returns a copy of `layer` whose tensors for `role` keep exactly the listed
// indices on the prunable axis. Attributes (N or N̂) follow the new extent.
LayerNode slice_param(const LayerNode& layer, ParamRole role,
                      std::span<const std::int64_t> keep);

}  // namespace structprune

#endif  // STRUCTPRUNE_MODEL_HPP_
