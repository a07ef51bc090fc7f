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

#ifndef STRUCTPRUNE_ZOO_HPP_
#define STRUCTPRUNE_ZOO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "structprune/model.hpp"
#include "structprune/rng.hpp"

namespace structprune {

// Incremental graph construction with Kaiming-normal initialization.
class ModelBuilder {
 public:
  ModelBuilder(std::string name, Shape input_shape, std::int64_t num_classes,
               std::uint64_t seed);

  // Each call returns the new node id; `from` names the predecessor.
  std::string conv(const std::string& id, const std::string& from, std::int64_t in,
                   std::int64_t out, std::int64_t kernel, std::int64_t stride = 1,
                   std::int64_t padding = 0, bool bias = false);
  std::string linear(const std::string& id, const std::string& from, std::int64_t in,
                     std::int64_t out, bool bias = true);
  std::string batchnorm(const std::string& id, const std::string& from, std::int64_t channels);
  std::string relu(const std::string& id, const std::string& from);
  std::string maxpool(const std::string& id, const std::string& from, std::int64_t kernel,
                      std::int64_t stride, std::int64_t padding = 0);
  std::string avgpool(const std::string& id, const std::string& from, std::int64_t kernel,
                      std::int64_t stride, std::int64_t padding = 0);
  std::string global_avgpool(const std::string& id, const std::string& from);
  std::string flatten(const std::string& id, const std::string& from);
  std::string add(const std::string& id, const std::string& lhs, const std::string& rhs);
  std::string loss(const std::string& id, const std::string& from);
  // Conv + batchnorm + relu; returns the relu id.
  std::string conv_bn_relu(const std::string& prefix, const std::string& from, std::int64_t in,
                           std::int64_t out, std::int64_t kernel, std::int64_t stride = 1,
                           std::int64_t padding = 0);

  static constexpr const char* kInput = "input";

  // Adds the output node fed by `from` and validates.
  ModelGraph build(const std::string& from);

  // Gives batchnorm layers non-trivial affine parameters and running stats.
  void randomize_norms(bool value) { randomize_norms_ = value; }
  // Std of bias initialization (0 = zeros).
  void bias_std(double value) { bias_std_ = value; }

 private:
  std::string add_node(LayerNode node, std::vector<std::string> inputs);
  Tensor kaiming(Shape shape, std::int64_t fan_in);

  ModelMetadata meta_;
  std::vector<LayerNode> nodes_;
  std::vector<Edge> edges_;
  Rng rng_;
  bool randomize_norms_ = false;
  double bias_std_ = 0.0;
};

namespace zoo {

// ~100k-parameter CNN on 3x8x8 inputs: four conv-bn-relu stages with
// 16/32/64/128 channels (max-pool after the second and third), flatten,
// fc 512->classes. Every prunable group carries a batchnorm.
ModelGraph desk_cnn(std::uint64_t seed, std::int64_t num_classes = 10);

// conv1-bn1-relu1-conv2-bn2-relu2-gap-fc on 3x8x8.
ModelGraph chain_cnn(std::uint64_t seed);

// conv-bn-relu-pool x2, flatten, fc-relu-fc on 3x8x8 (VGG-style classifier).
ModelGraph vgg_style(std::uint64_t seed);

// Stem plus two basic residual blocks, the second with a strided 1x1
// downsample path, then gap-fc on 3x8x8.
ModelGraph resnet_tiny(std::uint64_t seed);

// Three 32-channel conv stages where conv1's filters are all tiny except one,
// so a global threshold prunes its group far below its neighbours.
ModelGraph bottleneck(std::uint64_t seed);

// flatten-fc-relu-fc on 3x4x4.
ModelGraph mlp(std::uint64_t seed);

// Names accepted by by_name(): desk_cnn, chain_cnn, vgg_style, resnet_tiny,
// bottleneck, mlp.
ModelGraph by_name(const std::string& name, std::uint64_t seed);
std::vector<std::string> names();

}  // namespace zoo

}  // namespace structprune

#endif  // STRUCTPRUNE_ZOO_HPP_
