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

#include "structprune/zoo.hpp"

#include <cmath>

namespace structprune {

ModelBuilder::ModelBuilder(std::string name, Shape input_shape, std::int64_t num_classes,
                           std::uint64_t seed)
    : meta_{std::move(name), std::move(input_shape), num_classes}, rng_(mix_seed(seed, 0x1417)) {
  LayerNode in;
  in.id = kInput;
  in.kind = LayerKind::kInput;
  nodes_.push_back(std::move(in));
}

Tensor ModelBuilder::kaiming(Shape shape, std::int64_t fan_in) {
  Tensor t(std::move(shape));
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (float& v : t.storage()) v = static_cast<float>(sd * rng_.normal());
  return t;
}

std::string ModelBuilder::add_node(LayerNode node, std::vector<std::string> inputs) {
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    edges_.push_back({inputs[s], node.id, static_cast<int>(s)});
  }
  nodes_.push_back(std::move(node));
  return nodes_.back().id;
}

std::string ModelBuilder::conv(const std::string& id, const std::string& from, std::int64_t in,
                               std::int64_t out, std::int64_t kernel, std::int64_t stride,
                               std::int64_t padding, bool bias) {
  LayerNode n{id, LayerKind::kConv2d, {}, {}};
  n.attrs.in_channels = in;
  n.attrs.out_channels = out;
  n.attrs.kernel = kernel;
  n.attrs.stride = stride;
  n.attrs.padding = padding;
  n.attrs.bias = bias;
  n.params.emplace("weight", kaiming({out, in, kernel, kernel}, in * kernel * kernel));
  if (bias) {
    Tensor b({out});
    for (float& v : b.storage()) v = static_cast<float>(bias_std_ * rng_.normal());
    n.params.emplace("bias", std::move(b));
  }
  return add_node(std::move(n), {from});
}

std::string ModelBuilder::linear(const std::string& id, const std::string& from, std::int64_t in,
                                 std::int64_t out, bool bias) {
  LayerNode n{id, LayerKind::kLinear, {}, {}};
  n.attrs.in_channels = in;
  n.attrs.out_channels = out;
  n.attrs.bias = bias;
  n.params.emplace("weight", kaiming({out, in}, in));
  if (bias) {
    Tensor b({out});
    for (float& v : b.storage()) v = static_cast<float>(bias_std_ * rng_.normal());
    n.params.emplace("bias", std::move(b));
  }
  return add_node(std::move(n), {from});
}

std::string ModelBuilder::batchnorm(const std::string& id, const std::string& from,
                                    std::int64_t channels) {
  LayerNode n{id, LayerKind::kBatchNorm2d, {}, {}};
  n.attrs.out_channels = channels;
  Tensor gamma({channels}), beta({channels}), mean({channels}), var({channels});
  for (std::int64_t c = 0; c < channels; ++c) {
    const auto k = static_cast<std::size_t>(c);
    if (randomize_norms_) {
      gamma[k] = static_cast<float>(1.0 + 0.2 * rng_.normal());
      beta[k] = static_cast<float>(0.1 * rng_.normal());
      mean[k] = static_cast<float>(0.1 * rng_.normal());
      var[k] = static_cast<float>(1.0 + 0.5 * rng_.uniform());
    } else {
      gamma[k] = 1.0f;
      var[k] = 1.0f;
    }
  }
  n.params.emplace("gamma", std::move(gamma));
  n.params.emplace("beta", std::move(beta));
  n.params.emplace("running_mean", std::move(mean));
  n.params.emplace("running_var", std::move(var));
  return add_node(std::move(n), {from});
}

std::string ModelBuilder::relu(const std::string& id, const std::string& from) {
  return add_node({id, LayerKind::kRelu, {}, {}}, {from});
}

std::string ModelBuilder::maxpool(const std::string& id, const std::string& from,
                                  std::int64_t kernel, std::int64_t stride, std::int64_t padding) {
  LayerNode n{id, LayerKind::kMaxPool2d, {}, {}};
  n.attrs.kernel = kernel;
  n.attrs.stride = stride;
  n.attrs.padding = padding;
  return add_node(std::move(n), {from});
}

std::string ModelBuilder::avgpool(const std::string& id, const std::string& from,
                                  std::int64_t kernel, std::int64_t stride, std::int64_t padding) {
  LayerNode n{id, LayerKind::kAvgPool2d, {}, {}};
  n.attrs.kernel = kernel;
  n.attrs.stride = stride;
  n.attrs.padding = padding;
  return add_node(std::move(n), {from});
}

std::string ModelBuilder::global_avgpool(const std::string& id, const std::string& from) {
  return add_node({id, LayerKind::kGlobalAvgPool, {}, {}}, {from});
}

std::string ModelBuilder::flatten(const std::string& id, const std::string& from) {
  return add_node({id, LayerKind::kFlatten, {}, {}}, {from});
}

std::string ModelBuilder::add(const std::string& id, const std::string& lhs,
                              const std::string& rhs) {
  return add_node({id, LayerKind::kAdd, {}, {}}, {lhs, rhs});
}

std::string ModelBuilder::loss(const std::string& id, const std::string& from) {
  return add_node({id, LayerKind::kSoftmaxCrossEntropy, {}, {}}, {from});
}

std::string ModelBuilder::conv_bn_relu(const std::string& prefix, const std::string& from,
                                       std::int64_t in, std::int64_t out, std::int64_t kernel,
                                       std::int64_t stride, std::int64_t padding) {
  const std::string c = conv("conv" + prefix, from, in, out, kernel, stride, padding);
  const std::string b = batchnorm("bn" + prefix, c, out);
  return relu("relu" + prefix, b);
}

ModelGraph ModelBuilder::build(const std::string& from) {
  std::vector<LayerNode> nodes = nodes_;
  std::vector<Edge> edges = edges_;
  nodes.push_back({"output", LayerKind::kOutput, {}, {}});
  edges.push_back({from, "output", 0});
  return ModelGraph(meta_, std::move(nodes), std::move(edges));
}

namespace zoo {

ModelGraph desk_cnn(std::uint64_t seed, std::int64_t num_classes) {
  ModelBuilder b("desk_cnn", {3, 8, 8}, num_classes, seed);
  auto x = b.conv_bn_relu("1", ModelBuilder::kInput, 3, 16, 3, 1, 1);
  x = b.conv_bn_relu("2", x, 16, 32, 3, 1, 1);
  x = b.maxpool("pool2", x, 2, 2);
  x = b.conv_bn_relu("3", x, 32, 64, 3, 1, 1);
  x = b.maxpool("pool3", x, 2, 2);
  x = b.conv_bn_relu("4", x, 64, 128, 3, 1, 1);
  x = b.flatten("flatten", x);
  x = b.linear("fc", x, 128 * 2 * 2, num_classes);
  return b.build(x);
}

ModelGraph chain_cnn(std::uint64_t seed) {
  ModelBuilder b("chain_cnn", {3, 8, 8}, 10, seed);
  auto x = b.conv_bn_relu("1", ModelBuilder::kInput, 3, 8, 3, 1, 1);
  x = b.conv_bn_relu("2", x, 8, 16, 3, 1, 1);
  x = b.global_avgpool("gap", x);
  x = b.linear("fc", x, 16, 10);
  return b.build(x);
}

ModelGraph vgg_style(std::uint64_t seed) {
  ModelBuilder b("vgg_style", {3, 8, 8}, 10, seed);
  auto x = b.conv_bn_relu("1", ModelBuilder::kInput, 3, 8, 3, 1, 1);
  x = b.maxpool("pool1", x, 2, 2);
  x = b.conv_bn_relu("2", x, 8, 16, 3, 1, 1);
  x = b.maxpool("pool2", x, 2, 2);
  x = b.flatten("flatten", x);
  x = b.linear("fc1", x, 16 * 2 * 2, 32);
  x = b.relu("relu_fc1", x);
  x = b.linear("fc2", x, 32, 10);
  return b.build(x);
}

ModelGraph resnet_tiny(std::uint64_t seed) {
  ModelBuilder b("resnet_tiny", {3, 8, 8}, 10, seed);
  const auto stem = b.conv_bn_relu("0", ModelBuilder::kInput, 3, 8, 3, 1, 1);
  // Block 1: identity shortcut.
  auto x = b.conv_bn_relu("1a", stem, 8, 8, 3, 1, 1);
  x = b.conv("conv1b", x, 8, 8, 3, 1, 1);
  x = b.batchnorm("bn1b", x, 8);
  x = b.add("add1", x, stem);
  const auto block1 = b.relu("relu1", x);
  // Block 2: strided, 1x1 downsample shortcut.
  x = b.conv_bn_relu("2a", block1, 8, 16, 3, 2, 1);
  x = b.conv("conv2b", x, 16, 16, 3, 1, 1);
  x = b.batchnorm("bn2b", x, 16);
  auto d = b.conv("down2", block1, 8, 16, 1, 2, 0);
  d = b.batchnorm("bn_down2", d, 16);
  x = b.add("add2", x, d);
  x = b.relu("relu2", x);
  x = b.global_avgpool("gap", x);
  x = b.linear("fc", x, 16, 10);
  return b.build(x);
}

ModelGraph bottleneck(std::uint64_t seed) {
  ModelBuilder b("bottleneck", {3, 8, 8}, 10, seed);
  auto x = b.conv_bn_relu("1", ModelBuilder::kInput, 3, 32, 3, 1, 1);
  x = b.conv_bn_relu("2", x, 32, 32, 3, 1, 1);
  x = b.conv_bn_relu("3", x, 32, 32, 3, 1, 1);
  x = b.global_avgpool("gap", x);
  x = b.linear("fc", x, 32, 10);
  ModelGraph m = b.build(x);
  LayerNode conv1 = m.node("conv1");
  Tensor& w = conv1.params.at("weight");
  const std::int64_t per = w.numel() / w.dim(0);
  for (std::int64_t k = 1; k < w.dim(0); ++k) {
    for (std::int64_t j = 0; j < per; ++j) w[static_cast<std::size_t>(k * per + j)] *= 0.01f;
  }
  return m.with_node(std::move(conv1));
}

ModelGraph mlp(std::uint64_t seed) {
  ModelBuilder b("mlp", {3, 4, 4}, 10, seed);
  auto x = b.flatten("flatten", ModelBuilder::kInput);
  x = b.linear("fc1", x, 48, 32);
  x = b.relu("relu1", x);
  x = b.linear("fc2", x, 32, 10);
  return b.build(x);
}

std::vector<std::string> names() {
  return {"desk_cnn", "chain_cnn", "vgg_style", "resnet_tiny", "bottleneck", "mlp"};
}

ModelGraph by_name(const std::string& name, std::uint64_t seed) {
  if (name == "desk_cnn") return desk_cnn(seed);
  if (name == "chain_cnn") return chain_cnn(seed);
  if (name == "vgg_style") return vgg_style(seed);
  if (name == "resnet_tiny") return resnet_tiny(seed);
  if (name == "bottleneck") return bottleneck(seed);
  if (name == "mlp") return mlp(seed);
  throw ConfigError("unknown model '" + name + "'");
}

}  // namespace zoo

}  // namespace structprune
