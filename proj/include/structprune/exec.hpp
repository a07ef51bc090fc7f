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

#ifndef STRUCTPRUNE_EXEC_HPP_
#define STRUCTPRUNE_EXEC_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "structprune/dataset.hpp"
#include "structprune/model.hpp"

namespace structprune {

using NodeParams = std::map<std::string, std::vector<double>>;

// Per-node named buffers, indexed like ModelGraph::nodes(). Holds either
// parameter values or their gradients.
struct ParamSet {
  std::vector<NodeParams> nodes;

  static ParamSet from_model(const ModelGraph& model);
  // Zero buffers for every trainable tensor (running statistics excluded).
  static ParamSet zeros_for_gradients(const ModelGraph& model);

  std::vector<double>& at(std::size_t node, const std::string& name);
  const std::vector<double>& at(std::size_t node, const std::string& name) const;
  bool has(std::size_t node, const std::string& name) const;

  ParamSet& operator+=(const ParamSet& other);
  ParamSet& operator*=(double s);

  // Copies values back into the model's float tensors.
  ModelGraph apply_to(const ModelGraph& model) const;
};

enum class Mode { kTrain, kEval };

// Everything a backward pass or an activation-based criterion needs.
struct ExecutionRecord {
  Mode mode = Mode::kEval;
  std::int64_t batch = 0;
  std::vector<Tensor64> activations;  // node outputs, leading batch axis
  std::vector<double> sample_losses;
  double loss = 0.0;
  std::vector<std::uint32_t> labels;
  Tensor64 input;  // copy of the batch inputs

  // Batchnorm caches (train: batch statistics; eval: running statistics).
  struct NormCache {
    std::vector<double> mean;
    std::vector<double> var;  // biased batch variance or running variance
    std::vector<double> inv_std;
  };
  std::map<std::size_t, NormCache> norm;
  std::map<std::size_t, std::vector<std::int64_t>> pool_argmax;
};

// Deterministic single-threaded forward/backward over a ModelGraph.
// Parameters are held in double; the loss is mean softmax cross-entropy on
// the tensor reaching the output node.
class Executor {
 public:
  explicit Executor(ModelGraph model);
  Executor(ModelGraph model, ParamSet params);

  const ModelGraph& model() const { return model_; }
  const ParamSet& params() const { return params_; }
  ParamSet& mutable_params() { return params_; }

  ExecutionRecord forward(const Dataset& batch, Mode mode) const;

  // Gradient of the mean batch loss.
  ParamSet backward(const ExecutionRecord& record) const;

  // Gradient of Σ_b weights[b]·loss_b through the recorded forward pass.
  ParamSet backward_weighted(const ExecutionRecord& record,
                             std::span<const double> weights) const;

  // One gradient set per sample, each the gradient of that sample's loss.
  // Eval mode reruns each sample as a batch of one; train mode seeds the
  // backward pass of the shared forward with a single sample's loss so batch
  // statistics stay identical. Their mean equals backward(forward(batch)).
  std::vector<ParamSet> per_sample_gradients(const Dataset& batch, Mode mode) const;

  // Argmax over logits; ties go to the lowest class index.
  static std::vector<std::uint32_t> predictions(const ExecutionRecord& record,
                                                std::size_t logits_node);

 private:
  ModelGraph model_;
  ParamSet params_;
};

}  // namespace structprune

#endif  // STRUCTPRUNE_EXEC_HPP_
