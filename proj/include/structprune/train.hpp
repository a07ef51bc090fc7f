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

#ifndef STRUCTPRUNE_TRAIN_HPP_
#define STRUCTPRUNE_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "structprune/dataset.hpp"
#include "structprune/exec.hpp"
#include "structprune/model.hpp"

namespace structprune {

// SGD with (Nesterov) momentum, coupled weight decay and step decay.
// Defaults follow the CNN finetuning recipe: lr 0.01, Nesterov momentum 0.9,
// weight decay 5e-4, lr divided by 10 at each milestone.
struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
  std::int64_t batch_size = 128;
  int epochs = 1;
  std::vector<int> milestones;  // epochs at which lr *= decay_factor
  double decay_factor = 0.1;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
  double lr_at(int epoch) const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
};

// Adjusts gradients after backward and before the optimizer step.
using GradHook = std::function<void(const ModelGraph& model, const ParamSet& params,
                                    ParamSet& grads, int epoch)>;

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  ModelGraph model;
  std::vector<EpochMetrics> history;
};

// Aborts with NumericError when the loss stops being finite.
TrainResult train(const ModelGraph& model, const Dataset& data, const TrainConfig& cfg,
                  const GradHook& hook = {});

// Top-1 accuracy in eval mode; ties resolve to the lowest class index.
double evaluate(const ModelGraph& model, const Dataset& data, std::int64_t batch_size = 256);

}  // namespace structprune

#endif  // STRUCTPRUNE_TRAIN_HPP_
