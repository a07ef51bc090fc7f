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

#include "structprune/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "structprune/rng.hpp"

namespace structprune {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) {
    throw ConfigError("decay factor must lie in (0,1)");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
}

double TrainConfig::lr_at(int epoch) const {
  double lr = learning_rate;
  for (int m : milestones) {
    if (epoch >= m) lr *= decay_factor;
  }
  return lr;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"momentum", momentum},
          {"nesterov", nesterov},           {"weight_decay", weight_decay},
          {"batch_size", batch_size},       {"epochs", epochs},
          {"milestones", milestones},       {"decay_factor", decay_factor},
          {"seed", seed},                   {"shuffle", shuffle}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.nesterov = j.value("nesterov", c.nesterov);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.milestones = j.value("milestones", c.milestones);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.seed = j.value("seed", c.seed);
  c.shuffle = j.value("shuffle", c.shuffle);
  return c;
}

TrainResult train(const ModelGraph& model, const Dataset& data, const TrainConfig& cfg,
                  const GradHook& hook) {
  cfg.validate();
  data.validate();
  Executor exec(model);
  ParamSet velocity = ParamSet::zeros_for_gradients(model);
  TrainResult result{model, {}};
  const std::int64_t n = data.size();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.lr_at(epoch);
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) {
      Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
      rng.shuffle(order);
    }
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
      const std::int64_t end = std::min(n, start + cfg.batch_size);
      const Dataset batch = data.subset(
          std::span<const std::int64_t>(order).subspan(static_cast<std::size_t>(start),
                                                       static_cast<std::size_t>(end - start)));
      const ExecutionRecord rec = exec.forward(batch, Mode::kTrain);
      if (!std::isfinite(rec.loss)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch));
      }
      loss_sum += rec.loss * static_cast<double>(end - start);
      const auto preds = Executor::predictions(rec, model.output_index());
      for (std::size_t b = 0; b < preds.size(); ++b) correct += preds[b] == batch.labels[b];

      ParamSet grads = exec.backward(rec);
      if (hook) hook(exec.model(), exec.params(), grads, epoch);

      ParamSet& params = exec.mutable_params();
      for (std::size_t i = 0; i < params.nodes.size(); ++i) {
        for (auto& [name, g] : grads.nodes[i]) {
          auto& p = params.at(i, name);
          auto& v = velocity.at(i, name);
          for (std::size_t k = 0; k < p.size(); ++k) {
            const double d = g[k] + cfg.weight_decay * p[k];
            v[k] = cfg.momentum * v[k] + d;
            const double step = cfg.nesterov ? d + cfg.momentum * v[k] : v[k];
            // Storage stays float32.
            p[k] = static_cast<float>(p[k] - lr * step);
          }
          if (!std::all_of(p.begin(), p.end(), [](double x) { return std::isfinite(x); })) {
            throw NumericError("parameter '" + name + "' of '" + model.node(i).id +
                               "' diverged at epoch " + std::to_string(epoch));
          }
        }
      }
      for (const auto& [i, cache] : rec.norm) {
        const double m = model.node(i).attrs.momentum;
        const double count = static_cast<double>(rec.batch) *
                             static_cast<double>(model.input_shape(i).h * model.input_shape(i).w);
        auto& rm = params.at(i, "running_mean");
        auto& rv = params.at(i, "running_var");
        const double unbias = count > 1 ? count / (count - 1) : 1.0;
        for (std::size_t c = 0; c < rm.size(); ++c) {
          rm[c] = static_cast<float>((1.0 - m) * rm[c] + m * cache.mean[c]);
          rv[c] = static_cast<float>((1.0 - m) * rv[c] + m * cache.var[c] * unbias);
        }
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    result.history.push_back({epoch, loss_sum / static_cast<double>(n),
                              static_cast<double>(correct) / static_cast<double>(n), lr,
                              std::chrono::duration<double>(t1 - t0).count()});
  }
  result.model = exec.params().apply_to(model);
  return result;
}

double evaluate(const ModelGraph& model, const Dataset& data, std::int64_t batch_size) {
  data.validate();
  const Executor exec(model);
  std::int64_t correct = 0;
  for (std::int64_t start = 0; start < data.size(); start += batch_size) {
    const std::int64_t end = std::min(data.size(), start + batch_size);
    const Dataset batch = data.slice(start, end);
    const ExecutionRecord rec = exec.forward(batch, Mode::kEval);
    const auto preds = Executor::predictions(rec, model.output_index());
    for (std::size_t b = 0; b < preds.size(); ++b) correct += preds[b] == batch.labels[b];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace structprune
