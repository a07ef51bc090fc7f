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

#include "structprune/sparse_reg.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace structprune {
namespace {

// Flat element indices of one tensor belonging to one channel.
struct SliceRef {
  std::size_t node = 0;
  std::string param;
  std::vector<std::size_t> flat;
};

// slices[member][k]: every trainable element channel k owns in that member.
struct GroupSlices {
  int group_id = 0;
  std::int64_t width = 0;
  std::vector<std::vector<std::vector<SliceRef>>> members;
};

std::vector<GroupSlices> index_groups(const ModelGraph& model,
                                      const std::vector<PruneGroup>& groups) {
  std::vector<GroupSlices> out;
  for (const auto& g : groups) {
    if (!g.prunable) continue;
    GroupSlices gs{g.id, g.width, {}};
    for (const auto& m : g.members) {
      const std::size_t idx = model.index_of(m.layer);
      const LayerNode& layer = model.node(idx);
      std::vector<std::vector<SliceRef>> per_k(static_cast<std::size_t>(g.width));
      for (const RoleSlice& rs : trainable_role_slices(layer, m.role)) {
        const Shape& shape = layer.param(rs.param).shape();
        for (std::int64_t k = 0; k < g.width; ++k) {
          SliceRef ref{idx, rs.param, {}};
          for (std::int64_t j = 0; j < m.expansion; ++j) {
            for_each_in_slice(shape, rs.axis, k * m.expansion + j, [&](std::int64_t i) {
              ref.flat.push_back(static_cast<std::size_t>(i));
            });
          }
          per_k[static_cast<std::size_t>(k)].push_back(std::move(ref));
        }
      }
      gs.members.push_back(std::move(per_k));
    }
    out.push_back(std::move(gs));
  }
  return out;
}

double squared_norm(const ParamSet& p, const std::vector<SliceRef>& refs) {
  double acc = 0.0;
  for (const auto& r : refs) {
    const auto& v = p.at(r.node, r.param);
    for (std::size_t i : r.flat) acc += v[i] * v[i];
  }
  return acc;
}

// grad += scale · w over the referenced elements.
void add_scaled(const ParamSet& p, ParamSet& g, const std::vector<SliceRef>& refs, double scale) {
  for (const auto& r : refs) {
    const auto& w = p.at(r.node, r.param);
    auto& d = g.at(r.node, r.param);
    for (std::size_t i : r.flat) d[i] += scale * w[i];
  }
}

double group_channel_sq_norm(const ParamSet& p, const GroupSlices& gs, std::size_t k) {
  double acc = 0.0;
  for (const auto& member : gs.members) acc += squared_norm(p, member[k]);
  return acc;
}

// Indices of the lowest `fraction` of channels by group L2 norm (ties by index).
std::vector<std::size_t> bottom_indices(const ParamSet& p, const GroupSlices& gs,
                                        double fraction) {
  const auto width = static_cast<std::size_t>(gs.width);
  std::vector<double> norms(width);
  for (std::size_t k = 0; k < width; ++k) norms[k] = group_channel_sq_norm(p, gs, k);
  std::vector<std::size_t> order(width);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });
  order.resize(static_cast<std::size_t>(std::floor(fraction * static_cast<double>(width))));
  return order;
}

std::vector<std::pair<std::size_t, int>> norm_layers(const ModelGraph& model,
                                                     const std::vector<PruneGroup>& groups) {
  std::vector<std::pair<std::size_t, int>> out;
  for (const auto& g : groups) {
    if (!g.prunable) continue;
    for (const auto& m : g.members) {
      if (m.role == ParamRole::kNormScaleShift) out.emplace_back(model.index_of(m.layer), g.id);
    }
  }
  return out;
}

bool has_batchnorm(const ModelGraph& model) {
  return std::any_of(model.nodes().begin(), model.nodes().end(),
                     [](const LayerNode& n) { return n.kind == LayerKind::kBatchNorm2d; });
}

struct GrowingState {
  int interval = -1;
  std::vector<std::vector<std::size_t>> penalized;  // per indexed group
};

}  // namespace

void RegConfig::validate() const {
  if (std::find(regularizer_names().begin(), regularizer_names().end(), name) ==
      regularizer_names().end()) {
    throw ConfigError("unknown regularizer '" + name + "'");
  }
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(delta >= 0.0)) throw ConfigError("delta must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(eta >= 0.0)) throw ConfigError("eta must be >= 0");
  if (interval < 1) throw ConfigError("growth interval must be >= 1");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in [0,1]");
}

nlohmann::json RegConfig::to_json() const {
  return {{"reg", name},           {"lambda", lambda},     {"eta", eta},
          {"delta", delta},        {"interval", interval}, {"epsilon", epsilon},
          {"fraction", fraction}};
}

RegConfig RegConfig::from_json(const nlohmann::json& j) { return from_json(j, RegConfig{}); }

RegConfig RegConfig::from_json(const nlohmann::json& j, RegConfig c) {
  if (j.contains("preset")) c = preset_config(j.at("preset").get<std::string>());
  c.name = j.value("reg", c.name);
  c.lambda = j.value("lambda", c.lambda);
  c.eta = j.value("eta", c.eta);
  c.delta = j.value("delta", c.delta);
  c.interval = j.value("interval", c.interval);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.fraction = j.value("fraction", c.fraction);
  return c;
}

const std::vector<std::string>& regularizer_names() {
  static const std::vector<std::string> names = {"group_lasso", "group_norm", "bnscale",
                                                 "growing_reg"};
  return names;
}

std::string regularizer_display_name(std::string_view name) {
  if (name == "group_lasso") return "GroupLASSO";
  if (name == "group_norm") return "GroupNorm";
  if (name == "bnscale") return "BNScale";
  if (name == "growing_reg") return "GrowingReg";
  throw ConfigError("unknown regularizer '" + std::string(name) + "'");
}

double growing_lambda(const RegConfig& cfg, int epoch) {
  return cfg.lambda + cfg.delta * static_cast<double>(epoch / cfg.interval);
}

const std::vector<RegPreset>& reg_presets() {
  static const std::vector<RegPreset> presets = {
      {"group_lasso", "magnitude_l2", "vgg19", "cifar100", 1e-5, 1e-3, 0},
      {"group_lasso", "magnitude_l2", "resnet18", "cifar100", 5e-4, 5e-3, 0},
      {"group_lasso", "magnitude_l2", "resnet50", "cifar100", 1e-4, 5e-3, 0},
      {"group_lasso", "magnitude_l2", "resnet18", "imagenet", 5e-6, 5e-3, 0},
      {"group_lasso", "magnitude_l2", "resnet50", "imagenet", 5e-4, 1e-2, 0},
      {"group_lasso", "magnitude_l2", "vit_small", "imagenet", 1e-4, std::nullopt, 0},
      {"group_lasso", "magnitude_l2", "yolov8", "coco", 1e-4, 1e-3, 0},
      {"group_lasso", "bnscale", "vgg19", "cifar100", 5e-4, 5e-3, 0},
      {"group_lasso", "bnscale", "resnet18", "cifar100", 5e-6, 1e-2, 0},
      {"group_lasso", "bnscale", "resnet50", "cifar100", 5e-6, 1e-2, 0},
      {"group_lasso", "bnscale", "resnet18", "imagenet", 5e-4, 5e-3, 0},
      {"group_lasso", "bnscale", "resnet50", "imagenet", 5e-4, 1e-2, 0},
      {"group_lasso", "bnscale", "vit_small", "imagenet", 1e-4, std::nullopt, 0},
      {"group_lasso", "bnscale", "yolov8", "coco", 5e-4, 1e-3, 0},
      {"group_norm", "magnitude_l2", "vgg19", "cifar100", 1e-5, 5e-3, 0},
      {"group_norm", "magnitude_l2", "resnet18", "cifar100", 1e-4, 5e-3, 0},
      {"group_norm", "magnitude_l2", "resnet50", "cifar100", 1e-4, 5e-3, 0},
      {"group_norm", "magnitude_l2", "resnet18", "imagenet", 5e-6, 1e-2, 0},
      {"group_norm", "magnitude_l2", "resnet50", "imagenet", 5e-4, 5e-3, 0},
      {"group_norm", "magnitude_l2", "vit_small", "imagenet", 5e-4, std::nullopt, 0},
      {"group_norm", "magnitude_l2", "yolov8", "coco", 1e-4, 1e-2, 0},
      {"bnscale", "bnscale", "vgg19", "cifar100", 5e-4, 5e-3, 0},
      {"bnscale", "bnscale", "resnet18", "cifar100", 1e-4, 1e-2, 0},
      {"bnscale", "bnscale", "resnet50", "cifar100", 1e-5, 1e-2, 0},
      {"bnscale", "bnscale", "resnet18", "imagenet", 1e-4, 1e-2, 0},
      {"bnscale", "bnscale", "resnet50", "imagenet", 5e-6, 1e-2, 0},
      {"bnscale", "bnscale", "yolov8", "coco", 1e-5, 5e-3, 0},
      {"growing_reg", "magnitude_l2", "vgg19", "cifar100", 1e-4, 1e-3, 1e-5},
      {"growing_reg", "magnitude_l2", "resnet18", "cifar100", 5e-4, 1e-2, 1e-4},
      {"growing_reg", "magnitude_l2", "resnet50", "cifar100", 1e-4, 1e-3, 1e-5},
      {"growing_reg", "magnitude_l2", "resnet18", "imagenet", 1e-4, 5e-3, 5e-5},
      {"growing_reg", "magnitude_l2", "resnet50", "imagenet", 5e-5, 1e-2, 1e-5},
      {"growing_reg", "magnitude_l2", "vit_small", "imagenet", 5e-4, std::nullopt, 1e-4},
      {"growing_reg", "magnitude_l2", "yolov8", "coco", 1e-4, 5e-3, 5e-5},
      // Desk-scale settings for the bundled CNN on synthetic data.
      {"group_lasso", "magnitude_l2", "desk_cnn", "synthetic", 5e-4, 1e-2, 0},
      {"group_norm", "magnitude_l2", "desk_cnn", "synthetic", 5e-4, 1e-2, 0},
      {"bnscale", "bnscale", "desk_cnn", "synthetic", 1e-4, 1e-2, 0},
      {"growing_reg", "magnitude_l2", "desk_cnn", "synthetic", 5e-4, 1e-2, 1e-4},
  };
  return presets;
}

RegConfig preset_config(std::string_view key) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : key) {
    if (ch == '/') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3 && parts.size() != 4) {
    throw ConfigError("preset key must be reg/[criterion/]model/dataset, got '" +
                      std::string(key) + "'");
  }
  for (const auto& p : reg_presets()) {
    const bool hit = parts.size() == 4
                         ? p.reg == parts[0] && p.criterion == parts[1] && p.model == parts[2] &&
                               p.dataset == parts[3]
                         : p.reg == parts[0] && p.model == parts[1] && p.dataset == parts[2];
    if (!hit) continue;
    if (!p.eta) throw ConfigError("preset '" + std::string(key) + "' has no fixed eta");
    RegConfig c;
    c.name = p.reg;
    c.lambda = p.lambda;
    c.eta = *p.eta;
    c.delta = p.delta;
    return c;
  }
  throw ConfigError("no preset '" + std::string(key) + "'");
}

GradHook make_grad_hook(const RegConfig& cfg, const ModelGraph& model,
                        const std::vector<PruneGroup>& groups) {
  cfg.validate();
  if (cfg.name == "bnscale") {
    if (!has_batchnorm(model)) throw ConfigError("bnscale regularizer needs a batchnorm layer");
    auto layers = norm_layers(model, groups);
    return [cfg, layers](const ModelGraph&, const ParamSet& p, ParamSet& g, int) {
      for (const auto& [idx, gid] : layers) {
        const auto& gamma = p.at(idx, "gamma");
        auto& d = g.at(idx, "gamma");
        for (std::size_t k = 0; k < gamma.size(); ++k) {
          d[k] += cfg.lambda * static_cast<double>((gamma[k] > 0.0) - (gamma[k] < 0.0));
        }
      }
    };
  }
  auto indexed = std::make_shared<const std::vector<GroupSlices>>(index_groups(model, groups));
  if (cfg.name == "group_lasso") {
    return [cfg, indexed](const ModelGraph&, const ParamSet& p, ParamSet& g, int) {
      for (const auto& gs : *indexed) {
        for (const auto& member : gs.members) {
          for (const auto& refs : member) {
            add_scaled(p, g, refs, cfg.lambda / (std::sqrt(squared_norm(p, refs)) + cfg.epsilon));
          }
        }
      }
    };
  }
  if (cfg.name == "group_norm") {
    return [cfg, indexed](const ModelGraph&, const ParamSet& p, ParamSet& g, int) {
      for (const auto& gs : *indexed) {
        for (std::size_t k = 0; k < static_cast<std::size_t>(gs.width); ++k) {
          const double scale =
              cfg.lambda / (std::sqrt(group_channel_sq_norm(p, gs, k)) + cfg.epsilon);
          for (const auto& member : gs.members) add_scaled(p, g, member[k], scale);
        }
      }
    };
  }
  // growing_reg: the penalized set is refreshed once per interval.
  auto state = std::make_shared<GrowingState>();
  return [cfg, indexed, state](const ModelGraph&, const ParamSet& p, ParamSet& g, int epoch) {
    const int interval = epoch / cfg.interval;
    if (interval != state->interval) {
      state->interval = interval;
      state->penalized.clear();
      for (const auto& gs : *indexed) state->penalized.push_back(bottom_indices(p, gs, cfg.fraction));
    }
    const double lam = growing_lambda(cfg, epoch);
    for (std::size_t i = 0; i < indexed->size(); ++i) {
      const auto& gs = (*indexed)[i];
      for (std::size_t k : state->penalized[i]) {
        for (const auto& member : gs.members) add_scaled(p, g, member[k], lam);
      }
    }
  };
}

double reg_statistic(const RegConfig& cfg, const ModelGraph& model,
                     const std::vector<PruneGroup>& groups) {
  const ParamSet p = ParamSet::from_model(model);
  double total = 0.0;
  if (cfg.name == "bnscale") {
    for (const auto& [idx, gid] : norm_layers(model, groups)) {
      for (double x : p.at(idx, "gamma")) total += std::abs(x);
    }
    return total;
  }
  for (const auto& gs : index_groups(model, groups)) {
    if (cfg.name == "group_lasso") {
      for (const auto& member : gs.members) {
        for (const auto& refs : member) total += std::sqrt(squared_norm(p, refs));
      }
    } else if (cfg.name == "group_norm") {
      for (std::size_t k = 0; k < static_cast<std::size_t>(gs.width); ++k) {
        total += std::sqrt(group_channel_sq_norm(p, gs, k));
      }
    } else if (cfg.name == "growing_reg") {
      for (std::size_t k : bottom_indices(p, gs, cfg.fraction)) {
        total += group_channel_sq_norm(p, gs, k);
      }
    } else {
      throw ConfigError("unknown regularizer '" + cfg.name + "'");
    }
  }
  return total;
}

SparsifyResult sparsify(const ModelGraph& model, const Dataset& data, const RegConfig& cfg,
                        const TrainConfig& train_cfg) {
  const GradHook hook = make_grad_hook(cfg, model, build_groups(model));
  TrainConfig tc = train_cfg;
  tc.learning_rate = cfg.eta;
  TrainResult r = train(model, data, tc, hook);
  double secs = 0.0;
  for (const auto& e : r.history) secs += e.seconds;
  const double mean = r.history.empty() ? 0.0 : secs / static_cast<double>(r.history.size());
  return {std::move(r.model), std::move(r.history), mean};
}

}  // namespace structprune
