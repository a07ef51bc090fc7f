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

#include "structprune/prune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <tuple>

#include "structprune/rng.hpp"

namespace structprune {
namespace {

const ImportanceScores& scores_for(const std::vector<ImportanceScores>& scores, int gid) {
  for (const auto& s : scores) {
    if (s.group_id == gid) return s;
  }
  throw ConfigError("no scores for group " + std::to_string(gid));
}

std::int64_t original_width(const std::map<int, std::int64_t>& widths, const PruneGroup& g) {
  const auto it = widths.find(g.id);
  return it == widths.end() ? g.width : it->second;
}

// Membership without widths; must stay fixed while pruning.
std::vector<std::vector<GroupMember>> structure(const std::vector<PruneGroup>& groups) {
  std::vector<std::vector<GroupMember>> out;
  for (const auto& g : groups) out.push_back(g.members);
  return out;
}

}  // namespace

std::string_view to_string(PruneScheme s) {
  switch (s) {
    case PruneScheme::kLocal: return "local";
    case PruneScheme::kGlobal: return "global";
    case PruneScheme::kProtectedGlobal: return "protected_global";
  }
  return "?";
}

PruneScheme parse_prune_scheme(std::string_view name) {
  if (name == "local") return PruneScheme::kLocal;
  if (name == "global") return PruneScheme::kGlobal;
  if (name == "protected_global") return PruneScheme::kProtectedGlobal;
  throw ConfigError("unknown pruning scheme '" + std::string(name) + "'");
}

void PruneConfig::validate() const {
  if (!(speedup >= 1.0)) throw ConfigError("speedup must be >= 1");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(protection >= 0.0 && protection < 1.0)) throw ConfigError("protection must lie in [0,1)");
  if (calibration_samples < 1) throw ConfigError("calibration_samples must be >= 1");
  CriterionSpec::named(criterion.name);
}

nlohmann::json PruneConfig::to_json() const {
  return {{"speedup", speedup},
          {"steps", steps},
          {"scheme", std::string(to_string(scheme))},
          {"protection", protection},
          {"criterion", criterion.name},
          {"normalization", std::string(to_string(criterion.normalization))},
          {"global_normalization", std::string(to_string(global_normalization))},
          {"seed", seed},
          {"calibration_samples", calibration_samples}};
}

PruneConfig PruneConfig::from_json(const nlohmann::json& j) { return from_json(j, PruneConfig{}); }

PruneConfig PruneConfig::from_json(const nlohmann::json& j, PruneConfig c) {
  c.speedup = j.value("speedup", c.speedup);
  c.steps = j.value("steps", c.steps);
  if (j.contains("scheme")) c.scheme = parse_prune_scheme(j.at("scheme").get<std::string>());
  c.protection = j.value("protection", c.protection);
  if (j.contains("criterion")) c.criterion.name = j.at("criterion").get<std::string>();
  if (j.contains("normalization")) {
    c.criterion.normalization = parse_normalization(j.at("normalization").get<std::string>());
  }
  if (j.contains("global_normalization")) {
    c.global_normalization = parse_normalization(j.at("global_normalization").get<std::string>());
  }
  c.seed = j.value("seed", c.seed);
  c.calibration_samples = j.value("calibration_samples", c.calibration_samples);
  return c;
}

std::int64_t group_floor(PruneScheme scheme, double protection, std::int64_t width) {
  if (scheme != PruneScheme::kProtectedGlobal) return 1;
  // The epsilon absorbs representation error in protection·width.
  const auto f = static_cast<std::int64_t>(
      std::ceil(protection * static_cast<double>(width) - 1e-9));
  return std::max<std::int64_t>(1, f);
}

PrunePlan plan_step(const std::vector<PruneGroup>& groups,
                    const std::vector<ImportanceScores>& scores, const PruneConfig& cfg,
                    std::int64_t quantum, const std::map<int, std::int64_t>& original_widths) {
  if (quantum < 1) throw ConfigError("quantum must be >= 1");
  PrunePlan plan;
  std::vector<std::string> binding;

  if (cfg.scheme == PruneScheme::kLocal) {
    std::int64_t total = 0;
    for (const auto& g : groups) total += g.prunable ? g.width : 0;
    for (const auto& g : groups) {
      if (!g.prunable) continue;
      const auto& v = scores_for(scores, g.id).values;
      const std::int64_t floor = group_floor(cfg.scheme, cfg.protection, original_width(original_widths, g));
      const std::int64_t want = (quantum * g.width + total - 1) / total;
      const std::int64_t take = std::min(want, g.width - floor);
      if (take <= 0) {
        binding.push_back(std::to_string(g.id));
        continue;
      }
      std::vector<std::int64_t> order(static_cast<std::size_t>(g.width));
      for (std::int64_t i = 0; i < g.width; ++i) order[static_cast<std::size_t>(i)] = i;
      std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return v[static_cast<std::size_t>(a)] < v[static_cast<std::size_t>(b)];
      });
      for (std::int64_t i = 0; i < take; ++i) {
        plan.actions.push_back({g.id, order[static_cast<std::size_t>(i)]});
      }
    }
  } else {
    std::vector<std::tuple<double, int, std::int64_t>> pool;
    std::map<int, std::int64_t> room;
    for (const auto& g : groups) {
      if (!g.prunable) continue;
      const auto v = normalize_scores(scores_for(scores, g.id).values, cfg.global_normalization);
      if (static_cast<std::int64_t>(v.size()) != g.width) {
        throw ShapeError("scores for group " + std::to_string(g.id) + " do not match its width");
      }
      room[g.id] = g.width - group_floor(cfg.scheme, cfg.protection, original_width(original_widths, g));
      if (room[g.id] <= 0) binding.push_back(std::to_string(g.id));
      for (std::int64_t i = 0; i < g.width; ++i) pool.emplace_back(v[static_cast<std::size_t>(i)], g.id, i);
    }
    std::sort(pool.begin(), pool.end());
    for (const auto& [score, gid, idx] : pool) {
      if (static_cast<std::int64_t>(plan.actions.size()) >= quantum) break;
      if (room[gid] <= 0) continue;
      --room[gid];
      plan.actions.push_back({gid, idx});
    }
  }
  if (plan.empty()) {
    std::string names;
    for (const auto& b : binding) names += (names.empty() ? "" : ", ") + b;
    throw InfeasibleTarget("infeasible target: every prunable group is at its floor (groups " +
                           names + ")");
  }
  return plan;
}

ModelGraph apply_plan(const ModelGraph& model, const std::vector<PruneGroup>& groups,
                      const PrunePlan& plan) {
  std::map<int, std::set<std::int64_t>> removed;
  for (const auto& a : plan.actions) removed[a.group_id].insert(a.index);
  ModelGraph out = model;
  for (const auto& g : groups) {
    const auto it = removed.find(g.id);
    if (it == removed.end()) continue;
    if (!g.prunable) throw ConfigError("group " + std::to_string(g.id) + " is not prunable");
    out = prune_group(out, g, it->second);
  }
  return out;
}

double PruneResult::step_time() const {
  if (steps.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : steps) s += t.seconds;
  return s / static_cast<double>(steps.size());
}

nlohmann::json PruneResult::telemetry_json() const {
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& s : steps) {
    traj.push_back({{"step", s.step},
                    {"removed", s.removed},
                    {"flops", s.flops},
                    {"params", s.params},
                    {"seconds", s.seconds}});
  }
  nlohmann::json widths = nlohmann::json::array();
  for (const auto& [gid, w] : original_widths) {
    widths.push_back({{"group", gid}, {"original", w}, {"final", final_widths.at(gid)}});
  }
  return {{"budget_flops", budget},
          {"quantum", quantum},
          {"original_flops", original.total_flops},
          {"original_params", original.total_params},
          {"final_flops", final_cost.total_flops},
          {"final_params", final_cost.total_params},
          {"flops_ratio", final_cost.flops_ratio.value_or(1.0)},
          {"params_ratio", final_cost.params_ratio.value_or(1.0)},
          {"step_time", step_time()},
          {"groups", widths},
          {"steps", traj}};
}

PruneResult prune_to_target(const ModelGraph& model, const PruneConfig& cfg,
                            const Dataset* calibration) {
  cfg.validate();
  const std::vector<PruneGroup> groups0 = build_groups(model);
  check_criterion(model, groups0, cfg.criterion);
  const bool data_free = cfg.criterion.data_free();
  std::optional<Dataset> calib;
  if (!data_free) {
    if (calibration == nullptr) {
      throw ConfigError("criterion '" + cfg.criterion.name + "' needs a calibration set");
    }
    calib = sample_subset(*calibration, std::min(cfg.calibration_samples, calibration->size()),
                          cfg.seed);
  }

  PruneResult r{model, model_cost(model), {}, 0.0, 0, {}, {}, {}};
  r.budget = flops_budget(r.original, cfg.speedup);
  std::int64_t total = 0;
  for (const auto& g : groups0) {
    if (!g.prunable) continue;
    r.original_widths[g.id] = g.width;
    total += g.width;
  }
  r.quantum = std::max<std::int64_t>(1, (total + cfg.steps - 1) / cfg.steps);

  CostReport cost = r.original;
  int step = 0;
  while (static_cast<double>(cost.total_flops) > r.budget) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<PruneGroup> groups = build_groups(r.model);
    if (structure(groups) != structure(groups0)) {
      throw ModelError("", "group structure changed while pruning");
    }
    CriterionSpec crit = cfg.criterion;
    // Fresh random draws each step.
    crit.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(step));
    std::optional<CalibrationData> cd;
    if (!data_free) cd = calibrate(r.model, crit, *calib);
    const auto scores = score_groups(r.model, groups, crit, cd ? &*cd : nullptr);
    PrunePlan plan = plan_step(groups, scores, cfg, r.quantum, r.original_widths);
    r.model = apply_plan(r.model, groups, plan);
    cost = model_cost(r.model);
    plan.flops_after = cost.total_flops;
    const auto t1 = std::chrono::steady_clock::now();
    r.steps.push_back({step, static_cast<std::int64_t>(plan.actions.size()), cost.total_flops,
                       cost.total_params, std::chrono::duration<double>(t1 - t0).count()});
    ++step;
  }
  r.final_cost = cost.compare_to(r.original);
  for (const auto& g : build_groups(r.model)) {
    if (g.prunable) r.final_widths[g.id] = g.width;
  }
  return r;
}

}  // namespace structprune
