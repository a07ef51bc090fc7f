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

#include "structprune/groups.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace structprune {

namespace {

// Channel index spaces joined by a union-find. Every tensor flowing along an
// edge lives in one space; `expansion` is the number of consecutive features
// per channel once the tensor has been flattened.
struct SpaceRef {
  int space = -1;
  std::int64_t expansion = 1;
};

class SpaceForest {
 public:
  int make(std::int64_t width) {
    parent_.push_back(static_cast<int>(parent_.size()));
    width_.push_back(width);
    return parent_.back();
  }
  int find(int s) {
    while (parent_[static_cast<std::size_t>(s)] != s) {
      auto& p = parent_[static_cast<std::size_t>(s)];
      p = parent_[static_cast<std::size_t>(p)];
      s = p;
    }
    return s;
  }
  void unite(int a, int b, const std::string& at) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (width_[static_cast<std::size_t>(a)] != width_[static_cast<std::size_t>(b)]) {
      throw ModelError(at, "coupled channel spaces differ in width (" +
                               std::to_string(width_[static_cast<std::size_t>(a)]) +
                               " vs " +
                               std::to_string(width_[static_cast<std::size_t>(b)]) + ")");
    }
    if (b < a) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
  }
  std::int64_t width(int s) { return width_[static_cast<std::size_t>(find(s))]; }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<int> parent_;
  std::vector<std::int64_t> width_;
};

struct Site {
  std::size_t node;
  ParamRole role;
  int space;
  std::int64_t expansion;
  std::string feed;
};

}  // namespace

bool PruneGroup::has_role(ParamRole role) const {
  return std::any_of(members.begin(), members.end(),
                     [role](const GroupMember& m) { return m.role == role; });
}

std::size_t count_prunable_sites(const ModelGraph& model) {
  std::size_t n = 0;
  for (const LayerNode& node : model.nodes()) {
    switch (node.kind) {
      case LayerKind::kConv2d:
      case LayerKind::kLinear:
        n += 2;
        break;
      case LayerKind::kBatchNorm2d:
        n += 1;
        break;
      default:
        break;
    }
  }
  return n;
}

std::vector<PruneGroup> build_groups(const ModelGraph& model) {
  SpaceForest forest;
  std::vector<SpaceRef> out(model.size());
  std::vector<Site> sites;
  int input_space = -1;

  for (std::size_t i : model.topo_order()) {
    const LayerNode& n = model.node(i);
    const auto& preds = model.inputs_of(i);
    const SpaceRef p = preds.empty() ? SpaceRef{} : out[preds.front()];
    const std::string feed = preds.empty() ? "" : model.node(preds.front()).id;
    switch (n.kind) {
      case LayerKind::kInput:
        input_space = forest.make(model.output_shape(i).c);
        out[i] = {input_space, 1};
        break;
      case LayerKind::kConv2d: {
        sites.push_back({i, ParamRole::kConvIn, p.space, p.expansion, feed});
        const int s = forest.make(n.attrs.out_channels);
        sites.push_back({i, ParamRole::kConvOut, s, 1, ""});
        out[i] = {s, 1};
        break;
      }
      case LayerKind::kLinear: {
        if (forest.width(p.space) * p.expansion != n.attrs.in_channels) {
          throw ModelError(n.id, "input features do not factor into channels");
        }
        sites.push_back({i, ParamRole::kLinearIn, p.space, p.expansion, feed});
        const int s = forest.make(n.attrs.out_channels);
        sites.push_back({i, ParamRole::kLinearOut, s, 1, ""});
        out[i] = {s, 1};
        break;
      }
      case LayerKind::kBatchNorm2d:
        sites.push_back({i, ParamRole::kNormScaleShift, p.space, 1, ""});
        out[i] = p;
        break;
      case LayerKind::kFlatten: {
        const FeatureShape& in = model.input_shape(i);
        out[i] = {p.space, in.flat ? p.expansion : p.expansion * in.h * in.w};
        break;
      }
      case LayerKind::kAdd: {
        const SpaceRef q = out[preds[1]];
        if (p.expansion != q.expansion) {
          throw ModelError(n.id, "add operands are laid out differently");
        }
        forest.unite(p.space, q.space, n.id);
        out[i] = p;
        break;
      }
      case LayerKind::kGlobalAvgPool:
      case LayerKind::kRelu:
      case LayerKind::kMaxPool2d:
      case LayerKind::kAvgPool2d:
      case LayerKind::kSoftmaxCrossEntropy:
      case LayerKind::kOutput:
        out[i] = p;
        break;
    }
  }

  const int input_root = forest.find(input_space);
  const bool logits_out = model.output_shape(model.output_index()).flat;
  const int output_root = forest.find(out[model.output_index()].space);

  // Group order: smallest space id in each class (spaces are created in
  // topological order).
  std::map<int, int> root_to_group;
  std::vector<int> group_roots;
  for (std::size_t s = 0; s < forest.size(); ++s) {
    const int r = forest.find(static_cast<int>(s));
    if (root_to_group.contains(r)) continue;
    const bool used = std::any_of(sites.begin(), sites.end(), [&](const Site& site) {
      return forest.find(site.space) == r;
    });
    if (!used) continue;
    root_to_group.emplace(r, static_cast<int>(group_roots.size()));
    group_roots.push_back(r);
  }

  std::vector<PruneGroup> groups(group_roots.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int r = group_roots[g];
    groups[g].id = static_cast<int>(g);
    groups[g].width = forest.width(r);
    if (r == input_root) {
      groups[g].prunable = false;
      groups[g].unprunable_reason = "input";
    } else if (logits_out && r == output_root) {
      groups[g].prunable = false;
      groups[g].unprunable_reason = "output";
    }
  }
  std::stable_sort(sites.begin(), sites.end(), [&](const Site& a, const Site& b) {
    const auto pa = model.topo_position(a.node);
    const auto pb = model.topo_position(b.node);
    if (pa != pb) return pa < pb;
    return static_cast<int>(a.role) < static_cast<int>(b.role);
  });
  std::size_t placed = 0;
  for (const Site& s : sites) {
    auto it = root_to_group.find(forest.find(s.space));
    if (it == root_to_group.end()) continue;
    PruneGroup& g = groups[static_cast<std::size_t>(it->second)];
    g.members.push_back({model.node(s.node).id, s.role, s.expansion, s.feed});
    ++placed;
  }
  if (placed != count_prunable_sites(model)) {
    throw Error("internal: " + std::to_string(count_prunable_sites(model) - placed) +
                " prunable site(s) left ungrouped");
  }
  return groups;
}

std::vector<std::vector<std::int64_t>> group_prunable_mask(
    const PruneGroup& g, const std::set<std::int64_t>& removed) {
  for (std::int64_t k : removed) {
    if (k < 0 || k >= g.width) {
      throw ConfigError("group " + std::to_string(g.id) + ": index " +
                        std::to_string(k) + " outside [0," +
                        std::to_string(g.width) + ")");
    }
  }
  const std::int64_t kept = g.width - static_cast<std::int64_t>(removed.size());
  const std::int64_t floor = std::max<std::int64_t>(1, g.protected_floor);
  if (kept < floor) {
    throw ConfigError("group " + std::to_string(g.id) + ": removal leaves " +
                      std::to_string(kept) + " of " + std::to_string(g.width) +
                      " indices, below the floor of " + std::to_string(floor));
  }
  std::vector<std::int64_t> channels;
  channels.reserve(static_cast<std::size_t>(kept));
  for (std::int64_t k = 0; k < g.width; ++k) {
    if (!removed.contains(k)) channels.push_back(k);
  }
  std::vector<std::vector<std::int64_t>> masks;
  masks.reserve(g.members.size());
  for (const GroupMember& m : g.members) {
    if (m.expansion == 1) {
      masks.push_back(channels);
      continue;
    }
    std::vector<std::int64_t> keep;
    keep.reserve(channels.size() * static_cast<std::size_t>(m.expansion));
    for (std::int64_t k : channels) {
      for (std::int64_t j = 0; j < m.expansion; ++j) keep.push_back(k * m.expansion + j);
    }
    masks.push_back(std::move(keep));
  }
  return masks;
}

ModelGraph prune_group(const ModelGraph& model, const PruneGroup& g,
                       const std::set<std::int64_t>& removed) {
  if (removed.empty()) return model;
  const auto masks = group_prunable_mask(g, removed);
  std::vector<LayerNode> nodes = model.nodes();
  for (std::size_t i = 0; i < g.members.size(); ++i) {
    LayerNode& n = nodes[model.index_of(g.members[i].layer)];
    n = slice_param(n, g.members[i].role, masks[i]);
  }
  return model.with_nodes(std::move(nodes));
}

nlohmann::json groups_to_json(const std::vector<PruneGroup>& groups) {
  nlohmann::json out = nlohmann::json::array();
  for (const PruneGroup& g : groups) {
    nlohmann::json members = nlohmann::json::array();
    for (const GroupMember& m : g.members) {
      nlohmann::json jm = {{"layer", m.layer}, {"role", std::string(to_string(m.role))}};
      if (m.expansion != 1) jm["expansion"] = m.expansion;
      members.push_back(std::move(jm));
    }
    nlohmann::json jg = {{"id", g.id},
                         {"width", g.width},
                         {"unprunable", !g.prunable},
                         {"protected_floor", g.protected_floor},
                         {"members", std::move(members)}};
    if (!g.prunable) jg["reason"] = g.unprunable_reason;
    out.push_back(std::move(jg));
  }
  return out;
}

}  // namespace structprune
