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

#include "structprune/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "structprune/rng.hpp"

namespace structprune {
namespace {

struct CriterionInfo {
  const char* name;
  const char* display;
  bool data_free;
  bool gradients;
  bool per_sample;
  bool activations;
};

constexpr CriterionInfo kCriteria[] = {
    {"magnitude_l1", "MagnitudeL1", true, false, false, false},
    {"magnitude_l2", "MagnitudeL2", true, false, false, false},
    {"lamp", "LAMP", true, false, false, false},
    {"fpgm", "FPGM", true, false, false, false},
    {"bnscale", "BNScale", true, false, false, false},
    {"random", "Random", true, false, false, false},
    {"taylor", "Taylor", false, true, false, false},
    {"obd_hessian", "OBD-Hessian", false, false, true, false},
    {"hrank", "HRank", false, false, false, true},
    {"thinet", "ThiNet", false, false, false, true},
};

const CriterionInfo& info(std::string_view name) {
  for (const auto& c : kCriteria) {
    if (name == c.name) return c;
  }
  throw ConfigError("unknown criterion '" + std::string(name) + "'");
}

// Row-major copy of every slice along `axis`.
std::vector<std::vector<double>> slices(const Tensor& w, std::size_t axis) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(w.dim(axis)));
  for (std::int64_t k = 0; k < w.dim(axis); ++k) {
    auto& s = out[static_cast<std::size_t>(k)];
    for_each_in_slice(w.shape(), axis, k,
                      [&](std::int64_t i) { s.push_back(w[static_cast<std::size_t>(i)]); });
  }
  return out;
}

void check_scores(const std::vector<double>& v, const std::string& what) {
  for (double x : v) {
    if (!std::isfinite(x) || x < 0.0) {
      throw NumericError(what + " produced a negative or non-finite score");
    }
  }
}

// First 4-D activation at or upstream of `node` (steps back through flatten
// and global pooling).
// Walks back through channel-preserving flat nodes (flatten, global pooling,
// relu) to the spatial maps they summarize. Stops at any other node, so a
// flat linear output is returned as is and rejected by the caller.
std::size_t spatial_source(const ModelGraph& model, std::size_t node) {
  while (model.output_shape(node).flat) {
    const LayerKind k = model.node(node).kind;
    const bool passes = k == LayerKind::kFlatten || k == LayerKind::kGlobalAvgPool ||
                        k == LayerKind::kRelu;
    if (!passes || model.inputs_of(node).empty()) break;
    node = model.inputs_of(node).front();
  }
  return node;
}

std::vector<const GroupMember*> members_with(const PruneGroup& g, bool (*pred)(ParamRole)) {
  std::vector<const GroupMember*> out;
  for (const auto& m : g.members) {
    if (pred(m.role)) out.push_back(&m);
  }
  return out;
}

bool is_norm_role(ParamRole r) { return r == ParamRole::kNormScaleShift; }

// Distinct spatial sources feeding the group's consumers, in member order.
std::vector<std::size_t> hrank_sources(const ModelGraph& model, const PruneGroup& g) {
  std::vector<std::size_t> out;
  for (const GroupMember* m : members_with(g, is_consumer_role)) {
    const std::size_t src = spatial_source(model, model.index_of(m->feed));
    if (std::find(out.begin(), out.end(), src) == out.end()) out.push_back(src);
  }
  return out;
}

}  // namespace

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::kNone: return "none";
    case Normalization::kMax: return "max";
    case Normalization::kMean: return "mean";
    case Normalization::kGaussian: return "gaussian";
  }
  return "?";
}

Normalization parse_normalization(std::string_view name) {
  if (name == "none") return Normalization::kNone;
  if (name == "max") return Normalization::kMax;
  if (name == "mean") return Normalization::kMean;
  if (name == "gaussian") return Normalization::kGaussian;
  throw ConfigError("unknown normalization '" + std::string(name) + "'");
}

CriterionSpec CriterionSpec::named(std::string_view name, std::uint64_t seed) {
  info(name);
  CriterionSpec s;
  s.name = std::string(name);
  s.seed = seed;
  return s;
}

bool CriterionSpec::data_free() const { return info(name).data_free; }
bool CriterionSpec::stochastic() const { return !data_free() || name == "random"; }
bool CriterionSpec::needs_gradients() const { return info(name).gradients; }
bool CriterionSpec::needs_per_sample_gradients() const { return info(name).per_sample; }
bool CriterionSpec::needs_activations() const { return info(name).activations; }

const std::vector<std::string>& criterion_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& c : kCriteria) v.emplace_back(c.name);
    return v;
  }();
  return names;
}

std::string criterion_display_name(std::string_view name) { return info(name).display; }

std::vector<double> magnitude_score(const Tensor& w, std::size_t axis, int p) {
  if (p != 1 && p != 2) throw ConfigError("magnitude norm order must be 1 or 2");
  std::vector<double> out;
  for (const auto& s : slices(w, axis)) {
    double acc = 0.0;
    for (double x : s) acc += p == 1 ? std::abs(x) : x * x;
    out.push_back(p == 1 ? acc : std::sqrt(acc));
  }
  return out;
}

std::vector<double> lamp_from_squared_norms(std::span<const double> u) {
  const std::size_t n = u.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return u[a] < u[b]; });
  std::vector<double> out(n, 0.0);
  double tail = 0.0;
  for (std::size_t r = n; r-- > 0;) {
    tail += u[order[r]];
    out[order[r]] = tail > 0.0 ? u[order[r]] / tail : 0.0;
  }
  return out;
}

std::vector<double> lamp_score(const Tensor& w, std::size_t axis) {
  std::vector<double> u = magnitude_score(w, axis, 2);
  for (double& x : u) x *= x;
  return lamp_from_squared_norms(u);
}

std::vector<double> fpgm_score(const Tensor& w, std::size_t axis) {
  const auto s = slices(w, axis);
  if (s.size() == 1) spdlog::warn("fpgm on a single index scores 0");
  std::vector<double> out(s.size(), 0.0);
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = a + 1; b < s.size(); ++b) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < s[a].size(); ++i) {
        const double d = s[a][i] - s[b][i];
        d2 += d * d;
      }
      const double d = std::sqrt(d2);
      out[a] += d;
      out[b] += d;
    }
  }
  return out;
}

std::vector<double> bnscale_score(const Tensor& gamma) {
  std::vector<double> out;
  for (float g : gamma.storage()) out.push_back(std::abs(static_cast<double>(g)));
  return out;
}

std::vector<double> random_score(std::int64_t width, std::uint64_t seed, int group_id) {
  if (width < 1) throw ConfigError("random score width must be >= 1");
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(group_id)));
  std::vector<double> out(static_cast<std::size_t>(width));
  for (double& x : out) x = rng.uniform();
  return out;
}

std::vector<double> taylor_score(const Tensor& w, std::span<const double> grad,
                                 std::size_t axis) {
  if (static_cast<std::int64_t>(grad.size()) != w.numel()) {
    throw ShapeError("taylor gradient length does not match weight");
  }
  std::vector<double> out(static_cast<std::size_t>(w.dim(axis)));
  for (std::int64_t k = 0; k < w.dim(axis); ++k) {
    double acc = 0.0;
    for_each_in_slice(w.shape(), axis, k, [&](std::int64_t i) {
      acc += grad[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
    });
    out[static_cast<std::size_t>(k)] = acc * acc;
  }
  return out;
}

std::vector<double> obd_hessian_score(const Tensor& w,
                                      const std::vector<std::span<const double>>& per_sample,
                                      std::size_t axis) {
  if (per_sample.empty()) throw ConfigError("obd_hessian needs at least one sample");
  std::vector<double> h(static_cast<std::size_t>(w.numel()), 0.0);
  for (const auto& g : per_sample) {
    if (g.size() != h.size()) throw ShapeError("per-sample gradient length mismatch");
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += g[i] * g[i];
  }
  const double inv = 1.0 / static_cast<double>(per_sample.size());
  std::vector<double> out(static_cast<std::size_t>(w.dim(axis)));
  for (std::int64_t k = 0; k < w.dim(axis); ++k) {
    double acc = 0.0;
    for_each_in_slice(w.shape(), axis, k, [&](std::int64_t i) {
      const double wi = w[static_cast<std::size_t>(i)];
      acc += 0.5 * h[static_cast<std::size_t>(i)] * inv * wi * wi;
    });
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

std::vector<double> hrank_score(const Tensor64& a, double tolerance) {
  if (a.rank() != 4) throw ShapeError("hrank expects [B,C,H,W] activations");
  const std::int64_t B = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
  if (H < 2 || W < 2) throw ConfigError("hrank needs spatial maps of at least 2x2");
  std::vector<double> out(static_cast<std::size_t>(C), 0.0);
  Eigen::MatrixXd map(H, W);
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t c = 0; c < C; ++c) {
      const double* p = a.data().data() + (b * C + c) * H * W;
      for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) map(y, x) = p[y * W + x];
      }
      const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(map).singularValues();
      const double top = sv.size() > 0 ? sv(0) : 0.0;
      std::int64_t rank = 0;
      if (top > 0.0) {
        for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > tolerance * top;
      }
      out[static_cast<std::size_t>(c)] += static_cast<double>(rank);
    }
  }
  for (double& x : out) x /= static_cast<double>(B);
  return out;
}

std::vector<double> thinet_score(const Tensor64& contributions) {
  if (contributions.rank() != 2) throw ShapeError("thinet expects [C, M] contributions");
  const std::int64_t C = contributions.dim(0), M = contributions.dim(1);
  std::vector<double> out(static_cast<std::size_t>(C), 0.0);
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t m = 0; m < M; ++m) {
      const double z = contributions[static_cast<std::size_t>(c * M + m)];
      out[static_cast<std::size_t>(c)] += z * z;
    }
  }
  return out;
}

Tensor64 channel_contributions(const LayerNode& consumer, const Tensor64& input,
                               std::int64_t expansion) {
  const Tensor& w = consumer.param("weight");
  if (consumer.kind == LayerKind::kLinear) {
    // w: [O, F], input: [B, F]; channel c owns features [c*S, (c+1)*S).
    if (input.rank() != 2 || input.dim(1) != w.dim(1)) {
      throw ShapeError("linear contribution input mismatch at '" + consumer.id + "'");
    }
    const std::int64_t B = input.dim(0), O = w.dim(0), F = w.dim(1);
    if (expansion < 1 || F % expansion != 0) throw ShapeError("bad expansion");
    const std::int64_t C = F / expansion;
    Tensor64 out({C, B * O});
    for (std::int64_t c = 0; c < C; ++c) {
      for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t o = 0; o < O; ++o) {
          double acc = 0.0;
          for (std::int64_t f = c * expansion; f < (c + 1) * expansion; ++f) {
            acc += static_cast<double>(w[static_cast<std::size_t>(o * F + f)]) *
                   input[static_cast<std::size_t>(b * F + f)];
          }
          out[static_cast<std::size_t>(c * B * O + b * O + o)] = acc;
        }
      }
    }
    return out;
  }
  if (consumer.kind != LayerKind::kConv2d) {
    throw ConfigError("'" + consumer.id + "' is not a conv or linear consumer");
  }
  if (input.rank() != 4 || input.dim(1) != w.dim(1)) {
    throw ShapeError("conv contribution input mismatch at '" + consumer.id + "'");
  }
  const auto& at = consumer.attrs;
  const std::int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::int64_t O = w.dim(0), K = at.kernel;
  const std::int64_t OH = window_output_extent(H, K, at.stride, at.padding);
  const std::int64_t OW = window_output_extent(W, K, at.stride, at.padding);
  const std::int64_t M = B * O * OH * OW;
  Tensor64 out({C, M});
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t b = 0; b < B; ++b) {
      const double* x = input.data().data() + (b * C + c) * H * W;
      for (std::int64_t o = 0; o < O; ++o) {
        const float* k = w.data().data() + (o * C + c) * K * K;
        for (std::int64_t oy = 0; oy < OH; ++oy) {
          for (std::int64_t ox = 0; ox < OW; ++ox) {
            double acc = 0.0;
            for (std::int64_t ky = 0; ky < K; ++ky) {
              const std::int64_t iy = oy * at.stride - at.padding + ky;
              if (iy < 0 || iy >= H) continue;
              for (std::int64_t kx = 0; kx < K; ++kx) {
                const std::int64_t ix = ox * at.stride - at.padding + kx;
                if (ix < 0 || ix >= W) continue;
                acc += static_cast<double>(k[ky * K + kx]) * x[iy * W + ix];
              }
            }
            out[static_cast<std::size_t>(c * M + ((b * O + o) * OH + oy) * OW + ox)] = acc;
          }
        }
      }
    }
  }
  return out;
}

std::vector<double> reduce_expanded(std::span<const double> v, std::int64_t expansion) {
  if (expansion < 1 || v.size() % static_cast<std::size_t>(expansion) != 0) {
    throw ShapeError("vector length is not a multiple of the expansion");
  }
  std::vector<double> out(v.size() / static_cast<std::size_t>(expansion), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[i / static_cast<std::size_t>(expansion)] += v[i];
  return out;
}

std::vector<double> normalize_scores(std::span<const double> v, Normalization mode) {
  std::vector<double> out(v.begin(), v.end());
  if (out.empty()) return out;
  switch (mode) {
    case Normalization::kNone:
      break;
    case Normalization::kMax: {
      const double m = *std::max_element(out.begin(), out.end());
      if (m > 0.0) {
        for (double& x : out) x /= m;
      }
      break;
    }
    case Normalization::kMean: {
      const double m = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
      if (m > 0.0) {
        for (double& x : out) x /= m;
      }
      break;
    }
    case Normalization::kGaussian: {
      // Φ of the z-score, so results stay in [0,1].
      const double n = static_cast<double>(out.size());
      const double mu = std::accumulate(out.begin(), out.end(), 0.0) / n;
      double var = 0.0;
      for (double x : out) var += (x - mu) * (x - mu);
      const double sd = std::sqrt(var / n);
      for (double& x : out) x = sd > 0.0 ? 0.5 * std::erfc(-(x - mu) / (sd * std::sqrt(2.0))) : 0.5;
      break;
    }
  }
  return out;
}

ImportanceScores aggregate_group(int group_id, const std::vector<std::vector<double>>& per_layer,
                                 Normalization mode) {
  if (per_layer.empty()) throw ConfigError("no contributing layers to aggregate");
  const std::size_t width = per_layer.front().size();
  ImportanceScores s{group_id, std::vector<double>(width, 0.0)};
  for (const auto& v : per_layer) {
    if (v.size() != width) throw ShapeError("score vectors differ in length within a group");
    const auto n = normalize_scores(v, mode);
    for (std::size_t i = 0; i < width; ++i) s.values[i] += n[i];
  }
  for (double& x : s.values) x /= static_cast<double>(per_layer.size());
  return s;
}

CalibrationData calibrate(const ModelGraph& model, const CriterionSpec& crit,
                          const CalibrationBatch& batch) {
  batch.validate();
  if (batch.size() < 1) throw ConfigError("calibration batch is empty");
  const Executor exec(model);
  CalibrationData data{exec.forward(batch, Mode::kEval), std::nullopt, {}};
  if (crit.needs_gradients()) data.gradients = exec.backward(data.record);
  if (crit.needs_per_sample_gradients()) {
    data.per_sample = exec.per_sample_gradients(batch, Mode::kEval);
  }
  return data;
}

void check_criterion(const ModelGraph& model, const std::vector<PruneGroup>& groups,
                     const CriterionSpec& crit) {
  info(crit.name);
  for (const auto& g : groups) {
    if (!g.prunable) continue;
    if (crit.name == "bnscale" && !g.has_role(ParamRole::kNormScaleShift)) {
      throw ConfigError("bnscale cannot score group " + std::to_string(g.id) +
                        ": it contains no batchnorm layer");
    }
    if (crit.name == "hrank" || crit.name == "thinet") {
      if (members_with(g, is_consumer_role).empty()) {
        throw ConfigError(crit.name + " cannot score group " + std::to_string(g.id) +
                          ": it has no consumer layer");
      }
    }
    if (crit.name == "hrank") {
      for (std::size_t src : hrank_sources(model, g)) {
        const FeatureShape& s = model.output_shape(src);
        if (s.h < 2 || s.w < 2) {
          throw ConfigError("hrank cannot score group " + std::to_string(g.id) +
                            ": activation of '" + model.node(src).id + "' is " +
                            s.to_string());
        }
      }
    }
  }
}

ImportanceScores score_group(const ModelGraph& model, const PruneGroup& group,
                             const CriterionSpec& crit, const CalibrationData* calib) {
  const CriterionInfo& ci = info(crit.name);
  if (!ci.data_free && calib == nullptr) {
    throw ConfigError("criterion '" + crit.name + "' needs a calibration batch");
  }
  std::vector<std::vector<double>> per_layer;
  const std::string& name = crit.name;

  if (name == "random") {
    return {group.id, random_score(group.width, crit.seed, group.id)};
  }
  if (name == "bnscale") {
    for (const GroupMember* m : members_with(group, is_norm_role)) {
      per_layer.push_back(bnscale_score(model.node(m->layer).param("gamma")));
    }
    if (per_layer.empty()) {
      throw ConfigError("bnscale cannot score group " + std::to_string(group.id) +
                        ": it contains no batchnorm layer");
    }
  } else if (name == "hrank") {
    for (std::size_t src : hrank_sources(model, group)) {
      per_layer.push_back(hrank_score(calib->record.activations[src]));
    }
  } else if (name == "thinet") {
    for (const GroupMember* m : members_with(group, is_consumer_role)) {
      const Tensor64& in = calib->record.activations[model.index_of(m->feed)];
      per_layer.push_back(
          thinet_score(channel_contributions(model.node(m->layer), in, m->expansion)));
    }
  } else {
    // Weight-based: filter-wise on producers; input-side slices when a group
    // has no producer.
    auto sites = members_with(group, is_producer_role);
    if (sites.empty()) sites = members_with(group, is_consumer_role);
    for (const GroupMember* m : sites) {
      const std::size_t idx = model.index_of(m->layer);
      const Tensor& w = model.node(idx).param("weight");
      const std::size_t axis = is_producer_role(m->role) ? 0 : 1;
      std::vector<double> v;
      if (name == "magnitude_l1") {
        v = magnitude_score(w, axis, 1);
      } else if (name == "magnitude_l2") {
        v = magnitude_score(w, axis, 2);
      } else if (name == "lamp") {
        v = lamp_score(w, axis);
      } else if (name == "fpgm") {
        v = fpgm_score(w, axis);
      } else if (name == "taylor") {
        if (!calib->gradients) throw ConfigError("taylor needs batch gradients");
        v = taylor_score(w, calib->gradients->at(idx, "weight"), axis);
      } else if (name == "obd_hessian") {
        std::vector<std::span<const double>> ps;
        for (const auto& g : calib->per_sample) ps.emplace_back(g.at(idx, "weight"));
        v = obd_hessian_score(w, ps, axis);
      }
      per_layer.push_back(reduce_expanded(v, m->expansion));
    }
  }
  if (per_layer.empty()) {
    throw ConfigError(name + " found no contributing layer in group " + std::to_string(group.id));
  }
  ImportanceScores s = aggregate_group(group.id, per_layer, crit.normalization);
  if (static_cast<std::int64_t>(s.values.size()) != group.width) {
    throw ShapeError("score length differs from width of group " + std::to_string(group.id));
  }
  check_scores(s.values, name);
  return s;
}

std::vector<ImportanceScores> score_groups(const ModelGraph& model,
                                           const std::vector<PruneGroup>& groups,
                                           const CriterionSpec& crit,
                                           const CalibrationData* calib) {
  check_criterion(model, groups, crit);
  std::vector<ImportanceScores> out;
  for (const auto& g : groups) {
    if (g.prunable) out.push_back(score_group(model, g, crit, calib));
  }
  return out;
}

nlohmann::json scores_to_json(const std::vector<ImportanceScores>& scores) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : scores) j.push_back({{"group", s.group_id}, {"scores", s.values}});
  return j;
}

}  // namespace structprune
