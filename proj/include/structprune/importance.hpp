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

#ifndef STRUCTPRUNE_IMPORTANCE_HPP_
#define STRUCTPRUNE_IMPORTANCE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "structprune/dataset.hpp"
#include "structprune/exec.hpp"
#include "structprune/groups.hpp"
#include "structprune/model.hpp"

namespace structprune {

// Per-channel scores for one group. Lower means less important.
struct ImportanceScores {
  int group_id = 0;
  std::vector<double> values;

  friend bool operator==(const ImportanceScores&, const ImportanceScores&) = default;
};

enum class Normalization { kNone, kMax, kMean, kGaussian };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view name);

struct CriterionSpec {
  std::string name = "magnitude_l2";
  // Applied to each contributing layer's vector before averaging.
  Normalization normalization = Normalization::kMax;
  std::uint64_t seed = 0;  // random only

  // Throws ConfigError for unknown names.
  static CriterionSpec named(std::string_view name, std::uint64_t seed = 0);
  bool data_free() const;
  // Random or data-driven; such rows are marked and repeated over seeds.
  bool stochastic() const;
  bool needs_gradients() const;
  bool needs_per_sample_gradients() const;
  bool needs_activations() const;
};

// All implemented criterion names in leaderboard order.
const std::vector<std::string>& criterion_names();
// Leaderboard label, e.g. "MagnitudeL2".
std::string criterion_display_name(std::string_view name);

// --- Per-tensor primitives --------------------------------------------------

// Lp norm of every slice along `axis` (p = 1 or 2).
std::vector<double> magnitude_score(const Tensor& w, std::size_t axis, int p);

// LAMP on squared L2 norms u: after sorting ascending, the i-th smallest gets
// u_(i) / Σ_{j>=i} u_(j). Returned in original index order.
std::vector<double> lamp_score(const Tensor& w, std::size_t axis);
std::vector<double> lamp_from_squared_norms(std::span<const double> u);

// Σ_{j≠k} ||w_k - w_j||₂ over slices; a single slice scores 0.
std::vector<double> fpgm_score(const Tensor& w, std::size_t axis);

std::vector<double> bnscale_score(const Tensor& gamma);

// Uniform [0,1) draws keyed by (seed, group id).
std::vector<double> random_score(std::int64_t width, std::uint64_t seed, int group_id);

// (Σ_{k-slice} g·w)².
std::vector<double> taylor_score(const Tensor& w, std::span<const double> grad,
                                 std::size_t axis);

// Diagonal Fisher: h_i = mean_s g_{s,i}², score_k = Σ_{k-slice} ½·h_i·w_i².
std::vector<double> obd_hessian_score(const Tensor& w,
                                      const std::vector<std::span<const double>>& per_sample,
                                      std::size_t axis);

// Mean over the batch of the numerical rank of each H×W map of a [B,C,H,W]
// activation; singular values count when > tolerance·σ_max.
inline constexpr double kRankTolerance = 1e-6;
std::vector<double> hrank_score(const Tensor64& activations,
                                double tolerance = kRankTolerance);

// Σ of squared contributions per channel; `contributions` is [C, M].
std::vector<double> thinet_score(const Tensor64& contributions);

// Additive contribution of each input channel of `consumer` to its
// pre-activation output over the batch: [C, B·outputs]. `input` is the
// consumer's input activation; `expansion` groups consecutive linear input
// features into one channel.
Tensor64 channel_contributions(const LayerNode& consumer, const Tensor64& input,
                               std::int64_t expansion = 1);

// Sums consecutive blocks of `expansion` entries.
std::vector<double> reduce_expanded(std::span<const double> v, std::int64_t expansion);

std::vector<double> normalize_scores(std::span<const double> v, Normalization mode);

// Normalizes each vector and averages them elementwise.
ImportanceScores aggregate_group(int group_id, const std::vector<std::vector<double>>& per_layer,
                                 Normalization mode);

// --- Group scoring ------------------------------------------------------------

// Calibration products for data-driven criteria, computed in eval mode on
// the current model.
struct CalibrationData {
  ExecutionRecord record;
  std::optional<ParamSet> gradients;
  std::vector<ParamSet> per_sample;
};

CalibrationData calibrate(const ModelGraph& model, const CriterionSpec& crit,
                          const CalibrationBatch& batch);

// Throws ConfigError if the criterion cannot score some prunable group
// (bnscale without a batchnorm member, hrank without spatial maps).
void check_criterion(const ModelGraph& model, const std::vector<PruneGroup>& groups,
                     const CriterionSpec& crit);

ImportanceScores score_group(const ModelGraph& model, const PruneGroup& group,
                             const CriterionSpec& crit, const CalibrationData* calib);

// Scores for every prunable group, ordered by group id.
std::vector<ImportanceScores> score_groups(const ModelGraph& model,
                                           const std::vector<PruneGroup>& groups,
                                           const CriterionSpec& crit,
                                           const CalibrationData* calib);

nlohmann::json scores_to_json(const std::vector<ImportanceScores>& scores);

}  // namespace structprune

#endif  // STRUCTPRUNE_IMPORTANCE_HPP_
