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

#ifndef STRUCTPRUNE_DATASET_HPP_
#define STRUCTPRUNE_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "structprune/tensor.hpp"

namespace structprune {

// Labelled samples. Calibration batches use the same type and on-disk layout.
struct Dataset {
  Tensor inputs;  // [N, C, H, W]
  std::vector<std::uint32_t> labels;
  std::int64_t num_classes = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t sample_numel() const;
  // Throws ConfigError unless N >= 1, labels match N and are < num_classes.
  void validate() const;
  Dataset subset(std::span<const std::int64_t> indices) const;
  Dataset slice(std::int64_t begin, std::int64_t end) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

using CalibrationBatch = Dataset;

inline constexpr const char* kDatasetFormat = "structprune.dataset";

// Directory with data.bin (float32 LE), labels.bin (uint32 LE), meta.json.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& data, const std::filesystem::path& dir);

// `n` distinct samples chosen deterministically from `seed`, kept in their
// original order.
Dataset sample_subset(const Dataset& data, std::int64_t n, std::uint64_t seed);

// Class-prototype images plus Gaussian noise and small circular shifts.
// Prototypes depend only on `prototype_seed`, so train/val splits built with
// different `sample_seed`s share one task.
struct SyntheticSpec {
  std::int64_t samples = 1000;
  std::int64_t classes = 10;
  std::int64_t channels = 3;
  std::int64_t height = 8;
  std::int64_t width = 8;
  double noise = 1.0;
  std::int64_t max_shift = 1;
  std::uint64_t prototype_seed = 7;
  std::uint64_t sample_seed = 0;
};

Dataset make_synthetic(const SyntheticSpec& synth);

}  // namespace structprune

#endif  // STRUCTPRUNE_DATASET_HPP_
