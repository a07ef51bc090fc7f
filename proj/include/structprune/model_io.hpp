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

#ifndef STRUCTPRUNE_MODEL_IO_HPP_
#define STRUCTPRUNE_MODEL_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "structprune/model.hpp"

namespace structprune {

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kWeightsFile = "weights.bin";
inline constexpr const char* kModelFormat = "structprune.model";
inline constexpr int kModelFormatVersion = 1;

// Model directory: manifest.json (topology, attrs, per-tensor blob offsets
// and CRC32) plus weights.bin (concatenated little-endian float32 tensors).
// See docs/model_format.md.
ModelGraph load_model(const std::filesystem::path& dir);
void save_model(const ModelGraph& model, const std::filesystem::path& dir);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);
std::uint32_t crc32_of(std::span<const float> values);

// Little-endian float32 helpers shared with the dataset format.
std::vector<std::uint8_t> to_le_bytes(std::span<const float> values);
std::vector<float> floats_from_le_bytes(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

// CRC32 over the manifest text and blob; identifies a saved model in run
// manifests.
std::string model_checksum(const ModelGraph& model);

}  // namespace structprune

#endif  // STRUCTPRUNE_MODEL_IO_HPP_
