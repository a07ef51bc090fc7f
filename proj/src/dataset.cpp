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

#include "structprune/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "structprune/model_io.hpp"
#include "structprune/rng.hpp"

namespace structprune {

namespace fs = std::filesystem;

std::int64_t Dataset::sample_numel() const {
  if (inputs.rank() != 4) return 0;
  return inputs.dim(1) * inputs.dim(2) * inputs.dim(3);
}

void Dataset::validate() const {
  if (inputs.rank() != 4) throw ConfigError("dataset inputs must be [N,C,H,W]");
  if (labels.empty()) throw ConfigError("dataset has no samples");
  if (inputs.dim(0) != size()) {
    throw ConfigError("dataset has " + std::to_string(inputs.dim(0)) +
                      " inputs but " + std::to_string(size()) + " labels");
  }
  if (num_classes <= 0) throw ConfigError("dataset class count must be positive");
  for (std::uint32_t l : labels) {
    if (static_cast<std::int64_t>(l) >= num_classes) {
      throw ConfigError("label " + std::to_string(l) + " >= class count " +
                        std::to_string(num_classes));
    }
  }
  if (!inputs.all_finite()) throw ConfigError("dataset inputs are not finite");
}

Dataset Dataset::subset(std::span<const std::int64_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  const std::int64_t per = sample_numel();
  std::vector<float> data;
  data.reserve(indices.size() * static_cast<std::size_t>(per));
  for (std::int64_t i : indices) {
    if (i < 0 || i >= size()) throw ConfigError("subset index out of range");
    auto src = inputs.data().subspan(static_cast<std::size_t>(i * per),
                                     static_cast<std::size_t>(per));
    data.insert(data.end(), src.begin(), src.end());
    out.labels.push_back(labels[static_cast<std::size_t>(i)]);
  }
  Shape shape = inputs.shape();
  shape[0] = static_cast<std::int64_t>(indices.size());
  out.inputs = Tensor(std::move(shape), std::move(data));
  return out;
}

Dataset Dataset::slice(std::int64_t begin, std::int64_t end) const {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(end - begin));
  std::iota(idx.begin(), idx.end(), begin);
  return subset(idx);
}

Dataset load_dataset(const fs::path& dir) {
  nlohmann::json meta;
  {
    std::ifstream in(dir / "meta.json");
    if (!in) throw IoError("cannot open " + (dir / "meta.json").string());
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed dataset meta: ") + e.what());
    }
  }
  Shape shape;
  Dataset d;
  try {
    shape = meta.at("shape").get<Shape>();
    d.num_classes = meta.at("num_classes").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("dataset meta missing fields: ") + e.what());
  }
  if (shape.size() != 4) throw IoError("dataset shape must be [N,C,H,W]");
  const auto data_bytes = read_file_bytes(dir / "data.bin");
  const auto label_bytes = read_file_bytes(dir / "labels.bin");
  if (static_cast<std::int64_t>(data_bytes.size()) != shape_numel(shape) * 4) {
    throw IoError("data.bin holds " + std::to_string(data_bytes.size() / 4) +
                  " floats, meta declares " + shape_to_string(shape));
  }
  if (static_cast<std::int64_t>(label_bytes.size()) != shape[0] * 4) {
    throw IoError("labels.bin length does not match sample count");
  }
  d.inputs = Tensor(shape, floats_from_le_bytes(data_bytes));
  d.labels.resize(static_cast<std::size_t>(shape[0]));
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
      v |= static_cast<std::uint32_t>(label_bytes[i * 4 + static_cast<std::size_t>(b)])
           << (8 * b);
    }
    d.labels[i] = v;
  }
  d.validate();
  return d;
}

void save_dataset(const Dataset& data, const fs::path& dir) {
  data.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file_bytes(dir / "data.bin", to_le_bytes(data.inputs.data()));
  std::vector<std::uint8_t> lb(data.labels.size() * 4);
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    for (int b = 0; b < 4; ++b) {
      lb[i * 4 + static_cast<std::size_t>(b)] =
          static_cast<std::uint8_t>(data.labels[i] >> (8 * b));
    }
  }
  write_file_bytes(dir / "labels.bin", lb);
  nlohmann::json meta = {{"format", kDatasetFormat},
                         {"version", 1},
                         {"shape", data.inputs.shape()},
                         {"num_classes", data.num_classes}};
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << "\n";
}

Dataset sample_subset(const Dataset& data, std::int64_t n, std::uint64_t seed) {
  if (n < 1 || n > data.size()) {
    throw ConfigError("cannot draw " + std::to_string(n) + " samples from " +
                      std::to_string(data.size()));
  }
  std::vector<std::int64_t> idx(static_cast<std::size_t>(data.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0xCA1B));
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());
  return data.subset(idx);
}

Dataset make_synthetic(const SyntheticSpec& synth) {
  const std::int64_t c = synth.channels, h = synth.height, w = synth.width;
  const std::int64_t per = c * h * w;
  if (synth.samples < 1 || synth.classes < 1 || per < 1) {
    throw ConfigError("synthetic dataset dimensions must be positive");
  }

  // Smooth prototypes: white noise blurred by a 3x3 box, then standardized.
  Rng proto_rng(mix_seed(synth.prototype_seed, 0x5EED));
  std::vector<std::vector<double>> protos(static_cast<std::size_t>(synth.classes));
  for (auto& p : protos) {
    std::vector<double> raw(static_cast<std::size_t>(per));
    for (double& v : raw) v = proto_rng.normal();
    p.assign(static_cast<std::size_t>(per), 0.0);
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          double acc = 0.0;
          for (std::int64_t dy = -1; dy <= 1; ++dy) {
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
              const std::int64_t yy = (y + dy + h) % h, xx = (x + dx + w) % w;
              acc += raw[static_cast<std::size_t>((ch * h + yy) * w + xx)];
            }
          }
          p[static_cast<std::size_t>((ch * h + y) * w + x)] = acc;
        }
      }
    }
    const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(per);
    double var = 0.0;
    for (double v : p) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(per));
    for (double& v : p) v = (v - mean) / (sd > 0 ? sd : 1.0);
  }

  Rng rng(mix_seed(synth.sample_seed, 0xDA7A));
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(synth.samples));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<std::uint32_t>(static_cast<std::int64_t>(i) % synth.classes);
  }
  rng.shuffle(labels);

  std::vector<float> data(static_cast<std::size_t>(synth.samples * per));
  const auto span = static_cast<std::uint64_t>(2 * synth.max_shift + 1);
  for (std::int64_t s = 0; s < synth.samples; ++s) {
    const auto& p = protos[labels[static_cast<std::size_t>(s)]];
    const std::int64_t sy = static_cast<std::int64_t>(rng.below(span)) - synth.max_shift;
    const std::int64_t sx = static_cast<std::int64_t>(rng.below(span)) - synth.max_shift;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          const std::int64_t yy = ((y - sy) % h + h) % h, xx = ((x - sx) % w + w) % w;
          const double v = p[static_cast<std::size_t>((ch * h + yy) * w + xx)] +
                           synth.noise * rng.normal();
          data[static_cast<std::size_t>(s * per + (ch * h + y) * w + x)] =
              static_cast<float>(v);
        }
      }
    }
  }
  Dataset d;
  d.inputs = Tensor({synth.samples, c, h, w}, std::move(data));
  d.labels = std::move(labels);
  d.num_classes = synth.classes;
  return d;
}

}  // namespace structprune
