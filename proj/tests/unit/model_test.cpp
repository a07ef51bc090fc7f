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

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "../support/oracles.hpp"
#include "json.hpp"
#include "structprune/dataset.hpp"
#include "structprune/error.hpp"
#include "structprune/model.hpp"
#include "structprune/model_io.hpp"
#include "structprune/zoo.hpp"

namespace structprune {
namespace {

namespace fs = std::filesystem;

LayerNode conv_layer(std::int64_t in, std::int64_t out, std::int64_t k, bool bias) {
  LayerNode n;
  n.id = "conv";
  n.kind = LayerKind::kConv2d;
  n.attrs.in_channels = in;
  n.attrs.out_channels = out;
  n.attrs.kernel = k;
  n.attrs.bias = bias;
  std::vector<float> w(static_cast<std::size_t>(out * in * k * k));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(i);
  n.params.emplace("weight", Tensor({out, in, k, k}, w));
  if (bias) n.params.emplace("bias", Tensor({out}, {10.f, 11.f, 12.f, 13.f}));
  return n;
}

TEST(SliceParam, ConvOutKeepsSelectedFilters) {
  const LayerNode conv = conv_layer(3, 4, 3, true);
  const std::vector<std::int64_t> keep = {0, 2};
  const LayerNode s = slice_param(conv, ParamRole::kConvOut, keep);
  EXPECT_EQ(s.param("weight").shape(), (Shape{2, 3, 3, 3}));
  EXPECT_EQ(s.param("bias").shape(), (Shape{2}));
  EXPECT_EQ(s.attrs.out_channels, 2);
  EXPECT_EQ(s.param("bias")[1], 12.f);
  // Filter 2 starts at flat offset 2·27.
  EXPECT_EQ(s.param("weight")[27], 54.f);
}

TEST(SliceParam, FullRangeIsIdentity) {
  const LayerNode conv = conv_layer(3, 4, 3, true);
  const std::vector<std::int64_t> keep = {0, 1, 2, 3};
  EXPECT_EQ(slice_param(conv, ParamRole::kConvOut, keep), conv);
  const std::vector<std::int64_t> keep_in = {0, 1, 2};
  EXPECT_EQ(slice_param(conv, ParamRole::kConvIn, keep_in), conv);
}

TEST(SliceParam, ConvInSlicesAxisOne) {
  const LayerNode conv = conv_layer(3, 4, 3, false);
  const std::vector<std::int64_t> keep = {1};
  const LayerNode s = slice_param(conv, ParamRole::kConvIn, keep);
  EXPECT_EQ(s.param("weight").shape(), (Shape{4, 1, 3, 3}));
  EXPECT_EQ(s.attrs.in_channels, 1);
  const auto expected = oracle::slice_values(conv.param("weight"), 1, 1);
  EXPECT_EQ(s.param("weight").storage(), std::vector<float>(expected.begin(), expected.end()));
}

TEST(SliceParam, BatchNormGathersEveryBuffer) {
  LayerNode bn;
  bn.id = "bn";
  bn.kind = LayerKind::kBatchNorm2d;
  bn.attrs.out_channels = 4;
  bn.params.emplace("gamma", Tensor({4}, {1.f, 2.f, 3.f, 4.f}));
  bn.params.emplace("beta", Tensor({4}, {5.f, 6.f, 7.f, 8.f}));
  bn.params.emplace("running_mean", Tensor({4}, {9.f, 10.f, 11.f, 12.f}));
  bn.params.emplace("running_var", Tensor({4}, {13.f, 14.f, 15.f, 16.f}));
  const std::vector<std::int64_t> keep = {1, 3};
  const LayerNode s = slice_param(bn, ParamRole::kNormScaleShift, keep);
  for (const auto& [name, t] : bn.params) {
    ASSERT_EQ(s.param(name).shape(), (Shape{2})) << name;
    EXPECT_EQ(s.param(name)[0], t[1]) << name;
    EXPECT_EQ(s.param(name)[1], t[3]) << name;
  }
  EXPECT_EQ(s.attrs.out_channels, 2);
}

TEST(SliceParam, RejectsWrongLayerKind) {
  const LayerNode conv = conv_layer(3, 4, 3, false);
  const std::vector<std::int64_t> keep = {0};
  EXPECT_THROW(slice_param(conv, ParamRole::kLinearOut, keep), ModelError);
}

TEST(ModelGraph, RejectsCycleAndDanglingEdges) {
  const ModelGraph m = zoo::chain_cnn(1);
  auto edges = m.edges();
  edges.push_back({"relu2", "conv1", 0});
  EXPECT_THROW(ModelGraph(m.metadata(), m.nodes(), edges), ModelError);
  auto dangling = m.edges();
  dangling.push_back({"ghost", "fc", 0});
  EXPECT_THROW(ModelGraph(m.metadata(), m.nodes(), dangling), ModelError);
}

TEST(ModelGraph, RejectsChannelMismatchNamingNode) {
  const ModelGraph m = zoo::chain_cnn(1);
  LayerNode conv2 = m.node("conv2");
  conv2.attrs.in_channels = 7;
  try {
    ModelGraph(m.metadata(), [&] {
      auto nodes = m.nodes();
      nodes[m.index_of("conv2")] = conv2;
      return nodes;
    }(), m.edges());
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_EQ(e.node(), "conv2");
  }
}

// --- model directory format ----------------------------------------------------

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

// Little-endian float32 blob written byte by byte, independent of the library.
void write_blob(const fs::path& p, const std::vector<float>& values) {
  std::ofstream out(p, std::ios::binary);
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int b = 0; b < 4; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
}

nlohmann::json minimal_manifest(std::uint32_t w_crc, std::uint32_t b_crc) {
  return {{"format", "structprune.model"},
          {"version", 1},
          {"name", "minimal"},
          {"input_shape", {1, 3, 3}},
          {"num_classes", 2},
          {"blob", "weights.bin"},
          {"nodes",
           {{{"id", "input"}, {"kind", "input"}},
            {{"id", "conv"},
             {"kind", "conv2d"},
             {"attrs",
              {{"in_channels", 1}, {"out_channels", 2}, {"kernel", 3}, {"stride", 1},
               {"padding", 0}, {"bias", true}}},
             {"params",
              {{"weight", {{"shape", {2, 1, 3, 3}}, {"offset", 0}, {"count", 18}, {"crc32", w_crc}}},
               {"bias", {{"shape", {2}}, {"offset", 72}, {"count", 2}, {"crc32", b_crc}}}}}},
            {{"id", "output"}, {"kind", "output"}}}},
          {"edges", {{{"src", "input"}, {"dst", "conv"}}, {{"src", "conv"}, {"dst", "output"}}}}};
}

std::vector<float> minimal_weights() {
  std::vector<float> w(18);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5f * static_cast<float>(i) - 4.f;
  return w;
}

TEST(ModelFormat, LoadsHandWrittenMinimalManifest) {
  oracle::TempDir dir("minimal");
  const auto w = minimal_weights();
  const std::vector<float> b = {0.25f, -0.75f};
  std::vector<float> blob = w;
  blob.insert(blob.end(), b.begin(), b.end());
  write_blob(dir.path() / "weights.bin", blob);
  write_text(dir.path() / "manifest.json",
             minimal_manifest(crc32_of(std::span<const float>(w)),
                              crc32_of(std::span<const float>(b)))
                 .dump());
  const ModelGraph m = load_model(dir.path());
  EXPECT_EQ(m.size(), 3u);
  const LayerNode& conv = m.node("conv");
  EXPECT_EQ(conv.params.size(), 2u);
  EXPECT_EQ(conv.param("weight").storage(), w);
  EXPECT_EQ(conv.param("bias").storage(), b);
  EXPECT_EQ(m.output_shape(m.index_of("conv")), (FeatureShape{2, 1, 1, false}));
}

TEST(ModelFormat, ShortBlobIsAShapeErrorNamingTheNode) {
  oracle::TempDir dir("short");
  std::vector<float> blob(17, 1.f);
  write_blob(dir.path() / "weights.bin", blob);
  auto manifest = minimal_manifest(0, 0);
  manifest["nodes"][1]["params"].erase("bias");
  write_text(dir.path() / "manifest.json", manifest.dump());
  try {
    load_model(dir.path());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.node(), "conv");
    EXPECT_NE(std::string(e.what()).find("[2,1,3,3]"), std::string::npos) << e.what();
  }
}

TEST(ModelFormat, RoundTripIsBitIdentical) {
  oracle::TempDir dir("roundtrip");
  const ModelGraph m = zoo::resnet_tiny(3);
  save_model(m, dir.path() / "a");
  const ModelGraph loaded = load_model(dir.path() / "a");
  EXPECT_EQ(loaded, m);
  save_model(loaded, dir.path() / "b");
  EXPECT_EQ(read_file_bytes(dir.path() / "a" / "weights.bin"),
            read_file_bytes(dir.path() / "b" / "weights.bin"));
  EXPECT_EQ(read_file_bytes(dir.path() / "a" / "manifest.json"),
            read_file_bytes(dir.path() / "b" / "manifest.json"));
}

TEST(ModelFormat, FlippedFloatFailsChecksum) {
  oracle::TempDir dir("crc");
  save_model(zoo::chain_cnn(2), dir.path());
  auto bytes = read_file_bytes(dir.path() / "weights.bin");
  bytes[40] ^= 0x01;
  write_file_bytes(dir.path() / "weights.bin", bytes);
  try {
    load_model(dir.path());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
}

TEST(ModelFormat, UnwritableTargetIsIoError) {
  oracle::TempDir dir("ro");
  write_text(dir.path() / "file", "x");
  EXPECT_THROW(save_model(zoo::mlp(0), dir.path() / "file" / "model"), IoError);
}

TEST(ModelFormat, MissingDirectoryIsIoError) {
  EXPECT_THROW(load_model("/nonexistent/structprune/model"), IoError);
}

TEST(ModelFormat, Crc32MatchesKnownVector) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32_of(std::span<const std::uint8_t>(
                reinterpret_cast<const std::uint8_t*>(s.data()), s.size())),
            0xCBF43926u);
}

// --- dataset directory format --------------------------------------------------

TEST(DatasetFormat, LoadsHandWrittenDirectory) {
  oracle::TempDir dir("data");
  const std::vector<float> pixels = {1.f, 2.f, 3.f, 4.f, -1.f, -2.f, -3.f, -4.f};
  write_blob(dir.path() / "data.bin", pixels);
  {
    std::ofstream out(dir.path() / "labels.bin", std::ios::binary);
    for (std::uint32_t l : {1u, 0u}) {
      for (int b = 0; b < 4; ++b) out.put(static_cast<char>((l >> (8 * b)) & 0xFF));
    }
  }
  write_text(dir.path() / "meta.json",
             R"({"format": "structprune.dataset", "version": 1, "shape": [2, 1, 2, 2], "num_classes": 2})");
  const Dataset d = load_dataset(dir.path());
  EXPECT_EQ(d.size(), 2);
  EXPECT_EQ(d.inputs.shape(), (Shape{2, 1, 2, 2}));
  EXPECT_EQ(d.inputs.storage(), pixels);
  EXPECT_EQ(d.labels, (std::vector<std::uint32_t>{1, 0}));
  EXPECT_EQ(d.num_classes, 2);
}

TEST(DatasetFormat, RoundTripAndValidation) {
  oracle::TempDir dir("data_rt");
  SyntheticSpec synth;
  synth.samples = 20;
  const Dataset d = make_synthetic(synth);
  save_dataset(d, dir.path());
  EXPECT_EQ(load_dataset(dir.path()), d);

  Dataset bad = d;
  bad.labels[0] = 99;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(DatasetFormat, TruncatedDataIsIoError) {
  oracle::TempDir dir("data_bad");
  SyntheticSpec synth;
  synth.samples = 4;
  save_dataset(make_synthetic(synth), dir.path());
  auto bytes = read_file_bytes(dir.path() / "data.bin");
  bytes.resize(bytes.size() - 4);
  write_file_bytes(dir.path() / "data.bin", bytes);
  EXPECT_THROW(load_dataset(dir.path()), IoError);
}

TEST(Dataset, SampleSubsetIsDeterministicAndOrdered) {
  SyntheticSpec synth;
  synth.samples = 50;
  const Dataset d = make_synthetic(synth);
  const Dataset a = sample_subset(d, 10, 5);
  EXPECT_EQ(a, sample_subset(d, 10, 5));
  EXPECT_EQ(a.size(), 10);
  EXPECT_THROW(sample_subset(d, 51, 0), ConfigError);
}

TEST(Dataset, SyntheticSplitsShareClassPrototypes) {
  SyntheticSpec a;
  a.samples = 30;
  a.noise = 0.0;
  a.max_shift = 0;
  SyntheticSpec b = a;
  b.sample_seed = 99;
  const Dataset da = make_synthetic(a), db = make_synthetic(b);
  // Without noise or shifts a sample equals its class prototype.
  for (std::int64_t i = 0; i < da.size(); ++i) {
    for (std::int64_t j = 0; j < db.size(); ++j) {
      if (da.labels[static_cast<std::size_t>(i)] != db.labels[static_cast<std::size_t>(j)]) continue;
      const auto n = static_cast<std::size_t>(da.sample_numel());
      EXPECT_TRUE(std::equal(da.inputs.storage().begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::int64_t>(n)),
                             da.inputs.storage().begin() + static_cast<std::ptrdiff_t>((i + 1) * static_cast<std::int64_t>(n)),
                             db.inputs.storage().begin() + static_cast<std::ptrdiff_t>(j * static_cast<std::int64_t>(n))));
    }
  }
}

}  // namespace
}  // namespace structprune
