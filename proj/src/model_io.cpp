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

#include "structprune/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace structprune {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large blobs.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = crc32(crc, bytes.data() + offset, static_cast<uInt>(n));
    offset += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32_of(std::span<const float> values) {
  const auto bytes = to_le_bytes(values);
  return crc32_of(std::span<const std::uint8_t>(bytes));
}

std::vector<std::uint8_t> to_le_bytes(std::span<const float> values) {
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) {
      out[i * 4 + static_cast<std::size_t>(b)] =
          static_cast<std::uint8_t>(bits >> (8 * b));
    }
  }
  return out;
}

std::vector<float> floats_from_le_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) throw IoError("float blob length not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(bytes[i * 4 + static_cast<std::size_t>(b)])
              << (8 * b);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

json attrs_to_json(const LayerNode& n) {
  const LayerAttrs& a = n.attrs;
  switch (n.kind) {
    case LayerKind::kConv2d:
      return {{"in_channels", a.in_channels}, {"out_channels", a.out_channels},
              {"kernel", a.kernel},           {"stride", a.stride},
              {"padding", a.padding},         {"bias", a.bias}};
    case LayerKind::kLinear:
      return {{"in_features", a.in_channels},
              {"out_features", a.out_channels},
              {"bias", a.bias}};
    case LayerKind::kBatchNorm2d:
      return {{"channels", a.out_channels},
              {"epsilon", a.epsilon},
              {"momentum", a.momentum}};
    case LayerKind::kMaxPool2d:
    case LayerKind::kAvgPool2d:
      return {{"kernel", a.kernel}, {"stride", a.stride}, {"padding", a.padding}};
    default:
      return json::object();
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& node) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw FormatError(node, std::string("missing field '") + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(node, std::string("bad field '") + key + "': " + e.what());
  }
}

template <typename T>
T optional(const json& obj, const char* key, T fallback, const std::string& node) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(node, std::string("bad field '") + key + "': " + e.what());
  }
}

LayerAttrs attrs_from_json(LayerKind kind, const json& j, const std::string& id) {
  LayerAttrs a;
  switch (kind) {
    case LayerKind::kConv2d:
      a.in_channels = required<std::int64_t>(j, "in_channels", id);
      a.out_channels = required<std::int64_t>(j, "out_channels", id);
      a.kernel = required<std::int64_t>(j, "kernel", id);
      a.stride = optional<std::int64_t>(j, "stride", 1, id);
      a.padding = optional<std::int64_t>(j, "padding", 0, id);
      a.bias = optional<bool>(j, "bias", false, id);
      break;
    case LayerKind::kLinear:
      a.in_channels = required<std::int64_t>(j, "in_features", id);
      a.out_channels = required<std::int64_t>(j, "out_features", id);
      a.bias = optional<bool>(j, "bias", false, id);
      break;
    case LayerKind::kBatchNorm2d:
      a.out_channels = required<std::int64_t>(j, "channels", id);
      a.epsilon = optional<double>(j, "epsilon", 1e-5, id);
      a.momentum = optional<double>(j, "momentum", 0.1, id);
      break;
    case LayerKind::kMaxPool2d:
    case LayerKind::kAvgPool2d:
      a.kernel = required<std::int64_t>(j, "kernel", id);
      a.stride = optional<std::int64_t>(j, "stride", a.kernel, id);
      a.padding = optional<std::int64_t>(j, "padding", 0, id);
      break;
    default:
      break;
  }
  return a;
}

struct Serialized {
  std::string manifest;
  std::vector<std::uint8_t> blob;
};

Serialized serialize(const ModelGraph& m) {
  Serialized out;
  json nodes = json::array();
  for (const LayerNode& n : m.nodes()) {
    json params = json::object();
    for (const auto& [name, t] : n.params) {
      const auto bytes = to_le_bytes(t.data());
      params[name] = {{"shape", t.shape()},
                      {"offset", out.blob.size()},
                      {"count", t.numel()},
                      {"crc32", crc32_of(std::span<const std::uint8_t>(bytes))}};
      out.blob.insert(out.blob.end(), bytes.begin(), bytes.end());
    }
    json jn = {{"id", n.id},
               {"kind", std::string(to_string(n.kind))},
               {"attrs", attrs_to_json(n)}};
    if (!params.empty()) jn["params"] = std::move(params);
    nodes.push_back(std::move(jn));
  }
  json edges = json::array();
  for (const Edge& e : m.edges()) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"slot", e.slot}});
  }
  json manifest = {{"format", kModelFormat},
                   {"version", kModelFormatVersion},
                   {"name", m.metadata().name},
                   {"input_shape", m.metadata().input_shape},
                   {"num_classes", m.metadata().num_classes},
                   {"blob", kWeightsFile},
                   {"blob_bytes", out.blob.size()},
                   {"nodes", std::move(nodes)},
                   {"edges", std::move(edges)}};
  out.manifest = manifest.dump(2) + "\n";
  return out;
}

}  // namespace

void save_model(const ModelGraph& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const Serialized s = serialize(model);
  write_file_bytes(dir / kWeightsFile, s.blob);
  std::ofstream out(dir / kManifestFile, std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / kManifestFile).string());
  out << s.manifest;
  if (!out) throw IoError("write failed for " + (dir / kManifestFile).string());
}

ModelGraph load_model(const fs::path& dir) {
  json manifest;
  {
    std::ifstream in(dir / kManifestFile);
    if (!in) throw IoError("cannot open " + (dir / kManifestFile).string());
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      throw FormatError("", std::string("malformed manifest: ") + e.what());
    }
  }
  if (!manifest.is_object()) throw FormatError("", "manifest is not an object");
  if (manifest.value("format", std::string()) != kModelFormat) {
    throw FormatError("", "manifest format is not '" + std::string(kModelFormat) + "'");
  }
  if (manifest.value("version", 0) != kModelFormatVersion) {
    throw FormatError("", "unsupported manifest version");
  }
  const std::string blob_name = optional<std::string>(manifest, "blob", kWeightsFile, "");
  const std::vector<std::uint8_t> blob = read_file_bytes(dir / blob_name);

  ModelMetadata meta;
  meta.name = optional<std::string>(manifest, "name", "", "");
  meta.input_shape = required<Shape>(manifest, "input_shape", "");
  meta.num_classes = required<std::int64_t>(manifest, "num_classes", "");

  const json& jnodes = manifest.contains("nodes") ? manifest["nodes"] : json();
  if (!jnodes.is_array()) throw FormatError("", "manifest has no node array");
  std::vector<LayerNode> nodes;
  nodes.reserve(jnodes.size());
  for (const json& jn : jnodes) {
    LayerNode n;
    n.id = required<std::string>(jn, "id", "");
    const auto kind_name = required<std::string>(jn, "kind", n.id);
    try {
      n.kind = parse_layer_kind(kind_name);
    } catch (const ConfigError& e) {
      throw FormatError(n.id, e.what());
    }
    n.attrs = attrs_from_json(n.kind, jn.value("attrs", json::object()), n.id);
    if (jn.contains("params")) {
      const json& jp = jn["params"];
      if (!jp.is_object()) throw FormatError(n.id, "params must be an object");
      for (const auto& [name, desc] : jp.items()) {
        const auto shape = required<Shape>(desc, "shape", n.id);
        const auto offset = required<std::uint64_t>(desc, "offset", n.id);
        const auto count = required<std::int64_t>(desc, "count", n.id);
        const auto crc = required<std::uint32_t>(desc, "crc32", n.id);
        for (std::int64_t e : shape) {
          if (e <= 0) throw FormatError(n.id, "parameter '" + name + "' has non-positive extent");
        }
        if (count != shape_numel(shape)) {
          throw FormatError(n.id, "parameter '" + name + "' declares shape " +
                                      shape_to_string(shape) + " but " +
                                      std::to_string(count) + " floats");
        }
        const std::uint64_t nbytes = static_cast<std::uint64_t>(count) * 4;
        if (offset % 4 != 0 || offset + nbytes > blob.size()) {
          throw FormatError(n.id, "parameter '" + name + "' of shape " +
                                      shape_to_string(shape) +
                                      " overruns the weight blob (" +
                                      std::to_string(blob.size() / 4) + " floats)");
        }
        std::span<const std::uint8_t> bytes(blob.data() + offset, nbytes);
        if (crc32_of(bytes) != crc) {
          throw FormatError(n.id, "checksum mismatch for parameter '" + name + "'");
        }
        n.params.emplace(name, Tensor(shape, floats_from_le_bytes(bytes)));
      }
    }
    nodes.push_back(std::move(n));
  }

  std::vector<Edge> edges;
  if (!manifest.contains("edges") || !manifest["edges"].is_array()) {
    throw FormatError("", "manifest has no edge array");
  }
  for (const json& je : manifest["edges"]) {
    Edge e;
    e.src = required<std::string>(je, "src", "");
    e.dst = required<std::string>(je, "dst", "");
    e.slot = optional<int>(je, "slot", 0, e.dst);
    edges.push_back(std::move(e));
  }
  return ModelGraph(std::move(meta), std::move(nodes), std::move(edges));
}

std::string model_checksum(const ModelGraph& model) {
  const Serialized s = serialize(model);
  std::vector<std::uint8_t> all(s.manifest.begin(), s.manifest.end());
  all.insert(all.end(), s.blob.begin(), s.blob.end());
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0')
     << crc32_of(std::span<const std::uint8_t>(all));
  return os.str();
}

}  // namespace structprune
