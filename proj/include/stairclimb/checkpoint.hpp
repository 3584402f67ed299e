#pragma once

// Checkpoint = JSON manifest (layer names, shapes, byte offsets, provenance)
// plus a flat little-endian float32 array in a sibling .bin file.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "grid_io.hpp"
#include "json.hpp"
#include "net.hpp"

namespace stairclimb {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string stage = "stage2";
  std::string terrain_kind = "straight";
  int iteration = 0;
};

struct LoadedCheckpoint {
  ActorCritic<float> net;
  CheckpointMeta meta;
};

inline std::filesystem::path checkpoint_data_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

inline void save_checkpoint(const ActorCritic<float>& net, const CheckpointMeta& meta,
                            const std::filesystem::path& manifest_path) {
  const auto data_path = checkpoint_data_path(manifest_path);
  ensure_parent(manifest_path);
  {
    std::ofstream out(data_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + data_path.string());
    for (float v : net.params()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                             static_cast<char>((bits >> 16) & 0xff),
                             static_cast<char>((bits >> 24) & 0xff)};
      out.write(bytes, 4);
    }
  }
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& b : parameter_layout()) {
    layers.push_back({{"name", b.name},
                      {"shape", b.shape},
                      {"byte_offset", b.offset * 4},
                      {"count", b.size}});
  }
  write_json(manifest_path, {{"format", "stairclimb-checkpoint"},
                             {"version", kCheckpointVersion},
                             {"dtype", "float32-le"},
                             {"data_file", data_path.filename().string()},
                             {"parameter_count", parameter_count()},
                             {"seed", meta.seed},
                             {"stage", meta.stage},
                             {"terrain_kind", meta.terrain_kind},
                             {"iteration", meta.iteration},
                             {"layers", layers}});
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& manifest_path) {
  const auto j = read_json(manifest_path);
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("invalid checkpoint " + manifest_path.string() + ": " + why);
  };
  if (j.value("format", "") != "stairclimb-checkpoint") fail("wrong format tag");
  if (j.value("version", -1) != kCheckpointVersion) fail("unsupported version");
  if (j.value("dtype", "") != "float32-le") fail("unsupported dtype");
  const auto& layout = parameter_layout();
  const auto& layers = j.at("layers");
  if (!layers.is_array() || layers.size() != layout.size()) fail("layer count mismatch");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& l = layers[i];
    if (l.at("name").get<std::string>() != layout[i].name) fail("unexpected layer " + l.at("name").get<std::string>());
    if (l.at("shape").get<std::vector<int>>() != layout[i].shape) fail("shape mismatch for " + layout[i].name);
    if (l.at("byte_offset").get<std::size_t>() != layout[i].offset * 4) fail("offset mismatch for " + layout[i].name);
    if (l.at("count").get<std::size_t>() != layout[i].size) fail("count mismatch for " + layout[i].name);
  }
  const auto data_path = manifest_path.parent_path() / j.at("data_file").get<std::string>();
  std::ifstream in(data_path, std::ios::binary);
  if (!in) fail("cannot read " + data_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != parameter_count() * 4) fail("data file has " + std::to_string(bytes.size()) + " bytes");

  LoadedCheckpoint ck;
  auto params = ck.net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + k])) << (8 * k);
    }
    params[i] = std::bit_cast<float>(bits);
  }
  ck.meta.seed = j.value("seed", std::uint64_t{0});
  ck.meta.stage = j.value("stage", std::string("stage2"));
  ck.meta.terrain_kind = j.value("terrain_kind", std::string("straight"));
  ck.meta.iteration = j.value("iteration", 0);
  return ck;
}

}  // namespace stairclimb
