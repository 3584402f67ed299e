#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "grid_io.hpp"
#include "json.hpp"
#include "terrain.hpp"

namespace stairclimb {

inline nlohmann::json spec_to_json(const StairSpec& s) {
  return {{"kind", std::string(to_string(s.kind))},
          {"riser_height", s.riser_height},
          {"tread_depth", s.tread_depth},
          {"stair_width", s.stair_width},
          {"steps_per_run", s.steps_per_run},
          {"landing_depth", s.landing_depth},
          {"runs", s.runs},
          {"wall_height", s.wall_height},
          {"spiral_inner_radius", s.spiral_inner_radius},
          {"spiral_total_turn", s.spiral_total_turn}};
}

/// Missing fields fall back to the kind's defaults; unknown fields are errors.
inline StairSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("stair spec must be a JSON object");
  static const std::set<std::string> known = {
      "kind", "riser_height", "tread_depth", "stair_width", "steps_per_run", "landing_depth",
      "runs", "wall_height", "spiral_inner_radius", "spiral_total_turn"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown stair spec field: " + key);
  }
  if (!j.contains("kind")) throw std::invalid_argument("stair spec needs a kind");
  StairSpec s = default_spec(parse_stair_kind(j.at("kind").get<std::string>()));
  s.riser_height = j.value("riser_height", s.riser_height);
  s.tread_depth = j.value("tread_depth", s.tread_depth);
  s.stair_width = j.value("stair_width", s.stair_width);
  s.steps_per_run = j.value("steps_per_run", s.steps_per_run);
  s.landing_depth = j.value("landing_depth", s.landing_depth);
  s.runs = j.value("runs", s.runs);
  s.wall_height = j.value("wall_height", s.wall_height);
  s.spiral_inner_radius = j.value("spiral_inner_radius", s.spiral_inner_radius);
  s.spiral_total_turn = j.value("spiral_total_turn", s.spiral_total_turn);
  s.validate();
  return s;
}

struct TerrainExportPaths {
  std::filesystem::path csv;
  std::filesystem::path pgm;
  std::filesystem::path manifest;
};

/// Writes `<stem>.csv`, `<stem>.pgm` and the `<stem>.json` manifest into `dir`.
inline TerrainExportPaths export_heightfield(const HeightField& hf,
                                             const std::filesystem::path& dir,
                                             const std::string& stem) {
  TerrainExportPaths paths{dir / (stem + ".csv"), dir / (stem + ".pgm"), dir / (stem + ".json")};
  const GridView grid{hf.nx, hf.ny, hf.heights};
  write_grid_csv(paths.csv, grid, 0.0, hf.cell_size);
  const PgmScale scale = write_grid_pgm(paths.pgm, grid);
  nlohmann::json centerline = nlohmann::json::array();
  for (const auto& p : hf.centerline.points()) centerline.push_back({p.x, p.y});
  std::size_t wall_cells = 0;
  for (auto w : hf.wall) wall_cells += w;
  write_json(paths.manifest,
             {{"spec", spec_to_json(hf.spec)},
              {"seed", hf.seed},
              {"cell_size", hf.cell_size},
              {"nx", hf.nx},
              {"ny", hf.ny},
              {"origin", {0.0, 0.0}},
              {"csv", paths.csv.filename().string()},
              {"pgm", paths.pgm.filename().string()},
              {"pgm_scale",
               {{"offset", scale.offset},
                {"scale", scale.scale},
                {"formula", "meters = offset + scale * (pixel - 1); pixel 0 = missing"}}},
              {"spawn_pose", {hf.spawn.x, hf.spawn.y, hf.spawn.yaw}},
              {"goal_pose", {hf.goal.x, hf.goal.y, hf.goal.z, hf.goal.yaw}},
              {"centerline", centerline},
              {"wall_cells", wall_cells}});
  return paths;
}

}  // namespace stairclimb
