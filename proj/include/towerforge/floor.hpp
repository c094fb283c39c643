// Copyright 2026 The TowerForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "towerforge/default_content.hpp"
#include "towerforge/error.hpp"
#include "towerforge/grammar.hpp"
#include "towerforge/layout.hpp"
#include "towerforge/rng.hpp"
#include "towerforge/room.hpp"

namespace towerforge {

enum class VisualTheme { Ancient, Moorish, Industrial, Modern, Future };

inline constexpr std::array<VisualTheme, 5> kAllThemes = {
    VisualTheme::Ancient, VisualTheme::Moorish, VisualTheme::Industrial,
    VisualTheme::Modern, VisualTheme::Future};

inline std::string_view to_string(VisualTheme t) {
  switch (t) {
    case VisualTheme::Ancient: return "Ancient";
    case VisualTheme::Moorish: return "Moorish";
    case VisualTheme::Industrial: return "Industrial";
    case VisualTheme::Modern: return "Modern";
    case VisualTheme::Future: return "Future";
  }
  return "?";
}

inline std::optional<VisualTheme> theme_from_string(std::string_view s) {
  for (auto t : kAllThemes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

// Lighting is drawn on integer grids so serialized plans are exact.
struct LightingParams {
  int azimuth_deg = 0;        // [0, 359]
  int elevation_deg = 45;     // [10, 80]
  int intensity_milli = 1000; // [500, 1500], i.e. intensity 0.5 .. 1.5
  std::array<int, 3> color{255, 255, 255};

  double intensity() const { return intensity_milli / 1000.0; }
  // Eight brightness bands used by the observation palette.
  int band() const {
    return std::clamp((intensity_milli - 500) * 8 / 1001, 0, 7);
  }
  friend bool operator==(const LightingParams&, const LightingParams&) = default;
};

inline LightingParams sample_lighting(Rng& rng) {
  LightingParams l;
  l.azimuth_deg = static_cast<int>(rng.between(0, 359));
  l.elevation_deg = static_cast<int>(rng.between(10, 80));
  l.intensity_milli = static_cast<int>(rng.between(500, 1500));
  for (auto& c : l.color) c = static_cast<int>(rng.between(0, 255));
  return l;
}

struct FloorPlan {
  int floor_number = 0;
  std::uint64_t tower_seed = 0;
  VisualTheme theme = VisualTheme::Ancient;
  LightingParams lighting;
  MissionGraph mission;
  LayoutGrid layout;
  std::vector<std::optional<RoomInstance>> rooms;  // by layout cell

  const RoomInstance& room(int cell) const { return *rooms.at(cell); }

  friend bool operator==(const FloorPlan&, const FloorPlan&) = default;
};

inline nlohmann::json to_json(const LightingParams& l) {
  return {{"azimuth_deg", l.azimuth_deg},
          {"elevation_deg", l.elevation_deg},
          {"intensity_milli", l.intensity_milli},
          {"color", l.color}};
}

inline nlohmann::json to_json(const FloorPlan& p) {
  nlohmann::json rooms = nlohmann::json::array();
  for (int c = 0; c < p.layout.cell_count(); ++c) {
    if (!p.rooms[c]) continue;
    nlohmann::json r = to_json(*p.rooms[c]);
    r["x"] = p.layout.x_of(c);
    r["y"] = p.layout.y_of(c);
    rooms.push_back(r);
  }
  return {{"floor", p.floor_number},
          {"tower_seed", p.tower_seed},
          {"theme", std::string(to_string(p.theme))},
          {"lighting", to_json(p.lighting)},
          {"mission", to_json(p.mission)},
          {"layout", to_json(p.layout)},
          {"rooms", rooms}};
}

inline FloorPlan floor_plan_from_json(const nlohmann::json& j) {
  try {
    FloorPlan p;
    p.floor_number = j.at("floor").get<int>();
    p.tower_seed = j.at("tower_seed").get<std::uint64_t>();
    auto theme = theme_from_string(j.at("theme").get<std::string>());
    if (!theme) throw Error(ErrorCode::ParseError, "unknown theme");
    p.theme = *theme;
    const auto& l = j.at("lighting");
    p.lighting = {l.at("azimuth_deg").get<int>(), l.at("elevation_deg").get<int>(),
                  l.at("intensity_milli").get<int>(),
                  l.at("color").get<std::array<int, 3>>()};
    p.mission = mission_graph_from_json(j.at("mission"));
    p.layout = layout_from_json(j.at("layout"));
    p.rooms.resize(p.layout.cell_count());
    for (const auto& r : j.at("rooms"))
      p.rooms[p.layout.index(r.at("x").get<int>(), r.at("y").get<int>())] =
          room_from_json(r);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("floor plan: ") + e.what());
  }
}

// For each occupied cell, the side of the door leading back toward Start.
inline std::vector<std::optional<Side>> entry_sides(const LayoutGrid& grid) {
  std::vector<std::optional<Side>> entry(grid.cell_count());
  std::vector<bool> seen(grid.cell_count(), false);
  const int start = grid.start_cell();
  if (start < 0) return entry;
  std::deque<int> queue{start};
  seen[start] = true;
  while (!queue.empty()) {
    int c = queue.front();
    queue.pop_front();
    for (Side s : kSides) {
      int n = grid.neighbor(c, s);
      if (n < 0 || seen[n] || !grid.door(c, n)) continue;
      seen[n] = true;
      entry[n] = opposite(s);
      queue.push_back(n);
    }
  }
  return entry;
}

// Problems with a plan; empty when it satisfies the floor invariants.
inline std::vector<std::string> check_floor_plan(const FloorPlan& plan) {
  std::vector<std::string> problems;
  for (auto& p : validate_layout(plan.layout, plan.mission)) problems.push_back(p);
  int spawns = 0, stairs = 0;
  for (int c = 0; c < plan.layout.cell_count(); ++c) {
    if (plan.layout.occupied(c) != plan.rooms[c].has_value()) {
      problems.push_back("room/cell mismatch at cell " + std::to_string(c));
      continue;
    }
    if (!plan.rooms[c]) continue;
    const auto& room = *plan.rooms[c];
    spawns += room.count(TileType::Spawn);
    stairs += room.count(TileType::Stairs);
    for (Side s : kSides) {
      const int n = plan.layout.neighbor(c, s);
      const bool want = n >= 0 && plan.layout.door(c, n).has_value();
      if (room.has_door(s) != want)
        problems.push_back("door mismatch at cell " + std::to_string(c));
    }
    for (auto& p : check_room(room))
      problems.push_back("cell " + std::to_string(c) + ": " + p);
  }
  if (spawns != 1) problems.push_back("floor needs exactly one Spawn");
  if (stairs != 1) problems.push_back("floor needs exactly one Stairs");
  if (!solve_floor(plan.layout)) problems.push_back("floor is unsolvable");
  return problems;
}

inline RoomInstance instantiate_for_cell(const TemplateLibrary& library,
                                         RoomKind kind,
                                         const RoomRequirements& required,
                                         Rng& rng) {
  const auto sizes = library.sizes_for(kind);
  if (sizes.empty())
    throw Error(ErrorCode::MissingTemplate, std::string(to_string(kind)));
  const int size = sizes[rng.below(sizes.size())];
  auto first = library.candidates(kind, size);
  const RoomTemplate* chosen = first[rng.below(first.size())];
  try {
    return instantiate_room(*chosen, kind, required, library, rng);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InstantiationFailed) throw;
  }
  // A template that cannot host this door arrangement: fall back to the
  // other templates of the kind in library order.
  for (const auto& t : library.templates()) {
    if (&t == chosen || !t.applies_to(kind)) continue;
    try {
      return instantiate_room(t, kind, required, library, rng);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InstantiationFailed) throw;
    }
  }
  throw Error(ErrorCode::GenerationFailed,
              "no template can instantiate a " + std::string(to_string(kind)) +
                  " room with these doors");
}

inline FloorPlan assemble_floor(int floor_number, std::uint64_t tower_seed,
                                std::span<const VisualTheme> theme_pool,
                                const GeneratorContent& content) {
  if (theme_pool.empty())
    throw Error(ErrorCode::BadConfig, "theme pool is empty");
  std::vector<VisualTheme> pool(theme_pool.begin(), theme_pool.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  FloorPlan plan;
  plan.floor_number = floor_number;
  plan.tower_seed = tower_seed;
  Rng look = floor_stream(tower_seed, floor_number, "appearance");
  plan.theme = pool[look.below(pool.size())];
  plan.lighting = sample_lighting(look);

  plan.mission = generate_mission_graph(floor_number, tower_seed,
                                        content.recipes, content.rules);
  Rng layout_rng = floor_stream(tower_seed, floor_number, "layout");
  plan.layout = graph_to_layout(plan.mission, layout_rng);

  const auto entry = entry_sides(plan.layout);
  plan.rooms.resize(plan.layout.cell_count());
  for (int c = 0; c < plan.layout.cell_count(); ++c) {
    const auto& slot = plan.layout.slot(c);
    if (!slot) continue;
    RoomRequirements req;
    for (Side s : plan.layout.door_sides(c)) req.doors[static_cast<int>(s)] = true;
    req.entry = entry[c];
    Rng rng = floor_stream(tower_seed, floor_number, "room", c);
    plan.rooms[c] = instantiate_for_cell(content.templates, slot->kind, req, rng);
  }
  return plan;
}

inline FloorPlan assemble_floor(int floor_number, std::uint64_t tower_seed,
                                std::span<const VisualTheme> theme_pool) {
  return assemble_floor(floor_number, tower_seed, theme_pool, *default_content());
}

}  // namespace towerforge
