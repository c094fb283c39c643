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

// Room templates and their instantiation.
//
// A template is a 3x3, 4x4 or 5x5 grid of characters. Upper-case and
// punctuation characters are concrete tiles; a lower-case character names a
// category, a weighted table from which the tile is drawn at instantiation.
// An instantiated room is the template grid surrounded by a one-tile Wall
// border, with doors carved into the border at side midpoints.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "towerforge/error.hpp"
#include "towerforge/layout.hpp"
#include "towerforge/rng.hpp"

namespace towerforge {

enum class TileType : std::uint8_t {
  Floor,
  Wall,
  Pit,
  Spawn,
  Stairs,
  KeyItem,
  DoorAnchor,
  Block,
  BlockGoal,
  TimeOrb,
  EnemySpawn,
  PlatformTrack,
};

inline constexpr int kTileTypeCount = 12;

inline constexpr std::array<char, kTileTypeCount> kTileChars = {
    '.', '#', 'P', 'S', 'X', 'K', 'D', 'B', 'G', 'O', 'E', 'T'};

inline char to_char(TileType t) { return kTileChars[static_cast<int>(t)]; }

inline std::optional<TileType> tile_from_char(char c) {
  for (int i = 0; i < kTileTypeCount; ++i)
    if (kTileChars[i] == c) return static_cast<TileType>(i);
  return std::nullopt;
}

inline std::string_view to_string(TileType t) {
  switch (t) {
    case TileType::Floor: return "Floor";
    case TileType::Wall: return "Wall";
    case TileType::Pit: return "Pit";
    case TileType::Spawn: return "Spawn";
    case TileType::Stairs: return "Stairs";
    case TileType::KeyItem: return "KeyItem";
    case TileType::DoorAnchor: return "DoorAnchor";
    case TileType::Block: return "Block";
    case TileType::BlockGoal: return "BlockGoal";
    case TileType::TimeOrb: return "TimeOrb";
    case TileType::EnemySpawn: return "EnemySpawn";
    case TileType::PlatformTrack: return "PlatformTrack";
  }
  return "?";
}

inline std::optional<TileType> tile_from_string(std::string_view s) {
  for (int i = 0; i < kTileTypeCount; ++i)
    if (to_string(static_cast<TileType>(i)) == s)
      return static_cast<TileType>(i);
  return std::nullopt;
}

struct Category {
  std::vector<TileType> tiles;
  std::vector<double> weights;
};

struct CellSpec {
  bool is_category = false;
  TileType tile = TileType::Floor;
  char category = 0;
};

struct RoomTemplate {
  std::string id;
  int size = 3;
  std::vector<RoomKind> kinds;
  std::vector<CellSpec> cells;  // row-major, size * size

  bool applies_to(RoomKind k) const {
    return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
  }
};

class TemplateLibrary {
 public:
  TemplateLibrary() = default;
  TemplateLibrary(std::map<char, Category> categories,
                  std::vector<RoomTemplate> templates)
      : categories_(std::move(categories)), templates_(std::move(templates)) {}

  const std::map<char, Category>& categories() const { return categories_; }
  const std::vector<RoomTemplate>& templates() const { return templates_; }

  std::vector<const RoomTemplate*> candidates(RoomKind kind, int size) const {
    std::vector<const RoomTemplate*> out;
    for (const auto& t : templates_)
      if (t.size == size && t.applies_to(kind)) out.push_back(&t);
    return out;
  }
  std::vector<int> sizes_for(RoomKind kind) const {
    std::set<int> sizes;
    for (const auto& t : templates_)
      if (t.applies_to(kind)) sizes.insert(t.size);
    return {sizes.begin(), sizes.end()};
  }

 private:
  std::map<char, Category> categories_;
  std::vector<RoomTemplate> templates_;
};

inline bool only_in(const RoomTemplate& t, RoomKind kind) {
  return t.kinds.size() == 1 && t.kinds[0] == kind;
}

// Parses and checks a template library. Diagnostics name the offending field.
inline TemplateLibrary load_templates(const nlohmann::json& j) {
  auto fail = [](const std::string& where, const std::string& why) -> void {
    throw Error(ErrorCode::ParseError, where + ": " + why);
  };
  std::map<char, Category> categories;
  std::vector<RoomTemplate> templates;
  try {
    const nlohmann::json cats = j.value("categories", nlohmann::json::object());
    for (const auto& [name, table] : cats.items()) {
      const std::string where = "categories." + name;
      if (name.size() != 1 || name[0] < 'a' || name[0] > 'z')
        fail(where, "category names are single lower-case letters");
      Category c;
      for (const auto& [tile_name, weight] : table.items()) {
        auto tile = tile_from_string(tile_name);
        if (!tile) fail(where + "." + tile_name, "unknown tile type");
        if (*tile == TileType::DoorAnchor || *tile == TileType::Spawn ||
            *tile == TileType::Stairs || *tile == TileType::Block ||
            *tile == TileType::BlockGoal)
          fail(where + "." + tile_name, "tile may not be drawn from a category");
        const double w = weight.get<double>();
        if (!(w > 0)) fail(where + "." + tile_name, "weights must be positive");
        c.tiles.push_back(*tile);
        c.weights.push_back(w);
      }
      if (c.tiles.empty()) fail(where, "empty category");
      categories.emplace(name[0], std::move(c));
    }

    std::set<std::string> ids;
    const auto& list = j.at("templates");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& tj = list[i];
      const std::string where = "templates[" + std::to_string(i) + "]";
      RoomTemplate t;
      t.id = tj.at("id").get<std::string>();
      if (!ids.insert(t.id).second) fail(where + ".id", "duplicate template id " + t.id);
      const auto& rows = tj.at("rows");
      t.size = static_cast<int>(rows.size());
      if (t.size < 3 || t.size > 5)
        fail(where + ".rows", "grid must be 3x3, 4x4 or 5x5, got " +
                                  std::to_string(t.size) + " rows");
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = rows[r].get<std::string>();
        const std::string rw = where + ".rows[" + std::to_string(r) + "]";
        if (static_cast<int>(row.size()) != t.size)
          fail(rw, "row length " + std::to_string(row.size()) + " != " +
                       std::to_string(t.size));
        for (char c : row) {
          CellSpec spec;
          if (c >= 'a' && c <= 'z') {
            if (!categories.contains(c))
              fail(rw, std::string("unknown category '") + c + "'");
            spec.is_category = true;
            spec.category = c;
          } else {
            auto tile = tile_from_char(c);
            if (!tile || *tile == TileType::DoorAnchor)
              fail(rw, std::string("unknown tile '") + c + "'");
            spec.tile = *tile;
          }
          t.cells.push_back(spec);
        }
      }
      for (const auto& k : tj.at("kinds")) {
        auto kind = node_type_from_string(k.get<std::string>());
        if (!kind) fail(where + ".kinds", "unknown room kind " + k.dump());
        t.kinds.push_back(*kind);
      }
      if (t.kinds.empty()) fail(where + ".kinds", "no room kinds");
      auto has = [&](TileType tile) {
        return std::any_of(t.cells.begin(), t.cells.end(), [&](const CellSpec& s) {
          return !s.is_category && s.tile == tile;
        });
      };
      if (has(TileType::Spawn) && !only_in(t, RoomKind::Start))
        fail(where, "Spawn tiles only belong in Start rooms");
      if (has(TileType::Stairs) && !only_in(t, RoomKind::Exit))
        fail(where, "Stairs tiles only belong in Exit rooms");
      if ((has(TileType::Block) || has(TileType::BlockGoal)) &&
          !only_in(t, RoomKind::Puzzle))
        fail(where, "Block/BlockGoal tiles only belong in Puzzle rooms");
      templates.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }

  TemplateLibrary lib(std::move(categories), std::move(templates));
  for (RoomKind kind : kAllNodeTypes)
    for (int size = 3; size <= 5; ++size)
      if (lib.candidates(kind, size).empty())
        throw Error(ErrorCode::MissingTemplate,
                    std::string(to_string(kind)) + " " + std::to_string(size) +
                        "x" + std::to_string(size));
  return lib;
}

inline TemplateLibrary load_templates(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return load_templates(j);
}

// Canonical form: categories and templates in their stored order.
inline nlohmann::json to_json(const TemplateLibrary& lib) {
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [name, c] : lib.categories()) {
    nlohmann::json table = nlohmann::json::object();
    for (std::size_t i = 0; i < c.tiles.size(); ++i)
      table[std::string(to_string(c.tiles[i]))] = c.weights[i];
    cats[std::string(1, name)] = table;
  }
  nlohmann::json temps = nlohmann::json::array();
  for (const auto& t : lib.templates()) {
    nlohmann::json rows = nlohmann::json::array();
    for (int y = 0; y < t.size; ++y) {
      std::string row;
      for (int x = 0; x < t.size; ++x) {
        const auto& c = t.cells[y * t.size + x];
        row += c.is_category ? c.category : to_char(c.tile);
      }
      rows.push_back(row);
    }
    nlohmann::json kinds = nlohmann::json::array();
    for (auto k : t.kinds) kinds.push_back(std::string(to_string(k)));
    temps.push_back({{"id", t.id}, {"kinds", kinds}, {"rows", rows}});
  }
  return {{"categories", cats}, {"templates", temps}};
}

// ---------------------------------------------------------------------------
// Room instances.

struct Pos {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pos&, const Pos&) = default;
  friend auto operator<=>(const Pos&, const Pos&) = default;
  Pos step(Side s, int n = 1) const { return {x + dx(s) * n, y + dy(s) * n}; }
};

class RoomInstance {
 public:
  RoomInstance() = default;
  RoomInstance(int size, RoomKind kind)
      : size_(size), kind_(kind),
        tiles_((size + 2) * (size + 2), TileType::Wall) {}

  int size() const { return size_; }
  // Side length including the wall border.
  int extent() const { return size_ + 2; }
  RoomKind kind() const { return kind_; }

  bool in_bounds(Pos p) const {
    return p.x >= 0 && p.y >= 0 && p.x < extent() && p.y < extent();
  }
  bool interior(Pos p) const {
    return p.x >= 1 && p.y >= 1 && p.x <= size_ && p.y <= size_;
  }
  TileType at(Pos p) const { return tiles_.at(p.y * extent() + p.x); }
  void set(Pos p, TileType t) { tiles_.at(p.y * extent() + p.x) = t; }
  const std::vector<TileType>& tiles() const { return tiles_; }

  // Door positions on the border; even sizes round toward the lower index.
  int midpoint() const { return 1 + (size_ - 1) / 2; }
  Pos door_tile(Side s) const {
    switch (s) {
      case Side::North: return {midpoint(), 0};
      case Side::South: return {midpoint(), size_ + 1};
      case Side::West: return {0, midpoint()};
      case Side::East: return {size_ + 1, midpoint()};
    }
    return {};
  }
  Pos door_inner(Side s) const { return door_tile(s).step(opposite(s)); }
  bool has_door(Side s) const { return doors_[static_cast<int>(s)]; }
  std::optional<Side> door_at(Pos p) const {
    for (Side s : kSides)
      if (has_door(s) && door_tile(s) == p) return s;
    return std::nullopt;
  }
  std::optional<Side> entry() const { return entry_; }
  const std::string& template_id() const { return template_id_; }

  std::vector<Pos> find_all(TileType t) const {
    std::vector<Pos> out;
    for (int y = 0; y < extent(); ++y)
      for (int x = 0; x < extent(); ++x)
        if (at({x, y}) == t) out.push_back({x, y});
    return out;
  }
  int count(TileType t) const { return static_cast<int>(find_all(t).size()); }

  void carve_door(Side s) {
    doors_[static_cast<int>(s)] = true;
    set(door_tile(s), TileType::DoorAnchor);
  }
  void set_entry(std::optional<Side> s) { entry_ = s; }
  void set_template_id(std::string id) { template_id_ = std::move(id); }

  friend bool operator==(const RoomInstance&, const RoomInstance&) = default;

 private:
  int size_ = 0;
  RoomKind kind_ = RoomKind::Normal;
  std::vector<TileType> tiles_;
  std::array<bool, 4> doors_{};
  std::optional<Side> entry_;
  std::string template_id_;
};

inline nlohmann::json to_json(const RoomInstance& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (int y = 0; y < r.extent(); ++y) {
    std::string row;
    for (int x = 0; x < r.extent(); ++x) row += to_char(r.at({x, y}));
    rows.push_back(row);
  }
  nlohmann::json doors = nlohmann::json::array();
  for (Side s : kSides)
    if (r.has_door(s)) doors.push_back(std::string(to_string(s)));
  return {{"size", r.size()},
          {"kind", std::string(to_string(r.kind()))},
          {"template", r.template_id()},
          {"doors", doors},
          {"entry", r.entry() ? nlohmann::json(std::string(to_string(*r.entry())))
                              : nlohmann::json()},
          {"tiles", rows}};
}

inline std::optional<Side> side_from_string(std::string_view s) {
  for (Side side : kSides)
    if (to_string(side) == s) return side;
  return std::nullopt;
}

inline RoomInstance room_from_json(const nlohmann::json& j) {
  try {
    auto kind = node_type_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::ParseError, "bad room kind");
    RoomInstance r(j.at("size").get<int>(), *kind);
    const auto& rows = j.at("tiles");
    for (int y = 0; y < r.extent(); ++y) {
      const auto row = rows.at(y).get<std::string>();
      for (int x = 0; x < r.extent(); ++x) {
        auto t = tile_from_char(row.at(x));
        if (!t) throw Error(ErrorCode::ParseError, "bad tile");
        r.set({x, y}, *t);
      }
    }
    for (const auto& d : j.at("doors")) {
      auto s = side_from_string(d.get<std::string>());
      if (!s) throw Error(ErrorCode::ParseError, "bad door side");
      r.carve_door(*s);
    }
    if (!j.at("entry").is_null())
      r.set_entry(side_from_string(j.at("entry").get<std::string>()));
    r.set_template_id(j.value("template", std::string()));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("room: ") + e.what());
  }
}

// Tiles an agent can stand on in the static geometry.
inline bool walkable(TileType t) {
  return t != TileType::Wall && t != TileType::Pit &&
         t != TileType::PlatformTrack;
}

// Gaps the agent can cross only by jumping (or riding a platform).
inline bool gap(TileType t) {
  return t == TileType::Pit || t == TileType::PlatformTrack;
}

// Tiles a pushed block may slide onto.
inline bool block_can_enter(TileType t) {
  return t == TileType::Floor || t == TileType::BlockGoal ||
         t == TileType::EnemySpawn;
}

// Static reachability from a tile: 4-connected over non-Wall, non-Pit tiles
// with one-tile jumps over Pit cells. Platform tracks count as traversable.
inline std::set<Pos> reachable_tiles(const RoomInstance& room, Pos from) {
  auto passable = [&](Pos p) {
    return room.in_bounds(p) && room.at(p) != TileType::Wall &&
           room.at(p) != TileType::Pit &&
           (room.interior(p) || room.door_at(p).has_value());
  };
  std::set<Pos> seen{from};
  std::deque<Pos> queue{from};
  while (!queue.empty()) {
    Pos p = queue.front();
    queue.pop_front();
    for (Side s : kSides) {
      Pos n = p.step(s);
      if (passable(n)) {
        if (seen.insert(n).second) queue.push_back(n);
        continue;
      }
      if (room.in_bounds(n) && room.at(n) == TileType::Pit) {
        Pos land = p.step(s, 2);
        if (passable(land) && seen.insert(land).second) queue.push_back(land);
      }
    }
  }
  return seen;
}

// ---------------------------------------------------------------------------
// Push puzzles.

// Shortest sequence of single-tile agent moves that brings the block onto
// the goal. The agent walks on walkable tiles (door tiles included); moving
// into the block pushes it one tile if the tile beyond accepts a block; a
// block pushed into a Pit is destroyed, which is a dead end. Exhaustive
// breadth-first search over (agent tile, block tile).
inline std::optional<std::vector<Side>> find_push_plan(const RoomInstance& room,
                                                       Pos agent, Pos block,
                                                       Pos goal) {
  auto agent_ok = [&](Pos p) {
    return room.in_bounds(p) && walkable(room.at(p)) &&
           (room.interior(p) || room.door_at(p).has_value());
  };
  struct State {
    Pos agent, block;
    auto operator<=>(const State&) const = default;
  };
  std::map<State, std::pair<State, Side>> prev;
  State first{agent, block};
  prev.emplace(first, std::pair{first, Side::North});
  std::deque<State> queue{first};
  while (!queue.empty()) {
    State s = queue.front();
    queue.pop_front();
    if (s.block == goal) {
      std::vector<Side> moves;
      for (State c = s; !(c == first);) {
        const auto& [p, side] = prev.at(c);
        moves.push_back(side);
        c = p;
      }
      std::reverse(moves.begin(), moves.end());
      return moves;
    }
    for (Side d : kSides) {
      State t = s;
      Pos n = s.agent.step(d);
      if (n == s.block) {
        Pos b = n.step(d);
        if (!room.interior(b) || !block_can_enter(room.at(b))) continue;
        t = {n, b};
      } else {
        if (!agent_ok(n)) continue;
        t = {n, s.block};
      }
      if (prev.contains(t)) continue;
      prev.emplace(t, std::pair{s, d});
      queue.push_back(t);
    }
  }
  return std::nullopt;
}

// Where the agent stands when it starts on a puzzle: the entry door, else the
// first door, else the first free interior tile.
inline Pos puzzle_start(const RoomInstance& room) {
  if (room.entry() && room.has_door(*room.entry()))
    return room.door_tile(*room.entry());
  for (Side s : kSides)
    if (room.has_door(s)) return room.door_tile(s);
  for (int y = 1; y <= room.size(); ++y)
    for (int x = 1; x <= room.size(); ++x)
      if (walkable(room.at({x, y})) && room.at({x, y}) != TileType::Block)
        return {x, y};
  return {1, 1};
}

inline std::optional<std::vector<Side>> puzzle_witness(const RoomInstance& room) {
  if (room.kind() != RoomKind::Puzzle || room.count(TileType::Block) != 1 ||
      room.count(TileType::BlockGoal) != 1)
    throw Error(ErrorCode::NotAPuzzleRoom,
                "expected a Puzzle room with one Block and one BlockGoal");
  RoomInstance plain = room;
  const Pos block = room.find_all(TileType::Block)[0];
  plain.set(block, TileType::Floor);
  return find_push_plan(plain, puzzle_start(room), block,
                        room.find_all(TileType::BlockGoal)[0]);
}

inline bool check_puzzle_solvable(const RoomInstance& room) {
  return puzzle_witness(room).has_value();
}

// ---------------------------------------------------------------------------
// Instantiation.

inline constexpr int kRoomResamples = 32;

struct RoomRequirements {
  std::array<bool, 4> doors{};
  std::optional<Side> entry;
};

// Problems with an instance; empty when it may be emitted.
inline std::vector<std::string> check_room(const RoomInstance& room) {
  std::vector<std::string> problems;
  const RoomKind kind = room.kind();
  auto expect = [&](TileType t, int n) {
    if (room.count(t) != n)
      problems.push_back(std::string(to_string(kind)) + " room needs " +
                         std::to_string(n) + " " + std::string(to_string(t)) +
                         ", has " + std::to_string(room.count(t)));
  };
  expect(TileType::Spawn, kind == RoomKind::Start ? 1 : 0);
  expect(TileType::Stairs, kind == RoomKind::Exit ? 1 : 0);
  expect(TileType::KeyItem, kind == RoomKind::Key ? 1 : 0);
  expect(TileType::Block, kind == RoomKind::Puzzle ? 1 : 0);
  expect(TileType::BlockGoal, kind == RoomKind::Puzzle ? 1 : 0);
  if (!problems.empty()) return problems;

  std::vector<Side> sides;
  for (Side s : kSides)
    if (room.has_door(s)) sides.push_back(s);
  for (Side s : sides) {
    const TileType inner = room.at(room.door_inner(s));
    if (!walkable(inner) || inner == TileType::Block ||
        inner == TileType::EnemySpawn)
      problems.push_back("door " + std::string(to_string(s)) + " is obstructed");
  }
  if (!problems.empty() || sides.empty()) return problems;

  std::vector<Pos> targets;
  for (int y = 1; y <= room.size(); ++y)
    for (int x = 1; x <= room.size(); ++x) {
      TileType t = room.at({x, y});
      if (t != TileType::Wall && t != TileType::Pit) targets.push_back({x, y});
    }
  for (Side s : sides) {
    auto seen = reachable_tiles(room, room.door_tile(s));
    for (Pos p : targets)
      if (!seen.contains(p)) {
        problems.push_back("tile (" + std::to_string(p.x) + "," +
                           std::to_string(p.y) + ") unreachable from door " +
                           std::string(to_string(s)));
        return problems;
      }
    for (Side o : sides)
      if (!seen.contains(room.door_tile(o)))
        problems.push_back("door " + std::string(to_string(o)) +
                           " unreachable");
  }

  if (kind == RoomKind::Puzzle) {
    if (!check_puzzle_solvable(room)) {
      problems.push_back("puzzle has no push plan");
    } else {
      // Once the block rests on the goal it never moves again; every door
      // must still be reachable around it.
      RoomInstance solved = room;
      solved.set(room.find_all(TileType::Block)[0], TileType::Floor);
      solved.set(room.find_all(TileType::BlockGoal)[0], TileType::Wall);
      auto seen = reachable_tiles(solved, puzzle_start(room));
      for (Side s : sides)
        if (!seen.contains(solved.door_tile(s)))
          problems.push_back("solved puzzle blocks door " +
                             std::string(to_string(s)));
    }
  }
  return problems;
}

inline RoomInstance instantiate_room(const RoomTemplate& tmpl, RoomKind kind,
                                     const RoomRequirements& required,
                                     const TemplateLibrary& library, Rng& stream) {
  if (!tmpl.applies_to(kind))
    throw Error(ErrorCode::InstantiationFailed,
                "template " + tmpl.id + " does not apply to " +
                    std::string(to_string(kind)) + " rooms");
  std::string last_problem;
  for (int attempt = 0; attempt < kRoomResamples; ++attempt) {
    RoomInstance room(tmpl.size, kind);
    room.set_template_id(tmpl.id);
    for (int y = 0; y < tmpl.size; ++y)
      for (int x = 0; x < tmpl.size; ++x) {
        const CellSpec& c = tmpl.cells[y * tmpl.size + x];
        TileType t = c.tile;
        if (c.is_category) {
          const Category& cat = library.categories().at(c.category);
          t = cat.tiles[stream.weighted(cat.weights)];
        }
        room.set({x + 1, y + 1}, t);
      }
    for (Side s : kSides)
      if (required.doors[static_cast<int>(s)]) room.carve_door(s);
    room.set_entry(required.entry);
    auto problems = check_room(room);
    if (problems.empty()) return room;
    last_problem = problems.front();
  }
  throw Error(ErrorCode::InstantiationFailed,
              "template " + tmpl.id + " failed " +
                  std::to_string(kRoomResamples) + " resamples: " + last_problem);
}

}  // namespace towerforge
