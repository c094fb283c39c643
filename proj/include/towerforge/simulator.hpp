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
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "towerforge/default_content.hpp"
#include "towerforge/error.hpp"
#include "towerforge/floor.hpp"
#include "towerforge/layout.hpp"
#include "towerforge/rng.hpp"
#include "towerforge/room.hpp"

namespace towerforge {

// ---------------------------------------------------------------------------
// Actions.

enum class MoveFB : std::uint8_t { NoOp, Forward, Backward };
enum class MoveLR : std::uint8_t { NoOp, Left, Right };
enum class Camera : std::uint8_t { NoOp, Clockwise, CounterClockwise };
enum class JumpAct : std::uint8_t { NoOp, Jump };

struct Action {
  MoveFB fb = MoveFB::NoOp;
  MoveLR lr = MoveLR::NoOp;
  Camera camera = Camera::NoOp;
  JumpAct jump = JumpAct::NoOp;
  friend bool operator==(const Action&, const Action&) = default;
};

inline constexpr int kActionCount = 3 * 3 * 3 * 2;

inline constexpr int flatten_action(const Action& a) {
  return ((static_cast<int>(a.fb) * 3 + static_cast<int>(a.lr)) * 3 +
          static_cast<int>(a.camera)) * 2 + static_cast<int>(a.jump);
}

inline Action unflatten_action(int code) {
  if (code < 0 || code >= kActionCount)
    throw Error(ErrorCode::OutOfRange,
                "action code " + std::to_string(code) + " not in 0..53");
  Action a;
  a.jump = static_cast<JumpAct>(code % 2);
  code /= 2;
  a.camera = static_cast<Camera>(code % 3);
  code /= 3;
  a.lr = static_cast<MoveLR>(code % 3);
  a.fb = static_cast<MoveFB>(code / 3);
  return a;
}

inline nlohmann::json to_json(const Action& a) {
  static constexpr const char* fb[] = {"NoOp", "Forward", "Backward"};
  static constexpr const char* lr[] = {"NoOp", "Left", "Right"};
  static constexpr const char* cam[] = {"NoOp", "Clockwise", "CounterClockwise"};
  static constexpr const char* jump[] = {"NoOp", "Jump"};
  return {{"move_fb", fb[static_cast<int>(a.fb)]},
          {"move_lr", lr[static_cast<int>(a.lr)]},
          {"camera", cam[static_cast<int>(a.camera)]},
          {"jump", jump[static_cast<int>(a.jump)]}};
}

inline Action action_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) {
    const int code = j.get<int>();
    if (code < 0 || code >= kActionCount)
      throw Error(ErrorCode::InvalidAction,
                  "action code " + std::to_string(code) + " not in 0..53");
    return unflatten_action(code);
  }
  auto pick = [&](const char* field, std::initializer_list<const char*> names) {
    const std::string v = j.value(field, std::string("NoOp"));
    int i = 0;
    for (const char* n : names) {
      if (v == n) return i;
      ++i;
    }
    throw Error(ErrorCode::InvalidAction, std::string(field) + ": " + v);
  };
  if (!j.is_object()) throw Error(ErrorCode::InvalidAction, "action must be an object or code");
  Action a;
  a.fb = static_cast<MoveFB>(pick("move_fb", {"NoOp", "Forward", "Backward"}));
  a.lr = static_cast<MoveLR>(pick("move_lr", {"NoOp", "Left", "Right"}));
  a.camera = static_cast<Camera>(pick("camera", {"NoOp", "Clockwise", "CounterClockwise"}));
  a.jump = static_cast<JumpAct>(pick("jump", {"NoOp", "Jump"}));
  return a;
}

// Absolute direction of the movement part of an action, if any. Forward and
// backward win over strafing when both are given.
inline std::optional<Side> move_direction(const Action& a, int heading) {
  int turn = -1;
  if (a.fb == MoveFB::Forward) turn = 0;
  else if (a.fb == MoveFB::Backward) turn = 2;
  else if (a.lr == MoveLR::Right) turn = 1;
  else if (a.lr == MoveLR::Left) turn = 3;
  if (turn < 0) return std::nullopt;
  return static_cast<Side>((heading + turn) % 4);
}

// Action moving toward absolute `dir` regardless of heading.
inline Action action_toward(Side dir, int heading, bool jump = false) {
  Action a;
  switch ((static_cast<int>(dir) - heading + 4) % 4) {
    case 0: a.fb = MoveFB::Forward; break;
    case 1: a.lr = MoveLR::Right; break;
    case 2: a.fb = MoveFB::Backward; break;
    case 3: a.lr = MoveLR::Left; break;
  }
  if (jump) a.jump = JumpAct::Jump;
  return a;
}

// ---------------------------------------------------------------------------
// Configuration.

enum class RewardMode { Sparse, Dense };
enum class Termination { None, Hazard, Timeout, TopFloor };

inline std::string_view to_string(RewardMode m) {
  return m == RewardMode::Sparse ? "sparse" : "dense";
}
inline std::optional<RewardMode> reward_mode_from_string(std::string_view s) {
  if (s == "sparse" || s == "Sparse") return RewardMode::Sparse;
  if (s == "dense" || s == "Dense") return RewardMode::Dense;
  return std::nullopt;
}
inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::None: return "None";
    case Termination::Hazard: return "Hazard";
    case Termination::Timeout: return "Timeout";
    case Termination::TopFloor: return "TopFloor";
  }
  return "?";
}

inline constexpr int kTicksPerStep = 5;
inline constexpr int kMaxTowerFloors = 100;
inline constexpr int kWindow = 21;

struct EpisodeConfig {
  std::uint64_t tower_seed = 0;
  std::uint64_t dynamics_seed = 0;
  int max_floor = 25;
  RewardMode reward_mode = RewardMode::Sparse;
  std::vector<VisualTheme> theme_pool{kAllThemes.begin(), kAllThemes.end()};
  int starting_time = 1200;  // ticks
  int orb_bonus = 100;
  int floor_bonus = 200;
  int raster_side = 84;

  friend bool operator==(const EpisodeConfig&, const EpisodeConfig&) = default;
};

inline void validate_config(const EpisodeConfig& c) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::BadConfig, m); };
  if (c.max_floor < 1 || c.max_floor > kMaxTowerFloors)
    bad("max_floor must be in 1..100");
  if (c.theme_pool.empty()) bad("theme_pool is empty");
  if (c.starting_time <= 0) bad("starting_time must be positive");
  if (c.orb_bonus < 0 || c.floor_bonus < 0) bad("bonuses must be non-negative");
  if (c.raster_side != 84 && c.raster_side != 168) bad("raster_side must be 84 or 168");
}

inline nlohmann::json to_json(const EpisodeConfig& c) {
  nlohmann::json themes = nlohmann::json::array();
  for (auto t : c.theme_pool) themes.push_back(std::string(to_string(t)));
  return {{"tower_seed", c.tower_seed},       {"dynamics_seed", c.dynamics_seed},
          {"max_floor", c.max_floor},         {"reward_mode", std::string(to_string(c.reward_mode))},
          {"theme_pool", themes},             {"starting_time", c.starting_time},
          {"orb_bonus", c.orb_bonus},         {"floor_bonus", c.floor_bonus},
          {"raster_side", c.raster_side}};
}

// Missing fields keep their defaults.
inline EpisodeConfig episode_config_from_json(const nlohmann::json& j) {
  EpisodeConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be an object");
    c.tower_seed = j.value("tower_seed", c.tower_seed);
    c.dynamics_seed = j.value("dynamics_seed", c.dynamics_seed);
    c.max_floor = j.value("max_floor", c.max_floor);
    if (j.contains("reward_mode")) {
      auto m = reward_mode_from_string(j["reward_mode"].get<std::string>());
      if (!m) throw Error(ErrorCode::BadConfig, "unknown reward_mode");
      c.reward_mode = *m;
    }
    if (j.contains("theme_pool")) {
      c.theme_pool.clear();
      for (const auto& t : j["theme_pool"]) {
        auto th = theme_from_string(t.get<std::string>());
        if (!th) throw Error(ErrorCode::BadConfig, "unknown theme " + t.get<std::string>());
        c.theme_pool.push_back(*th);
      }
    }
    c.starting_time = j.value("starting_time", c.starting_time);
    c.orb_bonus = j.value("orb_bonus", c.orb_bonus);
    c.floor_bonus = j.value("floor_bonus", c.floor_bonus);
    c.raster_side = j.value("raster_side", c.raster_side);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
  validate_config(c);
  return c;
}

// ---------------------------------------------------------------------------
// Room-local dynamics.

inline constexpr int kMaxExtent = 7;  // template side 5 plus walls
inline constexpr int kMaxEnemies = 8;
inline constexpr int kMaxPlatforms = 6;

struct Enemy {
  Pos pos;
  std::uint8_t dir = 0;
  std::uint8_t phase = 0;
  friend bool operator==(const Enemy&, const Enemy&) = default;
};

// A platform rides back and forth along one straight run of track.
struct Platform {
  Pos origin;
  std::uint8_t axis = 0;  // 0 horizontal, 1 vertical
  std::uint8_t length = 1;
  std::uint8_t index = 0;
  std::int8_t dir = 1;
  std::uint8_t phase = 0;
  Pos pos() const {
    return axis == 0 ? Pos{origin.x + index, origin.y} : Pos{origin.x, origin.y + index};
  }
  friend bool operator==(const Platform&, const Platform&) = default;
};

enum class BlockState : std::uint8_t { None, Free, Placed, Gone };

struct RoomSim {
  int size = 0;
  RoomKind kind = RoomKind::Normal;
  std::array<TileType, kMaxExtent * kMaxExtent> tiles{};
  std::array<bool, kMaxExtent * kMaxExtent> enemy_ok{};
  std::array<bool, 4> door{};
  std::array<bool, 4> locked{};
  std::optional<Side> entry;
  std::array<Enemy, kMaxEnemies> enemies{};
  std::uint8_t enemy_count = 0;
  std::array<Platform, kMaxPlatforms> platforms{};
  std::uint8_t platform_count = 0;
  BlockState block = BlockState::None;
  Pos block_pos, block_origin;
  bool solved = false;
  std::uint32_t tick = 0;
  Rng rng;

  int extent() const { return size + 2; }
  bool in_bounds(Pos p) const {
    return p.x >= 0 && p.y >= 0 && p.x < extent() && p.y < extent();
  }
  bool interior(Pos p) const {
    return p.x >= 1 && p.y >= 1 && p.x <= size && p.y <= size;
  }
  TileType at(Pos p) const { return tiles[p.y * kMaxExtent + p.x]; }
  void set(Pos p, TileType t) { tiles[p.y * kMaxExtent + p.x] = t; }
  int midpoint() const { return 1 + (size - 1) / 2; }
  Pos door_tile(Side s) const {
    switch (s) {
      case Side::North: return {midpoint(), 0};
      case Side::South: return {midpoint(), size + 1};
      case Side::West: return {0, midpoint()};
      case Side::East: return {size + 1, midpoint()};
    }
    return {};
  }
  std::optional<Side> door_at(Pos p) const {
    for (Side s : kSides)
      if (door[static_cast<int>(s)] && door_tile(s) == p) return s;
    return std::nullopt;
  }
  bool gated(Side s) const {
    return kind == RoomKind::Puzzle && !solved && entry && *entry != s;
  }
  bool enemy_at(Pos p) const {
    for (int i = 0; i < enemy_count; ++i)
      if (enemies[i].pos == p) return true;
    return false;
  }
  bool platform_at(Pos p) const {
    for (int i = 0; i < platform_count; ++i)
      if (platforms[i].pos() == p) return true;
    return false;
  }
  bool block_at(Pos p) const {
    return (block == BlockState::Free || block == BlockState::Placed) && block_pos == p;
  }
  bool dynamic() const { return enemy_count > 0 || platform_count > 0; }

  friend bool operator==(const RoomSim&, const RoomSim&) = default;
};

// Builds the live state of one room. The room's dynamics stream is private to
// it, so entity motion never depends on which rooms were visited before.
inline RoomSim make_room_sim(const RoomInstance& r, const std::array<bool, 4>& locked,
                             std::uint64_t dynamics_seed) {
  if (r.extent() > kMaxExtent)
    throw Error(ErrorCode::OutOfRange, "room too large for the simulator");
  RoomSim s;
  s.size = r.size();
  s.kind = r.kind();
  s.entry = r.entry();
  s.rng = Rng(dynamics_seed);
  for (int y = 0; y < r.extent(); ++y)
    for (int x = 0; x < r.extent(); ++x) {
      Pos p{x, y};
      TileType t = r.at(p);
      if (t == TileType::Block) {
        s.block = BlockState::Free;
        s.block_pos = s.block_origin = p;
        t = TileType::Floor;
      }
      s.set(p, t);
      s.enemy_ok[y * kMaxExtent + x] =
          r.interior(p) && (t == TileType::Floor || t == TileType::EnemySpawn);
    }
  for (Side d : kSides) {
    s.door[static_cast<int>(d)] = r.has_door(d);
    s.locked[static_cast<int>(d)] = r.has_door(d) && locked[static_cast<int>(d)];
    // Enemies keep off door thresholds, so every doorway is a safe spot.
    if (r.has_door(d)) {
      const Pos in = r.door_inner(d);
      s.enemy_ok[in.y * kMaxExtent + in.x] = false;
    }
  }
  if (s.block != BlockState::None && s.at(s.block_pos) == TileType::BlockGoal) {
    s.block = BlockState::Placed;
    s.solved = true;
  }
  for (Pos p : r.find_all(TileType::EnemySpawn)) {
    if (s.enemy_count == kMaxEnemies) break;
    Enemy e;
    e.pos = p;
    e.dir = static_cast<std::uint8_t>(s.rng.below(4));
    e.phase = static_cast<std::uint8_t>(s.rng.below(kTicksPerStep));
    s.enemies[s.enemy_count++] = e;
  }
  // Track runs: horizontal runs of two or more first, then vertical runs.
  std::array<bool, kMaxExtent * kMaxExtent> used{};
  auto is_track = [&](int x, int y) {
    return r.interior({x, y}) && r.at({x, y}) == TileType::PlatformTrack &&
           !used[y * kMaxExtent + x];
  };
  auto add_run = [&](Pos origin, int axis, int len) {
    if (s.platform_count == kMaxPlatforms) return;
    Platform pl;
    pl.origin = origin;
    pl.axis = static_cast<std::uint8_t>(axis);
    pl.length = static_cast<std::uint8_t>(len);
    pl.index = static_cast<std::uint8_t>(s.rng.below(len));
    pl.dir = s.rng.chance(0.5) ? 1 : -1;
    pl.phase = static_cast<std::uint8_t>(s.rng.below(kTicksPerStep));
    s.platforms[s.platform_count++] = pl;
    for (int i = 0; i < len; ++i) {
      Pos q = axis == 0 ? Pos{origin.x + i, origin.y} : Pos{origin.x, origin.y + i};
      used[q.y * kMaxExtent + q.x] = true;
    }
  };
  for (int y = 1; y <= r.size(); ++y)
    for (int x = 1; x <= r.size(); ++x) {
      if (!is_track(x, y) || is_track(x - 1, y)) continue;
      int len = 0;
      while (is_track(x + len, y)) ++len;
      if (len >= 2) add_run({x, y}, 0, len);
    }
  for (int x = 1; x <= r.size(); ++x)
    for (int y = 1; y <= r.size(); ++y) {
      if (!is_track(x, y) || is_track(x, y - 1)) continue;
      int len = 0;
      while (is_track(x, y + len)) ++len;
      add_run({x, y}, 1, len);
    }
  return s;
}

struct AgentLocal {
  Pos pos;
  int heading = 0;  // Side index; 0 faces North
  int keys = 0;
  friend bool operator==(const AgentLocal&, const AgentLocal&) = default;
};

struct TickEvents {
  bool key = false;
  bool orb = false;
  bool puzzle = false;
  std::optional<Side> opened;  // locked door opened on this side
  std::optional<Side> exited;  // agent left the room through this door
  bool stairs = false;
  bool hazard = false;
  bool moved = false;
};

namespace detail {

inline bool standable(const RoomSim& room, Pos p) {
  if (!room.interior(p)) return false;
  const TileType t = room.at(p);
  if (t == TileType::Wall || t == TileType::Pit) return false;
  if (t == TileType::PlatformTrack && !room.platform_at(p)) return false;
  return !room.block_at(p);
}

inline void enter_tile(RoomSim& room, AgentLocal& agent, Pos p, TickEvents& ev) {
  agent.pos = p;
  ev.moved = true;
  const TileType t = room.at(p);
  if (t == TileType::Pit || (t == TileType::PlatformTrack && !room.platform_at(p)) ||
      room.enemy_at(p)) {
    ev.hazard = true;
    return;
  }
  if (t == TileType::KeyItem) {
    ++agent.keys;
    room.set(p, TileType::Floor);
    ev.key = true;
  } else if (t == TileType::TimeOrb) {
    room.set(p, TileType::Floor);
    ev.orb = true;
  } else if (t == TileType::Stairs) {
    ev.stairs = true;
  }
}

inline void move_agent(RoomSim& room, AgentLocal& agent, Side dir, bool jump,
                       TickEvents& ev) {
  const Pos a = agent.pos;
  const Pos n = a.step(dir);
  if (!room.in_bounds(n)) {
    if (auto d = room.door_at(a); d && *d == dir) ev.exited = dir;
    return;
  }
  if (jump) {
    const Pos land = a.step(dir, 2);
    if (!room.interior(n) || room.at(n) == TileType::Wall || room.block_at(n)) return;
    if (!room.in_bounds(land) || !room.interior(land)) return;
    const TileType t = room.at(land);
    if (t == TileType::Wall || t == TileType::Pit || room.block_at(land)) return;
    if (t == TileType::PlatformTrack && !room.platform_at(land)) return;
    enter_tile(room, agent, land, ev);
    return;
  }
  if (auto d = room.door_at(n)) {
    const int i = static_cast<int>(*d);
    if (room.gated(*d)) return;
    if (room.locked[i]) {
      if (agent.keys < 1) return;
      --agent.keys;
      room.locked[i] = false;
      ev.opened = *d;
    }
    agent.pos = n;
    ev.moved = true;
    return;
  }
  if (!room.interior(n) || room.at(n) == TileType::Wall) return;
  if (room.block_at(n)) {
    if (room.block == BlockState::Placed) return;
    const Pos b = n.step(dir);
    if (!room.interior(b) || room.enemy_at(b)) return;
    if (room.at(b) == TileType::Pit) {
      room.block = BlockState::Gone;
    } else if (block_can_enter(room.at(b))) {
      room.block_pos = b;
      if (room.at(b) == TileType::BlockGoal) {
        room.block = BlockState::Placed;
        if (!room.solved) {
          room.solved = true;
          ev.puzzle = true;
        }
      }
    } else {
      return;
    }
  }
  enter_tile(room, agent, n, ev);
}

inline void advance_entities(RoomSim& room, AgentLocal& agent) {
  ++room.tick;
  const auto phase = static_cast<std::uint8_t>(room.tick % kTicksPerStep);
  for (int i = 0; i < room.enemy_count; ++i) {
    Enemy& e = room.enemies[i];
    if (e.phase != phase) continue;
    auto ok = [&](Side s) {
      Pos p = e.pos.step(s);
      if (!room.interior(p) || !room.enemy_ok[p.y * kMaxExtent + p.x]) return false;
      if (room.block_at(p)) return false;
      for (int j = 0; j < room.enemy_count; ++j)
        if (j != i && room.enemies[j].pos == p) return false;
      return true;
    };
    const Side cur = static_cast<Side>(e.dir);
    if (!(ok(cur) && room.rng.chance(0.7))) {
      std::array<Side, 4> options{};
      std::size_t n = 0;
      for (Side s : kSides)
        if (ok(s)) options[n++] = s;
      if (n == 0) continue;
      e.dir = static_cast<std::uint8_t>(options[room.rng.below(n)]);
    }
    e.pos = e.pos.step(static_cast<Side>(e.dir));
  }
  for (int i = 0; i < room.platform_count; ++i) {
    Platform& p = room.platforms[i];
    if (p.phase != phase || p.length < 2) continue;
    const bool carrying = agent.pos == p.pos();
    int next = p.index + p.dir;
    if (next < 0 || next >= p.length) {
      p.dir = static_cast<std::int8_t>(-p.dir);
      next = p.index + p.dir;
    }
    p.index = static_cast<std::uint8_t>(next);
    if (carrying) agent.pos = p.pos();
  }
  if (room.block == BlockState::Gone && agent.pos != room.block_origin &&
      !room.enemy_at(room.block_origin)) {
    room.block = BlockState::Free;
    room.block_pos = room.block_origin;
  }
}

}  // namespace detail

// One simulation tick inside a room (tick is 1..5 within the step). Camera
// turns on tick 1 and the move resolves on tick 2. When the agent leaves the
// room or reaches the Stairs the tick ends there.
inline void tick_room(RoomSim& room, AgentLocal& agent, const Action& action,
                      int tick, TickEvents& ev) {
  if (tick == 1) {
    if (action.camera == Camera::Clockwise) agent.heading = (agent.heading + 1) % 4;
    if (action.camera == Camera::CounterClockwise) agent.heading = (agent.heading + 3) % 4;
  }
  if (tick == 2) {
    if (auto dir = move_direction(action, agent.heading))
      detail::move_agent(room, agent, *dir, action.jump == JumpAct::Jump, ev);
    if (ev.exited || ev.stairs || ev.hazard) return;
  }
  detail::advance_entities(room, agent);
  if (room.enemy_at(agent.pos)) ev.hazard = true;
  if (room.interior(agent.pos) && room.at(agent.pos) == TileType::PlatformTrack &&
      !room.platform_at(agent.pos))
    ev.hazard = true;
}

struct RoomForecast {
  RoomSim room;
  AgentLocal agent;
  TickEvents events;  // merged over the step
};

// What one step does if nothing outside the room interferes. Stops at the
// tick where the agent leaves, reaches the Stairs or dies.
inline RoomForecast forecast_step(const RoomSim& room, const AgentLocal& agent,
                                  const Action& action) {
  RoomForecast f{room, agent, {}};
  for (int t = 1; t <= kTicksPerStep; ++t) {
    TickEvents ev;
    tick_room(f.room, f.agent, action, t, ev);
    f.events.key |= ev.key;
    f.events.orb |= ev.orb;
    f.events.puzzle |= ev.puzzle;
    f.events.moved |= ev.moved;
    if (ev.opened) f.events.opened = ev.opened;
    if (ev.exited || ev.stairs || ev.hazard) {
      f.events.exited = ev.exited;
      f.events.stairs = ev.stairs;
      f.events.hazard = ev.hazard;
      break;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Observations.

struct Observation {
  int side = 84;
  std::vector<std::uint8_t> raster;  // row-major palette codes
  int keys_held = 0;
  int time_remaining = 0;
  double time_normalized = 0.0;
  friend bool operator==(const Observation&, const Observation&) = default;
};

inline constexpr std::uint8_t kAgentCode = 255;
// Render classes beyond the tile types.
inline constexpr int kClassEnemy = kTileTypeCount;
inline constexpr int kClassPlatform = kTileTypeCount + 1;
inline constexpr int kClassLockedDoor = kTileTypeCount + 2;
inline constexpr int kClassGatedDoor = kTileTypeCount + 3;
inline constexpr int kRenderClasses = 16;

// Palette: class rotated by theme, scrambled by a fixed permutation, then
// offset by the lighting band. Codes stay in 1..128; 255 is the agent.
inline std::uint8_t palette_code(int render_class, VisualTheme theme, int light_band) {
  const int shifted = (render_class + 3 * static_cast<int>(theme)) % kRenderClasses;
  const int scrambled = (shifted * 7 + 3) % kRenderClasses;
  return static_cast<std::uint8_t>(1 + scrambled * 8 + std::clamp(light_band, 0, 7));
}

inline int render_class(const RoomSim& room, Pos p) {
  if (!room.in_bounds(p)) return static_cast<int>(TileType::Wall);
  if (auto d = room.door_at(p)) {
    if (room.locked[static_cast<int>(*d)]) return kClassLockedDoor;
    if (room.gated(*d)) return kClassGatedDoor;
    return static_cast<int>(TileType::DoorAnchor);
  }
  if (room.enemy_at(p)) return kClassEnemy;
  if (room.block_at(p)) return static_cast<int>(TileType::Block);
  if (room.platform_at(p)) return kClassPlatform;
  return static_cast<int>(room.at(p));
}

// Egocentric window rotated so the heading points up, then upscaled.
inline std::vector<std::uint8_t> render_raster(const RoomSim& room, const AgentLocal& agent,
                                               VisualTheme theme, int light_band,
                                               int side) {
  const int scale = side / kWindow;
  const int half = kWindow / 2;
  const Side fwd = static_cast<Side>(agent.heading);
  const Side right = static_cast<Side>((agent.heading + 1) % 4);
  std::array<std::uint8_t, kWindow * kWindow> cells{};
  for (int r = 0; r < kWindow; ++r)
    for (int c = 0; c < kWindow; ++c) {
      const int u = c - half, v = half - r;
      const Pos p{agent.pos.x + u * dx(right) + v * dx(fwd),
                  agent.pos.y + u * dy(right) + v * dy(fwd)};
      cells[r * kWindow + c] =
          p == agent.pos ? kAgentCode : palette_code(render_class(room, p), theme, light_band);
    }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      out[y * side + x] = cells[(y / scale) * kWindow + x / scale];
  return out;
}

// Top-down text view of a room for terminals. Live entities are drawn over
// the tiles: agent as an arrow, enemy 'm', platform '=', locked door 'L',
// gated door 'g'.
inline std::vector<std::string> room_text(const RoomSim& room, const AgentLocal& agent) {
  static constexpr char arrows[] = {'^', '>', 'v', '<'};
  std::vector<std::string> rows;
  for (int y = 0; y < room.extent(); ++y) {
    std::string row;
    for (int x = 0; x < room.extent(); ++x) {
      const Pos p{x, y};
      char c = to_char(room.at(p));
      if (auto d = room.door_at(p)) {
        if (room.locked[static_cast<int>(*d)]) c = 'L';
        else if (room.gated(*d)) c = 'g';
      }
      if (room.platform_at(p)) c = '=';
      if (room.block_at(p)) c = 'B';
      if (room.enemy_at(p)) c = 'm';
      if (p == agent.pos) c = arrows[agent.heading & 3];
      row += c;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Episodes.

struct EpisodeCounters {
  int floors = 0;
  int keys = 0;
  int doors = 0;
  int puzzles = 0;
  int orbs = 0;
  friend bool operator==(const EpisodeCounters&, const EpisodeCounters&) = default;
};

struct EpisodeState {
  int floor_index = 0;
  int cell = -1;
  AgentLocal agent;
  int time_remaining = 0;
  std::vector<std::optional<RoomSim>> rooms;  // by layout cell
  bool done = false;
  Termination cause = Termination::None;
  EpisodeCounters counters;
  std::int64_t steps = 0;
  std::int64_t ticks = 0;
  friend bool operator==(const EpisodeState&, const EpisodeState&) = default;
};

struct StepInfo {
  int floor_index = 0;
  std::vector<std::string> events;
  Termination cause = Termination::None;
  int ticks = 0;
  friend bool operator==(const StepInfo&, const StepInfo&) = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
  friend bool operator==(const StepResult&, const StepResult&) = default;
};

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 15];
  return s;
}

inline std::uint64_t raster_digest(const std::vector<std::uint8_t>& raster) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(raster.data()), raster.size()));
}

// Trace form of a step; the raster is summarized by its digest.
inline nlohmann::json to_json(const StepResult& r) {
  return {{"reward", r.reward},
          {"done", r.done},
          {"info", {{"floor_index", r.info.floor_index},
                    {"events", r.info.events},
                    {"termination", std::string(to_string(r.info.cause))},
                    {"ticks", r.info.ticks}}},
          {"aux", {{"keys_held", r.observation.keys_held},
                   {"time_remaining", r.observation.time_remaining},
                   {"time_normalized", r.observation.time_normalized}}},
          {"raster_side", r.observation.side},
          {"raster_fnv1a64", hex64(raster_digest(r.observation.raster))}};
}

class Simulator {
 public:
  explicit Simulator(std::shared_ptr<const GeneratorContent> content = default_content())
      : content_(std::move(content)) {}

  Observation reset(const EpisodeConfig& config) { return reset_at_floor(config, 0); }

  // Starts an episode directly on `floor` (benchmarks and debugging).
  Observation reset_at_floor(const EpisodeConfig& config, int floor) {
    validate_config(config);
    if (floor < 0 || floor >= config.max_floor)
      throw Error(ErrorCode::OutOfRange, "floor outside the tower");
    config_ = config;
    state_ = EpisodeState{};
    state_.time_remaining = config.starting_time;
    load_floor(floor);
    started_ = true;
    return observe();
  }

  StepResult step(int code) {
    if (code < 0 || code >= kActionCount)
      throw Error(ErrorCode::InvalidAction,
                  "action code " + std::to_string(code) + " not in 0..53");
    return step(unflatten_action(code));
  }

  StepResult step(const Action& action) {
    if (!started_) throw Error(ErrorCode::EpisodeDone, "reset before stepping");
    if (state_.done) throw Error(ErrorCode::EpisodeDone, "episode is over");
    StepResult result;
    const bool dense = config_.reward_mode == RewardMode::Dense;
    auto note = [&](const char* what, double dense_reward) {
      result.info.events.emplace_back(what);
      if (dense) result.reward += dense_reward;
    };
    for (int t = 1; t <= kTicksPerStep && !state_.done; ++t) {
      --state_.time_remaining;
      ++state_.ticks;
      ++result.info.ticks;
      RoomSim& room = *state_.rooms[state_.cell];
      TickEvents ev;
      tick_room(room, state_.agent, action, t, ev);
      if (ev.key) {
        ++state_.counters.keys;
        note("key", 0.1);
      }
      if (ev.orb) {
        ++state_.counters.orbs;
        state_.time_remaining += config_.orb_bonus;
        note("orb", 0.0);
      }
      if (ev.opened) {
        ++state_.counters.doors;
        note("door", 0.1);
        const int n = plan_->layout.neighbor(state_.cell, *ev.opened);
        if (n >= 0 && state_.rooms[n])
          state_.rooms[n]->locked[static_cast<int>(opposite(*ev.opened))] = false;
      }
      if (ev.puzzle) {
        ++state_.counters.puzzles;
        note("puzzle", 0.1);
      }
      if (ev.hazard) {
        finish(Termination::Hazard);
        break;
      }
      if (ev.exited) {
        const int n = plan_->layout.neighbor(state_.cell, *ev.exited);
        state_.cell = n;
        state_.agent.pos = door_tile_of(n, opposite(*ev.exited));
        result.info.events.emplace_back("room");
      }
      if (ev.stairs) {
        ++state_.counters.floors;
        result.reward += 1.0;
        result.info.events.emplace_back("floor");
        state_.time_remaining += config_.floor_bonus;
        if (state_.floor_index + 1 >= config_.max_floor) {
          state_.floor_index = config_.max_floor;
          finish(Termination::TopFloor);
          break;
        }
        load_floor(state_.floor_index + 1);
      }
      if (state_.time_remaining <= 0) finish(Termination::Timeout);
    }
    ++state_.steps;
    result.done = state_.done;
    result.info.floor_index = state_.floor_index;
    result.info.cause = state_.cause;
    result.observation = observe();
    return result;
  }

  Observation observe() const {
    Observation o;
    o.side = config_.raster_side;
    o.keys_held = state_.agent.keys;
    o.time_remaining = state_.time_remaining;
    o.time_normalized = std::clamp(
        static_cast<double>(state_.time_remaining) / config_.starting_time, 0.0, 1.0);
    if (plan_ && state_.cell >= 0)
      o.raster = render_raster(*state_.rooms[state_.cell], state_.agent, plan_->theme,
                               plan_->lighting.band(), o.side);
    else
      o.raster.assign(static_cast<std::size_t>(o.side) * o.side, 0);
    return o;
  }

  const EpisodeState& state() const { return state_; }
  const EpisodeConfig& config() const { return config_; }
  const FloorPlan& plan() const { return *plan_; }
  std::shared_ptr<const FloorPlan> plan_ptr() const { return plan_; }
  const GeneratorContent& content() const { return *content_; }
  bool started() const { return started_; }
  const RoomSim& current_room() const { return *state_.rooms[state_.cell]; }

 private:
  void finish(Termination cause) {
    state_.done = true;
    state_.cause = cause;
  }

  Pos door_tile_of(int cell, Side s) const { return state_.rooms[cell]->door_tile(s); }

  void load_floor(int floor) {
    plan_ = std::make_shared<const FloorPlan>(
        assemble_floor(floor, config_.tower_seed, config_.theme_pool, *content_));
    const auto& layout = plan_->layout;
    state_.floor_index = floor;
    state_.rooms.assign(layout.cell_count(), std::nullopt);
    for (int c = 0; c < layout.cell_count(); ++c) {
      if (!plan_->rooms[c]) continue;
      std::array<bool, 4> locked{};
      for (Side s : kSides) {
        const int n = layout.neighbor(c, s);
        if (n < 0) continue;
        auto d = layout.door(c, n);
        locked[static_cast<int>(s)] = d && d->type == DoorKind::Type::Locked;
      }
      state_.rooms[c] = make_room_sim(
          *plan_->rooms[c], locked,
          stream_seed(config_.dynamics_seed, static_cast<std::uint64_t>(floor), "dynamics",
                      static_cast<std::uint64_t>(c)));
    }
    const int start = layout.start_cell();
    const RoomInstance& room = plan_->room(start);
    state_.cell = start;
    state_.agent.pos = room.find_all(TileType::Spawn).at(0);
    state_.agent.keys = 0;
    state_.agent.heading = 0;
    for (Side s : kSides)
      if (room.has_door(s)) {
        state_.agent.heading = static_cast<int>(s);
        break;
      }
  }

  std::shared_ptr<const GeneratorContent> content_;
  EpisodeConfig config_;
  EpisodeState state_;
  std::shared_ptr<const FloorPlan> plan_;
  bool started_ = false;
};

inline void write_trace_line(std::ostream& out, std::int64_t step, int action_code,
                             const StepResult& r) {
  nlohmann::json j = to_json(r);
  j["step"] = step;
  j["action"] = action_code;
  out << j.dump() << '\n';
}

}  // namespace towerforge
