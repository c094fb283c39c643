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

// Scripted solver with privileged access to the simulator. It follows the
// room-level route from solve_floor and plans inside each room by searching
// over exact one-step forecasts of the room dynamics.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "towerforge/layout.hpp"
#include "towerforge/rng.hpp"
#include "towerforge/simulator.hpp"

namespace towerforge {

struct SolverOptions {
  std::int64_t max_steps = 200000;
  std::size_t max_states = 150000;
  int horizon = 160;  // steps searched per room
  int orb_slack = 300;  // below this many ticks, detour through a TimeOrb
};

struct SolverLogEntry {
  int floor = 0;
  std::int64_t step = 0;
  std::string what;
};

struct RoomGoal {
  std::optional<Side> exit;  // leave through this door
  bool stairs = false;
  bool need_key = false;  // the room's key must be taken first
  bool want_orb = false;  // collect one TimeOrb before leaving
};

namespace detail {

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return hash_combine(h, v); }

// Identity of a search state. Room tick only matters modulo the entity period.
inline std::uint64_t search_key(const RoomSim& r, const AgentLocal& a) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  h = mix(h, static_cast<std::uint64_t>(a.pos.x * 64 + a.pos.y));
  h = mix(h, static_cast<std::uint64_t>(a.heading * 1024 + a.keys));
  h = mix(h, static_cast<std::uint64_t>(r.block) << 16 |
                 static_cast<std::uint64_t>(r.block_pos.x * 64 + r.block_pos.y));
  h = mix(h, r.solved);
  for (int i = 0; i < 4; ++i) h = mix(h, r.locked[i]);
  std::uint64_t tiles = 0;
  for (std::size_t i = 0; i < r.tiles.size(); ++i)
    tiles = mix(tiles, static_cast<std::uint64_t>(r.tiles[i]));
  h = mix(h, tiles);
  if (r.dynamic()) {
    h = mix(h, r.tick % kTicksPerStep);
    for (int i = 0; i < r.enemy_count; ++i)
      h = mix(h, static_cast<std::uint64_t>(r.enemies[i].pos.x * 64 + r.enemies[i].pos.y) |
                     static_cast<std::uint64_t>(r.enemies[i].dir) << 12);
    for (int i = 0; i < r.platform_count; ++i)
      h = mix(h, static_cast<std::uint64_t>(r.platforms[i].index) |
                     static_cast<std::uint64_t>(r.platforms[i].dir + 1) << 8);
    for (auto w : r.rng.state()) h = mix(h, w);
  }
  return h;
}

inline bool holds_key_item(const RoomSim& r) {
  for (auto t : r.tiles)
    if (t == TileType::KeyItem) return true;
  return false;
}

inline int orb_count(const RoomSim& r) {
  return static_cast<int>(std::count(r.tiles.begin(), r.tiles.end(), TileType::TimeOrb));
}

}  // namespace detail

// Shortest action sequence reaching the goal from the given room state, or
// nullopt when the search finds none within its bounds.
inline std::optional<std::vector<Action>> plan_room(const RoomSim& room,
                                                    const AgentLocal& agent,
                                                    const RoomGoal& goal,
                                                    const SolverOptions& opts = {}) {
  struct Node {
    RoomSim room;
    AgentLocal agent;
    int parent;
    Action action;
    int depth;
  };
  std::vector<Action> moves;
  for (Side s : kSides) {
    moves.push_back(action_toward(s, agent.heading));
    moves.push_back(action_toward(s, agent.heading, true));
  }
  moves.push_back(Action{});

  const int orbs = detail::orb_count(room);
  auto satisfied = [&](const RoomSim& r) {
    if (goal.need_key && detail::holds_key_item(r)) return false;
    if (goal.want_orb && detail::orb_count(r) >= orbs) return false;
    return true;
  };
  std::vector<Node> nodes;
  nodes.reserve(1024);
  std::unordered_set<std::uint64_t> seen;
  nodes.push_back({room, agent, -1, {}, 0});
  seen.insert(detail::search_key(room, agent));
  auto unwind = [&](int idx, const Action& last) {
    std::vector<Action> out{last};
    for (int i = idx; nodes[i].parent >= 0; i = nodes[i].parent) out.push_back(nodes[i].action);
    std::reverse(out.begin(), out.end());
    return out;
  };
  for (std::size_t head = 0; head < nodes.size(); ++head) {
    if (nodes[head].depth >= opts.horizon) continue;
    for (const Action& a : moves) {
      const Node& cur = nodes[head];
      RoomForecast f = forecast_step(cur.room, cur.agent, a);
      if (f.events.hazard) continue;
      if (f.events.stairs) {
        if (goal.stairs && satisfied(f.room)) return unwind(static_cast<int>(head), a);
        continue;
      }
      if (f.events.exited) {
        if (goal.exit && *f.events.exited == *goal.exit && satisfied(f.room))
          return unwind(static_cast<int>(head), a);
        continue;
      }
      if (!seen.insert(detail::search_key(f.room, f.agent)).second) continue;
      if (nodes.size() >= opts.max_states) return std::nullopt;
      nodes.push_back({f.room, f.agent, static_cast<int>(head), a, cur.depth + 1});
    }
  }
  return std::nullopt;
}

class ScriptedSolver {
 public:
  explicit ScriptedSolver(SolverOptions opts = {}) : opts_(opts) {}

  // Next action for the simulator's current state.
  Action act(const Simulator& sim) {
    const EpisodeState& st = sim.state();
    if (st.floor_index != floor_ || !route_) start_floor(sim);
    if (pending_ > 0 && pending_ <= expect_.size()) {
      const Expect& e = expect_[pending_ - 1];
      if (!matches(sim, e)) {
        log_.push_back({floor_, st.steps, "PlanFailure: outcome differs from forecast"});
        ++plan_failures_;
        pending_ = plan_.size();
      } else if (e.leaves) {
        pending_ = plan_.size();
      }
    }
    while (route_idx_ + 1 < route_->steps.size() &&
           st.cell == route_->steps[route_idx_ + 1].cell)
      ++route_idx_;
    if (pending_ >= plan_.size()) replan(sim);
    if (plan_.empty()) return Action{};
    return plan_[pending_++];
  }

  int plan_failures() const { return plan_failures_; }
  int witness_replays() const { return witness_replays_; }
  int orb_detours() const { return orb_detours_; }
  const std::vector<SolverLogEntry>& log() const { return log_; }

 private:
  struct Expect {
    int cell;
    bool leaves;
    RoomSim room;
    AgentLocal agent;
  };

  void start_floor(const Simulator& sim) {
    floor_ = sim.state().floor_index;
    route_ = solve_floor(sim.plan().layout);
    if (!route_) throw Error(ErrorCode::PlanFailure, "floor has no room-level route");
    route_idx_ = 0;
    plan_.clear();
    expect_.clear();
    pending_ = 0;
  }

  static bool matches(const Simulator& sim, const Expect& e) {
    const EpisodeState& st = sim.state();
    if (e.leaves) return st.cell != e.cell;
    return st.cell == e.cell && st.agent == e.agent && *st.rooms[st.cell] == e.room;
  }

  RoomGoal goal_for(const Simulator& sim) const {
    const EpisodeState& st = sim.state();
    const auto& steps = route_->steps;
    RoomGoal g;
    if (route_idx_ + 1 >= steps.size()) {
      g.stairs = true;
      return g;
    }
    const int next = steps[route_idx_ + 1].cell;
    for (Side s : kSides)
      if (sim.plan().layout.neighbor(st.cell, s) == next) g.exit = s;
    g.need_key = steps[route_idx_].picked_key &&
                 detail::holds_key_item(*st.rooms[st.cell]);
    return g;
  }

  void replan(const Simulator& sim) {
    const EpisodeState& st = sim.state();
    plan_.clear();
    expect_.clear();
    pending_ = 0;
    const RoomGoal goal = goal_for(sim);
    const RoomSim& here = *st.rooms[st.cell];
    std::optional<std::vector<Action>> found;
    const RoomInstance& inst = sim.plan().room(st.cell);
    if (here.kind == RoomKind::Puzzle && !here.solved && here.block == BlockState::Free &&
        here.block_pos == here.block_origin && st.agent.pos == puzzle_start(inst)) {
      // Fresh puzzle: replay the push-mechanics witness, then search the rest.
      if (auto w = puzzle_witness(inst)) {
        std::vector<Action> seq;
        for (Side s : *w) seq.push_back(action_toward(s, st.agent.heading));
        RoomSim room = here;
        AgentLocal agent = st.agent;
        bool ok = true;
        for (const Action& a : seq) {
          RoomForecast f = forecast_step(room, agent, a);
          if (f.events.hazard || f.events.exited || f.events.stairs) ok = false;
          room = f.room;
          agent = f.agent;
        }
        if (ok && room.solved) {
          auto rest = plan_room(room, agent, goal, opts_);
          if (rest) {
            seq.insert(seq.end(), rest->begin(), rest->end());
            found = std::move(seq);
            ++witness_replays_;
          }
        }
      }
    }
    if (!found && st.time_remaining < opts_.orb_slack && detail::orb_count(here) > 0) {
      RoomGoal detour = goal;
      detour.want_orb = true;
      found = plan_room(here, st.agent, detour, opts_);
      if (found) ++orb_detours_;
    }
    if (!found) found = plan_room(here, st.agent, goal, opts_);
    if (!found) {
      log_.push_back({floor_, st.steps, "PlanFailure: no plan in room, waiting"});
      ++plan_failures_;
      return;
    }
    plan_ = std::move(*found);
    RoomSim room = *st.rooms[st.cell];
    AgentLocal agent = st.agent;
    for (const Action& a : plan_) {
      RoomForecast f = forecast_step(room, agent, a);
      expect_.push_back({st.cell, f.events.exited.has_value() || f.events.stairs, f.room,
                         f.agent});
      room = f.room;
      agent = f.agent;
    }
  }

  SolverOptions opts_;
  int floor_ = -1;
  std::optional<FloorSolution> route_;
  std::size_t route_idx_ = 0;
  std::vector<Action> plan_;
  std::vector<Expect> expect_;
  std::size_t pending_ = 0;
  int plan_failures_ = 0;
  int witness_replays_ = 0;
  int orb_detours_ = 0;
  std::vector<SolverLogEntry> log_;
};

struct SolverRun {
  std::uint64_t tower_seed = 0;
  int floors = 0;
  Termination cause = Termination::None;
  std::int64_t steps = 0;
  double total_return = 0.0;
  EpisodeCounters counters;
  int plan_failures = 0;
  int witness_replays = 0;
  int orb_detours = 0;
  int time_remaining = 0;
  int min_time_remaining = 0;
  std::vector<SolverLogEntry> log;
};

inline SolverRun run_solver(Simulator& sim, const EpisodeConfig& config,
                            const SolverOptions& opts = {}) {
  sim.reset(config);
  ScriptedSolver solver(opts);
  SolverRun run;
  run.tower_seed = config.tower_seed;
  run.min_time_remaining = sim.state().time_remaining;
  while (!sim.state().done && sim.state().steps < opts.max_steps) {
    StepResult r = sim.step(solver.act(sim));
    run.total_return += r.reward;
    run.min_time_remaining = std::min(run.min_time_remaining, sim.state().time_remaining);
  }
  run.floors = sim.state().counters.floors;
  run.cause = sim.state().cause;
  run.steps = sim.state().steps;
  run.counters = sim.state().counters;
  run.plan_failures = solver.plan_failures();
  run.witness_replays = solver.witness_replays();
  run.orb_detours = solver.orb_detours();
  run.time_remaining = sim.state().time_remaining;
  run.log = solver.log();
  return run;
}

}  // namespace towerforge
