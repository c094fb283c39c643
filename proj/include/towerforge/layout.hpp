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

// Embedding of a mission graph into a grid of rooms.
//
// Nodes are placed in breadth-first order from Start. Each node goes next to
// its parent; when every free cell next to the parent is too cramped to host
// the node's own children, a chain of Connector rooms is laid from the parent
// to the nearest cell that is roomy enough. All connectors of a chain belong
// to the mission edge they realize and share the parent's access level. The
// door into a Lock room is Locked(level of that room); every other door is
// Open. The Exit room holds the Stairs.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "towerforge/error.hpp"
#include "towerforge/mission_graph.hpp"
#include "towerforge/rng.hpp"

namespace towerforge {

using RoomKind = NodeType;

inline constexpr int kMaxGridSide = 8;
inline constexpr int kLayoutRetries = 16;

struct DoorKind {
  enum class Type { Open, Locked, Stairs };
  Type type = Type::Open;
  int level = 0;  // positive for Locked

  static DoorKind open() { return {}; }
  static DoorKind locked(int level) { return {Type::Locked, level}; }
  static DoorKind stairs() { return {Type::Stairs, 0}; }
  friend bool operator==(const DoorKind&, const DoorKind&) = default;
};

struct RoomSlot {
  int node_id = -1;  // -1 for connectors
  RoomKind kind = RoomKind::Normal;
  int access_level = 0;
  bool connector = false;
  // For connectors: the mission edge (parent, child) they realize.
  std::pair<int, int> edge{-1, -1};

  friend bool operator==(const RoomSlot&, const RoomSlot&) = default;
};

enum class Side { North = 0, East = 1, South = 2, West = 3 };

inline constexpr std::array<Side, 4> kSides = {Side::North, Side::East,
                                               Side::South, Side::West};

inline constexpr int dx(Side s) {
  return s == Side::East ? 1 : s == Side::West ? -1 : 0;
}
inline constexpr int dy(Side s) {
  return s == Side::South ? 1 : s == Side::North ? -1 : 0;
}
inline constexpr Side opposite(Side s) {
  return static_cast<Side>((static_cast<int>(s) + 2) % 4);
}
inline std::string_view to_string(Side s) {
  switch (s) {
    case Side::North: return "N";
    case Side::East: return "E";
    case Side::South: return "S";
    case Side::West: return "W";
  }
  return "?";
}

class LayoutGrid {
 public:
  LayoutGrid() = default;
  LayoutGrid(int width, int height)
      : width_(width), height_(height), cells_(width * height) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int cell_count() const { return width_ * height_; }
  int index(int x, int y) const { return y * width_ + x; }
  int x_of(int cell) const { return cell % width_; }
  int y_of(int cell) const { return cell / width_; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  const std::optional<RoomSlot>& slot(int cell) const { return cells_.at(cell); }
  std::optional<RoomSlot>& slot(int cell) { return cells_.at(cell); }
  bool occupied(int cell) const { return cells_.at(cell).has_value(); }

  // Neighbouring cell across `side`, or -1 outside the grid.
  int neighbor(int cell, Side side) const {
    const int x = x_of(cell) + dx(side);
    const int y = y_of(cell) + dy(side);
    return in_bounds(x, y) ? index(x, y) : -1;
  }

  static std::pair<int, int> door_key(int a, int b) {
    return {std::min(a, b), std::max(a, b)};
  }
  const std::map<std::pair<int, int>, DoorKind>& doors() const { return doors_; }
  std::optional<DoorKind> door(int a, int b) const {
    auto it = doors_.find(door_key(a, b));
    if (it == doors_.end()) return std::nullopt;
    return it->second;
  }
  void set_door(int a, int b, DoorKind kind) { doors_[door_key(a, b)] = kind; }

  int stairs_cell() const { return stairs_cell_; }
  void set_stairs_cell(int cell) { stairs_cell_ = cell; }

  std::optional<int> cell_of_node(int node_id) const {
    for (int c = 0; c < cell_count(); ++c)
      if (cells_[c] && !cells_[c]->connector && cells_[c]->node_id == node_id)
        return c;
    return std::nullopt;
  }
  std::optional<int> cell_of_kind(RoomKind kind) const {
    for (int c = 0; c < cell_count(); ++c)
      if (cells_[c] && !cells_[c]->connector && cells_[c]->kind == kind)
        return c;
    return std::nullopt;
  }
  int start_cell() const { return cell_of_kind(RoomKind::Start).value_or(-1); }

  // Sides of `cell` that carry a door.
  std::vector<Side> door_sides(int cell) const {
    std::vector<Side> out;
    for (Side s : kSides) {
      int n = neighbor(cell, s);
      if (n >= 0 && door(cell, n)) out.push_back(s);
    }
    return out;
  }

  friend bool operator==(const LayoutGrid&, const LayoutGrid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::optional<RoomSlot>> cells_;
  std::map<std::pair<int, int>, DoorKind> doors_;
  int stairs_cell_ = -1;
};

inline nlohmann::json to_json(const DoorKind& d) {
  switch (d.type) {
    case DoorKind::Type::Open: return {{"type", "Open"}};
    case DoorKind::Type::Locked: return {{"type", "Locked"}, {"level", d.level}};
    case DoorKind::Type::Stairs: return {{"type", "Stairs"}};
  }
  return {};
}

inline DoorKind door_kind_from_json(const nlohmann::json& j) {
  const auto t = j.at("type").get<std::string>();
  if (t == "Open") return DoorKind::open();
  if (t == "Locked") return DoorKind::locked(j.at("level").get<int>());
  if (t == "Stairs") return DoorKind::stairs();
  throw Error(ErrorCode::ParseError, "unknown door type " + t);
}

inline nlohmann::json to_json(const LayoutGrid& g) {
  nlohmann::json cells = nlohmann::json::array();
  for (int c = 0; c < g.cell_count(); ++c) {
    const auto& s = g.slot(c);
    if (!s) continue;
    nlohmann::json j = {{"x", g.x_of(c)},
                        {"y", g.y_of(c)},
                        {"node", s->node_id},
                        {"kind", std::string(to_string(s->kind))},
                        {"level", s->access_level},
                        {"connector", s->connector}};
    if (s->connector) j["edge"] = {s->edge.first, s->edge.second};
    cells.push_back(j);
  }
  nlohmann::json doors = nlohmann::json::array();
  for (const auto& [key, kind] : g.doors()) {
    nlohmann::json j = to_json(kind);
    j["a"] = {g.x_of(key.first), g.y_of(key.first)};
    j["b"] = {g.x_of(key.second), g.y_of(key.second)};
    doors.push_back(j);
  }
  return {{"width", g.width()},
          {"height", g.height()},
          {"cells", cells},
          {"doors", doors},
          {"stairs", {g.x_of(g.stairs_cell()), g.y_of(g.stairs_cell())}}};
}

inline LayoutGrid layout_from_json(const nlohmann::json& j) {
  try {
    LayoutGrid g(j.at("width").get<int>(), j.at("height").get<int>());
    for (const auto& c : j.at("cells")) {
      RoomSlot s;
      s.node_id = c.at("node").get<int>();
      auto kind = node_type_from_string(c.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::ParseError, "bad room kind");
      s.kind = *kind;
      s.access_level = c.at("level").get<int>();
      s.connector = c.at("connector").get<bool>();
      if (s.connector)
        s.edge = {c.at("edge").at(0).get<int>(), c.at("edge").at(1).get<int>()};
      g.slot(g.index(c.at("x").get<int>(), c.at("y").get<int>())) = s;
    }
    for (const auto& d : j.at("doors")) {
      int a = g.index(d.at("a").at(0).get<int>(), d.at("a").at(1).get<int>());
      int b = g.index(d.at("b").at(0).get<int>(), d.at("b").at(1).get<int>());
      g.set_door(a, b, door_kind_from_json(d));
    }
    g.set_stairs_cell(
        g.index(j.at("stairs").at(0).get<int>(), j.at("stairs").at(1).get<int>()));
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("layout: ") + e.what());
  }
}

namespace detail {

// One embedding attempt on a kMaxGridSide square canvas. Returns nullopt when
// the attempt boxes itself in.
inline std::optional<LayoutGrid> try_embed(const MissionGraph& graph, Rng& rng) {
  constexpr int N = kMaxGridSide;
  LayoutGrid canvas(N, N);
  const int start = *graph.find_type(NodeType::Start);
  std::map<int, int> cell_of;

  // Breadth-first tree over the mission graph; extra edges (if any) are
  // routed afterwards.
  std::map<int, int> parent;
  std::vector<int> order{start};
  {
    std::set<int> seen{start};
    for (std::size_t i = 0; i < order.size(); ++i)
      for (int v : graph.neighbors(order[i]))
        if (seen.insert(v).second) {
          parent[v] = order[i];
          order.push_back(v);
        }
  }
  std::map<int, int> children;
  for (auto [v, p] : parent) ++children[p];

  auto slot_for = [&](int id) {
    const auto& n = graph.node(id);
    return RoomSlot{id, n.type, n.access_level, false, {-1, -1}};
  };
  auto free_degree = [&](int cell) {
    int free = 0;
    for (Side s : kSides) {
      int n = canvas.neighbor(cell, s);
      if (n >= 0 && !canvas.occupied(n)) ++free;
    }
    return free;
  };
  auto door_for = [&](int child) {
    const auto& n = graph.node(child);
    return n.type == NodeType::Lock ? DoorKind::locked(n.access_level)
                                    : DoorKind::open();
  };

  // Lays `to` at the end of a fresh chain starting next to `from_cell`.
  auto place_child = [&](int from, int to) -> bool {
    const int from_cell = cell_of.at(from);
    const int need = children[to];
    // Breadth-first over free cells; prev links reconstruct the chain.
    std::map<int, int> prev;
    std::deque<int> queue;
    for (Side s : kSides) {
      int n = canvas.neighbor(from_cell, s);
      if (n >= 0 && !canvas.occupied(n)) {
        prev[n] = from_cell;
        queue.push_back(n);
      }
    }
    std::vector<int> best;
    int best_dist = -1;
    std::map<int, int> dist;
    for (int c : queue) dist[c] = 1;
    while (!queue.empty()) {
      int c = queue.front();
      queue.pop_front();
      if (best_dist >= 0 && dist[c] > best_dist) break;
      // A cell is roomy when, after occupying it, enough free neighbours are
      // left for this node's own children.
      if (free_degree(c) - (dist[c] > 1 ? 1 : 0) >= need) {
        best.push_back(c);
        best_dist = dist[c];
        continue;
      }
      for (Side s : kSides) {
        int n = canvas.neighbor(c, s);
        if (n >= 0 && !canvas.occupied(n) && !prev.contains(n)) {
          prev[n] = c;
          dist[n] = dist[c] + 1;
          queue.push_back(n);
        }
      }
    }
    if (best.empty()) return false;
    // Prefer the most open candidates; crowded corners box later rooms in.
    int most = 0;
    for (int c : best) most = std::max(most, free_degree(c));
    std::erase_if(best, [&](int c) { return free_degree(c) < most; });
    std::sort(best.begin(), best.end());
    const int target = best[rng.below(best.size())];
    std::vector<int> chain;
    for (int c = target; c != from_cell; c = prev.at(c)) chain.push_back(c);
    std::reverse(chain.begin(), chain.end());
    // chain = connectors..., target
    const auto& from_node = graph.node(from);
    int previous = from_cell;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      canvas.slot(chain[i]) = RoomSlot{-1, RoomKind::Normal,
                                       from_node.access_level, true, {from, to}};
      canvas.set_door(previous, chain[i], DoorKind::open());
      previous = chain[i];
    }
    canvas.slot(target) = slot_for(to);
    canvas.set_door(previous, target, door_for(to));
    cell_of[to] = target;
    return true;
  };

  const int sx = static_cast<int>(rng.between(2, N - 3));
  const int sy = static_cast<int>(rng.between(2, N - 3));
  canvas.slot(canvas.index(sx, sy)) = slot_for(start);
  cell_of[start] = canvas.index(sx, sy);
  for (std::size_t i = 1; i < order.size(); ++i)
    if (!place_child(parent.at(order[i]), order[i])) return std::nullopt;

  // Non-tree edges never come out of the shipped grammar; route them through
  // free cells when a custom rule library produces them.
  for (auto [a, b] : graph.edges()) {
    if (parent.contains(b) && parent.at(b) == a) continue;
    if (parent.contains(a) && parent.at(a) == b) continue;
    const int ca = cell_of.at(a), cb = cell_of.at(b);
    std::map<int, int> prev{{ca, ca}};
    std::deque<int> queue{ca};
    bool found = false;
    while (!queue.empty() && !found) {
      int c = queue.front();
      queue.pop_front();
      for (Side s : kSides) {
        int n = canvas.neighbor(c, s);
        if (n < 0 || prev.contains(n)) continue;
        if (n == cb) {
          prev[n] = c;
          found = true;
          break;
        }
        if (canvas.occupied(n)) continue;
        prev[n] = c;
        queue.push_back(n);
      }
    }
    if (!found) return std::nullopt;
    const auto& na = graph.node(a);
    const auto& nb = graph.node(b);
    const int lo = na.access_level <= nb.access_level ? a : b;
    const int hi = lo == a ? b : a;
    std::vector<int> chain;
    for (int c = cb; c != ca; c = prev.at(c)) chain.push_back(c);
    chain.push_back(ca);
    std::reverse(chain.begin(), chain.end());
    if (lo != a) std::reverse(chain.begin(), chain.end());
    // chain runs from lo's cell to hi's cell.
    for (std::size_t i = 1; i + 1 < chain.size(); ++i)
      canvas.slot(chain[i]) = RoomSlot{-1, RoomKind::Normal,
                                       graph.node(lo).access_level, true,
                                       {lo, hi}};
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      const bool last = i + 2 == chain.size();
      canvas.set_door(chain[i], chain[i + 1],
                      last ? door_for(hi) : DoorKind::open());
    }
  }

  // Crop to the bounding box.
  int x0 = N, y0 = N, x1 = -1, y1 = -1;
  for (int c = 0; c < canvas.cell_count(); ++c) {
    if (!canvas.occupied(c)) continue;
    x0 = std::min(x0, canvas.x_of(c));
    y0 = std::min(y0, canvas.y_of(c));
    x1 = std::max(x1, canvas.x_of(c));
    y1 = std::max(y1, canvas.y_of(c));
  }
  LayoutGrid out(x1 - x0 + 1, y1 - y0 + 1);
  auto remap = [&](int c) {
    return out.index(canvas.x_of(c) - x0, canvas.y_of(c) - y0);
  };
  for (int c = 0; c < canvas.cell_count(); ++c)
    if (canvas.occupied(c)) out.slot(remap(c)) = canvas.slot(c);
  for (const auto& [key, kind] : canvas.doors())
    out.set_door(remap(key.first), remap(key.second), kind);
  out.set_stairs_cell(remap(cell_of.at(*graph.find_type(NodeType::Exit))));
  return out;
}

}  // namespace detail

// Throws GenerationFailed when every retry stream boxes itself in.
inline LayoutGrid graph_to_layout(const MissionGraph& graph, Rng& stream) {
  if (graph.size() > static_cast<std::size_t>(kMaxMissionNodes))
    throw Error(ErrorCode::GenerationFailed,
                "mission graph has " + std::to_string(graph.size()) +
                    " rooms; at most " + std::to_string(kMaxMissionNodes) +
                    " fit a layout grid");
  auto violations = validate_mission_graph(graph);
  if (!violations.empty())
    throw Error(ErrorCode::GenerationFailed, "invalid mission graph");
  const std::uint64_t base = stream.next();
  for (int retry = 0; retry < kLayoutRetries; ++retry) {
    Rng attempt(hash_combine(base, static_cast<std::uint64_t>(retry)));
    if (auto grid = detail::try_embed(graph, attempt)) return *grid;
  }
  throw Error(ErrorCode::GenerationFailed, "layout embedding failed");
}

// Structural problems of a layout relative to its mission graph; empty when
// the layout is a faithful embedding.
inline std::vector<std::string> validate_layout(const LayoutGrid& grid,
                                                const MissionGraph& graph) {
  std::vector<std::string> problems;
  if (grid.width() < 1 || grid.height() < 1 || grid.width() > kMaxGridSide ||
      grid.height() > kMaxGridSide)
    problems.push_back("grid size out of range");
  for (const auto& n : graph.nodes()) {
    int count = 0;
    for (int c = 0; c < grid.cell_count(); ++c)
      if (grid.slot(c) && !grid.slot(c)->connector &&
          grid.slot(c)->node_id == n.id)
        ++count;
    if (count != 1)
      problems.push_back("node " + std::to_string(n.id) + " occupies " +
                         std::to_string(count) + " cells");
  }
  for (const auto& [key, kind] : grid.doors()) {
    auto [a, b] = key;
    const int ddx = std::abs(grid.x_of(a) - grid.x_of(b));
    const int ddy = std::abs(grid.y_of(a) - grid.y_of(b));
    if (ddx + ddy != 1) problems.push_back("door between non-adjacent cells");
    if (!grid.occupied(a) || !grid.occupied(b))
      problems.push_back("door touches an empty cell");
    if (kind.type == DoorKind::Type::Stairs)
      problems.push_back("stairs on a grid edge");
    if (kind.type == DoorKind::Type::Locked && grid.occupied(a) &&
        grid.occupied(b)) {
      const auto& sa = *grid.slot(a);
      const auto& sb = *grid.slot(b);
      const int hi = std::max(sa.access_level, sb.access_level);
      const int lo = std::min(sa.access_level, sb.access_level);
      const auto& far = sa.access_level > sb.access_level ? sa : sb;
      if (kind.level < 1 || hi != kind.level || lo != kind.level - 1 ||
          far.kind != RoomKind::Lock)
        problems.push_back("locked door does not separate level " +
                           std::to_string(kind.level - 1) + " from " +
                           std::to_string(kind.level));
    }
  }
  const auto exit = graph.find_type(NodeType::Exit);
  if (!exit || grid.stairs_cell() < 0 ||
      grid.cell_of_node(*exit) != std::optional<int>(grid.stairs_cell()))
    problems.push_back("stairs are not in the Exit room");

  // Every mission edge must be realized by a door path whose interior cells
  // are connectors of that edge.
  for (auto [a, b] : graph.edges()) {
    auto ca = grid.cell_of_node(a);
    auto cb = grid.cell_of_node(b);
    if (!ca || !cb) continue;
    std::set<int> seen{*ca};
    std::deque<int> queue{*ca};
    bool found = false;
    while (!queue.empty() && !found) {
      int c = queue.front();
      queue.pop_front();
      for (Side s : kSides) {
        int n = grid.neighbor(c, s);
        if (n < 0 || !grid.door(c, n) || seen.contains(n)) continue;
        if (n == *cb) {
          found = true;
          break;
        }
        const auto& slot = grid.slot(n);
        if (!slot || !slot->connector) continue;
        const auto e = slot->edge;
        if (!((e.first == a && e.second == b) || (e.first == b && e.second == a)))
          continue;
        seen.insert(n);
        queue.push_back(n);
      }
    }
    if (!found)
      problems.push_back("edge " + std::to_string(a) + "-" + std::to_string(b) +
                         " is not realized");
  }
  // No door may join rooms that are not joined in the mission graph.
  for (const auto& [key, kind] : grid.doors()) {
    const auto& sa = grid.slot(key.first);
    const auto& sb = grid.slot(key.second);
    if (!sa || !sb) continue;
    auto edge_of = [](const RoomSlot& s) { return s.edge; };
    if (!sa->connector && !sb->connector) {
      if (!graph.has_edge(sa->node_id, sb->node_id))
        problems.push_back("door without a mission edge");
    } else if (sa->connector && sb->connector) {
      if (edge_of(*sa) != edge_of(*sb))
        problems.push_back("door joins connectors of different edges");
    } else {
      const auto& c = sa->connector ? *sa : *sb;
      const auto& r = sa->connector ? *sb : *sa;
      if (c.edge.first != r.node_id && c.edge.second != r.node_id)
        problems.push_back("connector door to a foreign room");
    }
  }
  return problems;
}

// Room-level route through a floor.
struct FloorPlanStep {
  int cell = -1;
  bool picked_key = false;
  bool opened_door = false;
};

struct FloorSolution {
  std::vector<FloorPlanStep> steps;  // steps[0] is the start cell
  int transitions() const { return static_cast<int>(steps.size()) - 1; }
};

// Breadth-first search over (cell, keys collected, doors opened). Keys are
// interchangeable and each Locked door consumes one. Returns the shortest
// route by number of room transitions, or nullopt when the Stairs cannot be
// reached.
inline std::optional<FloorSolution> solve_floor(const LayoutGrid& grid) {
  const int start = grid.start_cell();
  const int goal = grid.stairs_cell();
  if (start < 0 || goal < 0) return std::nullopt;

  std::map<int, int> key_bit;
  for (int c = 0; c < grid.cell_count(); ++c)
    if (grid.slot(c) && !grid.slot(c)->connector &&
        grid.slot(c)->kind == RoomKind::Key)
      key_bit[c] = static_cast<int>(key_bit.size());
  std::map<std::pair<int, int>, int> door_bit;
  for (const auto& [key, kind] : grid.doors())
    if (kind.type == DoorKind::Type::Locked)
      door_bit[key] = static_cast<int>(door_bit.size());
  if (key_bit.size() > 31 || door_bit.size() > 31)
    throw Error(ErrorCode::OutOfRange, "too many keys or locks to search");

  struct State {
    int cell;
    std::uint32_t keys;
    std::uint32_t opened;
    auto operator<=>(const State&) const = default;
  };
  auto collect = [&](int cell, std::uint32_t keys) {
    auto it = key_bit.find(cell);
    return it == key_bit.end() ? keys : keys | (1u << it->second);
  };
  State first{start, collect(start, 0), 0};
  std::map<State, std::pair<State, FloorPlanStep>> prev;
  std::deque<State> queue{first};
  prev.emplace(first, std::pair{first, FloorPlanStep{start, first.keys != 0, false}});
  std::optional<State> reached;
  while (!queue.empty()) {
    State s = queue.front();
    queue.pop_front();
    if (s.cell == goal) {
      reached = s;
      break;
    }
    for (Side side : kSides) {
      int n = grid.neighbor(s.cell, side);
      if (n < 0) continue;
      auto door = grid.door(s.cell, n);
      if (!door) continue;
      State t{n, s.keys, s.opened};
      bool opened_now = false;
      if (door->type == DoorKind::Type::Locked) {
        const int bit = door_bit.at(LayoutGrid::door_key(s.cell, n));
        if (!(s.opened >> bit & 1)) {
          const int held = std::popcount(s.keys) - std::popcount(s.opened);
          if (held < 1) continue;
          t.opened |= 1u << bit;
          opened_now = true;
        }
      }
      t.keys = collect(n, t.keys);
      if (prev.contains(t)) continue;
      prev.emplace(t, std::pair{s, FloorPlanStep{n, t.keys != s.keys, opened_now}});
      queue.push_back(t);
    }
  }
  if (!reached) return std::nullopt;
  FloorSolution sol;
  for (State s = *reached;;) {
    const auto& [p, step] = prev.at(s);
    sol.steps.push_back(step);
    if (p == s) break;
    s = p;
  }
  std::reverse(sol.steps.begin(), sol.steps.end());
  return sol;
}

}  // namespace towerforge
