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
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "towerforge/error.hpp"

namespace towerforge {

enum class NodeType { Start, Exit, Normal, Key, Lock, Puzzle };

inline constexpr std::array<NodeType, 6> kAllNodeTypes = {
    NodeType::Start, NodeType::Exit, NodeType::Normal,
    NodeType::Key,   NodeType::Lock, NodeType::Puzzle};

inline std::string_view to_string(NodeType t) {
  switch (t) {
    case NodeType::Start: return "Start";
    case NodeType::Exit: return "Exit";
    case NodeType::Normal: return "Normal";
    case NodeType::Key: return "Key";
    case NodeType::Lock: return "Lock";
    case NodeType::Puzzle: return "Puzzle";
  }
  return "?";
}

inline std::optional<NodeType> node_type_from_string(std::string_view s) {
  for (NodeType t : kAllNodeTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

// Rooms per floor never exceed this; the layout grid is sized for it.
inline constexpr int kMaxMissionNodes = 16;

struct MissionNode {
  int id = 0;
  NodeType type = NodeType::Normal;
  // Number of locked doors that must be opened to enter this room.
  int access_level = 0;

  friend bool operator==(const MissionNode&, const MissionNode&) = default;
};

// Undirected graph; edges are stored as (smaller id, larger id).
class MissionGraph {
 public:
  using Edge = std::pair<int, int>;

  const std::vector<MissionNode>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }

  const MissionNode* find(int id) const {
    auto it = std::lower_bound(
        nodes_.begin(), nodes_.end(), id,
        [](const MissionNode& n, int v) { return n.id < v; });
    return (it != nodes_.end() && it->id == id) ? &*it : nullptr;
  }
  MissionNode* find(int id) {
    return const_cast<MissionNode*>(std::as_const(*this).find(id));
  }
  const MissionNode& node(int id) const {
    const MissionNode* n = find(id);
    if (!n) throw Error(ErrorCode::StaleMatch, "no node " + std::to_string(id));
    return *n;
  }

  int next_id() const { return nodes_.empty() ? 0 : nodes_.back().id + 1; }

  // Appends or replaces by id; keeps nodes sorted.
  void put_node(MissionNode n) {
    auto it = std::lower_bound(
        nodes_.begin(), nodes_.end(), n.id,
        [](const MissionNode& a, int v) { return a.id < v; });
    if (it != nodes_.end() && it->id == n.id)
      *it = n;
    else
      nodes_.insert(it, n);
  }

  // Raw insertion, used by tests to build malformed graphs.
  void add_edge_raw(int a, int b) {
    edges_.emplace_back(std::min(a, b), std::max(a, b));
    std::sort(edges_.begin(), edges_.end());
  }

  bool has_edge(int a, int b) const {
    return std::binary_search(edges_.begin(), edges_.end(),
                              Edge{std::min(a, b), std::max(a, b)});
  }

  void add_edge(int a, int b) {
    if (!has_edge(a, b)) add_edge_raw(a, b);
  }

  void remove_edge(int a, int b) {
    std::erase(edges_, Edge{std::min(a, b), std::max(a, b)});
  }

  std::vector<int> neighbors(int id) const {
    std::vector<int> out;
    for (auto [a, b] : edges_) {
      if (a == id) out.push_back(b);
      if (b == id) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::optional<int> find_type(NodeType t) const {
    for (const auto& n : nodes_)
      if (n.type == t) return n.id;
    return std::nullopt;
  }

  int count(NodeType t) const {
    return static_cast<int>(std::count_if(
        nodes_.begin(), nodes_.end(),
        [t](const MissionNode& n) { return n.type == t; }));
  }

  // Hop distance from Start for every node reachable from it.
  std::map<int, int> depths() const {
    std::map<int, int> depth;
    auto start = find_type(NodeType::Start);
    if (!start) return depth;
    std::deque<int> queue{*start};
    depth[*start] = 0;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : neighbors(u)) {
        if (!depth.contains(v)) {
          depth[v] = depth[u] + 1;
          queue.push_back(v);
        }
      }
    }
    return depth;
  }

  // Nodes that cannot be reached from Start once `id` is removed, plus `id`
  // itself: the region that is only reachable through `id`.
  std::vector<int> dominated_region(int id) const {
    auto start = find_type(NodeType::Start);
    std::set<int> seen;
    if (start && *start != id) {
      std::deque<int> queue{*start};
      seen.insert(*start);
      while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int v : neighbors(u)) {
          if (v != id && seen.insert(v).second) queue.push_back(v);
        }
      }
    }
    std::vector<int> out;
    for (const auto& n : nodes_)
      if (!seen.contains(n.id)) out.push_back(n.id);
    return out;
  }

  friend bool operator==(const MissionGraph&, const MissionGraph&) = default;

 private:
  std::vector<MissionNode> nodes_;
  std::vector<Edge> edges_;
};

inline MissionGraph initial_graph() {
  MissionGraph g;
  g.put_node({0, NodeType::Start, 0});
  g.put_node({1, NodeType::Exit, 0});
  g.add_edge(0, 1);
  return g;
}

// Canonical JSON: nodes ordered by id, edges as sorted [lo, hi] pairs.
inline nlohmann::json to_json(const MissionGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes())
    nodes.push_back({{"id", n.id},
                     {"type", std::string(to_string(n.type))},
                     {"level", n.access_level}});
  nlohmann::json edges = nlohmann::json::array();
  for (auto [a, b] : g.edges()) edges.push_back({a, b});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline MissionGraph mission_graph_from_json(const nlohmann::json& j) {
  MissionGraph g;
  try {
    for (const auto& n : j.at("nodes")) {
      auto type = node_type_from_string(n.at("type").get<std::string>());
      if (!type) throw Error(ErrorCode::ParseError, "unknown node type");
      g.put_node({n.at("id").get<int>(), *type, n.at("level").get<int>()});
    }
    for (const auto& e : j.at("edges"))
      g.add_edge_raw(e.at(0).get<int>(), e.at(1).get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return g;
}

enum class ViolationKind {
  MissingStart,
  MultipleStart,
  MissingExit,
  MultipleExit,
  StartLevelNonZero,
  NegativeLevel,
  DuplicateNode,
  DanglingEdge,
  SelfLoop,
  DuplicateEdge,
  Disconnected,
  LevelJump,
  LevelInconsistent,
  MissingKey,
  ExitUnreachable,
  TooManyNodes,
  DegreeTooHigh,
};

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::MissingStart: return "MissingStart";
    case ViolationKind::MultipleStart: return "MultipleStart";
    case ViolationKind::MissingExit: return "MissingExit";
    case ViolationKind::MultipleExit: return "MultipleExit";
    case ViolationKind::StartLevelNonZero: return "StartLevelNonZero";
    case ViolationKind::NegativeLevel: return "NegativeLevel";
    case ViolationKind::DuplicateNode: return "DuplicateNode";
    case ViolationKind::DanglingEdge: return "DanglingEdge";
    case ViolationKind::SelfLoop: return "SelfLoop";
    case ViolationKind::DuplicateEdge: return "DuplicateEdge";
    case ViolationKind::Disconnected: return "Disconnected";
    case ViolationKind::LevelJump: return "LevelJump";
    case ViolationKind::LevelInconsistent: return "LevelInconsistent";
    case ViolationKind::MissingKey: return "MissingKey";
    case ViolationKind::ExitUnreachable: return "ExitUnreachable";
    case ViolationKind::TooManyNodes: return "TooManyNodes";
    case ViolationKind::DegreeTooHigh: return "DegreeTooHigh";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::string detail;
};

namespace detail {

// Exhaustive search over "explored region" states. Keys are interchangeable
// and consumed one per Lock node entered, so the number of keys in hand is
// (keys inside the region) - (locks inside the region) and the region alone
// is a complete state. Entering non-Lock nodes is free, so each state is
// closed under free expansion before branching on which Lock to open.
inline bool exit_reachable(const MissionGraph& g) {
  auto start = g.find_type(NodeType::Start);
  auto exit = g.find_type(NodeType::Exit);
  if (!start || !exit || g.size() > 64) return false;
  std::map<int, int> index;
  for (const auto& n : g.nodes()) index[n.id] = static_cast<int>(index.size());
  std::vector<std::vector<int>> adj(g.size());
  std::vector<NodeType> type(g.size());
  for (const auto& n : g.nodes()) type[index[n.id]] = n.type;
  for (auto [a, b] : g.edges()) {
    if (!index.contains(a) || !index.contains(b)) continue;
    adj[index[a]].push_back(index[b]);
    adj[index[b]].push_back(index[a]);
  }
  const int exit_i = index[*exit];

  auto close = [&](std::uint64_t region) {
    bool grew = true;
    while (grew) {
      grew = false;
      for (int u = 0; u < static_cast<int>(g.size()); ++u) {
        if (!(region >> u & 1)) continue;
        for (int v : adj[u]) {
          if ((region >> v & 1) || type[v] == NodeType::Lock) continue;
          region |= std::uint64_t{1} << v;
          grew = true;
        }
      }
    }
    return region;
  };
  auto keys_in_hand = [&](std::uint64_t region) {
    int keys = 0;
    for (int u = 0; u < static_cast<int>(g.size()); ++u) {
      if (!(region >> u & 1)) continue;
      if (type[u] == NodeType::Key) ++keys;
      if (type[u] == NodeType::Lock) --keys;
    }
    return keys;
  };

  std::unordered_set<std::uint64_t> seen;
  std::deque<std::uint64_t> queue;
  std::uint64_t first = close(std::uint64_t{1} << index[*start]);
  seen.insert(first);
  queue.push_back(first);
  while (!queue.empty()) {
    std::uint64_t region = queue.front();
    queue.pop_front();
    if (region >> exit_i & 1) return true;
    if (keys_in_hand(region) < 1) continue;
    for (int u = 0; u < static_cast<int>(g.size()); ++u) {
      if (!(region >> u & 1)) continue;
      for (int v : adj[u]) {
        if ((region >> v & 1) || type[v] != NodeType::Lock) continue;
        std::uint64_t next = close(region | (std::uint64_t{1} << v));
        if (seen.insert(next).second) queue.push_back(next);
      }
    }
  }
  return false;
}

}  // namespace detail

inline std::vector<Violation> validate_mission_graph(const MissionGraph& g) {
  std::vector<Violation> out;
  auto add = [&](ViolationKind k, std::string detail) {
    out.push_back({k, std::move(detail)});
  };

  const int starts = g.count(NodeType::Start);
  const int exits = g.count(NodeType::Exit);
  if (starts == 0) add(ViolationKind::MissingStart, "");
  if (starts > 1) add(ViolationKind::MultipleStart, std::to_string(starts));
  if (exits == 0) add(ViolationKind::MissingExit, "");
  if (exits > 1) add(ViolationKind::MultipleExit, std::to_string(exits));
  if (g.size() > static_cast<std::size_t>(kMaxMissionNodes))
    add(ViolationKind::TooManyNodes, std::to_string(g.size()));

  for (std::size_t i = 1; i < g.nodes().size(); ++i)
    if (g.nodes()[i].id == g.nodes()[i - 1].id)
      add(ViolationKind::DuplicateNode, std::to_string(g.nodes()[i].id));
  // A grid cell has four sides, so no room can have more neighbours.
  for (const auto& n : g.nodes())
    if (g.neighbors(n.id).size() > 4)
      add(ViolationKind::DegreeTooHigh, std::to_string(n.id));
  for (const auto& n : g.nodes()) {
    if (n.type == NodeType::Start && n.access_level != 0)
      add(ViolationKind::StartLevelNonZero, std::to_string(n.id));
    if (n.access_level < 0)
      add(ViolationKind::NegativeLevel, std::to_string(n.id));
  }

  bool edges_ok = true;
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    auto [a, b] = g.edges()[i];
    if (a == b) {
      add(ViolationKind::SelfLoop, std::to_string(a));
      edges_ok = false;
    }
    if (!g.find(a) || !g.find(b)) {
      add(ViolationKind::DanglingEdge,
          std::to_string(a) + "-" + std::to_string(b));
      edges_ok = false;
    }
    if (i > 0 && g.edges()[i - 1] == g.edges()[i])
      add(ViolationKind::DuplicateEdge,
          std::to_string(a) + "-" + std::to_string(b));
  }
  if (starts != 1 || exits != 1 || !edges_ok) return out;

  if (g.depths().size() != g.size()) add(ViolationKind::Disconnected, "");

  // Crossing from level i to a higher level j is only possible by entering a
  // Lock node, and only one level at a time.
  for (auto [a, b] : g.edges()) {
    const auto& na = g.node(a);
    const auto& nb = g.node(b);
    if (na.access_level == nb.access_level) continue;
    const auto& hi = na.access_level > nb.access_level ? na : nb;
    const auto& lo = na.access_level > nb.access_level ? nb : na;
    if (hi.type != NodeType::Lock || hi.access_level != lo.access_level + 1)
      add(ViolationKind::LevelJump,
          std::to_string(a) + "-" + std::to_string(b));
  }
  for (const auto& n : g.nodes()) {
    if (n.access_level == 0) continue;
    bool ok = false;
    for (int v : g.neighbors(n.id)) {
      const auto& m = g.node(v);
      if (m.access_level == n.access_level) ok = true;
    }
    if (!ok)
      add(ViolationKind::LevelInconsistent, std::to_string(n.id));
  }

  // Every Lock at level k needs a Key below level k that can be collected
  // without entering any Lock of level >= k.
  for (const auto& lock : g.nodes()) {
    if (lock.type != NodeType::Lock) continue;
    const int k = lock.access_level;
    std::set<int> seen{*g.find_type(NodeType::Start)};
    std::deque<int> queue(seen.begin(), seen.end());
    bool found = false;
    while (!queue.empty() && !found) {
      int u = queue.front();
      queue.pop_front();
      const auto& nu = g.node(u);
      if (nu.type == NodeType::Key && nu.access_level < k) found = true;
      for (int v : g.neighbors(u)) {
        const auto& nv = g.node(v);
        if (nv.type == NodeType::Lock && nv.access_level >= k) continue;
        if (seen.insert(v).second) queue.push_back(v);
      }
    }
    if (!found) add(ViolationKind::MissingKey, std::to_string(lock.id));
  }

  if (!detail::exit_reachable(g)) add(ViolationKind::ExitUnreachable, "");
  return out;
}

inline bool has_violation(const std::vector<Violation>& vs, ViolationKind k) {
  return std::any_of(vs.begin(), vs.end(),
                     [k](const Violation& v) { return v.kind == k; });
}

}  // namespace towerforge
