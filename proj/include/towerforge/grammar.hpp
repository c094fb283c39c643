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

// Graph-grammar rewriting of mission graphs.
//
// A rule's left-hand side is a small pattern: numbered nodes, each either a
// concrete NodeType or a wildcard, with an access-level constraint, plus
// directed edges. An lhs edge (1 -> 2) matches a graph edge whose first end is
// strictly closer to Start than its second end, so rules always rewrite "along
// the flow" of the mission. The right-hand side introduces fresh numbered
// nodes, lists the edges of the rewritten neighbourhood (lhs edges not listed
// are deleted), and may raise the access level of the region dominated by a
// node.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "towerforge/error.hpp"
#include "towerforge/mission_graph.hpp"
#include "towerforge/rng.hpp"

namespace towerforge {

struct LevelConstraint {
  enum class Kind { Any, Exact, SameAs };
  Kind kind = Kind::Any;
  int value = 0;  // the level for Exact, the mapping number for SameAs
};

struct PatternNode {
  int mapping = 0;
  std::optional<NodeType> type;  // nullopt: wildcard
  std::vector<NodeType> exclude;
  LevelConstraint level;
};

struct PatternEdge {
  int from = 0;
  int to = 0;
};

// A node created by the rewrite; level = level(level_of) + level_delta, using
// the levels before the rewrite.
struct FreshNode {
  int mapping = 0;
  NodeType type = NodeType::Normal;
  int level_of = 0;
  int level_delta = 0;
};

struct LevelRaise {
  int mapping = 0;
  int delta = 1;
};

struct GraphRule {
  std::string name;
  std::vector<PatternNode> lhs_nodes;
  std::vector<PatternEdge> lhs_edges;
  std::vector<FreshNode> fresh_nodes;
  std::vector<PatternEdge> rhs_edges;
  std::vector<LevelRaise> raises;
};

// Throws ParseError when a mapping number is dangling or reused.
inline void check_rule(const GraphRule& rule) {
  std::set<int> lhs;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::ParseError, "rule " + rule.name + ": " + why);
  };
  if (rule.name.empty()) fail("empty name");
  for (const auto& n : rule.lhs_nodes)
    if (!lhs.insert(n.mapping).second) fail("duplicate lhs mapping");
  for (const auto& n : rule.lhs_nodes)
    if (n.level.kind == LevelConstraint::Kind::SameAs &&
        !lhs.contains(n.level.value))
      fail("same_as refers to unknown mapping");
  for (const auto& e : rule.lhs_edges)
    if (!lhs.contains(e.from) || !lhs.contains(e.to) || e.from == e.to)
      fail("bad lhs edge");
  std::set<int> all = lhs;
  for (const auto& n : rule.fresh_nodes) {
    if (!all.insert(n.mapping).second) fail("fresh mapping reuses a number");
    if (!lhs.contains(n.level_of)) fail("fresh level refers to unknown node");
    if (n.type == NodeType::Start || n.type == NodeType::Exit)
      fail("rules may not create Start or Exit");
  }
  for (const auto& e : rule.rhs_edges)
    if (!all.contains(e.from) || !all.contains(e.to) || e.from == e.to)
      fail("bad rhs edge");
  for (const auto& r : rule.raises)
    if (!all.contains(r.mapping)) fail("raise refers to unknown node");
}

// One injective assignment of lhs mapping numbers to node ids, in lhs order.
struct Match {
  std::vector<std::pair<int, int>> assignment;
  // Hash of the canonical form of the graph the match was found in.
  std::uint64_t graph_fingerprint = 0;

  int operator[](int mapping) const {
    for (auto [m, id] : assignment)
      if (m == mapping) return id;
    throw Error(ErrorCode::StaleMatch, "mapping not in match");
  }
  friend bool operator==(const Match&, const Match&) = default;
};

inline std::uint64_t fingerprint(const MissionGraph& g) {
  return fnv1a64(to_json(g).dump());
}

inline std::vector<Match> find_matches(const MissionGraph& graph,
                                       const GraphRule& rule) {
  std::vector<Match> out;
  const auto depth = graph.depths();
  const std::uint64_t fp = fingerprint(graph);
  const auto& pattern = rule.lhs_nodes;
  std::vector<int> chosen(pattern.size(), -1);

  auto level_of = [&](int mapping) {
    for (std::size_t i = 0; i < pattern.size(); ++i)
      if (pattern[i].mapping == mapping && chosen[i] >= 0)
        return std::optional<int>(graph.node(chosen[i]).access_level);
    return std::optional<int>();
  };
  auto directed = [&](int from, int to) {
    if (!graph.has_edge(from, to)) return false;
    auto a = depth.find(from);
    auto b = depth.find(to);
    return a != depth.end() && b != depth.end() && a->second < b->second;
  };
  auto edges_ok = [&](std::size_t upto) {
    for (const auto& e : rule.lhs_edges) {
      int fi = -1, ti = -1;
      for (std::size_t i = 0; i <= upto; ++i) {
        if (pattern[i].mapping == e.from) fi = chosen[i];
        if (pattern[i].mapping == e.to) ti = chosen[i];
      }
      if (fi >= 0 && ti >= 0 && !directed(fi, ti)) return false;
    }
    return true;
  };

  auto recurse = [&](auto&& self, std::size_t i) -> void {
    if (i == pattern.size()) {
      Match m;
      m.graph_fingerprint = fp;
      for (std::size_t k = 0; k < pattern.size(); ++k)
        m.assignment.emplace_back(pattern[k].mapping, chosen[k]);
      out.push_back(std::move(m));
      return;
    }
    const PatternNode& p = pattern[i];
    for (const auto& n : graph.nodes()) {
      if (std::find(chosen.begin(), chosen.begin() + i, n.id) !=
          chosen.begin() + i)
        continue;
      if (p.type && *p.type != n.type) continue;
      if (std::find(p.exclude.begin(), p.exclude.end(), n.type) !=
          p.exclude.end())
        continue;
      if (p.level.kind == LevelConstraint::Kind::Exact &&
          n.access_level != p.level.value)
        continue;
      if (p.level.kind == LevelConstraint::Kind::SameAs) {
        auto other = level_of(p.level.value);
        // Constraints on later pattern nodes are checked once they are bound.
        if (other && *other != n.access_level) continue;
      }
      chosen[i] = n.id;
      if (edges_ok(i)) self(self, i + 1);
      chosen[i] = -1;
    }
  };
  recurse(recurse, 0);

  // SameAs constraints pointing forward are checked here.
  std::erase_if(out, [&](const Match& m) {
    for (const auto& p : pattern)
      if (p.level.kind == LevelConstraint::Kind::SameAs &&
          graph.node(m[p.mapping]).access_level !=
              graph.node(m[p.level.value]).access_level)
        return true;
    return false;
  });
  return out;
}

inline std::string describe(const std::vector<Violation>& vs) {
  std::string s;
  for (const auto& v : vs) {
    if (!s.empty()) s += ", ";
    s += std::string(to_string(v.kind));
    if (!v.detail.empty()) s += "(" + v.detail + ")";
  }
  return s;
}

inline MissionGraph apply_rule(const MissionGraph& graph, const GraphRule& rule,
                               const Match& match) {
  if (match.graph_fingerprint != fingerprint(graph))
    throw Error(ErrorCode::StaleMatch,
                "match was not produced on this graph (rule " + rule.name + ")");
  std::map<int, int> ids;
  for (auto [mapping, id] : match.assignment) {
    if (!graph.find(id))
      throw Error(ErrorCode::StaleMatch, "node " + std::to_string(id));
    ids[mapping] = id;
  }
  for (const auto& p : rule.lhs_nodes)
    if (!ids.contains(p.mapping))
      throw Error(ErrorCode::StaleMatch, "match does not bind every lhs node");

  MissionGraph out = graph;
  auto in_rhs = [&](int from, int to) {
    return std::any_of(rule.rhs_edges.begin(), rule.rhs_edges.end(),
                       [&](const PatternEdge& e) {
                         return (e.from == from && e.to == to) ||
                                (e.from == to && e.to == from);
                       });
  };
  for (const auto& e : rule.lhs_edges)
    if (!in_rhs(e.from, e.to)) out.remove_edge(ids[e.from], ids[e.to]);
  for (const auto& f : rule.fresh_nodes) {
    const int id = out.next_id();
    ids[f.mapping] = id;
    out.put_node(
        {id, f.type, graph.node(ids[f.level_of]).access_level + f.level_delta});
  }
  for (const auto& e : rule.rhs_edges) out.add_edge(ids[e.from], ids[e.to]);
  for (const auto& r : rule.raises)
    for (int id : out.dominated_region(ids[r.mapping]))
      out.find(id)->access_level += r.delta;

  auto violations = validate_mission_graph(out);
  if (!violations.empty())
    throw Error(ErrorCode::InvariantViolation,
                "rule " + rule.name + ": " + describe(violations));
  return out;
}

// ---------------------------------------------------------------------------
// Rule library and recipes.

using RuleLibrary = std::map<std::string, GraphRule>;

struct RecipeStep {
  std::string rule;
  int min_applications = 0;
  int max_applications = 0;
};

struct Recipe {
  std::string name;
  std::vector<RecipeStep> steps;
};

struct RecipeBand {
  int first_floor = 0;
  int last_floor = 0;
  Recipe recipe;
};

struct RecipeTable {
  std::vector<RecipeBand> bands;
  int max_nodes = kMaxMissionNodes;

  const RecipeBand* band_for(int floor) const {
    for (const auto& b : bands)
      if (floor >= b.first_floor && floor <= b.last_floor) return &b;
    return nullptr;
  }
  int max_floor() const { return bands.empty() ? -1 : bands.back().last_floor; }
};

namespace detail {

inline LevelConstraint level_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "any")
      throw Error(ErrorCode::ParseError, "level must be \"any\"");
    return {};
  }
  if (j.is_number_integer())
    return {LevelConstraint::Kind::Exact, j.get<int>()};
  if (j.is_object() && j.contains("same_as"))
    return {LevelConstraint::Kind::SameAs, j.at("same_as").get<int>()};
  throw Error(ErrorCode::ParseError, "bad level constraint " + j.dump());
}

inline nlohmann::json level_to_json(const LevelConstraint& c) {
  switch (c.kind) {
    case LevelConstraint::Kind::Any: return "any";
    case LevelConstraint::Kind::Exact: return c.value;
    case LevelConstraint::Kind::SameAs: return {{"same_as", c.value}};
  }
  return "any";
}

inline NodeType type_from_json(const nlohmann::json& j) {
  auto t = node_type_from_string(j.get<std::string>());
  if (!t) throw Error(ErrorCode::ParseError, "unknown node type " + j.dump());
  return *t;
}

inline std::vector<PatternEdge> edges_from_json(const nlohmann::json& j) {
  std::vector<PatternEdge> out;
  for (const auto& e : j) out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  return out;
}

inline nlohmann::json edges_to_json(const std::vector<PatternEdge>& es) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : es) out.push_back({e.from, e.to});
  return out;
}

}  // namespace detail

inline GraphRule rule_from_json(const nlohmann::json& j) {
  GraphRule r;
  try {
    r.name = j.at("name").get<std::string>();
    const auto& lhs = j.at("lhs");
    for (const auto& n : lhs.at("nodes")) {
      PatternNode p;
      p.mapping = n.at("map").get<int>();
      const auto type = n.value("type", std::string("*"));
      if (type != "*") p.type = detail::type_from_json(n.at("type"));
      for (const auto& x : n.value("exclude", nlohmann::json::array()))
        p.exclude.push_back(detail::type_from_json(x));
      p.level = detail::level_from_json(n.value("level", nlohmann::json("any")));
      r.lhs_nodes.push_back(std::move(p));
    }
    r.lhs_edges = detail::edges_from_json(lhs.value("edges", nlohmann::json::array()));
    const auto& rhs = j.at("rhs");
    for (const auto& n : rhs.value("nodes", nlohmann::json::array())) {
      FreshNode f;
      f.mapping = n.at("map").get<int>();
      f.type = detail::type_from_json(n.at("type"));
      f.level_of = n.at("level").at("of").get<int>();
      f.level_delta = n.at("level").value("plus", 0);
      r.fresh_nodes.push_back(f);
    }
    r.rhs_edges = detail::edges_from_json(rhs.value("edges", nlohmann::json::array()));
    for (const auto& x : rhs.value("raise", nlohmann::json::array()))
      r.raises.push_back({x.at("map").get<int>(), x.value("by", 1)});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("rule: ") + e.what());
  }
  check_rule(r);
  return r;
}

inline nlohmann::json to_json(const GraphRule& r) {
  nlohmann::json lhs_nodes = nlohmann::json::array();
  for (const auto& p : r.lhs_nodes) {
    nlohmann::json n = {{"map", p.mapping},
                        {"type", p.type ? std::string(to_string(*p.type)) : "*"},
                        {"level", detail::level_to_json(p.level)}};
    if (!p.exclude.empty()) {
      n["exclude"] = nlohmann::json::array();
      for (auto t : p.exclude) n["exclude"].push_back(std::string(to_string(t)));
    }
    lhs_nodes.push_back(n);
  }
  nlohmann::json rhs_nodes = nlohmann::json::array();
  for (const auto& f : r.fresh_nodes)
    rhs_nodes.push_back({{"map", f.mapping},
                         {"type", std::string(to_string(f.type))},
                         {"level", {{"of", f.level_of}, {"plus", f.level_delta}}}});
  nlohmann::json raises = nlohmann::json::array();
  for (const auto& x : r.raises) raises.push_back({{"map", x.mapping}, {"by", x.delta}});
  return {{"name", r.name},
          {"lhs", {{"nodes", lhs_nodes}, {"edges", detail::edges_to_json(r.lhs_edges)}}},
          {"rhs",
           {{"nodes", rhs_nodes},
            {"edges", detail::edges_to_json(r.rhs_edges)},
            {"raise", raises}}}};
}

inline RuleLibrary rule_library_from_json(const nlohmann::json& j) {
  RuleLibrary lib;
  try {
    for (const auto& r : j.at("rules")) {
      GraphRule rule = rule_from_json(r);
      if (lib.contains(rule.name))
        throw Error(ErrorCode::ParseError, "duplicate rule " + rule.name);
      lib.emplace(rule.name, std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("rules: ") + e.what());
  }
  return lib;
}

// Which node types a rule introduces; used for the difficulty ordering check.
inline int creates(const GraphRule& r, NodeType t) {
  return static_cast<int>(std::count_if(
      r.fresh_nodes.begin(), r.fresh_nodes.end(),
      [t](const FreshNode& f) { return f.type == t; }));
}

// Rule names must resolve, bands must tile 0..last floor without gaps, and a
// later band may not expect fewer Key/Lock/Puzzle insertions than an earlier
// one.
inline void check_recipe_table(const RecipeTable& table,
                               const RuleLibrary& rules) {
  auto fail = [](const std::string& why) {
    throw Error(ErrorCode::ParseError, "recipes: " + why);
  };
  if (table.bands.empty()) fail("no bands");
  if (table.max_nodes < 2 || table.max_nodes > kMaxMissionNodes)
    fail("max_nodes out of range");
  int expected_first = 0;
  std::array<double, 3> previous{0, 0, 0};
  for (const auto& band : table.bands) {
    if (band.first_floor != expected_first)
      fail("bands must partition floors; gap or overlap at floor " +
           std::to_string(expected_first));
    if (band.last_floor < band.first_floor) fail("empty band");
    expected_first = band.last_floor + 1;
    std::array<double, 3> expected{0, 0, 0};
    for (const auto& step : band.recipe.steps) {
      auto it = rules.find(step.rule);
      if (it == rules.end()) fail("unknown rule " + step.rule);
      if (step.min_applications < 0 ||
          step.max_applications < step.min_applications)
        fail("bad application bounds for " + step.rule);
      const double mean = 0.5 * (step.min_applications + step.max_applications);
      expected[0] += mean * creates(it->second, NodeType::Lock);
      expected[1] += mean * creates(it->second, NodeType::Key);
      expected[2] += mean * creates(it->second, NodeType::Puzzle);
    }
    for (int i = 0; i < 3; ++i)
      if (expected[i] < previous[i])
        fail("band starting at floor " + std::to_string(band.first_floor) +
             " expects fewer lock/key/puzzle insertions than the band before");
    previous = expected;
  }
}

inline RecipeTable recipe_table_from_json(const nlohmann::json& j) {
  RecipeTable table;
  try {
    table.max_nodes = j.value("max_nodes", kMaxMissionNodes);
    for (const auto& b : j.at("bands")) {
      RecipeBand band;
      band.first_floor = b.at("floors").at(0).get<int>();
      band.last_floor = b.at("floors").at(1).get<int>();
      band.recipe.name = b.value("recipe", std::string());
      for (const auto& s : b.at("steps"))
        band.recipe.steps.push_back({s.at("rule").get<std::string>(),
                                     s.at("min").get<int>(),
                                     s.at("max").get<int>()});
      table.bands.push_back(std::move(band));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("recipes: ") + e.what());
  }
  return table;
}

inline nlohmann::json to_json(const RecipeTable& t) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : t.bands) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : b.recipe.steps)
      steps.push_back({{"rule", s.rule}, {"min", s.min_applications},
                       {"max", s.max_applications}});
    bands.push_back({{"floors", {b.first_floor, b.last_floor}},
                     {"recipe", b.recipe.name},
                     {"steps", steps}});
  }
  return {{"max_nodes", t.max_nodes}, {"bands", bands}};
}

// ---------------------------------------------------------------------------
// Generation.

inline constexpr int kGenerationRetries = 16;

struct GenerationLogEntry {
  int attempt = 0;
  std::string rule;
  std::string event;  // "applied", "no-match", "size-cap", "invalid"
};

struct GeneratedMission {
  MissionGraph graph;
  std::vector<GenerationLogEntry> log;
};

inline GeneratedMission generate_mission_graph_logged(int floor_number,
                                                      std::uint64_t tower_seed,
                                                      const RecipeTable& table,
                                                      const RuleLibrary& rules) {
  const RecipeBand* band = table.band_for(floor_number);
  if (!band)
    throw Error(ErrorCode::OutOfRange,
                "floor " + std::to_string(floor_number) + " has no recipe band");
  GeneratedMission result;
  for (int attempt = 0; attempt < kGenerationRetries; ++attempt) {
    Rng rng = floor_stream(tower_seed, floor_number, "mission", attempt);
    MissionGraph g = initial_graph();
    bool failed = false;
    for (const auto& step : band->recipe.steps) {
      const GraphRule& rule = rules.at(step.rule);
      const int repeats = static_cast<int>(
          rng.between(step.min_applications, step.max_applications));
      for (int i = 0; i < repeats && !failed; ++i) {
        auto matches = find_matches(g, rule);
        if (matches.empty()) {
          result.log.push_back({attempt, rule.name, "no-match"});
          break;
        }
        if (g.size() + rule.fresh_nodes.size() >
            static_cast<std::size_t>(table.max_nodes)) {
          result.log.push_back({attempt, rule.name, "size-cap"});
          break;
        }
        const auto pick = rng.below(matches.size());
        try {
          g = apply_rule(g, rule, matches[pick]);
          result.log.push_back({attempt, rule.name, "applied"});
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InvariantViolation) throw;
          result.log.push_back({attempt, rule.name, "invalid"});
          failed = true;
        }
      }
      if (failed) break;
    }
    if (!failed && validate_mission_graph(g).empty()) {
      result.graph = std::move(g);
      return result;
    }
  }
  throw Error(ErrorCode::GenerationFailed,
              "no valid mission graph for floor " +
                  std::to_string(floor_number) + " after " +
                  std::to_string(kGenerationRetries) + " attempts");
}

inline MissionGraph generate_mission_graph(int floor_number,
                                           std::uint64_t tower_seed,
                                           const RecipeTable& table,
                                           const RuleLibrary& rules) {
  return generate_mission_graph_logged(floor_number, tower_seed, table, rules)
      .graph;
}

}  // namespace towerforge
