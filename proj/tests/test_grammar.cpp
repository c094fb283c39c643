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

#include <gtest/gtest.h>

#include <deque>
#include <map>
#include <set>

#include "towerforge/default_content.hpp"
#include "towerforge/grammar.hpp"

using namespace towerforge;

namespace {

const GeneratorContent& content() { return *default_content(); }
const GraphRule& rule(const std::string& name) { return content().rules.at(name); }

std::map<int, int> bfs_depths(const MissionGraph& g) {
  std::map<int, int> d;
  int start = -1;
  for (const auto& n : g.nodes())
    if (n.type == NodeType::Start) start = n.id;
  std::deque<int> q{start};
  d[start] = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (auto [a, b] : g.edges()) {
      int v = a == u ? b : b == u ? a : -1;
      if (v >= 0 && !d.count(v)) {
        d[v] = d[u] + 1;
        q.push_back(v);
      }
    }
  }
  return d;
}

// Every (parent, child) edge with equal levels: what AddNormal may split.
std::set<std::pair<int, int>> add_normal_oracle(const MissionGraph& g) {
  std::set<std::pair<int, int>> out;
  auto d = bfs_depths(g);
  for (const auto& u : g.nodes())
    for (const auto& v : g.nodes()) {
      if (u.id == v.id || !g.has_edge(u.id, v.id)) continue;
      if (d.at(u.id) < d.at(v.id) && u.access_level == v.access_level)
        out.insert({u.id, v.id});
    }
  return out;
}

MissionGraph chain(std::initializer_list<std::pair<NodeType, int>> nodes) {
  MissionGraph g;
  int id = 0;
  for (auto [t, level] : nodes) g.put_node({id++, t, level});
  for (int i = 0; i + 1 < id; ++i) g.add_edge(i, i + 1);
  return g;
}

}  // namespace

TEST(InitialGraph, TwoConnectedLevelZeroNodes) {
  MissionGraph g = initial_graph();
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.edges().size(), 1u);
  EXPECT_EQ(g.count(NodeType::Start), 1);
  EXPECT_EQ(g.count(NodeType::Exit), 1);
  for (const auto& n : g.nodes()) EXPECT_EQ(n.access_level, 0);
  EXPECT_TRUE(validate_mission_graph(g).empty());
  EXPECT_EQ(initial_graph(), initial_graph());
}

TEST(FindMatches, AddNormalOnInitialGraphMatchesTheOnlyEdge) {
  auto m = find_matches(initial_graph(), rule("AddNormal"));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(add_normal_oracle(initial_graph()).size(), 1u);
}

TEST(FindMatches, KeyPatternHasNoMatchWithoutKeys) {
  GraphRule r;
  r.name = "NeedsKey";
  r.lhs_nodes = {{1, NodeType::Key, {}, {}}};
  EXPECT_TRUE(find_matches(initial_graph(), r).empty());
}

TEST(FindMatches, WildcardMatchesEveryNode) {
  GraphRule any;
  any.name = "Any";
  any.lhs_nodes = {{1, std::nullopt, {}, {}}};
  MissionGraph g = chain({{NodeType::Start, 0}, {NodeType::Normal, 0}, {NodeType::Exit, 0}});
  auto m = find_matches(g, any);
  ASSERT_EQ(m.size(), 3u);
  std::set<NodeType> types;
  for (const auto& x : m) types.insert(g.node(x[1]).type);
  EXPECT_EQ(types, (std::set<NodeType>{NodeType::Start, NodeType::Normal, NodeType::Exit}));
}

TEST(FindMatches, OrderIsCanonical) {
  MissionGraph g = chain({{NodeType::Start, 0}, {NodeType::Normal, 0}, {NodeType::Normal, 0},
                          {NodeType::Exit, 0}});
  auto m = find_matches(g, rule("AddNormal"));
  for (std::size_t i = 1; i < m.size(); ++i) EXPECT_LT(m[i - 1].assignment, m[i].assignment);
}

TEST(FindMatches, AgreesWithBruteForceOnGeneratedGraphs) {
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    for (int floor : {0, 7, 12, 20}) {
      MissionGraph g = generate_mission_graph(floor, seed, content().recipes, content().rules);
      std::set<std::pair<int, int>> found;
      for (const auto& m : find_matches(g, rule("AddNormal"))) found.insert({m[1], m[2]});
      EXPECT_EQ(found, add_normal_oracle(g)) << "seed " << seed << " floor " << floor;
    }
}

TEST(ApplyRule, AddNormalSplitsTheEdge) {
  MissionGraph g0 = initial_graph();
  auto m = find_matches(g0, rule("AddNormal"));
  MissionGraph g = apply_rule(g0, rule("AddNormal"), m.at(0));
  EXPECT_EQ(g.size(), 3u);
  EXPECT_EQ(g.edges().size(), 2u);
  EXPECT_EQ(g.count(NodeType::Normal), 1);
  const int normal = *g.find_type(NodeType::Normal);
  EXPECT_TRUE(g.has_edge(*g.find_type(NodeType::Start), normal));
  EXPECT_TRUE(g.has_edge(normal, *g.find_type(NodeType::Exit)));
  for (const auto& n : g.nodes()) EXPECT_EQ(n.access_level, 0);
  EXPECT_EQ(g0, initial_graph());  // input untouched
}

TEST(ApplyRule, AddKeyLockRaisesTheFarSide) {
  MissionGraph g0 = initial_graph();
  auto m = find_matches(g0, rule("AddKeyLock"));
  ASSERT_FALSE(m.empty());
  MissionGraph g = apply_rule(g0, rule("AddKeyLock"), m[0]);
  const int start = *g.find_type(NodeType::Start);
  const int key = *g.find_type(NodeType::Key);
  const int lock = *g.find_type(NodeType::Lock);
  const int exit = *g.find_type(NodeType::Exit);
  EXPECT_TRUE(g.has_edge(start, key));
  EXPECT_EQ(g.node(key).access_level, 0);
  EXPECT_TRUE(g.has_edge(start, lock));
  EXPECT_TRUE(g.has_edge(lock, exit));
  EXPECT_FALSE(g.has_edge(start, exit));
  EXPECT_EQ(g.node(lock).access_level, 1);
  EXPECT_EQ(g.node(exit).access_level, 1);
  EXPECT_TRUE(validate_mission_graph(g).empty());
}

TEST(ApplyRule, ForeignMatchIsStale) {
  MissionGraph other = chain({{NodeType::Start, 0}, {NodeType::Normal, 0}, {NodeType::Exit, 0}});
  auto m = find_matches(other, rule("AddNormal"));
  ASSERT_FALSE(m.empty());
  try {
    apply_rule(initial_graph(), rule("AddNormal"), m.back());
    FAIL() << "expected StaleMatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StaleMatch);
  }
}

TEST(Validate, LockWithoutKeyIsMissingKey) {
  MissionGraph g = chain({{NodeType::Start, 0}, {NodeType::Lock, 1}, {NodeType::Exit, 1}});
  EXPECT_TRUE(has_violation(validate_mission_graph(g), ViolationKind::MissingKey));
}

TEST(Validate, TwoLocksOneKeyLeavesExitUnreachable) {
  // Start - Lock(1) - Normal(1) - Lock(2) - Exit(2), one Key beside Start.
  MissionGraph g = chain({{NodeType::Start, 0}, {NodeType::Lock, 1}, {NodeType::Normal, 1},
                          {NodeType::Lock, 2}, {NodeType::Exit, 2}});
  g.put_node({5, NodeType::Key, 0});
  g.add_edge(0, 5);
  auto v = validate_mission_graph(g);
  EXPECT_TRUE(has_violation(v, ViolationKind::ExitUnreachable)) << describe(v);
  EXPECT_FALSE(has_violation(v, ViolationKind::MissingKey)) << describe(v);
  // A second key makes it solvable.
  g.put_node({6, NodeType::Key, 0});
  g.add_edge(0, 6);
  EXPECT_TRUE(validate_mission_graph(g).empty()) << describe(validate_mission_graph(g));
}

TEST(Validate, StructuralViolations) {
  MissionGraph g = initial_graph();
  g.add_edge_raw(0, 0);
  EXPECT_TRUE(has_violation(validate_mission_graph(g), ViolationKind::SelfLoop));

  MissionGraph d = initial_graph();
  d.add_edge_raw(0, 1);
  EXPECT_TRUE(has_violation(validate_mission_graph(d), ViolationKind::DuplicateEdge));

  MissionGraph c = initial_graph();
  c.put_node({2, NodeType::Normal, 0});
  EXPECT_TRUE(has_violation(validate_mission_graph(c), ViolationKind::Disconnected));

  MissionGraph s;
  s.put_node({0, NodeType::Exit, 0});
  EXPECT_TRUE(has_violation(validate_mission_graph(s), ViolationKind::MissingStart));

  MissionGraph big = initial_graph();
  for (int i = 2; i < 18; ++i) {
    big.put_node({i, NodeType::Normal, 0});
    big.add_edge(i - 1, i);
  }
  EXPECT_TRUE(has_violation(validate_mission_graph(big), ViolationKind::TooManyNodes));
}

TEST(Validate, DegreeAboveFourCannotBeEmbedded) {
  MissionGraph g = initial_graph();
  for (int i = 2; i < 6; ++i) {
    g.put_node({i, NodeType::Normal, 0});
    g.add_edge(0, i);
  }
  EXPECT_TRUE(has_violation(validate_mission_graph(g), ViolationKind::DegreeTooHigh));
  g.remove_edge(0, 5);
  g.add_edge(4, 5);
  EXPECT_TRUE(validate_mission_graph(g).empty());
}

TEST(Generate, FloorZeroIsSmallAndLockFree) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    MissionGraph g = generate_mission_graph(0, seed, content().recipes, content().rules);
    EXPECT_LE(g.size(), 4u);
    EXPECT_EQ(g.count(NodeType::Lock), 0);
  }
}

TEST(Generate, FloorTenHasKeysAndLocks) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    MissionGraph g = generate_mission_graph(10, seed, content().recipes, content().rules);
    EXPECT_GE(g.count(NodeType::Key), 1);
    EXPECT_GE(g.count(NodeType::Lock), 1);
  }
}

TEST(Generate, DeterministicAndOrderIndependent) {
  const auto& c = content();
  std::vector<std::string> forward;
  for (int f = 0; f < 25; ++f)
    forward.push_back(to_json(generate_mission_graph(f, 31337, c.recipes, c.rules)).dump());
  for (int f = 24; f >= 0; --f)
    EXPECT_EQ(to_json(generate_mission_graph(f, 31337, c.recipes, c.rules)).dump(), forward[f]);
}

TEST(Generate, SerializationRoundTrips) {
  MissionGraph g = generate_mission_graph(17, 5, content().recipes, content().rules);
  EXPECT_EQ(mission_graph_from_json(to_json(g)), g);
}

// Closure: random rule applications on generated graphs never break a mission
// invariant. The only rejection allowed is the node-degree bound the grid
// embedding adds.
TEST(Generate, RuleApplicationsStayValid) {
  const auto& c = content();
  std::vector<const GraphRule*> rules;
  for (const auto& [name, r] : c.rules) rules.push_back(&r);
  Rng rng(2718);
  int applied = 0, rejected = 0;
  for (int run = 0; run < 10000; ++run) {
    MissionGraph g = generate_mission_graph(static_cast<int>(rng.below(25)), rng.below(1000),
                                            c.recipes, c.rules);
    const GraphRule& r = *rules[rng.below(rules.size())];
    auto ms = find_matches(g, r);
    if (ms.empty() || g.size() + r.fresh_nodes.size() > 16u) continue;
    try {
      MissionGraph out = apply_rule(g, r, ms[rng.below(ms.size())]);
      ASSERT_TRUE(validate_mission_graph(out).empty());
      ASSERT_TRUE(detail::exit_reachable(out));
      ++applied;
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::InvariantViolation);
      const std::string what = e.what();
      EXPECT_NE(what.find("DegreeTooHigh"), std::string::npos) << what;
      for (const char* other : {"MissingKey", "ExitUnreachable", "LevelJump", "LevelInconsistent",
                                "Disconnected", "TooManyNodes"})
        EXPECT_EQ(what.find(other), std::string::npos) << what;
      ++rejected;
    }
  }
  EXPECT_GT(applied, 5000);
  EXPECT_LT(rejected, applied);
}

TEST(Generate, ExpectedSizeGrowsWithBand) {
  const auto& c = content();
  double previous = 0.0;
  for (auto [first, last] : {std::pair{0, 4}, {5, 9}, {10, 14}, {15, 24}}) {
    double total = 0;
    int n = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
      for (int f = first; f <= last; ++f, ++n)
        total += generate_mission_graph(f, seed, c.recipes, c.rules).size();
    const double mean = total / n;
    EXPECT_GE(mean, previous) << "band " << first;
    previous = mean;
  }
}

TEST(Recipes, DefaultTablePartitionsFloors) {
  const auto& t = content().recipes;
  EXPECT_NO_THROW(check_recipe_table(t, content().rules));
  EXPECT_EQ(t.band_for(0)->recipe.name, "entry");
  EXPECT_EQ(t.band_for(5)->recipe.name, "locks");
  EXPECT_EQ(t.band_for(10)->recipe.name, "puzzles");
  EXPECT_EQ(t.band_for(24)->recipe.name, "gauntlet");
  EXPECT_EQ(t.max_nodes, 16);
}

TEST(Recipes, RejectsUnknownRulesAndGaps) {
  RecipeTable bad = content().recipes;
  bad.bands[0].recipe.steps.push_back({"NoSuchRule", 0, 1});
  EXPECT_THROW(check_recipe_table(bad, content().rules), Error);
  RecipeTable gap = content().recipes;
  gap.bands[1].first_floor += 1;
  EXPECT_THROW(check_recipe_table(gap, content().rules), Error);
}

TEST(Recipes, JsonRoundTrip) {
  const auto& t = content().recipes;
  EXPECT_EQ(to_json(recipe_table_from_json(to_json(t))), to_json(t));
  for (const auto& [name, r] : content().rules)
    EXPECT_EQ(to_json(rule_from_json(to_json(r))), to_json(r)) << name;
}
