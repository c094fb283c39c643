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
#include "towerforge/layout.hpp"

using namespace towerforge;

namespace {

const GeneratorContent& content() { return *default_content(); }

MissionGraph mission(int floor, std::uint64_t seed) {
  return generate_mission_graph(floor, seed, content().recipes, content().rules);
}

LayoutGrid layout(const MissionGraph& g, int floor, std::uint64_t seed) {
  Rng r = floor_stream(seed, floor, "layout");
  return graph_to_layout(g, r);
}

bool is_room(const LayoutGrid& g, int c) { return g.slot(c) && !g.slot(c)->connector; }

// Mission edges recovered from the grid: two rooms are linked when a door path
// joins them through connector cells only.
std::set<std::pair<int, int>> contracted_edges(const LayoutGrid& g) {
  std::set<std::pair<int, int>> out;
  for (int c = 0; c < g.cell_count(); ++c) {
    if (!is_room(g, c)) continue;
    std::set<int> seen{c};
    std::deque<int> q{c};
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (Side s : kSides) {
        int n = g.neighbor(u, s);
        if (n < 0 || !g.door(u, n) || !seen.insert(n).second) continue;
        if (is_room(g, n)) {
          int a = g.slot(c)->node_id, b = g.slot(n)->node_id;
          out.insert({std::min(a, b), std::max(a, b)});
        } else {
          q.push_back(n);
        }
      }
    }
  }
  return out;
}

std::set<std::pair<int, int>> mission_edges(const MissionGraph& g) {
  std::set<std::pair<int, int>> out;
  for (auto [a, b] : g.edges()) out.insert({std::min(a, b), std::max(a, b)});
  return out;
}

// Cells reachable from Start using only doors the predicate allows.
std::set<int> reachable(const LayoutGrid& g, auto allowed) {
  std::set<int> seen{g.start_cell()};
  std::deque<int> q{g.start_cell()};
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (Side s : kSides) {
      int n = g.neighbor(u, s);
      if (n < 0) continue;
      auto d = g.door(u, n);
      if (d && allowed(*d) && seen.insert(n).second) q.push_back(n);
    }
  }
  return seen;
}

}  // namespace

TEST(Layout, InitialGraphIsTwoCellsWithStairsInExit) {
  LayoutGrid g = layout(initial_graph(), 0, 1);
  EXPECT_EQ(g.width() * g.height(), 2);
  ASSERT_EQ(g.doors().size(), 1u);
  EXPECT_EQ(g.doors().begin()->second, DoorKind::open());
  ASSERT_TRUE(g.slot(g.stairs_cell()));
  EXPECT_EQ(g.slot(g.stairs_cell())->kind, RoomKind::Exit);
  EXPECT_TRUE(validate_layout(g, initial_graph()).empty());
}

TEST(Layout, TooManyRoomsFails) {
  MissionGraph g = initial_graph();
  for (int i = 2; i < 17; ++i) {
    g.put_node({i, NodeType::Normal, 0});
    g.add_edge(i == 2 ? 0 : i - 1, i);
  }
  ASSERT_EQ(g.size(), 17u);
  Rng r(3);
  try {
    graph_to_layout(g, r);
    FAIL() << "expected GenerationFailed";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GenerationFailed);
  }
}

TEST(Layout, EmbeddingPreservesTheMissionGraph) {
  for (std::uint64_t seed = 0; seed < 60; ++seed)
    for (int floor : {0, 6, 11, 18, 24}) {
      MissionGraph m = mission(floor, seed);
      LayoutGrid g = layout(m, floor, seed);
      EXPECT_TRUE(validate_layout(g, m).empty()) << "seed " << seed << " floor " << floor;
      EXPECT_LE(g.width(), kMaxGridSide);
      EXPECT_LE(g.height(), kMaxGridSide);
      EXPECT_EQ(contracted_edges(g), mission_edges(m)) << "seed " << seed << " floor " << floor;
      for (const auto& n : m.nodes()) {
        auto c = g.cell_of_node(n.id);
        ASSERT_TRUE(c);
        EXPECT_EQ(g.slot(*c)->kind, n.type);
        EXPECT_EQ(g.slot(*c)->access_level, n.access_level);
      }
      EXPECT_EQ(g.stairs_cell(), *g.cell_of_node(*m.find_type(NodeType::Exit)));
    }
}

TEST(Layout, LockedDoorLevelMatchesTheRoomBehindIt) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    MissionGraph m = mission(10, seed);
    LayoutGrid g = layout(m, 10, seed);
    int locked = 0;
    for (const auto& [key, kind] : g.doors()) {
      if (kind.type != DoorKind::Type::Locked) continue;
      ++locked;
      const auto& a = g.slot(key.first);
      const auto& b = g.slot(key.second);
      ASSERT_TRUE(a && b);
      const auto& far = a->access_level > b->access_level ? *a : *b;
      const auto& near = a->access_level > b->access_level ? *b : *a;
      EXPECT_EQ(far.kind, RoomKind::Lock);
      EXPECT_EQ(kind.level, far.access_level);
      EXPECT_EQ(far.access_level, near.access_level + 1);
    }
    EXPECT_EQ(locked, m.count(NodeType::Lock)) << "seed " << seed;
  }
}

TEST(Layout, LocksSeparateExitFromStart) {
  for (std::uint64_t seed = 0; seed < 60; ++seed)
    for (int floor : {5, 12, 20}) {
      MissionGraph m = mission(floor, seed);
      LayoutGrid g = layout(m, floor, seed);
      const int exit_level = m.node(*m.find_type(NodeType::Exit)).access_level;
      for (int k = 1; k <= exit_level; ++k) {
        auto cells = reachable(g, [k](const DoorKind& d) {
          return !(d.type == DoorKind::Type::Locked && d.level >= k);
        });
        EXPECT_FALSE(cells.count(g.stairs_cell())) << "seed " << seed << " level " << k;
      }
      auto all = reachable(g, [](const DoorKind&) { return true; });
      EXPECT_TRUE(all.count(g.stairs_cell()));
    }
}

TEST(Layout, DeterministicPerSeed) {
  MissionGraph m = mission(14, 99);
  EXPECT_EQ(layout(m, 14, 99), layout(m, 14, 99));
  LayoutGrid g = layout(m, 14, 99);
  EXPECT_EQ(layout_from_json(to_json(g)), g);
}

TEST(SolveFloor, TwoRoomsTakeOneTransition) {
  LayoutGrid g(2, 1);
  g.slot(0) = RoomSlot{0, RoomKind::Start, 0, false, {-1, -1}};
  g.slot(1) = RoomSlot{1, RoomKind::Exit, 0, false, {-1, -1}};
  g.set_door(0, 1, DoorKind::open());
  g.set_stairs_cell(1);
  auto s = solve_floor(g);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->transitions(), 1);
  g.set_stairs_cell(-1);
  EXPECT_FALSE(solve_floor(g));
}

TEST(SolveFloor, KeyBehindItsOwnLockIsUnsolvable) {
  // Start | Lock | Exit on the top row, a Key room below.
  LayoutGrid g(3, 2);
  g.slot(0) = RoomSlot{0, RoomKind::Start, 0, false, {-1, -1}};
  g.slot(1) = RoomSlot{1, RoomKind::Lock, 1, false, {-1, -1}};
  g.slot(2) = RoomSlot{2, RoomKind::Exit, 1, false, {-1, -1}};
  g.set_door(0, 1, DoorKind::locked(1));
  g.set_door(1, 2, DoorKind::open());
  g.set_stairs_cell(2);
  LayoutGrid behind = g;
  behind.slot(4) = RoomSlot{3, RoomKind::Key, 1, false, {-1, -1}};
  behind.set_door(1, 4, DoorKind::open());
  EXPECT_FALSE(solve_floor(behind));

  LayoutGrid before = g;
  before.slot(3) = RoomSlot{3, RoomKind::Key, 0, false, {-1, -1}};
  before.set_door(0, 3, DoorKind::open());
  auto s = solve_floor(before);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->transitions(), 4);  // key room and back, lock, exit
  int keys = 0, opened = 0;
  for (const auto& st : s->steps) {
    keys += st.picked_key;
    opened += st.opened_door;
  }
  EXPECT_EQ(keys, 1);
  EXPECT_EQ(opened, 1);
}

TEST(SolveFloor, EveryGeneratedLayoutIsSolvable) {
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    for (int floor = 0; floor < 25; floor += 3) {
      MissionGraph m = mission(floor, seed);
      EXPECT_TRUE(solve_floor(layout(m, floor, seed))) << "seed " << seed << " floor " << floor;
    }
}
