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

#include <cmath>
#include <deque>
#include <set>

#include "towerforge/default_content.hpp"
#include "towerforge/room.hpp"

using namespace towerforge;

namespace {

const TemplateLibrary& lib() { return default_templates(); }

RoomRequirements doors(std::initializer_list<Side> sides) {
  RoomRequirements r;
  for (Side s : sides) r.doors[static_cast<int>(s)] = true;
  if (sides.size()) r.entry = *sides.begin();
  return r;
}

RoomInstance from_rows(RoomKind kind, const std::vector<std::string>& rows,
                       std::initializer_list<Side> sides) {
  RoomInstance r(static_cast<int>(rows.size()), kind);
  for (int y = 0; y < r.size(); ++y)
    for (int x = 0; x < r.size(); ++x) r.set({x + 1, y + 1}, *tile_from_char(rows[y][x]));
  for (Side s : sides) r.carve_door(s);
  if (sides.size()) r.set_entry(*sides.begin());
  return r;
}

// Binomial(n, p) CDF, summed in log space.
double binom_cdf(int k, int n, double p) {
  double total = 0;
  for (int i = 0; i <= k; ++i)
    total += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                      i * std::log(p) + (n - i) * std::log1p(-p));
  return total;
}

// Flood fill with one-tile pit jumps, written against the raw tile array.
std::vector<bool> flood(const RoomInstance& r, Pos from) {
  const int e = r.extent();
  std::vector<bool> seen(e * e, false);
  auto ok = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= e || y >= e) return false;
    TileType t = r.tiles()[y * e + x];
    if (t == TileType::Wall || t == TileType::Pit) return false;
    const bool border = x == 0 || y == 0 || x == e - 1 || y == e - 1;
    return !border || t == TileType::DoorAnchor;
  };
  std::deque<std::pair<int, int>> q{{from.x, from.y}};
  seen[from.y * e + from.x] = true;
  const int ddx[] = {0, 1, 0, -1}, ddy[] = {-1, 0, 1, 0};
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    for (int d = 0; d < 4; ++d) {
      int nx = x + ddx[d], ny = y + ddy[d];
      if (!ok(nx, ny)) {
        const bool pit = nx >= 0 && ny >= 0 && nx < e && ny < e &&
                         r.tiles()[ny * e + nx] == TileType::Pit;
        if (!pit) continue;
        nx += ddx[d];
        ny += ddy[d];
        if (!ok(nx, ny)) continue;
      }
      if (!seen[ny * e + nx]) {
        seen[ny * e + nx] = true;
        q.push_back({nx, ny});
      }
    }
  }
  return seen;
}

}  // namespace

TEST(Templates, DefaultLibraryCoversEveryKindAndSize) {
  for (RoomKind k : kAllNodeTypes)
    for (int size = 3; size <= 5; ++size)
      EXPECT_GE(lib().candidates(k, size).size(), 2u) << to_string(k) << " " << size;
}

TEST(Templates, RejectsBadGrids) {
  auto doc = nlohmann::json::parse(kDefaultTemplatesJson);
  auto big = doc;
  big["templates"][0]["rows"] = {"......", "......", "..S...", "......", "......", "......"};
  EXPECT_THROW(
      try { load_templates(big); } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(std::string(e.what()).find("templates[0].rows"), std::string::npos) << e.what();
        throw;
      },
      Error);
  auto dup = doc;
  dup["templates"][1]["id"] = dup["templates"][0]["id"];
  EXPECT_THROW(load_templates(dup), Error);
  auto ragged = doc;
  ragged["templates"][0]["rows"][1] = "..S";
  ragged["templates"][0]["rows"][0] = "o.";
  EXPECT_THROW(load_templates(ragged), Error);
  auto spawn = doc;
  spawn["templates"][6]["rows"][0] = "oSo";  // exit-3a
  EXPECT_THROW(load_templates(spawn), Error);
}

TEST(Templates, MissingKindSizeIsReported) {
  auto doc = nlohmann::json::parse(kDefaultTemplatesJson);
  nlohmann::json kept = nlohmann::json::array();
  for (const auto& t : doc["templates"])
    if (t["id"].get<std::string>().rfind("key-4", 0) != 0) kept.push_back(t);
  doc["templates"] = kept;
  try {
    load_templates(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTemplate);
  }
}

TEST(Templates, JsonRoundTrip) {
  EXPECT_EQ(to_json(load_templates(to_json(lib()))), to_json(lib()));
}

TEST(Instantiate, KeyRoomHasExactlyOneKey) {
  for (const RoomTemplate* t : lib().candidates(RoomKind::Key, 4))
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      RoomInstance r = instantiate_room(*t, RoomKind::Key, doors({Side::West}), lib(), rng);
      EXPECT_EQ(r.count(TileType::KeyItem), 1);
      EXPECT_EQ(r.count(TileType::DoorAnchor), 1);
      EXPECT_EQ(r.extent(), 6);
      EXPECT_EQ(r.door_tile(Side::West), (Pos{0, 2}));
    }
}

TEST(Instantiate, SameStreamSameRoom) {
  const RoomTemplate& t = *lib().candidates(RoomKind::Normal, 5)[0];
  Rng a(77), b(77);
  EXPECT_EQ(instantiate_room(t, RoomKind::Normal, doors({Side::North, Side::East}), lib(), a),
            instantiate_room(t, RoomKind::Normal, doors({Side::North, Side::East}), lib(), b));
}

TEST(Instantiate, WrongKindIsRejected) {
  Rng rng(1);
  const RoomTemplate& t = *lib().candidates(RoomKind::Start, 3)[0];
  try {
    instantiate_room(t, RoomKind::Exit, doors({Side::North}), lib(), rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InstantiationFailed);
  }
}

// Four corner cells drawn from {Floor 0.8, Pit 0.2}; 100 rooms give 400 draws.
TEST(Instantiate, CategoryDrawsFollowTheirWeights) {
  std::map<char, Category> cats{{'c', {{TileType::Floor, TileType::Pit}, {0.8, 0.2}}}};
  RoomTemplate t;
  t.id = "corners";
  t.size = 5;
  t.kinds = {RoomKind::Normal};
  const std::vector<std::string> rows{"c...c", ".....", ".....", ".....", "c...c"};
  for (const auto& row : rows)
    for (char ch : row) {
      CellSpec s;
      if (ch == 'c') {
        s.is_category = true;
        s.category = 'c';
      }
      t.cells.push_back(s);
    }
  TemplateLibrary custom(cats, {t});
  const int n = 400;
  int pits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 7919 + 13);
    RoomInstance r = instantiate_room(t, RoomKind::Normal, doors({Side::South}), custom, rng);
    pits += r.count(TileType::Pit);
  }
  // Exact two-sided acceptance region at alpha = 1e-6.
  int lo = 0, hi = n;
  while (binom_cdf(lo, n, 0.2) < 0.5e-6) ++lo;
  while (1.0 - binom_cdf(hi - 1, n, 0.2) < 0.5e-6) --hi;
  EXPECT_GE(pits, lo);
  EXPECT_LE(pits, hi);
  EXPECT_GE(pits, 0.1 * n);
  EXPECT_LE(pits, 0.3 * n);
}

TEST(Puzzle, StraightPushIsSolvable) {
  RoomInstance r = from_rows(RoomKind::Puzzle, {".G.", ".B.", "..."}, {Side::South});
  auto w = puzzle_witness(r);
  ASSERT_TRUE(w);
  EXPECT_EQ(*w, (std::vector<Side>{Side::North, Side::North}));
  EXPECT_TRUE(check_room(r).empty());
}

TEST(Puzzle, CornerBlockIsDeadlocked) {
  RoomInstance r = from_rows(RoomKind::Puzzle, {"B..", "...", "..G"}, {Side::South});
  EXPECT_FALSE(check_puzzle_solvable(r));
  EXPECT_FALSE(check_room(r).empty());
}

TEST(Puzzle, PitPushDestroysTheBlock) {
  // The only push line crosses a pit.
  RoomInstance r = from_rows(RoomKind::Puzzle, {"#G#", "#P#", "#B#"}, {Side::South});
  EXPECT_FALSE(check_puzzle_solvable(r));
}

TEST(Puzzle, NonPuzzleRoomsAreRejected) {
  RoomInstance r = from_rows(RoomKind::Normal, {"...", "...", "..."}, {Side::South});
  try {
    check_puzzle_solvable(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotAPuzzleRoom);
  }
}

TEST(Puzzle, EveryShippedPuzzleTemplateIsSolvable) {
  for (const auto& t : lib().templates()) {
    if (!t.applies_to(RoomKind::Puzzle)) continue;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      RoomInstance r = instantiate_room(t, RoomKind::Puzzle, doors({Side::West, Side::East}), lib(), rng);
      auto w = puzzle_witness(r);
      ASSERT_TRUE(w) << t.id;
      // Replay the plan by hand.
      Pos agent = puzzle_start(r), block = r.find_all(TileType::Block)[0];
      for (Side s : *w) {
        Pos n = agent.step(s);
        if (n == block) block = block.step(s);
        agent = n;
      }
      EXPECT_EQ(block, r.find_all(TileType::BlockGoal)[0]) << t.id;
    }
  }
}

// Every emitted room: door-inner tiles are clear and every non-wall, non-pit
// tile can be reached from every door.
TEST(CheckRoom, InstantiatedRoomsAreTraversable) {
  Rng pick(99);
  for (int trial = 0; trial < 600; ++trial) {
    const RoomTemplate& t = lib().templates()[pick.below(lib().templates().size())];
    RoomRequirements req;
    for (int s = 0; s < 4; ++s) req.doors[s] = pick.below(2);
    req.doors[pick.below(4)] = true;
    Rng rng(trial);
    RoomInstance r;
    try {
      r = instantiate_room(t, t.kinds[0], req, lib(), rng);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InstantiationFailed);
      continue;
    }
    for (Side s : kSides) {
      if (!r.has_door(s)) continue;
      const TileType inner = r.at(r.door_inner(s));
      EXPECT_TRUE(inner != TileType::Wall && inner != TileType::Pit && inner != TileType::Block &&
                  inner != TileType::EnemySpawn && inner != TileType::PlatformTrack)
          << t.id;
      auto seen = flood(r, r.door_tile(s));
      for (int y = 1; y <= r.size(); ++y)
        for (int x = 1; x <= r.size(); ++x) {
          TileType tt = r.at({x, y});
          if (tt == TileType::Wall || tt == TileType::Pit) continue;
          EXPECT_TRUE(seen[y * r.extent() + x]) << t.id << " (" << x << "," << y << ")";
        }
    }
  }
}

TEST(Room, JsonRoundTrip) {
  Rng rng(5);
  RoomInstance r = instantiate_room(*lib().candidates(RoomKind::Exit, 5)[0], RoomKind::Exit,
                                    doors({Side::North, Side::West}), lib(), rng);
  EXPECT_EQ(room_from_json(to_json(r)), r);
}
