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

// Built-in rule library, recipe table and room templates. The same documents
// can be dumped with `towerforge defaults` and edited as files.

#include <memory>
#include <string_view>

#include "json.hpp"
#include "towerforge/grammar.hpp"
#include "towerforge/room.hpp"

namespace towerforge {

inline constexpr std::string_view kDefaultRulesJson = R"json({
  "rules": [
    {
      "name": "AddNormal",
      "lhs": {"nodes": [{"map": 1, "type": "*", "level": "any"},
                        {"map": 2, "type": "*", "level": {"same_as": 1}}],
              "edges": [[1, 2]]},
      "rhs": {"nodes": [{"map": 3, "type": "Normal", "level": {"of": 1, "plus": 0}}],
              "edges": [[1, 3], [3, 2]]}
    },
    {
      "name": "AddKeyLock",
      "lhs": {"nodes": [{"map": 1, "type": "*", "level": "any"},
                        {"map": 2, "type": "*", "level": {"same_as": 1}}],
              "edges": [[1, 2]]},
      "rhs": {"nodes": [{"map": 3, "type": "Key", "level": {"of": 1, "plus": 0}},
                        {"map": 4, "type": "Lock", "level": {"of": 1, "plus": 1}}],
              "edges": [[1, 3], [1, 4], [4, 2]],
              "raise": [{"map": 2, "by": 1}]}
    },
    {
      "name": "AddPuzzle",
      "lhs": {"nodes": [{"map": 1, "type": "*", "level": "any"},
                        {"map": 2, "type": "*", "level": "any"}],
              "edges": [[1, 2]]},
      "rhs": {"nodes": [{"map": 3, "type": "Puzzle", "level": {"of": 1, "plus": 0}}],
              "edges": [[1, 3], [3, 2]]}
    },
    {
      "name": "AddNormalKey",
      "lhs": {"nodes": [{"map": 1, "type": "*", "level": "any", "exclude": ["Exit"]}],
              "edges": []},
      "rhs": {"nodes": [{"map": 2, "type": "Normal", "level": {"of": 1, "plus": 0}},
                        {"map": 3, "type": "Key", "level": {"of": 1, "plus": 0}}],
              "edges": [[1, 2], [2, 3]]}
    }
  ]
})json";

inline constexpr std::string_view kDefaultRecipesJson = R"json({
  "max_nodes": 16,
  "bands": [
    {"floors": [0, 4], "recipe": "entry",
     "steps": [{"rule": "AddNormal", "min": 1, "max": 2}]},
    {"floors": [5, 9], "recipe": "locks",
     "steps": [{"rule": "AddNormal", "min": 1, "max": 2},
               {"rule": "AddKeyLock", "min": 1, "max": 1},
               {"rule": "AddNormal", "min": 0, "max": 1}]},
    {"floors": [10, 14], "recipe": "puzzles",
     "steps": [{"rule": "AddNormal", "min": 1, "max": 2},
               {"rule": "AddKeyLock", "min": 1, "max": 2},
               {"rule": "AddPuzzle", "min": 1, "max": 1},
               {"rule": "AddNormal", "min": 0, "max": 2}]},
    {"floors": [15, 99], "recipe": "gauntlet",
     "steps": [{"rule": "AddNormal", "min": 1, "max": 2},
               {"rule": "AddKeyLock", "min": 2, "max": 3},
               {"rule": "AddPuzzle", "min": 1, "max": 2},
               {"rule": "AddNormalKey", "min": 0, "max": 1},
               {"rule": "AddNormal", "min": 0, "max": 2}]}
  ]
})json";

// Legend: . Floor  # Wall  P Pit  S Spawn  X Stairs  K KeyItem  B Block
//         G BlockGoal  O TimeOrb  E EnemySpawn  T PlatformTrack
// Cells next to a door midpoint are kept concrete and walkable.
inline constexpr std::string_view kDefaultTemplatesJson = R"json({
  "categories": {
    "o": {"Floor": 0.8, "TimeOrb": 0.2},
    "p": {"Floor": 0.8, "Pit": 0.2},
    "w": {"Floor": 0.75, "Wall": 0.25},
    "e": {"Floor": 0.85, "EnemySpawn": 0.15},
    "h": {"Floor": 0.6, "Pit": 0.25, "TimeOrb": 0.15}
  },
  "templates": [
    {"id": "start-3a", "kinds": ["Start"], "rows": ["o.o", ".S.", "o.o"]},
    {"id": "start-3b", "kinds": ["Start"], "rows": ["w.o", ".S.", "o.w"]},
    {"id": "start-4a", "kinds": ["Start"], "rows": ["o..o", "..S.", ".w..", "o..o"]},
    {"id": "start-4b", "kinds": ["Start"], "rows": [".o.w", ".S..", "..p.", "w..o"]},
    {"id": "start-5a", "kinds": ["Start"], "rows": ["o...o", ".w.w.", "..S..", ".w.w.", "o...o"]},
    {"id": "start-5b", "kinds": ["Start"], "rows": [".p.po", ".....", "..S..", ".....", "op.p."]},

    {"id": "exit-3a", "kinds": ["Exit"], "rows": ["o.o", ".X.", "o.o"]},
    {"id": "exit-3b", "kinds": ["Exit"], "rows": ["p.o", ".X.", "o.p"]},
    {"id": "exit-4a", "kinds": ["Exit"], "rows": ["o..w", ".X..", "....", "w..o"]},
    {"id": "exit-4b", "kinds": ["Exit"], "rows": ["...o", ".XP.", ".P..", "o..."]},
    {"id": "exit-5a", "kinds": ["Exit"], "rows": ["ow.wo", ".....", ".pXp.", ".....", "ow.wo"]},
    {"id": "exit-5b", "kinds": ["Exit"], "rows": ["e...o", ".###.", "..X..", ".#.#.", "o...e"]},

    {"id": "hall-3a", "kinds": ["Normal", "Lock"], "rows": ["o.o", ".P.", "o.o"]},
    {"id": "hall-3b", "kinds": ["Normal", "Lock"], "rows": ["e.w", "...", "w.o"]},
    {"id": "hall-4a", "kinds": ["Normal", "Lock"], "rows": ["o..p", "....", ".pp.", "p..o"]},
    {"id": "hall-4b", "kinds": ["Normal", "Lock"], "rows": ["o.T.", "..T.", "..Te", "..To"]},
    {"id": "hall-5a", "kinds": ["Normal", "Lock"], "rows": [".e...", ".#.#.", "....o", ".#.#.", "o..e."]},
    {"id": "hall-5b", "kinds": ["Normal", "Lock"], "rows": ["oh.ho", ".....", ".TTT.", ".....", "oh.ho"]},
    {"id": "hall-5c", "kinds": ["Normal", "Lock"], "rows": ["op.po", "h...h", ".....", "h...h", "op.po"]},

    {"id": "key-3a", "kinds": ["Key"], "rows": ["o.o", ".K.", "o.o"]},
    {"id": "key-3b", "kinds": ["Key"], "rows": ["K.p", "...", "p.o"]},
    {"id": "key-4a", "kinds": ["Key"], "rows": ["K..p", "....", ".p..", "p..o"]},
    {"id": "key-4b", "kinds": ["Key"], "rows": ["o.e.", "..#.", ".#K.", "o..."]},
    {"id": "key-5a", "kinds": ["Key"], "rows": ["o...o", ".p.p.", "..K..", ".p.p.", "o...o"]},
    {"id": "key-5b", "kinds": ["Key"], "rows": [".#.#K", ".#...", ".e.#.", ".....", "o...o"]},

    {"id": "puzzle-3a", "kinds": ["Puzzle"], "rows": ["G..", ".B.", "..."]},
    {"id": "puzzle-3b", "kinds": ["Puzzle"], "rows": ["..G", ".B.", "w.."]},
    {"id": "puzzle-4a", "kinds": ["Puzzle"], "rows": ["....", ".B..", "..G.", "...."]},
    {"id": "puzzle-4b", "kinds": ["Puzzle"], "rows": ["w..G", ".B..", "....", "..w."]},
    {"id": "puzzle-5a", "kinds": ["Puzzle"], "rows": [".....", ".B...", "..w..", "...G.", "....."]},
    {"id": "puzzle-5b", "kinds": ["Puzzle"], "rows": ["G...w", ".....", "..B..", ".....", "w...."]}
  ]
})json";

inline const RuleLibrary& default_rules() {
  static const RuleLibrary rules =
      rule_library_from_json(nlohmann::json::parse(kDefaultRulesJson));
  return rules;
}

inline const RecipeTable& default_recipes() {
  static const RecipeTable table = [] {
    RecipeTable t = recipe_table_from_json(nlohmann::json::parse(kDefaultRecipesJson));
    check_recipe_table(t, default_rules());
    return t;
  }();
  return table;
}

inline const TemplateLibrary& default_templates() {
  static const TemplateLibrary lib = load_templates(kDefaultTemplatesJson);
  return lib;
}

// Everything floor generation reads. Immutable once built and shared by
// pointer, so simulators and worker threads can hold it cheaply.
struct GeneratorContent {
  RuleLibrary rules;
  RecipeTable recipes;
  TemplateLibrary templates;
};

inline std::shared_ptr<const GeneratorContent> default_content() {
  static const auto content = std::make_shared<const GeneratorContent>(
      GeneratorContent{default_rules(), default_recipes(), default_templates()});
  return content;
}

}  // namespace towerforge
