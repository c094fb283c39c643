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

// The `towerforge` command line. Lives in a header so tests can drive it
// with captured streams.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "towerforge/eval.hpp"
#include "towerforge/floor.hpp"
#include "towerforge/service/client.hpp"
#include "towerforge/service/server.hpp"
#include "towerforge/simulator.hpp"

namespace towerforge::cli {

inline std::vector<VisualTheme> parse_themes(const std::string& list) {
  std::vector<VisualTheme> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    auto t = theme_from_string(name);
    if (!t) throw Error(ErrorCode::BadConfig, "unknown theme '" + name + "'");
    out.push_back(*t);
  }
  if (out.empty()) throw Error(ErrorCode::BadConfig, "no themes given");
  return out;
}

inline std::vector<int> parse_int_list(const std::string& list) {
  std::vector<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw Error(ErrorCode::BadConfig, "not an integer: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::BadConfig, "cannot write " + path);
  f << text << '\n';
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::BadConfig, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Keys for the terminal player: w/s forward/back, a/d strafe, q/e camera
// counter-clockwise/clockwise, j or space jump. A line may chord several.
inline Action parse_play_line(const std::string& line) {
  Action a;
  for (char c : line) {
    switch (c) {
      case 'w': if (a.fb == MoveFB::NoOp) a.fb = MoveFB::Forward; break;
      case 's': if (a.fb == MoveFB::NoOp) a.fb = MoveFB::Backward; break;
      case 'a': if (a.lr == MoveLR::NoOp) a.lr = MoveLR::Left; break;
      case 'd': if (a.lr == MoveLR::NoOp) a.lr = MoveLR::Right; break;
      case 'q': a.camera = Camera::CounterClockwise; break;
      case 'e': a.camera = Camera::Clockwise; break;
      case 'j': case ' ': a.jump = JumpAct::Jump; break;
      default: break;
    }
  }
  return a;
}

inline void print_play_view(const Simulator& sim, std::ostream& out) {
  const auto& st = sim.state();
  out << "floor " << st.floor_index << "  keys " << st.agent.keys << "  time "
      << st.time_remaining << "  theme " << to_string(sim.plan().theme) << '\n';
  for (const auto& row : room_text(sim.current_room(), st.agent)) out << "  " << row << '\n';
}

namespace detail {
inline std::atomic<bool> g_stop{false};
inline void on_signal(int) { g_stop = true; }
}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::istream& in = std::cin,
                    std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"TowerForge: procedural tower generator, simulator and evaluation harness",
               "towerforge"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int floor = 0;
  int floors = 0;
  std::string themes_arg = "Ancient,Moorish,Industrial,Modern,Future";
  std::string reward_mode = "sparse";
  std::string out_path;
  int workers = 1;
  int port = service::default_port();

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "tower seed (protocol seed for eval)");
    sub->add_option("--themes", themes_arg, "comma-separated theme pool");
  };

  auto* gen = app.add_subcommand("generate", "generate floor plans as canonical JSON");
  add_common(gen);
  gen->add_option("--floor", floor, "floor number")->check(CLI::Range(0, kMaxTowerFloors - 1));
  gen->add_option("--floors", floors, "emit floors 0..N-1 as an array instead")
      ->check(CLI::Range(1, kMaxTowerFloors));
  gen->add_option("--out", out_path, "output file (default stdout)");

  std::string template_file;
  auto* vt = app.add_subcommand("validate-templates", "check a room template library file");
  vt->add_option("file", template_file, "template JSON")->required();

  auto* play = app.add_subcommand("play", "play in the terminal (line per step)");
  add_common(play);
  play->add_option("--floors", floors, "tower height (max_floor)")->check(CLI::Range(1, kMaxTowerFloors));
  play->add_option("--reward-mode", reward_mode, "sparse or dense");
  std::uint64_t dynamics_seed = 0;
  play->add_option("--dynamics-seed", dynamics_seed, "dynamics seed");

  std::string protocol_name = "weak";
  std::string agent_name = "random";
  std::string remote = "127.0.0.1:7979";
  std::string fingerprint_file;
  auto* ev = app.add_subcommand("eval", "run an evaluation protocol");
  add_common(ev);
  ev->add_option("--protocol", protocol_name, "none, weak or strong");
  ev->add_option("--agent", agent_name, "random, solver or remote");
  ev->add_option("--remote", remote, "host:port of a remote agent endpoint");
  ev->add_option("--out", out_path, "report file (default stdout)");
  ev->add_option("--workers", workers, "parallel episodes")->check(CLI::Range(1, 256));
  ev->add_option("--floors", floors, "tower height (max_floor)")->check(CLI::Range(1, kMaxTowerFloors));
  ev->add_option("--reward-mode", reward_mode, "sparse or dense");
  ev->add_option("--rerun", fingerprint_file, "re-run from a report's fingerprint");

  std::string bench_floors = "0,5,10,15,20";
  int bench_seeds = 5, bench_steps = 500;
  auto* bench = app.add_subcommand("bench", "measure simulator throughput");
  bench->add_option("--seed", seed, "base seed");
  bench->add_option("--floors", bench_floors, "comma-separated floor list");
  bench->add_option("--n-seeds", bench_seeds, "seeds per floor")->check(CLI::Range(1, 1000));
  bench->add_option("--n-steps", bench_steps, "steps per seed")->check(CLI::Range(1, 1000000));
  bench->add_option("--out", out_path, "also write rows as JSON");

  std::size_t max_sessions = service::kDefaultMaxSessions;
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "run the session service");
  serve->add_option("--port", port, "listen port (TOWERFORGE_PORT overrides)");
  serve->add_option("--host", host, "listen address");
  serve->add_option("--max-sessions", max_sessions, "session capacity");

  auto* defaults = app.add_subcommand("defaults", "print the default episode config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (auto* s : app.get_subcommands()) failed = s;
    err << failed->help();
    return 2;
  }

  try {
    if (*gen) {
      const auto themes = parse_themes(themes_arg);
      std::string text;
      if (floors > 0) {
        nlohmann::json all = nlohmann::json::array();
        for (int f = 0; f < floors; ++f) all.push_back(to_json(assemble_floor(f, seed, themes)));
        text = all.dump(2);
      } else {
        text = to_json(assemble_floor(floor, seed, themes)).dump(2);
      }
      write_output(out_path, text, out);
      return 0;
    }

    if (*vt) {
      const TemplateLibrary lib = load_templates(std::string_view(read_file(template_file)));
      int puzzles = 0;
      for (const auto& t : lib.templates()) puzzles += t.applies_to(RoomKind::Puzzle);
      out << "ok: " << lib.templates().size() << " templates, " << lib.categories().size()
          << " categories, " << puzzles << " puzzle templates\n";
      return 0;
    }

    if (*play) {
      EpisodeConfig cfg;
      cfg.tower_seed = seed;
      cfg.dynamics_seed = dynamics_seed;
      cfg.theme_pool = parse_themes(themes_arg);
      if (floors > 0) cfg.max_floor = floors;
      auto mode = reward_mode_from_string(reward_mode);
      if (!mode) throw Error(ErrorCode::BadConfig, "unknown reward mode " + reward_mode);
      cfg.reward_mode = *mode;
      Simulator sim;
      sim.reset(cfg);
      out << "keys: w/s forward/back, a/d strafe, q/e turn, j jump, empty line waits, x quits\n";
      print_play_view(sim, out);
      double total = 0.0;
      std::string line;
      while (!sim.state().done && std::getline(in, line)) {
        if (line == "x" || line == "quit") break;
        const StepResult r = sim.step(parse_play_line(line));
        total += r.reward;
        for (const auto& e : r.info.events) out << "  * " << e << '\n';
        print_play_view(sim, out);
      }
      out << "floors " << sim.state().counters.floors << "  return " << total
          << "  termination " << to_string(sim.state().cause) << '\n';
      return 0;
    }

    if (*ev) {
      AgentFactory factory;
      if (agent_name == "random") {
        factory = [s = seed] { return std::make_unique<RandomAgent>(s); };
      } else if (agent_name == "solver") {
        factory = [] { return std::make_unique<SolverAgent>(); };
      } else if (agent_name == "remote") {
        const auto colon = remote.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorCode::BadConfig, "--remote wants host:port");
        const std::string rhost = remote.substr(0, colon);
        const int rport = std::stoi(remote.substr(colon + 1));
        factory = [rhost, rport] { return std::make_unique<service::RemoteAgent>(rhost, rport); };
      } else {
        throw Error(ErrorCode::BadConfig, "unknown agent '" + agent_name + "'");
      }
      EvalOptions opts;
      opts.workers = workers;
      EvalReport report;
      if (!fingerprint_file.empty()) {
        auto j = nlohmann::json::parse(read_file(fingerprint_file));
        report = rerun(j.contains("fingerprint") ? j["fingerprint"] : j, factory, opts);
      } else {
        auto kind = protocol_kind_from_string(protocol_name);
        if (!kind) throw Error(ErrorCode::BadConfig, "unknown protocol '" + protocol_name + "'");
        EpisodeConfig base;
        if (floors > 0) base.max_floor = floors;
        auto mode = reward_mode_from_string(reward_mode);
        if (!mode) throw Error(ErrorCode::BadConfig, "unknown reward mode " + reward_mode);
        base.reward_mode = *mode;
        report = run_protocol(factory, make_protocol(*kind, seed), base, opts);
      }
      write_output(out_path, to_json(report).dump(2), out);
      if (!out_path.empty() && out_path != "-")
        for (const auto& row : report.rows)
          out << row.condition << ": mean " << row.stats.mean << " std " << row.stats.std
              << " max " << row.stats.max << " (n=" << row.stats.n << ")\n";
      return 0;
    }

    if (*bench) {
      const auto rows = measure_throughput(parse_int_list(bench_floors), bench_seeds,
                                           bench_steps, seed);
      out << throughput_table(rows);
      if (!out_path.empty()) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : rows) j.push_back(to_json(r));
        write_output(out_path, j.dump(2), out);
      }
      return 0;
    }

    if (*serve) {
      if (std::getenv("TOWERFORGE_PORT")) port = service::default_port();
      service::Server server(max_sessions);
      server.start(port, host);
      out << "listening on " << host << ":" << server.port() << std::endl;
      detail::g_stop = false;
      std::signal(SIGINT, detail::on_signal);
      std::signal(SIGTERM, detail::on_signal);
      while (!detail::g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return 0;
    }

    if (*defaults) {
      out << to_json(EpisodeConfig{}).dump(2) << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace towerforge::cli
