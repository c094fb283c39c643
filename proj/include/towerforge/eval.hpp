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
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "towerforge/error.hpp"
#include "towerforge/floor.hpp"
#include "towerforge/rng.hpp"
#include "towerforge/simulator.hpp"
#include "towerforge/solver.hpp"

namespace towerforge {

// ---------------------------------------------------------------------------
// Protocols.

enum class ProtocolKind { NoGeneralization, Weak, Strong };

inline std::string_view to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::NoGeneralization: return "none";
    case ProtocolKind::Weak: return "weak";
    case ProtocolKind::Strong: return "strong";
  }
  return "?";
}
inline std::optional<ProtocolKind> protocol_kind_from_string(std::string_view s) {
  if (s == "none" || s == "no" || s == "NoGeneralization") return ProtocolKind::NoGeneralization;
  if (s == "weak" || s == "Weak") return ProtocolKind::Weak;
  if (s == "strong" || s == "Strong") return ProtocolKind::Strong;
  return std::nullopt;
}

inline constexpr int kTrainSeeds = 100;
inline constexpr int kTestSeeds = 5;
inline constexpr int kDynamicsSeeds = 5;

struct Protocol {
  ProtocolKind kind = ProtocolKind::Weak;
  std::uint64_t protocol_seed = 0;
  std::vector<std::uint64_t> train_seeds;
  std::vector<std::uint64_t> test_seeds;
  std::vector<std::uint64_t> dynamics_seeds;
  std::vector<VisualTheme> train_themes;
  std::vector<VisualTheme> test_themes;
  friend bool operator==(const Protocol&, const Protocol&) = default;
};

// Seed derivation: each list is read off its own stream of the protocol
// seed, keeping 31-bit values so seeds stay readable on the command line.
inline std::uint64_t derived_seed(Rng& r) { return r.next() >> 33; }

inline Protocol make_protocol(ProtocolKind kind, std::uint64_t protocol_seed) {
  Protocol p;
  p.kind = kind;
  p.protocol_seed = protocol_seed;
  Rng dyn(stream_seed(protocol_seed, 0, "dynamics"));
  for (int i = 0; i < kDynamicsSeeds; ++i) p.dynamics_seeds.push_back(derived_seed(dyn));
  if (kind == ProtocolKind::NoGeneralization) {
    Rng r(stream_seed(protocol_seed, 0, "tower"));
    const std::uint64_t tower = derived_seed(r);
    p.train_seeds = {tower};
    p.test_seeds = {tower};
    p.train_themes.assign(kAllThemes.begin(), kAllThemes.end());
    p.test_themes = p.train_themes;
    return p;
  }
  std::set<std::uint64_t> train;
  Rng tr(stream_seed(protocol_seed, 0, "train"));
  while (p.train_seeds.size() < static_cast<std::size_t>(kTrainSeeds)) {
    const auto s = derived_seed(tr);
    if (train.insert(s).second) p.train_seeds.push_back(s);
  }
  std::set<std::uint64_t> test;
  Rng te(stream_seed(protocol_seed, 0, "test"));
  while (p.test_seeds.size() < static_cast<std::size_t>(kTestSeeds)) {
    const auto s = derived_seed(te);
    if (!train.contains(s) && test.insert(s).second) p.test_seeds.push_back(s);
  }
  if (kind == ProtocolKind::Strong) {
    p.train_themes = {VisualTheme::Ancient, VisualTheme::Moorish};
    p.test_themes = {VisualTheme::Industrial};
  } else {
    p.train_themes.assign(kAllThemes.begin(), kAllThemes.end());
    p.test_themes = p.train_themes;
  }
  return p;
}

inline void validate_protocol(const Protocol& p) {
  if (p.test_seeds.empty()) throw Error(ErrorCode::BadConfig, "no test seeds");
  if (p.dynamics_seeds.empty()) throw Error(ErrorCode::BadConfig, "no dynamics seeds");
  if (p.train_themes.empty() || p.test_themes.empty())
    throw Error(ErrorCode::BadConfig, "empty theme set");
  if (p.kind == ProtocolKind::NoGeneralization) return;
  const std::set<std::uint64_t> train(p.train_seeds.begin(), p.train_seeds.end());
  if (train.size() != p.train_seeds.size())
    throw Error(ErrorCode::BadConfig, "train seeds are not distinct");
  const std::set<std::uint64_t> test(p.test_seeds.begin(), p.test_seeds.end());
  if (test.size() != p.test_seeds.size())
    throw Error(ErrorCode::BadConfig, "test seeds are not distinct");
  for (auto s : p.test_seeds)
    if (train.contains(s))
      throw Error(ErrorCode::SeedOverlap, "test seed " + std::to_string(s) + " is a train seed");
  if (p.kind == ProtocolKind::Strong)
    for (auto t : p.test_themes)
      if (std::find(p.train_themes.begin(), p.train_themes.end(), t) != p.train_themes.end())
        throw Error(ErrorCode::ThemeOverlap,
                    "theme " + std::string(to_string(t)) + " is in both train and test");
}

inline nlohmann::json themes_json(const std::vector<VisualTheme>& ts) {
  nlohmann::json j = nlohmann::json::array();
  for (auto t : ts) j.push_back(std::string(to_string(t)));
  return j;
}

inline std::vector<VisualTheme> themes_from_json(const nlohmann::json& j) {
  std::vector<VisualTheme> out;
  for (const auto& t : j) {
    auto th = theme_from_string(t.get<std::string>());
    if (!th) throw Error(ErrorCode::BadConfig, "unknown theme " + t.dump());
    out.push_back(*th);
  }
  return out;
}

inline nlohmann::json to_json(const Protocol& p) {
  return {{"kind", std::string(to_string(p.kind))},
          {"protocol_seed", p.protocol_seed},
          {"train_seeds", p.train_seeds},
          {"test_seeds", p.test_seeds},
          {"dynamics_seeds", p.dynamics_seeds},
          {"train_themes", themes_json(p.train_themes)},
          {"test_themes", themes_json(p.test_themes)}};
}

inline Protocol protocol_from_json(const nlohmann::json& j) {
  try {
    Protocol p;
    auto kind = protocol_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::BadConfig, "unknown protocol kind");
    p.kind = *kind;
    p.protocol_seed = j.at("protocol_seed").get<std::uint64_t>();
    p.train_seeds = j.at("train_seeds").get<std::vector<std::uint64_t>>();
    p.test_seeds = j.at("test_seeds").get<std::vector<std::uint64_t>>();
    p.dynamics_seeds = j.at("dynamics_seeds").get<std::vector<std::uint64_t>>();
    p.train_themes = themes_from_json(j.at("train_themes"));
    p.test_themes = themes_from_json(j.at("test_themes"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("protocol: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Agents.

struct EpisodeContext {
  std::uint64_t tower_seed = 0;
  std::uint64_t dynamics_seed = 0;
  int episode = 0;
  int floor_index = 0;
  std::int64_t step = 0;
  // Full simulator access for privileged baselines; learning agents must not
  // read it.
  const Simulator* simulator = nullptr;
};

struct TrainPhase {
  std::vector<std::uint64_t> seeds;
  std::vector<VisualTheme> themes;
  EpisodeConfig config;  // train-phase episode template
};

class AgentPolicy {
 public:
  virtual ~AgentPolicy() = default;
  virtual std::string name() const = 0;
  // Called once before testing; baselines that do not learn ignore it.
  virtual void train(const TrainPhase&) {}
  virtual void begin_episode(const EpisodeContext&) {}
  virtual Action act(const Observation& obs, const EpisodeContext& ctx) = 0;
};

// Each worker builds its own agent through the factory.
using AgentFactory = std::function<std::unique_ptr<AgentPolicy>()>;

class RandomAgent : public AgentPolicy {
 public:
  explicit RandomAgent(std::uint64_t seed = 0) : seed_(seed) {}
  std::string name() const override { return "random"; }
  void begin_episode(const EpisodeContext& ctx) override {
    rng_ = Rng(stream_seed(seed_ ^ ctx.tower_seed, 0, "random-agent", ctx.dynamics_seed));
  }
  Action act(const Observation&, const EpisodeContext&) override {
    return unflatten_action(static_cast<int>(rng_.below(kActionCount)));
  }

 private:
  std::uint64_t seed_;
  Rng rng_;
};

// The scripted solver as a (privileged) policy.
class SolverAgent : public AgentPolicy {
 public:
  explicit SolverAgent(SolverOptions opts = {}) : opts_(opts) {}
  std::string name() const override { return "solver"; }
  void begin_episode(const EpisodeContext&) override { solver_ = ScriptedSolver(opts_); }
  Action act(const Observation&, const EpisodeContext& ctx) override {
    if (!ctx.simulator)
      throw Error(ErrorCode::PlanFailure, "solver agent needs simulator access");
    return solver_.act(*ctx.simulator);
  }

 private:
  SolverOptions opts_;
  ScriptedSolver solver_;
};

// ---------------------------------------------------------------------------
// Reports.

struct FloorStats {
  double mean = 0.0;
  double std = 0.0;  // population
  int max = 0;
  int n = 0;
  friend bool operator==(const FloorStats&, const FloorStats&) = default;
};

inline FloorStats floor_stats(const std::vector<int>& floors) {
  FloorStats s;
  s.n = static_cast<int>(floors.size());
  if (floors.empty()) return s;
  double sum = 0.0;
  for (int f : floors) sum += f;
  s.mean = sum / s.n;
  double sq = 0.0;
  for (int f : floors) sq += (f - s.mean) * (f - s.mean);
  s.std = std::sqrt(sq / s.n);
  s.max = *std::max_element(floors.begin(), floors.end());
  return s;
}

struct EpisodeRecord {
  std::uint64_t tower_seed = 0;
  std::uint64_t dynamics_seed = 0;
  int floors = 0;
  double total_return = 0.0;
  Termination cause = Termination::None;
  std::int64_t steps = 0;
  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

enum class AuditPhase { Train, Test };

struct ThemeAuditEntry {
  AuditPhase phase = AuditPhase::Train;
  std::uint64_t tower_seed = 0;
  int floor = 0;
  VisualTheme theme = VisualTheme::Ancient;
  bool violation = false;
};

struct EvalRow {
  std::string condition;
  FloorStats stats;
};

struct EvalReport {
  Protocol protocol;
  EpisodeConfig config;  // episode template; seeds and themes are per episode
  std::string agent;
  std::vector<EpisodeRecord> episodes;
  std::vector<EvalRow> rows;
  std::vector<ThemeAuditEntry> audit;
  int audit_violations() const {
    return static_cast<int>(std::count_if(audit.begin(), audit.end(),
                                          [](const ThemeAuditEntry& e) { return e.violation; }));
  }
  std::vector<int> raw_floors() const {
    std::vector<int> out;
    for (const auto& e : episodes) out.push_back(e.floors);
    return out;
  }
};

inline nlohmann::json fingerprint(const EvalReport& r) {
  return {{"protocol", to_json(r.protocol)},
          {"config", to_json(r.config)},
          {"agent", r.agent}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"condition", row.condition},
                    {"mean_floors", row.stats.mean},
                    {"std_floors", row.stats.std},
                    {"max_floors", row.stats.max},
                    {"episodes", row.stats.n}});
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : r.episodes)
    eps.push_back({{"tower_seed", e.tower_seed},
                   {"dynamics_seed", e.dynamics_seed},
                   {"floors", e.floors},
                   {"return", e.total_return},
                   {"termination", std::string(to_string(e.cause))},
                   {"steps", e.steps}});
  nlohmann::json audit = nlohmann::json::array();
  for (const auto& a : r.audit)
    audit.push_back({{"phase", a.phase == AuditPhase::Train ? "train" : "test"},
                     {"tower_seed", a.tower_seed},
                     {"floor", a.floor},
                     {"theme", std::string(to_string(a.theme))},
                     {"violation", a.violation}});
  return {{"schema", "towerforge.eval_report/1"},
          {"fingerprint", fingerprint(r)},
          {"rows", rows},
          {"episodes", eps},
          {"raw_floors", r.raw_floors()},
          {"theme_audit", {{"entries", audit}, {"violations", r.audit_violations()}}}};
}

struct EvalOptions {
  int workers = 1;
  std::int64_t max_steps_per_episode = 100000;
};

namespace detail {

inline bool in_pool(const std::vector<VisualTheme>& pool, VisualTheme t) {
  return std::find(pool.begin(), pool.end(), t) != pool.end();
}

inline EpisodeRecord run_episode(AgentPolicy& agent, const EpisodeConfig& cfg, int index,
                                 std::int64_t max_steps, const Protocol& protocol,
                                 std::vector<ThemeAuditEntry>& audit) {
  Simulator sim;
  Observation obs = sim.reset(cfg);
  EpisodeContext ctx{cfg.tower_seed, cfg.dynamics_seed, index, 0, 0, &sim};
  agent.begin_episode(ctx);
  EpisodeRecord rec{cfg.tower_seed, cfg.dynamics_seed, 0, 0.0, Termination::None, 0};
  auto log_floor = [&] {
    const VisualTheme th = sim.plan().theme;
    audit.push_back({AuditPhase::Test, cfg.tower_seed, sim.plan().floor_number, th,
                     !in_pool(protocol.test_themes, th)});
  };
  log_floor();
  int seen_floor = sim.plan().floor_number;
  while (!sim.state().done && sim.state().steps < max_steps) {
    ctx.floor_index = sim.state().floor_index;
    ctx.step = sim.state().steps;
    StepResult r = sim.step(agent.act(obs, ctx));
    rec.total_return += r.reward;
    obs = std::move(r.observation);
    if (!sim.state().done && sim.plan().floor_number != seen_floor) {
      seen_floor = sim.plan().floor_number;
      log_floor();
    }
  }
  rec.floors = sim.state().counters.floors;
  rec.cause = sim.state().cause;
  rec.steps = sim.state().steps;
  return rec;
}

}  // namespace detail

// Runs the train hook (with theme audit) and every (test seed x dynamics
// seed) episode. Results are ordered by seed pair whatever the worker count.
inline EvalReport run_protocol(const AgentFactory& factory, const Protocol& protocol,
                               const EpisodeConfig& base, const EvalOptions& opts = {}) {
  validate_protocol(protocol);
  validate_config(base);
  EvalReport report;
  report.protocol = protocol;
  report.config = base;

  {
    auto agent = factory();
    report.agent = agent->name();
    TrainPhase phase{protocol.train_seeds, protocol.train_themes, base};
    phase.config.theme_pool = protocol.train_themes;
    for (auto seed : protocol.train_seeds) {
      FloorPlan plan = assemble_floor(0, seed, protocol.train_themes);
      const bool bad = protocol.kind == ProtocolKind::Strong &&
                       detail::in_pool(protocol.test_themes, plan.theme);
      report.audit.push_back({AuditPhase::Train, seed, 0, plan.theme, bad});
    }
    agent->train(phase);
  }

  struct Job {
    std::uint64_t tower, dynamics;
  };
  std::vector<Job> jobs;
  for (auto t : protocol.test_seeds)
    for (auto d : protocol.dynamics_seeds) jobs.push_back({t, d});
  std::vector<EpisodeRecord> records(jobs.size());
  std::vector<std::vector<ThemeAuditEntry>> audits(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        auto agent = factory();
        EpisodeConfig cfg = base;
        cfg.tower_seed = jobs[i].tower;
        cfg.dynamics_seed = jobs[i].dynamics;
        cfg.theme_pool = protocol.test_themes;
        records[i] = detail::run_episode(*agent, cfg, static_cast<int>(i),
                                         opts.max_steps_per_episode, protocol, audits[i]);
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      next = jobs.size();
    }
  };
  const int n = std::max(1, std::min<int>(opts.workers, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  report.episodes = std::move(records);
  for (auto& a : audits) report.audit.insert(report.audit.end(), a.begin(), a.end());
  report.rows.push_back({"all", floor_stats(report.raw_floors())});
  for (auto t : protocol.test_seeds) {
    std::vector<int> floors;
    for (const auto& e : report.episodes)
      if (e.tower_seed == t) floors.push_back(e.floors);
    report.rows.push_back({"tower_seed=" + std::to_string(t), floor_stats(floors)});
  }
  return report;
}

// Re-runs an evaluation from a report fingerprint.
inline EvalReport rerun(const nlohmann::json& fp, const AgentFactory& factory,
                        const EvalOptions& opts = {}) {
  return run_protocol(factory, protocol_from_json(fp.at("protocol")),
                      episode_config_from_json(fp.at("config")), opts);
}

// ---------------------------------------------------------------------------
// Throughput.

struct ThroughputRow {
  int floor = 0;
  double steps_per_second = 0.0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double min_ms = 0.0;  // fastest per-seed mean
  double max_ms = 0.0;  // slowest per-seed mean
  int n_seeds = 0;
  int n_steps = 0;
  std::int64_t measurements = 0;
};

inline nlohmann::json to_json(const ThroughputRow& r) {
  return {{"floor", r.floor},         {"steps_per_second", r.steps_per_second},
          {"mean_ms", r.mean_ms},     {"std_ms", r.std_ms},
          {"min_ms", r.min_ms},       {"max_ms", r.max_ms},
          {"n_seeds", r.n_seeds},     {"n_steps", r.n_steps},
          {"measurements", r.measurements}};
}

inline std::vector<ThroughputRow> measure_throughput(
    const std::vector<int>& floors = {0, 5, 10, 15, 20}, int n_seeds = 5, int n_steps = 500,
    std::uint64_t base_seed = 0) {
  using Clock = std::chrono::steady_clock;
  std::vector<ThroughputRow> rows;
  for (int floor : floors) {
    ThroughputRow row;
    row.floor = floor;
    row.n_seeds = n_seeds;
    row.n_steps = n_steps;
    std::vector<double> all;
    std::vector<double> seed_means;
    double loop_s = 0.0, reset_s = 0.0;  // wall clock around the step loops
    for (int s = 0; s < n_seeds; ++s) {
      EpisodeConfig cfg;
      cfg.tower_seed = stream_seed(base_seed, static_cast<std::uint64_t>(floor), "bench",
                                   static_cast<std::uint64_t>(s)) >> 33;
      cfg.dynamics_seed = static_cast<std::uint64_t>(s);
      cfg.max_floor = std::max(cfg.max_floor, floor + 1);
      Simulator sim;
      sim.reset_at_floor(cfg, floor);
      Rng actions(stream_seed(base_seed, static_cast<std::uint64_t>(floor), "bench-actions",
                              static_cast<std::uint64_t>(s)));
      double seed_sum = 0.0;
      const auto loop_start = Clock::now();
      for (int i = 0; i < n_steps; ++i) {
        if (sim.state().done) {
          const auto r0 = Clock::now();
          sim.reset_at_floor(cfg, floor);
          reset_s += std::chrono::duration<double>(Clock::now() - r0).count();
        }
        const int code = static_cast<int>(actions.below(kActionCount));
        const auto t0 = Clock::now();
        StepResult r = sim.step(code);
        const auto t1 = Clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        all.push_back(ms);
        seed_sum += ms;
        (void)r;
      }
      loop_s += std::chrono::duration<double>(Clock::now() - loop_start).count();
      seed_means.push_back(seed_sum / n_steps);
    }
    row.measurements = static_cast<std::int64_t>(all.size());
    if (!all.empty()) {
      row.mean_ms = std::accumulate(all.begin(), all.end(), 0.0) / all.size();
      double sq = 0.0;
      for (double v : all) sq += (v - row.mean_ms) * (v - row.mean_ms);
      row.std_ms = std::sqrt(sq / all.size());
      row.min_ms = *std::min_element(seed_means.begin(), seed_means.end());
      row.max_ms = *std::max_element(seed_means.begin(), seed_means.end());
      // Counted off the outer clock, so steps_per_second * mean_ms only comes
      // out near 1000 when timer and loop overhead are small.
      const double step_s = loop_s - reset_s;
      row.steps_per_second = step_s > 0 ? static_cast<double>(all.size()) / step_s : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string throughput_table(const std::vector<ThroughputRow>& rows) {
  std::string out = "| Floor | Steps/sec | Mean (ms) | Std (ms) | Min (ms) | Max (ms) |\n"
                    "|------:|----------:|----------:|---------:|---------:|---------:|\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "| %d | %.1f | %.4f | %.4f | %.4f | %.4f |\n", r.floor,
                  r.steps_per_second, r.mean_ms, r.std_ms, r.min_ms, r.max_ms);
    out += buf;
  }
  return out;
}

}  // namespace towerforge
