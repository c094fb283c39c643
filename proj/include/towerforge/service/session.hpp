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

// Session table and the JSON request dispatcher. Transport-agnostic: the
// TCP/WebSocket server and the in-process tests both go through
// SessionManager::handle.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "towerforge/error.hpp"
#include "towerforge/service/codec.hpp"
#include "towerforge/simulator.hpp"

namespace towerforge::service {

inline constexpr std::size_t kDefaultMaxSessions = 50;

inline nlohmann::json observation_to_json(const Observation& o) {
  return {{"raster", base64_encode(o.raster.data(), o.raster.size())},
          {"side", o.side},
          {"keys_held", o.keys_held},
          {"time_remaining", o.time_remaining},
          {"time_normalized", o.time_normalized}};
}

inline Observation observation_from_json(const nlohmann::json& j) {
  Observation o;
  o.side = j.at("side").get<int>();
  o.raster = base64_decode(j.at("raster").get<std::string>());
  if (o.raster.size() != static_cast<std::size_t>(o.side) * o.side)
    throw Error(ErrorCode::BadRequest, "raster size does not match side");
  o.keys_held = j.at("keys_held").get<int>();
  o.time_remaining = j.at("time_remaining").get<int>();
  o.time_normalized = j.at("time_normalized").get<double>();
  return o;
}

inline nlohmann::json step_info_to_json(const StepInfo& i) {
  return {{"floor_index", i.floor_index},
          {"events", i.events},
          {"termination", std::string(to_string(i.cause))},
          {"ticks", i.ticks}};
}

inline Termination termination_from_string(std::string_view s) {
  for (auto t : {Termination::None, Termination::Hazard, Termination::Timeout,
                 Termination::TopFloor})
    if (to_string(t) == s) return t;
  throw Error(ErrorCode::BadRequest, "unknown termination " + std::string(s));
}

// Fields of a step response, back into the in-process type. Doubles survive
// the round trip exactly because the encoder prints shortest round-trip form.
inline StepResult step_result_from_json(const nlohmann::json& j) {
  try {
    StepResult r;
    r.observation = observation_from_json(j.at("observation"));
    r.reward = j.at("reward").get<double>();
    r.done = j.at("done").get<bool>();
    const auto& info = j.at("info");
    r.info.floor_index = info.at("floor_index").get<int>();
    r.info.events = info.at("events").get<std::vector<std::string>>();
    r.info.cause = termination_from_string(info.at("termination").get<std::string>());
    r.info.ticks = info.at("ticks").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("step response: ") + e.what());
  }
}

// Accepts a flat code, an object with named fields, or [fb, lr, camera, jump].
inline Action wire_action(const nlohmann::json& j) {
  if (j.is_array()) {
    if (j.size() != 4) throw Error(ErrorCode::InvalidAction, "action array needs 4 entries");
    static constexpr int limits[] = {3, 3, 3, 2};
    int v[4];
    for (int i = 0; i < 4; ++i) {
      if (!j[i].is_number_integer()) throw Error(ErrorCode::InvalidAction, "action entries must be integers");
      v[i] = j[i].get<int>();
      if (v[i] < 0 || v[i] >= limits[i]) throw Error(ErrorCode::InvalidAction, "action entry out of range");
    }
    return Action{static_cast<MoveFB>(v[0]), static_cast<MoveLR>(v[1]),
                  static_cast<Camera>(v[2]), static_cast<JumpAct>(v[3])};
  }
  return action_from_json(j);
}

inline nlohmann::json error_response(ErrorCode code, std::string message) {
  // Error::what() already starts with the code name.
  const std::string prefix = std::string(to_string(code)) + ": ";
  if (message.rfind(prefix, 0) == 0) message.erase(0, prefix.size());
  return {{"v", kProtocolVersion},
          {"ok", false},
          {"error", {{"code", std::string(to_string(code))}, {"message", message}}}};
}

class SessionManager {
 public:
  explicit SessionManager(std::size_t max_sessions = kDefaultMaxSessions,
                          std::shared_ptr<const GeneratorContent> content = default_content())
      : max_sessions_(max_sessions), content_(std::move(content)) {}

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  // Never throws: failures come back as error responses.
  nlohmann::json handle(const nlohmann::json& request) {
    nlohmann::json resp;
    try {
      resp = dispatch(request);
    } catch (const Error& e) {
      resp = error_response(e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      resp = error_response(ErrorCode::BadRequest, e.what());
    } catch (const std::exception& e) {
      resp = error_response(ErrorCode::BadRequest, e.what());
    }
    if (request.is_object() && request.contains("id")) resp["id"] = request["id"];
    return resp;
  }

  std::string handle_text(std::string_view text) {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      return error_response(ErrorCode::BadRequest, std::string("invalid JSON: ") + e.what()).dump();
    }
    return handle(req).dump();
  }

 private:
  struct Session {
    std::mutex mu;
    EpisodeConfig config;
    Simulator sim;
    explicit Session(std::shared_ptr<const GeneratorContent> c) : sim(std::move(c)) {}
  };

  nlohmann::json ok() const { return {{"v", kProtocolVersion}, {"ok", true}}; }

  nlohmann::json dispatch(const nlohmann::json& req) {
    if (!req.is_object()) throw Error(ErrorCode::BadRequest, "request must be an object");
    if (!req.contains("v") || req["v"] != kProtocolVersion)
      throw Error(ErrorCode::BadRequest, "unsupported protocol version");
    const std::string type = req.value("type", std::string());
    if (type == "create") return create(req);
    if (type == "reset") return with_session(req, [&](Session& s) { return reset(s, req); });
    if (type == "step") return with_session(req, [&](Session& s) { return step(s, req); });
    if (type == "render") return with_session(req, [&](Session& s) { return render(s); });
    if (type == "info") return with_session(req, [&](Session& s) { return info(s); });
    if (type == "close") return close(req);
    throw Error(ErrorCode::BadRequest, "unknown request type '" + type + "'");
  }

  static std::string new_id() {
    thread_local std::mt19937_64 gen{std::random_device{}()};
    return hex64(gen()) + hex64(gen());
  }

  std::shared_ptr<Session> find(const nlohmann::json& req) {
    if (!req.contains("session") || !req["session"].is_string())
      throw Error(ErrorCode::BadRequest, "missing session");
    const auto id = req["session"].get<std::string>();
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, id);
    return it->second;
  }

  template <class F>
  nlohmann::json with_session(const nlohmann::json& req, F&& f) {
    auto s = find(req);
    std::unique_lock lock(s->mu, std::try_to_lock);
    if (!lock.owns_lock()) throw Error(ErrorCode::Busy, "session is handling another request");
    nlohmann::json r = f(*s);
    r["session"] = req["session"];
    return r;
  }

  nlohmann::json create(const nlohmann::json& req) {
    EpisodeConfig cfg = episode_config_from_json(req.value("config", nlohmann::json::object()));
    auto s = std::make_shared<Session>(content_);
    s->config = cfg;
    const Observation obs = s->sim.reset(cfg);
    std::string id;
    {
      std::lock_guard lock(mu_);
      if (sessions_.size() >= max_sessions_)
        throw Error(ErrorCode::CapacityExceeded,
                    "session limit of " + std::to_string(max_sessions_) + " reached");
      do id = new_id();
      while (sessions_.count(id));
      sessions_.emplace(id, s);
    }
    nlohmann::json r = ok();
    r["session"] = id;
    r["config"] = to_json(cfg);
    r["observation"] = observation_to_json(obs);
    return r;
  }

  // Overrides are merged onto the session's current config.
  nlohmann::json reset(Session& s, const nlohmann::json& req) {
    nlohmann::json merged = to_json(s.config);
    if (req.contains("config")) {
      if (!req["config"].is_object()) throw Error(ErrorCode::BadConfig, "config must be an object");
      merged.update(req["config"]);
    }
    EpisodeConfig cfg = episode_config_from_json(merged);
    const Observation obs = s.sim.reset(cfg);
    s.config = cfg;
    nlohmann::json r = ok();
    r["config"] = to_json(cfg);
    r["observation"] = observation_to_json(obs);
    return r;
  }

  nlohmann::json step(Session& s, const nlohmann::json& req) {
    if (!req.contains("action")) throw Error(ErrorCode::InvalidAction, "missing action");
    const StepResult res = s.sim.step(wire_action(req["action"]));
    nlohmann::json r = ok();
    r["observation"] = observation_to_json(res.observation);
    r["reward"] = res.reward;
    r["done"] = res.done;
    r["info"] = step_info_to_json(res.info);
    return r;
  }

  nlohmann::json render(Session& s) {
    const auto& st = s.sim.state();
    nlohmann::json r = ok();
    r["rows"] = room_text(s.sim.current_room(), st.agent);
    r["theme"] = std::string(to_string(s.sim.plan().theme));
    r["observation"] = observation_to_json(s.sim.observe());
    return r;
  }

  nlohmann::json info(Session& s) {
    const auto& st = s.sim.state();
    const auto& layout = s.sim.plan().layout;
    nlohmann::json r = ok();
    r["config"] = to_json(s.config);
    r["floor_index"] = st.floor_index;
    r["room"] = {layout.x_of(st.cell), layout.y_of(st.cell)};
    r["time_remaining"] = st.time_remaining;
    r["keys_held"] = st.agent.keys;
    r["done"] = st.done;
    r["termination"] = std::string(to_string(st.cause));
    r["steps"] = st.steps;
    r["counters"] = {{"floors", st.counters.floors}, {"keys", st.counters.keys},
                     {"doors", st.counters.doors},   {"puzzles", st.counters.puzzles},
                     {"orbs", st.counters.orbs}};
    return r;
  }

  nlohmann::json close(const nlohmann::json& req) {
    auto s = find(req);
    std::unique_lock slock(s->mu, std::try_to_lock);
    if (!slock.owns_lock()) throw Error(ErrorCode::Busy, "session is handling another request");
    {
      std::lock_guard lock(mu_);
      sessions_.erase(req["session"].get<std::string>());
    }
    nlohmann::json r = ok();
    r["session"] = req["session"];
    r["closed"] = true;
    return r;
  }

  std::size_t max_sessions_;
  std::shared_ptr<const GeneratorContent> content_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace towerforge::service
