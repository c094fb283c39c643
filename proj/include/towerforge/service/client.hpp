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

// Blocking clients: ServiceClient talks to the simulator service over either
// transport; RemoteAgent is an AgentPolicy whose decisions come from an agent
// endpoint (see agent_handler for the serving side).

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "towerforge/error.hpp"
#include "towerforge/eval.hpp"
#include "towerforge/service/codec.hpp"
#include "towerforge/service/server.hpp"
#include "towerforge/service/session.hpp"

namespace towerforge::service {

enum class Transport { Raw, WebSocket };

// One JSON request, one JSON response, in order.
class Connection {
 public:
  Connection(const std::string& host, int port, Transport transport = Transport::Raw)
      : transport_(transport) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
      throw Error(ErrorCode::ConnectionError, "cannot resolve " + host);
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const bool connected = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
    ::freeaddrinfo(res);
    if (!connected) {
      if (fd_ >= 0) ::close(fd_);
      throw Error(ErrorCode::ConnectionError,
                  "cannot connect to " + host + ":" + std::to_string(port));
    }
    if (transport_ == Transport::WebSocket) handshake(host, port);
  }
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection() {
    if (fd_ < 0) return;
    if (transport_ == Transport::WebSocket) {
      try {
        detail::send_all(fd_, encode_ws_frame(WsOpcode::Close, std::string("\x03\xe8", 2), true));
      } catch (const Error&) {
      }
    }
    ::close(fd_);
  }

  std::string round_trip(std::string_view text) {
    if (transport_ == Transport::Raw) {
      detail::send_all(fd_, encode_frame(text));
      for (;;) {
        if (auto msg = decode_frame(buffer_)) return *msg;
        if (!detail::recv_some(fd_, buffer_))
          throw Error(ErrorCode::ConnectionError, "connection closed");
      }
    }
    detail::send_all(fd_, encode_ws_frame(WsOpcode::Text, text, true, next_mask()));
    std::string message;
    for (;;) {
      while (auto f = decode_ws_frame(buffer_)) {
        if (f->opcode == WsOpcode::Close) throw Error(ErrorCode::ConnectionError, "closed by server");
        if (f->opcode == WsOpcode::Ping || f->opcode == WsOpcode::Pong) continue;
        message += f->payload;
        if (f->fin) return message;
      }
      if (!detail::recv_some(fd_, buffer_))
        throw Error(ErrorCode::ConnectionError, "connection closed");
    }
  }

  nlohmann::json request(const nlohmann::json& req) {
    const std::string text = round_trip(req.dump());
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConnectionError, std::string("bad response: ") + e.what());
    }
  }

 private:
  void handshake(const std::string& host, int port) {
    const std::string key = base64_encode("towerforge-ws-00");
    detail::send_all(fd_, "GET / HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                              "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                              "Sec-WebSocket-Key: " + key +
                              "\r\nSec-WebSocket-Version: 13\r\n\r\n");
    std::size_t end;
    while ((end = buffer_.find("\r\n\r\n")) == std::string::npos)
      if (!detail::recv_some(fd_, buffer_))
        throw Error(ErrorCode::ConnectionError, "handshake: connection closed");
    const std::string head = buffer_.substr(0, end);
    buffer_.erase(0, end + 4);
    if (head.rfind("HTTP/1.1 101", 0) != 0 ||
        http_header(head, "Sec-WebSocket-Accept") != websocket_accept(key))
      throw Error(ErrorCode::ConnectionError, "websocket handshake rejected");
  }

  std::uint32_t next_mask() { return mask_ = mask_ * 1664525u + 1013904223u; }

  Transport transport_;
  int fd_ = -1;
  std::string buffer_;
  std::uint32_t mask_ = 0x9e3779b9u;
};

// Typed wrapper over the session protocol. Error responses become Errors with
// the server's code.
class ServiceClient {
 public:
  ServiceClient(const std::string& host, int port, Transport transport = Transport::Raw)
      : conn_(host, port, transport) {}

  nlohmann::json call(nlohmann::json req) {
    req["v"] = kProtocolVersion;
    nlohmann::json resp = conn_.request(req);
    if (!resp.value("ok", false)) {
      const auto& err = resp.at("error");
      throw Error(code_from_string(err.value("code", "BadRequest")),
                  err.value("message", std::string()));
    }
    return resp;
  }

  // Returns the initial observation; the session id is kept.
  Observation create(const EpisodeConfig& config) {
    auto r = call({{"type", "create"}, {"config", to_json(config)}});
    session_ = r.at("session").get<std::string>();
    return observation_from_json(r.at("observation"));
  }

  Observation reset(const nlohmann::json& overrides = nlohmann::json::object()) {
    auto r = call({{"type", "reset"}, {"session", session()}, {"config", overrides}});
    return observation_from_json(r.at("observation"));
  }

  StepResult step(int code) { return step_json(code); }
  StepResult step(const Action& a) { return step_json(to_json(a)); }

  nlohmann::json info() { return call({{"type", "info"}, {"session", session()}}); }
  nlohmann::json render() { return call({{"type", "render"}, {"session", session()}}); }

  void close() {
    if (!session_) return;
    call({{"type", "close"}, {"session", *session_}});
    session_.reset();
  }

  const std::string& session() const {
    if (!session_) throw Error(ErrorCode::UnknownSession, "no session created");
    return *session_;
  }
  Connection& connection() { return conn_; }

  static ErrorCode code_from_string(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(ErrorCode::ConnectionError); ++i)
      if (to_string(static_cast<ErrorCode>(i)) == s) return static_cast<ErrorCode>(i);
    return ErrorCode::BadRequest;
  }

 private:
  StepResult step_json(const nlohmann::json& action) {
    return step_result_from_json(call({{"type", "step"}, {"session", session()}, {"action", action}}));
  }

  Connection conn_;
  std::optional<std::string> session_;
};

// ---------------------------------------------------------------------------
// Remote agents. The evaluator sends agent.train, agent.begin_episode and
// agent.act; the endpoint answers with {"ok":true} or {"ok":true,"action":..}.

inline nlohmann::json to_json(const EpisodeContext& c) {
  return {{"tower_seed", c.tower_seed}, {"dynamics_seed", c.dynamics_seed},
          {"episode", c.episode},       {"floor_index", c.floor_index},
          {"step", c.step}};
}

inline EpisodeContext episode_context_from_json(const nlohmann::json& j) {
  EpisodeContext c;
  c.tower_seed = j.at("tower_seed").get<std::uint64_t>();
  c.dynamics_seed = j.at("dynamics_seed").get<std::uint64_t>();
  c.episode = j.at("episode").get<int>();
  c.floor_index = j.at("floor_index").get<int>();
  c.step = j.at("step").get<std::int64_t>();
  return c;
}

class RemoteAgent : public AgentPolicy {
 public:
  RemoteAgent(const std::string& host, int port) : client_(host, port) {}
  std::string name() const override { return "remote"; }

  void train(const TrainPhase& t) override {
    client_.call({{"type", "agent.train"},
                  {"seeds", t.seeds},
                  {"themes", themes_json(t.themes)},
                  {"config", to_json(t.config)}});
  }
  void begin_episode(const EpisodeContext& ctx) override {
    client_.call({{"type", "agent.begin_episode"}, {"context", to_json(ctx)}});
  }
  Action act(const Observation& obs, const EpisodeContext& ctx) override {
    auto r = client_.call({{"type", "agent.act"},
                           {"observation", observation_to_json(obs)},
                           {"context", to_json(ctx)}});
    return wire_action(r.at("action"));
  }

 private:
  ServiceClient client_;
};

// Serving side of the agent messages, for a FrameServer. Calls into the
// policy are serialized.
inline FrameServer::Handler agent_handler(std::shared_ptr<AgentPolicy> policy) {
  auto mu = std::make_shared<std::mutex>();
  return [policy, mu](std::string_view text) -> std::string {
    nlohmann::json req;
    nlohmann::json resp;
    try {
      req = nlohmann::json::parse(text);
      if (req.value("v", 0) != kProtocolVersion)
        throw Error(ErrorCode::BadRequest, "unsupported protocol version");
      const std::string type = req.value("type", std::string());
      std::lock_guard lock(*mu);
      resp = {{"v", kProtocolVersion}, {"ok", true}};
      if (type == "agent.train") {
        TrainPhase t;
        t.seeds = req.at("seeds").get<std::vector<std::uint64_t>>();
        t.themes = themes_from_json(req.at("themes"));
        t.config = episode_config_from_json(req.at("config"));
        policy->train(t);
      } else if (type == "agent.begin_episode") {
        policy->begin_episode(episode_context_from_json(req.at("context")));
      } else if (type == "agent.act") {
        const Action a = policy->act(observation_from_json(req.at("observation")),
                                     episode_context_from_json(req.at("context")));
        resp["action"] = flatten_action(a);
      } else {
        throw Error(ErrorCode::BadRequest, "unknown request type '" + type + "'");
      }
    } catch (const Error& e) {
      resp = error_response(e.code(), e.what());
    } catch (const std::exception& e) {
      resp = error_response(ErrorCode::BadRequest, e.what());
    }
    if (req.is_object() && req.contains("id")) resp["id"] = req["id"];
    return resp.dump();
  };
}

}  // namespace towerforge::service
