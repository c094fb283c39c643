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

#include <atomic>
#include <thread>

#include "towerforge/service/client.hpp"
#include "towerforge/service/codec.hpp"
#include "towerforge/service/server.hpp"
#include "towerforge/service/session.hpp"

using namespace towerforge;
using namespace towerforge::service;
using nlohmann::json;

namespace {

json req(std::string type, json extra = json::object()) {
  extra["v"] = kProtocolVersion;
  extra["type"] = std::move(type);
  return extra;
}

std::string error_code(const json& r) {
  EXPECT_FALSE(r.value("ok", true)) << r.dump();
  return r.at("error").at("code").get<std::string>();
}

}  // namespace

TEST(Codec, Base64Vectors) {
  EXPECT_EQ(base64_encode(""), "");
  EXPECT_EQ(base64_encode("f"), "Zg==");
  EXPECT_EQ(base64_encode("fo"), "Zm8=");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  for (std::string s : {"", "f", "fo", "foo", "foob", "fooba", "foobar"}) {
    auto d = base64_decode(base64_encode(s));
    EXPECT_EQ(std::string(d.begin(), d.end()), s);
  }
  EXPECT_THROW(base64_decode("abc"), Error);
}

TEST(Codec, WebSocketAcceptKey) {
  EXPECT_EQ(websocket_accept("dGhlIHNhbXBsZSBub25jZQ=="), "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
  const std::string head = "GET / HTTP/1.1\r\nHost: x\r\nsec-websocket-key:  dGhlIHNhbXBsZSBub25jZQ== \r\n";
  EXPECT_EQ(http_header(head, "Sec-WebSocket-Key"), "dGhlIHNhbXBsZSBub25jZQ==");
  EXPECT_NE(websocket_handshake_response(head).find("s3pPLMBiTxaQ9kYGzzhZRbK+xOo="), std::string::npos);
  EXPECT_THROW(websocket_handshake_response("GET / HTTP/1.1\r\n"), Error);
}

TEST(Codec, LengthPrefixFraming) {
  const std::string f = encode_frame("{\"a\":1}");
  ASSERT_EQ(f.size(), 11u);
  EXPECT_EQ(f.substr(0, 4), std::string("\0\0\0\x07", 4));
  std::string buf = f.substr(0, 6);
  EXPECT_FALSE(decode_frame(buf));
  buf += f.substr(6) + encode_frame("");
  EXPECT_EQ(decode_frame(buf), "{\"a\":1}");
  EXPECT_EQ(decode_frame(buf), "");
  EXPECT_TRUE(buf.empty());
  std::string huge("\x7f\xff\xff\xff", 4);
  EXPECT_THROW(decode_frame(huge), Error);
}

TEST(Codec, WebSocketFrames) {
  // Unmasked "Hello" from RFC 6455 section examples.
  EXPECT_EQ(encode_ws_frame(WsOpcode::Text, "Hello"), std::string("\x81\x05Hello", 7));
  std::string masked("\x81\x85\x37\xfa\x21\x3d\x7f\x9f\x4d\x51\x58", 11);
  auto f = decode_ws_frame(masked);
  ASSERT_TRUE(f);
  EXPECT_EQ(f->payload, "Hello");
  EXPECT_TRUE(f->fin);
  EXPECT_TRUE(masked.empty());
  EXPECT_EQ(encode_ws_frame(WsOpcode::Text, "Hello", true, 0x37fa213d),
            std::string("\x81\x85\x37\xfa\x21\x3d\x7f\x9f\x4d\x51\x58", 11));
  for (std::size_t n : {125u, 126u, 70000u}) {
    std::string payload(n, 'x');
    std::string buf = encode_ws_frame(WsOpcode::Binary, payload, true);
    auto g = decode_ws_frame(buf);
    ASSERT_TRUE(g);
    EXPECT_EQ(g->payload.size(), n);
    EXPECT_EQ(g->opcode, WsOpcode::Binary);
  }
}

TEST(Sessions, ErrorsCarryCodes) {
  SessionManager m(2);
  EXPECT_EQ(error_code(m.handle(json{{"type", "create"}})), "BadRequest");
  EXPECT_EQ(error_code(m.handle(req("create", {{"config", {{"max_floor", 101}}}}))), "BadConfig");
  EXPECT_EQ(error_code(m.handle(req("fly"))), "BadRequest");
  EXPECT_EQ(error_code(m.handle(req("step", {{"session", "nope"}, {"action", 0}}))), "UnknownSession");
  EXPECT_EQ(json::parse(m.handle_text("{not json"))["error"]["code"], "BadRequest");

  json a = m.handle(req("create", {{"id", 7}}));
  ASSERT_TRUE(a["ok"]);
  EXPECT_EQ(a["id"], 7);
  const std::string sid = a["session"];
  EXPECT_EQ(sid.size(), 32u);
  json bad = m.handle(req("step", {{"session", sid}, {"action", 54}}));
  EXPECT_EQ(error_code(bad), "InvalidAction");
  EXPECT_EQ(bad["error"]["message"].get<std::string>().rfind("InvalidAction", 0), std::string::npos);

  ASSERT_TRUE(m.handle(req("create"))["ok"]);
  EXPECT_EQ(error_code(m.handle(req("create"))), "CapacityExceeded");
  EXPECT_EQ(m.size(), 2u);

  ASSERT_TRUE(m.handle(req("close", {{"session", sid}}))["ok"]);
  EXPECT_EQ(error_code(m.handle(req("info", {{"session", sid}}))), "UnknownSession");
  EXPECT_TRUE(m.handle(req("create"))["ok"]);
}

TEST(Sessions, FinishedEpisodeStaysQueryable) {
  SessionManager m;
  json c = m.handle(req("create", {{"config", {{"starting_time", 5}}}}));
  const std::string sid = c["session"];
  json s = m.handle(req("step", {{"session", sid}, {"action", 0}}));
  ASSERT_TRUE(s["ok"]);
  EXPECT_TRUE(s["done"]);
  EXPECT_EQ(s["info"]["termination"], "Timeout");
  EXPECT_EQ(error_code(m.handle(req("step", {{"session", sid}, {"action", 0}}))), "EpisodeDone");
  json info = m.handle(req("info", {{"session", sid}}));
  EXPECT_TRUE(info["done"]);
  EXPECT_EQ(info["steps"], 1);
  json r = m.handle(req("reset", {{"session", sid}, {"config", {{"starting_time", 50}}}}));
  ASSERT_TRUE(r["ok"]);
  EXPECT_EQ(r["config"]["starting_time"], 50);
  EXPECT_EQ(r["observation"]["time_remaining"], 50);
  json view = m.handle(req("render", {{"session", sid}}));
  EXPECT_FALSE(view["rows"].empty());
}

TEST(Sessions, MatchesTheInProcessSimulator) {
  SessionManager m;
  EpisodeConfig cfg;
  cfg.tower_seed = 17;
  cfg.dynamics_seed = 4;
  json c = m.handle(req("create", {{"config", to_json(cfg)}}));
  Simulator sim;
  EXPECT_EQ(observation_from_json(c["observation"]), sim.reset(cfg));
  Rng pick(3);
  for (int i = 0; i < 200 && !sim.state().done; ++i) {
    const int code = static_cast<int>(pick.below(kActionCount));
    json s = m.handle(req("step", {{"session", c["session"]}, {"action", code}}));
    EXPECT_EQ(step_result_from_json(s), sim.step(code));
  }
}

TEST(Sessions, ActionFormsAreEquivalent) {
  const Action a = unflatten_action(37);
  EXPECT_EQ(wire_action(37), a);
  EXPECT_EQ(wire_action(to_json(a)), a);
  EXPECT_EQ(wire_action(json::array({static_cast<int>(a.fb), static_cast<int>(a.lr),
                                     static_cast<int>(a.camera), static_cast<int>(a.jump)})),
            a);
  EXPECT_THROW(wire_action(json::array({0, 0, 3, 0})), Error);
  EXPECT_THROW(wire_action(json::array({0, 0})), Error);
}

class ServerTest : public ::testing::TestWithParam<Transport> {
 protected:
  void SetUp() override { server.start(0); }
  void TearDown() override { server.stop(); }
  Server server;
};

TEST_P(ServerTest, EchoesTheSimulatorBitForBit) {
  ServiceClient client("127.0.0.1", server.port(), GetParam());
  EpisodeConfig cfg;
  cfg.tower_seed = 99;
  cfg.dynamics_seed = 2;
  Simulator sim;
  EXPECT_EQ(client.create(cfg), sim.reset(cfg));
  Rng pick(11);
  for (int i = 0; i < 300; ++i) {
    if (sim.state().done) {
      EXPECT_EQ(client.reset(), sim.reset(cfg));
      continue;
    }
    const int code = static_cast<int>(pick.below(kActionCount));
    ASSERT_EQ(client.step(code), sim.step(code)) << "step " << i;
  }
  try {
    client.step(99);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), sim.state().done ? ErrorCode::EpisodeDone : ErrorCode::InvalidAction);
  }
  EXPECT_EQ(client.info()["floor_index"], sim.state().floor_index);
  client.close();
  EXPECT_EQ(server.sessions().size(), 0u);
}

TEST_P(ServerTest, ConcurrentSessionsStayIsolated) {
  constexpr int kClients = 8;
  std::atomic<int> mismatches{0};
  std::vector<std::thread> threads;
  for (int k = 0; k < kClients; ++k)
    threads.emplace_back([&, k] {
      ServiceClient client("127.0.0.1", server.port(), GetParam());
      EpisodeConfig cfg;
      cfg.tower_seed = static_cast<std::uint64_t>(k % 3);
      cfg.dynamics_seed = static_cast<std::uint64_t>(k);
      Simulator sim;
      if (!(client.create(cfg) == sim.reset(cfg))) ++mismatches;
      Rng pick(static_cast<std::uint64_t>(k));
      for (int i = 0; i < 100 && !sim.state().done; ++i) {
        const int code = static_cast<int>(pick.below(kActionCount));
        if (!(client.step(code) == sim.step(code))) ++mismatches;
      }
      client.close();
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(mismatches, 0);
  EXPECT_EQ(server.sessions().size(), 0u);
}

INSTANTIATE_TEST_SUITE_P(Transports, ServerTest,
                         ::testing::Values(Transport::Raw, Transport::WebSocket),
                         [](const auto& info) {
                           return info.param == Transport::Raw ? std::string("Raw")
                                                               : std::string("WebSocket");
                         });

TEST(Server, WebSocketPingFragmentsAndClose) {
  Server server;
  server.start(0);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(server.port()));
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  ASSERT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  service::detail::send_all(fd, "GET /ws HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                       "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n");
  std::string buf;
  while (buf.find("\r\n\r\n") == std::string::npos) ASSERT_TRUE(service::detail::recv_some(fd, buf));
  EXPECT_EQ(buf.rfind("HTTP/1.1 101", 0), 0u);
  EXPECT_NE(buf.find("s3pPLMBiTxaQ9kYGzzhZRbK+xOo="), std::string::npos);
  buf.erase(0, buf.find("\r\n\r\n") + 4);

  auto next = [&] {
    for (;;) {
      if (auto f = decode_ws_frame(buf)) return *f;
      if (!service::detail::recv_some(fd, buf)) return WsFrame{true, WsOpcode::Close, ""};
    }
  };
  service::detail::send_all(fd, encode_ws_frame(WsOpcode::Ping, "hi", true));
  WsFrame pong = next();
  EXPECT_EQ(pong.opcode, WsOpcode::Pong);
  EXPECT_EQ(pong.payload, "hi");

  const std::string text = req("create", {{"id", "frag"}}).dump();
  std::string first = encode_ws_frame(WsOpcode::Text, text.substr(0, 5), true);
  first[0] = static_cast<char>(0x01);  // FIN clear
  service::detail::send_all(fd, first + encode_ws_frame(WsOpcode::Continuation, text.substr(5), true));
  WsFrame reply = next();
  EXPECT_EQ(reply.opcode, WsOpcode::Text);
  auto j = json::parse(reply.payload);
  EXPECT_TRUE(j["ok"]);
  EXPECT_EQ(j["id"], "frag");

  service::detail::send_all(fd, encode_ws_frame(WsOpcode::Close, std::string("\x03\xe8", 2), true));
  EXPECT_EQ(next().opcode, WsOpcode::Close);
  ::close(fd);
  server.stop();
}

TEST(RemoteAgentTest, DrivesAnEvaluationOverTheWire) {
  FrameServer agents(agent_handler(std::make_shared<RandomAgent>(5)));
  agents.start(0);
  Protocol p = make_protocol(ProtocolKind::Weak, 3);
  EpisodeConfig base;
  base.max_floor = 2;
  const int port = agents.port();
  EvalReport remote = run_protocol([port] { return std::make_unique<RemoteAgent>("127.0.0.1", port); },
                                   p, base);
  EvalReport local = run_protocol([] { return std::make_unique<RandomAgent>(5); }, p, base);
  EXPECT_EQ(remote.agent, "remote");
  EXPECT_EQ(remote.episodes, local.episodes);
  agents.stop();
}

TEST(ServerConfig, PortFromEnvironment) {
  ::setenv("TOWERFORGE_PORT", "9123", 1);
  EXPECT_EQ(default_port(), 9123);
  ::setenv("TOWERFORGE_PORT", "junk", 1);
  EXPECT_EQ(default_port(), kDefaultPort);
  ::unsetenv("TOWERFORGE_PORT");
  EXPECT_EQ(default_port(), 7878);
}
