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

// POSIX TCP server, one thread per connection. A connection whose first bytes
// are "GET " is upgraded to WebSocket (one JSON document per text message);
// anything else speaks 4-byte length-prefixed JSON.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "towerforge/error.hpp"
#include "towerforge/service/codec.hpp"
#include "towerforge/service/session.hpp"

namespace towerforge::service {

inline constexpr int kDefaultPort = 7878;

// TOWERFORGE_PORT wins over the built-in default.
inline int default_port() {
  if (const char* env = std::getenv("TOWERFORGE_PORT")) {
    char* end = nullptr;
    const long p = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && p > 0 && p < 65536) return static_cast<int>(p);
  }
  return kDefaultPort;
}

namespace detail {

inline void send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::ConnectionError, std::string("send: ") + std::strerror(errno));
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Appends whatever is available; false on EOF or error.
inline bool recv_some(int fd, std::string& buffer) {
  char chunk[65536];
  for (;;) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    buffer.append(chunk, static_cast<std::size_t>(n));
    return true;
  }
}

}  // namespace detail

class FrameServer {
 public:
  using Handler = std::function<std::string(std::string_view)>;

  explicit FrameServer(Handler handler) : handler_(std::move(handler)) {}
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;
  ~FrameServer() { stop(); }

  // Port 0 picks an ephemeral port; see port().
  void start(int port, const std::string& host = "127.0.0.1") {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::ConnectionError, "socket failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
      throw Error(ErrorCode::BadConfig, "bad listen address " + host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
        ::listen(listen_fd_, 64) < 0) {
      const std::string why = std::strerror(errno);
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw Error(ErrorCode::ConnectionError, "cannot listen on port " + std::to_string(port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  int port() const { return port_; }
  bool running() const { return running_; }

  void stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();
    {
      std::lock_guard lock(mu_);
      for (int fd : open_) ::shutdown(fd, SHUT_RDWR);
    }
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
  }

 private:
  void accept_loop() {
    while (running_) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      std::lock_guard lock(mu_);
      if (!running_) {
        ::close(fd);
        return;
      }
      open_.insert(fd);
      workers_.emplace_back([this, fd] { serve(fd); });
    }
  }

  void serve(int fd) {
    try {
      std::string buffer;
      bool open = true;
      while (open && buffer.size() < 4) open = detail::recv_some(fd, buffer);
      if (open && buffer.compare(0, 4, "GET ") == 0)
        serve_websocket(fd, buffer);
      else if (open)
        serve_raw(fd, buffer);
    } catch (...) {
      // Connection-level failures only end this connection.
    }
    std::lock_guard lock(mu_);
    open_.erase(fd);
    ::close(fd);
  }

  void serve_raw(int fd, std::string& buffer) {
    for (;;) {
      while (auto msg = decode_frame(buffer)) detail::send_all(fd, encode_frame(handler_(*msg)));
      if (!detail::recv_some(fd, buffer)) return;
    }
  }

  void serve_websocket(int fd, std::string& buffer) {
    std::size_t end;
    while ((end = buffer.find("\r\n\r\n")) == std::string::npos) {
      if (buffer.size() > 65536) return;
      if (!detail::recv_some(fd, buffer)) return;
    }
    const std::string head = buffer.substr(0, end);
    buffer.erase(0, end + 4);
    try {
      detail::send_all(fd, websocket_handshake_response(head));
    } catch (const Error&) {
      detail::send_all(fd, "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n");
      return;
    }
    std::string message;
    for (;;) {
      while (auto f = decode_ws_frame(buffer)) {
        switch (f->opcode) {
          case WsOpcode::Ping:
            detail::send_all(fd, encode_ws_frame(WsOpcode::Pong, f->payload));
            break;
          case WsOpcode::Pong:
            break;
          case WsOpcode::Close:
            detail::send_all(fd, encode_ws_frame(WsOpcode::Close, f->payload.substr(0, 2)));
            return;
          case WsOpcode::Text:
          case WsOpcode::Binary:
          case WsOpcode::Continuation:
            message += f->payload;
            if (message.size() > kMaxMessageBytes) return;
            if (f->fin) {
              detail::send_all(fd, encode_ws_frame(WsOpcode::Text, handler_(message)));
              message.clear();
            }
            break;
          default:
            return;
        }
      }
      if (!detail::recv_some(fd, buffer)) return;
    }
  }

  Handler handler_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::set<int> open_;
  std::vector<std::thread> workers_;
};

// The simulator service: a FrameServer in front of a SessionManager.
class Server {
 public:
  explicit Server(std::size_t max_sessions = kDefaultMaxSessions)
      : sessions_(max_sessions),
        frames_([this](std::string_view text) { return sessions_.handle_text(text); }) {}

  void start(int port = default_port(), const std::string& host = "127.0.0.1") {
    frames_.start(port, host);
  }
  void stop() { frames_.stop(); }
  int port() const { return frames_.port(); }
  SessionManager& sessions() { return sessions_; }

 private:
  SessionManager sessions_;
  FrameServer frames_;
};

}  // namespace towerforge::service
