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

// Byte-level pieces of the wire protocol: base64, the 4-byte length prefix
// used on raw TCP, and the subset of WebSocket framing browsers need.
// Needs OpenSSL's libcrypto.

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "towerforge/error.hpp"

namespace towerforge::service {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxMessageBytes = 16u << 20;

inline std::string base64_encode(const std::uint8_t* data, std::size_t n) {
  std::string out(4 * ((n + 2) / 3), '\0');
  const int len = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data,
                                  static_cast<int>(n));
  out.resize(static_cast<std::size_t>(len));
  return out;
}

inline std::string base64_encode(std::string_view s) {
  return base64_encode(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

inline std::vector<std::uint8_t> base64_decode(std::string_view s) {
  if (s.size() % 4 != 0) throw Error(ErrorCode::BadRequest, "base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (s.size() / 4));
  const int len = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(s.data()),
                                  static_cast<int>(s.size()));
  if (len < 0) throw Error(ErrorCode::BadRequest, "bad base64");
  std::size_t pad = 0;
  if (!s.empty() && s.back() == '=') ++pad;
  if (s.size() > 1 && s[s.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(len) - pad);
  return out;
}

// Raw TCP framing: 4-byte big-endian payload length, then the JSON text.
inline std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxMessageBytes) throw Error(ErrorCode::BadRequest, "message too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>(n >> 24));
  out.push_back(static_cast<char>(n >> 16));
  out.push_back(static_cast<char>(n >> 8));
  out.push_back(static_cast<char>(n));
  out.append(payload);
  return out;
}

// Pops one complete frame off the front of `buffer`, if there is one.
inline std::optional<std::string> decode_frame(std::string& buffer) {
  if (buffer.size() < 4) return std::nullopt;
  const auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer[i])); };
  const std::uint32_t n = b(0) << 24 | b(1) << 16 | b(2) << 8 | b(3);
  if (n > kMaxMessageBytes) throw Error(ErrorCode::BadRequest, "frame length too large");
  if (buffer.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer.substr(4, n);
  buffer.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

// ---------------------------------------------------------------------------
// WebSocket.

inline std::string websocket_accept(std::string_view client_key) {
  static constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  std::string in(client_key);
  in += kGuid;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(in.data()), in.size(), digest);
  return base64_encode(digest, SHA_DIGEST_LENGTH);
}

// Value of a header in an HTTP request head, case-insensitive on the name.
inline std::optional<std::string> http_header(std::string_view head, std::string_view name) {
  auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; };
  std::size_t pos = 0;
  while (pos < head.size()) {
    std::size_t eol = head.find("\r\n", pos);
    if (eol == std::string_view::npos) eol = head.size();
    std::string_view line = head.substr(pos, eol - pos);
    pos = eol + 2;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon != name.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < colon; ++i)
      if (lower(line[i]) != lower(name[i])) same = false;
    if (!same) continue;
    std::string_view v = line.substr(colon + 1);
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
    return std::string(v);
  }
  return std::nullopt;
}

inline std::string websocket_handshake_response(std::string_view request_head) {
  auto key = http_header(request_head, "Sec-WebSocket-Key");
  if (!key) throw Error(ErrorCode::BadRequest, "missing Sec-WebSocket-Key");
  return "HTTP/1.1 101 Switching Protocols\r\n"
         "Upgrade: websocket\r\n"
         "Connection: Upgrade\r\n"
         "Sec-WebSocket-Accept: " + websocket_accept(*key) + "\r\n\r\n";
}

enum class WsOpcode : std::uint8_t {
  Continuation = 0x0, Text = 0x1, Binary = 0x2, Close = 0x8, Ping = 0x9, Pong = 0xA
};

struct WsFrame {
  bool fin = true;
  WsOpcode opcode = WsOpcode::Text;
  std::string payload;
};

// Server frames are never masked; client frames always are.
inline std::string encode_ws_frame(WsOpcode op, std::string_view payload, bool mask = false,
                                   std::uint32_t mask_key = 0x5a17c3e9u) {
  std::string out;
  out.push_back(static_cast<char>(0x80 | static_cast<std::uint8_t>(op)));
  const std::uint8_t mbit = mask ? 0x80 : 0;
  const std::uint64_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<char>(mbit | n));
  } else if (n <= 0xFFFF) {
    out.push_back(static_cast<char>(mbit | 126));
    out.push_back(static_cast<char>(n >> 8));
    out.push_back(static_cast<char>(n));
  } else {
    out.push_back(static_cast<char>(mbit | 127));
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>(n >> (8 * i)));
  }
  if (!mask) {
    out.append(payload);
    return out;
  }
  char key[4] = {static_cast<char>(mask_key >> 24), static_cast<char>(mask_key >> 16),
                 static_cast<char>(mask_key >> 8), static_cast<char>(mask_key)};
  out.append(key, 4);
  for (std::size_t i = 0; i < payload.size(); ++i) out.push_back(payload[i] ^ key[i % 4]);
  return out;
}

// Pops one frame off the front of `buffer`, unmasking it.
inline std::optional<WsFrame> decode_ws_frame(std::string& buffer) {
  if (buffer.size() < 2) return std::nullopt;
  const auto u = [&](std::size_t i) { return static_cast<std::uint8_t>(buffer[i]); };
  WsFrame f;
  f.fin = u(0) & 0x80;
  f.opcode = static_cast<WsOpcode>(u(0) & 0x0F);
  const bool masked = u(1) & 0x80;
  std::uint64_t n = u(1) & 0x7F;
  std::size_t pos = 2;
  if (n == 126) {
    if (buffer.size() < 4) return std::nullopt;
    n = static_cast<std::uint64_t>(u(2)) << 8 | u(3);
    pos = 4;
  } else if (n == 127) {
    if (buffer.size() < 10) return std::nullopt;
    n = 0;
    for (int i = 0; i < 8; ++i) n = n << 8 | u(2 + i);
    pos = 10;
  }
  if (n > kMaxMessageBytes) throw Error(ErrorCode::BadRequest, "websocket frame too large");
  const std::size_t key_at = pos;
  if (masked) pos += 4;
  if (buffer.size() < pos + n) return std::nullopt;
  f.payload = buffer.substr(pos, static_cast<std::size_t>(n));
  if (masked)
    for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] ^= buffer[key_at + i % 4];
  buffer.erase(0, pos + static_cast<std::size_t>(n));
  return f;
}

}  // namespace towerforge::service
