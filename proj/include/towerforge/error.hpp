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

#include <stdexcept>
#include <string>
#include <string_view>

namespace towerforge {

// Every failure the library reports carries one of these codes. The names are
// also the error codes of the wire protocol, so keep them stable.
enum class ErrorCode {
  StaleMatch,
  InvariantViolation,
  GenerationFailed,
  ParseError,
  MissingTemplate,
  InstantiationFailed,
  NotAPuzzleRoom,
  OutOfRange,
  InvalidAction,
  EpisodeDone,
  BadConfig,
  SeedOverlap,
  ThemeOverlap,
  PlanFailure,
  CapacityExceeded,
  UnknownSession,
  Busy,
  BadRequest,
  ConnectionError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::StaleMatch: return "StaleMatch";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingTemplate: return "MissingTemplate";
    case ErrorCode::InstantiationFailed: return "InstantiationFailed";
    case ErrorCode::NotAPuzzleRoom: return "NotAPuzzleRoom";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidAction: return "InvalidAction";
    case ErrorCode::EpisodeDone: return "EpisodeDone";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::SeedOverlap: return "SeedOverlap";
    case ErrorCode::ThemeOverlap: return "ThemeOverlap";
    case ErrorCode::PlanFailure: return "PlanFailure";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::ConnectionError: return "ConnectionError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace towerforge
