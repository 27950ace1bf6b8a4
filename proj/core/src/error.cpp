// Copyright 2026 The rangefuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rangefuse/error.hpp"

namespace rangefuse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAngleNearPi: return "AngleNearPi";
    case ErrorCode::kNonPositiveScale: return "NonPositiveScale";
    case ErrorCode::kNonOrthonormalRotation: return "NonOrthonormalRotation";
    case ErrorCode::kCoincidentPositions: return "CoincidentPositions";
    case ErrorCode::kNonSpdInformation: return "NonSPDInformation";
    case ErrorCode::kInvalidMessage: return "InvalidMessage";
    case ErrorCode::kDanglingFactor: return "DanglingFactor";
    case ErrorCode::kMissingPrior: return "MissingPrior";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kNonFiniteCost: return "NonFiniteCost";
    case ErrorCode::kUnknownKeyframe: return "UnknownKeyframe";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kTooFewPoses: return "TooFewPoses";
    case ErrorCode::kMalformedFrame: return "MalformedFrame";
    case ErrorCode::kUnknownMsgType: return "UnknownMsgType";
    case ErrorCode::kTimestampMismatch: return "TimestampMismatch";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace rangefuse
