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

// Little-endian wire format. Every frame starts with an 11-byte header
//
//     agent_id u16 | msg_type u8 | timestamp f64
//
// followed by
//
//     keyframe        pose twist 7 x f64, covariance upper triangle 28 x f64
//     keyframe (full) pose twist 7 x f64, covariance row-major 49 x f64
//     inter-range     peer id u16, range f64, variance f64
//     anchor-range    anchor id u16, range f64, variance f64

#ifndef RANGEFUSE_COMMS_HPP
#define RANGEFUSE_COMMS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rangefuse/measurements.hpp"

namespace rangefuse {

enum class MsgType : std::uint8_t {
  kKeyframe = 1,
  kInterRange = 2,
  kAnchorRange = 3,
  kKeyframeFullCovariance = 4,
};

inline constexpr std::size_t kHeaderBytes = 11;
inline constexpr std::size_t kKeyframeBytes = 291;
inline constexpr std::size_t kKeyframeFullBytes = 459;
inline constexpr std::size_t kRangeBytes = 29;

using WireMessage = std::variant<KeyframeMsg, InterRangeMsg, AnchorRangeMsg>;
using Bytes = std::vector<std::uint8_t>;

[[nodiscard]] Bytes encode(const KeyframeMsg& msg, bool full_covariance = false);
[[nodiscard]] Bytes encode(const InterRangeMsg& msg);
[[nodiscard]] Bytes encode(const AnchorRangeMsg& msg);
[[nodiscard]] Bytes encode(const WireMessage& msg);
[[nodiscard]] std::size_t encoded_size(const WireMessage& msg);

/// Decodes exactly one frame. Throws kUnknownMsgType for an unknown type byte
/// and kMalformedFrame for a wrong length or contents that violate a message
/// invariant.
[[nodiscard]] WireMessage decode(std::span<const std::uint8_t> frame);

/// Concatenated frames, e.g. a recorded stream.
[[nodiscard]] Bytes encode_stream(std::span<const WireMessage> messages);
[[nodiscard]] std::vector<WireMessage> decode_stream(
    std::span<const std::uint8_t> bytes);

/// One JSON object per message; field names follow the in-memory schema.
[[nodiscard]] std::string to_json_line(const WireMessage& msg);
/// Throws kMalformedFrame / kUnknownMsgType like decode().
[[nodiscard]] WireMessage from_json_line(const std::string& line);

/// Per-keyframe payload of loop-closing baselines. These defaults are rough
/// estimates for comparison only (descriptor-heavy keyframes), configurable.
struct BaselineCostModel {
  double ccm_slam_lb = 32000.0;
  double ccm_slam_ub = 64000.0;
  double dslam = 17920.0;
};

void validate(const BaselineCostModel& model);

struct AccountingRow {
  std::size_t keyframes = 0;
  std::size_t range_messages = 0;
  double covor_bytes = 0.0;
  double ccm_slam_lb_bytes = 0.0;
  double ccm_slam_ub_bytes = 0.0;
  double dslam_bytes = 0.0;
};

struct AccountingReport {
  /// Cumulative totals after each keyframe message (range messages count as
  /// soon as they are seen).
  std::vector<AccountingRow> series;
  AccountingRow total;
  /// covor / dslam bytes; 0 when no keyframes. An accounting identity under
  /// the configured constants, not a measurement.
  double covor_to_dslam = 0.0;
};

[[nodiscard]] AccountingReport account(std::span<const WireMessage> stream,
                                       const BaselineCostModel& baselines);

}  // namespace rangefuse

#endif  // RANGEFUSE_COMMS_HPP
