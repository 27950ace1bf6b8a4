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

#include "rangefuse/comms.hpp"

#include <bit>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "rangefuse/error.hpp"

namespace rangefuse {

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian targets are not supported");

class Writer {
 public:
  explicit Writer(std::size_t size) { bytes_.reserve(size); }

  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    bytes_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
  }
  Bytes take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw Error(ErrorCode::kMalformedFrame, "frame truncated");
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void header(Writer& w, AgentId agent, MsgType type, double timestamp) {
  w.u16(agent);
  w.u8(static_cast<std::uint8_t>(type));
  w.f64(timestamp);
}

std::size_t frame_size(std::uint8_t type) {
  switch (static_cast<MsgType>(type)) {
    case MsgType::kKeyframe:
      return kKeyframeBytes;
    case MsgType::kKeyframeFullCovariance:
      return kKeyframeFullBytes;
    case MsgType::kInterRange:
    case MsgType::kAnchorRange:
      return kRangeBytes;
  }
  throw Error(ErrorCode::kUnknownMsgType,
              "message type " + std::to_string(type));
}

// Construction errors from decoded content are framing errors to the caller.
template <typename F>
WireMessage build(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedFrame, e.what());
  }
}

}  // namespace

Bytes encode(const KeyframeMsg& msg, bool full_covariance) {
  Writer w(full_covariance ? kKeyframeFullBytes : kKeyframeBytes);
  header(w, msg.agent_id(),
         full_covariance ? MsgType::kKeyframeFullCovariance : MsgType::kKeyframe,
         msg.timestamp());
  for (int i = 0; i < 7; ++i) w.f64(msg.pose_twist().vector()[i]);
  const Mat7& c = msg.covariance();
  for (int r = 0; r < 7; ++r) {
    for (int col = full_covariance ? 0 : r; col < 7; ++col) w.f64(c(r, col));
  }
  return w.take();
}

Bytes encode(const InterRangeMsg& msg) {
  Writer w(kRangeBytes);
  header(w, msg.agent_a(), MsgType::kInterRange, msg.timestamp());
  w.u16(msg.agent_b());
  w.f64(msg.range());
  w.f64(msg.variance());
  return w.take();
}

Bytes encode(const AnchorRangeMsg& msg) {
  Writer w(kRangeBytes);
  header(w, msg.agent_id(), MsgType::kAnchorRange, msg.timestamp());
  w.u16(msg.anchor_id());
  w.f64(msg.range());
  w.f64(msg.variance());
  return w.take();
}

Bytes encode(const WireMessage& msg) {
  return std::visit([](const auto& m) { return encode(m); }, msg);
}

std::size_t encoded_size(const WireMessage& msg) {
  return std::holds_alternative<KeyframeMsg>(msg) ? kKeyframeBytes : kRangeBytes;
}

WireMessage decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < kHeaderBytes) {
    throw Error(ErrorCode::kMalformedFrame,
                "frame of " + std::to_string(frame.size()) + " bytes");
  }
  const std::size_t expected = frame_size(frame[2]);
  if (frame.size() != expected) {
    throw Error(ErrorCode::kMalformedFrame,
                "frame of " + std::to_string(frame.size()) + " bytes, expected " +
                    std::to_string(expected));
  }
  Reader r(frame);
  const AgentId agent = r.u16();
  const auto type = static_cast<MsgType>(r.u8());
  const double timestamp = r.f64();
  switch (type) {
    case MsgType::kKeyframe:
    case MsgType::kKeyframeFullCovariance: {
      Vec7 twist;
      for (int i = 0; i < 7; ++i) twist[i] = r.f64();
      Mat7 c;
      const bool full = type == MsgType::kKeyframeFullCovariance;
      for (int row = 0; row < 7; ++row) {
        for (int col = full ? 0 : row; col < 7; ++col) {
          c(row, col) = r.f64();
          if (!full) c(col, row) = c(row, col);
        }
      }
      return build([&] { return KeyframeMsg(agent, timestamp, Twist7(twist), c); });
    }
    case MsgType::kInterRange: {
      const AgentId peer = r.u16();
      const double range = r.f64();
      const double variance = r.f64();
      return build([&] {
        if (peer <= agent) {
          throw Error(ErrorCode::kInvalidMessage, "peer id must exceed agent id");
        }
        return InterRangeMsg(agent, peer, timestamp, range, variance);
      });
    }
    case MsgType::kAnchorRange: {
      const AnchorId anchor = r.u16();
      const double range = r.f64();
      const double variance = r.f64();
      return build(
          [&] { return AnchorRangeMsg(agent, anchor, timestamp, range, variance); });
    }
  }
  throw Error(ErrorCode::kUnknownMsgType, "unreachable message type");
}

Bytes encode_stream(std::span<const WireMessage> messages) {
  Bytes out;
  for (const WireMessage& m : messages) {
    const Bytes frame = encode(m);
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

std::vector<WireMessage> decode_stream(std::span<const std::uint8_t> bytes) {
  std::vector<WireMessage> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < kHeaderBytes) {
      throw Error(ErrorCode::kMalformedFrame, "trailing bytes in stream");
    }
    const std::size_t size = frame_size(bytes[pos + 2]);
    if (bytes.size() - pos < size) {
      throw Error(ErrorCode::kMalformedFrame, "stream truncated");
    }
    out.push_back(decode(bytes.subspan(pos, size)));
    pos += size;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON mirror

std::string to_json_line(const WireMessage& msg) {
  nlohmann::json j;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KeyframeMsg>) {
          j["msg_type"] = "keyframe";
          j["agent_id"] = m.agent_id();
          j["timestamp"] = m.timestamp();
          const Vec7& v = m.pose_twist().vector();
          j["pose"] = std::vector<double>(v.data(), v.data() + 7);
          nlohmann::json rows = nlohmann::json::array();
          for (int r = 0; r < 7; ++r) {
            std::vector<double> row(7);
            for (int c = 0; c < 7; ++c) row[c] = m.covariance()(r, c);
            rows.push_back(row);
          }
          j["covariance"] = rows;
        } else if constexpr (std::is_same_v<T, InterRangeMsg>) {
          j["msg_type"] = "inter_range";
          j["agent_a"] = m.agent_a();
          j["agent_b"] = m.agent_b();
          j["timestamp"] = m.timestamp();
          j["range"] = m.range();
          j["variance"] = m.variance();
        } else {
          j["msg_type"] = "anchor_range";
          j["agent_id"] = m.agent_id();
          j["anchor_id"] = m.anchor_id();
          j["timestamp"] = m.timestamp();
          j["range"] = m.range();
          j["variance"] = m.variance();
        }
      },
      msg);
  return j.dump();
}

WireMessage from_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFrame, e.what());
  }
  if (!j.is_object() || !j.contains("msg_type") || !j["msg_type"].is_string()) {
    throw Error(ErrorCode::kMalformedFrame, "missing msg_type");
  }
  const std::string type = j["msg_type"];
  if (type != "keyframe" && type != "inter_range" && type != "anchor_range") {
    throw Error(ErrorCode::kUnknownMsgType, type);
  }
  try {
    if (type == "keyframe") {
      const auto pose = j.at("pose").get<std::vector<double>>();
      const auto cov = j.at("covariance").get<std::vector<std::vector<double>>>();
      if (pose.size() != 7 || cov.size() != 7) {
        throw Error(ErrorCode::kMalformedFrame, "keyframe arrays must have 7 rows");
      }
      Mat7 c;
      for (int r = 0; r < 7; ++r) {
        if (cov[r].size() != 7) {
          throw Error(ErrorCode::kMalformedFrame, "covariance row length");
        }
        for (int col = 0; col < 7; ++col) c(r, col) = cov[r][col];
      }
      return KeyframeMsg(j.at("agent_id").get<AgentId>(),
                         j.at("timestamp").get<double>(),
                         Twist7(Vec7(Eigen::Map<const Vec7>(pose.data()))), c);
    }
    if (type == "inter_range") {
      return InterRangeMsg(j.at("agent_a").get<AgentId>(),
                           j.at("agent_b").get<AgentId>(),
                           j.at("timestamp").get<double>(),
                           j.at("range").get<double>(),
                           j.at("variance").get<double>());
    }
    return AnchorRangeMsg(j.at("agent_id").get<AgentId>(),
                          j.at("anchor_id").get<AnchorId>(),
                          j.at("timestamp").get<double>(),
                          j.at("range").get<double>(),
                          j.at("variance").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFrame, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedFrame) throw;
    throw Error(ErrorCode::kMalformedFrame, e.what());
  }
}

// ---------------------------------------------------------------------------
// Accounting

void validate(const BaselineCostModel& model) {
  if (!(model.ccm_slam_lb > 0.0) || !(model.ccm_slam_ub > 0.0) ||
      !(model.dslam > 0.0)) {
    throw Error(ErrorCode::kConfigError, "baseline byte costs must be positive");
  }
}

AccountingReport account(std::span<const WireMessage> stream,
                         const BaselineCostModel& baselines) {
  validate(baselines);
  AccountingReport report;
  AccountingRow row;
  auto baseline = [&](AccountingRow& r) {
    const auto n = static_cast<double>(r.keyframes);
    r.ccm_slam_lb_bytes = baselines.ccm_slam_lb * n;
    r.ccm_slam_ub_bytes = baselines.ccm_slam_ub * n;
    r.dslam_bytes = baselines.dslam * n;
  };
  for (const WireMessage& m : stream) {
    row.covor_bytes += static_cast<double>(encoded_size(m));
    if (std::holds_alternative<KeyframeMsg>(m)) {
      ++row.keyframes;
      baseline(row);
      report.series.push_back(row);
    } else {
      ++row.range_messages;
    }
  }
  baseline(row);
  report.total = row;
  if (row.keyframes > 0) report.covor_to_dslam = row.covor_bytes / row.dslam_bytes;
  return report;
}

}  // namespace rangefuse
