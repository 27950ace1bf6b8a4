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

#include "rangefuse/trajectory_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "rangefuse/error.hpp"

namespace rangefuse {

namespace {

std::vector<double> parse_numbers(const std::string& line, std::size_t line_no) {
  std::vector<double> values;
  const char* p = line.data();
  const char* end = line.data() + line.size();
  while (true) {
    while (p != end && (*p == ' ' || *p == '\t' || *p == '\r' || *p == ',')) ++p;
    if (p == end) break;
    double v = 0.0;
    const auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || !std::isfinite(v)) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": bad number near '" +
                      std::string(p, std::min<std::size_t>(16, end - p)) + "'");
    }
    values.push_back(v);
    p = next;
  }
  return values;
}

Rotation3 checked_rotation(const Mat3& m, std::size_t line_no,
                           const ReadOptions& options) {
  const double err = Rotation3::orthonormality_error(m);
  if (!(err <= kOrthonormalRejectThreshold)) {
    throw Error(ErrorCode::kNonOrthonormalRotation,
                "line " + std::to_string(line_no) + ": orthonormality error " +
                    std::to_string(err));
  }
  if (err > kOrthonormalWarnThreshold && options.warnings != nullptr) {
    options.warnings->push_back("line " + std::to_string(line_no) +
                                ": rotation re-orthonormalized (error " +
                                std::to_string(err) + ")");
  }
  return err <= kRotationTolerance ? Rotation3::from_matrix(m)
                                   : Rotation3::nearest(m);
}

}  // namespace

Trajectory read_trajectory(std::istream& in, TrajectoryFormat format,
                           const ReadOptions& options) {
  if (format == TrajectoryFormat::kKitti && !(options.kitti_rate_hz > 0.0)) {
    throw Error(ErrorCode::kConfigError, "KITTI rate must be positive");
  }
  Trajectory out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::vector<double> v = parse_numbers(line, line_no);
    TimedPose tp;
    if (format == TrajectoryFormat::kKitti) {
      if (v.size() != 12) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": expected 12 values, got " +
                        std::to_string(v.size()));
      }
      Mat3 r;
      r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
      tp.timestamp = static_cast<double>(out.size()) / options.kitti_rate_hz;
      tp.pose.rotation = checked_rotation(r, line_no, options);
      tp.pose.translation = Vec3(v[3], v[7], v[11]);
    } else {
      if (v.size() != 8) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": expected 8 values, got " +
                        std::to_string(v.size()));
      }
      const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
      const double norm = q.norm();
      if (std::abs(norm - 1.0) > kOrthonormalRejectThreshold) {
        throw Error(ErrorCode::kNonOrthonormalRotation,
                    "line " + std::to_string(line_no) + ": quaternion norm " +
                        std::to_string(norm));
      }
      if (std::abs(norm - 1.0) > kOrthonormalWarnThreshold &&
          options.warnings != nullptr) {
        options.warnings->push_back("line " + std::to_string(line_no) +
                                    ": quaternion renormalized");
      }
      tp.timestamp = v[0];
      tp.pose.rotation = Rotation3::from_quaternion(q);
      tp.pose.translation = Vec3(v[1], v[2], v[3]);
    }
    if (!out.empty() && !(tp.timestamp > out.back().timestamp)) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) +
                      ": timestamps must be strictly increasing");
    }
    out.push_back(tp);
  }
  return out;
}

Trajectory load_trajectory(const std::filesystem::path& path,
                           TrajectoryFormat format, const ReadOptions& options) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  }
  return read_trajectory(in, format, options);
}

void write_trajectory(std::ostream& out, const Trajectory& trajectory,
                      TrajectoryFormat format) {
  out << std::setprecision(17);
  for (const TimedPose& tp : trajectory) {
    const Mat3& r = tp.pose.rotation.matrix();
    const Vec3& t = tp.pose.translation;
    if (format == TrajectoryFormat::kKitti) {
      for (int row = 0; row < 3; ++row) {
        out << r(row, 0) << ' ' << r(row, 1) << ' ' << r(row, 2) << ' ' << t[row]
            << (row == 2 ? '\n' : ' ');
      }
    } else {
      const Eigen::Quaterniond q = tp.pose.rotation.quaternion();
      out << tp.timestamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' '
          << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
    }
  }
}

void write_tum(std::ostream& out, std::span<const TimedSim3> trajectory) {
  out << std::setprecision(17);
  for (const TimedSim3& tp : trajectory) {
    const Vec3 p = tp.pose.position();
    const Eigen::Quaterniond q = tp.pose.rotation().quaternion();
    out << tp.timestamp << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << ' '
        << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

Trajectory kitti_to_z_up(const Trajectory& trajectory) {
  Mat3 c;
  // clang-format off
  c << 1.0, 0.0,  0.0,
       0.0, 0.0,  1.0,
       0.0, -1.0, 0.0;
  // clang-format on
  const SE3Pose frame{Rotation3::from_matrix(c), Vec3::Zero()};
  Trajectory out;
  out.reserve(trajectory.size());
  for (const TimedPose& tp : trajectory) {
    out.push_back({tp.timestamp, frame * tp.pose});
  }
  return out;
}

}  // namespace rangefuse
