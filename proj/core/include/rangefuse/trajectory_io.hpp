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

#ifndef RANGEFUSE_TRAJECTORY_IO_HPP
#define RANGEFUSE_TRAJECTORY_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rangefuse/sim3.hpp"

namespace rangefuse {

struct TimedPose {
  double timestamp = 0.0;
  SE3Pose pose;
};

using Trajectory = std::vector<TimedPose>;

struct TimedSim3 {
  double timestamp = 0.0;
  Sim3Pose pose;
};

enum class TrajectoryFormat {
  kKitti,  ///< 12 floats per line, row-major [R | t]; no timestamps
  kTum,    ///< "t tx ty tz qx qy qz qw"
};

/// Rotations whose orthonormality error exceeds this are re-projected with a
/// warning; smaller deviations (print precision) are projected silently.
inline constexpr double kOrthonormalWarnThreshold = 1e-3;
/// Beyond this the line is rejected with kNonOrthonormalRotation.
inline constexpr double kOrthonormalRejectThreshold = 0.5;

struct ReadOptions {
  double kitti_rate_hz = 10.0;  ///< KITTI timestamps are k / rate
  std::vector<std::string>* warnings = nullptr;
};

/// Throws kParseError naming the 1-based line number. Blank lines and lines
/// starting with '#' are skipped.
[[nodiscard]] Trajectory read_trajectory(std::istream& in,
                                         TrajectoryFormat format,
                                         const ReadOptions& options = {});
[[nodiscard]] Trajectory load_trajectory(const std::filesystem::path& path,
                                         TrajectoryFormat format,
                                         const ReadOptions& options = {});

/// Round-trip precision (17 significant digits).
void write_trajectory(std::ostream& out, const Trajectory& trajectory,
                      TrajectoryFormat format);
/// TUM lines for similarity poses: position s t and the rotation R.
void write_tum(std::ostream& out, std::span<const TimedSim3> trajectory);

/// Left-multiplies every pose by the KITTI camera-to-z-up frame change
/// (x, y, z) -> (x, z, -y).
[[nodiscard]] Trajectory kitti_to_z_up(const Trajectory& trajectory);

}  // namespace rangefuse

#endif  // RANGEFUSE_TRAJECTORY_IO_HPP
