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

#ifndef RANGEFUSE_METRICS_HPP
#define RANGEFUSE_METRICS_HPP

#include <span>
#include <vector>

#include "rangefuse/trajectory_io.hpp"

namespace rangefuse {

enum class Alignment {
  kNone,            ///< compare in the shared global frame
  kRigidFirstPose,  ///< rotate/translate the estimate onto the first true pose
};

/// Timestamps of the two trajectories must agree pairwise to 1e-9 s, else
/// kTimestampMismatch.
[[nodiscard]] std::vector<double> position_errors(
    std::span<const TimedSim3> estimate, std::span<const TimedSim3> truth,
    Alignment alignment = Alignment::kNone);

/// sqrt(mean(position_errors^2)).
[[nodiscard]] double ate_rmse(std::span<const TimedSim3> estimate,
                              std::span<const TimedSim3> truth,
                              Alignment alignment = Alignment::kNone);

/// |s_est / s_true - 1| per keyframe.
[[nodiscard]] std::vector<double> scale_error_series(
    std::span<const TimedSim3> estimate, std::span<const TimedSim3> truth);

[[nodiscard]] double median(std::vector<double> values);

}  // namespace rangefuse

#endif  // RANGEFUSE_METRICS_HPP
