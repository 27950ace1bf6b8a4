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

#include "rangefuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rangefuse/error.hpp"

namespace rangefuse {

namespace {

void check_matched(std::span<const TimedSim3> estimate,
                   std::span<const TimedSim3> truth) {
  if (estimate.size() != truth.size()) {
    throw Error(ErrorCode::kTimestampMismatch,
                std::to_string(estimate.size()) + " estimated vs " +
                    std::to_string(truth.size()) + " true poses");
  }
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    if (std::abs(estimate[k].timestamp - truth[k].timestamp) > 1e-9) {
      throw Error(ErrorCode::kTimestampMismatch,
                  "pose " + std::to_string(k) + " has t=" +
                      std::to_string(estimate[k].timestamp) + " vs " +
                      std::to_string(truth[k].timestamp));
    }
  }
}

}  // namespace

std::vector<double> position_errors(std::span<const TimedSim3> estimate,
                                    std::span<const TimedSim3> truth,
                                    Alignment alignment) {
  check_matched(estimate, truth);
  std::vector<double> out;
  out.reserve(estimate.size());
  if (estimate.empty()) return out;
  Mat3 r = Mat3::Identity();
  Vec3 from = Vec3::Zero();
  Vec3 to = Vec3::Zero();
  if (alignment == Alignment::kRigidFirstPose) {
    r = truth.front().pose.rotation().matrix() *
        estimate.front().pose.rotation().matrix().transpose();
    from = estimate.front().pose.position();
    to = truth.front().pose.position();
  }
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    const Vec3 p = r * (estimate[k].pose.position() - from) + to;
    out.push_back((p - truth[k].pose.position()).norm());
  }
  return out;
}

double ate_rmse(std::span<const TimedSim3> estimate,
                std::span<const TimedSim3> truth, Alignment alignment) {
  const std::vector<double> errors = position_errors(estimate, truth, alignment);
  if (errors.empty()) return 0.0;
  double sum = 0.0;
  for (double e : errors) sum += e * e;
  return std::sqrt(sum / static_cast<double>(errors.size()));
}

std::vector<double> scale_error_series(std::span<const TimedSim3> estimate,
                                       std::span<const TimedSim3> truth) {
  check_matched(estimate, truth);
  std::vector<double> out;
  out.reserve(estimate.size());
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    out.push_back(std::abs(estimate[k].pose.scale() / truth[k].pose.scale() - 1.0));
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(mid),
                   values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(),
                                         values.begin() + static_cast<long>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace rangefuse
