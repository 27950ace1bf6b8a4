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

// Messages exchanged between agents and the residuals / Jacobians of the four
// factor families (prior, odometry, inter-agent range, agent-to-anchor range).
//
// Conventions shared by every factor:
//   * poses are perturbed on the right, pose <- pose * exp(delta);
//   * residuals are "measured minus predicted" and Jacobians are d residual /
//     d delta, so the Gauss-Newton step solves J^T W J dx = -J^T W r;
//   * odometry residual  log(Z * S_i * S_j^-1), zero iff Z = S_j * S_i^-1;
//   * prior residual     log(P * S^-1); if S = exp(xi) * P it is exactly -xi.

#ifndef RANGEFUSE_MEASUREMENTS_HPP
#define RANGEFUSE_MEASUREMENTS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rangefuse/sim3.hpp"

namespace rangefuse {

using AgentId = std::uint16_t;
using AnchorId = std::uint16_t;
using RowJacobian = Eigen::Matrix<double, 1, 7>;

/// Distances below this make a range factor's Jacobian undefined.
inline constexpr double kMinRangeDistance = 1e-9;

/// Throws kNonSpdInformation unless `m` is symmetric (1e-12 relative) with
/// strictly positive eigenvalues.
void require_spd(const Eigen::MatrixXd& m, const char* what);

/// Pose estimate broadcast once per keyframe.
///
/// The pose is held in closed-branch twist coordinates, the same seven numbers
/// that go on the wire, so decode(encode(m)) == m bit for bit. `covariance` is
/// the covariance of the odometry error exp(xi) in Z = exp(xi) S_j S_i^-1 that
/// produced this keyframe (for an agent's first keyframe: of its initial
/// alignment, in body coordinates).
class KeyframeMsg {
 public:
  KeyframeMsg(AgentId agent_id, double timestamp, const Sim3Pose& pose,
              const Mat7& covariance);
  KeyframeMsg(AgentId agent_id, double timestamp, const Twist7& pose_twist,
              const Mat7& covariance);

  [[nodiscard]] AgentId agent_id() const { return agent_id_; }
  [[nodiscard]] double timestamp() const { return timestamp_; }
  [[nodiscard]] const Twist7& pose_twist() const { return pose_twist_; }
  [[nodiscard]] Sim3Pose pose() const { return exp(pose_twist_); }
  [[nodiscard]] const Mat7& covariance() const { return covariance_; }

  bool operator==(const KeyframeMsg& other) const = default;

 private:
  AgentId agent_id_;
  double timestamp_;
  Twist7 pose_twist_;
  Mat7 covariance_;
};

/// Range between two agents' ranging modules. Stored with agent_a < agent_b.
class InterRangeMsg {
 public:
  InterRangeMsg(AgentId agent_a, AgentId agent_b, double timestamp,
                double range, double variance);

  [[nodiscard]] AgentId agent_a() const { return agent_a_; }
  [[nodiscard]] AgentId agent_b() const { return agent_b_; }
  [[nodiscard]] double timestamp() const { return timestamp_; }
  [[nodiscard]] double range() const { return range_; }
  [[nodiscard]] double variance() const { return variance_; }

  bool operator==(const InterRangeMsg& other) const = default;

 private:
  AgentId agent_a_;
  AgentId agent_b_;
  double timestamp_;
  double range_;
  double variance_;
};

class AnchorRangeMsg {
 public:
  AnchorRangeMsg(AgentId agent_id, AnchorId anchor_id, double timestamp,
                 double range, double variance);

  [[nodiscard]] AgentId agent_id() const { return agent_id_; }
  [[nodiscard]] AnchorId anchor_id() const { return anchor_id_; }
  [[nodiscard]] double timestamp() const { return timestamp_; }
  [[nodiscard]] double range() const { return range_; }
  [[nodiscard]] double variance() const { return variance_; }

  bool operator==(const AnchorRangeMsg& other) const = default;

 private:
  AgentId agent_id_;
  AnchorId anchor_id_;
  double timestamp_;
  double range_;
  double variance_;
};

/// Relative-motion measurement Z between consecutive keyframes i -> j of one
/// agent, with its information matrix in the residual's twist coordinates.
class OdometryEdge {
 public:
  OdometryEdge(AgentId agent_id, double timestamp_i, double timestamp_j,
               const Sim3Pose& relative_pose, const Mat7& information);

  [[nodiscard]] AgentId agent_id() const { return agent_id_; }
  [[nodiscard]] double timestamp_i() const { return timestamp_i_; }
  [[nodiscard]] double timestamp_j() const { return timestamp_j_; }
  [[nodiscard]] const Sim3Pose& relative_pose() const { return relative_pose_; }
  [[nodiscard]] const Mat7& information() const { return information_; }

 private:
  AgentId agent_id_;
  double timestamp_i_;
  double timestamp_j_;
  Sim3Pose relative_pose_;
  Mat7 information_;
};

class PriorFactor {
 public:
  PriorFactor(AgentId agent_id, double timestamp, const Sim3Pose& prior_pose,
              const Mat7& information);

  [[nodiscard]] AgentId agent_id() const { return agent_id_; }
  [[nodiscard]] double timestamp() const { return timestamp_; }
  [[nodiscard]] const Sim3Pose& prior_pose() const { return prior_pose_; }
  [[nodiscard]] const Mat7& information() const { return information_; }

 private:
  AgentId agent_id_;
  double timestamp_;
  Sim3Pose prior_pose_;
  Mat7 information_;
};

// ---------------------------------------------------------------------------
// Residuals

/// Position of the ranging antenna mounted at `lever_arm` in the body frame.
[[nodiscard]] Vec3 antenna_position(const Sim3Pose& pose,
                                    const Vec3& lever_arm = Vec3::Zero());

/// measured - |p_a - p_b|. Throws kCoincidentPositions below 1e-9 m.
[[nodiscard]] double range_residual(const Sim3Pose& pose_a,
                                    const Sim3Pose& pose_b, double measured,
                                    const Vec3& lever_a = Vec3::Zero(),
                                    const Vec3& lever_b = Vec3::Zero());
[[nodiscard]] double anchor_range_residual(const Sim3Pose& pose,
                                           const Vec3& anchor, double measured,
                                           const Vec3& lever = Vec3::Zero());
[[nodiscard]] Twist7 odometry_residual(const Sim3Pose& pose_i,
                                       const Sim3Pose& pose_j,
                                       const Sim3Pose& z);
[[nodiscard]] Twist7 prior_residual(const Sim3Pose& pose,
                                    const Sim3Pose& prior);

// ---------------------------------------------------------------------------
// Jacobians (right perturbation, see the header comment)

struct RangeJacobians {
  RowJacobian pose_a;
  RowJacobian pose_b;
};

struct OdometryJacobians {
  Mat7 pose_i;
  Mat7 pose_j;
};

[[nodiscard]] RangeJacobians range_jacobians(
    const Sim3Pose& pose_a, const Sim3Pose& pose_b,
    const Vec3& lever_a = Vec3::Zero(), const Vec3& lever_b = Vec3::Zero());
[[nodiscard]] RowJacobian anchor_range_jacobian(
    const Sim3Pose& pose, const Vec3& anchor,
    const Vec3& lever = Vec3::Zero());
[[nodiscard]] OdometryJacobians odometry_jacobians(const Sim3Pose& pose_i,
                                                   const Sim3Pose& pose_j,
                                                   const Sim3Pose& z);
[[nodiscard]] Mat7 prior_jacobian(const Sim3Pose& pose, const Sim3Pose& prior);

// ---------------------------------------------------------------------------
// Weighting

struct WhitenedResidual {
  Eigen::VectorXd whitened;  ///< L^T r with W = L L^T
  double cost = 0.0;         ///< r^T W r
};

/// Throws kNonSpdInformation if `information` is not SPD.
[[nodiscard]] WhitenedResidual whiten(const Eigen::VectorXd& residual,
                                      const Eigen::MatrixXd& information);
[[nodiscard]] WhitenedResidual whiten(double residual, double information);

/// Information of the left (global-frame) error exp(Ad(pose) xi) when xi has
/// right-perturbation covariance `body_covariance` at `pose`.
[[nodiscard]] Mat7 information_from_body_covariance(const Sim3Pose& pose,
                                                    const Mat7& body_covariance);

/// Odometry edges Z = S_j S_i^-1 between consecutive keyframes of one agent,
/// weighted by the inverse of keyframe j's covariance. Keyframes must share the
/// agent id and have strictly increasing timestamps.
[[nodiscard]] std::vector<OdometryEdge> odometry_from_keyframes(
    std::span<const KeyframeMsg> agent_keyframes);

}  // namespace rangefuse

#endif  // RANGEFUSE_MEASUREMENTS_HPP
