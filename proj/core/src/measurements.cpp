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

#include "rangefuse/measurements.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "rangefuse/error.hpp"

namespace rangefuse {

namespace {

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kInvalidMessage, std::string(what) + " is not finite");
  }
}

void require_range(double range, double variance) {
  require_finite(range, "range");
  require_finite(variance, "variance");
  if (range < 0.0) {
    throw Error(ErrorCode::kInvalidMessage, "range must be >= 0");
  }
  if (variance <= 0.0) {
    throw Error(ErrorCode::kInvalidMessage, "variance must be > 0");
  }
}

// d p / d delta for p = pose * (exp(delta) * lever).
Eigen::Matrix<double, 3, 7> position_jacobian(const Sim3Pose& pose,
                                              const Vec3& lever) {
  Eigen::Matrix<double, 3, 7> local;
  local.block<3, 3>(0, 0) = -hat(lever);
  local.block<3, 3>(0, 3) = Mat3::Identity();
  local.block<3, 1>(0, 6) = lever;
  return pose.scale() * pose.rotation().matrix() * local;
}

Vec3 line_of_sight(const Vec3& from, const Vec3& to) {
  const Vec3 diff = from - to;
  const double d = diff.norm();
  if (d < kMinRangeDistance) {
    std::ostringstream msg;
    msg << "endpoints are " << d << " m apart";
    throw Error(ErrorCode::kCoincidentPositions, msg.str());
  }
  return diff / d;
}

}  // namespace

void require_spd(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.size() == 0 || !m.allFinite()) {
    throw Error(ErrorCode::kNonSpdInformation,
                std::string(what) + " is not a finite square matrix");
  }
  const double magnitude = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * magnitude) {
    throw Error(ErrorCode::kNonSpdInformation,
                std::string(what) + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw Error(ErrorCode::kNonSpdInformation,
                std::string(what) + " is not positive definite");
  }
}

// ---------------------------------------------------------------------------
// Messages

KeyframeMsg::KeyframeMsg(AgentId agent_id, double timestamp,
                         const Sim3Pose& pose, const Mat7& covariance)
    : KeyframeMsg(agent_id, timestamp, log_closed_branch(pose), covariance) {}

KeyframeMsg::KeyframeMsg(AgentId agent_id, double timestamp,
                         const Twist7& pose_twist, const Mat7& covariance)
    : agent_id_(agent_id),
      timestamp_(timestamp),
      pose_twist_(pose_twist),
      covariance_(0.5 * (covariance + covariance.transpose())) {
  require_finite(timestamp, "keyframe timestamp");
  if (!pose_twist.vector().allFinite()) {
    throw Error(ErrorCode::kInvalidMessage, "keyframe pose is not finite");
  }
  require_spd(covariance, "keyframe covariance");
}

InterRangeMsg::InterRangeMsg(AgentId agent_a, AgentId agent_b,
                             double timestamp, double range, double variance)
    : agent_a_(std::min(agent_a, agent_b)),
      agent_b_(std::max(agent_a, agent_b)),
      timestamp_(timestamp),
      range_(range),
      variance_(variance) {
  if (agent_a == agent_b) {
    throw Error(ErrorCode::kInvalidMessage, "inter-agent range to itself");
  }
  require_finite(timestamp, "range timestamp");
  require_range(range, variance);
}

AnchorRangeMsg::AnchorRangeMsg(AgentId agent_id, AnchorId anchor_id,
                               double timestamp, double range, double variance)
    : agent_id_(agent_id),
      anchor_id_(anchor_id),
      timestamp_(timestamp),
      range_(range),
      variance_(variance) {
  require_finite(timestamp, "range timestamp");
  require_range(range, variance);
}

OdometryEdge::OdometryEdge(AgentId agent_id, double timestamp_i,
                           double timestamp_j, const Sim3Pose& relative_pose,
                           const Mat7& information)
    : agent_id_(agent_id),
      timestamp_i_(timestamp_i),
      timestamp_j_(timestamp_j),
      relative_pose_(relative_pose),
      information_(information) {
  require_finite(timestamp_i, "odometry timestamp");
  require_finite(timestamp_j, "odometry timestamp");
  if (!(timestamp_i < timestamp_j)) {
    throw Error(ErrorCode::kInvalidMessage,
                "odometry edge timestamps must increase");
  }
  require_spd(information, "odometry information");
}

PriorFactor::PriorFactor(AgentId agent_id, double timestamp,
                         const Sim3Pose& prior_pose, const Mat7& information)
    : agent_id_(agent_id),
      timestamp_(timestamp),
      prior_pose_(prior_pose),
      information_(information) {
  require_finite(timestamp, "prior timestamp");
  require_spd(information, "prior information");
}

// ---------------------------------------------------------------------------
// Residuals

Vec3 antenna_position(const Sim3Pose& pose, const Vec3& lever_arm) {
  return transform_point(pose, lever_arm);
}

double range_residual(const Sim3Pose& pose_a, const Sim3Pose& pose_b,
                      double measured, const Vec3& lever_a,
                      const Vec3& lever_b) {
  const Vec3 pa = antenna_position(pose_a, lever_a);
  const Vec3 pb = antenna_position(pose_b, lever_b);
  line_of_sight(pa, pb);
  return measured - (pa - pb).norm();
}

double anchor_range_residual(const Sim3Pose& pose, const Vec3& anchor,
                             double measured, const Vec3& lever) {
  const Vec3 p = antenna_position(pose, lever);
  line_of_sight(p, anchor);
  return measured - (p - anchor).norm();
}

Twist7 odometry_residual(const Sim3Pose& pose_i, const Sim3Pose& pose_j,
                         const Sim3Pose& z) {
  return log(z * (pose_i * inverse(pose_j)));
}

Twist7 prior_residual(const Sim3Pose& pose, const Sim3Pose& prior) {
  return log(prior * inverse(pose));
}

// ---------------------------------------------------------------------------
// Jacobians

RangeJacobians range_jacobians(const Sim3Pose& pose_a, const Sim3Pose& pose_b,
                               const Vec3& lever_a, const Vec3& lever_b) {
  const Vec3 u = line_of_sight(antenna_position(pose_a, lever_a),
                               antenna_position(pose_b, lever_b));
  return {-u.transpose() * position_jacobian(pose_a, lever_a),
          u.transpose() * position_jacobian(pose_b, lever_b)};
}

RowJacobian anchor_range_jacobian(const Sim3Pose& pose, const Vec3& anchor,
                                  const Vec3& lever) {
  const Vec3 u = line_of_sight(antenna_position(pose, lever), anchor);
  return -u.transpose() * position_jacobian(pose, lever);
}

OdometryJacobians odometry_jacobians(const Sim3Pose& pose_i,
                                     const Sim3Pose& pose_j,
                                     const Sim3Pose& z) {
  const Twist7 e = odometry_residual(pose_i, pose_j, z);
  const Mat7 j = right_jacobian_inverse(e) * adjoint(pose_j);
  return {j, -j};
}

Mat7 prior_jacobian(const Sim3Pose& pose, const Sim3Pose& prior) {
  const Twist7 e = prior_residual(pose, prior);
  return -right_jacobian_inverse(e) * adjoint(pose);
}

// ---------------------------------------------------------------------------
// Weighting

WhitenedResidual whiten(const Eigen::VectorXd& residual,
                        const Eigen::MatrixXd& information) {
  if (information.rows() != residual.size() ||
      information.cols() != residual.size()) {
    throw Error(ErrorCode::kNonSpdInformation,
                "information size does not match the residual");
  }
  require_spd(information, "information");
  Eigen::LLT<Eigen::MatrixXd> llt(information);
  WhitenedResidual out;
  out.whitened = llt.matrixU() * residual;
  out.cost = out.whitened.squaredNorm();
  return out;
}

WhitenedResidual whiten(double residual, double information) {
  if (!(information > 0.0) || !std::isfinite(information)) {
    throw Error(ErrorCode::kNonSpdInformation,
                "scalar information must be positive");
  }
  WhitenedResidual out;
  out.whitened = Eigen::VectorXd::Constant(1, std::sqrt(information) * residual);
  out.cost = residual * information * residual;
  return out;
}

Mat7 information_from_body_covariance(const Sim3Pose& pose,
                                      const Mat7& body_covariance) {
  const Mat7 ad_inv = adjoint(inverse(pose));
  const Mat7 body_info = body_covariance.ldlt().solve(Mat7::Identity());
  const Mat7 info = ad_inv.transpose() * body_info * ad_inv;
  return 0.5 * (info + info.transpose());
}

std::vector<OdometryEdge> odometry_from_keyframes(
    std::span<const KeyframeMsg> agent_keyframes) {
  std::vector<OdometryEdge> edges;
  if (agent_keyframes.size() < 2) return edges;
  edges.reserve(agent_keyframes.size() - 1);
  Sim3Pose previous = agent_keyframes.front().pose();
  for (std::size_t k = 1; k < agent_keyframes.size(); ++k) {
    const KeyframeMsg& prev_msg = agent_keyframes[k - 1];
    const KeyframeMsg& msg = agent_keyframes[k];
    if (msg.agent_id() != prev_msg.agent_id()) {
      throw Error(ErrorCode::kInvalidMessage,
                  "keyframes of several agents in one chain");
    }
    if (!(msg.timestamp() > prev_msg.timestamp())) {
      throw Error(ErrorCode::kInvalidMessage,
                  "keyframe timestamps must be strictly increasing");
    }
    const Sim3Pose current = msg.pose();
    edges.emplace_back(msg.agent_id(), prev_msg.timestamp(), msg.timestamp(),
                       current * inverse(previous),
                       Mat7(msg.covariance().ldlt().solve(Mat7::Identity())));
    previous = current;
  }
  return edges;
}

}  // namespace rangefuse
