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

// Multi-agent scenarios built from one trajectory, with simulated visual
// odometry and ranging.
//
// Each odometry edge is the true relative motion with a left error,
// Z_k = exp(xi_k) * T_{k+1} T_k^-1 with xi_k ~ N(0, Sigma_k), and the chain is
// dead-reckoned from it:
//
//     S^_0 = lift(T_0, s0),  S^_{k+1} = Z_k * S^_k
//
// so rotation, translation and (monocular) log-scale errors all accumulate as
// random walks. Keyframe k+1 carries Sigma_k as its covariance.
//
// Range error is  range = d + b_sys(theta1, theta2, d) + b_m + eta,  where
// b_sys is a polynomial in cos(theta1), cos(theta2) and d, b_m a per-link
// random walk advanced once per emitted sample and eta white Gaussian.
// Reported variance is sigma_eta^2 only.

#ifndef RANGEFUSE_SWARM_SIM_HPP
#define RANGEFUSE_SWARM_SIM_HPP

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "rangefuse/measurements.hpp"
#include "rangefuse/sim3.hpp"
#include "rangefuse/trajectory_io.hpp"

namespace rangefuse {

/// Reported variances never drop below these, so zero-noise runs still give
/// SPD information matrices.
inline constexpr double kOdometryVarianceFloor = 1e-8;
inline constexpr double kRangeVarianceFloor = 1e-6;

struct AgentTrack {
  AgentId id = 0;
  Trajectory truth;  ///< keyframes on the common mission clock
};

struct SwarmScenario {
  std::vector<AgentTrack> agents;
  std::map<AnchorId, Vec3> anchors;
  double max_range = 200.0;
  double association_tolerance = 0.05;
};

/// Throws kInvalidMessage unless timestamps increase per agent and
/// max_range > 0.
void validate(const SwarmScenario& scenario);

/// K contiguous, disjoint pieces of near-equal path length. Piece k starts at
/// the first pose whose cumulative path length reaches L k / K; its timestamps
/// are shifted to start at 0. Agent ids are 1..K. Throws kTooFewPoses.
[[nodiscard]] SwarmScenario split_swarm(const Trajectory& trajectory, int agents);

[[nodiscard]] double path_length(const Trajectory& trajectory);

/// Smooth closed test path: a Lissajous curve of the given extent (m) with a
/// gentle height profile. One lap lasts `duration` seconds; pose i is at
/// duration * i / poses.
/// Body axes follow the camera convention (z forward, x right).
[[nodiscard]] Trajectory synthetic_trajectory(int poses, double extent,
                                              double duration);

/// Keeps every `stride`-th pose (the first and last always).
[[nodiscard]] Trajectory subsample(const Trajectory& trajectory, int stride);

// ---------------------------------------------------------------------------
// Odometry

struct OdometryNoiseConfig {
  double rotation_sigma = 0.0;     ///< rad per edge, per axis
  double translation_sigma = 0.0;  ///< per axis, per metre of edge length
  double scale_sigma = 0.0;        ///< log-scale increment per edge
  bool monocular = true;           ///< stereo ignores scale_sigma
  double initial_scale = 1.0;
};

struct PriorConfig {
  /// Standard deviations (rotation rad, translation m, log-scale) of the prior
  /// on agent 1's first pose, which fixes the gauge.
  std::array<double, 3> gauge_sigma{1e-6, 1e-6, 1e-6};
  /// Same for every other agent (initial frame-alignment uncertainty).
  std::array<double, 3> agent_sigma{1e-3, 1e-2, 1e-3};
};

[[nodiscard]] Mat7 diagonal_covariance(const std::array<double, 3>& sigma);

struct OdometryRun {
  /// Per agent, in scenario order: dead-reckoned keyframes.
  std::vector<std::vector<KeyframeMsg>> keyframes;
  /// Per agent: Z between consecutive keyframes, information from Sigma_k.
  std::vector<std::vector<OdometryEdge>> edges;
  /// Per agent: the sampled edge errors xi_k.
  std::vector<std::vector<Twist7>> increments;
};

[[nodiscard]] OdometryRun generate_odometry(const SwarmScenario& scenario,
                                            const OdometryNoiseConfig& noise,
                                            const PriorConfig& priors,
                                            std::uint64_t seed);

/// Priors at the true first pose of every agent.
[[nodiscard]] std::vector<PriorFactor> make_priors(const SwarmScenario& scenario,
                                                   const PriorConfig& priors);

// ---------------------------------------------------------------------------
// Ranging

struct BiasModel {
  bool enabled = false;
  /// b = c0 + c1 cos t1 + c2 cos^2 t1 + c3 cos t2 + c4 cos^2 t2 + c5 d + c6 d^2
  std::array<double, 7> coefficients{-0.35, 0.05, 0.2, 0.05, 0.2, 1.5e-3,
                                     -2.5e-6};

  [[nodiscard]] double evaluate(double theta1, double theta2, double d) const;
};

struct RangingNoiseConfig {
  double sigma_eta = 0.0;             ///< m
  double multipath_step_sigma = 0.0;  ///< m per emitted sample
  BiasModel bias;
  Vec3 anchor_axis = Vec3::UnitX();   ///< anchor antenna boresight (world)
};

/// The error components of one emitted range.
struct RangeSample {
  double true_distance = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double systematic = 0.0;
  double multipath = 0.0;
  double gaussian = 0.0;
};

struct RangeRun {
  std::vector<InterRangeMsg> inter;
  std::vector<RangeSample> inter_samples;  ///< parallel to `inter`
  std::vector<AnchorRangeMsg> anchor;
  std::vector<RangeSample> anchor_samples;
};

/// Angle between `line_of_sight` and `axis`, in [0, pi].
[[nodiscard]] double los_angle(const Vec3& line_of_sight, const Vec3& axis);

/// Candidate epochs are agent a's keyframes (a < b), bound to b's nearest
/// keyframe within the association tolerance; anchors use every keyframe.
/// Only true distances <= max_range emit a message. Ranges are clamped at 0.
[[nodiscard]] RangeRun generate_ranges(const SwarmScenario& scenario,
                                       const RangingNoiseConfig& noise,
                                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Availability

struct AvailabilityRow {
  AgentId agent = 0;
  double anchor = 0.0;  ///< percent of time with an anchor link
  std::array<double, 3> peers{};  ///< percent with >= 1, >= 2, >= 3 peers
  std::array<double, 4> exact_peers{};  ///< percent with exactly 0..3 peers
};

/// Each keyframe counts for its dwell time (gap to the next keyframe; the
/// last one reuses the previous gap). Ranges count for the keyframes they
/// bind to under the association rule.
[[nodiscard]] std::vector<AvailabilityRow> availability_stats(
    const SwarmScenario& scenario, const RangeRun& ranges);

}  // namespace rangefuse

#endif  // RANGEFUSE_SWARM_SIM_HPP
