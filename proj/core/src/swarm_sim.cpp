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

#include "rangefuse/swarm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <string>

#include "rangefuse/error.hpp"
#include "rangefuse/random.hpp"

namespace rangefuse {

namespace {

std::optional<std::size_t> nearest_index(const Trajectory& track, double t,
                                         double tolerance) {
  const auto it = std::lower_bound(
      track.begin(), track.end(), t,
      [](const TimedPose& p, double value) { return p.timestamp < value; });
  std::optional<std::size_t> best;
  double gap = tolerance;
  if (it != track.end() && it->timestamp - t <= gap) {
    best = static_cast<std::size_t>(it - track.begin());
    gap = it->timestamp - t;
  }
  if (it != track.begin() && t - std::prev(it)->timestamp <= gap) {
    best = static_cast<std::size_t>(it - track.begin()) - 1;
  }
  return best;
}

Sim3Pose as_sim3(const SE3Pose& pose) { return lift_se3(pose, 1.0); }

template <typename Msg>
void sort_by_time(std::vector<Msg>& msgs, std::vector<RangeSample>& samples,
                  auto key) {
  std::vector<std::size_t> order(msgs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return key(msgs[a]) < key(msgs[b]);
  });
  std::vector<Msg> sorted_msgs;
  std::vector<RangeSample> sorted_samples;
  sorted_msgs.reserve(msgs.size());
  sorted_samples.reserve(samples.size());
  for (std::size_t i : order) {
    sorted_msgs.push_back(msgs[i]);
    sorted_samples.push_back(samples[i]);
  }
  msgs = std::move(sorted_msgs);
  samples = std::move(sorted_samples);
}

}  // namespace

void validate(const SwarmScenario& scenario) {
  if (!(scenario.max_range > 0.0)) {
    throw Error(ErrorCode::kInvalidMessage, "max_range must be positive");
  }
  for (const AgentTrack& agent : scenario.agents) {
    for (std::size_t k = 1; k < agent.truth.size(); ++k) {
      if (!(agent.truth[k].timestamp > agent.truth[k - 1].timestamp)) {
        throw Error(ErrorCode::kInvalidMessage,
                    "timestamps of agent " + std::to_string(agent.id) +
                        " are not strictly increasing");
      }
    }
  }
}

double path_length(const Trajectory& trajectory) {
  double length = 0.0;
  for (std::size_t k = 1; k < trajectory.size(); ++k) {
    length += (trajectory[k].pose.translation -
               trajectory[k - 1].pose.translation)
                  .norm();
  }
  return length;
}

SwarmScenario split_swarm(const Trajectory& trajectory, int agents) {
  if (agents < 1 || trajectory.size() < static_cast<std::size_t>(agents)) {
    throw Error(ErrorCode::kTooFewPoses,
                std::to_string(trajectory.size()) + " poses for " +
                    std::to_string(agents) + " agents");
  }
  const std::size_t n = trajectory.size();
  std::vector<double> cumulative(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    cumulative[k] = cumulative[k - 1] + (trajectory[k].pose.translation -
                                         trajectory[k - 1].pose.translation)
                                            .norm();
  }
  const double total = cumulative.back();
  std::vector<std::size_t> bounds{0};
  for (int k = 1; k < agents; ++k) {
    std::size_t b;
    if (total > 0.0) {
      const double target = total * k / agents;
      b = static_cast<std::size_t>(
          std::lower_bound(cumulative.begin(), cumulative.end(), target) -
          cumulative.begin());
    } else {
      b = n * static_cast<std::size_t>(k) / static_cast<std::size_t>(agents);
    }
    // Keep every piece non-empty.
    b = std::clamp(b, bounds.back() + 1, n - static_cast<std::size_t>(agents - k));
    bounds.push_back(b);
  }
  bounds.push_back(n);

  SwarmScenario scenario;
  for (int k = 0; k < agents; ++k) {
    AgentTrack track;
    track.id = static_cast<AgentId>(k + 1);
    const double t0 = trajectory[bounds[k]].timestamp;
    for (std::size_t i = bounds[k]; i < bounds[k + 1]; ++i) {
      track.truth.push_back({trajectory[i].timestamp - t0, trajectory[i].pose});
    }
    scenario.agents.push_back(std::move(track));
  }
  return scenario;
}

Trajectory synthetic_trajectory(int poses, double extent, double duration) {
  if (poses < 2 || !(extent > 0.0) || !(duration > 0.0)) {
    throw Error(ErrorCode::kTooFewPoses, "synthetic path needs >= 2 poses");
  }
  Trajectory out;
  out.reserve(static_cast<std::size_t>(poses));
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < poses; ++i) {
    const double u = two_pi * i / poses;
    const Vec3 p(extent * std::sin(u), 0.5 * extent * std::sin(2.0 * u),
                 0.02 * extent * std::sin(3.0 * u));
    const Vec3 dp(extent * std::cos(u), extent * std::cos(2.0 * u),
                  0.06 * extent * std::cos(3.0 * u));
    const Vec3 forward = dp.normalized();
    const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
    const Vec3 down = forward.cross(right);
    Mat3 r;
    r.col(0) = right;
    r.col(1) = down;
    r.col(2) = forward;
    out.push_back({duration * i / poses,
                   SE3Pose{Rotation3::nearest(r), p}});
  }
  return out;
}

Trajectory subsample(const Trajectory& trajectory, int stride) {
  if (stride < 1) {
    throw Error(ErrorCode::kConfigError, "keyframe stride must be >= 1");
  }
  Trajectory out;
  for (std::size_t k = 0; k < trajectory.size(); k += static_cast<std::size_t>(stride)) {
    out.push_back(trajectory[k]);
  }
  if (!trajectory.empty() &&
      out.back().timestamp != trajectory.back().timestamp) {
    out.push_back(trajectory.back());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Odometry

Mat7 diagonal_covariance(const std::array<double, 3>& sigma) {
  Vec7 d;
  d << Vec3::Constant(sigma[0] * sigma[0]), Vec3::Constant(sigma[1] * sigma[1]),
      sigma[2] * sigma[2];
  return d.cwiseMax(kOdometryVarianceFloor).asDiagonal();
}

std::vector<PriorFactor> make_priors(const SwarmScenario& scenario,
                                     const PriorConfig& priors) {
  std::vector<PriorFactor> out;
  for (std::size_t k = 0; k < scenario.agents.size(); ++k) {
    const AgentTrack& agent = scenario.agents[k];
    if (agent.truth.empty()) continue;
    const Sim3Pose first = as_sim3(agent.truth.front().pose);
    const Mat7 cov =
        diagonal_covariance(k == 0 ? priors.gauge_sigma : priors.agent_sigma);
    out.emplace_back(agent.id, agent.truth.front().timestamp, first,
                     information_from_body_covariance(first, cov));
  }
  return out;
}

OdometryRun generate_odometry(const SwarmScenario& scenario,
                              const OdometryNoiseConfig& noise,
                              const PriorConfig& priors, std::uint64_t seed) {
  validate(scenario);
  if (noise.rotation_sigma < 0.0 || noise.translation_sigma < 0.0 ||
      noise.scale_sigma < 0.0 || !(noise.initial_scale > 0.0)) {
    throw Error(ErrorCode::kConfigError, "odometry noise must be non-negative");
  }
  OdometryRun run;
  for (std::size_t a = 0; a < scenario.agents.size(); ++a) {
    const AgentTrack& agent = scenario.agents[a];
    std::vector<KeyframeMsg> keyframes;
    std::vector<Twist7> increments;
    if (agent.truth.empty()) {
      run.keyframes.push_back({});
      run.edges.push_back({});
      run.increments.push_back({});
      continue;
    }
    CounterRng rng(seed, stream_id(StreamKind::kOdometry, agent.id));
    Sim3Pose estimate = lift_se3(agent.truth.front().pose, noise.initial_scale);
    keyframes.emplace_back(
        agent.id, agent.truth.front().timestamp, estimate,
        diagonal_covariance(a == 0 ? priors.gauge_sigma : priors.agent_sigma));
    const double scale_sigma = noise.monocular ? noise.scale_sigma : 0.0;
    for (std::size_t k = 1; k < agent.truth.size(); ++k) {
      const SE3Pose& prev = agent.truth[k - 1].pose;
      const SE3Pose& next = agent.truth[k].pose;
      const double edge_length = (next.translation - prev.translation).norm();
      const std::array<double, 3> sigma{noise.rotation_sigma,
                                        noise.translation_sigma * edge_length,
                                        scale_sigma};
      Vec7 xi;
      for (int i = 0; i < 7; ++i) {
        xi[i] = rng.normal(sigma[i < 3 ? 0 : (i < 6 ? 1 : 2)]);
      }
      const Twist7 increment(xi);
      estimate = exp(increment) * (as_sim3(next) * inverse(as_sim3(prev))) * estimate;
      keyframes.emplace_back(agent.id, agent.truth[k].timestamp, estimate,
                             diagonal_covariance(sigma));
      increments.push_back(increment);
    }
    run.edges.push_back(odometry_from_keyframes(keyframes));
    run.keyframes.push_back(std::move(keyframes));
    run.increments.push_back(std::move(increments));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Ranging

double BiasModel::evaluate(double theta1, double theta2, double d) const {
  const auto& c = coefficients;
  const double u = std::cos(theta1);
  const double v = std::cos(theta2);
  return c[0] + u * (c[1] + c[2] * u) + v * (c[3] + c[4] * v) +
         d * (c[5] + c[6] * d);
}

double los_angle(const Vec3& line_of_sight, const Vec3& axis) {
  const double n = line_of_sight.norm() * axis.norm();
  if (n < 1e-12) return 0.5 * std::numbers::pi;
  return std::atan2(line_of_sight.cross(axis).norm(), line_of_sight.dot(axis));
}

RangeRun generate_ranges(const SwarmScenario& scenario,
                         const RangingNoiseConfig& noise, std::uint64_t seed) {
  validate(scenario);
  if (noise.sigma_eta < 0.0 || noise.multipath_step_sigma < 0.0) {
    throw Error(ErrorCode::kConfigError, "ranging noise must be non-negative");
  }
  const double variance =
      std::max(noise.sigma_eta * noise.sigma_eta, kRangeVarianceFloor);
  RangeRun run;

  auto draw = [&](CounterRng& rng, double& walk, const Vec3& pa,
                  const Vec3& axis_a, const Vec3& pb, const Vec3& axis_b) {
    RangeSample s;
    const Vec3 los = pb - pa;
    s.true_distance = los.norm();
    s.theta1 = los_angle(los, axis_a);
    s.theta2 = los_angle(-los, axis_b);
    const double step = rng.normal(noise.multipath_step_sigma);
    s.gaussian = rng.normal(noise.sigma_eta);
    walk += step;
    s.multipath = walk;
    s.systematic = noise.bias.enabled
                       ? noise.bias.evaluate(s.theta1, s.theta2, s.true_distance)
                       : 0.0;
    return s;
  };
  auto measured = [](const RangeSample& s) {
    return std::max(0.0, s.true_distance + s.systematic + s.multipath + s.gaussian);
  };

  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    for (std::size_t j = i + 1; j < scenario.agents.size(); ++j) {
      const AgentTrack& a = scenario.agents[i];
      const AgentTrack& b = scenario.agents[j];
      CounterRng rng(seed, stream_id(StreamKind::kInterRange, a.id, b.id));
      double walk = 0.0;
      for (const TimedPose& ka : a.truth) {
        const auto kb = nearest_index(b.truth, ka.timestamp,
                                      scenario.association_tolerance);
        if (!kb) continue;
        const SE3Pose& pb = b.truth[*kb].pose;
        if ((pb.translation - ka.pose.translation).norm() > scenario.max_range) {
          continue;
        }
        const RangeSample s =
            draw(rng, walk, ka.pose.translation, ka.pose.rotation.matrix().col(0),
                 pb.translation, pb.rotation.matrix().col(0));
        run.inter.emplace_back(a.id, b.id, ka.timestamp, measured(s), variance);
        run.inter_samples.push_back(s);
      }
    }
  }

  for (const AgentTrack& agent : scenario.agents) {
    for (const auto& [anchor_id, anchor] : scenario.anchors) {
      CounterRng rng(seed, stream_id(StreamKind::kAnchorRange, agent.id, anchor_id));
      double walk = 0.0;
      for (const TimedPose& k : agent.truth) {
        if ((anchor - k.pose.translation).norm() > scenario.max_range) continue;
        const RangeSample s = draw(rng, walk, k.pose.translation,
                                   k.pose.rotation.matrix().col(0), anchor,
                                   noise.anchor_axis);
        run.anchor.emplace_back(agent.id, anchor_id, k.timestamp, measured(s),
                                variance);
        run.anchor_samples.push_back(s);
      }
    }
  }

  sort_by_time(run.inter, run.inter_samples, [](const InterRangeMsg& m) {
    return std::tuple(m.timestamp(), m.agent_a(), m.agent_b());
  });
  sort_by_time(run.anchor, run.anchor_samples, [](const AnchorRangeMsg& m) {
    return std::tuple(m.timestamp(), m.agent_id(), m.anchor_id());
  });
  return run;
}

// ---------------------------------------------------------------------------
// Availability

std::vector<AvailabilityRow> availability_stats(const SwarmScenario& scenario,
                                                const RangeRun& ranges) {
  const double tol = scenario.association_tolerance;
  std::map<AgentId, std::size_t> index;
  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    index[scenario.agents[i].id] = i;
  }
  std::vector<std::vector<std::set<AgentId>>> peers(scenario.agents.size());
  std::vector<std::vector<char>> anchored(scenario.agents.size());
  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    peers[i].resize(scenario.agents[i].truth.size());
    anchored[i].resize(scenario.agents[i].truth.size(), 0);
  }
  auto bind = [&](AgentId agent, double t) -> std::optional<std::pair<std::size_t, std::size_t>> {
    const auto it = index.find(agent);
    if (it == index.end()) return std::nullopt;
    const auto k = nearest_index(scenario.agents[it->second].truth, t, tol);
    if (!k) return std::nullopt;
    return std::pair(it->second, *k);
  };
  for (const InterRangeMsg& m : ranges.inter) {
    const auto a = bind(m.agent_a(), m.timestamp());
    const auto b = bind(m.agent_b(), m.timestamp());
    if (!a || !b) continue;
    peers[a->first][a->second].insert(m.agent_b());
    peers[b->first][b->second].insert(m.agent_a());
  }
  for (const AnchorRangeMsg& m : ranges.anchor) {
    if (const auto a = bind(m.agent_id(), m.timestamp())) {
      anchored[a->first][a->second] = 1;
    }
  }

  std::vector<AvailabilityRow> rows;
  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    const Trajectory& truth = scenario.agents[i].truth;
    AvailabilityRow row;
    row.agent = scenario.agents[i].id;
    double total = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      double dwell = 1.0;
      if (k + 1 < truth.size()) {
        dwell = truth[k + 1].timestamp - truth[k].timestamp;
      } else if (k > 0) {
        dwell = truth[k].timestamp - truth[k - 1].timestamp;
      }
      total += dwell;
      if (anchored[i][k]) row.anchor += dwell;
      const std::size_t n = peers[i][k].size();
      for (std::size_t p = 0; p < 3; ++p) {
        if (n >= p + 1) row.peers[p] += dwell;
      }
      if (n <= 3) row.exact_peers[n] += dwell;
    }
    if (total > 0.0) {
      row.anchor *= 100.0 / total;
      for (double& v : row.peers) v *= 100.0 / total;
      for (double& v : row.exact_peers) v *= 100.0 / total;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rangefuse
