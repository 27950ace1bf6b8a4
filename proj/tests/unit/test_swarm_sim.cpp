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

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "rangefuse/error.hpp"
#include "rangefuse/random.hpp"
#include "rangefuse/swarm_sim.hpp"
#include "support/oracles.hpp"

namespace rangefuse {
namespace {

template <typename F>
void expect_error(F&& f, ErrorCode code) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

Trajectory straight_line(int poses, double spacing, double dt = 0.1) {
  Trajectory t;
  for (int k = 0; k < poses; ++k) {
    TimedPose p;
    p.timestamp = dt * k;
    p.pose.translation = Vec3(spacing * k, 0.0, 0.0);
    t.push_back(p);
  }
  return t;
}

// Two agents standing still at fixed positions for `epochs` keyframes.
SwarmScenario two_static_agents(const Vec3& a, const Vec3& b, int epochs) {
  SwarmScenario s;
  for (AgentId id : {AgentId{1}, AgentId{2}}) {
    AgentTrack track;
    track.id = id;
    for (int k = 0; k < epochs; ++k) {
      TimedPose p;
      p.timestamp = 0.1 * k;
      p.pose.translation = id == 1 ? a : b;
      track.truth.push_back(p);
    }
    s.agents.push_back(track);
  }
  return s;
}

Trajectory kitti00() {
  return kitti_to_z_up(load_trajectory(
      std::string(RANGEFUSE_SOURCE_DIR) + "/data/kitti/00.txt", TrajectoryFormat::kKitti));
}

// ---------------------------------------------------------------------------
// Splitting

TEST(SplitSwarm, OneAgentKeepsTheTrajectory) {
  const Trajectory t = straight_line(10, 1.0);
  const SwarmScenario s = split_swarm(t, 1);
  ASSERT_EQ(s.agents.size(), 1u);
  EXPECT_EQ(s.agents[0].id, 1);
  ASSERT_EQ(s.agents[0].truth.size(), t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_EQ(s.agents[0].truth[k].timestamp, t[k].timestamp);
    EXPECT_EQ(s.agents[0].truth[k].pose.translation, t[k].pose.translation);
  }
}

TEST(SplitSwarm, UniformSpacingGivesEqualPieces) {
  const SwarmScenario s = split_swarm(straight_line(100, 1.0), 4);
  ASSERT_EQ(s.agents.size(), 4u);
  for (const AgentTrack& a : s.agents) {
    EXPECT_EQ(a.truth.size(), 25u);
    EXPECT_EQ(a.truth.front().timestamp, 0.0);
  }
  EXPECT_EQ(s.agents[1].truth.front().pose.translation.x(), 25.0);
}

TEST(SplitSwarm, TooFewPosesIsRejected) {
  expect_error([] { (void)split_swarm(straight_line(3, 1.0), 4); }, ErrorCode::kTooFewPoses);
  expect_error([] { (void)split_swarm(straight_line(3, 1.0), 0); }, ErrorCode::kTooFewPoses);
}

TEST(SplitSwarm, KittiPiecesHaveNearEqualLengthAndKeepTheTotal) {
  const Trajectory t = kitti00();
  const SwarmScenario s = split_swarm(t, 4);
  double lo = 1e300;
  double hi = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const double len = path_length(s.agents[i].truth);
    lo = std::min(lo, len);
    hi = std::max(hi, len);
    sum += len;
    if (i + 1 < s.agents.size()) {
      sum += (s.agents[i + 1].truth.front().pose.translation -
              s.agents[i].truth.back().pose.translation)
                 .norm();
    }
  }
  EXPECT_LT((hi - lo) / hi, 0.01);
  EXPECT_NEAR(sum, path_length(t), 1e-9 * path_length(t));
  std::size_t poses = 0;
  for (const AgentTrack& a : s.agents) poses += a.truth.size();
  EXPECT_EQ(poses, t.size());
}

TEST(Subsample, KeepsEndpoints) {
  const Trajectory t = subsample(straight_line(10, 1.0), 4);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t.back().pose.translation.x(), 9.0);
}

TEST(SyntheticTrajectory, HasRequestedSizeAndDuration) {
  const Trajectory t = synthetic_trajectory(100, 50.0, 10.0);
  ASSERT_EQ(t.size(), 100u);
  EXPECT_EQ(t.front().timestamp, 0.0);
  // closed path: one period spans the duration
  EXPECT_NEAR(t.back().timestamp, 9.9, 1e-12);
  for (const TimedPose& p : t) {
    EXPECT_LT(Rotation3::orthonormality_error(p.pose.rotation.matrix()), 1e-12);
    EXPECT_LE(p.pose.translation.norm(), 50.0 * 1.2);
  }
}

// ---------------------------------------------------------------------------
// Odometry

TEST(Odometry, ZeroNoiseEdgesAreTheTrueMotion) {
  const SwarmScenario s = split_swarm(synthetic_trajectory(80, 40.0, 8.0), 2);
  const OdometryRun run = generate_odometry(s, {}, {}, 1);
  for (std::size_t a = 0; a < s.agents.size(); ++a) {
    const Trajectory& truth = s.agents[a].truth;
    ASSERT_EQ(run.edges[a].size(), truth.size() - 1);
    for (std::size_t k = 0; k + 1 < truth.size(); ++k) {
      const Sim3Pose ti = lift_se3(truth[k].pose, 1.0);
      const Sim3Pose tj = lift_se3(truth[k + 1].pose, 1.0);
      const Mat4 expected = oracle::matrix(tj) * oracle::matrix(ti).inverse();
      EXPECT_LT((oracle::matrix(run.edges[a][k].relative_pose()) - expected)
                    .cwiseAbs()
                    .maxCoeff(),
                1e-10);
      EXPECT_LT((run.keyframes[a][k + 1].pose().position() -
                 truth[k + 1].pose.translation)
                    .norm(),
                1e-9);
    }
  }
}

TEST(Odometry, ScaleDriftIsTheProductOfTheIncrements) {
  const SwarmScenario s = split_swarm(synthetic_trajectory(120, 40.0, 12.0), 1);
  OdometryNoiseConfig noise;
  noise.scale_sigma = 0.01;
  const OdometryRun run = generate_odometry(s, noise, {}, 9);
  // Replay the stream: seven normals per edge, log-scale last.
  CounterRng rng(9, stream_id(StreamKind::kOdometry, 1));
  double product = 1.0;
  for (std::size_t k = 0; k < run.increments[0].size(); ++k) {
    double lambda = 0.0;
    for (int i = 0; i < 7; ++i) {
      const double x = rng.normal();
      if (i == 6) lambda = 0.01 * x;
    }
    EXPECT_NEAR(run.increments[0][k].log_scale(), lambda, 1e-15);
    product *= std::exp(lambda);
    EXPECT_NEAR(run.keyframes[0][k + 1].pose().scale(), product, 1e-9 * product);
  }
}

TEST(Odometry, InformationIsTheInverseGeneratingCovariance) {
  const SwarmScenario s = split_swarm(straight_line(5, 2.0), 1);
  OdometryNoiseConfig noise;
  noise.rotation_sigma = 0.01;
  noise.translation_sigma = 0.05;
  noise.scale_sigma = 0.02;
  const OdometryRun run = generate_odometry(s, noise, {}, 3);
  const Mat7 info = run.edges[0][0].information();
  EXPECT_NEAR(info(0, 0), 1.0 / (0.01 * 0.01), 1e-6);
  EXPECT_NEAR(info(3, 3), 1.0 / (0.1 * 0.1), 1e-6);
  EXPECT_NEAR(info(6, 6), 1.0 / (0.02 * 0.02), 1e-6);
  noise.monocular = false;
  const OdometryRun stereo = generate_odometry(s, noise, {}, 3);
  EXPECT_NEAR(stereo.edges[0][0].information()(6, 6), 1.0 / kOdometryVarianceFloor, 1e-3);
  for (const Twist7& xi : stereo.increments[0]) EXPECT_EQ(xi.log_scale(), 0.0);
}

TEST(Odometry, SameSeedIsBitIdentical) {
  const SwarmScenario s = split_swarm(synthetic_trajectory(60, 40.0, 6.0), 3);
  OdometryNoiseConfig noise{1e-3, 0.02, 2e-3, true, 1.0};
  const OdometryRun a = generate_odometry(s, noise, {}, 5);
  const OdometryRun b = generate_odometry(s, noise, {}, 5);
  const OdometryRun c = generate_odometry(s, noise, {}, 6);
  for (std::size_t i = 0; i < a.keyframes.size(); ++i) {
    EXPECT_EQ(a.keyframes[i], b.keyframes[i]);
    EXPECT_NE(a.keyframes[i], c.keyframes[i]);
  }
}

TEST(Priors, SitAtTheTrueFirstPoses) {
  const SwarmScenario s = split_swarm(synthetic_trajectory(60, 40.0, 6.0), 3);
  const auto priors = make_priors(s, {});
  ASSERT_EQ(priors.size(), 3u);
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_EQ(priors[a].agent_id(), s.agents[a].id);
    EXPECT_EQ(priors[a].timestamp(), 0.0);
    EXPECT_LT((priors[a].prior_pose().position() - s.agents[a].truth[0].pose.translation).norm(),
              1e-12);
  }
  // agent 1 fixes the gauge far more tightly than the others
  const auto weakest = [](const Mat7& info) {
    return Eigen::SelfAdjointEigenSolver<Mat7>(info).eigenvalues().minCoeff();
  };
  EXPECT_GT(weakest(priors[0].information()), 1e3 * weakest(priors[1].information()));
}

// ---------------------------------------------------------------------------
// Ranging

TEST(Ranging, ZeroNoiseGivesTheTrueDistance) {
  SwarmScenario s = two_static_agents(Vec3(0, 0, 0), Vec3(6, 8, 0), 3);
  const RangeRun run = generate_ranges(s, {}, 1);
  ASSERT_EQ(run.inter.size(), 3u);
  for (const InterRangeMsg& m : run.inter) {
    EXPECT_EQ(m.range(), 10.0);
    EXPECT_EQ(m.variance(), kRangeVarianceFloor);
  }
}

TEST(Ranging, NothingBeyondTheCutoff) {
  SwarmScenario s = two_static_agents(Vec3(0, 0, 0), Vec3(250, 0, 0), 3);
  s.anchors[0] = Vec3(0, 0, 199);
  s.anchors[1] = Vec3(0, 0, 201);
  const RangeRun run = generate_ranges(s, {}, 1);
  EXPECT_TRUE(run.inter.empty());
  for (const AnchorRangeMsg& m : run.anchor) {
    EXPECT_EQ(m.agent_id(), 1);
    EXPECT_EQ(m.anchor_id(), 0);
  }
  EXPECT_EQ(run.anchor.size(), 3u);
}

TEST(Ranging, BiasFreeErrorsHaveTheConfiguredMoments) {
  const int n = 100000;
  SwarmScenario s = two_static_agents(Vec3(0, 0, 0), Vec3(30, 40, 0), n);
  RangingNoiseConfig noise;
  noise.sigma_eta = 0.1;
  const RangeRun run = generate_ranges(s, noise, 17);
  ASSERT_EQ(run.inter.size(), static_cast<std::size_t>(n));
  double sum = 0.0;
  double sq = 0.0;
  for (const InterRangeMsg& m : run.inter) {
    const double e = m.range() - 50.0;
    sum += e;
    sq += e * e;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sq / n - mean * mean);
  EXPECT_LT(std::abs(mean), 3.0 * 0.1 / std::sqrt(n));
  EXPECT_LT(std::abs(std / 0.1 - 1.0), 0.02);
}

TEST(Ranging, MultipathIncrementsHaveTheConfiguredVariance) {
  const int n = 100000;
  SwarmScenario s = two_static_agents(Vec3(0, 0, 0), Vec3(30, 40, 0), n + 1);
  RangingNoiseConfig noise;
  noise.multipath_step_sigma = 0.02;
  const RangeRun run = generate_ranges(s, noise, 23);
  double sum = 0.0;
  double sq = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double d = run.inter[k].range() - run.inter[k - 1].range();
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_LT(std::abs(var / (0.02 * 0.02) - 1.0), 0.05);
}

TEST(Ranging, BiasedErrorsMatchAnIndependentReevaluation) {
  const SwarmScenario base = split_swarm(synthetic_trajectory(400, 60.0, 40.0), 3);
  SwarmScenario s = base;
  s.anchors[4] = Vec3(10.0, -20.0, 3.0);
  RangingNoiseConfig noise;
  noise.sigma_eta = 0.05;
  noise.multipath_step_sigma = 0.01;
  noise.bias.enabled = true;
  const std::uint64_t seed = 31;
  const RangeRun run = generate_ranges(s, noise, seed);
  ASSERT_FALSE(run.inter.empty());
  ASSERT_FALSE(run.anchor.empty());

  const auto& c = noise.bias.coefficients;
  auto bias = [&](const Vec3& los, const Vec3& axis1, const Vec3& axis2) {
    const double d = los.norm();
    const double u = los.dot(axis1) / (d * axis1.norm());
    const double v = -los.dot(axis2) / (d * axis2.norm());
    return c[0] + c[1] * u + c[2] * u * u + c[3] * v + c[4] * v * v + c[5] * d +
           c[6] * d * d;
  };

  // Replay every link in emission order: walk step first, then eta.
  std::size_t checked = 0;
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    for (std::size_t j = i + 1; j < s.agents.size(); ++j) {
      const AgentTrack& a = s.agents[i];
      const AgentTrack& b = s.agents[j];
      CounterRng rng(seed, stream_id(StreamKind::kInterRange, a.id, b.id));
      double walk = 0.0;
      for (const TimedPose& ka : a.truth) {
        const TimedPose* kb = nullptr;
        for (const TimedPose& cand : b.truth) {
          if (std::abs(cand.timestamp - ka.timestamp) <= s.association_tolerance &&
              (kb == nullptr ||
               std::abs(cand.timestamp - ka.timestamp) < std::abs(kb->timestamp - ka.timestamp))) {
            kb = &cand;
          }
        }
        if (kb == nullptr) continue;
        const Vec3 los = kb->pose.translation - ka.pose.translation;
        if (los.norm() > s.max_range) continue;
        walk += 0.01 * rng.normal();
        const double eta = 0.05 * rng.normal();
        const double expected = std::max(
            0.0, los.norm() + bias(los, ka.pose.rotation.matrix().col(0),
                                   kb->pose.rotation.matrix().col(0)) +
                     walk + eta);
        bool found = false;
        for (const InterRangeMsg& m : run.inter) {
          if (m.agent_a() == a.id && m.agent_b() == b.id && m.timestamp() == ka.timestamp) {
            EXPECT_NEAR(m.range(), expected, 1e-12);
            found = true;
          }
        }
        EXPECT_TRUE(found);
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, run.inter.size());

  for (const AgentTrack& a : s.agents) {
    CounterRng rng(seed, stream_id(StreamKind::kAnchorRange, a.id, 4));
    double walk = 0.0;
    for (const TimedPose& k : a.truth) {
      const Vec3 los = Vec3(10.0, -20.0, 3.0) - k.pose.translation;
      if (los.norm() > s.max_range) continue;
      walk += 0.01 * rng.normal();
      const double eta = 0.05 * rng.normal();
      const double expected = std::max(
          0.0, los.norm() + bias(los, k.pose.rotation.matrix().col(0), Vec3::UnitX()) + walk + eta);
      for (const AnchorRangeMsg& m : run.anchor) {
        if (m.agent_id() == a.id && m.timestamp() == k.timestamp) {
          EXPECT_NEAR(m.range(), expected, 1e-12);
        }
      }
    }
  }
}

TEST(Ranging, SamplesDecomposeTheEmittedError) {
  const SwarmScenario s = split_swarm(synthetic_trajectory(200, 60.0, 20.0), 2);
  RangingNoiseConfig noise;
  noise.sigma_eta = 0.1;
  noise.multipath_step_sigma = 0.01;
  noise.bias.enabled = true;
  const RangeRun run = generate_ranges(s, noise, 2);
  for (std::size_t k = 0; k < run.inter.size(); ++k) {
    const RangeSample& x = run.inter_samples[k];
    EXPECT_NEAR(run.inter[k].range(),
                std::max(0.0, x.true_distance + x.systematic + x.multipath + x.gaussian),
                1e-12);
    EXPECT_NEAR(x.systematic, noise.bias.evaluate(x.theta1, x.theta2, x.true_distance), 1e-15);
  }
}

TEST(Ranging, MessagesAreSortedByTime) {
  const SwarmScenario s = split_swarm(synthetic_trajectory(200, 60.0, 20.0), 3);
  const RangeRun run = generate_ranges(s, {}, 2);
  for (std::size_t k = 1; k < run.inter.size(); ++k) {
    EXPECT_LE(run.inter[k - 1].timestamp(), run.inter[k].timestamp());
  }
}

TEST(Ranging, DefaultBiasSpansAboutFortyCentimetres) {
  BiasModel bias;
  double lo = 1e9;
  double hi = -1e9;
  for (double t1 = 0.0; t1 <= std::numbers::pi; t1 += 0.05) {
    for (double t2 = 0.0; t2 <= std::numbers::pi; t2 += 0.05) {
      for (double d = 0.0; d <= 200.0; d += 10.0) {
        const double b = bias.evaluate(t1, t2, d);
        lo = std::min(lo, b);
        hi = std::max(hi, b);
      }
    }
  }
  EXPECT_GE(lo, -0.45);
  EXPECT_LE(hi, 0.45);
  EXPECT_LT(lo, -0.2);
  EXPECT_GT(hi, 0.2);
}

TEST(LosAngle, MeasuresAgainstTheAxis) {
  EXPECT_NEAR(los_angle(Vec3(1, 0, 0), Vec3::UnitX()), 0.0, 1e-15);
  EXPECT_NEAR(los_angle(Vec3(0, 2, 0), Vec3::UnitX()), std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(los_angle(Vec3(-1, 0, 0), Vec3::UnitX()), std::numbers::pi, 1e-15);
}

// ---------------------------------------------------------------------------
// Availability

TEST(Availability, AnchorAlwaysInRangeIsFullAvailability) {
  SwarmScenario s = two_static_agents(Vec3(0, 0, 0), Vec3(300, 0, 0), 10);
  s.anchors[0] = Vec3(0, 0, 10);
  const auto rows = availability_stats(s, generate_ranges(s, {}, 1));
  EXPECT_NEAR(rows[0].anchor, 100.0, 1e-12);
  EXPECT_NEAR(rows[1].anchor, 0.0, 1e-12);
  EXPECT_NEAR(rows[0].peers[0], 0.0, 1e-12);
  EXPECT_NEAR(rows[0].exact_peers[0], 100.0, 1e-12);
}

TEST(Availability, PeersCountPerKeyframe) {
  SwarmScenario s = two_static_agents(Vec3(0, 0, 0), Vec3(10, 0, 0), 10);
  const auto rows = availability_stats(s, generate_ranges(s, {}, 1));
  EXPECT_NEAR(rows[0].peers[0], 100.0, 1e-12);
  EXPECT_NEAR(rows[0].peers[1], 0.0, 1e-12);
  EXPECT_NEAR(rows[1].exact_peers[1], 100.0, 1e-12);
}

TEST(Availability, WeightsByDwellTime) {
  SwarmScenario s = two_static_agents(Vec3(0, 0, 0), Vec3(10, 0, 0), 3);
  // keyframes at 0, 1, 3 for agent 1: dwell 1, 2, 2
  s.agents[0].truth[1].timestamp = 1.0;
  s.agents[0].truth[2].timestamp = 3.0;
  s.agents[1].truth[1].timestamp = 1.0;
  s.agents[1].truth[2].timestamp = 3.0;
  RangeRun ranges;
  ranges.inter.emplace_back(1, 2, 1.0, 10.0, 0.01);
  ranges.anchor.emplace_back(1, 0, 3.0, 10.0, 0.01);
  const auto rows = availability_stats(s, ranges);
  EXPECT_NEAR(rows[0].peers[0], 40.0, 1e-12);
  EXPECT_NEAR(rows[0].anchor, 40.0, 1e-12);
}

}  // namespace
}  // namespace rangefuse
