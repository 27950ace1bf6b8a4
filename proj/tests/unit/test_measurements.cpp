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

#include <gtest/gtest.h>

#include "rangefuse/error.hpp"
#include "rangefuse/measurements.hpp"
#include "support/oracles.hpp"

namespace rangefuse {
namespace {

CounterRng make_rng(std::uint64_t test) {
  return CounterRng(11, stream_id(StreamKind::kTest, test));
}

Sim3Pose at(const Vec3& position) { return Sim3Pose(Rotation3(), position, 1.0); }

template <typename F>
void expect_error(F&& f, ErrorCode code) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

TEST(RangeResidual, ThreeFourFiveTriangle) {
  EXPECT_NEAR(range_residual(at({0, 0, 0}), at({3, 4, 0}), 5.0), 0.0, 1e-15);
  EXPECT_NEAR(range_residual(at({0, 0, 0}), at({3, 4, 0}), 5.2), 0.2, 1e-12);
  EXPECT_NEAR(anchor_range_residual(at({0, 0, 0}), Vec3(3, 4, 0), 5.2), 0.2, 1e-12);
}

TEST(RangeResidual, MatchesHomogeneousPositions) {
  CounterRng rng = make_rng(1);
  for (int k = 0; k < 200; ++k) {
    const Sim3Pose a = oracle::random_pose(rng, 20.0);
    const Sim3Pose b = oracle::random_pose(rng, 20.0);
    const Vec3 la(rng.normal(0.3), rng.normal(0.3), rng.normal(0.3));
    const Vec3 lb(rng.normal(0.3), rng.normal(0.3), rng.normal(0.3));
    const double measured = 10.0 * rng.uniform();
    const double expected =
        measured - (oracle::act(a, la) - oracle::act(b, lb)).norm();
    EXPECT_NEAR(range_residual(a, b, measured, la, lb), expected, 1e-12);
    EXPECT_NEAR(anchor_range_residual(a, Vec3(1, 2, 3), measured, la),
                measured - (oracle::act(a, la) - Vec3(1, 2, 3)).norm(), 1e-12);
  }
}

TEST(RangeResidual, CoincidentEndpointsAreRejected) {
  expect_error([] { (void)range_residual(at({1, 1, 1}), at({1, 1, 1}), 1.0); },
               ErrorCode::kCoincidentPositions);
  expect_error([] { (void)anchor_range_jacobian(at({1, 1, 1}), Vec3(1, 1, 1)); },
               ErrorCode::kCoincidentPositions);
  expect_error([] { (void)range_jacobians(at({1, 1, 1}), at({1, 1, 1 + 1e-12})); },
               ErrorCode::kCoincidentPositions);
}

TEST(OdometryResidual, ZeroExactlyAtTheTrueRelativeMotion) {
  CounterRng rng = make_rng(2);
  for (int k = 0; k < 100; ++k) {
    const Sim3Pose si = oracle::random_pose(rng, 10.0);
    const Sim3Pose sj = oracle::random_pose(rng, 10.0);
    const Sim3Pose z = sj * inverse(si);
    EXPECT_LT(odometry_residual(si, sj, z).norm(), 1e-10);
    // and not zero for any other measurement
    const Sim3Pose other = exp(Twist7(oracle::random_twist(rng, 0.1))) * z;
    EXPECT_GT(odometry_residual(si, sj, other).norm(), 1e-6);
  }
}

TEST(OdometryResidual, RecoversALeftError) {
  CounterRng rng = make_rng(3);
  for (int k = 0; k < 100; ++k) {
    const Sim3Pose si = oracle::random_pose(rng, 10.0);
    const Sim3Pose sj = oracle::random_pose(rng, 10.0);
    const Vec7 xi = oracle::random_twist(rng, 0.2);
    const Sim3Pose z = exp(Twist7(xi)) * sj * inverse(si);
    EXPECT_LT((odometry_residual(si, sj, z).vector() - xi).norm(), 1e-9);
  }
}

TEST(PriorResidual, IsMinusTheLeftOffset) {
  CounterRng rng = make_rng(4);
  for (int k = 0; k < 100; ++k) {
    const Sim3Pose prior = oracle::random_pose(rng, 10.0);
    const Vec7 xi = oracle::random_twist(rng, 0.5);
    const Sim3Pose pose = exp(Twist7(xi)) * prior;
    EXPECT_LT((prior_residual(pose, prior).vector() + xi).norm(), 1e-9);
    EXPECT_LT(prior_residual(prior, prior).norm(), 1e-12);
  }
}

TEST(Jacobians, RangeMatchesCentralDifferences) {
  CounterRng rng = make_rng(5);
  for (int k = 0; k < 100; ++k) {
    const Sim3Pose a = oracle::random_pose(rng, 20.0);
    const Sim3Pose b = oracle::random_pose(rng, 20.0);
    const Vec3 la(rng.normal(0.3), rng.normal(0.3), rng.normal(0.3));
    const Vec3 lb(rng.normal(0.3), rng.normal(0.3), rng.normal(0.3));
    const RangeJacobians j = range_jacobians(a, b, la, lb);
    const auto fa = oracle::numeric_jacobian(
        [&](const Sim3Pose& p) { return scalar(range_residual(p, b, 7.0, la, lb)); }, a);
    const auto fb = oracle::numeric_jacobian(
        [&](const Sim3Pose& p) { return scalar(range_residual(a, p, 7.0, la, lb)); }, b);
    EXPECT_LT(oracle::max_relative_error(j.pose_a, fa), 1e-5);
    EXPECT_LT(oracle::max_relative_error(j.pose_b, fb), 1e-5);
  }
}

TEST(Jacobians, AnchorRangeMatchesCentralDifferences) {
  CounterRng rng = make_rng(6);
  for (int k = 0; k < 100; ++k) {
    const Sim3Pose a = oracle::random_pose(rng, 20.0);
    const Vec3 anchor(rng.normal(10), rng.normal(10), rng.normal(10));
    const Vec3 lever(rng.normal(0.3), rng.normal(0.3), rng.normal(0.3));
    const auto fd = oracle::numeric_jacobian(
        [&](const Sim3Pose& p) {
          return scalar(anchor_range_residual(p, anchor, 3.0, lever));
        },
        a);
    EXPECT_LT(oracle::max_relative_error(anchor_range_jacobian(a, anchor, lever), fd), 1e-5);
  }
}

TEST(Jacobians, OdometryMatchesCentralDifferences) {
  CounterRng rng = make_rng(7);
  for (int k = 0; k < 100; ++k) {
    const Sim3Pose si = oracle::random_pose(rng, 10.0);
    const Sim3Pose sj = oracle::random_pose(rng, 10.0);
    const Sim3Pose z = exp(Twist7(oracle::random_twist(rng, 0.5))) * sj * inverse(si);
    const OdometryJacobians j = odometry_jacobians(si, sj, z);
    const auto fi = oracle::numeric_jacobian(
        [&](const Sim3Pose& p) -> Eigen::VectorXd {
          return odometry_residual(p, sj, z).vector();
        },
        si);
    const auto fj = oracle::numeric_jacobian(
        [&](const Sim3Pose& p) -> Eigen::VectorXd {
          return odometry_residual(si, p, z).vector();
        },
        sj);
    EXPECT_LT(oracle::max_relative_error(j.pose_i, fi), 1e-5);
    EXPECT_LT(oracle::max_relative_error(j.pose_j, fj), 1e-5);
  }
}

TEST(Jacobians, PriorMatchesCentralDifferences) {
  CounterRng rng = make_rng(8);
  for (int k = 0; k < 100; ++k) {
    const Sim3Pose prior = oracle::random_pose(rng, 10.0);
    const Sim3Pose pose = exp(Twist7(oracle::random_twist(rng, 0.8))) * prior;
    const auto fd = oracle::numeric_jacobian(
        [&](const Sim3Pose& p) -> Eigen::VectorXd {
          return prior_residual(p, prior).vector();
        },
        pose);
    EXPECT_LT(oracle::max_relative_error(prior_jacobian(pose, prior), fd), 1e-5);
  }
}

TEST(Jacobians, RangeTranslationBlockIsTheLineOfSight) {
  // Unit scale, identity rotation: d r / d v_a = -u^T with u the unit vector
  // from b to a, and the rotation and scale columns vanish without lever arm.
  const Sim3Pose a = at({3, 4, 0});
  const Sim3Pose b = at({0, 0, 0});
  const RangeJacobians j = range_jacobians(a, b);
  const Vec3 u = Vec3(3, 4, 0) / 5.0;
  EXPECT_LT((j.pose_a.segment<3>(3).transpose() + u).norm(), 1e-15);
  EXPECT_LT((j.pose_b.segment<3>(3).transpose() - u).norm(), 1e-15);
  EXPECT_LT(j.pose_a.segment<3>(0).norm(), 1e-15);
  EXPECT_EQ(j.pose_a(6), 0.0);
  const RowJacobian ja = anchor_range_jacobian(a, Vec3::Zero());
  EXPECT_LT(ja.segment<3>(0).norm(), 1e-15);
  EXPECT_LT((ja.segment<3>(3).transpose() + u).norm(), 1e-15);
}

TEST(Whiten, CostIsTheWeightedSquare) {
  CounterRng rng = make_rng(9);
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(7, 7);
  const Eigen::MatrixXd w = a * a.transpose() + Eigen::MatrixXd::Identity(7, 7);
  Eigen::VectorXd r(7);
  for (int i = 0; i < 7; ++i) r(i) = rng.normal();
  const WhitenedResidual out = whiten(r, w);
  EXPECT_NEAR(out.cost, r.dot(w * r), 1e-10);
  EXPECT_NEAR(out.whitened.squaredNorm(), out.cost, 1e-10);
  EXPECT_NEAR(whiten(0.5, 4.0).cost, 1.0, 1e-15);
}

TEST(Whiten, RejectsNonSpdInformation) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(3, 3);
  w(0, 1) = 0.5;
  expect_error([&] { (void)whiten(Eigen::VectorXd::Zero(3), w); },
               ErrorCode::kNonSpdInformation);
  Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(3, 3);
  indefinite(2, 2) = -1.0;
  expect_error([&] { (void)whiten(Eigen::VectorXd::Zero(3), indefinite); },
               ErrorCode::kNonSpdInformation);
  expect_error([] { (void)whiten(1.0, 0.0); }, ErrorCode::kNonSpdInformation);
}

TEST(Messages, InterRangeIdsAreCanonical) {
  const InterRangeMsg m(4, 2, 1.0, 5.0, 0.01);
  EXPECT_EQ(m.agent_a(), 2);
  EXPECT_EQ(m.agent_b(), 4);
  expect_error([] { InterRangeMsg(3, 3, 0.0, 1.0, 1.0); }, ErrorCode::kInvalidMessage);
  expect_error([] { InterRangeMsg(1, 2, 0.0, -1.0, 1.0); }, ErrorCode::kInvalidMessage);
  expect_error([] { AnchorRangeMsg(1, 0, 0.0, 1.0, 0.0); }, ErrorCode::kInvalidMessage);
}

TEST(Messages, KeyframeKeepsPoseAndRejectsBadCovariance) {
  CounterRng rng = make_rng(10);
  const Sim3Pose p = oracle::random_pose(rng, 10.0);
  const KeyframeMsg k(1, 0.5, p, Mat7::Identity());
  EXPECT_LT((oracle::matrix(k.pose()) - oracle::matrix(p)).cwiseAbs().maxCoeff(), 1e-12);
  Mat7 bad = Mat7::Identity();
  bad(3, 3) = 0.0;
  expect_error([&] { KeyframeMsg(1, 0.0, p, bad); }, ErrorCode::kNonSpdInformation);
}

TEST(Messages, OdometryEdgeNeedsIncreasingTimes) {
  expect_error([] { OdometryEdge(1, 1.0, 1.0, Sim3Pose(), Mat7::Identity()); },
               ErrorCode::kInvalidMessage);
}

TEST(OdometryFromKeyframes, EdgesReproduceTheChain) {
  CounterRng rng = make_rng(11);
  std::vector<KeyframeMsg> chain;
  Mat7 cov = Mat7::Identity() * 0.01;
  for (int k = 0; k < 5; ++k) {
    chain.emplace_back(1, 0.1 * k, oracle::random_pose(rng, 5.0), cov);
  }
  const auto edges = odometry_from_keyframes(chain);
  ASSERT_EQ(edges.size(), 4u);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    EXPECT_LT(odometry_residual(chain[k].pose(), chain[k + 1].pose(),
                                edges[k].relative_pose())
                  .norm(),
              1e-10);
    EXPECT_LT((edges[k].information() - Mat7::Identity() * 100.0).norm(), 1e-9);
  }
  std::swap(chain[1], chain[2]);
  expect_error([&] { (void)odometry_from_keyframes(chain); }, ErrorCode::kInvalidMessage);
}

}  // namespace
}  // namespace rangefuse
