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

// Small hand-made factor graphs shared by the unit and acceptance tests.

#ifndef RANGEFUSE_TESTS_GRAPHS_HPP
#define RANGEFUSE_TESTS_GRAPHS_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "rangefuse/factor_graph.hpp"
#include "rangefuse/random.hpp"

namespace rangefuse::testing {

struct GraphInputs {
  std::vector<KeyframeMsg> keyframes;
  std::vector<OdometryEdge> odometry;
  std::vector<InterRangeMsg> inter;
  std::vector<AnchorRangeMsg> anchor;
  std::map<AnchorId, Vec3> anchors;
  std::vector<PriorFactor> priors;
  std::vector<Sim3Pose> truth;  ///< agent-major, same order as graph nodes

  [[nodiscard]] GraphState build(const BuildOptions& options = {}) const;
};

/// Three agents with four keyframes each at t = 1..4: priors on every first
/// keyframe, odometry along each row, ranges 1-2 at t1, t3, t4 and 2-3 at
/// t2, t3, and anchor ranges of agent 1 at t1, t2, t4.
[[nodiscard]] GraphInputs three_agent_example();

/// The 7x7 block pattern (i <= j) the example's factors induce.
[[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>>
three_agent_example_pattern();

struct RandomGraphOptions {
  int agents = 2;
  int keyframes_per_agent = 4;
  double odometry_noise = 0.05;    ///< twist std of the measured increments
  double range_noise = 0.05;       ///< m
  double initial_noise = 0.1;      ///< twist std of the initial guess
  bool anchors = true;
};

/// Random poses in a 20 m box, odometry with left noise, all-pairs ranges at
/// every keyframe, one anchor. Initial guesses are perturbed from the truth.
[[nodiscard]] GraphInputs random_graph(CounterRng& rng,
                                       const RandomGraphOptions& options);

}  // namespace rangefuse::testing

#endif  // RANGEFUSE_TESTS_GRAPHS_HPP
