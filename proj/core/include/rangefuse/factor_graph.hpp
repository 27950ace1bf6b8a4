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

// Multi-agent factor graph and its batch Levenberg-Marquardt solver.
//
// Variables are the Sim(3) keyframe poses, ordered agent-major then by time;
// node k owns columns [7k, 7k + 7) of the normal equations. The objective is
// the sum of r^T W r over all factors (no 1/2), and each iteration solves
// (H + d I) dx = -b with H = sum J^T W J, b = sum J^T W r, then applies
// pose <- pose * exp(dx_k) per node.

#ifndef RANGEFUSE_FACTOR_GRAPH_HPP
#define RANGEFUSE_FACTOR_GRAPH_HPP

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rangefuse/measurements.hpp"
#include "rangefuse/sim3.hpp"

namespace rangefuse {

struct NodeKey {
  AgentId agent = 0;
  double timestamp = 0.0;

  auto operator<=>(const NodeKey&) const = default;
};

using PoseMap = std::map<NodeKey, Sim3Pose>;

struct PriorTerm {
  std::size_t node;
  Sim3Pose prior;
  Mat7 information;
};

struct OdometryTerm {
  std::size_t node_i;
  std::size_t node_j;
  Sim3Pose z;
  Mat7 information;
};

struct InterRangeTerm {
  std::size_t node_a;
  std::size_t node_b;
  double range;
  double information;
  double time_gap;  ///< largest |t_range - t_keyframe| of the two bindings
};

struct AnchorRangeTerm {
  std::size_t node;
  AnchorId anchor_id;
  Vec3 anchor;
  double range;
  double information;
  double time_gap;
};

using Factor =
    std::variant<PriorTerm, OdometryTerm, InterRangeTerm, AnchorRangeTerm>;

struct BuildOptions {
  double association_tolerance = 0.05;  ///< seconds
  std::map<AgentId, Vec3> lever_arms;   ///< antenna offset in the body frame
};

class GraphState {
 public:
  [[nodiscard]] std::size_t node_count() const { return keys_.size(); }
  [[nodiscard]] std::size_t dimension() const { return 7 * keys_.size(); }
  [[nodiscard]] const std::vector<NodeKey>& keys() const { return keys_; }
  [[nodiscard]] const std::vector<Sim3Pose>& poses() const { return poses_; }
  [[nodiscard]] const std::vector<Factor>& factors() const { return factors_; }
  [[nodiscard]] std::optional<std::size_t> find(const NodeKey& key) const;
  [[nodiscard]] const Sim3Pose& pose(std::size_t node) const {
    return poses_[node];
  }
  [[nodiscard]] Vec3 lever_arm(std::size_t node) const;
  /// Ranges dropped because no keyframe lay within the association tolerance
  /// (or the agent / anchor was unknown).
  [[nodiscard]] std::size_t dangling_count() const { return dangling_; }
  [[nodiscard]] PoseMap pose_map() const;

  void set_pose(std::size_t node, const Sim3Pose& pose) { poses_[node] = pose; }
  /// pose_k <- pose_k * exp(step.segment<7>(7k)) for every node.
  void retract_all(const Eigen::VectorXd& step);

 private:
  friend GraphState build_graph(std::span<const KeyframeMsg>,
                                std::span<const OdometryEdge>,
                                std::span<const InterRangeMsg>,
                                std::span<const AnchorRangeMsg>,
                                const std::map<AnchorId, Vec3>&,
                                std::span<const PriorFactor>,
                                const BuildOptions&);

  std::vector<NodeKey> keys_;
  std::vector<Sim3Pose> poses_;
  std::vector<Factor> factors_;
  std::map<AgentId, Vec3> lever_arms_;
  std::size_t dangling_ = 0;
};

/// One node per keyframe, initialized at the keyframe's pose. Odometry edges
/// must join consecutive keyframes of one agent (else kDanglingFactor); each
/// agent needs exactly one prior, on its first keyframe (else kMissingPrior or
/// kInvalidMessage). Ranges bind to the nearest keyframe of each agent.
[[nodiscard]] GraphState build_graph(
    std::span<const KeyframeMsg> keyframes,
    std::span<const OdometryEdge> odometry,
    std::span<const InterRangeMsg> inter_ranges,
    std::span<const AnchorRangeMsg> anchor_ranges,
    const std::map<AnchorId, Vec3>& anchors,
    std::span<const PriorFactor> priors, const BuildOptions& options = {});

struct LinearSystem {
  Eigen::SparseMatrix<double> h;
  Eigen::VectorXd b;
  double cost = 0.0;
  std::size_t skipped_factors = 0;  ///< range factors with coincident ends
};

/// Every incident 7x7 block is stored, explicit zeros included, so the
/// sparsity pattern is the factor incidence.
[[nodiscard]] LinearSystem linearize(const GraphState& graph);
[[nodiscard]] double total_cost(const GraphState& graph);
/// Node pairs (i <= j) whose 7x7 block of `h` holds at least one entry.
[[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> block_pattern(
    const Eigen::SparseMatrix<double>& h);

struct SolverConfig {
  double initial_damping = 1e-4;
  double damping_increase = 10.0;
  double damping_decrease = 10.0;
  double max_damping = 1e16;
  int max_iterations = 100;
  double relative_cost_tolerance = 1e-9;
  double step_norm_tolerance = 1e-10;
  double step_norm_cap = 1.0;  ///< largest per-node twist norm of one step
  int max_consecutive_rejections = 10;
  bool record_iterates = false;
};

/// Throws kConfigError unless every field is positive.
void validate(const SolverConfig& config);

enum class Termination {
  kRelativeCostDecrease,
  kSmallStep,
  kZeroCost,
  kMaxIterations,
  kNoImprovement,
};

[[nodiscard]] std::string_view to_string(Termination reason);

struct SolveReport {
  int iterations = 0;
  int accepted_steps = 0;
  int rejected_steps = 0;
  std::vector<double> costs;  ///< initial cost, then one per accepted step
  std::vector<std::vector<Sim3Pose>> iterates;  ///< per accepted step, opt-in
  double final_gradient_norm = 0.0;  ///< |b| at the last linearization
  double final_damping = 0.0;
  Termination termination = Termination::kMaxIterations;
  std::size_t skipped_factors = 0;
};

struct SolveResult {
  GraphState graph;
  SolveReport report;
};

/// Throws kSingularSystem if some connected component of the graph has no
/// prior or the damped system cannot be factorized below max_damping, and
/// kNonFiniteCost if the initial cost is not finite.
[[nodiscard]] SolveResult solve_lm(const GraphState& graph,
                                   const SolverConfig& config = {});

struct MapPoint {
  NodeKey keyframe;
  Vec3 position;
};

/// Moves every point with its keyframe: p <- after * before^-1 * p.
/// Throws kUnknownKeyframe if a keyframe is missing from either map.
[[nodiscard]] std::vector<MapPoint> update_map_points(
    std::span<const MapPoint> points, const PoseMap& before,
    const PoseMap& after);

}  // namespace rangefuse

#endif  // RANGEFUSE_FACTOR_GRAPH_HPP
