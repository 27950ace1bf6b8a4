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

#include "rangefuse/factor_graph.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "rangefuse/error.hpp"

namespace rangefuse {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct AgentNodes {
  std::size_t first = 0;
  std::vector<double> timestamps;
};

struct Binding {
  std::size_t node;
  double gap;
};

std::optional<Binding> nearest(const std::map<AgentId, AgentNodes>& agents,
                               AgentId agent, double t) {
  const auto it = agents.find(agent);
  if (it == agents.end()) return std::nullopt;
  const auto& ts = it->second.timestamps;
  const auto upper = std::lower_bound(ts.begin(), ts.end(), t);
  std::size_t best = 0;
  double gap = std::numeric_limits<double>::infinity();
  if (upper != ts.end()) {
    best = static_cast<std::size_t>(upper - ts.begin());
    gap = *upper - t;
  }
  if (upper != ts.begin() && t - *(upper - 1) <= gap) {
    best = static_cast<std::size_t>(upper - ts.begin()) - 1;
    gap = t - *(upper - 1);
  }
  return Binding{it->second.first + best, gap};
}

std::string describe(AgentId agent, double t) {
  std::ostringstream msg;
  msg << "agent " << agent << " at t=" << t;
  return msg.str();
}

void add_block(Triplets& triplets, std::size_t row_node, std::size_t col_node,
               const Mat7& block) {
  const auto r0 = static_cast<int>(7 * row_node);
  const auto c0 = static_cast<int>(7 * col_node);
  for (int c = 0; c < 7; ++c) {
    for (int r = 0; r < 7; ++r) {
      triplets.emplace_back(r0 + r, c0 + c, block(r, c));
      if (row_node != col_node) {
        triplets.emplace_back(c0 + c, r0 + r, block(r, c));
      }
    }
  }
}

bool is_coincident(const Error& e) {
  return e.code() == ErrorCode::kCoincidentPositions;
}

struct Accumulator {
  Triplets* triplets = nullptr;  // null when only the cost is wanted
  Eigen::VectorXd* b = nullptr;
  double cost = 0.0;
  std::size_t skipped = 0;
};

void accumulate(const GraphState& g, const Factor& factor, Accumulator& acc) {
  const auto& poses = g.poses();
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PriorTerm>) {
          const Sim3Pose& pose = poses[f.node];
          const Vec7 r = prior_residual(pose, f.prior).vector();
          acc.cost += r.dot(f.information * r);
          if (acc.triplets == nullptr) return;
          const Mat7 j = prior_jacobian(pose, f.prior);
          const Mat7 jt_w = j.transpose() * f.information;
          add_block(*acc.triplets, f.node, f.node, jt_w * j);
          acc.b->segment<7>(7 * f.node) += jt_w * r;
        } else if constexpr (std::is_same_v<T, OdometryTerm>) {
          const Sim3Pose& pi = poses[f.node_i];
          const Sim3Pose& pj = poses[f.node_j];
          const Vec7 r = odometry_residual(pi, pj, f.z).vector();
          acc.cost += r.dot(f.information * r);
          if (acc.triplets == nullptr) return;
          const OdometryJacobians j = odometry_jacobians(pi, pj, f.z);
          const Mat7 ji_w = j.pose_i.transpose() * f.information;
          const Mat7 jj_w = j.pose_j.transpose() * f.information;
          add_block(*acc.triplets, f.node_i, f.node_i, ji_w * j.pose_i);
          add_block(*acc.triplets, f.node_j, f.node_j, jj_w * j.pose_j);
          add_block(*acc.triplets, f.node_i, f.node_j, ji_w * j.pose_j);
          acc.b->segment<7>(7 * f.node_i) += ji_w * r;
          acc.b->segment<7>(7 * f.node_j) += jj_w * r;
        } else if constexpr (std::is_same_v<T, InterRangeTerm>) {
          const Sim3Pose& pa = poses[f.node_a];
          const Sim3Pose& pb = poses[f.node_b];
          const Vec3 la = g.lever_arm(f.node_a);
          const Vec3 lb = g.lever_arm(f.node_b);
          try {
            const double r = range_residual(pa, pb, f.range, la, lb);
            if (acc.triplets != nullptr) {
              const RangeJacobians j = range_jacobians(pa, pb, la, lb);
              const Vec7 ja = j.pose_a.transpose();
              const Vec7 jb = j.pose_b.transpose();
              add_block(*acc.triplets, f.node_a, f.node_a,
                        f.information * ja * ja.transpose());
              add_block(*acc.triplets, f.node_b, f.node_b,
                        f.information * jb * jb.transpose());
              add_block(*acc.triplets, f.node_a, f.node_b,
                        f.information * ja * jb.transpose());
              acc.b->segment<7>(7 * f.node_a) += f.information * r * ja;
              acc.b->segment<7>(7 * f.node_b) += f.information * r * jb;
            }
            acc.cost += r * f.information * r;
          } catch (const Error& e) {
            if (!is_coincident(e)) throw;
            ++acc.skipped;
          }
        } else {
          const Sim3Pose& p = poses[f.node];
          const Vec3 lever = g.lever_arm(f.node);
          try {
            const double r = anchor_range_residual(p, f.anchor, f.range, lever);
            if (acc.triplets != nullptr) {
              const Vec7 j = anchor_range_jacobian(p, f.anchor, lever).transpose();
              add_block(*acc.triplets, f.node, f.node,
                        f.information * j * j.transpose());
              acc.b->segment<7>(7 * f.node) += f.information * r * j;
            }
            acc.cost += r * f.information * r;
          } catch (const Error& e) {
            if (!is_coincident(e)) throw;
            ++acc.skipped;
          }
        }
      },
      factor);
}

// Every connected component (odometry and inter-range edges) needs a prior.
void check_gauge(const GraphState& g) {
  std::vector<std::size_t> parent(g.node_count());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto root = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto join = [&](std::size_t a, std::size_t b) { parent[root(a)] = root(b); };
  std::vector<char> has_prior(g.node_count(), 0);
  for (const Factor& factor : g.factors()) {
    if (const auto* f = std::get_if<OdometryTerm>(&factor)) {
      join(f->node_i, f->node_j);
    } else if (const auto* f = std::get_if<InterRangeTerm>(&factor)) {
      join(f->node_a, f->node_b);
    } else if (const auto* f = std::get_if<PriorTerm>(&factor)) {
      has_prior[f->node] = 1;
    }
  }
  std::vector<char> anchored(g.node_count(), 0);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (has_prior[k]) anchored[root(k)] = 1;
  }
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (!anchored[root(k)]) {
      const NodeKey& key = g.keys()[k];
      throw Error(ErrorCode::kSingularSystem,
                  "no prior in the component of " +
                      describe(key.agent, key.timestamp));
    }
  }
}

double safe_cost(const GraphState& g) {
  try {
    return total_cost(g);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kAngleNearPi) {
      return std::numeric_limits<double>::infinity();
    }
    throw;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// GraphState

std::optional<std::size_t> GraphState::find(const NodeKey& key) const {
  const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - keys_.begin());
}

Vec3 GraphState::lever_arm(std::size_t node) const {
  const auto it = lever_arms_.find(keys_[node].agent);
  return it == lever_arms_.end() ? Vec3::Zero() : it->second;
}

PoseMap GraphState::pose_map() const {
  PoseMap out;
  for (std::size_t k = 0; k < keys_.size(); ++k) out.emplace(keys_[k], poses_[k]);
  return out;
}

void GraphState::retract_all(const Eigen::VectorXd& step) {
  for (std::size_t k = 0; k < poses_.size(); ++k) {
    poses_[k] = retract(poses_[k], Twist7(Vec7(step.segment<7>(7 * k))));
  }
}

// ---------------------------------------------------------------------------
// build_graph

GraphState build_graph(std::span<const KeyframeMsg> keyframes,
                       std::span<const OdometryEdge> odometry,
                       std::span<const InterRangeMsg> inter_ranges,
                       std::span<const AnchorRangeMsg> anchor_ranges,
                       const std::map<AnchorId, Vec3>& anchors,
                       std::span<const PriorFactor> priors,
                       const BuildOptions& options) {
  if (!(options.association_tolerance >= 0.0)) {
    throw Error(ErrorCode::kConfigError,
                "association tolerance must be non-negative");
  }
  std::vector<const KeyframeMsg*> sorted;
  sorted.reserve(keyframes.size());
  for (const KeyframeMsg& kf : keyframes) sorted.push_back(&kf);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const KeyframeMsg* a, const KeyframeMsg* b) {
                     return NodeKey{a->agent_id(), a->timestamp()} <
                            NodeKey{b->agent_id(), b->timestamp()};
                   });

  GraphState g;
  g.lever_arms_ = options.lever_arms;
  std::map<AgentId, AgentNodes> agents;
  for (const KeyframeMsg* kf : sorted) {
    const NodeKey key{kf->agent_id(), kf->timestamp()};
    if (!g.keys_.empty() && g.keys_.back() == key) {
      throw Error(ErrorCode::kInvalidMessage,
                  "duplicate keyframe for " + describe(key.agent, key.timestamp));
    }
    auto [it, inserted] = agents.try_emplace(key.agent);
    if (inserted) it->second.first = g.keys_.size();
    it->second.timestamps.push_back(key.timestamp);
    g.keys_.push_back(key);
    g.poses_.push_back(kf->pose());
  }

  const double tol = options.association_tolerance;
  std::vector<char> prior_seen(g.keys_.size(), 0);
  for (const PriorFactor& p : priors) {
    const auto bind = nearest(agents, p.agent_id(), p.timestamp());
    if (!bind || bind->gap > tol) {
      throw Error(ErrorCode::kDanglingFactor,
                  "prior has no keyframe: " +
                      describe(p.agent_id(), p.timestamp()));
    }
    if (bind->node != agents.at(p.agent_id()).first) {
      throw Error(ErrorCode::kInvalidMessage,
                  "prior is not on the first keyframe of agent " +
                      std::to_string(p.agent_id()));
    }
    if (prior_seen[bind->node]) {
      throw Error(ErrorCode::kInvalidMessage,
                  "second prior for agent " + std::to_string(p.agent_id()));
    }
    prior_seen[bind->node] = 1;
    g.factors_.emplace_back(PriorTerm{bind->node, p.prior_pose(), p.information()});
  }
  for (const auto& [agent, nodes] : agents) {
    if (!prior_seen[nodes.first]) {
      throw Error(ErrorCode::kMissingPrior,
                  "agent " + std::to_string(agent) + " has no prior");
    }
  }

  for (const OdometryEdge& e : odometry) {
    const auto bi = nearest(agents, e.agent_id(), e.timestamp_i());
    const auto bj = nearest(agents, e.agent_id(), e.timestamp_j());
    if (!bi || !bj || bi->gap > tol || bj->gap > tol ||
        bj->node != bi->node + 1) {
      throw Error(ErrorCode::kDanglingFactor,
                  "odometry edge does not join consecutive keyframes: " +
                      describe(e.agent_id(), e.timestamp_i()));
    }
    g.factors_.emplace_back(
        OdometryTerm{bi->node, bj->node, e.relative_pose(), e.information()});
  }

  for (const InterRangeMsg& m : inter_ranges) {
    const auto ba = nearest(agents, m.agent_a(), m.timestamp());
    const auto bb = nearest(agents, m.agent_b(), m.timestamp());
    if (!ba || !bb || ba->gap > tol || bb->gap > tol) {
      ++g.dangling_;
      continue;
    }
    g.factors_.emplace_back(InterRangeTerm{ba->node, bb->node, m.range(),
                                           1.0 / m.variance(),
                                           std::max(ba->gap, bb->gap)});
  }

  for (const AnchorRangeMsg& m : anchor_ranges) {
    const auto bind = nearest(agents, m.agent_id(), m.timestamp());
    const auto anchor = anchors.find(m.anchor_id());
    if (!bind || bind->gap > tol || anchor == anchors.end()) {
      ++g.dangling_;
      continue;
    }
    g.factors_.emplace_back(AnchorRangeTerm{bind->node, m.anchor_id(),
                                            anchor->second, m.range(),
                                            1.0 / m.variance(), bind->gap});
  }
  return g;
}

// ---------------------------------------------------------------------------
// Linearization

LinearSystem linearize(const GraphState& graph) {
  const auto n = static_cast<Eigen::Index>(graph.dimension());
  Triplets triplets;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  Accumulator acc{&triplets, &b};
  for (const Factor& f : graph.factors()) accumulate(graph, f, acc);

  LinearSystem out;
  out.h.resize(n, n);
  out.h.setFromTriplets(triplets.begin(), triplets.end());
  out.b = std::move(b);
  out.cost = acc.cost;
  out.skipped_factors = acc.skipped;
  return out;
}

double total_cost(const GraphState& graph) {
  Accumulator acc;
  for (const Factor& f : graph.factors()) accumulate(graph, f, acc);
  return acc.cost;
}

std::vector<std::pair<std::size_t, std::size_t>> block_pattern(
    const Eigen::SparseMatrix<double>& h) {
  std::set<std::pair<std::size_t, std::size_t>> blocks;
  for (int col = 0; col < h.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(h, col); it; ++it) {
      const auto bi = static_cast<std::size_t>(it.row()) / 7;
      const auto bj = static_cast<std::size_t>(it.col()) / 7;
      if (bi <= bj) blocks.emplace(bi, bj);
    }
  }
  return {blocks.begin(), blocks.end()};
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt

void validate(const SolverConfig& c) {
  const bool ok = c.initial_damping > 0.0 && c.damping_increase > 1.0 &&
                  c.damping_decrease > 1.0 && c.max_damping > c.initial_damping &&
                  c.max_iterations > 0 && c.relative_cost_tolerance > 0.0 &&
                  c.step_norm_tolerance > 0.0 && c.step_norm_cap > 0.0 &&
                  c.max_consecutive_rejections > 0;
  if (!ok) {
    throw Error(ErrorCode::kConfigError,
                "solver settings must be positive (damping factors > 1)");
  }
}

std::string_view to_string(Termination reason) {
  switch (reason) {
    case Termination::kRelativeCostDecrease:
      return "relative_cost_decrease";
    case Termination::kSmallStep:
      return "small_step";
    case Termination::kZeroCost:
      return "zero_cost";
    case Termination::kMaxIterations:
      return "max_iterations";
    case Termination::kNoImprovement:
      return "no_improvement";
  }
  return "unknown";
}

SolveResult solve_lm(const GraphState& graph, const SolverConfig& config) {
  validate(config);
  check_gauge(graph);

  SolveResult result{graph, {}};
  GraphState& state = result.graph;
  SolveReport& report = result.report;

  double cost = total_cost(state);
  if (!std::isfinite(cost)) {
    throw Error(ErrorCode::kNonFiniteCost, "initial cost is not finite");
  }
  report.costs.push_back(cost);

  const auto n = static_cast<Eigen::Index>(state.dimension());
  Eigen::SparseMatrix<double> identity(n, n);
  identity.setIdentity();
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower,
                       Eigen::AMDOrdering<int>>
      solver;

  double damping = config.initial_damping;
  bool done = false;
  bool pattern_ready = false;
  int consecutive_rejections = 0;
  while (!done && report.iterations < config.max_iterations) {
    if (cost == 0.0) {
      report.termination = Termination::kZeroCost;
      done = true;
      break;
    }
    ++report.iterations;
    const LinearSystem lin = linearize(state);
    report.final_gradient_norm = lin.b.norm();
    report.skipped_factors = lin.skipped_factors;

    while (true) {
      const Eigen::SparseMatrix<double> a = lin.h + damping * identity;
      if (!pattern_ready) {
        solver.analyzePattern(a);
        pattern_ready = true;
      }
      solver.factorize(a);
      if (solver.info() != Eigen::Success) {
        damping *= config.damping_increase;
        ++report.rejected_steps;
        if (damping > config.max_damping) {
          throw Error(ErrorCode::kSingularSystem,
                      "damped normal equations are not positive definite");
        }
        continue;
      }
      Eigen::VectorXd step = -solver.solve(lin.b);
      double largest = 0.0;
      for (Eigen::Index k = 0; k < n / 7; ++k) {
        largest = std::max(largest, step.segment<7>(7 * k).norm());
      }
      if (largest > config.step_norm_cap) step *= config.step_norm_cap / largest;
      if (!step.allFinite()) {
        throw Error(ErrorCode::kSingularSystem, "solve produced a non-finite step");
      }
      if (step.norm() < config.step_norm_tolerance) {
        report.termination = Termination::kSmallStep;
        done = true;
        break;
      }

      GraphState candidate = state;
      candidate.retract_all(step);
      const double new_cost = safe_cost(candidate);
      if (new_cost < cost) {
        const double relative = (cost - new_cost) / cost;
        state = std::move(candidate);
        cost = new_cost;
        report.costs.push_back(cost);
        if (config.record_iterates) report.iterates.push_back(state.poses());
        ++report.accepted_steps;
        consecutive_rejections = 0;
        damping = std::max(damping / config.damping_decrease,
                           std::numeric_limits<double>::min());
        if (relative < config.relative_cost_tolerance) {
          report.termination = Termination::kRelativeCostDecrease;
          done = true;
        }
        break;
      }
      ++report.rejected_steps;
      ++consecutive_rejections;
      damping *= config.damping_increase;
      if (consecutive_rejections >= config.max_consecutive_rejections ||
          damping > config.max_damping) {
        report.termination = Termination::kNoImprovement;
        done = true;
        break;
      }
    }
  }
  report.final_damping = damping;
  return result;
}

// ---------------------------------------------------------------------------
// Map points

std::vector<MapPoint> update_map_points(std::span<const MapPoint> points,
                                        const PoseMap& before,
                                        const PoseMap& after) {
  std::vector<MapPoint> out;
  out.reserve(points.size());
  for (const MapPoint& p : points) {
    const auto b = before.find(p.keyframe);
    const auto a = after.find(p.keyframe);
    if (b == before.end() || a == after.end()) {
      throw Error(ErrorCode::kUnknownKeyframe,
                  "map point on unknown keyframe " +
                      describe(p.keyframe.agent, p.keyframe.timestamp));
    }
    out.push_back({p.keyframe,
                   transform_point(a->second * inverse(b->second), p.position)});
  }
  return out;
}

}  // namespace rangefuse
