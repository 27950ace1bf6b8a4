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

#include "support/dense_lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace rangefuse::oracle {

namespace {

struct Rows {
  Eigen::MatrixXd j;
  Eigen::VectorXd r;
};

// Appends W^(1/2)-whitened rows, with W = L L^T and rows L^T r, L^T J.
void append(std::vector<Rows>& out, const Eigen::MatrixXd& information,
            const Eigen::MatrixXd& j, const Eigen::VectorXd& r) {
  const Eigen::MatrixXd lt = information.llt().matrixU();
  out.push_back({lt * j, lt * r});
}

std::vector<Rows> whitened_rows(const GraphState& g, bool with_jacobian) {
  const auto n = static_cast<Eigen::Index>(g.dimension());
  std::vector<Rows> rows;
  for (const Factor& factor : g.factors()) {
    if (const auto* f = std::get_if<PriorTerm>(&factor)) {
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(7, with_jacobian ? n : 0);
      if (with_jacobian) {
        j.middleCols(7 * f->node, 7) = prior_jacobian(g.pose(f->node), f->prior);
      }
      append(rows, f->information, j,
             prior_residual(g.pose(f->node), f->prior).vector());
    } else if (const auto* f = std::get_if<OdometryTerm>(&factor)) {
      const Sim3Pose& pi = g.pose(f->node_i);
      const Sim3Pose& pj = g.pose(f->node_j);
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(7, with_jacobian ? n : 0);
      if (with_jacobian) {
        const OdometryJacobians oj = odometry_jacobians(pi, pj, f->z);
        j.middleCols(7 * f->node_i, 7) = oj.pose_i;
        j.middleCols(7 * f->node_j, 7) = oj.pose_j;
      }
      append(rows, f->information, j, odometry_residual(pi, pj, f->z).vector());
    } else if (const auto* f = std::get_if<InterRangeTerm>(&factor)) {
      const Sim3Pose& pa = g.pose(f->node_a);
      const Sim3Pose& pb = g.pose(f->node_b);
      const Vec3 la = g.lever_arm(f->node_a);
      const Vec3 lb = g.lever_arm(f->node_b);
      if ((antenna_position(pa, la) - antenna_position(pb, lb)).norm() <
          kMinRangeDistance) {
        continue;
      }
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(1, with_jacobian ? n : 0);
      if (with_jacobian) {
        const RangeJacobians rj = range_jacobians(pa, pb, la, lb);
        j.middleCols(7 * f->node_a, 7) = rj.pose_a;
        j.middleCols(7 * f->node_b, 7) = rj.pose_b;
      }
      Eigen::VectorXd r(1);
      r(0) = range_residual(pa, pb, f->range, la, lb);
      append(rows, Eigen::MatrixXd::Constant(1, 1, f->information), j, r);
    } else if (const auto* f = std::get_if<AnchorRangeTerm>(&factor)) {
      const Sim3Pose& p = g.pose(f->node);
      const Vec3 lever = g.lever_arm(f->node);
      if ((antenna_position(p, lever) - f->anchor).norm() < kMinRangeDistance) {
        continue;
      }
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(1, with_jacobian ? n : 0);
      if (with_jacobian) {
        j.middleCols(7 * f->node, 7) = anchor_range_jacobian(p, f->anchor, lever);
      }
      Eigen::VectorXd r(1);
      r(0) = anchor_range_residual(p, f->anchor, f->range, lever);
      append(rows, Eigen::MatrixXd::Constant(1, 1, f->information), j, r);
    }
  }
  return rows;
}

}  // namespace

DenseSystem dense_system(const GraphState& graph) {
  const std::vector<Rows> rows = whitened_rows(graph, true);
  Eigen::Index m = 0;
  for (const Rows& r : rows) m += r.r.size();
  const auto n = static_cast<Eigen::Index>(graph.dimension());
  DenseSystem s;
  s.jacobian.resize(m, n);
  s.residual.resize(m);
  Eigen::Index row = 0;
  for (const Rows& r : rows) {
    s.jacobian.middleRows(row, r.r.size()) = r.j;
    s.residual.segment(row, r.r.size()) = r.r;
    row += r.r.size();
  }
  s.h = s.jacobian.transpose() * s.jacobian;
  s.b = s.jacobian.transpose() * s.residual;
  s.cost = s.residual.squaredNorm();
  return s;
}

double dense_cost(const GraphState& graph) {
  double cost = 0.0;
  for (const Rows& r : whitened_rows(graph, false)) cost += r.r.squaredNorm();
  return cost;
}

DenseLmResult dense_lm(const GraphState& graph, const SolverConfig& config) {
  GraphState state = graph;
  DenseLmResult out;
  double cost = dense_cost(state);
  out.costs.push_back(cost);
  double damping = config.initial_damping;
  int rejections = 0;
  const auto n = static_cast<Eigen::Index>(state.dimension());
  for (int it = 0; it < config.max_iterations; ++it) {
    if (cost == 0.0) return out;
    const DenseSystem sys = dense_system(state);
    bool stop = false;
    while (true) {
      const Eigen::MatrixXd a = sys.h + damping * Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd step = -a.ldlt().solve(sys.b);
      double largest = 0.0;
      for (Eigen::Index k = 0; k < n / 7; ++k) {
        largest = std::max(largest, step.segment(7 * k, 7).norm());
      }
      if (largest > config.step_norm_cap) step *= config.step_norm_cap / largest;
      if (step.norm() < config.step_norm_tolerance) return out;
      GraphState candidate = state;
      for (Eigen::Index k = 0; k < n / 7; ++k) {
        const Vec7 d = step.segment(7 * k, 7);
        candidate.set_pose(static_cast<std::size_t>(k),
                           state.pose(static_cast<std::size_t>(k)) * exp(Twist7(d)));
      }
      double new_cost = std::numeric_limits<double>::infinity();
      try {
        new_cost = dense_cost(candidate);
      } catch (const std::exception&) {
      }
      if (new_cost < cost) {
        const double relative = (cost - new_cost) / cost;
        state = std::move(candidate);
        cost = new_cost;
        out.costs.push_back(cost);
        out.iterates.push_back(state.poses());
        rejections = 0;
        damping = std::max(damping / config.damping_decrease,
                           std::numeric_limits<double>::min());
        stop = relative < config.relative_cost_tolerance;
        break;
      }
      ++rejections;
      damping *= config.damping_increase;
      if (rejections >= config.max_consecutive_rejections ||
          damping > config.max_damping) {
        return out;
      }
    }
    if (stop) return out;
  }
  return out;
}

}  // namespace rangefuse::oracle
