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

// Reference implementations used by the tests. Nothing here calls the
// library's group law, exp/log or Jacobian code: matrices are built from the
// raw (R, t, s) fields and every map is a 4x4 matrix computation.

#ifndef RANGEFUSE_TESTS_ORACLES_HPP
#define RANGEFUSE_TESTS_ORACLES_HPP

#include <functional>

#include <Eigen/Core>

#include "rangefuse/random.hpp"
#include "rangefuse/sim3.hpp"

namespace rangefuse::oracle {

/// [R t; 0 1/s] written out element by element.
Mat4 matrix(const Mat3& r, const Vec3& t, double s);
Mat4 matrix(const Sim3Pose& pose);

/// Generator matrix [hat(w) v; 0 -l].
Mat4 hat(const Vec7& xi);
/// Inverse of hat() on an algebra element.
Vec7 vee(const Mat4& m);

/// Truncated power series sum_{n < terms} a^n / n!, with scaling and squaring
/// once |a| exceeds 0.5.
Mat4 series_exp(const Mat4& a, int terms = 30);

/// Columns vee(M hat(e_i) M^-1).
Mat7 adjoint(const Sim3Pose& pose);

/// Homogeneous point action followed by division by the last coordinate.
Vec3 act(const Sim3Pose& pose, const Vec3& p);

Mat3 random_rotation(CounterRng& rng);
Vec7 random_twist(CounterRng& rng, double max_norm);
Sim3Pose random_pose(CounterRng& rng, double translation_extent,
                     double log_scale_extent = 0.5);

/// Central differences of f(pose * exp(h e_i)) in each of the 7 directions.
Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Sim3Pose&)>& f,
    const Sim3Pose& pose, double step = 1e-6);

/// max |a - b| / max(1, |b|) over all entries.
double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace rangefuse::oracle

#endif  // RANGEFUSE_TESTS_ORACLES_HPP
