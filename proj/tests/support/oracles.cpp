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

#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace rangefuse::oracle {

Mat4 matrix(const Mat3& r, const Vec3& t, double s) {
  Mat4 m = Mat4::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = r(i, j);
    m(i, 3) = t(i);
  }
  m(3, 3) = 1.0 / s;
  return m;
}

Mat4 matrix(const Sim3Pose& pose) {
  return matrix(pose.rotation().matrix(), pose.translation(), pose.scale());
}

Mat4 hat(const Vec7& xi) {
  Mat4 m = Mat4::Zero();
  m(0, 1) = -xi(2);
  m(0, 2) = xi(1);
  m(1, 0) = xi(2);
  m(1, 2) = -xi(0);
  m(2, 0) = -xi(1);
  m(2, 1) = xi(0);
  m(0, 3) = xi(3);
  m(1, 3) = xi(4);
  m(2, 3) = xi(5);
  m(3, 3) = -xi(6);
  return m;
}

Vec7 vee(const Mat4& m) {
  Vec7 xi;
  xi << 0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)),
      0.5 * (m(1, 0) - m(0, 1)), m(0, 3), m(1, 3), m(2, 3), -m(3, 3);
  return xi;
}

Mat4 series_exp(const Mat4& a, int terms) {
  int squarings = 0;
  Mat4 scaled = a;
  while (scaled.norm() > 0.5) {
    scaled *= 0.5;
    ++squarings;
  }
  Mat4 sum = Mat4::Identity();
  Mat4 term = Mat4::Identity();
  for (int n = 1; n < terms; ++n) {
    term = term * scaled / static_cast<double>(n);
    sum += term;
  }
  for (int k = 0; k < squarings; ++k) sum = sum * sum;
  return sum;
}

Mat7 adjoint(const Sim3Pose& pose) {
  const Mat4 m = matrix(pose);
  const Mat4 m_inv = m.inverse();
  Mat7 out;
  for (int i = 0; i < 7; ++i) {
    out.col(i) = vee(m * hat(Vec7::Unit(i)) * m_inv);
  }
  return out;
}

Vec3 act(const Sim3Pose& pose, const Vec3& p) {
  const Eigen::Vector4d h = matrix(pose) * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
  return h.head<3>() / h(3);
}

Mat3 random_rotation(CounterRng& rng) {
  // Uniform unit quaternion from four normals, then the textbook matrix.
  double q[4];
  double n = 0.0;
  for (double& c : q) {
    c = rng.normal();
    n += c * c;
  }
  n = std::sqrt(n);
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec7 random_twist(CounterRng& rng, double max_norm) {
  Vec7 xi;
  for (int i = 0; i < 7; ++i) xi(i) = rng.normal();
  return xi.normalized() * (max_norm * rng.uniform());
}

Sim3Pose random_pose(CounterRng& rng, double translation_extent,
                     double log_scale_extent) {
  Vec3 t;
  for (int i = 0; i < 3; ++i) t(i) = translation_extent * (2.0 * rng.uniform() - 1.0);
  const double s = std::exp(log_scale_extent * (2.0 * rng.uniform() - 1.0));
  return Sim3Pose(Rotation3::from_matrix(random_rotation(rng)), t, s);
}

Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Sim3Pose&)>& f,
    const Sim3Pose& pose, double step) {
  const Eigen::VectorXd f0 = f(pose);
  Eigen::MatrixXd j(f0.size(), 7);
  for (int i = 0; i < 7; ++i) {
    const Vec7 d = Vec7::Unit(i) * step;
    // The perturbed pose is built from the oracle exponential.
    const Mat4 plus = matrix(pose) * series_exp(hat(d));
    const Mat4 minus = matrix(pose) * series_exp(hat(-d));
    auto to_pose = [](const Mat4& m) {
      return Sim3Pose(Rotation3::nearest(m.topLeftCorner<3, 3>()),
                      m.topRightCorner<3, 1>(), 1.0 / m(3, 3));
    };
    j.col(i) = (f(to_pose(plus)) - f(to_pose(minus))) / (2.0 * step);
  }
  return j;
}

double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      worst = std::max(worst, std::abs(a(i, k) - b(i, k)) /
                                  std::max(1.0, std::abs(b(i, k))));
    }
  }
  return worst;
}

}  // namespace rangefuse::oracle
