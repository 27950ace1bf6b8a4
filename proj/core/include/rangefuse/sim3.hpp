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

// Lie-group machinery for SO(3), SE(3) and Sim(3).
//
// A similarity is stored as the triple (R, t, s) and its canonical 4x4 form is
//
//     [ R   t  ]
//     [ 0  1/s ]
//
// Every group law here is the 4x4 matrix product of that form reconverted to
// a triple. Dehomogenizing, the point action is p -> s (R p + t), so the
// camera centre (the image of the origin) is s t.
//
// Twist coordinates are ordered (rotation[3], translation[3], log-scale[1]);
// the Lie-algebra element of xi = (w, v, l) is
//
//     [ hat(w)  v ]
//     [   0    -l ]
//
// so exp of a pure log-scale twist l gives (I, 0, s = e^l).

#ifndef RANGEFUSE_SIM3_HPP
#define RANGEFUSE_SIM3_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rangefuse {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

/// Rotations closer than this to pi are outside the principal branch of log.
inline constexpr double kLogBranchMargin = 1e-6;
/// Tolerance (Frobenius) of the orthonormality and determinant invariants.
inline constexpr double kRotationTolerance = 1e-9;
/// Compositions re-project onto SO(3) once drift exceeds this.
inline constexpr double kReorthonormalizeThreshold = 1e-8;

[[nodiscard]] Mat3 hat(const Vec3& v);

class Rotation3 {
 public:
  Rotation3() : m_(Mat3::Identity()) {}

  /// Throws kNonOrthonormalRotation if `m` violates the invariants.
  static Rotation3 from_matrix(const Mat3& m);
  /// Closest rotation in the Frobenius sense (polar decomposition).
  static Rotation3 nearest(const Mat3& m);
  static Rotation3 from_quaternion(const Eigen::Quaterniond& q);
  static Rotation3 exp(const Vec3& omega);

  /// Rotation vector on the closed branch [0, pi].
  [[nodiscard]] Vec3 log() const;
  [[nodiscard]] double angle() const;
  [[nodiscard]] const Mat3& matrix() const { return m_; }
  [[nodiscard]] Eigen::Quaterniond quaternion() const;
  [[nodiscard]] Rotation3 inverse() const { return Rotation3(m_.transpose()); }

  Rotation3 operator*(const Rotation3& other) const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// max(||R^T R - I||_F, |det R - 1|).
  static double orthonormality_error(const Mat3& m);

 private:
  explicit Rotation3(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

struct SE3Pose {
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();

  [[nodiscard]] Mat4 matrix() const;
  [[nodiscard]] SE3Pose inverse() const;
  SE3Pose operator*(const SE3Pose& other) const;
};

/// Lie-algebra coordinates of Sim(3), see the ordering note at the top.
class Twist7 {
 public:
  static constexpr int kRotation = 0;
  static constexpr int kTranslation = 3;
  static constexpr int kLogScale = 6;

  Twist7() : v_(Vec7::Zero()) {}
  explicit Twist7(const Vec7& v) : v_(v) {}
  Twist7(const Vec3& rotation, const Vec3& translation, double log_scale);

  [[nodiscard]] Vec3 rotation() const { return v_.segment<3>(kRotation); }
  [[nodiscard]] Vec3 translation() const { return v_.segment<3>(kTranslation); }
  [[nodiscard]] double log_scale() const { return v_[kLogScale]; }
  [[nodiscard]] const Vec7& vector() const { return v_; }
  [[nodiscard]] double norm() const { return v_.norm(); }

  Twist7 operator-() const { return Twist7(Vec7(-v_)); }
  bool operator==(const Twist7& other) const { return v_ == other.v_; }

 private:
  Vec7 v_;
};

class Sim3Pose {
 public:
  Sim3Pose() : scale_(1.0), translation_(Vec3::Zero()) {}
  /// Throws kNonPositiveScale unless scale is finite and > 0.
  Sim3Pose(const Rotation3& rotation, const Vec3& translation, double scale);

  static Sim3Pose identity() { return {}; }
  /// Inverse of matrix(): expects a bottom row (0, 0, 0, 1/s) with 1/s > 0.
  static Sim3Pose from_matrix(const Mat4& m);

  [[nodiscard]] const Rotation3& rotation() const { return rotation_; }
  [[nodiscard]] const Vec3& translation() const { return translation_; }
  [[nodiscard]] double scale() const { return scale_; }

  [[nodiscard]] Mat4 matrix() const;
  /// Camera centre in the target frame, i.e. transform_point(*this, 0) = s t.
  [[nodiscard]] Vec3 position() const { return scale_ * translation_; }

 private:
  Rotation3 rotation_;
  double scale_;
  Vec3 translation_;
};

[[nodiscard]] Sim3Pose compose(const Sim3Pose& a, const Sim3Pose& b);
[[nodiscard]] Sim3Pose inverse(const Sim3Pose& a);
inline Sim3Pose operator*(const Sim3Pose& a, const Sim3Pose& b) {
  return compose(a, b);
}

[[nodiscard]] Sim3Pose exp(const Twist7& xi);
/// Principal-branch logarithm; throws kAngleNearPi when the rotation angle is
/// at least pi - kLogBranchMargin.
[[nodiscard]] Twist7 log(const Sim3Pose& a);
/// Logarithm on the closed branch (angle up to pi). Used for transporting
/// absolute poses, never for residuals.
[[nodiscard]] Twist7 log_closed_branch(const Sim3Pose& a);

/// diag(I, 1/s) * T as a similarity; throws kNonPositiveScale.
[[nodiscard]] Sim3Pose lift_se3(const SE3Pose& pose, double scale);
[[nodiscard]] Vec3 transform_point(const Sim3Pose& a, const Vec3& p);

/// The update rule pose <- pose * exp(delta).
[[nodiscard]] inline Sim3Pose retract(const Sim3Pose& a, const Twist7& delta) {
  return compose(a, exp(delta));
}

/// 4x4 Lie-algebra matrix of xi.
[[nodiscard]] Mat4 hat(const Twist7& xi);
/// a * exp(xi) * a^-1 = exp(adjoint(a) * xi).
[[nodiscard]] Mat7 adjoint(const Sim3Pose& a);
/// Matrix of the bracket [xi, .] in twist coordinates.
[[nodiscard]] Mat7 ad(const Twist7& xi);
/// exp(xi + d) ~= exp(xi) * exp(right_jacobian(xi) * d).
[[nodiscard]] Mat7 right_jacobian(const Twist7& xi);
[[nodiscard]] Mat7 right_jacobian_inverse(const Twist7& xi);

}  // namespace rangefuse

#endif  // RANGEFUSE_SIM3_HPP
