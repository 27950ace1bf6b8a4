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

#include "rangefuse/sim3.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rangefuse/error.hpp"

namespace rangefuse {

namespace {

// Coefficients of  integral_0^1 e^{a w} exp(w hat(omega)) dw
//   = c0 I + c1 hat(omega) + c2 hat(omega)^2,   theta = |omega|.
struct SimilarityCoefficients {
  double c0;
  double c1;
  double c2;
};

// I_k(a) = integral_0^1 w^k e^{a w} dw.
std::array<double, 7> moment_integrals(double a) {
  std::array<double, 7> out{};
  if (std::abs(a) <= 1.0) {
    for (int k = 0; k < 7; ++k) {
      double term = 1.0;  // a^m / m!
      double sum = 0.0;
      for (int m = 0; m < 30; ++m) {
        sum += term / static_cast<double>(k + m + 1);
        term *= a / static_cast<double>(m + 1);
      }
      out[k] = sum;
    }
    return out;
  }
  const double ea = std::exp(a);
  out[0] = std::expm1(a) / a;
  for (int k = 1; k < 7; ++k) {
    out[k] = (ea - k * out[k - 1]) / a;
  }
  return out;
}

SimilarityCoefficients similarity_coefficients(double theta, double a) {
  const auto moments = moment_integrals(a);
  const double c0 = moments[0];
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    const double t4 = t2 * t2;
    return {c0, moments[1] - moments[3] * t2 / 6.0 + moments[5] * t4 / 120.0,
            moments[2] / 2.0 - moments[4] * t2 / 24.0 + moments[6] * t4 / 720.0};
  }
  // (e^z - 1) / z with z = a + i theta, numerator formed without cancellation.
  const double ea = std::exp(a);
  const double half_sin = std::sin(0.5 * theta);
  const double num_re = std::expm1(a) * std::cos(theta) - 2.0 * half_sin * half_sin;
  const double num_im = ea * std::sin(theta);
  const double denom = a * a + theta * theta;
  const double f_re = (num_re * a + num_im * theta) / denom;
  const double f_im = (num_im * a - num_re * theta) / denom;
  return {c0, f_im / theta, (c0 - f_re) / (theta * theta)};
}

// Left factor V with t = V v; V = e^{-l} (c0 I + c1 W + c2 W^2).
Mat3 translation_jacobian(const Vec3& omega, double log_scale) {
  const double theta = omega.norm();
  const auto c = similarity_coefficients(theta, log_scale);
  const Mat3 w = hat(omega);
  return std::exp(-log_scale) *
         (c.c0 * Mat3::Identity() + c.c1 * w + c.c2 * w * w);
}

Twist7 log_impl(const Sim3Pose& a, bool principal) {
  const Vec3 omega = a.rotation().log();
  if (principal &&
      omega.norm() >= std::numbers::pi - kLogBranchMargin) {
    std::ostringstream msg;
    msg << "rotation angle " << omega.norm()
        << " is outside the principal branch";
    throw Error(ErrorCode::kAngleNearPi, msg.str());
  }
  const double log_scale = std::log(a.scale());
  const Mat3 v = translation_jacobian(omega, log_scale);
  const Vec3 u = v.partialPivLu().solve(a.translation());
  return Twist7(omega, u, log_scale);
}

}  // namespace

Mat3 hat(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

// ---------------------------------------------------------------------------
// Rotation3

double Rotation3::orthonormality_error(const Mat3& m) {
  const double ortho = (m.transpose() * m - Mat3::Identity()).norm();
  return std::max(ortho, std::abs(m.determinant() - 1.0));
}

Rotation3 Rotation3::from_matrix(const Mat3& m) {
  const double err = orthonormality_error(m);
  if (!m.allFinite() || err > kRotationTolerance) {
    std::ostringstream msg;
    msg << "orthonormality error " << err << " exceeds " << kRotationTolerance;
    throw Error(ErrorCode::kNonOrthonormalRotation, msg.str());
  }
  return Rotation3(m);
}

Rotation3 Rotation3::nearest(const Mat3& m) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kNonOrthonormalRotation, "non-finite matrix");
  }
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0
                ? -1.0
                : 1.0;
  return Rotation3(svd.matrixU() * d * svd.matrixV().transpose());
}

Rotation3 Rotation3::from_quaternion(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || n < 1e-12) {
    throw Error(ErrorCode::kNonOrthonormalRotation, "degenerate quaternion");
  }
  return Rotation3(q.normalized().toRotationMatrix());
}

Rotation3 Rotation3::exp(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    const double h = std::sin(0.5 * theta);
    b = 2.0 * h * h / theta2;
  }
  const Mat3 w = hat(omega);
  return Rotation3(Mat3::Identity() + a * w + b * w * w);
}

Vec3 Rotation3::log() const {
  const Vec3 w(0.5 * (m_(2, 1) - m_(1, 2)), 0.5 * (m_(0, 2) - m_(2, 0)),
               0.5 * (m_(1, 0) - m_(0, 1)));  // sin(theta) * axis
  const double cos_theta = std::clamp(0.5 * (m_.trace() - 1.0), -1.0, 1.0);
  const double sin_theta = w.norm();
  const double theta = std::atan2(sin_theta, cos_theta);
  if (theta < 1e-6) {
    return (1.0 + theta * theta / 6.0) * w;
  }
  if (theta < std::numbers::pi - 1e-3) {
    return (theta / sin_theta) * w;
  }
  // Near pi: the symmetric part gives axis * axis^T.
  const Mat3 sym = 0.5 * (m_ + m_.transpose());
  const Mat3 outer = (sym - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
  int col = 0;
  outer.diagonal().maxCoeff(&col);
  Vec3 axis = outer.col(col) / std::sqrt(std::max(outer(col, col), 1e-300));
  axis.normalize();
  if (axis.dot(w) < 0.0) axis = -axis;
  return theta * axis;
}

double Rotation3::angle() const { return log().norm(); }

Eigen::Quaterniond Rotation3::quaternion() const {
  return Eigen::Quaterniond(m_).normalized();
}

Rotation3 Rotation3::operator*(const Rotation3& other) const {
  const Mat3 product = m_ * other.m_;
  if (orthonormality_error(product) > kReorthonormalizeThreshold) {
    return nearest(product);
  }
  return Rotation3(product);
}

// ---------------------------------------------------------------------------
// SE3Pose

Mat4 SE3Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

SE3Pose SE3Pose::inverse() const {
  const Rotation3 inv = rotation.inverse();
  return {inv, -(inv * translation)};
}

SE3Pose SE3Pose::operator*(const SE3Pose& other) const {
  return {rotation * other.rotation, rotation * other.translation + translation};
}

// ---------------------------------------------------------------------------
// Twist7 / Sim3Pose

Twist7::Twist7(const Vec3& rotation, const Vec3& translation, double log_scale) {
  v_ << rotation, translation, log_scale;
}

Sim3Pose::Sim3Pose(const Rotation3& rotation, const Vec3& translation,
                   double scale)
    : rotation_(rotation), scale_(scale), translation_(translation) {
  if (!std::isfinite(scale) || scale <= 0.0) {
    std::ostringstream msg;
    msg << "scale " << scale << " must be positive";
    throw Error(ErrorCode::kNonPositiveScale, msg.str());
  }
}

Sim3Pose Sim3Pose::from_matrix(const Mat4& m) {
  const double inv_scale = m(3, 3);
  if (!(inv_scale > 0.0) || !std::isfinite(inv_scale)) {
    throw Error(ErrorCode::kNonPositiveScale,
                "bottom-right entry of a similarity must be positive");
  }
  return {Rotation3::from_matrix(m.topLeftCorner<3, 3>()),
          m.topRightCorner<3, 1>(), 1.0 / inv_scale};
}

Mat4 Sim3Pose::matrix() const {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = rotation_.matrix();
  m.topRightCorner<3, 1>() = translation_;
  m(3, 3) = 1.0 / scale_;
  return m;
}

Sim3Pose compose(const Sim3Pose& a, const Sim3Pose& b) {
  return {a.rotation() * b.rotation(),
          a.rotation() * b.translation() + a.translation() / b.scale(),
          a.scale() * b.scale()};
}

Sim3Pose inverse(const Sim3Pose& a) {
  const Rotation3 r_inv = a.rotation().inverse();
  return {r_inv, -a.scale() * (r_inv * a.translation()), 1.0 / a.scale()};
}

Sim3Pose exp(const Twist7& xi) {
  const Vec3 omega = xi.rotation();
  const double log_scale = xi.log_scale();
  return {Rotation3::exp(omega),
          translation_jacobian(omega, log_scale) * xi.translation(),
          std::exp(log_scale)};
}

Twist7 log(const Sim3Pose& a) { return log_impl(a, true); }

Twist7 log_closed_branch(const Sim3Pose& a) { return log_impl(a, false); }

Sim3Pose lift_se3(const SE3Pose& pose, double scale) {
  if (!std::isfinite(scale) || scale <= 0.0) {
    std::ostringstream msg;
    msg << "lift scale " << scale << " must be positive";
    throw Error(ErrorCode::kNonPositiveScale, msg.str());
  }
  return {pose.rotation, pose.translation, scale};
}

Vec3 transform_point(const Sim3Pose& a, const Vec3& p) {
  return a.scale() * (a.rotation() * p + a.translation());
}

Mat4 hat(const Twist7& xi) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = hat(xi.rotation());
  m.topRightCorner<3, 1>() = xi.translation();
  m(3, 3) = -xi.log_scale();
  return m;
}

Mat7 adjoint(const Sim3Pose& a) {
  const Mat3& r = a.rotation().matrix();
  const double s = a.scale();
  const Vec3& t = a.translation();
  Mat7 out = Mat7::Zero();
  out.block<3, 3>(0, 0) = r;
  out.block<3, 3>(3, 0) = s * hat(t) * r;
  out.block<3, 3>(3, 3) = s * r;
  out.block<3, 1>(3, 6) = -s * t;
  out(6, 6) = 1.0;
  return out;
}

Mat7 ad(const Twist7& xi) {
  const Mat3 w = hat(xi.rotation());
  const Vec3 v = xi.translation();
  Mat7 out = Mat7::Zero();
  out.block<3, 3>(0, 0) = w;
  out.block<3, 3>(3, 0) = hat(v);
  out.block<3, 3>(3, 3) = w + xi.log_scale() * Mat3::Identity();
  out.block<3, 1>(3, 6) = -v;
  return out;
}

Mat7 right_jacobian(const Twist7& xi) {
  // sum_n (-ad xi)^n / (n+1)!, an entire series.
  const Mat7 minus_ad = -ad(xi);
  Mat7 term = Mat7::Identity();
  Mat7 sum = Mat7::Identity();
  for (int n = 1; n < 60; ++n) {
    term = (minus_ad * term) / static_cast<double>(n + 1);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  return sum;
}

Mat7 right_jacobian_inverse(const Twist7& xi) {
  return right_jacobian(xi).partialPivLu().inverse();
}

}  // namespace rangefuse
