#include "adcs/so3.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "adcs/errors.hpp"

namespace adcs {

namespace {

Vector3 raw_vex(const Matrix3& m) {
  return {0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1))};
}

// Axis-angle extraction close to angle pi, where sin(angle) carries no
// direction information.
Vector3 log_near_pi(const Matrix3& r, double angle, double c, const Vector3& sin_axis) {
  const Matrix3 sym = 0.5 * (r + r.transpose());
  const Matrix3 outer = (sym - c * Matrix3::Identity()) / (1.0 - c);  // ~ n n^T
  int k = 0;
  outer.diagonal().maxCoeff(&k);
  Vector3 axis = outer.col(k) / std::sqrt(std::max(outer(k, k), 0.0));
  axis.normalize();
  // axis(k) > 0 here. Away from pi proper the sign must follow sin(angle) n;
  // at pi (within rounding) both signs are the same rotation and the
  // positive largest-diagonal component is kept.
  if (sin_axis.norm() > 1e-10 && sin_axis.dot(axis) < 0.0) axis = -axis;
  return angle * axis;
}

}  // namespace

RotationMatrix::RotationMatrix(const Matrix3& m) : m_(m) {
  if (!m.allFinite()) throw InvalidRotation("rotation matrix has non-finite entries");
  const double ortho = orthogonality_error();
  const double det = m.determinant();
  if (ortho > kRotationTolerance || std::abs(det - 1.0) > kRotationTolerance) {
    std::ostringstream os;
    os << "matrix is not in SO(3): ||R^T R - I||_F = " << ortho << ", det = " << det;
    throw InvalidRotation(os.str());
  }
}

RotationMatrix RotationMatrix::project(const Matrix3& m) {
  if (!m.allFinite()) throw InvalidRotation("cannot project non-finite matrix onto SO(3)");
  Eigen::JacobiSVD<Matrix3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(0) == 0.0 || sv(2) < 1e-12 * sv(0)) {
    throw InvalidRotation("cannot project singular matrix onto SO(3)");
  }
  Matrix3 u = svd.matrixU();
  const Matrix3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  return RotationMatrix(u * v.transpose(), Unchecked{});
}

RotationMatrix RotationMatrix::operator*(const RotationMatrix& other) const {
  return RotationMatrix(m_ * other.m_, Unchecked{});
}

double RotationMatrix::orthogonality_error() const {
  return (m_.transpose() * m_ - Matrix3::Identity()).norm();
}

Matrix3 hat(const Vector3& v) {
  Matrix3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vector3 vex(const Matrix3& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double sym = (0.5 * (m + m.transpose())).cwiseAbs().maxCoeff();
  if (sym > 1e-9 * scale) {
    std::ostringstream os;
    os << "vex: matrix is not skew-symmetric (symmetric part " << sym << ")";
    throw NotSkew(os.str());
  }
  return raw_vex(m);
}

RotationMatrix exp_so3(const Vector3& v) {
  const double angle = v.norm();
  const Matrix3 k = hat(v);
  if (angle < kSmallAngle) {
    return RotationMatrix(Matrix3::Identity() + k + 0.5 * k * k, RotationMatrix::Unchecked{});
  }
  const double a = std::sin(angle) / angle;
  const double b = (1.0 - std::cos(angle)) / (angle * angle);
  return RotationMatrix(Matrix3::Identity() + a * k + b * k * k, RotationMatrix::Unchecked{});
}

Vector3 log_so3(const RotationMatrix& rot) {
  const Matrix3& r = rot.matrix();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const Vector3 sin_axis = raw_vex(r);
  const double s = sin_axis.norm();
  const double angle = std::atan2(s, c);
  if (angle < kSmallAngle) return sin_axis * (1.0 + angle * angle / 6.0);
  if (angle > std::numbers::pi - 1e-3) return log_near_pi(r, angle, c, sin_axis);
  return sin_axis * (angle / s);
}

double principal_angle(const RotationMatrix& rot) {
  const Matrix3& r = rot.matrix();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  return std::atan2(raw_vex(r).norm(), c);
}

Matrix3 right_jacobian(const Vector3& v) {
  const double angle = v.norm();
  const Matrix3 k = hat(v);
  if (angle < kSmallAngle) return Matrix3::Identity() - 0.5 * k + k * k / 6.0;
  const double a2 = angle * angle;
  return Matrix3::Identity() - (1.0 - std::cos(angle)) / a2 * k +
         (angle - std::sin(angle)) / (a2 * angle) * k * k;
}

Matrix3 right_jacobian_inverse_series(const Vector3& v) {
  const Matrix3 k = hat(v);
  return Matrix3::Identity() + 0.5 * k + k * k / 12.0;
}

}  // namespace adcs
