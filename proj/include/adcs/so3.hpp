#pragma once

// Coordinate-free rotation algebra on SO(3).

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace adcs {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

/// Tolerance on ||R^T R - I||_F and |det R - 1| for a valid rotation.
inline constexpr double kRotationTolerance = 1e-9;

/// Below this rotation angle exp/log switch to series expansions.
inline constexpr double kSmallAngle = 1e-6;

/// Attitude matrix in SO(3). Every constructor path checks orthonormality,
/// so holding a RotationMatrix means holding a valid rotation.
class RotationMatrix {
 public:
  RotationMatrix() : m_(Matrix3::Identity()) {}

  /// Throws InvalidRotation if `m` is not in SO(3) within kRotationTolerance.
  explicit RotationMatrix(const Matrix3& m);

  static RotationMatrix identity() { return {}; }

  /// Closest rotation to `m` in the Frobenius norm (polar factor with the
  /// determinant sign fixed). Throws InvalidRotation if `m` is singular.
  static RotationMatrix project(const Matrix3& m);

  const Matrix3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  RotationMatrix transpose() const { return RotationMatrix(m_.transpose(), Unchecked{}); }

  RotationMatrix operator*(const RotationMatrix& other) const;
  Vector3 operator*(const Vector3& v) const { return m_ * v; }

  /// Frobenius norm of R^T R - I.
  double orthogonality_error() const;

 private:
  struct Unchecked {};
  RotationMatrix(const Matrix3& m, Unchecked) : m_(m) {}
  friend RotationMatrix exp_so3(const Vector3& v);

  Matrix3 m_;
};

/// Cross-product matrix: hat(v) * w == v.cross(w).
Matrix3 hat(const Vector3& v);

/// Inverse of hat. The asymmetric part of `m` is averaged before extraction;
/// throws NotSkew if the symmetric part exceeds 1e-9 (relative to ||m||, floor 1).
Vector3 vex(const Matrix3& m);

/// Rodrigues exponential.
RotationMatrix exp_so3(const Vector3& v);

/// Principal logarithm, ||result|| in [0, pi]. At angle pi the axis is taken
/// from the column with the largest diagonal of (R + R^T)/2, sign chosen so
/// that component is positive.
Vector3 log_so3(const RotationMatrix& r);

/// Rotation angle of the axis-angle decomposition, in [0, pi].
double principal_angle(const RotationMatrix& r);

/// Right Jacobian of the exponential map: exp(hat(v + d)) ~ exp(hat(v)) exp(hat(J_r(v) d)).
Matrix3 right_jacobian(const Vector3& v);

/// Inverse of the right Jacobian, truncated after the double commutator:
/// I + hat(v)/2 + hat(v)^2/12.
Matrix3 right_jacobian_inverse_series(const Vector3& v);

}  // namespace adcs
