#pragma once

// Spacecraft base body carrying n variable-speed control moment gyroscopes
// (VSCMGs): inertia assembly, kinetic energy, momenta and a structure
// preserving propagator for the Lagrange-d'Alembert equations
//
//   dPi/dt = Pi x Omega + M_ext(t, R)
//   dp/dt  = dT/dgamma + tau
//   dR/dt  = R hat(Omega)

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

#include "adcs/so3.hpp"

namespace adcs {

using Vector2 = Eigen::Vector2d;
using Matrix32 = Eigen::Matrix<double, 3, 2>;

/// Geometry and mass properties of one VSCMG unit.
///
/// Frames: `mount` maps the gimbal-fixed frame to the base-body frame at
/// alpha = 0, so the gimbal orientation is R_g(alpha) = exp(alpha g) mount.
/// The rotor frame coincides with the gimbal frame at theta = 0 and spins
/// about eta: R_r = exp(theta eta) R_g. `gimbal_axis` and `rotor_axis` are
/// body-frame unit vectors at alpha = 0; eta(alpha) = exp(alpha g) rotor_axis.
/// The rotor centre of mass sits at gimbal_position + rotor_offset * eta.
struct VscmgParams {
  Matrix3 gimbal_inertia = Matrix3::Identity();  // kg m^2, gimbal frame
  Matrix3 rotor_inertia = Matrix3::Identity();   // kg m^2, rotor frame
  double gimbal_mass = 0.0;                      // kg
  double rotor_mass = 0.0;                       // kg
  Vector3 gimbal_position = Vector3::Zero();     // m, body frame
  double rotor_offset = 0.0;                     // m, along eta
  Vector3 gimbal_axis = Vector3::UnitZ();
  Vector3 rotor_axis = Vector3::UnitX();
  RotationMatrix mount;

  /// Builds a unit whose gimbal frame has axes (g, eta0, g x eta0) and whose
  /// gimbal and rotor inertias are diagonal in that frame.
  static VscmgParams aligned(const Vector3& gimbal_axis, const Vector3& rotor_axis,
                             const Vector3& gimbal_inertia_diag, const Vector3& rotor_inertia_diag,
                             double gimbal_mass, double rotor_mass,
                             const Vector3& gimbal_position, double rotor_offset = 0.0);

  /// Throws InvalidParameter on non-unit axes, negative masses or inertias
  /// that are not symmetric positive definite.
  void validate() const;
};

struct SpacecraftConfig {
  Matrix3 base_inertia = Matrix3::Identity();  // kg m^2
  std::vector<VscmgParams> units;

  void validate() const;

  /// `count` units in a pyramid: unit i sits at azimuth 2 pi i / count, its
  /// gimbal axis tilted `skew_angle` from the body z axis, rotor axis
  /// horizontal and tangential at alpha = 0.
  static SpacecraftConfig pyramid(const Matrix3& base_inertia, int count, double skew_angle,
                                  double radius, const VscmgParams& prototype);

  /// Three-unit array with gimbal axes at acos(1/3) from body z.
  static SpacecraftConfig tetrahedron(const Matrix3& base_inertia, double radius,
                                      const VscmgParams& prototype);
};

struct GimbalRotorState {
  double alpha = 0.0;      // rad
  double theta = 0.0;      // rad
  double alpha_dot = 0.0;  // rad/s
  double theta_dot = 0.0;  // rad/s

  Vector2 rates() const { return {alpha_dot, theta_dot}; }
};

struct SpacecraftState {
  RotationMatrix attitude;              // body to inertial
  Vector3 omega = Vector3::Zero();      // rad/s, body frame
  std::vector<GimbalRotorState> units;
  double t = 0.0;                       // s
};

/// Per-unit quantities at a given (alpha, theta), body frame.
struct UnitKinematics {
  RotationMatrix gimbal_rotation;  // R_g
  RotationMatrix rotor_rotation;   // R_r
  Vector3 eta;                     // rotor axis
  Vector3 rotor_position;          // rho_g + sigma eta
  Matrix3 gimbal_inertia;          // R_g J_g R_g^T
  Matrix3 rotor_inertia;           // R_r J_r R_r^T
  Matrix3 offset_free;             // J_c
  Matrix3 offset_dependent;        // I_c (not symmetric on its own)
  Matrix3 varying;                 // I_T contribution
  Matrix32 coupling;               // B
  Eigen::Matrix2d gimbal_rotor;    // J_gr
};

UnitKinematics unit_kinematics(const VscmgParams& p, double alpha, double theta);

/// Locked inertia for chi = [Omega; alpha_1, theta_1, ..., alpha_n, theta_n].
struct AssembledInertia {
  Eigen::MatrixXd locked;           // (3 + 2n) square, symmetric
  Matrix3 constant_part;            // J_T
  Matrix3 varying_part;             // I_T, summed over units
  Eigen::Matrix<double, 3, Eigen::Dynamic> coupling;  // stacked B columns
  std::vector<UnitKinematics> units;

  /// J_T + I_T; plays the role of Lambda in Pi = Lambda Omega + B gamma_dot.
  Matrix3 base_block() const { return constant_part + varying_part; }
};

/// Throws SingularInertia if the locked inertia is not positive definite.
AssembledInertia assemble_inertia(const SpacecraftConfig& cfg,
                                  std::span<const GimbalRotorState> units);

/// Stacked chi vector.
Eigen::VectorXd generalized_velocity(const SpacecraftState& state);

double kinetic_energy(const SpacecraftConfig& cfg, const SpacecraftState& state);

struct Momenta {
  Vector3 total = Vector3::Zero();  // Pi = dT/dOmega
  std::vector<Vector2> units;       // p = dT/dgamma_dot
};

Momenta momenta(const SpacecraftConfig& cfg, const SpacecraftState& state);

struct Velocities {
  Vector3 omega = Vector3::Zero();
  std::vector<Vector2> rates;  // (alpha_dot, theta_dot) per unit
};

/// Solves the locked-inertia system for (Omega, gamma_dot). Only the angles
/// of `angles` are read.
Velocities velocities_from_momenta(const SpacecraftConfig& cfg,
                                   std::span<const GimbalRotorState> angles,
                                   const Vector3& total, std::span<const Vector2> units);

/// Partial derivative of T with respect to (alpha, theta) of each unit at
/// fixed (Omega, gamma_dot).
std::vector<Vector2> dT_dgamma(const SpacecraftConfig& cfg, const SpacecraftState& state);

/// Total angular momentum in the inertial frame, R Pi.
Vector3 inertial_momentum(const SpacecraftConfig& cfg, const SpacecraftState& state);

/// External moment on the base body (body frame, N m), e.g. gravity gradient.
using ExternalMoment = std::function<Vector3(double t, const RotationMatrix& attitude)>;

/// One fixed step of length h. The momentum-level state (Pi, p, gamma) and
/// the attitude increment u, R = R_k exp(u), are marched together with a
/// classical 4-stage Runge-Kutta scheme (Munthe-Kaas form), so the attitude
/// never leaves SO(3). `tau` holds (gimbal, rotor) torques per unit, N m.
SpacecraftState propagate(const SpacecraftConfig& cfg, const SpacecraftState& state,
                          std::span<const Vector2> tau, const ExternalMoment& external, double h);

}  // namespace adcs
