#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <random>

#include "adcs/dynamics.hpp"
#include "adcs/estimator.hpp"

namespace adcs::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vector3 random_vector(Rng& rng, double scale = 1.0) {
  return Vector3(uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale));
}

inline Vector3 random_unit(Rng& rng) {
  Vector3 v;
  do {
    v = random_vector(rng);
  } while (v.norm() < 0.1 || v.norm() > 1.0);
  return v.normalized();
}

/// Built with Eigen's own angle-axis code, not exp_so3.
inline Matrix3 random_rotation_matrix(Rng& rng, double max_angle = std::numbers::pi) {
  return Eigen::AngleAxisd(uniform(rng, 0.0, max_angle), random_unit(rng)).toRotationMatrix();
}

inline RotationMatrix random_rotation(Rng& rng, double max_angle = std::numbers::pi) {
  return RotationMatrix::project(random_rotation_matrix(rng, max_angle));
}

inline Matrix3 random_spd(Rng& rng, double lo, double hi) {
  const Matrix3 q = random_rotation_matrix(rng);
  const Vector3 d(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi));
  const Matrix3 m = q * d.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

/// Any unit vector orthogonal to `g`.
inline Vector3 random_orthogonal(Rng& rng, const Vector3& g) {
  Vector3 v;
  do {
    v = random_vector(rng);
    v -= v.dot(g) * g;
  } while (v.norm() < 0.1);
  return v.normalized();
}

inline VscmgParams random_vscmg(Rng& rng, bool with_offset) {
  const Vector3 g = random_unit(rng);
  const Vector3 eta = random_orthogonal(rng, g);
  VscmgParams p = VscmgParams::aligned(g, eta, Vector3::Ones(), Vector3::Ones(), uniform(rng, 0.1, 1.0),
                                       uniform(rng, 0.1, 1.0), random_vector(rng, 0.5),
                                       with_offset ? uniform(rng, -0.2, 0.2) : 0.0);
  p.gimbal_inertia = random_spd(rng, 0.05, 0.3);
  p.rotor_inertia = random_spd(rng, 0.05, 0.3);
  return p;
}

inline SpacecraftConfig random_config(Rng& rng, int units, bool with_offset) {
  SpacecraftConfig cfg;
  cfg.base_inertia = random_spd(rng, 2.0, 5.0);
  for (int i = 0; i < units; ++i) cfg.units.push_back(random_vscmg(rng, with_offset));
  return cfg;
}

inline SpacecraftState random_state(Rng& rng, const SpacecraftConfig& cfg, double omega_scale = 1.0,
                                    double rate_scale = 1.0) {
  SpacecraftState s;
  s.attitude = random_rotation(rng);
  s.omega = random_vector(rng, omega_scale);
  for (std::size_t i = 0; i < cfg.units.size(); ++i) {
    s.units.push_back({uniform(rng, -std::numbers::pi, std::numbers::pi),
                       uniform(rng, -std::numbers::pi, std::numbers::pi),
                       uniform(rng, -rate_scale, rate_scale), uniform(rng, -rate_scale, rate_scale)});
  }
  return s;
}

/// Kinetic energy summed body by body from first principles: base rotation,
/// then each gimbal and rotor as a rigid body with its own angular velocity,
/// inertia about its centre of mass and centre-of-mass velocity relative to
/// the base frame origin. Rotations come from Eigen's angle-axis type.
inline double multibody_energy(const SpacecraftConfig& cfg, const SpacecraftState& s) {
  const Vector3& w = s.omega;
  double t = 0.5 * w.dot(cfg.base_inertia * w);
  for (std::size_t i = 0; i < cfg.units.size(); ++i) {
    const VscmgParams& p = cfg.units[i];
    const GimbalRotorState& u = s.units[i];
    const Eigen::AngleAxisd gimbal_turn(u.alpha, p.gimbal_axis);
    const Matrix3 rg = gimbal_turn.toRotationMatrix() * p.mount.matrix();
    const Vector3 eta = gimbal_turn * p.rotor_axis;
    const Matrix3 rr = Eigen::AngleAxisd(u.theta, eta).toRotationMatrix() * rg;

    // Gimbal: spins with the base plus the gimbal rate; its centre is fixed in the base.
    const Vector3 wg = w + u.alpha_dot * p.gimbal_axis;
    const Vector3 vg = w.cross(p.gimbal_position);
    t += 0.5 * wg.dot(rg * p.gimbal_inertia * rg.transpose() * wg) + 0.5 * p.gimbal_mass * vg.squaredNorm();

    // Rotor: adds the spin; its centre rides on the gimbal at offset sigma along eta.
    const Vector3 wr = wg + u.theta_dot * eta;
    const Vector3 r = p.gimbal_position + p.rotor_offset * eta;
    const Vector3 vr = w.cross(r) + p.rotor_offset * u.alpha_dot * p.gimbal_axis.cross(eta);
    t += 0.5 * wr.dot(rr * p.rotor_inertia * rr.transpose() * wr) + 0.5 * p.rotor_mass * vr.squaredNorm();
  }
  return t;
}

/// exp of hat(v) by a truncated matrix power series.
inline Matrix3 exp_series(const Vector3& v, int terms = 20) {
  Matrix3 k;
  k << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  Matrix3 sum = Matrix3::Identity();
  Matrix3 term = Matrix3::Identity();
  for (int n = 1; n < terms; ++n) {
    term = term * k / static_cast<double>(n);
    sum += term;
  }
  return sum;
}

}  // namespace adcs::test
