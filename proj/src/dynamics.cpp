#include "adcs/dynamics.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "adcs/errors.hpp"

namespace adcs {

namespace {

void require_spd(const Matrix3& m, const std::string& what) {
  if (!m.allFinite()) throw InvalidParameter(what + " has non-finite entries");
  const double scale = std::max(1e-300, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidParameter(what + " is not symmetric");
  }
  Eigen::LLT<Matrix3> llt(m);
  if (llt.info() != Eigen::Success) throw InvalidParameter(what + " is not positive definite");
}

void require_unit(const Vector3& v, const std::string& what) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > 1e-12) {
    throw InvalidParameter(what + " must be a unit vector");
  }
}

Matrix3 mount_from_axes(const Vector3& g, const Vector3& eta) {
  Matrix3 m;
  m.col(0) = g;
  m.col(1) = eta;
  m.col(2) = g.cross(eta);
  return m;
}

// Analytic dT/d(alpha, theta) for one unit, from the body-by-body energy
// T_unit = 1/2 w_g.J_gb w_g + 1/2 w_r.J_rb w_r + 1/2 m_r |v_r|^2 using
// dR_g/dalpha = hat(g) R_g, dR_r/dalpha = hat(g) R_r, dR_r/dtheta = hat(eta) R_r.
Vector2 unit_dT_dgamma(const VscmgParams& p, const UnitKinematics& k, const Vector3& omega,
                       const GimbalRotorState& s) {
  const Vector3& g = p.gimbal_axis;
  const Vector3& eta = k.eta;
  const Vector3 tangent = g.cross(eta);  // d eta / d alpha
  const double sigma = p.rotor_offset;

  const Vector3 w_g = omega + s.alpha_dot * g;
  const Vector3 w_r = w_g + s.theta_dot * eta;
  const Vector3 h_g = k.gimbal_inertia * w_g;
  const Vector3 h_r = k.rotor_inertia * w_r;
  const Vector3 v_r = omega.cross(k.rotor_position) + sigma * s.alpha_dot * tangent;
  const Vector3 dv_dalpha = sigma * omega.cross(tangent) + sigma * s.alpha_dot * g.cross(tangent);

  const double d_alpha = g.dot(h_g.cross(w_g)) + g.dot(h_r.cross(w_r)) +
                         s.theta_dot * h_r.dot(tangent) + p.rotor_mass * v_r.dot(dv_dalpha);
  const double d_theta = eta.dot(h_r.cross(w_r));
  return {d_alpha, d_theta};
}

Eigen::LLT<Eigen::MatrixXd> factor(const AssembledInertia& inertia) {
  Eigen::LLT<Eigen::MatrixXd> llt(inertia.locked);
  if (llt.info() != Eigen::Success) {
    throw SingularInertia("locked inertia matrix is not positive definite");
  }
  return llt;
}

}  // namespace

VscmgParams VscmgParams::aligned(const Vector3& gimbal_axis, const Vector3& rotor_axis,
                                 const Vector3& gimbal_inertia_diag,
                                 const Vector3& rotor_inertia_diag, double gimbal_mass,
                                 double rotor_mass, const Vector3& gimbal_position,
                                 double rotor_offset) {
  VscmgParams p;
  p.gimbal_axis = gimbal_axis.normalized();
  p.rotor_axis = rotor_axis.normalized();
  p.mount = RotationMatrix(mount_from_axes(p.gimbal_axis, p.rotor_axis));
  p.gimbal_inertia = gimbal_inertia_diag.asDiagonal();
  p.rotor_inertia = rotor_inertia_diag.asDiagonal();
  p.gimbal_mass = gimbal_mass;
  p.rotor_mass = rotor_mass;
  p.gimbal_position = gimbal_position;
  p.rotor_offset = rotor_offset;
  return p;
}

void VscmgParams::validate() const {
  require_spd(gimbal_inertia, "gimbal inertia");
  require_spd(rotor_inertia, "rotor inertia");
  require_unit(gimbal_axis, "gimbal axis");
  require_unit(rotor_axis, "rotor axis");
  if (!(gimbal_mass >= 0.0) || !(rotor_mass >= 0.0)) {
    throw InvalidParameter("unit masses must be non-negative");
  }
  if (!gimbal_position.allFinite() || !std::isfinite(rotor_offset)) {
    throw InvalidParameter("unit position and rotor offset must be finite");
  }
}

void SpacecraftConfig::validate() const {
  require_spd(base_inertia, "base inertia");
  if (units.empty()) throw InvalidParameter("spacecraft needs at least one VSCMG unit");
  for (const auto& u : units) u.validate();
}

SpacecraftConfig SpacecraftConfig::pyramid(const Matrix3& base_inertia, int count,
                                           double skew_angle, double radius,
                                           const VscmgParams& prototype) {
  if (count < 1) throw InvalidParameter("pyramid needs at least one unit");
  SpacecraftConfig cfg;
  cfg.base_inertia = base_inertia;
  for (int i = 0; i < count; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / count;
    const Vector3 g(std::sin(skew_angle) * std::cos(phi), std::sin(skew_angle) * std::sin(phi),
                    std::cos(skew_angle));
    const Vector3 eta(-std::sin(phi), std::cos(phi), 0.0);
    VscmgParams u = prototype;
    u.gimbal_axis = g;
    u.rotor_axis = eta;
    u.mount = RotationMatrix(mount_from_axes(g, eta));
    u.gimbal_position = radius * Vector3(std::cos(phi), std::sin(phi), 0.0);
    cfg.units.push_back(u);
  }
  return cfg;
}

SpacecraftConfig SpacecraftConfig::tetrahedron(const Matrix3& base_inertia, double radius,
                                               const VscmgParams& prototype) {
  return pyramid(base_inertia, 3, std::acos(1.0 / 3.0), radius, prototype);
}

UnitKinematics unit_kinematics(const VscmgParams& p, double alpha, double theta) {
  const RotationMatrix gimbal_turn = exp_so3(alpha * p.gimbal_axis);
  const RotationMatrix rg = gimbal_turn * p.mount;
  const Vector3 eta = gimbal_turn * p.rotor_axis;
  const RotationMatrix rr = exp_so3(theta * eta) * rg;

  const Matrix3 rho_x = hat(p.gimbal_position);
  const Matrix3 eta_x = hat(eta);
  const double sigma = p.rotor_offset;
  const double m_r = p.rotor_mass;

  UnitKinematics k;
  k.gimbal_rotation = rg;
  k.rotor_rotation = rr;
  k.eta = eta;
  k.rotor_position = p.gimbal_position + sigma * eta;
  k.gimbal_inertia = rg.matrix() * p.gimbal_inertia * rg.matrix().transpose();
  k.rotor_inertia = rr.matrix() * p.rotor_inertia * rr.matrix().transpose();
  k.offset_free = k.gimbal_inertia + k.rotor_inertia;
  k.offset_dependent = -m_r * sigma * (rho_x * eta_x + sigma * eta_x * eta_x);
  k.varying = k.offset_free + k.offset_dependent - m_r * sigma * eta_x * rho_x;

  const Vector3& g = p.gimbal_axis;
  k.coupling.col(0) = (k.offset_free + k.offset_dependent) * g;
  k.coupling.col(1) = k.rotor_inertia * eta;

  // The translational term m_r sigma^2 |g x eta|^2 comes from the rotor
  // centre of mass swinging about the gimbal axis when sigma != 0.
  const double cross = g.dot(k.rotor_inertia * eta);
  k.gimbal_rotor << g.dot(k.offset_free * g) + m_r * sigma * sigma * g.cross(eta).squaredNorm(),
      cross, cross, eta.dot(k.rotor_inertia * eta);
  return k;
}

AssembledInertia assemble_inertia(const SpacecraftConfig& cfg,
                                  std::span<const GimbalRotorState> units) {
  if (units.size() != cfg.units.size()) {
    throw InvalidParameter("state has " + std::to_string(units.size()) + " units, config has " +
                           std::to_string(cfg.units.size()));
  }
  const auto n = static_cast<Eigen::Index>(cfg.units.size());
  AssembledInertia a;
  a.locked = Eigen::MatrixXd::Zero(3 + 2 * n, 3 + 2 * n);
  a.coupling.resize(3, 2 * n);
  a.constant_part = cfg.base_inertia;
  a.varying_part.setZero();
  a.units.reserve(cfg.units.size());

  for (Eigen::Index i = 0; i < n; ++i) {
    const VscmgParams& p = cfg.units[i];
    const Matrix3 rho_x = hat(p.gimbal_position);
    a.constant_part -= (p.gimbal_mass + p.rotor_mass) * rho_x * rho_x;

    UnitKinematics k = unit_kinematics(p, units[i].alpha, units[i].theta);
    a.varying_part += k.varying;
    a.coupling.middleCols<2>(2 * i) = k.coupling;
    a.locked.block<2, 2>(3 + 2 * i, 3 + 2 * i) = k.gimbal_rotor;
    a.units.push_back(std::move(k));
  }
  a.locked.topLeftCorner<3, 3>() = a.base_block();
  a.locked.topRightCorner(3, 2 * n) = a.coupling;
  a.locked.bottomLeftCorner(2 * n, 3) = a.coupling.transpose();
  a.locked = 0.5 * (a.locked + a.locked.transpose()).eval();

  if (!a.locked.allFinite()) throw SingularInertia("locked inertia has non-finite entries");
  factor(a);
  return a;
}

Eigen::VectorXd generalized_velocity(const SpacecraftState& state) {
  const auto n = static_cast<Eigen::Index>(state.units.size());
  Eigen::VectorXd chi(3 + 2 * n);
  chi.head<3>() = state.omega;
  for (Eigen::Index i = 0; i < n; ++i) chi.segment<2>(3 + 2 * i) = state.units[i].rates();
  return chi;
}

double kinetic_energy(const SpacecraftConfig& cfg, const SpacecraftState& state) {
  const AssembledInertia a = assemble_inertia(cfg, state.units);
  const Eigen::VectorXd chi = generalized_velocity(state);
  return 0.5 * chi.dot(a.locked * chi);
}

Momenta momenta(const SpacecraftConfig& cfg, const SpacecraftState& state) {
  const AssembledInertia a = assemble_inertia(cfg, state.units);
  const Eigen::VectorXd m = a.locked * generalized_velocity(state);
  Momenta out;
  out.total = m.head<3>();
  for (std::size_t i = 0; i < state.units.size(); ++i) {
    out.units.emplace_back(m.segment<2>(3 + 2 * static_cast<Eigen::Index>(i)));
  }
  return out;
}

Velocities velocities_from_momenta(const SpacecraftConfig& cfg,
                                   std::span<const GimbalRotorState> angles,
                                   const Vector3& total, std::span<const Vector2> units) {
  const AssembledInertia a = assemble_inertia(cfg, angles);
  const auto n = static_cast<Eigen::Index>(cfg.units.size());
  if (static_cast<Eigen::Index>(units.size()) != n) {
    throw InvalidParameter("momentum vector does not match unit count");
  }
  Eigen::VectorXd rhs(3 + 2 * n);
  rhs.head<3>() = total;
  for (Eigen::Index i = 0; i < n; ++i) rhs.segment<2>(3 + 2 * i) = units[i];
  const Eigen::VectorXd chi = factor(a).solve(rhs);

  Velocities v;
  v.omega = chi.head<3>();
  for (Eigen::Index i = 0; i < n; ++i) v.rates.emplace_back(chi.segment<2>(3 + 2 * i));
  return v;
}

std::vector<Vector2> dT_dgamma(const SpacecraftConfig& cfg, const SpacecraftState& state) {
  if (state.units.size() != cfg.units.size()) {
    throw InvalidParameter("state and config unit counts differ");
  }
  std::vector<Vector2> out;
  out.reserve(cfg.units.size());
  for (std::size_t i = 0; i < cfg.units.size(); ++i) {
    const auto& s = state.units[i];
    const UnitKinematics k = unit_kinematics(cfg.units[i], s.alpha, s.theta);
    out.push_back(unit_dT_dgamma(cfg.units[i], k, state.omega, s));
  }
  return out;
}

Vector3 inertial_momentum(const SpacecraftConfig& cfg, const SpacecraftState& state) {
  return state.attitude * momenta(cfg, state).total;
}

SpacecraftState propagate(const SpacecraftConfig& cfg, const SpacecraftState& state,
                          std::span<const Vector2> tau, const ExternalMoment& external,
                          double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidParameter("step size must be positive");
  const std::size_t n = cfg.units.size();
  if (state.units.size() != n) throw InvalidParameter("state and config unit counts differ");
  if (!tau.empty() && tau.size() != n) throw InvalidParameter("torque vector does not match unit count");
  const auto ni = static_cast<Eigen::Index>(n);

  // y = [u, Pi, p_1..p_n, gamma_1..gamma_n]
  const Eigen::Index pi_at = 3, p_at = 6, gamma_at = 6 + 2 * ni;
  const Eigen::Index dim = 6 + 4 * ni;

  std::vector<GimbalRotorState> scratch = state.units;
  auto rhs = [&](double t, const Eigen::VectorXd& y) {
    for (std::size_t i = 0; i < n; ++i) {
      scratch[i].alpha = y(gamma_at + 2 * static_cast<Eigen::Index>(i));
      scratch[i].theta = y(gamma_at + 2 * static_cast<Eigen::Index>(i) + 1);
    }
    const AssembledInertia a = assemble_inertia(cfg, scratch);
    const Eigen::VectorXd chi = factor(a).solve(y.segment(pi_at, 3 + 2 * ni));
    const Vector3 omega = chi.head<3>();
    const Vector3 u = y.head<3>();
    const Vector3 pi = y.segment<3>(pi_at);

    Eigen::VectorXd dy(dim);
    dy.head<3>() = right_jacobian_inverse_series(u) * omega;
    Vector3 pi_dot = pi.cross(omega);
    if (external) pi_dot += external(t, state.attitude * exp_so3(u));
    dy.segment<3>(pi_at) = pi_dot;
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      scratch[i].alpha_dot = chi(3 + 2 * k);
      scratch[i].theta_dot = chi(3 + 2 * k + 1);
      Vector2 p_dot = unit_dT_dgamma(cfg.units[i], a.units[i], omega, scratch[i]);
      if (!tau.empty()) p_dot += tau[i];
      dy.segment<2>(p_at + 2 * k) = p_dot;
      dy.segment<2>(gamma_at + 2 * k) = scratch[i].rates();
    }
    return dy;
  };

  const Momenta m0 = momenta(cfg, state);
  Eigen::VectorXd y0(dim);
  y0.head<3>().setZero();
  y0.segment<3>(pi_at) = m0.total;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    y0.segment<2>(p_at + 2 * k) = m0.units[i];
    y0(gamma_at + 2 * k) = state.units[i].alpha;
    y0(gamma_at + 2 * k + 1) = state.units[i].theta;
  }

  const double t0 = state.t;
  const Eigen::VectorXd k1 = rhs(t0, y0);
  const Eigen::VectorXd k2 = rhs(t0 + 0.5 * h, y0 + 0.5 * h * k1);
  const Eigen::VectorXd k3 = rhs(t0 + 0.5 * h, y0 + 0.5 * h * k2);
  const Eigen::VectorXd k4 = rhs(t0 + h, y0 + h * k3);
  const Eigen::VectorXd y1 = y0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  SpacecraftState next;
  next.t = t0 + h;
  next.attitude = state.attitude * exp_so3(y1.head<3>());
  if (next.attitude.orthogonality_error() > 1e-13) {
    next.attitude = RotationMatrix::project(next.attitude.matrix());
  }
  next.units = state.units;
  std::vector<Vector2> p1(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    next.units[i].alpha = y1(gamma_at + 2 * k);
    next.units[i].theta = y1(gamma_at + 2 * k + 1);
    p1[i] = y1.segment<2>(p_at + 2 * k);
  }
  const Velocities v = velocities_from_momenta(cfg, next.units, y1.segment<3>(pi_at), p1);
  next.omega = v.omega;
  for (std::size_t i = 0; i < n; ++i) {
    next.units[i].alpha_dot = v.rates[i].x();
    next.units[i].theta_dot = v.rates[i].y();
  }
  return next;
}

}  // namespace adcs
