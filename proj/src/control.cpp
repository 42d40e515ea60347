#include "adcs/control.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "adcs/errors.hpp"

namespace adcs {

Vector3 internal_momentum(const SpacecraftConfig& cfg, const SpacecraftState& state) {
  const AssembledInertia a = assemble_inertia(cfg, state.units);
  return a.coupling * generalized_velocity(state).tail(a.coupling.cols());
}

Vector3 control_torque(const Vector3& u, const Vector3& omega, const Vector3& u_dot) {
  return u.cross(omega) - u_dot;
}

Vector3 control_torque(const SpacecraftConfig& cfg, const SpacecraftState& state,
                       const Vector3& u_dot) {
  return control_torque(internal_momentum(cfg, state), state.omega, u_dot);
}

Vector3 MomentumRateEstimator::update(const Vector3& u) {
  Vector3 rate = Vector3::Zero();
  if (previous_) rate = (u - *previous_) / step_;
  previous_ = u;
  return rate;
}

Vector3 one_step_torque(const SpacecraftConfig& cfg, const SpacecraftState& state,
                        std::span<const Vector2> rates, double step) {
  const Vector3 u0 = internal_momentum(cfg, state);
  SpacecraftState next = state;
  for (std::size_t i = 0; i < next.units.size(); ++i) {
    next.units[i].alpha += step * rates[i].x();
    next.units[i].theta += step * rates[i].y();
    next.units[i].alpha_dot = rates[i].x();
    next.units[i].theta_dot = rates[i].y();
  }
  return control_torque(u0, state.omega, (internal_momentum(cfg, next) - u0) / step);
}

namespace {

std::vector<Vector2> unstack(const Eigen::VectorXd& x) {
  std::vector<Vector2> out(static_cast<std::size_t>(x.size() / 2));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.segment<2>(static_cast<Eigen::Index>(2 * i));
  return out;
}

}  // namespace

AllocationResult allocate_rates(const SpacecraftConfig& cfg, const SpacecraftState& state,
                                const Vector3& tau_desired, const AllocatorOptions& options) {
  if (!(options.step > 0.0)) throw InvalidParameter("allocator step must be positive");
  const auto n = static_cast<Eigen::Index>(2 * cfg.units.size());
  const Eigen::VectorXd rates = generalized_velocity(state).tail(n);
  auto forward = [&](const Eigen::VectorXd& x) {
    const auto r = unstack(x);
    return one_step_torque(cfg, state, r, options.step);
  };

  AllocationResult result;
  result.command.limits = options.limits;

  // Jacobian of the one-step torque with respect to the commanded rates,
  // by central differences (the map is smooth and cheap).
  Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double eps = 1e-6 * std::max(1.0, std::abs(rates(k)));
    Eigen::VectorXd plus = rates, minus = rates;
    plus(k) += eps;
    minus(k) -= eps;
    jac.col(k) = (forward(plus) - forward(minus)) / (2.0 * eps);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  const auto& sv = svd.singularValues();
  const double largest = sv.size() > 0 ? sv(0) : 0.0;
  result.min_singular_value = sv.size() >= 3 ? sv(2) : 0.0;
  result.rank_deficient = !(largest > 0.0) || !tau_desired.allFinite() ||
                          result.min_singular_value < options.rank_tolerance * largest;

  Eigen::VectorXd command = rates;
  if (largest > 0.0 && tau_desired.allFinite()) {
    const double mu = options.damping * largest;
    const Matrix3 gram = jac * jac.transpose() + mu * mu * Matrix3::Identity();
    const auto solver = gram.ldlt();
    // Two Gauss-Newton passes with the Jacobian frozen absorb the mild
    // nonlinearity from the gimbal angle change within the step.
    for (int pass = 0; pass < 2; ++pass) {
      command += jac.transpose() * solver.solve(tau_desired - forward(command));
    }
  }

  for (std::size_t i = 0; i < cfg.units.size(); ++i) {
    const Vector2 cmd = command.segment<2>(static_cast<Eigen::Index>(2 * i));
    const Vector2 clamped(std::clamp(cmd.x(), -options.limits.gimbal_rate, options.limits.gimbal_rate),
                          std::clamp(cmd.y(), -options.limits.rotor_rate, options.limits.rotor_rate));
    if (clamped != cmd) result.saturated = true;
    result.command.rates.push_back(clamped);
  }
  return result;
}

Vector3 PdAttitudeLaw::operator()(const RotationMatrix& attitude, const Vector3& omega) const {
  const Matrix3 err = target.matrix().transpose() * attitude.matrix();
  const Vector3 e = 0.5 * vex(err - err.transpose());
  return -kp * e - kd * omega;
}

}  // namespace adcs
