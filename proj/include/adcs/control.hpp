#pragma once

// Internal-momentum control torque and rate allocation for a VSCMG array.
//
// Splitting the total momentum as Pi = Lambda Omega + u with Lambda = J_T + I_T
// and u = B gamma_dot (B: stacked per-unit coupling columns), the base body
// sees the torque tau_cp = u x Omega - du/dt.

#include <optional>
#include <span>
#include <vector>

#include "adcs/dynamics.hpp"

namespace adcs {

struct SlewLimits {
  double gimbal_rate = 2.0;    // rad/s
  double rotor_rate = 1000.0;  // rad/s
};

struct RateCommand {
  std::vector<Vector2> rates;  // (alpha_dot_cmd, theta_dot_cmd) per unit
  SlewLimits limits;
};

/// u = B gamma_dot.
Vector3 internal_momentum(const SpacecraftConfig& cfg, const SpacecraftState& state);

Vector3 control_torque(const Vector3& u, const Vector3& omega, const Vector3& u_dot);
Vector3 control_torque(const SpacecraftConfig& cfg, const SpacecraftState& state,
                       const Vector3& u_dot);

/// du/dt by one-step backward difference; the first call returns zero.
class MomentumRateEstimator {
 public:
  explicit MomentumRateEstimator(double step) : step_(step) {}
  Vector3 update(const Vector3& u);
  void reset() { previous_.reset(); }

 private:
  double step_;
  std::optional<Vector3> previous_;
};

struct AllocatorOptions {
  double damping = 1e-4;          // relative to the largest singular value
  double rank_tolerance = 1e-6;   // relative singular-value floor
  double step = 0.01;             // s, controller update interval
  SlewLimits limits;
};

struct AllocationResult {
  RateCommand command;
  bool rank_deficient = false;
  bool saturated = false;
  double min_singular_value = 0.0;
};

/// Torque the base body sees if the array switches to `rates` now and holds
/// them for one step: u x Omega - (u(t + step) - u(t)) / step, where the
/// gimbal and rotor angles advance by step * rates. Includes the gyroscopic
/// term from the gimbal turning the spinning rotor.
Vector3 one_step_torque(const SpacecraftConfig& cfg, const SpacecraftState& state,
                        std::span<const Vector2> rates, double step);

/// Rate command whose one-step torque matches `tau_desired`. The map from
/// rate adjustments to torque is linearised at the current rates and
/// inverted by damped least squares (minimum norm), then clamped to the
/// slew limits. Degenerate geometry is flagged, never thrown.
AllocationResult allocate_rates(const SpacecraftConfig& cfg, const SpacecraftState& state,
                                const Vector3& tau_desired, const AllocatorOptions& options = {});

/// Proportional-derivative attitude law toward a target attitude, used by
/// the closed-loop runner. Not a steering law from the literature.
struct PdAttitudeLaw {
  double kp = 0.02;   // N m / rad
  double kd = 0.2;    // N m s / rad
  RotationMatrix target;

  Vector3 operator()(const RotationMatrix& attitude, const Vector3& omega) const;
};

}  // namespace adcs
