#pragma once

// Second-order discrete-time variational attitude and angular-velocity
// filter driven by two inertially fixed direction measurements plus a rate
// gyro. The artificial potential is the weighted Wahba cost
//
//   U0(R, Um) = 1/2 <E - R Um, (E - R Um) W>,
//
// and the filter state is (R_hat, omega) with Omega_hat = Omega_m - omega.

#include <functional>
#include <optional>
#include <vector>

#include "adcs/so3.hpp"

namespace adcs {

/// [a b normalize(a x b)]. Used for both the inertial triad E and the
/// measured triad Um so that noise-free measurements give Um = R^T E exactly.
Matrix3 direction_triad(const Vector3& first, const Vector3& second);

/// Default inertial directions in ENU: e1 = up (what an accelerometer at rest
/// reads), e2 = local geomagnetic field direction.
Vector3 default_up_direction();
Vector3 default_field_direction();

/// Shaping function Phi applied to the Wahba cost, with its derivative.
struct Potential {
  std::function<double(double)> value;
  std::function<double(double)> derivative;

  static Potential identity();
  double slope(double cost) const { return derivative ? derivative(cost) : 1.0; }
};

struct FilterParams {
  Matrix3 directions = direction_triad(default_up_direction(), default_field_direction());  // E
  Matrix3 weights;              // W
  double inertia_gain = 0.5;    // m
  Matrix3 dissipation;          // D
  double step = 0.01;           // h, s
  Potential shaping = Potential::identity();
  double nr_tol = 1e-12;
  int nr_max_iter = 25;
  bool finite_difference_jacobian = false;
  bool prefilter = true;

  FilterParams();

  /// Throws InvalidParameter listing the first violated constraint.
  void validate() const;
};

struct FilterState {
  RotationMatrix attitude;                  // R_hat
  Vector3 omega = Vector3::Zero();          // velocity-error variable
  Vector3 omega_hat = Vector3::Zero();      // estimated angular velocity
  double t = 0.0;
};

struct MeasurementFrame {
  double t = 0.0;
  Vector3 accel = Vector3::UnitZ();  // u1m
  Vector3 mag = Vector3::UnitX();    // u2m
  Vector3 gyro = Vector3::Zero();    // Omega_m, rad/s
  bool accel_fresh = true;
  bool mag_fresh = true;
  bool gyro_fresh = true;
};

/// v / ||v||, passing vectors that are already unit (|v.v - 1| <= 1e-14)
/// through unchanged so that normalising twice is bit-identical to once.
Vector3 normalize_direction(const Vector3& v);

/// Minimum angle between the two measured directions, rad.
inline constexpr double kMinDirectionSeparation = 1e-3;

/// Um = [u1 u2 normalize(u1 x u2)] from normalised measurements. Throws
/// DegenerateDirections when the directions are within
/// kMinDirectionSeparation of parallel or antiparallel.
Matrix3 build_Um(const MeasurementFrame& frame);

double wahba_cost(const RotationMatrix& attitude, const Matrix3& um, const FilterParams& params);

/// vex(L^T R - R^T L). With L = E W Um^T this is the gradient of the Wahba
/// cost in the sense d/de U0(R exp(e v)) = s_l(R, L) . v.
Vector3 s_l(const RotationMatrix& attitude, const Matrix3& l);

Matrix3 filter_gain_matrix(const Matrix3& um, const FilterParams& params);

/// First-order Butterworth pre-filter:
/// (2 + h) xbar_{k+1} = (2 - h) xbar_k + h (xm_k + xm_{k+1}).
/// Evaluated in increment form so that a constant input is a fixed point
/// bit for bit.
template <class T>
T prefilter_step(const T& xbar_k, const T& xm_k, const T& xm_k1, double h) {
  return xbar_k + (h / (2.0 + h)) * ((xm_k - xbar_k) + (xm_k1 - xbar_k));
}

/// Applies prefilter_step to every channel of a frame stream.
class ButterworthPrefilter {
 public:
  explicit ButterworthPrefilter(double step) : step_(step) {}
  MeasurementFrame push(const MeasurementFrame& raw);

 private:
  double step_;
  std::optional<MeasurementFrame> last_raw_;
  std::optional<MeasurementFrame> last_filtered_;
};

struct StepDiagnostics {
  int nr_iterations = 0;
  double nr_residual = 0.0;
  double wahba_cost = 0.0;  // at the new state
  bool gap = false;         // frame rejected, state held
};

/// Advances the filter from frame_i to frame_i1. The implicit omega_{i+1}
/// equation is solved by Newton-Raphson starting from omega_{i+1/2}; throws
/// NewtonNoConvergence if the residual stays above nr_tol.
FilterState filter_step(const FilterState& state, const MeasurementFrame& frame_i,
                        const MeasurementFrame& frame_i1, const FilterParams& params,
                        StepDiagnostics* diagnostics = nullptr);

namespace detail {

/// Step kernel on prebuilt triads with a signed step. A step of -h from the
/// output of a +h step returns to the starting state.
FilterState variational_step(const FilterState& state, const Matrix3& um_i, const Vector3& gyro_i,
                             const Matrix3& um_i1, const Vector3& gyro_i1,
                             const FilterParams& params, double h, StepDiagnostics* diagnostics);

/// Solves m w = exp(-(h/2) hat(gyro - w)) c for w by Newton-Raphson.
Vector3 solve_implicit_rate(const Vector3& c, const Vector3& gyro, const FilterParams& params,
                            double h, const Vector3& guess, StepDiagnostics* diagnostics);

}  // namespace detail

/// Reference attitude and angular velocity at time t.
struct AttitudeSample {
  double t = 0.0;
  RotationMatrix attitude;
  Vector3 omega = Vector3::Zero();
};

using TruthLookup = std::function<std::optional<AttitudeSample>(double t)>;

struct FilterRecord {
  FilterState state;
  StepDiagnostics diagnostics;
  std::optional<double> attitude_error;        // principal angle of R R_hat^T, rad
  std::optional<Vector3> angular_velocity_error;  // Omega - Omega_hat, rad/s
};

/// Incremental form of run_filter: pre-filter (if enabled) then one filter
/// step per pushed frame. The first frame only initialises.
class FilterRunner {
 public:
  FilterRunner(FilterParams params, FilterState initial, TruthLookup truth = {});

  FilterRecord push(const MeasurementFrame& raw);
  const FilterState& state() const { return state_; }

 private:
  FilterRecord record(const StepDiagnostics& diag) const;

  FilterParams params_;
  FilterState state_;
  TruthLookup truth_;
  ButterworthPrefilter prefilter_;
  std::optional<MeasurementFrame> previous_;
  std::optional<Matrix3> previous_um_;
};

/// Runs the filter over a frame stream. Errors raised by a step are rethrown
/// with the frame timestamp in the message.
std::vector<FilterRecord> run_filter(const std::vector<MeasurementFrame>& frames,
                                     const FilterParams& params, const FilterState& initial,
                                     const TruthLookup& truth = {});

}  // namespace adcs
