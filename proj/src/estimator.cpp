#include "adcs/estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <numbers>
#include <sstream>

#include "adcs/errors.hpp"

namespace adcs {

namespace {

bool symmetric_positive_definite(const Matrix3& m) {
  const double scale = std::max(1e-300, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  return Eigen::LLT<Matrix3>(m).info() == Eigen::Success;
}

}  // namespace

Matrix3 direction_triad(const Vector3& first, const Vector3& second) {
  Matrix3 m;
  m.col(0) = first;
  m.col(1) = second;
  m.col(2) = first.cross(second).normalized();
  return m;
}

Vector3 default_up_direction() { return Vector3::UnitZ(); }

Vector3 default_field_direction() { return Vector3(0.0772, 0.6117, -0.7873).normalized(); }

Potential Potential::identity() {
  return {[](double x) { return x; }, [](double) { return 1.0; }};
}

FilterParams::FilterParams() {
  weights << 3.19, 1.51, 0.0,
             1.51, 3.19, 0.0,
             0.0, 0.0, 2.0;
  dissipation = Vector3(12.0, 13.0, 14.0).asDiagonal();
}

void FilterParams::validate() const {
  if (!symmetric_positive_definite(weights)) {
    throw InvalidParameter("weights W must be symmetric positive definite");
  }
  const Matrix3 dsym = 0.5 * (dissipation + dissipation.transpose());
  if (!dissipation.allFinite() || Eigen::LLT<Matrix3>(dsym).info() != Eigen::Success) {
    throw InvalidParameter("dissipation D must be positive definite");
  }
  if (!(inertia_gain > 0.0) || !std::isfinite(inertia_gain)) {
    throw InvalidParameter("inertia gain m must be positive");
  }
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidParameter("step h must be positive");
  if (!(nr_tol > 0.0)) throw InvalidParameter("nr_tol must be positive");
  if (nr_max_iter < 1) throw InvalidParameter("nr_max_iter must be at least 1");
  if (!directions.allFinite()) throw InvalidParameter("direction matrix E has non-finite entries");
  const Vector3 cross = directions.col(0).cross(directions.col(1));
  if (cross.norm() < 1e-9) throw InvalidParameter("first two columns of E are parallel");
  if ((directions.col(2) - cross.normalized()).norm() > 1e-12) {
    throw InvalidParameter("third column of E must be the normalised cross product of the first two");
  }
}

Vector3 normalize_direction(const Vector3& v) {
  const double n2 = v.squaredNorm();
  if (std::abs(n2 - 1.0) <= 1e-14) return v;
  return v / std::sqrt(n2);
}

Matrix3 build_Um(const MeasurementFrame& frame) {
  const Vector3 u1 = normalize_direction(frame.accel);
  const Vector3 u2 = normalize_direction(frame.mag);
  if (!u1.allFinite() || !u2.allFinite()) {
    throw DegenerateDirections("measured direction is zero or non-finite");
  }
  const Vector3 cross = u1.cross(u2);
  const double separation = std::atan2(cross.norm(), u1.dot(u2));
  if (separation < kMinDirectionSeparation || separation > std::numbers::pi - kMinDirectionSeparation) {
    std::ostringstream os;
    os << "measured directions are " << separation << " rad apart at t=" << frame.t;
    throw DegenerateDirections(os.str());
  }
  Matrix3 um;
  um.col(0) = u1;
  um.col(1) = u2;
  um.col(2) = cross.normalized();
  return um;
}

double wahba_cost(const RotationMatrix& attitude, const Matrix3& um, const FilterParams& params) {
  const Matrix3 residual = params.directions - attitude.matrix() * um;
  return 0.5 * (residual.transpose() * residual * params.weights).trace();
}

Vector3 s_l(const RotationMatrix& attitude, const Matrix3& l) {
  const Matrix3& r = attitude.matrix();
  return vex(l.transpose() * r - r.transpose() * l);
}

Matrix3 filter_gain_matrix(const Matrix3& um, const FilterParams& params) {
  return params.directions * params.weights * um.transpose();
}

MeasurementFrame ButterworthPrefilter::push(const MeasurementFrame& raw) {
  MeasurementFrame out = raw;
  if (last_raw_) {
    out.accel = prefilter_step(last_filtered_->accel, last_raw_->accel, raw.accel, step_);
    out.mag = prefilter_step(last_filtered_->mag, last_raw_->mag, raw.mag, step_);
    out.gyro = prefilter_step(last_filtered_->gyro, last_raw_->gyro, raw.gyro, step_);
  }
  last_raw_ = raw;
  last_filtered_ = out;
  return out;
}

namespace detail {

Vector3 solve_implicit_rate(const Vector3& c, const Vector3& gyro, const FilterParams& params,
                            double h, const Vector3& guess, StepDiagnostics* diagnostics) {
  const double m = params.inertia_gain;
  const double half = 0.5 * h;
  const double tol = params.nr_tol * std::max(1.0, c.norm());

  auto residual = [&](const Vector3& w) -> Vector3 {
    return m * w - exp_so3(half * (w - gyro)) * c;
  };
  auto jacobian = [&](const Vector3& w) -> Matrix3 {
    if (params.finite_difference_jacobian) {
      Matrix3 j;
      const double eps = 1e-7;
      for (int k = 0; k < 3; ++k) {
        const Vector3 d = eps * Vector3::Unit(k);
        j.col(k) = (residual(w + d) - residual(w - d)) / (2.0 * eps);
      }
      return j;
    }
    // d/da exp(hat(a)) c = -exp(hat(a)) hat(c) J_r(a), with a = (h/2)(w - gyro).
    const Vector3 a = half * (w - gyro);
    return m * Matrix3::Identity() + half * exp_so3(a).matrix() * hat(c) * right_jacobian(a);
  };

  Vector3 w = guess;
  Vector3 f = residual(w);
  std::vector<double> trace{f.norm()};
  int iterations = 0;
  while (f.norm() >= tol) {
    if (iterations == params.nr_max_iter || !f.allFinite()) {
      std::ostringstream os;
      os << "Newton-Raphson did not converge in " << iterations << " iterations (residual "
         << f.norm() << ")";
      throw NewtonNoConvergence(os.str(), trace);
    }
    w -= jacobian(w).partialPivLu().solve(f);
    f = residual(w);
    trace.push_back(f.norm());
    ++iterations;
  }
  if (diagnostics) {
    diagnostics->nr_iterations = iterations;
    diagnostics->nr_residual = f.norm();
  }
  return w;
}

FilterState variational_step(const FilterState& state, const Matrix3& um_i, const Vector3& gyro_i,
                             const Matrix3& um_i1, const Vector3& gyro_i1,
                             const FilterParams& params, double h, StepDiagnostics* diagnostics) {
  const double m = params.inertia_gain;
  const double half = 0.5 * h;
  const Matrix3 eye = Matrix3::Identity();
  const Matrix3& d = params.dissipation;

  // Half-step angular velocity.
  const Vector3 omega_hat_i = gyro_i - state.omega;
  const double slope_i = params.shaping.slope(wahba_cost(state.attitude, um_i, params));
  const Vector3 force_i = slope_i * s_l(state.attitude, filter_gain_matrix(um_i, params));
  const Vector3 omega_half = (m * eye + half * d)
                                 .partialPivLu()
                                 .solve(exp_so3(-half * omega_hat_i) * (m * state.omega) + half * force_i);

  // Attitude update with the midpoint gyro reading.
  const Vector3 gyro_half = 0.5 * (gyro_i + gyro_i1);
  FilterState next;
  next.t = state.t + h;
  next.attitude = state.attitude * exp_so3(h * (gyro_half - omega_half));

  // Implicit end-of-step velocity.
  const double cost_i1 = wahba_cost(next.attitude, um_i1, params);
  const Vector3 force_i1 =
      params.shaping.slope(cost_i1) * s_l(next.attitude, filter_gain_matrix(um_i1, params));
  const Vector3 c = (m * eye - half * d) * omega_half + half * force_i1;
  next.omega = solve_implicit_rate(c, gyro_i1, params, h, omega_half, diagnostics);
  next.omega_hat = gyro_i1 - next.omega;
  if (diagnostics) {
    diagnostics->wahba_cost = cost_i1;
    diagnostics->gap = false;
  }
  return next;
}

}  // namespace detail

FilterState filter_step(const FilterState& state, const MeasurementFrame& frame_i,
                        const MeasurementFrame& frame_i1, const FilterParams& params,
                        StepDiagnostics* diagnostics) {
  const double dt = frame_i1.t - frame_i.t;
  if (std::abs(dt - params.step) > 1e-6 * params.step) {
    std::ostringstream os;
    os << "frames at t=" << frame_i.t << " and t=" << frame_i1.t << " are not one step ("
       << params.step << " s) apart";
    throw InvalidParameter(os.str());
  }
  FilterState next = detail::variational_step(state, build_Um(frame_i), frame_i.gyro,
                                              build_Um(frame_i1), frame_i1.gyro, params,
                                              params.step, diagnostics);
  next.t = frame_i1.t;
  return next;
}

FilterRunner::FilterRunner(FilterParams params, FilterState initial, TruthLookup truth)
    : params_(std::move(params)),
      state_(std::move(initial)),
      truth_(std::move(truth)),
      prefilter_(params_.step) {
  params_.validate();
}

FilterRecord FilterRunner::record(const StepDiagnostics& diag) const {
  FilterRecord r{.state = state_, .diagnostics = diag, .attitude_error = {}, .angular_velocity_error = {}};
  if (truth_) {
    if (const auto ref = truth_(state_.t)) {
      r.attitude_error = principal_angle(ref->attitude * state_.attitude.transpose());
      r.angular_velocity_error = ref->omega - state_.omega_hat;
    }
  }
  return r;
}

FilterRecord FilterRunner::push(const MeasurementFrame& raw) {
  const MeasurementFrame frame = params_.prefilter ? prefilter_.push(raw) : raw;
  std::optional<Matrix3> um;
  try {
    um = build_Um(frame);
  } catch (const DegenerateDirections&) {
  }

  StepDiagnostics diag;
  const bool first = !previous_;
  if (first) {
    state_.t = frame.t;
    state_.omega_hat = frame.gyro - state_.omega;
    diag.gap = !um;
    if (um) diag.wahba_cost = wahba_cost(state_.attitude, *um, params_);
  } else if (!um || !previous_um_) {
    // Hold the state across a frame whose directions cannot form a triad.
    state_.t = frame.t;
    state_.omega_hat = frame.gyro - state_.omega;
    diag.gap = true;
  } else {
    const double dt = frame.t - previous_->t;
    if (std::abs(dt - params_.step) > 1e-6 * params_.step) {
      std::ostringstream os;
      os << "frame at t=" << frame.t << " is " << dt << " s after its predecessor, expected "
         << params_.step;
      throw InvalidParameter(os.str());
    }
    try {
      state_ = detail::variational_step(state_, *previous_um_, previous_->gyro, *um, frame.gyro,
                                        params_, params_.step, &diag);
    } catch (const NewtonNoConvergence& e) {
      std::ostringstream os;
      os << "t=" << frame.t << ": " << e.what();
      throw NewtonNoConvergence(os.str(), e.trace);
    }
    state_.t = frame.t;
  }
  previous_ = frame;
  previous_um_ = um;
  return record(diag);
}

std::vector<FilterRecord> run_filter(const std::vector<MeasurementFrame>& frames,
                                     const FilterParams& params, const FilterState& initial,
                                     const TruthLookup& truth) {
  std::vector<FilterRecord> out;
  if (frames.empty()) return out;
  FilterRunner runner(params, initial, truth);
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(runner.push(f));
  return out;
}

}  // namespace adcs
