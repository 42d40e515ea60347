#include "adcs/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "adcs/control.hpp"
#include "adcs/errors.hpp"

#ifndef ADCS_GIT_DESCRIBE
#define ADCS_GIT_DESCRIBE "unknown"
#endif

namespace adcs {

namespace {

std::string num(double v) { return format_number(v); }

void schema_line(std::ostream& out, std::string_view name) {
  out << "# schema=adcs." << name << "/1 version=" << build_version() << '\n';
}

std::size_t step_count(const Scenario& s) {
  return static_cast<std::size_t>(std::llround(s.duration / s.step));
}

TruthRecord make_record(const Scenario& s, const SpacecraftState& st) {
  return {{st.t, st.attitude, st.omega}, inertial_momentum(s.spacecraft, st), st.units};
}

std::vector<AttitudeSample> samples_of(const std::vector<TruthRecord>& truth) {
  std::vector<AttitudeSample> out;
  out.reserve(truth.size());
  for (const auto& r : truth) out.push_back(r.sample);
  return out;
}

ResampleOptions resample_options(const Scenario& s) {
  return {.clock = std::nullopt, .uniform_step = s.filter.step};
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

}  // namespace

std::string_view build_version() { return ADCS_GIT_DESCRIBE; }

std::vector<TruthRecord> simulate_truth(const Scenario& s) {
  SpacecraftState st = s.initial_state();
  const std::size_t n = step_count(s);
  std::vector<TruthRecord> out;
  out.reserve(n + 1);
  out.push_back(make_record(s, st));
  for (std::size_t k = 1; k <= n; ++k) {
    st = propagate(s.spacecraft, st, {}, {}, s.step);
    st.t = static_cast<double>(k) * s.step;
    out.push_back(make_record(s, st));
  }
  return out;
}

FilterState initial_filter_state(const Scenario& s, const RotationMatrix& truth_attitude) {
  FilterState f;
  f.attitude = exp_so3(s.estimate_error.axis_angle).transpose() * truth_attitude;
  f.omega = s.estimate_error.omega;
  return f;
}

TruthLookup make_truth_lookup(std::vector<AttitudeSample> truth) {
  if (truth.empty()) return {};
  auto data = std::make_shared<const std::vector<AttitudeSample>>(std::move(truth));
  return [data](double t) -> std::optional<AttitudeSample> {
    const auto& v = *data;
    constexpr double tol = 1e-9;
    if (t < v.front().t - tol || t > v.back().t + tol) return std::nullopt;
    auto it = std::lower_bound(v.begin(), v.end(), t,
                               [](const AttitudeSample& a, double x) { return a.t < x; });
    if (it == v.end()) return v.back();
    if (it == v.begin()) return v.front();
    return interpolate(*(it - 1), *it, t);
  };
}

RunResult run_simulate(const Scenario& s) {
  RunResult r;
  r.truth = simulate_truth(s);
  auto samples = samples_of(r.truth);
  r.sensors = synthesize(samples, s.sensors);
  const auto frames = resample_hold(r.sensors, resample_options(s));
  const FilterState start = initial_filter_state(s, samples.front().attitude);
  r.estimates = run_filter(frames, s.filter, start, make_truth_lookup(std::move(samples)));
  return r;
}

RunResult run_estimate_replay(const Scenario& s) {
  RunResult r;
  IngestResult log = ingest_log(s.replay.sensor_log);
  for (const auto& issue : log.issues) r.warnings.push_back(to_string(issue));
  if (log.samples.empty()) throw Error("sensor log " + s.replay.sensor_log.string() + " has no usable rows");

  std::vector<AttitudeSample> truth;
  if (!s.replay.truth_log.empty()) truth = read_truth(s.replay.truth_log);
  const RotationMatrix start =
      truth.empty() ? exp_so3(s.replay.initial_attitude_axis_angle) : truth.front().attitude;

  const auto frames = resample_hold(std::move(log.samples), resample_options(s));
  const FilterState initial = initial_filter_state(s, start);
  r.estimates = run_filter(frames, s.filter, initial, make_truth_lookup(std::move(truth)));
  return r;
}

RunResult run_closed_loop(const Scenario& s) {
  RunResult r;
  const SpacecraftConfig& cfg = s.spacecraft;
  SpacecraftState st = s.initial_state();
  const std::size_t n = step_count(s);

  SensorSynthesizer synth(s.sensors);
  HoldResampler resampler(s.sensors.fastest(), s.filter.step);
  FilterRunner filter(s.filter, initial_filter_state(s, st.attitude),
                      [&r](double t) -> std::optional<AttitudeSample> {
                        // Frames never run ahead of the truth already produced.
                        for (auto it = r.truth.rbegin(); it != r.truth.rend(); ++it) {
                          if (it->sample.t <= t + 1e-9) {
                            if (std::abs(it->sample.t - t) <= 1e-9 || it == r.truth.rbegin()) {
                              return it->sample;
                            }
                            return interpolate(it->sample, (it - 1)->sample, t);
                          }
                        }
                        return std::nullopt;
                      });
  FilterState estimate = filter.state();
  bool have_estimate = false;

  auto feed = [&](const std::vector<RawSample>& samples) {
    for (const auto& smp : samples) {
      r.sensors.push_back(smp);
      for (const auto& frame : resampler.push(smp)) {
        r.estimates.push_back(filter.push(frame));
        estimate = filter.state();
        have_estimate = true;
      }
    }
  };

  AllocatorOptions alloc = s.control.allocator;
  alloc.step = s.step;
  r.truth.push_back(make_record(s, st));
  feed(synth.advance(r.truth.back().sample, r.truth.back().sample));

  for (std::size_t k = 1; k <= n; ++k) {
    Vector3 desired = Vector3::Zero();
    if (have_estimate) desired = s.control.law(estimate.attitude, estimate.omega_hat);
    const AllocationResult a = allocate_rates(cfg, st, desired, alloc);

    const AssembledInertia inertia = assemble_inertia(cfg, st.units);
    std::vector<Vector2> tau(cfg.units.size());
    for (std::size_t i = 0; i < cfg.units.size(); ++i) {
      tau[i] = s.control.servo_bandwidth * inertia.units[i].gimbal_rotor *
               (a.command.rates[i] - st.units[i].rates());
    }

    const Vector3 u0 = internal_momentum(cfg, st);
    SpacecraftState next = propagate(cfg, st, tau, {}, s.step);
    next.t = static_cast<double>(k) * s.step;
    const Vector3 u1 = internal_momentum(cfg, next);

    r.control.push_back({.t = st.t,
                         .torque_desired = desired,
                         .torque_delivered = control_torque(u0, st.omega, (u1 - u0) / s.step),
                         .rank_deficient = a.rank_deficient,
                         .saturated = a.saturated,
                         .min_singular_value = a.min_singular_value});

    const AttitudeSample from = r.truth.back().sample;
    st = std::move(next);
    r.truth.push_back(make_record(s, st));
    feed(synth.advance(from, r.truth.back().sample));
  }
  for (const auto& frame : resampler.flush()) r.estimates.push_back(filter.push(frame));
  return r;
}

RunResult run(const Scenario& s) {
  switch (s.mode) {
    case Mode::simulate: return run_simulate(s);
    case Mode::estimate_replay: return run_estimate_replay(s);
    case Mode::closed_loop: return run_closed_loop(s);
  }
  throw Error("unknown mode");
}

void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth) {
  schema_line(out, "truth");
  out << "t,r11,r12,r13,r21,r22,r23,r31,r32,r33,wx,wy,wz,hx,hy,hz";
  const std::size_t units = truth.empty() ? 0 : truth.front().units.size();
  for (std::size_t i = 1; i <= units; ++i) {
    out << ",alpha" << i << ",theta" << i << ",alpha_dot" << i << ",theta_dot" << i;
  }
  out << '\n';
  for (const auto& rec : truth) {
    const Matrix3& m = rec.sample.attitude.matrix();
    out << num(rec.sample.t);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out << ',' << num(m(i, j));
    }
    for (int i = 0; i < 3; ++i) out << ',' << num(rec.sample.omega(i));
    for (int i = 0; i < 3; ++i) out << ',' << num(rec.inertial_momentum(i));
    for (const auto& u : rec.units) {
      out << ',' << num(u.alpha) << ',' << num(u.theta) << ',' << num(u.alpha_dot) << ','
          << num(u.theta_dot);
    }
    out << '\n';
  }
}

void write_estimates(std::ostream& out, const std::vector<FilterRecord>& records) {
  schema_line(out, "estimate");
  out << "t,r11,r12,r13,r21,r22,r23,r31,r32,r33,wx,wy,wz\n";
  for (const auto& rec : records) {
    const Matrix3& m = rec.state.attitude.matrix();
    out << num(rec.state.t);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out << ',' << num(m(i, j));
    }
    for (int i = 0; i < 3; ++i) out << ',' << num(rec.state.omega_hat(i));
    out << '\n';
  }
}

void write_errors(std::ostream& out, const std::vector<FilterRecord>& records) {
  schema_line(out, "errors");
  out << "t,angle_rad,werr_x,werr_y,werr_z,wahba_cost,nr_iterations\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& rec : records) {
    const Vector3 w = rec.angular_velocity_error.value_or(Vector3::Constant(nan));
    out << num(rec.state.t) << ',' << num(rec.attitude_error.value_or(nan)) << ',' << num(w.x())
        << ',' << num(w.y()) << ',' << num(w.z()) << ',' << num(rec.diagnostics.wahba_cost) << ','
        << rec.diagnostics.nr_iterations << '\n';
  }
}

void write_control(std::ostream& out, const std::vector<ControlRecord>& control) {
  schema_line(out, "control");
  out << "t,tau_des_x,tau_des_y,tau_des_z,tau_x,tau_y,tau_z,rank_deficient,saturated,min_singular_value\n";
  for (const auto& c : control) {
    out << num(c.t);
    for (int i = 0; i < 3; ++i) out << ',' << num(c.torque_desired(i));
    for (int i = 0; i < 3; ++i) out << ',' << num(c.torque_delivered(i));
    out << ',' << int(c.rank_deficient) << ',' << int(c.saturated) << ','
        << num(c.min_singular_value) << '\n';
  }
}

std::vector<AttitudeSample> read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open truth log " + path.string());
  std::vector<AttitudeSample> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line.rfind("t,r11,r12,r13,r21,r22,r23,r31,r32,r33,wx,wy,wz", 0) != 0) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": not a truth log header");
      }
      header = true;
      continue;
    }
    const auto fields = split_commas(line);
    if (fields.size() < 13) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected at least 13 fields");
    }
    double v[13];
    for (int k = 0; k < 13; ++k) {
      const auto x = parse_number(fields[k]);
      if (!x) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": field " +
                    std::to_string(k + 1) + " is not a number");
      }
      v[k] = *x;
    }
    Matrix3 m;
    m << v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9];
    try {
      out.push_back({v[0], RotationMatrix(m), Vector3(v[10], v[11], v[12])});
    } catch (const InvalidRotation& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (out.size() > 1 && !(out.back().t > out[out.size() - 2].t)) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": time does not increase");
    }
  }
  return out;
}

std::vector<std::filesystem::path> write_outputs(const Scenario& s, const RunResult& r,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::string& name) {
    const auto p = dir / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    written.push_back(p);
    return f;
  };
  if (s.mode != Mode::estimate_replay) {
    auto f = open("truth.csv");
    write_truth(f, r.truth);
    auto g = open("sensors.csv");
    std::ostringstream comment;
    comment << "schema=adcs.sensors/1 version=" << build_version() << " seed=" << s.seed;
    write_log(g, r.sensors, comment.str());
  }
  {
    auto f = open("estimate.csv");
    write_estimates(f, r.estimates);
  }
  {
    auto f = open("errors.csv");
    write_errors(f, r.estimates);
  }
  if (s.mode == Mode::closed_loop) {
    auto f = open("control.csv");
    write_control(f, r.control);
  }
  return written;
}

SweepSpec parse_sweep(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw InvalidParameter("sweep must look like param=a:b:n or param=a,b,c");
  }
  SweepSpec spec;
  spec.param = std::string(text.substr(0, eq));
  const std::string_view range = text.substr(eq + 1);
  auto need = [&](std::string_view s) {
    const auto v = parse_number(s);
    if (!v || !std::isfinite(*v)) {
      throw InvalidParameter("sweep value '" + std::string(s) + "' is not a number");
    }
    return *v;
  };
  if (range.find(':') != std::string_view::npos) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
      const auto pos = range.find(':', start);
      parts.push_back(range.substr(start, pos == std::string_view::npos ? pos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    if (parts.size() != 3) throw InvalidParameter("sweep range must be a:b:n");
    const double a = need(parts[0]);
    const double b = need(parts[1]);
    const double n = need(parts[2]);
    if (n < 1 || n != std::floor(n)) throw InvalidParameter("sweep count n must be a positive integer");
    const auto count = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i < count; ++i) {
      spec.values.push_back(count == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
  } else {
    for (auto part : split_commas(range)) spec.values.push_back(need(part));
  }
  if (spec.values.empty()) throw InvalidParameter("sweep has no values");
  return spec;
}

}  // namespace adcs
