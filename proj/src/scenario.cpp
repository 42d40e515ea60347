#include "adcs/scenario.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>
#include <sstream>

#include "adcs/errors.hpp"

namespace adcs {

using nlohmann::json;

namespace {

// Walks a JSON document, collecting findings instead of stopping at the first.
class Reader {
 public:
  explicit Reader(std::vector<Finding>& findings) : findings_(findings) {}

  void fail(const std::string& path, const std::string& msg) { findings_.push_back({path, msg}); }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }

  const json* child(const json& obj, std::string_view key, const std::string& path) {
    if (!obj.is_object()) return nullptr;
    const auto it = obj.find(std::string(key));
    if (it == obj.end()) return nullptr;
    if (!it->is_object()) {
      fail(join(path, key), "must be an object");
      return nullptr;
    }
    return &*it;
  }

  double number(const json& obj, std::string_view key, const std::string& path, double fallback) {
    if (!obj.is_object() || !obj.contains(std::string(key))) return fallback;
    const json& v = obj.at(std::string(key));
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      fail(join(path, key), "must be a finite number");
      return fallback;
    }
    return v.get<double>();
  }

  double positive(const json& obj, std::string_view key, const std::string& path, double fallback) {
    const double v = number(obj, key, path, fallback);
    if (!(v > 0.0)) fail(join(path, key), "must be > 0");
    return v;
  }

  double non_negative(const json& obj, std::string_view key, const std::string& path,
                      double fallback) {
    const double v = number(obj, key, path, fallback);
    if (!(v >= 0.0)) fail(join(path, key), "must be >= 0");
    return v;
  }

  bool boolean(const json& obj, std::string_view key, const std::string& path, bool fallback) {
    if (!obj.is_object() || !obj.contains(std::string(key))) return fallback;
    const json& v = obj.at(std::string(key));
    if (!v.is_boolean()) {
      fail(join(path, key), "must be true or false");
      return fallback;
    }
    return v.get<bool>();
  }

  std::vector<double> numbers(const json& v, const std::string& path) {
    std::vector<double> out;
    if (!v.is_array()) {
      fail(path, "must be an array of numbers");
      return out;
    }
    for (const auto& x : v) {
      if (!x.is_number()) {
        fail(path, "must be an array of numbers");
        return {};
      }
      out.push_back(x.get<double>());
    }
    return out;
  }

  /// Accepts a 3-array or a scalar (broadcast) when `allow_scalar`.
  Vector3 vec3(const json& obj, std::string_view key, const std::string& path,
               const Vector3& fallback, bool allow_scalar = false) {
    if (!obj.is_object() || !obj.contains(std::string(key))) return fallback;
    const json& v = obj.at(std::string(key));
    const std::string p = join(path, key);
    if (allow_scalar && v.is_number()) return Vector3::Constant(v.get<double>());
    const auto xs = numbers(v, p);
    if (xs.size() != 3) {
      if (!xs.empty() || v.is_array()) fail(p, "must have 3 components");
      return fallback;
    }
    Vector3 out(xs[0], xs[1], xs[2]);
    if (!out.allFinite()) fail(p, "must be finite");
    return out;
  }

  /// 3x3 nested array, or a 3-array meaning a diagonal matrix.
  Matrix3 matrix3(const json& obj, std::string_view key, const std::string& path,
                  const Matrix3& fallback) {
    if (!obj.is_object() || !obj.contains(std::string(key))) return fallback;
    const json& v = obj.at(std::string(key));
    const std::string p = join(path, key);
    if (v.is_array() && v.size() == 3 && v[0].is_number()) {
      const auto d = numbers(v, p);
      if (d.size() != 3) return fallback;
      return Vector3(d[0], d[1], d[2]).asDiagonal();
    }
    if (!v.is_array() || v.size() != 3) {
      fail(p, "must be a 3x3 nested array or a 3-element diagonal");
      return fallback;
    }
    Matrix3 m;
    for (int r = 0; r < 3; ++r) {
      const auto row = numbers(v[r], p);
      if (row.size() != 3) {
        fail(p, "must be a 3x3 nested array or a 3-element diagonal");
        return fallback;
      }
      for (int c = 0; c < 3; ++c) m(r, c) = row[c];
    }
    return m;
  }

  void require_spd(const Matrix3& m, const std::string& path) {
    if (!m.allFinite()) {
      fail(path, "must be finite");
      return;
    }
    const double scale = std::max(1e-300, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      fail(path, "must be symmetric");
      return;
    }
    if (Eigen::LLT<Matrix3>(m).info() != Eigen::Success) fail(path, "must be positive definite");
  }

  Vector3 unit_vector(const json& obj, std::string_view key, const std::string& path,
                      const Vector3& fallback) {
    const Vector3 v = vec3(obj, key, path, fallback);
    if (!(v.norm() > 1e-12)) {
      fail(join(path, key), "must be a non-zero direction");
      return fallback;
    }
    return v.normalized();
  }

  std::vector<double> per_unit(const json& obj, std::string_view key, const std::string& path,
                               std::size_t count) {
    if (!obj.is_object() || !obj.contains(std::string(key))) return std::vector<double>(count, 0.0);
    const std::string p = join(path, key);
    auto xs = numbers(obj.at(std::string(key)), p);
    if (xs.size() != count) {
      fail(p, "must have one entry per VSCMG unit (" + std::to_string(count) + ")");
      return std::vector<double>(count, 0.0);
    }
    return xs;
  }

 private:
  std::vector<Finding>& findings_;
};

VscmgParams parse_unit_body(Reader& rd, const json& u, const std::string& path,
                            const Vector3& g, const Vector3& eta) {
  const Vector3 jg = rd.vec3(u, "gimbal_inertia_diag_kgm2", path, Vector3(2e-6, 2e-6, 2e-6));
  const Vector3 jr = rd.vec3(u, "rotor_inertia_diag_kgm2", path, Vector3(1e-6, 2e-6, 1e-6));
  if ((jg.array() <= 0.0).any()) rd.fail(Reader::join(path, "gimbal_inertia_diag_kgm2"), "must be positive");
  if ((jr.array() <= 0.0).any()) rd.fail(Reader::join(path, "rotor_inertia_diag_kgm2"), "must be positive");
  const double mg = rd.non_negative(u, "gimbal_mass_kg", path, 0.02);
  const double mr = rd.non_negative(u, "rotor_mass_kg", path, 0.03);
  const double sigma = rd.number(u, "rotor_offset_m", path, 0.0);
  const Vector3 pos = rd.vec3(u, "gimbal_position_m", path, Vector3::Zero());
  VscmgParams p;
  try {
    p = VscmgParams::aligned(g, eta, jg.cwiseMax(1e-300), jr.cwiseMax(1e-300), mg, mr, pos, sigma);
  } catch (const Error&) {
    rd.fail(path, "gimbal_axis and rotor_axis must be orthogonal");
  }
  return p;
}

void parse_spacecraft(Reader& rd, const json& root, Scenario& s) {
  const std::string path = "spacecraft";
  const json* sc = rd.child(root, "spacecraft", "");
  const json empty = json::object();
  const json& obj = sc ? *sc : empty;

  s.spacecraft.base_inertia =
      rd.matrix3(obj, "base_inertia_kgm2", path, Vector3(0.02, 0.025, 0.03).asDiagonal());
  rd.require_spd(s.spacecraft.base_inertia, path + ".base_inertia_kgm2");
  s.spacecraft.units.clear();

  if (obj.contains("units")) {
    const json& units = obj.at("units");
    if (!units.is_array() || units.empty()) {
      rd.fail(path + ".units", "must be a non-empty array");
    } else {
      for (std::size_t i = 0; i < units.size(); ++i) {
        const std::string p = path + ".units[" + std::to_string(i) + "]";
        const json& u = units[i];
        if (!u.is_object()) {
          rd.fail(p, "must be an object");
          continue;
        }
        const Vector3 g = rd.unit_vector(u, "gimbal_axis", p, Vector3::UnitZ());
        const Vector3 eta = rd.unit_vector(u, "rotor_axis", p, Vector3::UnitX());
        if (std::abs(g.dot(eta)) > 1e-9) {
          rd.fail(p + ".rotor_axis", "must be orthogonal to gimbal_axis");
          continue;
        }
        s.spacecraft.units.push_back(parse_unit_body(rd, u, p, g, eta));
      }
    }
    return;
  }

  const std::string ap = path + ".array";
  const json* arr = rd.child(obj, "array", path);
  const json& a = arr ? *arr : empty;
  std::string layout = "pyramid";
  if (a.contains("layout")) {
    if (a.at("layout").is_string()) {
      layout = a.at("layout").get<std::string>();
    } else {
      rd.fail(ap + ".layout", "must be a string");
    }
  }
  const double radius = rd.non_negative(a, "radius_m", ap, 0.03);
  const VscmgParams proto = parse_unit_body(rd, a, ap, Vector3::UnitZ(), Vector3::UnitX());
  if (layout == "pyramid") {
    const double count = rd.number(a, "count", ap, 4.0);
    if (count < 1.0 || count != std::floor(count)) {
      rd.fail(ap + ".count", "must be a positive integer");
      return;
    }
    const double skew = rd.number(a, "skew_angle_rad", ap, std::acos(1.0 / std::sqrt(3.0)));
    s.spacecraft = SpacecraftConfig::pyramid(s.spacecraft.base_inertia, static_cast<int>(count),
                                             skew, radius, proto);
  } else if (layout == "tetrahedron") {
    s.spacecraft = SpacecraftConfig::tetrahedron(s.spacecraft.base_inertia, radius, proto);
  } else {
    rd.fail(ap + ".layout", "must be \"pyramid\" or \"tetrahedron\"");
  }
}

void parse_initial(Reader& rd, const json& root, Scenario& s) {
  const std::string path = "initial_state";
  const json empty = json::object();
  const json* p = rd.child(root, "initial_state", "");
  const json& obj = p ? *p : empty;
  s.initial.attitude_axis_angle = rd.vec3(obj, "attitude_axis_angle_rad", path, Vector3::Zero());
  s.initial.angular_velocity =
      rd.vec3(obj, "angular_velocity_radps", path, Vector3(0.03, -0.02, 0.05));
  const std::size_t n = s.spacecraft.units.size();
  const auto alpha = rd.per_unit(obj, "gimbal_angles_rad", path, n);
  const auto alpha_dot = rd.per_unit(obj, "gimbal_rates_radps", path, n);
  const auto theta = rd.per_unit(obj, "rotor_angles_rad", path, n);
  const auto theta_dot = rd.per_unit(obj, "rotor_rates_radps", path, n);
  s.initial.units.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    s.initial.units[i] = {alpha[i], theta[i], alpha_dot[i], theta_dot[i]};
  }
}

void parse_channel(Reader& rd, const json& sensors, std::string_view name,
                   SensorChannelConfig& c, bool is_gyro) {
  const std::string path = "sensors." + std::string(name);
  const json* p = rd.child(sensors, name, "sensors");
  if (!p) return;
  c.rate_hz = rd.positive(*p, "rate_hz", path, c.rate_hz);
  const std::string noise_key = is_gyro ? "noise_std_radps" : "noise_std";
  const std::string bias_key = is_gyro ? "bias_radps" : "bias";
  c.noise_std = rd.vec3(*p, noise_key, path, c.noise_std, true);
  if ((c.noise_std.array() < 0.0).any()) rd.fail(path + "." + noise_key, "must be >= 0");
  c.bias = rd.vec3(*p, bias_key, path, c.bias, true);
  c.phase_s = rd.non_negative(*p, "phase_s", path, c.phase_s);
}

void parse_sensors(Reader& rd, const json& root, Scenario& s) {
  const json empty = json::object();
  const json* p = rd.child(root, "sensors", "");
  const json& obj = p ? *p : empty;
  auto& c = s.sensors;
  c.up = rd.unit_vector(obj, "up_direction", "sensors", c.up);
  c.field = rd.unit_vector(obj, "field_direction", "sensors", c.field);
  if (c.up.cross(c.field).norm() < 1e-6) {
    rd.fail("sensors.field_direction", "must not be parallel to up_direction");
  }
  parse_channel(rd, obj, "accel", c.accel, false);
  parse_channel(rd, obj, "mag", c.mag, false);
  parse_channel(rd, obj, "gyro", c.gyro, true);
  c.seed = s.seed;
}

void parse_filter(Reader& rd, const json& root, Scenario& s) {
  const std::string path = "filter";
  const json empty = json::object();
  const json* p = rd.child(root, "filter", "");
  const json& obj = p ? *p : empty;
  FilterParams& f = s.filter;
  f.directions = s.sensors.directions();
  f.weights = rd.matrix3(obj, "weights", path, f.weights);
  rd.require_spd(f.weights, path + ".weights");
  f.dissipation = rd.matrix3(obj, "dissipation", path, f.dissipation);
  {
    const Matrix3 sym = 0.5 * (f.dissipation + f.dissipation.transpose());
    if (!f.dissipation.allFinite() || Eigen::LLT<Matrix3>(sym).info() != Eigen::Success) {
      rd.fail(path + ".dissipation", "must be positive definite");
    }
  }
  f.inertia_gain = rd.positive(obj, "inertia_gain", path, f.inertia_gain);
  f.step = rd.positive(obj, "step_s", path, 1.0 / s.sensors.channel(s.sensors.fastest()).rate_hz);
  f.prefilter = rd.boolean(obj, "prefilter", path, f.prefilter);
  f.nr_tol = rd.positive(obj, "nr_tol", path, f.nr_tol);
  const double iters = rd.number(obj, "nr_max_iter", path, f.nr_max_iter);
  if (iters < 1.0 || iters != std::floor(iters)) {
    rd.fail(path + ".nr_max_iter", "must be a positive integer");
  } else {
    f.nr_max_iter = static_cast<int>(iters);
  }
  f.finite_difference_jacobian =
      rd.boolean(obj, "finite_difference_jacobian", path, f.finite_difference_jacobian);

  const json* err = rd.child(obj, "initial_error", path);
  if (err) {
    const std::string ep = path + ".initial_error";
    s.estimate_error.axis_angle = rd.vec3(*err, "axis_angle_rad", ep, s.estimate_error.axis_angle);
    s.estimate_error.omega = rd.vec3(*err, "omega_radps", ep, s.estimate_error.omega);
  }
}

void parse_control(Reader& rd, const json& root, Scenario& s) {
  const std::string path = "control";
  const json* p = rd.child(root, "control", "");
  auto& c = s.control;
  c.allocator.step = s.step;
  if (!p) return;
  c.law.kp = rd.non_negative(*p, "kp_nm_per_rad", path, c.law.kp);
  c.law.kd = rd.non_negative(*p, "kd_nms_per_rad", path, c.law.kd);
  c.law.target = exp_so3(rd.vec3(*p, "target_axis_angle_rad", path, Vector3::Zero()));
  c.allocator.damping = rd.positive(*p, "damping", path, c.allocator.damping);
  c.allocator.limits.gimbal_rate =
      rd.positive(*p, "gimbal_rate_limit_radps", path, c.allocator.limits.gimbal_rate);
  c.allocator.limits.rotor_rate =
      rd.positive(*p, "rotor_rate_limit_radps", path, c.allocator.limits.rotor_rate);
  c.servo_bandwidth = rd.positive(*p, "servo_bandwidth_radps", path, c.servo_bandwidth);
}

void parse_replay(Reader& rd, const json& root, const std::filesystem::path& base, Scenario& s) {
  const std::string path = "replay";
  const json* p = rd.child(root, "replay", "");
  auto resolve = [&](const std::string& key) -> std::filesystem::path {
    if (!p || !p->contains(key)) return {};
    const json& v = p->at(key);
    if (!v.is_string()) {
      rd.fail(path + "." + key, "must be a path string");
      return {};
    }
    std::filesystem::path fp = v.get<std::string>();
    return fp.is_absolute() ? fp : base / fp;
  };
  s.replay.sensor_log = resolve("sensor_log");
  s.replay.truth_log = resolve("truth_log");
  if (p) {
    s.replay.initial_attitude_axis_angle =
        rd.vec3(*p, "initial_attitude_axis_angle_rad", path, Vector3::Zero());
  }
  if (s.mode == Mode::estimate_replay) {
    if (s.replay.sensor_log.empty()) {
      rd.fail(path + ".sensor_log", "is required in estimate-replay mode");
    } else if (!std::filesystem::exists(s.replay.sensor_log)) {
      rd.fail(path + ".sensor_log", "file not found: " + s.replay.sensor_log.string());
    }
    if (!s.replay.truth_log.empty() && !std::filesystem::exists(s.replay.truth_log)) {
      rd.fail(path + ".truth_log", "file not found: " + s.replay.truth_log.string());
    }
  }
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::simulate: return "simulate";
    case Mode::estimate_replay: return "estimate-replay";
    case Mode::closed_loop: return "closed-loop";
  }
  return "unknown";
}

std::string to_string(const Finding& f) {
  return (f.path.empty() ? std::string("<document>") : f.path) + ": " + f.message;
}

SpacecraftState Scenario::initial_state() const {
  SpacecraftState st;
  st.attitude = exp_so3(initial.attitude_axis_angle);
  st.omega = initial.angular_velocity;
  st.units = initial.units;
  st.units.resize(spacecraft.units.size());
  return st;
}

ScenarioParse parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  ScenarioParse out;
  Reader rd(out.findings);
  Scenario& s = out.scenario;
  if (!doc.is_object()) {
    rd.fail("", "scenario must be a JSON object");
    return out;
  }
  if (doc.contains("mode")) {
    const json& m = doc.at("mode");
    const std::string name = m.is_string() ? m.get<std::string>() : "";
    if (name == "simulate") {
      s.mode = Mode::simulate;
    } else if (name == "estimate-replay") {
      s.mode = Mode::estimate_replay;
    } else if (name == "closed-loop") {
      s.mode = Mode::closed_loop;
    } else {
      rd.fail("mode", "must be one of simulate, estimate-replay, closed-loop");
    }
  }
  const double seed = rd.number(doc, "seed", "", 1.0);
  if (seed < 0.0 || seed != std::floor(seed) || seed > 9007199254740992.0) {
    rd.fail("seed", "must be a non-negative integer");
  } else {
    s.seed = static_cast<std::uint64_t>(seed);
  }
  s.duration = rd.positive(doc, "duration_s", "", s.duration);
  s.step = rd.positive(doc, "step_s", "", s.step);

  parse_spacecraft(rd, doc, s);
  parse_initial(rd, doc, s);
  parse_sensors(rd, doc, s);
  parse_filter(rd, doc, s);
  parse_control(rd, doc, s);
  parse_replay(rd, doc, base_dir, s);

  if (const json* o = rd.child(doc, "output", "")) {
    if (o->contains("dir")) {
      if (o->at("dir").is_string()) {
        const std::filesystem::path d = o->at("dir").get<std::string>();
        s.out_dir = d.is_absolute() ? d : base_dir / d;
      } else {
        rd.fail("output.dir", "must be a path string");
      }
    }
  } else {
    s.out_dir = base_dir / "out";
  }

  if (out.findings.empty() && !s.spacecraft.units.empty()) {
    try {
      assemble_inertia(s.spacecraft, s.initial.units);
    } catch (const Error& e) {
      rd.fail("spacecraft", e.what());
    }
  }
  return out;
}

ScenarioParse load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    ScenarioParse out;
    out.findings.push_back({"", "cannot open scenario file " + path.string()});
    return out;
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    ScenarioParse out;
    out.findings.push_back({"", std::string("invalid JSON: ") + e.what()});
    return out;
  }
  return parse_scenario(doc, path.parent_path());
}

std::vector<Finding> validate(const std::filesystem::path& path) {
  return load_scenario(path).findings;
}

json reference_scenario_json() {
  return json::parse(R"({
    "mode": "simulate",
    "seed": 1,
    "duration_s": 30.0,
    "step_s": 0.01,
    "spacecraft": {
      "base_inertia_kgm2": [0.02, 0.025, 0.03],
      "array": {
        "layout": "pyramid",
        "count": 4,
        "skew_angle_rad": 0.9553166181245093,
        "radius_m": 0.03,
        "gimbal_inertia_diag_kgm2": [2e-6, 2e-6, 2e-6],
        "rotor_inertia_diag_kgm2": [1e-6, 2e-6, 1e-6],
        "gimbal_mass_kg": 0.02,
        "rotor_mass_kg": 0.03,
        "rotor_offset_m": 0.0
      }
    },
    "initial_state": {
      "attitude_axis_angle_rad": [0.3, -0.2, 0.1],
      "angular_velocity_radps": [0.03, -0.02, 0.05],
      "rotor_rates_radps": [200, 200, 200, 200]
    },
    "sensors": {
      "up_direction": [0, 0, 1],
      "field_direction": [0.0772, 0.6117, -0.7873],
      "accel": {"rate_hz": 100, "noise_std": 0.0},
      "mag": {"rate_hz": 100, "noise_std": 0.0},
      "gyro": {"rate_hz": 100, "noise_std_radps": 0.0}
    },
    "filter": {
      "inertia_gain": 0.5,
      "dissipation": [12, 13, 14],
      "weights": [[3.19, 1.51, 0], [1.51, 3.19, 0], [0, 0, 2]],
      "prefilter": false,
      "initial_error": {
        "axis_angle_rad": [1.386, 1.364, -1.056],
        "omega_radps": [0.001, 0.002, -0.003]
      }
    }
  })");
}

void set_dotted(json& doc, std::string_view dotted_path, double value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key(dotted_path.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (key.empty()) throw InvalidParameter("empty key in path '" + std::string(dotted_path) + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string_view::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace adcs
