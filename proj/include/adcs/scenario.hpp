#pragma once

// Scenario files: JSON documents whose keys carry their units
// (e.g. "step_s", "noise_std_radps"). See scenarios/ for examples.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adcs/control.hpp"
#include "adcs/dynamics.hpp"
#include "adcs/estimator.hpp"
#include "adcs/sensors.hpp"

namespace adcs {

enum class Mode { simulate, estimate_replay, closed_loop };

std::string_view to_string(Mode mode);

struct InitialTruth {
  Vector3 attitude_axis_angle = Vector3::Zero();  // rad
  Vector3 angular_velocity = Vector3::Zero();     // rad/s
  std::vector<GimbalRotorState> units;
};

/// Initial estimation error: R_hat(0) = exp(axis_angle)^T R(0) so that
/// R R_hat^T = exp(axis_angle); omega(0) = omega.
struct EstimateError {
  Vector3 axis_angle = 2.2 * Vector3(0.63, 0.62, -0.48);
  Vector3 omega = Vector3(0.001, 0.002, -0.003);
};

struct ControlSettings {
  PdAttitudeLaw law;
  AllocatorOptions allocator;
  double servo_bandwidth = 20.0;  // rad/s
};

struct ReplaySettings {
  std::filesystem::path sensor_log;
  std::filesystem::path truth_log;                // optional
  Vector3 initial_attitude_axis_angle = Vector3::Zero();  // used when no truth log is given
};

struct Scenario {
  Mode mode = Mode::simulate;
  std::uint64_t seed = 1;
  double duration = 30.0;  // s
  double step = 0.01;      // s, truth propagation step
  SpacecraftConfig spacecraft;
  InitialTruth initial;
  SensorSuiteConfig sensors;
  FilterParams filter;
  EstimateError estimate_error;
  ControlSettings control;
  ReplaySettings replay;
  std::filesystem::path out_dir = "out";

  /// Initial truth state as a SpacecraftState.
  SpacecraftState initial_state() const;
};

/// One validation problem, addressed by a dotted field path.
struct Finding {
  std::string path;
  std::string message;
};

std::string to_string(const Finding& f);

struct ScenarioParse {
  Scenario scenario;
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
};

/// Parses and validates a scenario document. Relative paths are resolved
/// against `base_dir`. Every problem found is reported, not only the first.
ScenarioParse parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Reads a scenario file; JSON syntax errors become a finding at path "".
ScenarioParse load_scenario(const std::filesystem::path& path);

/// Lists everything wrong with a scenario file without running it.
std::vector<Finding> validate(const std::filesystem::path& path);

/// Reference experiment: default filter gains, tumbling
/// four-unit pyramid, noise-free sensors at 100 Hz.
nlohmann::json reference_scenario_json();

/// Sets a numeric value at a dotted path ("filter.inertia_gain",
/// "sensors.gyro.noise_std_radps"), creating objects as needed.
void set_dotted(nlohmann::json& doc, std::string_view dotted_path, double value);

}  // namespace adcs
