#pragma once

// Experiment runs and their CSV outputs.
//
// Every output file starts with "# schema=adcs.<name>/<rev> version=<git describe>"
// followed by a column header row.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "adcs/scenario.hpp"

namespace adcs {

std::string_view build_version();

/// One truth sample plus the state that produced it.
struct TruthRecord {
  AttitudeSample sample;
  Vector3 inertial_momentum = Vector3::Zero();
  std::vector<GimbalRotorState> units;
};

struct ControlRecord {
  double t = 0.0;
  Vector3 torque_desired = Vector3::Zero();
  Vector3 torque_delivered = Vector3::Zero();  // u x Omega - du/dt over the step
  bool rank_deficient = false;
  bool saturated = false;
  double min_singular_value = 0.0;
};

struct RunResult {
  std::vector<TruthRecord> truth;
  std::vector<RawSample> sensors;
  std::vector<FilterRecord> estimates;
  std::vector<ControlRecord> control;
  std::vector<std::string> warnings;
};

/// Torque-free truth at t_k = k * step for k = 0..round(duration/step).
std::vector<TruthRecord> simulate_truth(const Scenario& s);

/// R_hat(0) = exp(err)^T R(0), omega(0) from the scenario.
FilterState initial_filter_state(const Scenario& s, const RotationMatrix& truth_attitude);

/// Geodesic lookup into a time-ordered truth series; empty outside its span.
TruthLookup make_truth_lookup(std::vector<AttitudeSample> truth);

/// Truth -> sensors -> hold resampling -> filter, all in memory.
RunResult run_simulate(const Scenario& s);

/// Sensor log (and optional truth log) -> filter.
RunResult run_estimate_replay(const Scenario& s);

/// Dynamics, PD law on the estimate, rate allocation, servo torques, sensing
/// and filtering stepped together.
RunResult run_closed_loop(const Scenario& s);

RunResult run(const Scenario& s);

void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth);
void write_estimates(std::ostream& out, const std::vector<FilterRecord>& records);
void write_errors(std::ostream& out, const std::vector<FilterRecord>& records);
void write_control(std::ostream& out, const std::vector<ControlRecord>& control);

/// Reads t, attitude and angular velocity back from a truth.csv.
std::vector<AttitudeSample> read_truth(const std::filesystem::path& path);

/// Writes the files that belong to the scenario's mode into `dir`.
/// Returns the paths written.
std::vector<std::filesystem::path> write_outputs(const Scenario& s, const RunResult& r,
                                                 const std::filesystem::path& dir);

/// --sweep "param=range": range is "a:b:n" (n evenly spaced values, ends
/// included) or a comma list "a,b,c".
struct SweepSpec {
  std::string param;
  std::vector<double> values;
};

/// Throws InvalidParameter on malformed input.
SweepSpec parse_sweep(std::string_view text);

}  // namespace adcs
