#pragma once

// Synthetic IMU measurements, last-value-hold resampling onto the fastest
// sensor's clock, and the plain-text sensor log format
//
//   t,sensor,x,y,z
//   0,accel,0,0,1
//   ...
//
// with sensor in {accel, mag, gyro}; accel/mag are direction components,
// gyro is rad/s, all in the body frame.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adcs/estimator.hpp"

namespace adcs {

enum class SensorId : std::uint8_t { accel = 0, mag = 1, gyro = 2 };

inline constexpr std::size_t kSensorCount = 3;

std::string_view to_string(SensorId id);
std::optional<SensorId> parse_sensor_id(std::string_view name);

struct SensorChannelConfig {
  double rate_hz = 100.0;
  Vector3 noise_std = Vector3::Zero();  // per axis
  Vector3 bias = Vector3::Zero();       // per axis
  double phase_s = 0.0;                 // first sample time after t0
};

struct SensorSuiteConfig {
  SensorChannelConfig accel{.rate_hz = 100.0, .noise_std = Vector3::Constant(0.01)};
  SensorChannelConfig mag{.rate_hz = 50.0, .noise_std = Vector3::Constant(0.01)};
  SensorChannelConfig gyro{.rate_hz = 100.0, .noise_std = Vector3::Constant(0.005)};
  Vector3 up = default_up_direction();        // e1, read by the accelerometer
  Vector3 field = default_field_direction();  // e2, read by the magnetometer
  std::uint64_t seed = 1;

  const SensorChannelConfig& channel(SensorId id) const;
  SensorChannelConfig& channel(SensorId id);

  /// The inertial triad E matching these reference directions.
  Matrix3 directions() const { return direction_triad(up, field); }

  /// Sensor with the highest rate; ties go to the lower id (accel first).
  SensorId fastest() const;

  void validate() const;
};

struct RawSample {
  double t = 0.0;
  SensorId sensor = SensorId::accel;
  Vector3 v = Vector3::Zero();
};

/// Zero-mean unit Gaussian draws from a mt19937_64 stream by Box-Muller, so
/// that a seed gives the same sequence with every standard library.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}
  double next();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Incremental measurement generator. Every sensor keeps its own clock
/// t0 + phase + k / rate; truth is interpolated geodesically between the
/// bracketing samples.
class SensorSynthesizer {
 public:
  explicit SensorSynthesizer(SensorSuiteConfig cfg);

  /// Emits every sample whose clock time lies in [from.t, to.t] and has not
  /// been emitted yet, ordered by (t, sensor).
  std::vector<RawSample> advance(const AttitudeSample& from, const AttitudeSample& to);

 private:
  RawSample measure(SensorId id, double t, const AttitudeSample& truth);

  SensorSuiteConfig cfg_;
  std::optional<double> t0_;
  std::array<std::uint64_t, kSensorCount> ticks_{};
  std::vector<GaussianSource> noise_;
};

/// accel = R^T e1 + noise + bias, mag = R^T e2 + noise + bias,
/// gyro = Omega + noise + bias. Deterministic for a fixed seed.
std::vector<RawSample> synthesize(std::span<const AttitudeSample> truth,
                                  const SensorSuiteConfig& cfg);

/// Geodesic interpolation of attitude, linear in angular velocity.
AttitudeSample interpolate(const AttitudeSample& a, const AttitudeSample& b, double t);

struct ResampleOptions {
  std::optional<SensorId> clock;       // default: sensor with the most samples per second
  std::optional<double> uniform_step;  // tick on t_first + k*step instead of the clock's samples
};

/// Last-value-hold resampler over a time-ordered sample stream. A tick is
/// finalised once a later sample (or flush) shows nothing more can arrive
/// for it. Frames are withheld until every sensor has reported. Direction
/// channels are normalised.
class HoldResampler {
 public:
  explicit HoldResampler(SensorId clock, std::optional<double> uniform_step = {});

  std::vector<MeasurementFrame> push(const RawSample& sample);
  std::vector<MeasurementFrame> flush();

 private:
  void finalise_until(double t, std::vector<MeasurementFrame>& out, bool inclusive);
  void emit(double tick, std::vector<MeasurementFrame>& out);

  SensorId clock_;
  std::optional<double> uniform_step_;
  std::optional<double> grid_origin_;
  std::uint64_t grid_index_ = 0;
  std::vector<double> pending_;
  std::array<std::optional<RawSample>, kSensorCount> latest_;
  std::optional<double> last_emitted_;
  double last_time_ = -1e300;
};

/// Batch form. Sorts (stably) by time first, so per-sensor-monotone input
/// from a log works.
std::vector<MeasurementFrame> resample_hold(std::vector<RawSample> stream,
                                            const ResampleOptions& options = {});

struct LogIssue {
  enum class Kind { parse_error, non_monotone_time };
  Kind kind = Kind::parse_error;
  std::size_t line = 0;    // 1-based
  std::size_t column = 0;  // 1-based field index, 0 when the whole row is at fault
  std::string reason;
};

std::string to_string(const LogIssue& issue);

struct IngestResult {
  std::vector<RawSample> samples;
  std::vector<LogIssue> issues;
};

/// Parses a sensor log. Malformed rows are skipped and reported; rows that
/// go back in time for their sensor are skipped and reported as
/// non_monotone_time. Lines starting with '#' are comments. Timestamps are
/// shifted so the earliest accepted row is at 0; accel/mag are normalised.
IngestResult read_log(std::istream& in);
IngestResult ingest_log(const std::filesystem::path& path);

/// Writes the header and one row per sample with shortest round-trip
/// number formatting. `comment`, if non-empty, is written first as "# ...".
void write_log(std::ostream& out, std::span<const RawSample> samples,
               std::string_view comment = {});

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

}  // namespace adcs
