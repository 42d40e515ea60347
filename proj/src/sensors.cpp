#include "adcs/sensors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "adcs/errors.hpp"

namespace adcs {

namespace {

constexpr double kTimeTolerance = 1e-9;

constexpr std::array<SensorId, kSensorCount> kAllSensors{SensorId::accel, SensorId::mag,
                                                         SensorId::gyro};

std::size_t index(SensorId id) { return static_cast<std::size_t>(id); }

bool is_direction(SensorId id) { return id != SensorId::gyro; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::optional<double> parse_double(std::string_view s) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

std::string_view to_string(SensorId id) {
  switch (id) {
    case SensorId::accel: return "accel";
    case SensorId::mag: return "mag";
    case SensorId::gyro: return "gyro";
  }
  return "unknown";
}

std::optional<SensorId> parse_sensor_id(std::string_view name) {
  for (SensorId id : kAllSensors) {
    if (name == to_string(id)) return id;
  }
  return std::nullopt;
}

const SensorChannelConfig& SensorSuiteConfig::channel(SensorId id) const {
  switch (id) {
    case SensorId::accel: return accel;
    case SensorId::mag: return mag;
    case SensorId::gyro: break;
  }
  return gyro;
}

SensorChannelConfig& SensorSuiteConfig::channel(SensorId id) {
  return const_cast<SensorChannelConfig&>(std::as_const(*this).channel(id));
}

SensorId SensorSuiteConfig::fastest() const {
  SensorId best = SensorId::accel;
  for (SensorId id : kAllSensors) {
    if (channel(id).rate_hz > channel(best).rate_hz) best = id;
  }
  return best;
}

void SensorSuiteConfig::validate() const {
  for (SensorId id : kAllSensors) {
    const auto& c = channel(id);
    const std::string name(to_string(id));
    if (!(c.rate_hz > 0.0) || !std::isfinite(c.rate_hz)) {
      throw InvalidParameter(name + " rate must be positive");
    }
    if (!c.noise_std.allFinite() || (c.noise_std.array() < 0.0).any()) {
      throw InvalidParameter(name + " noise std must be non-negative");
    }
    if (!c.bias.allFinite()) throw InvalidParameter(name + " bias must be finite");
    if (!(c.phase_s >= 0.0)) throw InvalidParameter(name + " phase must be non-negative");
  }
  if (!(up.norm() > 0.0) || !(field.norm() > 0.0) || up.cross(field).norm() < 1e-6 * up.norm() * field.norm()) {
    throw InvalidParameter("reference directions must be non-zero and not parallel");
  }
}

double GaussianSource::next() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * kScale;  // (0, 1]
  const double u2 = static_cast<double>(engine_() >> 11) * kScale;          // [0, 1)
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  return r * std::cos(a);
}

AttitudeSample interpolate(const AttitudeSample& a, const AttitudeSample& b, double t) {
  if (std::abs(t - a.t) <= kTimeTolerance) return a;
  if (std::abs(t - b.t) <= kTimeTolerance) return b;
  const double s = (t - a.t) / (b.t - a.t);
  const Vector3 delta = log_so3(a.attitude.transpose() * b.attitude);
  return {t, a.attitude * exp_so3(s * delta), (1.0 - s) * a.omega + s * b.omega};
}

SensorSynthesizer::SensorSynthesizer(SensorSuiteConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (SensorId id : kAllSensors) {
    noise_.emplace_back(splitmix64(cfg_.seed ^ (0x100ULL * (index(id) + 1))));
  }
}

RawSample SensorSynthesizer::measure(SensorId id, double t, const AttitudeSample& truth) {
  const auto& c = cfg_.channel(id);
  Vector3 clean;
  switch (id) {
    case SensorId::accel: clean = truth.attitude.transpose() * cfg_.up.normalized(); break;
    case SensorId::mag: clean = truth.attitude.transpose() * cfg_.field.normalized(); break;
    case SensorId::gyro: clean = truth.omega; break;
  }
  auto& src = noise_[index(id)];
  Vector3 noise;
  for (int k = 0; k < 3; ++k) noise(k) = c.noise_std(k) * src.next();
  return {t, id, clean + c.bias + noise};
}

std::vector<RawSample> SensorSynthesizer::advance(const AttitudeSample& from,
                                                  const AttitudeSample& to) {
  if (!t0_) t0_ = from.t;
  std::vector<RawSample> out;
  for (SensorId id : kAllSensors) {
    const auto& c = cfg_.channel(id);
    auto& k = ticks_[index(id)];
    while (true) {
      const double t = *t0_ + c.phase_s + static_cast<double>(k) / c.rate_hz;
      if (t > to.t + kTimeTolerance) break;
      if (t >= from.t - kTimeTolerance) out.push_back(measure(id, t, interpolate(from, to, t)));
      ++k;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const RawSample& a, const RawSample& b) {
    return a.t < b.t || (a.t == b.t && a.sensor < b.sensor);
  });
  return out;
}

std::vector<RawSample> synthesize(std::span<const AttitudeSample> truth,
                                  const SensorSuiteConfig& cfg) {
  std::vector<RawSample> out;
  if (truth.empty()) return out;
  SensorSynthesizer synth(cfg);
  if (truth.size() == 1) return synth.advance(truth[0], truth[0]);
  for (std::size_t i = 0; i + 1 < truth.size(); ++i) {
    auto chunk = synth.advance(truth[i], truth[i + 1]);
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
  return out;
}

HoldResampler::HoldResampler(SensorId clock, std::optional<double> uniform_step)
    : clock_(clock), uniform_step_(uniform_step) {
  if (uniform_step_ && !(*uniform_step_ > 0.0)) {
    throw InvalidParameter("uniform resampling step must be positive");
  }
}

void HoldResampler::emit(double tick, std::vector<MeasurementFrame>& out) {
  for (const auto& s : latest_) {
    if (!s) return;  // withheld until every sensor has reported
  }
  const auto fresh = [&](SensorId id) {
    return !last_emitted_ || latest_[index(id)]->t > *last_emitted_ + kTimeTolerance;
  };
  MeasurementFrame f;
  f.t = tick;
  f.accel = normalize_direction(latest_[index(SensorId::accel)]->v);
  f.mag = normalize_direction(latest_[index(SensorId::mag)]->v);
  f.gyro = latest_[index(SensorId::gyro)]->v;
  f.accel_fresh = fresh(SensorId::accel);
  f.mag_fresh = fresh(SensorId::mag);
  f.gyro_fresh = fresh(SensorId::gyro);
  last_emitted_ = tick;
  out.push_back(f);
}

void HoldResampler::finalise_until(double t, std::vector<MeasurementFrame>& out, bool inclusive) {
  std::size_t done = 0;
  for (; done < pending_.size(); ++done) {
    const double tick = pending_[done];
    if (!inclusive && !(tick < t - kTimeTolerance)) break;
    emit(tick, out);
  }
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(done));
}

std::vector<MeasurementFrame> HoldResampler::push(const RawSample& sample) {
  if (sample.t < last_time_ - kTimeTolerance) {
    std::ostringstream os;
    os << "resampler input goes back in time at t=" << sample.t;
    throw InvalidParameter(os.str());
  }
  last_time_ = std::max(last_time_, sample.t);

  std::vector<MeasurementFrame> out;
  if (uniform_step_) {
    if (!grid_origin_ && sample.sensor == clock_) grid_origin_ = sample.t;
    if (grid_origin_) {
      while (true) {
        const double tick = *grid_origin_ + static_cast<double>(grid_index_) * *uniform_step_;
        if (tick > sample.t + kTimeTolerance) break;
        pending_.push_back(tick);
        ++grid_index_;
      }
    }
  }
  finalise_until(sample.t, out, false);
  latest_[index(sample.sensor)] = sample;
  if (!uniform_step_ && sample.sensor == clock_) pending_.push_back(sample.t);
  return out;
}

std::vector<MeasurementFrame> HoldResampler::flush() {
  std::vector<MeasurementFrame> out;
  finalise_until(0.0, out, true);
  return out;
}

std::vector<MeasurementFrame> resample_hold(std::vector<RawSample> stream,
                                            const ResampleOptions& options) {
  std::stable_sort(stream.begin(), stream.end(),
                   [](const RawSample& a, const RawSample& b) { return a.t < b.t; });
  SensorId clock = SensorId::accel;
  if (options.clock) {
    clock = *options.clock;
  } else {
    std::array<std::size_t, kSensorCount> count{};
    std::array<double, kSensorCount> first{}, last{};
    for (const auto& s : stream) {
      const auto k = index(s.sensor);
      if (count[k]++ == 0) first[k] = s.t;
      last[k] = s.t;
    }
    double best_rate = -1.0;
    for (SensorId id : kAllSensors) {
      const auto k = index(id);
      if (count[k] < 2) continue;
      const double rate = static_cast<double>(count[k] - 1) / (last[k] - first[k]);
      if (rate > best_rate * (1.0 + 1e-9)) {
        best_rate = rate;
        clock = id;
      }
    }
  }
  HoldResampler resampler(clock, options.uniform_step);
  std::vector<MeasurementFrame> frames;
  for (const auto& s : stream) {
    auto out = resampler.push(s);
    frames.insert(frames.end(), out.begin(), out.end());
  }
  auto tail = resampler.flush();
  frames.insert(frames.end(), tail.begin(), tail.end());
  return frames;
}

std::string to_string(const LogIssue& issue) {
  std::ostringstream os;
  os << "line " << issue.line;
  if (issue.column > 0) os << ", column " << issue.column;
  os << ": "
     << (issue.kind == LogIssue::Kind::non_monotone_time ? "non-monotone time: " : "parse error: ")
     << issue.reason;
  return os.str();
}

IngestResult read_log(std::istream& in) {
  IngestResult result;
  std::array<std::optional<double>, kSensorCount> last_t;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  auto fail = [&](std::size_t column, std::string reason) {
    result.issues.push_back({LogIssue::Kind::parse_error, line_no, column, std::move(reason)});
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty() || row.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (row == "t,sensor,x,y,z") continue;
      fail(0, "missing header 't,sensor,x,y,z'");
    }
    const auto fields = split(row, ',');
    if (fields.size() != 5) {
      fail(0, "expected 5 fields, got " + std::to_string(fields.size()));
      continue;
    }
    const auto t = parse_double(fields[0]);
    if (!t) {
      fail(1, "invalid time '" + std::string(fields[0]) + "'");
      continue;
    }
    const auto sensor = parse_sensor_id(fields[1]);
    if (!sensor) {
      fail(2, "unknown sensor '" + std::string(fields[1]) + "'");
      continue;
    }
    Vector3 v;
    bool ok = true;
    for (int k = 0; k < 3 && ok; ++k) {
      const auto x = parse_double(fields[2 + k]);
      if (!x) {
        fail(3 + k, "invalid number '" + std::string(fields[2 + k]) + "'");
        ok = false;
      } else {
        v(k) = *x;
      }
    }
    if (!ok) continue;
    if (is_direction(*sensor) && !(v.norm() > 0.0)) {
      fail(3, "zero-length direction");
      continue;
    }
    auto& prev = last_t[index(*sensor)];
    if (prev && !(*t > *prev)) {
      std::ostringstream os;
      os << to_string(*sensor) << " time " << *t << " does not follow " << *prev;
      result.issues.push_back({LogIssue::Kind::non_monotone_time, line_no, 1, os.str()});
      continue;
    }
    prev = *t;
    result.samples.push_back({*t, *sensor, is_direction(*sensor) ? normalize_direction(v) : v});
  }

  if (!result.samples.empty()) {
    double t0 = result.samples.front().t;
    for (const auto& s : result.samples) t0 = std::min(t0, s.t);
    for (auto& s : result.samples) s.t -= t0;
  }
  return result;
}

IngestResult ingest_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open sensor log " + path.string());
  return read_log(in);
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

void write_log(std::ostream& out, std::span<const RawSample> samples, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "t,sensor,x,y,z\n";
  for (const auto& s : samples) {
    out << format_number(s.t) << ',' << to_string(s.sensor) << ',' << format_number(s.v.x()) << ','
        << format_number(s.v.y()) << ',' << format_number(s.v.z()) << '\n';
  }
}

}  // namespace adcs
