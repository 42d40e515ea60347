#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "adcs/errors.hpp"
#include "adcs/sensors.hpp"
#include "support.hpp"

namespace adcs {
namespace {

using test::Rng;

SensorSuiteConfig noise_free(double accel_hz = 100.0, double mag_hz = 100.0, double gyro_hz = 100.0) {
  SensorSuiteConfig cfg;
  cfg.accel = {.rate_hz = accel_hz};
  cfg.mag = {.rate_hz = mag_hz};
  cfg.gyro = {.rate_hz = gyro_hz};
  return cfg;
}

std::vector<AttitudeSample> tumbling_truth(double duration, double step) {
  std::vector<AttitudeSample> truth;
  const Vector3 w(0.03, -0.05, 0.08);
  for (int k = 0; k * step <= duration + 1e-12; ++k) {
    const double t = k * step;
    truth.push_back({t, exp_so3(Vector3(0.4, -0.1, 0.2)) * exp_so3(t * w), w});
  }
  return truth;
}

TEST(Synthesize, IdentityAttitudeReadsReferenceDirections) {
  const SensorSuiteConfig cfg = noise_free();
  const std::vector<AttitudeSample> truth{{0.0, {}, Vector3(0.1, 0.2, 0.3)}};
  const auto samples = synthesize(truth, cfg);
  ASSERT_EQ(samples.size(), 3u);
  EXPECT_EQ(samples[0].sensor, SensorId::accel);
  EXPECT_EQ(samples[0].v, Vector3(0, 0, 1));
  EXPECT_EQ(samples[1].sensor, SensorId::mag);
  EXPECT_EQ(samples[1].v, default_field_direction());
  EXPECT_EQ(samples[2].v, Vector3(0.1, 0.2, 0.3));
}

TEST(Synthesize, NoiseFreeFramesReproduceRtE) {
  const SensorSuiteConfig cfg = noise_free(100.0, 50.0, 100.0);
  const auto truth = tumbling_truth(5.0, 0.01);
  const auto frames = resample_hold(synthesize(truth, cfg));
  ASSERT_EQ(frames.size(), truth.size());
  const Matrix3 e = cfg.directions();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].mag_fresh) continue;  // held magnetometer readings lag the truth
    EXPECT_NEAR(frames[i].t, truth[i].t, 1e-12);
    const Matrix3 expected = truth[i].attitude.matrix().transpose() * e;
    ASSERT_LE((build_Um(frames[i]) - expected).cwiseAbs().maxCoeff(), 1e-12) << i;
  }
}

TEST(Synthesize, IndependentClocksAndPhases) {
  SensorSuiteConfig cfg = noise_free(100.0, 30.0, 70.0);
  cfg.mag.phase_s = 0.004;
  const auto samples = synthesize(tumbling_truth(1.0, 0.01), cfg);
  std::vector<double> mag;
  for (const auto& s : samples) {
    if (s.sensor == SensorId::mag) mag.push_back(s.t);
  }
  ASSERT_EQ(mag.size(), 30u);
  for (std::size_t k = 0; k < mag.size(); ++k) EXPECT_NEAR(mag[k], 0.004 + k / 30.0, 1e-12);
  EXPECT_TRUE(std::is_sorted(samples.begin(), samples.end(),
                             [](const RawSample& a, const RawSample& b) { return a.t < b.t; }));
}

TEST(Synthesize, FixedSeedIsBitIdentical) {
  SensorSuiteConfig cfg;
  cfg.seed = 1234;
  const auto truth = tumbling_truth(3.0, 0.01);
  const auto a = synthesize(truth, cfg);
  const auto b = synthesize(truth, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].t, b[i].t);
    EXPECT_EQ(a[i].sensor, b[i].sensor);
    EXPECT_EQ(a[i].v, b[i].v);
  }
  cfg.seed = 1235;
  const auto c = synthesize(truth, cfg);
  EXPECT_NE(a[0].v, c[0].v);
}

TEST(Synthesize, NoiseAndBiasStatistics) {
  SensorSuiteConfig cfg;
  cfg.gyro = {.rate_hz = 100.0, .noise_std = Vector3(0.005, 0.01, 0.02), .bias = Vector3(0.1, -0.2, 0.0)};
  const std::vector<AttitudeSample> truth{{0.0, {}, Vector3::Zero()}, {200.0, {}, Vector3::Zero()}};
  Vector3 sum = Vector3::Zero(), sq = Vector3::Zero();
  int n = 0;
  for (const auto& s : synthesize(truth, cfg)) {
    if (s.sensor != SensorId::gyro) continue;
    sum += s.v;
    ++n;
  }
  const Vector3 mean = sum / n;
  for (const auto& s : synthesize(truth, cfg)) {
    if (s.sensor == SensorId::gyro) sq += (s.v - mean).cwiseAbs2();
  }
  const Vector3 std_dev = (sq / (n - 1)).cwiseSqrt();
  ASSERT_EQ(n, 20001);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(mean(k), cfg.gyro.bias(k), 4.0 * cfg.gyro.noise_std(k) / std::sqrt(n));
    EXPECT_NEAR(std_dev(k) / cfg.gyro.noise_std(k), 1.0, 0.03);
  }
}

TEST(Synthesize, ConfigValidation) {
  SensorSuiteConfig cfg;
  cfg.mag.rate_hz = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidParameter);
  cfg = SensorSuiteConfig{};
  cfg.gyro.noise_std.y() = -1e-3;
  EXPECT_THROW(cfg.validate(), InvalidParameter);
  cfg = SensorSuiteConfig{};
  cfg.field = cfg.up;
  EXPECT_THROW(cfg.validate(), InvalidParameter);
  EXPECT_EQ(SensorSuiteConfig{}.fastest(), SensorId::accel);
}

TEST(Interpolate, GeodesicMidpoint) {
  const AttitudeSample a{0.0, {}, Vector3(0, 0, 1)};
  const AttitudeSample b{2.0, exp_so3(Vector3(0, 0, 1)), Vector3(0, 0, 3)};
  const AttitudeSample m = interpolate(a, b, 1.0);
  EXPECT_LE((m.attitude.matrix() - exp_so3(Vector3(0, 0, 0.5)).matrix()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(m.omega, Vector3(0, 0, 2));
}

TEST(Resample, SameRateAndPhaseIsAlwaysFresh) {
  const auto frames = resample_hold(synthesize(tumbling_truth(1.0, 0.01), noise_free()));
  ASSERT_EQ(frames.size(), 101u);
  for (const auto& f : frames) {
    EXPECT_TRUE(f.accel_fresh && f.mag_fresh && f.gyro_fresh) << f.t;
  }
}

TEST(Resample, HalfRateGyroAlternatesStale) {
  const auto truth = tumbling_truth(1.0, 0.01);
  const auto frames = resample_hold(synthesize(truth, noise_free(100.0, 100.0, 50.0)));
  ASSERT_EQ(frames.size(), 101u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i].gyro_fresh, i % 2 == 0) << i;
    EXPECT_TRUE(frames[i].accel_fresh);
    if (i % 2 == 1) EXPECT_EQ(frames[i].gyro, frames[i - 1].gyro);
  }
}

TEST(Resample, WithholdsFramesUntilEverySensorReported) {
  std::vector<RawSample> s{{0.00, SensorId::accel, Vector3::UnitZ()},
                           {0.01, SensorId::accel, Vector3::UnitZ()},
                           {0.01, SensorId::gyro, Vector3::Zero()},
                           {0.02, SensorId::accel, Vector3::UnitZ()},
                           {0.025, SensorId::mag, Vector3::UnitX()},
                           {0.03, SensorId::accel, Vector3::UnitZ()}};
  const auto frames = resample_hold(s, {.clock = SensorId::accel});
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].t, 0.03);
  EXPECT_TRUE(frames[0].mag_fresh);
}

// Brute-force merge: for each clock tick, scan every sample for the latest
// one of each sensor at or before the tick.
TEST(Resample, MatchesBruteForceMergeForRandomClocks) {
  Rng rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    std::array<double, 3> rate{}, phase{};
    std::vector<RawSample> stream;
    for (int id = 0; id < 3; ++id) {
      rate[id] = test::uniform(rng, 5.0, 120.0);
      phase[id] = test::uniform(rng, 0.0, 0.2);
      for (int k = 0; phase[id] + k / rate[id] <= 2.0; ++k) {
        const double t = phase[id] + k / rate[id];
        const SensorId sid = static_cast<SensorId>(id);
        // Gyro carries its own timestamp so staleness can be read back.
        const Vector3 v = sid == SensorId::gyro ? Vector3(t, k, 0.0) : test::random_unit(rng);
        stream.push_back({t, sid, v});
      }
    }
    const auto clock = static_cast<SensorId>(std::max_element(rate.begin(), rate.end()) - rate.begin());
    std::vector<RawSample> shuffled = stream;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);  // batch form sorts by time
    const auto frames = resample_hold(shuffled);

    std::vector<MeasurementFrame> oracle;
    std::optional<double> previous_tick;
    for (const auto& tick : stream) {
      if (tick.sensor != clock) continue;
      std::array<const RawSample*, 3> latest{};
      for (const auto& s : stream) {
        auto& slot = latest[static_cast<int>(s.sensor)];
        if (s.t <= tick.t && (!slot || s.t > slot->t)) slot = &s;
      }
      if (!latest[0] || !latest[1] || !latest[2]) continue;
      MeasurementFrame f;
      f.t = tick.t;
      f.accel = latest[0]->v;
      f.mag = latest[1]->v;
      f.gyro = latest[2]->v;
      f.accel_fresh = !previous_tick || latest[0]->t > *previous_tick;
      f.mag_fresh = !previous_tick || latest[1]->t > *previous_tick;
      f.gyro_fresh = !previous_tick || latest[2]->t > *previous_tick;
      previous_tick = tick.t;
      oracle.push_back(f);
    }

    ASSERT_EQ(frames.size(), oracle.size()) << trial;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      EXPECT_EQ(frames[i].t, oracle[i].t);
      EXPECT_EQ(frames[i].accel, oracle[i].accel);
      EXPECT_EQ(frames[i].mag, oracle[i].mag);
      EXPECT_EQ(frames[i].gyro, oracle[i].gyro);
      EXPECT_EQ(frames[i].accel_fresh, oracle[i].accel_fresh);
      EXPECT_EQ(frames[i].mag_fresh, oracle[i].mag_fresh);
      EXPECT_EQ(frames[i].gyro_fresh, oracle[i].gyro_fresh);
      EXPECT_LE(frames[i].gyro.x(), frames[i].t);  // never postdates the frame
    }
  }
}

TEST(Resample, UniformGridHoldsLatestValues) {
  std::vector<RawSample> s;
  for (int k = 0; k < 40; ++k) {
    s.push_back({0.0125 * k, SensorId::accel, Vector3::UnitZ()});
    s.push_back({0.0125 * k, SensorId::mag, Vector3::UnitX()});
    s.push_back({0.0125 * k, SensorId::gyro, Vector3(0.0125 * k, 0, 0)});
  }
  const auto frames = resample_hold(s, {.clock = SensorId::accel, .uniform_step = 0.01});
  ASSERT_EQ(frames.size(), 49u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_NEAR(frames[i].t, 0.01 * i, 1e-15);
    EXPECT_LE(frames[i].gyro.x(), frames[i].t + 1e-12);
    EXPECT_GT(frames[i].gyro.x() + 0.0125, frames[i].t);
  }
}

TEST(Resample, StreamingRejectsTimeTravel) {
  HoldResampler r(SensorId::accel);
  r.push({1.0, SensorId::accel, Vector3::UnitZ()});
  EXPECT_THROW(r.push({0.5, SensorId::mag, Vector3::UnitX()}), InvalidParameter);
}

TEST(Ingest, ThreeWellFormedRows) {
  std::istringstream in("t,sensor,x,y,z\n10.0,accel,0,0,2\n10.01,mag,1,0,0\n10.01,gyro,0.1,0.2,0.3\n");
  const IngestResult r = read_log(in);
  EXPECT_TRUE(r.issues.empty());
  ASSERT_EQ(r.samples.size(), 3u);
  EXPECT_EQ(r.samples[0].t, 0.0);
  EXPECT_EQ(r.samples[0].v, Vector3(0, 0, 1));  // normalised
  EXPECT_NEAR(r.samples[2].t, 0.01, 1e-12);
  EXPECT_EQ(r.samples[2].sensor, SensorId::gyro);
  EXPECT_EQ(r.samples[2].v, Vector3(0.1, 0.2, 0.3));
}

TEST(Ingest, MalformedRowsReportLineAndColumn) {
  std::istringstream in(
      "t,sensor,x,y,z\n0,accel,0,0,1\n0.01,mag\n0.02,baro,1,2,3\n0.03,gyro,1,x,3\n0.04,gyro,1,2,3\n");
  const IngestResult r = read_log(in);
  EXPECT_EQ(r.samples.size(), 2u);
  ASSERT_EQ(r.issues.size(), 3u);
  EXPECT_EQ(r.issues[0].line, 3u);
  EXPECT_EQ(r.issues[0].kind, LogIssue::Kind::parse_error);
  EXPECT_EQ(r.issues[0].column, 0u);
  EXPECT_EQ(r.issues[1].line, 4u);
  EXPECT_EQ(r.issues[1].column, 2u);
  EXPECT_EQ(r.issues[2].line, 5u);
  EXPECT_EQ(r.issues[2].column, 4u);
  EXPECT_NE(to_string(r.issues[2]).find("line 5"), std::string::npos);
}

TEST(Ingest, NonMonotoneTimeIsPerSensor) {
  std::istringstream in("t,sensor,x,y,z\n0.02,gyro,0,0,0\n0.01,accel,0,0,1\n0.01,gyro,0,0,0\n0.03,gyro,0,0,0\n");
  const IngestResult r = read_log(in);
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].kind, LogIssue::Kind::non_monotone_time);
  EXPECT_EQ(r.issues[0].line, 4u);
  EXPECT_EQ(r.samples.size(), 3u);
  EXPECT_EQ(r.samples[1].t, 0.0);  // accel row is the earliest
}

TEST(Ingest, CountsMatchIndependentLineScan) {
  Rng rng(72);
  SensorSuiteConfig cfg;
  cfg.seed = 9;
  std::vector<RawSample> clean = synthesize(tumbling_truth(2.0, 0.01), cfg);
  for (auto& s : clean) {
    if (s.sensor != SensorId::gyro) s.v = normalize_direction(s.v);
  }
  std::ostringstream written;
  write_log(written, clean);
  const std::vector<std::string> junk{"0.5,accel,1,2", "oops", "0.5,accel,a,b,c", ",,,,", "0.5,compass,1,0,0"};
  std::istringstream src(written.str());
  std::ostringstream dirty;
  std::string line;
  int injected = 0;
  while (std::getline(src, line)) {
    dirty << line << '\n';
    if (line.front() != 't' && test::uniform(rng, 0, 1) < 0.05) {
      dirty << junk[injected % junk.size()] << '\n';
      ++injected;
    }
  }
  ASSERT_GT(injected, 5);

  // Independent scan: five fields, a known sensor name, four numbers.
  const auto well_formed = [](const std::string& row) {
    std::vector<std::string> f;
    std::stringstream ss(row);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (f.size() != 5 || (f[1] != "accel" && f[1] != "mag" && f[1] != "gyro")) return false;
    for (int k : {0, 2, 3, 4}) {
      std::istringstream num(f[k]);
      double v;
      if (!(num >> v) || !num.eof()) return false;
    }
    return true;
  };
  std::istringstream scan(dirty.str());
  std::size_t rows = 0, malformed = 0;
  std::getline(scan, line);
  while (std::getline(scan, line)) {
    ++rows;
    if (!well_formed(line)) ++malformed;
  }

  std::istringstream in(dirty.str());
  const IngestResult r = read_log(in);
  EXPECT_EQ(static_cast<std::size_t>(injected), malformed);
  EXPECT_EQ(r.samples.size(), rows - malformed);
  EXPECT_EQ(r.issues.size(), malformed);

  // Export of the ingested stream is field-identical to the well-formed subset.
  std::ostringstream exported;
  write_log(exported, r.samples);
  EXPECT_EQ(exported.str(), written.str());
}

TEST(Ingest, MissingFileThrows) {
  EXPECT_THROW(ingest_log("/nonexistent/sensors.csv"), Error);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-2.5e-7), "-2.5e-07");
  Rng rng(73);
  for (int i = 0; i < 1000; ++i) {
    const double x = test::uniform(rng, -1e3, 1e3) * std::pow(10.0, test::uniform(rng, -10, 10));
    EXPECT_EQ(std::stod(format_number(x)), x);
  }
}

}  // namespace
}  // namespace adcs
