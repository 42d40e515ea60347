#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "adcs/control.hpp"
#include "support.hpp"

namespace adcs {
namespace {

using test::Rng;

SpacecraftConfig small_array(int count) {
  const VscmgParams proto = VscmgParams::aligned(Vector3::UnitZ(), Vector3::UnitX(), Vector3(2e-4, 2e-4, 2e-4),
                                                 Vector3(1e-4, 3e-4, 1e-4), 0.05, 0.1, Vector3::Zero());
  const Matrix3 jb = Vector3(0.5, 0.6, 0.7).asDiagonal();
  if (count == 3) return SpacecraftConfig::tetrahedron(jb, 0.05, proto);
  return SpacecraftConfig::pyramid(jb, count, std::acos(1.0 / std::sqrt(3.0)), 0.05, proto);
}

SpacecraftState spinning(const SpacecraftConfig& cfg, double rotor_rate) {
  SpacecraftState s;
  for (std::size_t i = 0; i < cfg.units.size(); ++i) {
    s.units.push_back({0.1 * static_cast<double>(i), 0.0, 0.0, rotor_rate});
  }
  return s;
}

TEST(InternalMomentum, ZeroRates) {
  Rng rng(51);
  const SpacecraftConfig cfg = test::random_config(rng, 3, true);
  SpacecraftState s = test::random_state(rng, cfg);
  for (auto& u : s.units) u.alpha_dot = u.theta_dot = 0.0;
  EXPECT_EQ(internal_momentum(cfg, s), Vector3::Zero());
}

TEST(InternalMomentum, SingleRotorColumn) {
  Rng rng(52);
  const SpacecraftConfig cfg = test::random_config(rng, 1, false);
  SpacecraftState s;
  s.units = {{0.0, 0.7, 0.0, 3.0}};
  const UnitKinematics k = unit_kinematics(cfg.units[0], 0.0, 0.7);
  const Matrix3 rr = k.rotor_rotation.matrix();
  const Vector3 expected = 3.0 * (rr * cfg.units[0].rotor_inertia * rr.transpose() * cfg.units[0].rotor_axis);
  EXPECT_LE((internal_momentum(cfg, s) - expected).norm(), 1e-14);
}

TEST(InternalMomentum, SplitsTotalMomentum) {
  Rng rng(53);
  for (int i = 0; i < 100; ++i) {
    const SpacecraftConfig cfg = test::random_config(rng, 1 + i % 4, true);
    const SpacecraftState s = test::random_state(rng, cfg);
    const Vector3 pi = momenta(cfg, s).total;
    const Vector3 base = assemble_inertia(cfg, s.units).base_block() * s.omega;
    EXPECT_LE((pi - internal_momentum(cfg, s) - base).norm(), 1e-10 * std::max(1.0, pi.norm()));
  }
}

TEST(ControlTorque, TrivialCases) {
  EXPECT_EQ(control_torque(Vector3::Zero(), Vector3(1, 2, 3), Vector3::Zero()), Vector3::Zero());
  const Vector3 w(0.1, -0.2, 0.3);
  EXPECT_LE(control_torque(2.5 * w, w, Vector3::Zero()).norm(), 1e-16);
}

TEST(ControlTorque, ComponentwiseAndBilinear) {
  Rng rng(54);
  for (int i = 0; i < 100; ++i) {
    const Vector3 u = test::random_vector(rng), w = test::random_vector(rng), ud = test::random_vector(rng);
    const Vector3 expected(u.y() * w.z() - u.z() * w.y() - ud.x(), u.z() * w.x() - u.x() * w.z() - ud.y(),
                           u.x() * w.y() - u.y() * w.x() - ud.z());
    EXPECT_LE((control_torque(u, w, ud) - expected).norm(), 1e-15);
    const double c = test::uniform(rng, -3, 3);
    EXPECT_LE((control_torque(c * u, w, c * ud) - c * control_torque(u, w, ud)).norm(), 1e-14);
  }
}

TEST(ControlTorque, StateOverloadUsesInternalMomentum) {
  Rng rng(55);
  const SpacecraftConfig cfg = test::random_config(rng, 2, true);
  const SpacecraftState s = test::random_state(rng, cfg);
  const Vector3 ud(0.1, 0.2, -0.3);
  EXPECT_EQ(control_torque(cfg, s, ud), control_torque(internal_momentum(cfg, s), s.omega, ud));
}

TEST(MomentumRate, BackwardDifference) {
  MomentumRateEstimator est(0.1);
  EXPECT_EQ(est.update(Vector3(1, 2, 3)), Vector3::Zero());
  EXPECT_LE((est.update(Vector3(1.5, 2, 2)) - Vector3(5, 0, -10)).norm(), 1e-13);
  est.reset();
  EXPECT_EQ(est.update(Vector3(9, 9, 9)), Vector3::Zero());
}

TEST(Allocate, ZeroRequestAtRest) {
  const SpacecraftConfig cfg = small_array(4);
  SpacecraftState still = spinning(cfg, 0.0);
  const AllocationResult a = allocate_rates(cfg, still, Vector3::Zero());
  for (const auto& r : a.command.rates) EXPECT_EQ(r, Vector2::Zero());

  // Spinning rotors at constant speed on a base at rest already give zero
  // torque, so nothing changes.
  const SpacecraftState s = spinning(cfg, 300.0);
  const AllocationResult b = allocate_rates(cfg, s, Vector3::Zero());
  for (std::size_t i = 0; i < s.units.size(); ++i) {
    EXPECT_LE((b.command.rates[i] - s.units[i].rates()).norm(), 1e-9);
  }
  EXPECT_FALSE(b.rank_deficient);
}

TEST(Allocate, TetrahedronDeliversRequestedTorque) {
  const SpacecraftConfig cfg = small_array(3);
  SpacecraftState s = spinning(cfg, 300.0);
  s.omega = Vector3(0.01, -0.02, 0.015);
  Rng rng(56);
  for (int i = 0; i < 50; ++i) {
    const Vector3 tau = 1e-3 * test::random_vector(rng);
    const AllocationResult a = allocate_rates(cfg, s, tau);
    ASSERT_FALSE(a.saturated);
    ASSERT_FALSE(a.rank_deficient);
    const Vector3 achieved = one_step_torque(cfg, s, a.command.rates, 0.01);
    EXPECT_LE((achieved - tau).norm(), 0.01 * tau.norm()) << i;
  }
}

TEST(Allocate, ParallelGimbalsAreFlaggedAndBounded) {
  // Identical units: every gimbal axis and rotor axis coincide.
  SpacecraftConfig cfg;
  cfg.base_inertia = Matrix3::Identity();
  const VscmgParams u = VscmgParams::aligned(Vector3::UnitZ(), Vector3::UnitX(), Vector3(2e-4, 2e-4, 2e-4),
                                             Vector3(1e-4, 3e-4, 1e-4), 0.05, 0.1, Vector3::Zero());
  cfg.units = {u, u, u};
  SpacecraftState s = spinning(cfg, 100.0);
  for (auto& st : s.units) st.alpha = 0.0;
  const AllocationResult a = allocate_rates(cfg, s, Vector3(0.0, 0.0, 1.0));
  EXPECT_TRUE(a.rank_deficient);
  for (const auto& r : a.command.rates) {
    EXPECT_TRUE(r.allFinite());
    EXPECT_LE(std::abs(r.x()), a.command.limits.gimbal_rate);
    EXPECT_LE(std::abs(r.y()), a.command.limits.rotor_rate);
  }
}

TEST(Allocate, OutputBoundedForAnyInput) {
  Rng rng(57);
  const SpacecraftConfig cfg = small_array(4);
  for (int i = 0; i < 100; ++i) {
    SpacecraftState s = spinning(cfg, test::uniform(rng, -900, 900));
    s.omega = test::random_vector(rng, 2.0);
    const double mag = std::pow(10.0, test::uniform(rng, -6, 6));
    const AllocationResult a = allocate_rates(cfg, s, mag * test::random_vector(rng));
    for (const auto& r : a.command.rates) {
      EXPECT_TRUE(r.allFinite());
      EXPECT_LE(std::abs(r.x()), a.command.limits.gimbal_rate);
      EXPECT_LE(std::abs(r.y()), a.command.limits.rotor_rate);
    }
  }
  const SpacecraftState s = spinning(cfg, 100.0);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const AllocationResult bad = allocate_rates(cfg, s, Vector3(nan, 0, 0));
  EXPECT_TRUE(bad.rank_deficient);
  for (const auto& r : bad.command.rates) EXPECT_TRUE(r.allFinite());
}

TEST(Allocate, InternalActuationConservesInertialMomentum) {
  const SpacecraftConfig cfg = small_array(4);
  SpacecraftState s = spinning(cfg, 300.0);
  s.omega = Vector3(0.02, -0.01, 0.03);
  const Vector3 h0 = inertial_momentum(cfg, s);
  const PdAttitudeLaw law{.kp = 1e-3, .kd = 1e-2, .target = {}};
  const double h = 0.01;
  for (int k = 0; k < 1000; ++k) {
    const AllocationResult a = allocate_rates(cfg, s, law(s.attitude, s.omega), {.step = h});
    const AssembledInertia in = assemble_inertia(cfg, s.units);
    std::vector<Vector2> tau;
    for (std::size_t i = 0; i < cfg.units.size(); ++i) {
      tau.push_back(20.0 * in.units[i].gimbal_rotor * (a.command.rates[i] - s.units[i].rates()));
    }
    s = propagate(cfg, s, tau, {}, h);
  }
  EXPECT_LE((inertial_momentum(cfg, s) - h0).norm(), 1e-8 * h0.norm());
  // The law did something: the base has slowed down.
  EXPECT_LT(s.omega.norm(), 0.5 * 0.0374);
}

TEST(PdLaw, SignsAndEquilibrium) {
  const PdAttitudeLaw law{.kp = 2.0, .kd = 3.0, .target = {}};
  EXPECT_EQ(law(RotationMatrix::identity(), Vector3::Zero()), Vector3::Zero());
  const Vector3 tau = law(exp_so3(Vector3(0, 0, 0.01)), Vector3(0, 0, 0.1));
  EXPECT_NEAR(tau.z(), -2.0 * std::sin(0.01) - 0.3, 1e-12);
  EXPECT_NEAR(tau.head<2>().norm(), 0.0, 1e-15);
}

}  // namespace
}  // namespace adcs
