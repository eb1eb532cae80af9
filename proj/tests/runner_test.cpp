#include "mvp/runner.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mvp;
using namespace mvp::runner;
using testing_support::config_path;

namespace {

System vectored() { return load_and_validate(config_path("vectored_mission.yaml")); }

std::string headless_log(const System& sys, double duration) {
  Simulation sim(sys);
  std::ostringstream out;
  telemetry::Writer w(&out);
  EXPECT_EQ(run_headless(sim, duration, w), kExitOk);
  return out.str();
}

std::vector<telemetry::Json> lines(const std::string& log) {
  std::istringstream in(log);
  return telemetry::read_log(in).records;
}

// Replies arrive before the tick that follows them is published.
void wait_for_next_tick(const Runner& r) {
  const auto start = r.snapshot()->ticks;
  while (r.snapshot()->ticks < start + 2) std::this_thread::sleep_for(std::chrono::milliseconds(2));
}

}  // namespace

TEST(Simulation, SixtySecondsAtTenHertzGivesSixHundredRecords) {
  const std::string log = headless_log(vectored(), 60.0);
  const auto records = lines(log);
  EXPECT_NEAR(static_cast<double>(records.size()), 600.0, 1.0);
  double last = -1.0;
  for (const auto& r : records) {
    EXPECT_GT(r["t"].get<double>(), last);
    last = r["t"].get<double>();
  }
  EXPECT_TRUE(records.back()["flags"]["final"].get<bool>());
  EXPECT_FALSE(records.front()["flags"]["final"].get<bool>());
}

TEST(Simulation, HeaderDescribesTheRun) {
  std::istringstream in(headless_log(vectored(), 1.0));
  const auto log = telemetry::read_log(in);
  EXPECT_EQ(log.header["schema_version"], telemetry::kSchemaVersion);
  EXPECT_EQ(log.header["vehicle"], "vectored");
  EXPECT_EQ(log.header["seed"], 7);
  EXPECT_EQ(log.header["thrusters"].size(), 4u);
  EXPECT_EQ(log.header["dofs"].size(), kDofCount);
}

TEST(Simulation, SameSeedGivesIdenticalBytes) {
  const System sys = vectored();
  EXPECT_EQ(headless_log(sys, 20.0), headless_log(sys, 20.0));
}

TEST(Simulation, NoiseSeedChangesOdometry) {
  System a = vectored(), b = vectored();
  a.runner.noise = b.runner.noise = NoiseConfig{0.05, 0.001, 0.01, 0.0};
  b.runner.seed = 8;
  EXPECT_NE(headless_log(a, 5.0), headless_log(b, 5.0));
}

TEST(Simulation, TrackKeepsLastTwentyOdometryPositions) {
  Simulation sim(vectored());
  std::vector<Vec3> all;
  for (int i = 0; i < 35; ++i) {
    const auto r = sim.tick();
    all.push_back(r.odom.position);
    EXPECT_EQ(sim.track().size(), std::min<std::size_t>(all.size(), kTrackLength));
  }
  for (std::size_t k = 0; k < kTrackLength; ++k) EXPECT_EQ(sim.track()[k], all[all.size() - kTrackLength + k]);
}

TEST(Simulation, RecordsAreFiniteAndCarryThrusters) {
  Simulation sim(vectored());
  for (int i = 0; i < 50; ++i) {
    const auto r = sim.tick();
    EXPECT_TRUE(telemetry::all_finite(r));
    EXPECT_TRUE(telemetry::all_finite(telemetry::to_json(r)));
    ASSERT_EQ(r.thrusters.size(), 4u);
    EXPECT_FALSE(r.thrusters[0].angle);
    EXPECT_TRUE(r.thrusters[2].angle);
    EXPECT_EQ(r.allocation_rows, 5);
    EXPECT_EQ(r.setpoint_sources[index(Dof::kYaw)], "path");
  }
}

TEST(Simulation, EventTransitionAppliesOnNextTick) {
  System sys = vectored();
  Simulation sim(sys);
  ASSERT_FALSE(sim.set_waypoints({Waypoint{LocalPoint{0, 0}, 0.5, std::nullopt, std::nullopt}}));
  const auto first = sim.tick();
  EXPECT_EQ(first.state, "survey");
  EXPECT_EQ(first.events, std::vector<std::string>{"mission_done"});
  const auto second = sim.tick();
  EXPECT_EQ(second.state, "idle");
  EXPECT_EQ(second.mode, "three_dof");
  EXPECT_EQ(second.allocation_rows, 3);
}

TEST(Simulation, OperatorTransitionsFollowFsmRules) {
  Simulation sim(vectored());
  EXPECT_EQ(sim.transition("idle").status, TransitionStatus::kOk);
  EXPECT_EQ(sim.transition("surface").status, TransitionStatus::kNotAllowed);
  EXPECT_EQ(sim.transition("mars").status, TransitionStatus::kUnknownState);
  EXPECT_EQ(sim.fsm().active().name, "idle");
}

TEST(Simulation, InvalidWaypointsAreRejectedWholesale) {
  Simulation sim(vectored());
  const auto before = sim.waypoints();
  std::vector<Waypoint> bad{Waypoint{LocalPoint{1, 1}, 2.0, std::nullopt, std::nullopt},
                            Waypoint{LocalPoint{2, 2}, std::nullopt, std::nullopt, std::nullopt}};
  const auto err = sim.set_waypoints(bad);
  ASSERT_TRUE(err);
  EXPECT_EQ(err->index, 1u);
  EXPECT_EQ(sim.waypoints(), before);
  std::vector<Waypoint> geo{Waypoint{GeoPoint{41, -70}, 2.0, std::nullopt, std::nullopt}};
  EXPECT_NE(sim.set_waypoints(geo)->reason.find("origin"), std::string::npos);
  EXPECT_TRUE(sim.set_waypoints({}));
}

TEST(Simulation, TeleopWithoutTeleopBehaviorIsIgnoredByGuidance) {
  Simulation sim(vectored());
  DofValues v;
  v.set(Dof::kYaw, 2.0);
  sim.set_teleop(v);
  const auto r = sim.tick();
  EXPECT_EQ(r.setpoint_sources[index(Dof::kYaw)], "path");
  ASSERT_EQ(sim.transition("teleop").status, TransitionStatus::kOk);
  sim.set_teleop(v);
  const auto t = sim.tick();
  EXPECT_EQ(t.setpoint_sources[index(Dof::kYaw)], "operator");
  EXPECT_DOUBLE_EQ(t.setpoint.at(Dof::kYaw), 2.0);
}

TEST(Simulation, PhysicsFaultEndsTheRun) {
  Simulation sim(vectored());
  sim.simulator().mutable_state().twist.linear.x() = std::nan("");
  std::ostringstream out;
  telemetry::Writer w(&out);
  EXPECT_EQ(run_headless(sim, 10.0, w), kExitFault);
  EXPECT_TRUE(sim.faulted());
  const auto records = lines(out.str());
  ASSERT_EQ(records.size(), 1u);
  EXPECT_TRUE(records[0]["flags"]["fault"].get<bool>());
  EXPECT_TRUE(records[0]["flags"]["final"].get<bool>());
  EXPECT_NE(records[0]["fault_reason"].get<std::string>().find("simulation aborted"), std::string::npos);
  EXPECT_THROW(sim.tick(), std::logic_error);
}

TEST(Runner, HeadlessDurationMatchesSimulation) {
  const System sys = vectored();
  std::ostringstream out;
  Runner r(sys, RunOptions{true, 20.0, 1.0}, &out);
  EXPECT_EQ(r.run(), kExitOk);
  EXPECT_EQ(out.str(), headless_log(sys, 20.0));
  EXPECT_EQ(r.submit(command::SetEnabled{false}).get().code, "NotRunning");
}

TEST(Runner, StopCommandFlagsFinalRecord) {
  std::ostringstream out;
  Runner r(vectored(), RunOptions{false, std::nullopt, 1.0}, &out);
  r.start();
  while (r.snapshot()->ticks < 3) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  const Reply reply = r.submit(command::Stop{}).get();
  EXPECT_EQ(reply.status, 202);
  EXPECT_EQ(r.wait(), kExitOk);
  const auto records = lines(out.str());
  ASSERT_FALSE(records.empty());
  EXPECT_TRUE(records.back()["flags"]["final"].get<bool>());
  for (std::size_t i = 0; i + 1 < records.size(); ++i) EXPECT_FALSE(records[i]["flags"]["final"].get<bool>());
  EXPECT_FALSE(r.snapshot()->running);
  EXPECT_TRUE(r.hub().closed());
}

TEST(Runner, CommandsApplyAtTickBoundaries) {
  Runner r(vectored(), RunOptions{false, std::nullopt, 5.0}, nullptr);
  r.start();
  EXPECT_EQ(r.submit(command::Transition{"surface"}).get().status, 200);
  wait_for_next_tick(r);
  EXPECT_EQ(r.snapshot()->state, "surface");
  const Reply not_allowed = r.submit(command::Transition{"surface_again"}).get();
  EXPECT_EQ(not_allowed.status, 404);
  EXPECT_EQ(not_allowed.code, "UnknownState");
  ASSERT_EQ(r.submit(command::Transition{"idle"}).get().status, 200);
  const Reply rejected = r.submit(command::Transition{"surface"}).get();
  EXPECT_EQ(rejected.status, 409);
  EXPECT_EQ(rejected.code, "TransitionNotAllowed");
  const Reply bad_wp = r.submit(command::SetWaypoints{{Waypoint{LocalPoint{0, 0}, std::nullopt, -1.0, std::nullopt}}}).get();
  EXPECT_EQ(bad_wp.status, 400);
  EXPECT_EQ(bad_wp.code, "InvalidWaypoint");
  EXPECT_EQ(bad_wp.index, 0u);
  EXPECT_EQ(r.submit(command::SetEnabled{false}).get().status, 200);
  wait_for_next_tick(r);
  EXPECT_FALSE(r.snapshot()->enabled);
  r.request_stop();
  EXPECT_EQ(r.wait(), kExitOk);
}

TEST(TelemetryHub, SequencesAndBacklog) {
  TelemetryHub hub(3);
  for (int i = 0; i < 5; ++i) hub.publish("l" + std::to_string(i));
  auto first = hub.next(0, std::chrono::milliseconds(1));
  ASSERT_TRUE(first);
  EXPECT_EQ(first->first, 2u);  // older lines fell out of the backlog
  EXPECT_EQ(hub.next(4, std::chrono::milliseconds(1))->second, "l4");
  EXPECT_FALSE(hub.next(5, std::chrono::milliseconds(1)));
  hub.close();
  EXPECT_TRUE(hub.closed());
  EXPECT_FALSE(hub.next(5, std::chrono::milliseconds(100)));
}
