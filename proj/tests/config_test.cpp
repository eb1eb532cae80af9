#include "mvp/config.hpp"
#include "mvp/runner.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace mvp;
using namespace mvp::config;
using testing_support::config_path;

namespace {

std::string slurp(const std::string& path) { return read_file(path); }

// Runs `fn`, expects a ConfigError and returns it.
template <typename Fn>
ConfigError expect_error(Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no ConfigError thrown";
  return ConfigError(ConfigError::Kind::kParse, "", 0, "", "");
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  if (at != std::string::npos) s.replace(at, from.size(), to);
  return s;
}

int line_of(const std::string& text, const std::string& needle) {
  const auto at = text.find(needle);
  return static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(at), '\n')) + 1;
}

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("mvp_config_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = (path_ / name).string();
    std::ofstream(p) << text;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace

TEST(Vehicle, StockVectoredHasSixAllocationColumns) {
  const auto v = parse_vehicle(slurp(config_path("vectored.yaml")), "vectored.yaml");
  EXPECT_EQ(v.name, "vectored");
  EXPECT_EQ(v.thrusters.fixed.size(), 2u);
  EXPECT_EQ(v.thrusters.articulated.size(), 2u);
  EXPECT_EQ(v.thrusters.columns(), 6);
  ASSERT_NE(v.find_mode("five_dof"), nullptr);
  EXPECT_EQ(v.find_mode("five_dof")->dofs.count(), 5u);
  EXPECT_EQ(v.find_mode("attitude_depth")->dofs.count(), 4u);
  EXPECT_EQ(v.find_mode("three_dof")->dofs.count(), 3u);
}

TEST(Vehicle, StockSurveyHasFourFixedThrusters) {
  const auto v = parse_vehicle(slurp(config_path("survey.yaml")), "survey.yaml");
  EXPECT_EQ(v.thrusters.fixed.size(), 4u);
  EXPECT_TRUE(v.thrusters.articulated.empty());
}

TEST(Vehicle, NonMonotonePolynomialIsRejectedWithLine) {
  const std::string text = slurp(std::string(MVP_TEST_DATA_DIR) + "/bad_poly_vehicle.yaml");
  const auto e = expect_error([&] { parse_vehicle(text, "bad.yaml"); });
  EXPECT_EQ(e.kind(), ConfigError::Kind::kValidation);
  EXPECT_EQ(e.field(), "thrusters[2].poly");
  EXPECT_EQ(e.line(), line_of(text, "[0.0, 1.0, -5.0]"));
  EXPECT_NE(std::string(e.what()).find("ValidationError: bad.yaml:"), std::string::npos);
  EXPECT_NE(e.message().find("monotone"), std::string::npos);
}

TEST(Vehicle, ForceLimitsMustBeReachable) {
  const std::string text = replace(slurp(config_path("vectored.yaml")), "force_limits: [0.0, 40.0]",
                                   "force_limits: [0.0, 45.0]");
  const auto e = expect_error([&] { parse_vehicle(text, "v.yaml"); });
  EXPECT_EQ(e.field(), "thrusters[2].force_limits");
}

TEST(Vehicle, GainsMustCoverExactlyTheModeDofs) {
  const std::string base = slurp(config_path("vectored.yaml"));
  const std::string missing = replace(base, "      roll: {kp: 5.0, ki: 0.0, kd: 1.0, output_limit: 10.0}\n", "");
  EXPECT_EQ(expect_error([&] { parse_vehicle(missing, "v.yaml"); }).field(), "control_modes[0].gains");
  const std::string extra = replace(base, "    dofs: [depth, pitch, yaw]\n    gains:\n",
                                    "    dofs: [depth, pitch, yaw]\n    gains:\n      surge: {kp: 1.0}\n");
  EXPECT_EQ(expect_error([&] { parse_vehicle(extra, "v.yaml"); }).field(), "control_modes[2].gains.surge");
}

TEST(Vehicle, RedundantDofPairIsRejected) {
  const std::string text =
      replace(slurp(config_path("vectored.yaml")), "dofs: [depth, pitch, yaw]", "dofs: [depth, pitch, yaw, yaw_rate]");
  const auto e = expect_error([&] { parse_vehicle(text, "v.yaml"); });
  EXPECT_NE(e.message().find("yaw_rate and yaw"), std::string::npos);
}

TEST(Vehicle, UnknownFieldAndMalformedYaml) {
  const std::string base = slurp(config_path("vectored.yaml"));
  const auto unknown = expect_error([&] { parse_vehicle(replace(base, "  mass: 30.0", "  mass: 30.0\n  colour: red"), "v.yaml"); });
  EXPECT_EQ(unknown.field(), "vehicle.colour");
  EXPECT_EQ(unknown.line(), line_of(base, "  mass: 30.0") + 1);

  const auto parse = expect_error([&] { parse_vehicle("name: x\nthrusters: [1, 2\n", "p.yaml"); });
  EXPECT_EQ(parse.kind(), ConfigError::Kind::kParse);
  EXPECT_GT(parse.line(), 0);
  EXPECT_EQ(std::string(parse.what()).rfind("ParseError: p.yaml:", 0), 0u);
}

TEST(Fsm, StockConfigsParse) {
  const auto f = parse_fsm(slurp(config_path("vectored_fsm.yaml")), "f.yaml");
  EXPECT_EQ(f.initial_state, "survey");
  EXPECT_EQ(f.states.size(), 4u);
  EXPECT_EQ(f.states[0].behaviors.size(), 2u);
  EXPECT_EQ(f.states[0].events.at("mission_done"), "idle");
  EXPECT_NO_THROW(parse_fsm(slurp(config_path("survey_fsm.yaml")), "s.yaml"));
}

TEST(Fsm, DuplicatePriorityIsRejected) {
  const std::string text = replace(slurp(config_path("vectored_fsm.yaml")), "        priority: 2\n",
                                   "        priority: 1\n");
  const auto e = expect_error([&] { parse_fsm(text, "f.yaml"); });
  EXPECT_EQ(e.kind(), ConfigError::Kind::kValidation);
  EXPECT_NE(e.message().find("duplicate priority 1"), std::string::npos);
  EXPECT_NE(e.message().find("'path'"), std::string::npos);
  EXPECT_EQ(e.field(), "states[0].behaviors[1].priority");
  const auto surfacing = text.find("id: surfacing\n");
  const auto at = text.find("priority: 1", surfacing);
  EXPECT_EQ(e.line(), static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(at), '\n')) + 1);
}

TEST(Fsm, CrossReferencesAreChecked) {
  const std::string base = slurp(config_path("vectored_fsm.yaml"));
  EXPECT_EQ(expect_error([&] { parse_fsm(replace(base, "initial_state: survey", "initial_state: lost"), "f"); }).field(),
            "initial_state");
  const auto ev = expect_error(
      [&] { parse_fsm(replace(base, "events: {mission_done: idle}", "events: {mission_done: surface, x: nowhere}"), "f"); });
  EXPECT_EQ(ev.field(), "states[0].events");
  const auto not_allowed = expect_error([&] {
    parse_fsm(replace(base, "allowed_transitions: [survey, teleop]\n", "allowed_transitions: [survey]\n    events: {e: teleop}\n"),
              "f");
  });
  EXPECT_NE(not_allowed.message().find("not in allowed_transitions"), std::string::npos);
  const auto kind = expect_error([&] { parse_fsm(replace(base, "kind: teleoperation", "kind: dance"), "f"); });
  EXPECT_EQ(kind.field(), "states[2].behaviors[0].kind");
}

TEST(Fsm, ModesMustExistInVehicle) {
  const auto v = parse_vehicle(slurp(config_path("vectored.yaml")), "v");
  auto f = parse_fsm(slurp(config_path("vectored_fsm.yaml")), "f");
  EXPECT_NO_THROW(check_fsm_against_vehicle(f, v, "f"));
  f.states[1].mode = "warp";
  EXPECT_EQ(expect_error([&] { check_fsm_against_vehicle(f, v, "f"); }).field(), "states[1].mode");
}

TEST(Mission, YamlWaypointsAndOrigin) {
  const auto m = load_mission(config_path("five_waypoints.yaml"));
  ASSERT_EQ(m.waypoints.size(), 5u);
  EXPECT_EQ(m.waypoints[1].depth, 4.0);
  EXPECT_FALSE(m.origin);

  const auto geo = parse_mission_yaml("origin: {lat: 41.5, lon: -70.6}\nwaypoints:\n  - {lat: 41.501, lon: -70.6, altitude: 2}\n", "m");
  EXPECT_TRUE(geo.origin);
  const auto e = expect_error([] { parse_mission_yaml("waypoints:\n  - {lat: 41.5, lon: -70.6, depth: 2}\n", "m"); });
  EXPECT_EQ(e.field(), "waypoints[0]");
  const auto both = expect_error([] { parse_mission_yaml("waypoints:\n  - {x: 1, y: 2, depth: 2, altitude: 1}\n", "m"); });
  EXPECT_NE(both.message().find("exactly one"), std::string::npos);
}

TEST(Mission, KmlUsesFirstPointAsOrigin) {
  const auto m = load_mission(config_path("example.kml"), 3.0);
  ASSERT_EQ(m.waypoints.size(), 5u);
  ASSERT_TRUE(m.origin);
  EXPECT_EQ(std::get<GeoPoint>(m.waypoints[0].position).lat, m.origin->lat);
}

TEST(Runner, RatesAreValidated) {
  const std::string base = "vehicle: v.yaml\nfsm: f.yaml\n";
  EXPECT_EQ(expect_error([&] { parse_runner(base + "control_rate: 200\n", "r"); }).field(), "control_rate");
  EXPECT_EQ(expect_error([&] { parse_runner(base + "control_rate: 30\n", "r"); }).field(), "physics_rate");
  EXPECT_EQ(expect_error([&] { parse_runner(base + "physics_rate: 5\ncontrol_rate: 5\n", "r"); }).field(),
            "physics_rate");
  EXPECT_EQ(expect_error([&] { parse_runner(base + "control_rate: -1\n", "r"); }).field(), "control_rate");
  EXPECT_NO_THROW(parse_runner(base + "control_rate: 20\nphysics_rate: 200\n", "r"));
}

TEST(Runner, RelativePathsResolveAgainstRunnerFile) {
  const auto r = parse_runner("vehicle: v.yaml\nfsm: /abs/f.yaml\nmission: ../m.yaml\n", "/cfg/sub/run.yaml");
  EXPECT_EQ(r.vehicle, "/cfg/sub/v.yaml");
  EXPECT_EQ(r.fsm, "/abs/f.yaml");
  EXPECT_EQ(*r.mission, "/cfg/m.yaml");
}

TEST(Runner, NoiseAndInitialState) {
  const auto r = parse_runner(
      "vehicle: v\nfsm: f\nnoise: {drift_fraction: 0.05}\ninitial_state: {position: [1, 2, -3], orientation: [0, 0, 1.0]}\n",
      "r");
  EXPECT_DOUBLE_EQ(r.noise.drift_fraction, 0.05);
  EXPECT_EQ(r.initial_pose.position, Vec3(1, 2, -3));
  EXPECT_NEAR(r.initial_pose.attitude.yaw(), 1.0, 1e-12);
  EXPECT_EQ(expect_error([] { parse_runner("vehicle: v\nfsm: f\nnoise: {drift_fraction: -1}\n", "r"); }).field(),
            "noise.drift_fraction");
}

TEST(LoadAndValidate, StockRunnerFilesCompose) {
  const auto sys = runner::load_and_validate(config_path("vectored_mission.yaml"));
  EXPECT_EQ(sys.vehicle.thrusters.columns(), 6);
  ASSERT_TRUE(sys.mission);
  EXPECT_EQ(sys.mission->waypoints.size(), 5u);
  EXPECT_EQ(sys.runner.seed, 7u);
  runner::Overrides o;
  o.duration = 12.0;
  const auto survey = runner::load_and_validate(config_path("survey_transect.yaml"), o);
  EXPECT_EQ(survey.runner.duration, 12.0);
}

TEST(LoadAndValidate, ErrorsNameTheOffendingFile) {
  TempDir dir;
  const std::string fsm = replace(slurp(config_path("vectored_fsm.yaml")), "        priority: 2\n", "        priority: 1\n");
  dir.write("v.yaml", slurp(config_path("vectored.yaml")));
  const auto f = dir.write("f.yaml", fsm);
  const auto r = dir.write("r.yaml", "vehicle: v.yaml\nfsm: f.yaml\n");
  const auto e = expect_error([&] { runner::load_and_validate(r); });
  EXPECT_EQ(e.file(), f);
  EXPECT_NE(e.message().find("duplicate priority"), std::string::npos);

  const auto missing = dir.write("r2.yaml", "vehicle: nope.yaml\nfsm: f.yaml\n");
  EXPECT_EQ(expect_error([&] { runner::load_and_validate(missing); }).kind(), ConfigError::Kind::kParse);
}
