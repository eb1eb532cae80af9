#pragma once

// Telemetry records: one per control tick, written as JSON lines after a
// header line. The header carries the schema version.

#include "mvp/control.hpp"
#include "mvp/dof.hpp"
#include "mvp/frames.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mvp::telemetry {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct Kinematics {
  Vec3 position = Vec3::Zero();
  Vec3 euler = Vec3::Zero();
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();
  double depth = 0.0;
  double altitude = 0.0;
};

struct ThrusterRecord {
  std::string id;
  double force = 0.0;
  double command = 0.0;
  std::optional<double> angle;          // true servo angle, articulated only
  std::optional<double> angle_command;  // commanded servo angle
  bool saturated = false;
};

struct Flags {
  bool saturation = false;
  bool gimbal = false;
  bool fault = false;
  bool final = false;
};

struct Record {
  std::uint64_t tick = 0;
  double time = 0.0;
  std::string state;
  std::string mode;
  bool enabled = true;
  Kinematics truth;
  Kinematics odom;
  DofValues setpoint;
  std::array<std::string, kDofCount> setpoint_sources{};
  DofValues errors;
  DofValues tau_star;
  DofValues integrals;
  Eigen::Index allocation_rows = 0;
  std::vector<ThrusterRecord> thrusters;
  double residual = 0.0;
  std::optional<std::size_t> waypoint_index;
  std::vector<std::string> events;
  std::vector<std::string> guidance_errors;
  Flags flags;
  std::string fault_reason;
};

inline Kinematics kinematics(const Pose& pose, const Twist& twist, EarthFrame frame, double seabed_depth) {
  Kinematics k;
  k.position = pose.position;
  k.euler = pose.attitude.euler();
  k.linear = twist.linear;
  k.angular = twist.angular;
  k.depth = depth_of(pose.position, frame);
  k.altitude = seabed_depth - k.depth;
  return k;
}

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json dof_json(const DofValues& v) {
  Json j = Json::object();
  v.for_each([&](Dof d, double x) { j[std::string(dof_name(d))] = x; });
  return j;
}

inline Json to_json(const Kinematics& k) {
  return Json{{"position", vec_json(k.position)}, {"euler", vec_json(k.euler)},    {"linear", vec_json(k.linear)},
              {"angular", vec_json(k.angular)},   {"depth", k.depth},              {"altitude", k.altitude}};
}

inline Json to_json(const Record& r) {
  Json thrusters = Json::array();
  for (const auto& t : r.thrusters) {
    Json j{{"id", t.id}, {"force", t.force}, {"command", t.command}};
    if (t.angle) j["angle"] = *t.angle;
    if (t.angle_command) j["angle_command"] = *t.angle_command;
    j["saturated"] = t.saturated;
    thrusters.push_back(std::move(j));
  }
  Json sources = Json::object();
  r.setpoint.for_each([&](Dof d, double) { sources[std::string(dof_name(d))] = r.setpoint_sources[index(d)]; });

  Json j;
  j["type"] = "tick";
  j["tick"] = r.tick;
  j["t"] = r.time;
  j["state"] = r.state;
  j["mode"] = r.mode;
  j["enabled"] = r.enabled;
  j["truth"] = to_json(r.truth);
  j["odom"] = to_json(r.odom);
  j["setpoint"] = dof_json(r.setpoint);
  j["setpoint_sources"] = std::move(sources);
  j["errors"] = dof_json(r.errors);
  j["tau_star"] = dof_json(r.tau_star);
  j["integrals"] = dof_json(r.integrals);
  j["allocation_rows"] = r.allocation_rows;
  j["thrusters"] = std::move(thrusters);
  j["residual"] = r.residual;
  j["waypoint_index"] = r.waypoint_index ? Json(*r.waypoint_index) : Json(nullptr);
  j["events"] = r.events;
  j["guidance_errors"] = r.guidance_errors;
  j["flags"] = {{"saturation", r.flags.saturation},
                {"gimbal", r.flags.gimbal},
                {"fault", r.flags.fault},
                {"final", r.flags.final}};
  if (!r.fault_reason.empty()) j["fault_reason"] = r.fault_reason;
  return j;
}

/// True when every number in the record is finite.
inline bool all_finite(const Record& r) {
  bool ok = std::isfinite(r.time) && std::isfinite(r.residual);
  for (const Kinematics* k : {&r.truth, &r.odom})
    ok = ok && k->position.allFinite() && k->euler.allFinite() && k->linear.allFinite() &&
         k->angular.allFinite() && std::isfinite(k->depth) && std::isfinite(k->altitude);
  for (const DofValues* v : {&r.setpoint, &r.errors, &r.tau_star, &r.integrals})
    v->for_each([&](Dof, double x) { ok = ok && std::isfinite(x); });
  for (const auto& t : r.thrusters)
    ok = ok && std::isfinite(t.force) && std::isfinite(t.command) && (!t.angle || std::isfinite(*t.angle)) &&
         (!t.angle_command || std::isfinite(*t.angle_command));
  return ok;
}

/// Same check on a serialized record: non-finite doubles serialize as null,
/// so any null outside the optional waypoint index is a failure.
inline bool all_finite(const Json& j, const std::string& key = "") {
  if (j.is_null()) return key == "waypoint_index";
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!all_finite(it.value(), it.key())) return false;
  } else if (j.is_array()) {
    for (const auto& e : j)
      if (!all_finite(e, key)) return false;
  }
  return true;
}

struct Header {
  std::string vehicle;
  std::string earth_frame;
  double control_rate = 0.0;
  double physics_rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> thrusters;
  std::vector<std::string> articulated;
  std::vector<std::string> states;
};

inline Json to_json(const Header& h) {
  Json j;
  j["type"] = "header";
  j["schema_version"] = kSchemaVersion;
  j["vehicle"] = h.vehicle;
  j["earth_frame"] = h.earth_frame;
  j["control_rate"] = h.control_rate;
  j["physics_rate"] = h.physics_rate;
  j["seed"] = h.seed;
  j["thrusters"] = h.thrusters;
  j["articulated"] = h.articulated;
  j["states"] = h.states;
  j["dofs"] = Json::array();
  for (auto n : kDofNames) j["dofs"].push_back(std::string(n));
  return j;
}

/// Writes the header and one line per record. A null stream discards output.
class Writer {
 public:
  Writer() = default;
  explicit Writer(std::ostream* out) : out_(out) {}

  void header(const Header& h) { line(to_json(h)); }
  void record(const Record& r) { line(to_json(r)); }
  void line(const Json& j) { line(j.dump()); }
  void line(const std::string& text) {
    if (out_ == nullptr) return;
    *out_ << text << '\n';
  }
  void flush() {
    if (out_ != nullptr) out_->flush();
  }

 private:
  std::ostream* out_ = nullptr;
};

/// Parses a telemetry log; returns the header and the tick records.
struct Log {
  Json header;
  std::vector<Json> records;
};

inline Log read_log(std::istream& in) {
  Log log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    const auto type = j.value("type", "");
    if (type == "header") {
      if (j.value("schema_version", 0) != kSchemaVersion)
        throw std::runtime_error("unsupported telemetry schema version");
      log.header = std::move(j);
    } else {
      log.records.push_back(std::move(j));
    }
  }
  if (log.header.is_null()) throw std::runtime_error("telemetry log has no header");
  return log;
}

}  // namespace mvp::telemetry
