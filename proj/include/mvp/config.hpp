#pragma once

// YAML configuration loading and validation: vehicle (plant, thrusters,
// control modes), FSM (states and behaviors), missions, and the runner file
// that ties them together. Every error names the file, line and field.

#include "mvp/allocation.hpp"
#include "mvp/control.hpp"
#include "mvp/dof.hpp"
#include "mvp/dynamics.hpp"
#include "mvp/frames.hpp"
#include "mvp/guidance.hpp"
#include "mvp/polynomial.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvp::config {

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { kParse, kValidation };

  ConfigError(Kind kind, std::string file, int line, std::string field, const std::string& message)
      : std::runtime_error(format(kind, file, line, field, message)),
        kind_(kind),
        file_(std::move(file)),
        line_(line),
        field_(std::move(field)),
        message_(message) {}

  Kind kind() const { return kind_; }
  const std::string& file() const { return file_; }
  int line() const { return line_; }  // 1-based, 0 when unknown
  const std::string& field() const { return field_; }
  const std::string& message() const { return message_; }

 private:
  static std::string format(Kind kind, const std::string& file, int line, const std::string& field,
                            const std::string& message) {
    std::ostringstream s;
    s << (kind == Kind::kParse ? "ParseError" : "ValidationError") << ": " << file;
    if (line > 0) s << ':' << line;
    if (!field.empty()) s << ": " << field;
    s << ": " << message;
    return s.str();
  }

  Kind kind_;
  std::string file_;
  int line_;
  std::string field_;
  std::string message_;
};

// ---------------------------------------------------------------------------
// Node access helpers

/// A YAML node together with its dotted path, for diagnostics.
class Field {
 public:
  Field(YAML::Node node, std::string path, const std::string* file)
      : node_(std::move(node)), path_(std::move(path)), file_(file) {}

  const YAML::Node& node() const { return node_; }
  const std::string& path() const { return path_; }
  int line() const {
    const auto m = node_.Mark();
    return m.line >= 0 ? m.line + 1 : 0;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(ConfigError::Kind::kValidation, *file_, line(), path_, message);
  }

  bool has(const std::string& key) const { return node_.IsMap() && node_[key]; }

  Field operator[](const std::string& key) const {
    if (!node_.IsMap()) fail("expected a mapping");
    const YAML::Node child = node_[key];
    if (!child) fail("missing field '" + key + "'");
    return {child, join(key), file_};
  }

  std::optional<Field> optional(const std::string& key) const {
    if (!node_.IsMap()) fail("expected a mapping");
    const YAML::Node child = node_[key];
    if (!child || child.IsNull()) return std::nullopt;
    return Field{child, join(key), file_};
  }

  /// The child if present; otherwise this node relabelled as `key`, so errors
  /// about defaulted fields still name them.
  Field child_or_here(const std::string& key) const {
    if (auto f = optional(key)) return *f;
    return Field{node_, join(key), file_};
  }

  Field at(std::size_t i) const { return {node_[i], path_ + "[" + std::to_string(i) + "]", file_}; }

  std::size_t size() const {
    if (!node_.IsSequence()) fail("expected a list");
    return node_.size();
  }

  void only_keys(std::initializer_list<std::string_view> allowed) const {
    if (!node_.IsMap()) fail("expected a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        Field(kv.first, join(key), file_).fail("unknown field");
    }
  }

  template <typename T>
  T as() const {
    try {
      return node_.as<T>();
    } catch (const YAML::Exception&) {
      fail("wrong type");
    }
  }

  double number() const {
    const double v = as<double>();
    if (!std::isfinite(v)) fail("must be finite");
    return v;
  }

  std::vector<double> numbers(std::optional<std::size_t> count = std::nullopt) const {
    if (!node_.IsSequence()) fail("expected a list of numbers");
    if (count && node_.size() != *count) fail("expected " + std::to_string(*count) + " numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < node_.size(); ++i) out.push_back(at(i).number());
    return out;
  }

  Vec3 vec3() const {
    const auto v = numbers(3);
    return {v[0], v[1], v[2]};
  }

  Vec6 vec6() const {
    const auto v = numbers(6);
    Vec6 out;
    for (int i = 0; i < 6; ++i) out(i) = v[static_cast<std::size_t>(i)];
    return out;
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
  const std::string* file_;
};

inline YAML::Node parse_yaml_text(const std::string& text, const std::string& file) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(ConfigError::Kind::kParse, file, e.mark.line >= 0 ? e.mark.line + 1 : 0, "", e.msg);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(ConfigError::Kind::kParse, path, 0, "", "cannot open file");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------
// Vehicle

struct VehicleConfig {
  std::string name;
  EarthFrame frame = EarthFrame::kEnu;
  VehicleParams params;
  ThrusterSet thrusters;
  std::vector<ControlMode> modes;

  const ControlMode* find_mode(const std::string& n) const {
    for (const auto& m : modes)
      if (m.name == n) return &m;
    return nullptr;
  }
};

inline EarthFrame parse_frame(const Field& f) {
  const auto s = f.as<std::string>();
  if (s == "enu" || s == "ENU") return EarthFrame::kEnu;
  if (s == "ned" || s == "NED") return EarthFrame::kNed;
  f.fail("expected 'enu' or 'ned'");
}

inline std::pair<double, double> parse_range(const Field& f) {
  const auto v = f.numbers(2);
  if (!(v[0] < v[1])) f.fail("expected [min, max] with min < max");
  return {v[0], v[1]};
}

inline void parse_thruster_common(const Field& f, ThrusterBase& t) {
  t.id = f["id"].as<std::string>();
  if (t.id.empty()) f["id"].fail("must not be empty");
  const Vec3 rpy = f["orientation"].vec3();
  t.mount = {Attitude::from_euler(rpy.x(), rpy.y(), rpy.z()), f["position"].vec3()};
  std::tie(t.force_min, t.force_max) = parse_range(f["force_limits"]);
  std::tie(t.command_min, t.command_max) = parse_range(f["command_limits"]);

  const Field poly = f["poly"];
  t.poly = poly.numbers();
  if (t.poly.size() < 2) poly.fail("needs at least two coefficients");
  if (!is_strictly_monotone(t.poly, t.command_min, t.command_max))
    poly.fail("polynomial is not strictly monotone on the command range");
  const double lo = std::min(command_to_force(t.poly, t.command_min), command_to_force(t.poly, t.command_max));
  const double hi = std::max(command_to_force(t.poly, t.command_min), command_to_force(t.poly, t.command_max));
  if (t.force_min < lo - 1e-9 || t.force_max > hi + 1e-9)
    f["force_limits"].fail("outside the force range the polynomial reaches on the command range");
}

inline PidGains parse_gains(const Field& f) {
  f.only_keys({"kp", "ki", "kd", "integral_limit", "output_limit"});
  PidGains g;
  g.kp = f["kp"].number();
  g.ki = f.has("ki") ? f["ki"].number() : 0.0;
  g.kd = f.has("kd") ? f["kd"].number() : 0.0;
  if (auto v = f.optional("integral_limit")) {
    g.integral_limit = v->number();
    if (g.integral_limit < 0.0) v->fail("must be >= 0");
  }
  if (auto v = f.optional("output_limit")) {
    g.output_limit = v->number();
    if (g.output_limit < 0.0) v->fail("must be >= 0");
  }
  return g;
}

inline ControlMode parse_mode(const Field& f) {
  f.only_keys({"name", "dofs", "gains"});
  ControlMode m;
  m.name = f["name"].as<std::string>();
  const Field dofs = f["dofs"];
  if (dofs.size() == 0) dofs.fail("a mode needs at least one DOF");
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    const Field d = dofs.at(i);
    const auto id = dof_from_name(d.as<std::string>());
    if (!id) d.fail("unknown DOF '" + d.as<std::string>() + "'");
    if (m.dofs[index(*id)]) d.fail("DOF listed twice");
    m.dofs.set(index(*id));
  }
  if (auto pair = redundant_pair(m.dofs)) dofs.fail("redundant DOF pair: " + *pair);

  const Field gains = f["gains"];
  if (!gains.node().IsMap()) gains.fail("expected a mapping of DOF to gains");
  DofMask seen;
  for (const auto& kv : gains.node()) {
    const auto key = kv.first.as<std::string>();
    const auto id = dof_from_name(key);
    if (!id) gains[key].fail("unknown DOF");
    if (!m.dofs[index(*id)]) gains[key].fail("gains given for a DOF the mode does not control");
    m.gains[index(*id)] = parse_gains(gains[key]);
    seen.set(index(*id));
  }
  if (seen != m.dofs) gains.fail("gains must be defined for exactly the mode's DOFs");
  return m;
}

inline VehicleParams parse_vehicle_params(const Field& f) {
  f.only_keys({"mass", "inertia", "added_mass", "linear_damping", "quadratic_damping", "center_of_gravity",
               "center_of_buoyancy", "buoyancy", "seabed_depth", "surface_taper_depth",
               "surface_buoyancy_fraction"});
  VehicleParams p;
  p.mass = f["mass"].number();
  if (!(p.mass > 0.0)) f["mass"].fail("must be > 0");
  p.inertia = f["inertia"].vec3();
  if (!(p.inertia.minCoeff() > 0.0)) f["inertia"].fail("must be > 0");
  if (auto v = f.optional("added_mass")) {
    p.added_mass = v->vec6();
    if (p.added_mass.minCoeff() < 0.0) v->fail("must be >= 0");
  }
  p.linear_damping = f["linear_damping"].vec6();
  if (p.linear_damping.minCoeff() < 0.0) f["linear_damping"].fail("must be >= 0");
  p.quadratic_damping = f["quadratic_damping"].vec6();
  if (p.quadratic_damping.minCoeff() < 0.0) f["quadratic_damping"].fail("must be >= 0");
  if (auto v = f.optional("center_of_gravity")) p.center_of_gravity = v->vec3();
  if (auto v = f.optional("center_of_buoyancy")) p.center_of_buoyancy = v->vec3();
  p.buoyancy = f["buoyancy"].number();
  if (p.buoyancy < 0.0) f["buoyancy"].fail("must be >= 0");
  p.seabed_depth = f["seabed_depth"].number();
  if (!(p.seabed_depth > 0.0)) f["seabed_depth"].fail("must be > 0");
  if (auto v = f.optional("surface_taper_depth")) {
    p.surface_taper_depth = v->number();
    if (p.surface_taper_depth < 0.0) v->fail("must be >= 0");
  }
  if (auto v = f.optional("surface_buoyancy_fraction")) {
    p.surface_buoyancy_fraction = v->number();
    if (p.surface_buoyancy_fraction < 0.0 || p.surface_buoyancy_fraction > 1.0) v->fail("must be in [0, 1]");
  }
  return p;
}

inline VehicleConfig parse_vehicle(const std::string& text, const std::string& file) {
  const YAML::Node root_node = parse_yaml_text(text, file);
  const Field root(root_node, "", &file);
  root.only_keys({"name", "earth_frame", "vehicle", "thrusters", "control_modes"});

  VehicleConfig v;
  v.name = root["name"].as<std::string>();
  v.frame = root.has("earth_frame") ? parse_frame(root["earth_frame"]) : EarthFrame::kEnu;
  v.params = parse_vehicle_params(root["vehicle"]);

  const Field thrusters = root["thrusters"];
  if (thrusters.size() == 0) thrusters.fail("at least one thruster is required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < thrusters.size(); ++i) {
    const Field t = thrusters.at(i);
    const auto type = t["type"].as<std::string>();
    if (type == "fixed") {
      t.only_keys({"id", "type", "position", "orientation", "force_limits", "poly", "command_limits"});
      FixedThruster f;
      parse_thruster_common(t, f);
      v.thrusters.fixed.push_back(std::move(f));
    } else if (type == "articulated") {
      t.only_keys({"id", "type", "position", "orientation", "force_limits", "poly", "command_limits",
                   "servo_rate", "angle_limits"});
      ArticulatedThruster a;
      parse_thruster_common(t, a);
      a.servo_rate = t["servo_rate"].number();
      if (!(a.servo_rate > 0.0)) t["servo_rate"].fail("must be > 0");
      std::tie(a.angle_min, a.angle_max) = parse_range(t["angle_limits"]);
      if (a.angle_min > 0.0 || a.angle_max < 0.0) t["angle_limits"].fail("must contain 0");
      if (a.force_max <= 0.0) t["force_limits"].fail("articulated thrusters need a positive force maximum");
      v.thrusters.articulated.push_back(std::move(a));
    } else {
      t["type"].fail("expected 'fixed' or 'articulated'");
    }
    if (!ids.insert(t["id"].as<std::string>()).second) t["id"].fail("duplicate thruster id");
  }

  const Field modes = root["control_modes"];
  if (modes.size() == 0) modes.fail("at least one control mode is required");
  for (std::size_t i = 0; i < modes.size(); ++i) {
    ControlMode m = parse_mode(modes.at(i));
    if (v.find_mode(m.name)) modes.at(i)["name"].fail("duplicate mode name");
    v.modes.push_back(std::move(m));
  }
  return v;
}

// ---------------------------------------------------------------------------
// FSM

struct BehaviorConfig {
  std::string id;
  std::string kind;
  int priority = 0;
  PathFollowingParams path;
  PeriodicSurfacingParams surfacing;
  TeleoperationParams teleop;
};

struct StateConfig {
  std::string name;
  std::string mode;
  std::vector<BehaviorConfig> behaviors;
  std::set<std::string> allowed_transitions;
  std::map<std::string, std::string> events;
};

struct FsmConfig {
  std::string initial_state;
  std::vector<StateConfig> states;
};

inline double positive(const Field& f) {
  const double v = f.number();
  if (!(v > 0.0)) f.fail("must be > 0");
  return v;
}

inline BehaviorConfig parse_behavior(const Field& f) {
  f.only_keys({"id", "kind", "priority", "params"});
  BehaviorConfig b;
  b.id = f["id"].as<std::string>();
  b.kind = f["kind"].as<std::string>();
  b.priority = f["priority"].as<int>();
  const auto params = f.optional("params");
  if (b.kind == "path_following") {
    if (params) {
      params->only_keys({"acceptance_radius", "lookahead", "cruise_speed"});
      if (auto v = params->optional("acceptance_radius")) b.path.acceptance_radius = positive(*v);
      if (auto v = params->optional("lookahead")) b.path.lookahead = positive(*v);
      if (auto v = params->optional("cruise_speed")) b.path.cruise_speed = positive(*v);
    }
  } else if (b.kind == "periodic_surfacing") {
    if (params) {
      params->only_keys({"interval", "surface_depth", "hold_time", "surface_threshold"});
      if (auto v = params->optional("interval")) b.surfacing.interval = positive(*v);
      if (auto v = params->optional("surface_depth")) b.surfacing.surface_depth = v->number();
      if (auto v = params->optional("hold_time")) {
        b.surfacing.hold_time = v->number();
        if (b.surfacing.hold_time < 0.0) v->fail("must be >= 0");
      }
      if (auto v = params->optional("surface_threshold")) b.surfacing.surface_threshold = positive(*v);
    }
  } else if (b.kind == "teleoperation") {
    if (params) {
      params->only_keys({"staleness_timeout"});
      if (auto v = params->optional("staleness_timeout")) b.teleop.staleness_timeout = positive(*v);
    }
  } else {
    f["kind"].fail("unknown behavior kind '" + b.kind + "'");
  }
  return b;
}

inline FsmConfig parse_fsm(const std::string& text, const std::string& file) {
  const YAML::Node root_node = parse_yaml_text(text, file);
  const Field root(root_node, "", &file);
  root.only_keys({"initial_state", "states"});

  FsmConfig c;
  c.initial_state = root["initial_state"].as<std::string>();
  const Field states = root["states"];
  if (states.size() == 0) states.fail("at least one state is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Field s = states.at(i);
    s.only_keys({"name", "mode", "behaviors", "allowed_transitions", "events"});
    StateConfig st;
    st.name = s["name"].as<std::string>();
    if (!names.insert(st.name).second) s["name"].fail("duplicate state name");
    st.mode = s["mode"].as<std::string>();

    if (auto bs = s.optional("behaviors")) {
      std::map<int, std::string> priorities;
      std::set<std::string> ids;
      for (std::size_t j = 0; j < bs->size(); ++j) {
        BehaviorConfig b = parse_behavior(bs->at(j));
        if (auto [it, fresh] = priorities.emplace(b.priority, b.id); !fresh)
          bs->at(j)["priority"].fail("duplicate priority " + std::to_string(b.priority) + " (also used by '" +
                                     it->second + "')");
        if (!ids.insert(b.id).second) bs->at(j)["id"].fail("duplicate behavior id within the state");
        st.behaviors.push_back(std::move(b));
      }
    }
    if (auto at = s.optional("allowed_transitions")) {
      for (std::size_t j = 0; j < at->size(); ++j) st.allowed_transitions.insert(at->at(j).as<std::string>());
    }
    if (auto ev = s.optional("events")) {
      if (!ev->node().IsMap()) ev->fail("expected a mapping of event to state");
      for (const auto& kv : ev->node()) st.events[kv.first.as<std::string>()] = kv.second.as<std::string>();
    }
    c.states.push_back(std::move(st));
  }

  // Cross references inside the FSM file.
  if (!names.contains(c.initial_state)) root["initial_state"].fail("no state named '" + c.initial_state + "'");
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& st = c.states[i];
    for (const auto& t : st.allowed_transitions)
      if (!names.contains(t)) states.at(i)["allowed_transitions"].fail("no state named '" + t + "'");
    for (const auto& [event, target] : st.events) {
      if (!names.contains(target)) states.at(i)["events"].fail("no state named '" + target + "'");
      if (target != st.name && !st.allowed_transitions.contains(target))
        states.at(i)["events"].fail("event '" + event + "' targets '" + target +
                                    "' which is not in allowed_transitions");
    }
  }
  return c;
}

/// Checks FSM references into the vehicle file.
inline void check_fsm_against_vehicle(const FsmConfig& fsm, const VehicleConfig& vehicle, const std::string& file) {
  for (std::size_t i = 0; i < fsm.states.size(); ++i)
    if (!vehicle.find_mode(fsm.states[i].mode))
      throw ConfigError(ConfigError::Kind::kValidation, file, 0, "states[" + std::to_string(i) + "].mode",
                        "no control mode named '" + fsm.states[i].mode + "' in vehicle '" + vehicle.name + "'");
}

inline std::unique_ptr<Behavior> make_behavior(const BehaviorConfig& b) {
  if (b.kind == "path_following") return std::make_unique<PathFollowing>(b.id, b.priority, b.path);
  if (b.kind == "periodic_surfacing") return std::make_unique<PeriodicSurfacing>(b.id, b.priority, b.surfacing);
  return std::make_unique<Teleoperation>(b.id, b.priority, b.teleop);
}

inline std::vector<FsmState> make_states(const FsmConfig& c) {
  std::vector<FsmState> out;
  for (const auto& s : c.states) {
    FsmState st;
    st.name = s.name;
    st.mode = s.mode;
    st.allowed_transitions = s.allowed_transitions;
    st.events = s.events;
    for (const auto& b : s.behaviors) st.behaviors.push_back(make_behavior(b));
    out.push_back(std::move(st));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mission

struct Mission {
  std::optional<GeoPoint> origin;
  std::vector<Waypoint> waypoints;
};

inline Waypoint parse_waypoint(const Field& f) {
  f.only_keys({"x", "y", "lat", "lon", "depth", "altitude", "speed"});
  Waypoint w;
  const bool local = f.has("x") || f.has("y");
  const bool geo = f.has("lat") || f.has("lon");
  if (local == geo) f.fail("give either x/y or lat/lon");
  if (local)
    w.position = LocalPoint{f["x"].number(), f["y"].number()};
  else
    w.position = GeoPoint{f["lat"].number(), f["lon"].number()};
  if (auto v = f.optional("depth")) w.depth = v->number();
  if (auto v = f.optional("altitude")) w.altitude = v->number();
  if (auto v = f.optional("speed")) w.speed = v->number();
  if (auto reason = validate_waypoint(w)) f.fail(*reason);
  return w;
}

inline Mission parse_mission_yaml(const std::string& text, const std::string& file) {
  const YAML::Node root_node = parse_yaml_text(text, file);
  const Field root(root_node, "", &file);
  root.only_keys({"origin", "waypoints"});
  Mission m;
  if (auto o = root.optional("origin")) {
    o->only_keys({"lat", "lon"});
    m.origin = GeoPoint{(*o)["lat"].number(), (*o)["lon"].number()};
  }
  const Field wps = root["waypoints"];
  if (wps.size() == 0) wps.fail("at least one waypoint is required");
  for (std::size_t i = 0; i < wps.size(); ++i) {
    m.waypoints.push_back(parse_waypoint(wps.at(i)));
    if (std::holds_alternative<GeoPoint>(m.waypoints.back().position) && !m.origin)
      wps.at(i).fail("lat/lon waypoints need a mission origin");
  }
  return m;
}

/// .kml files are read as a LineString; the first point becomes the origin.
inline Mission load_mission(const std::string& path, double default_depth = 2.0) {
  const std::string text = read_file(path);
  if (std::filesystem::path(path).extension() == ".kml") {
    Mission m;
    try {
      m.waypoints = parse_kml_linestring(text, default_depth);
    } catch (const MissionParseError& e) {
      throw ConfigError(ConfigError::Kind::kParse, path, 0, "coordinates", e.what());
    }
    m.origin = std::get<GeoPoint>(m.waypoints.front().position);
    return m;
  }
  return parse_mission_yaml(text, path);
}

// ---------------------------------------------------------------------------
// Runner

struct RunnerConfig {
  std::string vehicle;
  std::string fsm;
  std::optional<std::string> mission;
  double control_rate = 10.0;  // Hz
  double physics_rate = 100.0;
  std::optional<double> duration;  // s
  std::string log = "telemetry.jsonl";
  std::string bind = "127.0.0.1:8080";
  std::uint64_t seed = 0;
  NoiseConfig noise;
  Pose initial_pose;
  bool payload_power = false;
};

inline void validate_rates(const RunnerConfig& c, const Field& root) {
  auto at = [&](const std::string& key) { return root.child_or_here(key); };
  if (c.control_rate > c.physics_rate) at("control_rate").fail("must not exceed physics_rate");
  const double ratio = c.physics_rate / c.control_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    at("physics_rate").fail("must be an integer multiple of control_rate");
  if (1.0 / c.physics_rate > 0.1) at("physics_rate").fail("physics step must be at most 0.1 s");
}

/// Relative paths inside the runner file resolve against its directory.
inline RunnerConfig parse_runner(const std::string& text, const std::string& file) {
  const YAML::Node root_node = parse_yaml_text(text, file);
  const Field root(root_node, "", &file);
  root.only_keys({"vehicle", "fsm", "mission", "control_rate", "physics_rate", "duration", "log", "bind", "seed",
                  "noise", "initial_state", "payload_power"});
  const auto base = std::filesystem::path(file).parent_path();
  auto resolve_path = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return (fp.is_absolute() || base.empty() ? fp : base / fp).lexically_normal().string();
  };

  RunnerConfig c;
  c.vehicle = resolve_path(root["vehicle"].as<std::string>());
  c.fsm = resolve_path(root["fsm"].as<std::string>());
  if (auto v = root.optional("mission")) c.mission = resolve_path(v->as<std::string>());
  if (auto v = root.optional("control_rate")) c.control_rate = positive(*v);
  if (auto v = root.optional("physics_rate")) c.physics_rate = positive(*v);
  if (auto v = root.optional("duration")) c.duration = positive(*v);
  if (auto v = root.optional("log")) c.log = v->as<std::string>();
  if (auto v = root.optional("bind")) c.bind = v->as<std::string>();
  if (auto v = root.optional("seed")) c.seed = v->as<std::uint64_t>();
  if (auto v = root.optional("payload_power")) c.payload_power = v->as<bool>();
  if (auto n = root.optional("noise")) {
    n->only_keys({"drift_fraction", "attitude_sigma", "depth_sigma", "velocity_sigma"});
    auto nonneg = [](const Field& f) {
      const double v = f.number();
      if (v < 0.0) f.fail("must be >= 0");
      return v;
    };
    if (auto v = n->optional("drift_fraction")) c.noise.drift_fraction = nonneg(*v);
    if (auto v = n->optional("attitude_sigma")) c.noise.attitude_sigma = nonneg(*v);
    if (auto v = n->optional("depth_sigma")) c.noise.depth_sigma = nonneg(*v);
    if (auto v = n->optional("velocity_sigma")) c.noise.velocity_sigma = nonneg(*v);
  }
  if (auto s = root.optional("initial_state")) {
    s->only_keys({"position", "orientation"});
    if (auto p = s->optional("position")) c.initial_pose.position = p->vec3();
    if (auto o = s->optional("orientation")) {
      const Vec3 rpy = o->vec3();
      c.initial_pose.attitude = Attitude::from_euler(rpy.x(), rpy.y(), rpy.z());
    }
  }
  validate_rates(c, root);
  return c;
}


}  // namespace mvp::config
