#pragma once

// Guidance: behaviors produce prioritized setpoint claims, arbitration merges
// them per DOF, and a finite-state machine decides which behaviors (and which
// control mode) are active.

#include "mvp/dof.hpp"
#include "mvp/frames.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace mvp {

// ---------------------------------------------------------------------------
// Claims and arbitration

struct SetpointClaim {
  DofValues values;
  int priority = 0;
  std::string source;
};

struct Arbitration {
  DofValues setpoint;
  std::array<std::string, kDofCount> winner{};  // source id per claimed DOF
};

/// Per-DOF merge: the highest-priority claimant of each DOF wins. Ties (which
/// validated configs never produce) fall back to source id, then value, so
/// the result never depends on claim order.
inline Arbitration arbitrate_detailed(std::span<const SetpointClaim> claims) {
  Arbitration out;
  std::array<const SetpointClaim*, kDofCount> best{};
  for (const auto& c : claims) {
    c.values.for_each([&](Dof d, double v) {
      const SetpointClaim*& b = best[index(d)];
      if (b == nullptr) {
        b = &c;
        return;
      }
      const double bv = b->values.at(d);
      if (c.priority != b->priority ? c.priority > b->priority
                                    : (c.source != b->source ? c.source < b->source : v < bv))
        b = &c;
    });
  }
  for (Dof d : kAllDofs) {
    if (const SetpointClaim* b = best[index(d)]) {
      out.setpoint.set(d, b->values.at(d));
      out.winner[index(d)] = b->source;
    }
  }
  return out;
}

inline DofValues arbitrate(std::span<const SetpointClaim> claims) {
  return arbitrate_detailed(claims).setpoint;
}

// ---------------------------------------------------------------------------
// Waypoints and missions

struct LocalPoint {
  double x = 0.0;
  double y = 0.0;
};

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;
};

struct Waypoint {
  std::variant<LocalPoint, GeoPoint> position;
  std::optional<double> depth;     // m, positive down
  std::optional<double> altitude;  // m above seabed
  std::optional<double> speed;     // m/s

  bool operator==(const Waypoint& o) const {
    auto same_pos = [&] {
      if (position.index() != o.position.index()) return false;
      if (const auto* a = std::get_if<LocalPoint>(&position)) {
        const auto& b = std::get<LocalPoint>(o.position);
        return a->x == b.x && a->y == b.y;
      }
      const auto& a = std::get<GeoPoint>(position);
      const auto& b = std::get<GeoPoint>(o.position);
      return a.lat == b.lat && a.lon == b.lon;
    };
    return same_pos() && depth == o.depth && altitude == o.altitude && speed == o.speed;
  }
};

/// Empty when valid, otherwise the reason.
inline std::optional<std::string> validate_waypoint(const Waypoint& w) {
  if (w.depth.has_value() == w.altitude.has_value()) return "exactly one of depth or altitude must be set";
  if (w.depth && !std::isfinite(*w.depth)) return "depth must be finite";
  if (w.altitude && !(std::isfinite(*w.altitude) && *w.altitude >= 0.0)) return "altitude must be >= 0";
  if (w.speed && !(*w.speed > 0.0)) return "speed must be > 0";
  if (const auto* p = std::get_if<LocalPoint>(&w.position)) {
    if (!std::isfinite(p->x) || !std::isfinite(p->y)) return "position must be finite";
  } else {
    const auto& g = std::get<GeoPoint>(w.position);
    if (!(std::abs(g.lat) <= 90.0) || !(std::abs(g.lon) <= 180.0)) return "lat/lon out of range";
  }
  return std::nullopt;
}

/// What is needed to turn a Waypoint into local-frame coordinates.
struct MissionFrame {
  EarthFrame frame = EarthFrame::kEnu;
  double seabed_depth = 10.0;
  GeoPoint origin;
};

struct ResolvedWaypoint {
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();  // earth-frame horizontal position
  double depth = 0.0;
  std::optional<double> speed;
};

inline constexpr double kEarthRadius = 6378137.0;

/// Flat-earth tangent-plane conversion about the mission origin.
inline Eigen::Vector2d geo_to_local(const GeoPoint& g, const MissionFrame& mf) {
  const double deg = kPi / 180.0;
  const double north = (g.lat - mf.origin.lat) * deg * kEarthRadius;
  const double east = (g.lon - mf.origin.lon) * deg * kEarthRadius * std::cos(mf.origin.lat * deg);
  return mf.frame == EarthFrame::kEnu ? Eigen::Vector2d(east, north) : Eigen::Vector2d(north, east);
}

inline ResolvedWaypoint resolve(const Waypoint& w, const MissionFrame& mf) {
  ResolvedWaypoint r;
  if (const auto* p = std::get_if<LocalPoint>(&w.position))
    r.xy = {p->x, p->y};
  else
    r.xy = geo_to_local(std::get<GeoPoint>(w.position), mf);
  r.depth = w.depth ? *w.depth : mf.seabed_depth - *w.altitude;
  r.speed = w.speed;
  return r;
}

inline std::vector<ResolvedWaypoint> resolve(std::span<const Waypoint> ws, const MissionFrame& mf) {
  std::vector<ResolvedWaypoint> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back(resolve(w, mf));
  return out;
}

class MissionParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads the coordinates of the first LineString in a KML document.
/// Each tuple is lon,lat[,alt]; alt is taken as altitude above seabed, and
/// tuples without it get `default_depth`.
inline std::vector<Waypoint> parse_kml_linestring(std::string_view kml, double default_depth) {
  const auto ls = kml.find("<LineString");
  if (ls == std::string_view::npos) throw MissionParseError("KML has no LineString");
  const auto open = kml.find("<coordinates>", ls);
  const auto close = kml.find("</coordinates>", ls);
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    throw MissionParseError("LineString has no <coordinates> element");
  const std::string body(kml.substr(open + 13, close - open - 13));

  std::vector<Waypoint> out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    while (pos < body.size() && std::isspace(static_cast<unsigned char>(body[pos]))) ++pos;
    if (pos >= body.size()) break;
    std::size_t end = pos;
    while (end < body.size() && !std::isspace(static_cast<unsigned char>(body[end]))) ++end;
    const std::string tuple = body.substr(pos, end - pos);
    pos = end;

    std::vector<double> parts;
    std::size_t start = 0;
    while (start <= tuple.size()) {
      const auto comma = tuple.find(',', start);
      const std::string field = tuple.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      try {
        std::size_t used = 0;
        parts.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw MissionParseError("bad KML coordinate tuple '" + tuple + "'");
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (parts.size() < 2 || parts.size() > 3) throw MissionParseError("bad KML coordinate tuple '" + tuple + "'");

    Waypoint w;
    w.position = GeoPoint{parts[1], parts[0]};
    if (parts.size() == 3)
      w.altitude = parts[2];
    else
      w.depth = default_depth;
    out.push_back(w);
  }
  if (out.empty()) throw MissionParseError("LineString has no coordinates");
  return out;
}

// ---------------------------------------------------------------------------
// Behaviors

struct TeleopInput {
  double value = 0.0;
  double stamp = 0.0;  // sim time the operator set it
};

using TeleopInputs = std::array<std::optional<TeleopInput>, kDofCount>;

struct BehaviorContext {
  const Odometry& odom;
  double time = 0.0;
  EarthFrame frame = EarthFrame::kEnu;
  const TeleopInputs* teleop = nullptr;
};

class EmptyPath : public std::runtime_error {
 public:
  EmptyPath() : std::runtime_error("path following has no waypoints") {}
};

class Behavior {
 public:
  Behavior(std::string id, int priority) : id_(std::move(id)), priority_(priority) {}
  virtual ~Behavior() = default;

  virtual std::string_view kind() const = 0;
  /// Synchronous; may only mutate the behavior's own timers and progress.
  virtual std::optional<SetpointClaim> evaluate(const BehaviorContext& ctx) = 0;

  const std::string& id() const { return id_; }
  int priority() const { return priority_; }
  std::vector<std::string> take_events() { return std::exchange(events_, {}); }

 protected:
  SetpointClaim claim(DofValues v) const { return {std::move(v), priority_, id_}; }
  void emit(std::string event) { events_.push_back(std::move(event)); }

 private:
  std::string id_;
  int priority_;
  std::vector<std::string> events_;
};

struct PathFollowingParams {
  double acceptance_radius = 2.0;
  double lookahead = 5.0;
  double cruise_speed = 0.5;
};

struct WaypointAcceptance {
  std::size_t index = 0;
  double time = 0.0;
  double distance = 0.0;
};

/// Lookahead line-of-sight guidance along straight segments between
/// waypoints. Claims yaw, depth and surge.
class PathFollowing : public Behavior {
 public:
  PathFollowing(std::string id, int priority, PathFollowingParams params)
      : Behavior(std::move(id), priority), params_(params) {}

  std::string_view kind() const override { return "path_following"; }
  const PathFollowingParams& params() const { return params_; }

  /// Replaces the mission. With `restart_nearest`, tracking resumes on the
  /// segment nearest to the vehicle at the next evaluation; otherwise from the
  /// first waypoint.
  void set_mission(std::vector<ResolvedWaypoint> waypoints, bool restart_nearest) {
    waypoints_ = std::move(waypoints);
    index_ = 0;
    done_ = false;
    started_ = false;
    pending_restart_ = restart_nearest;
    accepted_.clear();
  }

  std::size_t active_index() const { return index_; }
  bool complete() const { return done_; }
  const std::vector<ResolvedWaypoint>& waypoints() const { return waypoints_; }
  const std::vector<WaypointAcceptance>& accepted() const { return accepted_; }

  struct SegmentPoint {
    Eigen::Vector2d xy;
    double depth;
  };

  /// Geometry of the active segment relative to the vehicle.
  struct Track {
    double bearing = 0.0;
    double along = 0.0;
    double cross = 0.0;  // positive to the left of the track (for ENU)
    double length = 0.0;
  };

  static Track track_geometry(const SegmentPoint& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
    Track t;
    const Eigen::Vector2d d = b - a.xy;
    t.length = d.norm();
    if (t.length < 1e-9) {
      const Eigen::Vector2d to = b - p;
      t.bearing = std::atan2(to.y(), to.x());
      return t;
    }
    const Eigen::Vector2d u = d / t.length;
    const Eigen::Vector2d rel = p - a.xy;
    t.bearing = std::atan2(u.y(), u.x());
    t.along = rel.dot(u);
    t.cross = u.x() * rel.y() - u.y() * rel.x();
    return t;
  }

  std::optional<SetpointClaim> evaluate(const BehaviorContext& ctx) override {
    if (waypoints_.empty()) throw EmptyPath();
    const Eigen::Vector2d p = ctx.odom.pose.position.head<2>();
    const double depth = depth_of(ctx.odom.pose.position, ctx.frame);
    if (!started_) {
      start_ = {p, depth};
      started_ = true;
      if (pending_restart_) restart_at_nearest(p);
      pending_restart_ = false;
    }
    if (done_) return std::nullopt;

    while (index_ < waypoints_.size()) {
      const auto& w = waypoints_[index_];
      const double dist = std::hypot((w.xy - p).norm(), w.depth - depth);
      if (dist > params_.acceptance_radius) break;
      accepted_.push_back({index_, ctx.time, dist});
      ++index_;
    }
    if (index_ >= waypoints_.size()) {
      done_ = true;
      emit("mission_done");
      return std::nullopt;
    }

    const SegmentPoint a = segment_start();
    const ResolvedWaypoint& b = waypoints_[index_];
    const Track t = track_geometry(a, b.xy, p);
    const double yaw = wrap_angle(t.bearing + std::atan2(-t.cross, params_.lookahead));
    const double frac = t.length > 1e-9 ? std::clamp(t.along / t.length, 0.0, 1.0) : 1.0;

    DofValues v;
    v.set(Dof::kYaw, yaw);
    v.set(Dof::kDepth, a.depth + frac * (b.depth - a.depth));
    v.set(Dof::kSurge, b.speed.value_or(params_.cruise_speed));
    return claim(v);
  }

  SegmentPoint segment_start() const {
    if (index_ == 0) return start_;
    const auto& w = waypoints_[index_ - 1];
    return {w.xy, w.depth};
  }

 private:
  static double distance_to_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
    const Eigen::Vector2d d = b - a;
    const double len2 = d.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (a + s * d - p).norm();
  }

  // Candidates: the first waypoint itself, then each waypoint-to-waypoint
  // segment. Ties keep the earliest.
  void restart_at_nearest(const Eigen::Vector2d& p) {
    double best = (waypoints_.front().xy - p).norm();
    std::size_t best_index = 0;
    for (std::size_t j = 1; j < waypoints_.size(); ++j) {
      const double dist = distance_to_segment(waypoints_[j - 1].xy, waypoints_[j].xy, p);
      if (dist < best) {
        best = dist;
        best_index = j;
      }
    }
    index_ = best_index;
  }

  PathFollowingParams params_;
  std::vector<ResolvedWaypoint> waypoints_;
  std::size_t index_ = 0;
  bool started_ = false;
  bool done_ = false;
  bool pending_restart_ = false;
  SegmentPoint start_{Eigen::Vector2d::Zero(), 0.0};
  std::vector<WaypointAcceptance> accepted_;
};

struct PeriodicSurfacingParams {
  double interval = 600.0;  // s between surfacings
  double surface_depth = 0.0;
  double hold_time = 10.0;  // s spent above surface_threshold before resuming
  double surface_threshold = 0.5;
};

/// Dormant until `interval` has elapsed since the last surfacing, then
/// claims depth until the vehicle has been shallow enough for `hold_time`.
class PeriodicSurfacing : public Behavior {
 public:
  PeriodicSurfacing(std::string id, int priority, PeriodicSurfacingParams params)
      : Behavior(std::move(id), priority), params_(params) {}

  std::string_view kind() const override { return "periodic_surfacing"; }
  const PeriodicSurfacingParams& params() const { return params_; }
  bool surfacing() const { return surfacing_; }

  std::optional<SetpointClaim> evaluate(const BehaviorContext& ctx) override {
    if (!last_reset_) last_reset_ = ctx.time;
    if (!surfacing_) {
      if (ctx.time - *last_reset_ < params_.interval) return std::nullopt;
      surfacing_ = true;
      shallow_since_.reset();
    }
    if (depth_of(ctx.odom.pose.position, ctx.frame) < params_.surface_threshold) {
      if (!shallow_since_) shallow_since_ = ctx.time;
      if (ctx.time - *shallow_since_ >= params_.hold_time) {
        surfacing_ = false;
        last_reset_ = ctx.time;
        emit("surfacing_complete");
        return std::nullopt;
      }
    } else {
      shallow_since_.reset();
    }
    DofValues v;
    v.set(Dof::kDepth, params_.surface_depth);
    return claim(v);
  }

 private:
  PeriodicSurfacingParams params_;
  std::optional<double> last_reset_;
  std::optional<double> shallow_since_;
  bool surfacing_ = false;
};

struct TeleoperationParams {
  double staleness_timeout = 1.0;  // s
};

/// Passes through whatever the operator last set, per DOF, until it goes stale.
class Teleoperation : public Behavior {
 public:
  Teleoperation(std::string id, int priority, TeleoperationParams params)
      : Behavior(std::move(id), priority), params_(params) {}

  std::string_view kind() const override { return "teleoperation"; }
  const TeleoperationParams& params() const { return params_; }

  std::optional<SetpointClaim> evaluate(const BehaviorContext& ctx) override {
    if (ctx.teleop == nullptr) return std::nullopt;
    DofValues v;
    for (Dof d : kAllDofs) {
      const auto& in = (*ctx.teleop)[index(d)];
      if (in && ctx.time - in->stamp <= params_.staleness_timeout) v.set(d, in->value);
    }
    if (v.empty()) return std::nullopt;
    return claim(v);
  }

 private:
  TeleoperationParams params_;
};

// ---------------------------------------------------------------------------
// Finite-state machine

struct FsmState {
  std::string name;
  std::string mode;
  std::vector<std::unique_ptr<Behavior>> behaviors;
  std::set<std::string> allowed_transitions;
  std::map<std::string, std::string> events;  // event -> target state
};

enum class TransitionCause { kOperator, kEvent };
enum class TransitionStatus { kOk, kNoOp, kUnknownState, kNotAllowed };

struct TransitionResult {
  TransitionStatus status = TransitionStatus::kOk;
  std::string reason;

  bool ok() const { return status == TransitionStatus::kOk || status == TransitionStatus::kNoOp; }
  std::string_view code() const {
    switch (status) {
      case TransitionStatus::kOk: return "ok";
      case TransitionStatus::kNoOp: return "no_op";
      case TransitionStatus::kUnknownState: return "UnknownState";
      case TransitionStatus::kNotAllowed: return "TransitionNotAllowed";
    }
    return "";
  }
};

struct GuidanceOutput {
  std::vector<SetpointClaim> claims;
  Arbitration merged;
  std::vector<std::string> events;
  std::vector<std::string> requested_states;  // from the event map, in order
  std::vector<std::string> errors;            // behavior failures, e.g. EmptyPath
};

class Fsm {
 public:
  using ModeHook = std::function<void(const std::string& mode)>;

  Fsm(std::vector<FsmState> states, const std::string& initial, ModeHook on_mode_change = {})
      : states_(std::move(states)), on_mode_change_(std::move(on_mode_change)) {
    active_ = find(initial);
    if (active_ == npos) throw std::invalid_argument("unknown initial state: " + initial);
    if (on_mode_change_) on_mode_change_(states_[active_].mode);
  }

  const FsmState& active() const { return states_[active_]; }
  const std::vector<FsmState>& states() const { return states_; }

  /// Call only at tick boundaries.
  TransitionResult request_transition(const std::string& target, TransitionCause cause) {
    (void)cause;
    const std::size_t idx = find(target);
    if (idx == npos) return {TransitionStatus::kUnknownState, "no state named '" + target + "'"};
    if (idx == active_) return {TransitionStatus::kNoOp, ""};
    if (!states_[active_].allowed_transitions.contains(target))
      return {TransitionStatus::kNotAllowed,
              "transition " + states_[active_].name + " -> " + target + " is not allowed"};
    active_ = idx;
    if (on_mode_change_) on_mode_change_(states_[active_].mode);
    return {TransitionStatus::kOk, ""};
  }

  GuidanceOutput evaluate(const BehaviorContext& ctx) {
    GuidanceOutput out;
    FsmState& s = states_[active_];
    for (auto& b : s.behaviors) {
      try {
        if (auto c = b->evaluate(ctx)) out.claims.push_back(std::move(*c));
      } catch (const std::exception& e) {
        out.errors.push_back(b->id() + ": " + e.what());
      }
      for (auto& e : b->take_events()) {
        if (auto it = s.events.find(e); it != s.events.end()) out.requested_states.push_back(it->second);
        out.events.push_back(std::move(e));
      }
    }
    out.merged = arbitrate_detailed(out.claims);
    return out;
  }

  template <typename Fn>
  void for_each_behavior(Fn&& fn) {
    for (auto& s : states_)
      for (auto& b : s.behaviors) fn(*b);
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < states_.size(); ++i)
      if (states_[i].name == name) return i;
    return npos;
  }

  std::vector<FsmState> states_;
  std::size_t active_ = 0;
  ModeHook on_mode_change_;
};

}  // namespace mvp
