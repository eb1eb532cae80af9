#pragma once

// Composition root. Simulation is the single-threaded tick loop body
// (odometry -> guidance -> control -> telemetry -> physics). Runner drives
// it on its own thread, applies operator commands at tick boundaries, and
// publishes immutable snapshots and telemetry lines for the API.

#include "mvp/config.hpp"
#include "mvp/control.hpp"
#include "mvp/dynamics.hpp"
#include "mvp/guidance.hpp"
#include "mvp/telemetry.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace mvp::runner {

inline constexpr std::size_t kTrackLength = 20;

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitFault = 2 };

struct System {
  config::RunnerConfig runner;
  config::VehicleConfig vehicle;
  config::FsmConfig fsm;
  std::optional<config::Mission> mission;
};

struct Overrides {
  std::optional<std::string> mission;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> log;
  std::optional<std::string> bind;
};

/// Loads the runner file and everything it references. Throws ConfigError.
inline System load_and_validate(const std::string& runner_path, const Overrides& o = {}) {
  System s;
  s.runner = config::parse_runner(config::read_file(runner_path), runner_path);
  if (o.mission) s.runner.mission = *o.mission;
  if (o.duration) s.runner.duration = *o.duration;
  if (o.seed) s.runner.seed = *o.seed;
  if (o.log) s.runner.log = *o.log;
  if (o.bind) s.runner.bind = *o.bind;
  if (s.runner.duration && !(*s.runner.duration > 0.0))
    throw config::ConfigError(config::ConfigError::Kind::kValidation, runner_path, 0, "duration", "must be > 0");

  s.vehicle = config::parse_vehicle(config::read_file(s.runner.vehicle), s.runner.vehicle);
  s.fsm = config::parse_fsm(config::read_file(s.runner.fsm), s.runner.fsm);
  config::check_fsm_against_vehicle(s.fsm, s.vehicle, s.runner.fsm);
  if (s.runner.mission) s.mission = config::load_mission(*s.runner.mission);
  return s;
}

struct WaypointError {
  std::size_t index = 0;
  std::string reason;
};

/// One control tick at a time. Not thread-safe.
class Simulation {
 public:
  explicit Simulation(const System& sys)
      : vehicle_name_(sys.vehicle.name),
        frame_(sys.vehicle.frame),
        seabed_depth_(sys.vehicle.params.seabed_depth),
        dt_(1.0 / sys.runner.control_rate),
        substeps_(static_cast<int>(std::lround(sys.runner.physics_rate / sys.runner.control_rate))),
        origin_(sys.mission && sys.mission->origin ? sys.mission->origin : std::nullopt),
        controller_(sys.vehicle.thrusters, sys.vehicle.modes, initial_mode(sys), sys.vehicle.frame, dt_),
        simulator_(sys.vehicle.params, sys.vehicle.thrusters, sys.vehicle.frame,
                   SimState{sys.runner.initial_pose, Twist{}, {}, 0.0}),
        sensor_(sys.runner.noise, sys.runner.seed, sys.vehicle.frame, sys.vehicle.params.seabed_depth),
        fsm_(config::make_states(sys.fsm), sys.fsm.initial_state,
             [this](const std::string& mode) { controller_.set_mode(mode); }) {
    header_.vehicle = sys.vehicle.name;
    header_.earth_frame = frame_ == EarthFrame::kEnu ? "enu" : "ned";
    header_.control_rate = sys.runner.control_rate;
    header_.physics_rate = sys.runner.physics_rate;
    header_.seed = sys.runner.seed;
    for (const auto& t : sys.vehicle.thrusters.fixed) header_.thrusters.push_back(t.id);
    for (const auto& t : sys.vehicle.thrusters.articulated) {
      header_.thrusters.push_back(t.id);
      header_.articulated.push_back(t.id);
    }
    for (const auto& s : sys.fsm.states) header_.states.push_back(s.name);
    if (sys.mission) {
      if (auto err = set_waypoints(sys.mission->waypoints, false))
        throw std::invalid_argument("mission waypoint " + std::to_string(err->index) + ": " + err->reason);
    }
  }
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const telemetry::Header& header() const { return header_; }

  /// Runs one control period. After a physics failure the record carries the
  /// fault and `faulted()` becomes true; further ticks are not allowed.
  telemetry::Record tick(bool final = false) {
    if (faulted_) throw std::logic_error("simulation aborted after a physics fault");
    for (const auto& target : std::exchange(pending_states_, {})) {
      const auto r = fsm_.request_transition(target, TransitionCause::kEvent);
      if (!r.ok()) events_.push_back("transition_rejected:" + target);
    }

    const Odometry odom = sensor_.measure(simulator_.state());
    const BehaviorContext ctx{odom, time_, frame_, &teleop_};
    GuidanceOutput g = fsm_.evaluate(ctx);
    pending_states_ = g.requested_states;
    ControlOutput c = controller_.tick(odom, g.merged.setpoint, dt_);

    std::vector<double> commands;
    for (const auto& t : c.thrusters) commands.push_back(t.command);
    simulator_.set_commands(commands, c.servo_angles);

    telemetry::Record r;
    r.tick = ticks_;
    r.time = time_;
    r.state = fsm_.active().name;
    r.mode = c.mode;
    r.enabled = c.enabled;
    const SimState& truth = simulator_.state();
    r.truth = telemetry::kinematics(truth.pose, truth.twist, frame_, seabed_depth_);
    r.odom = telemetry::kinematics(odom.pose, odom.twist, frame_, seabed_depth_);
    r.odom.altitude = odom.altitude;
    r.setpoint = c.setpoint;
    for (Dof d : kAllDofs) {
      if (!c.setpoint.contains(d)) continue;
      r.setpoint_sources[index(d)] = g.merged.setpoint.contains(d) ? g.merged.winner[index(d)] : "hold";
    }
    r.errors = c.errors;
    r.tau_star = c.tau_star;
    r.integrals = c.integrals;
    r.allocation_rows = c.allocation_rows;
    const auto& fixed = controller_.thrusters().fixed;
    for (std::size_t k = 0; k < c.thrusters.size(); ++k) {
      const auto& t = c.thrusters[k];
      telemetry::ThrusterRecord tr{t.id, t.force, t.command, std::nullopt, std::nullopt, t.saturated};
      if (k >= fixed.size()) {
        const std::size_t j = k - fixed.size();
        tr.angle = truth.servo_angles[j];
        tr.angle_command = c.servo_angles[j];
      }
      r.thrusters.push_back(std::move(tr));
    }
    r.residual = c.residual;
    if (const PathFollowing* pf = active_path()) r.waypoint_index = pf->active_index();
    r.events = std::exchange(events_, {});
    for (auto& e : g.events) r.events.push_back(std::move(e));
    r.guidance_errors = std::move(g.errors);
    r.flags = {c.saturated, c.gimbal, c.fault, final};
    r.fault_reason = c.fault_reason;

    track_.push_back(odom.pose.position);
    if (track_.size() > kTrackLength) track_.pop_front();

    try {
      for (int i = 0; i < substeps_; ++i) simulator_.advance(dt_ / substeps_);
    } catch (const std::exception& e) {
      faulted_ = true;
      r.flags.fault = true;
      r.flags.final = true;
      r.fault_reason = std::string("simulation aborted: ") + e.what();
    }
    ++ticks_;
    time_ = static_cast<double>(ticks_) * dt_;
    return r;
  }

  TransitionResult transition(const std::string& target) {
    return fsm_.request_transition(target, TransitionCause::kOperator);
  }

  void set_enabled(bool on) { controller_.set_enabled(on); }

  /// Operator setpoints; stamped with the time of the next tick.
  void set_teleop(const DofValues& values) {
    values.for_each([&](Dof d, double v) { teleop_[index(d)] = TeleopInput{v, time_}; });
  }

  /// Replaces the mission for every path-following behavior. Returns the
  /// first invalid waypoint instead of applying anything.
  std::optional<WaypointError> set_waypoints(std::vector<Waypoint> waypoints, bool restart_nearest = true) {
    if (waypoints.empty()) return WaypointError{0, "mission needs at least one waypoint"};
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
      if (auto reason = validate_waypoint(waypoints[i])) return WaypointError{i, *reason};
      if (std::holds_alternative<GeoPoint>(waypoints[i].position) && !origin_)
        return WaypointError{i, "lat/lon waypoints need a mission origin"};
    }
    const MissionFrame mf{frame_, seabed_depth_, origin_.value_or(GeoPoint{})};
    const auto resolved = resolve(std::span<const Waypoint>(waypoints), mf);
    fsm_.for_each_behavior([&](Behavior& b) {
      if (auto* pf = dynamic_cast<PathFollowing*>(&b)) pf->set_mission(resolved, restart_nearest);
    });
    waypoints_ = std::move(waypoints);
    return std::nullopt;
  }

  /// First path-following behavior of the active state, if any.
  const PathFollowing* active_path() const {
    for (const auto& b : fsm_.active().behaviors)
      if (const auto* pf = dynamic_cast<const PathFollowing*>(b.get())) return pf;
    return nullptr;
  }

  bool faulted() const { return faulted_; }
  double time() const { return time_; }
  double dt() const { return dt_; }
  std::uint64_t ticks() const { return ticks_; }
  const std::deque<Vec3>& track() const { return track_; }
  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  const std::optional<GeoPoint>& origin() const { return origin_; }
  const Fsm& fsm() const { return fsm_; }
  const Controller& controller() const { return controller_; }
  const Simulator& simulator() const { return simulator_; }
  Simulator& simulator() { return simulator_; }
  const OdometrySensor& sensor() const { return sensor_; }
  const std::string& vehicle_name() const { return vehicle_name_; }
  EarthFrame frame() const { return frame_; }

 private:
  static std::string initial_mode(const System& sys) {
    for (const auto& s : sys.fsm.states)
      if (s.name == sys.fsm.initial_state) return s.mode;
    throw std::invalid_argument("unknown initial state: " + sys.fsm.initial_state);
  }

  std::string vehicle_name_;
  EarthFrame frame_;
  double seabed_depth_;
  double dt_;
  int substeps_;
  std::optional<GeoPoint> origin_;
  Controller controller_;
  Simulator simulator_;
  OdometrySensor sensor_;
  Fsm fsm_;
  telemetry::Header header_;
  TeleopInputs teleop_{};
  std::vector<Waypoint> waypoints_;
  std::vector<std::string> pending_states_;
  std::vector<std::string> events_;
  std::deque<Vec3> track_;
  std::uint64_t ticks_ = 0;
  double time_ = 0.0;
  bool faulted_ = false;
};

/// Runs `sim` headless for `duration` seconds of simulated time, writing
/// the header and one record per tick. Returns the exit code.
inline int run_headless(Simulation& sim, double duration, telemetry::Writer& out) {
  out.header(sim.header());
  const auto ticks = static_cast<std::uint64_t>(std::llround(duration / sim.dt()));
  for (std::uint64_t i = 0; i < ticks; ++i) {
    const telemetry::Record r = sim.tick(i + 1 == ticks);
    out.record(r);
    if (sim.faulted()) return kExitFault;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Threaded runner

/// Fan-out of serialized telemetry lines with sequence numbers. Keeps a
/// bounded backlog so slow readers can catch up or detect a gap.
class TelemetryHub {
 public:
  explicit TelemetryHub(std::size_t backlog = 4096) : backlog_(backlog) {}

  std::uint64_t publish(std::string line) {
    std::lock_guard lock(mu_);
    const std::uint64_t seq = next_++;
    lines_.emplace_back(seq, std::move(line));
    if (lines_.size() > backlog_) lines_.pop_front();
    cv_.notify_all();
    return seq;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  /// Next line with sequence >= `from`. Empty on timeout or when closed and
  /// drained.
  std::optional<std::pair<std::uint64_t, std::string>> next(std::uint64_t from, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || next_ > from; });
    if (next_ <= from) return std::nullopt;
    for (const auto& [seq, line] : lines_)
      if (seq >= from) return std::make_pair(seq, line);
    return std::nullopt;
  }

  std::uint64_t next_sequence() const {
    std::lock_guard lock(mu_);
    return next_;
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::pair<std::uint64_t, std::string>> lines_;
  std::uint64_t next_ = 0;
  std::size_t backlog_;
  bool closed_ = false;
};

namespace command {
struct Transition {
  std::string target;
};
struct SetWaypoints {
  std::vector<Waypoint> waypoints;
};
struct SetEnabled {
  bool enabled = true;
};
struct Teleop {
  DofValues values;
};
struct Stop {};
}  // namespace command

using Command =
    std::variant<command::Transition, command::SetWaypoints, command::SetEnabled, command::Teleop, command::Stop>;

/// Outcome of a command. `code` is machine-readable; empty on success.
struct Reply {
  int status = 200;
  std::string code;
  std::string message;
  std::optional<std::size_t> index;  // offending waypoint, when relevant
};

/// Consistent view of one tick, shared read-only with the API.
struct Snapshot {
  std::uint64_t ticks = 0;
  double time = 0.0;
  std::optional<telemetry::Record> record;
  std::string record_json;
  std::vector<Vec3> track;
  std::vector<Waypoint> waypoints;
  std::optional<std::size_t> waypoint_index;
  std::string state;
  std::vector<std::string> allowed_transitions;
  bool enabled = true;
  bool running = false;
};

struct RunOptions {
  bool headless = true;
  std::optional<double> duration;  // s of simulated time
  double speed = 1.0;              // real-time pacing factor
};

class Runner {
 public:
  Runner(System sys, RunOptions opt, std::ostream* log = nullptr)
      : system_(std::move(sys)), options_(opt), sim_(std::make_unique<Simulation>(system_)), writer_(log) {
    publish_snapshot(false);
  }
  Runner(const Runner&) = delete;
  Runner& operator=(const Runner&) = delete;
  ~Runner() {
    request_stop();
    if (thread_.joinable()) thread_.join();
  }

  void start() {
    running_ = true;
    publish_snapshot(true);
    thread_ = std::thread([this] { loop(); });
  }

  /// Blocks until the loop exits; returns the exit code.
  int wait() {
    if (thread_.joinable()) thread_.join();
    return exit_code_;
  }

  int run() {
    start();
    return wait();
  }

  void request_stop() { stop_requested_ = true; }
  bool running() const { return running_; }

  /// Queues a command for the next tick boundary.
  std::future<Reply> submit(Command c) {
    std::promise<Reply> p;
    auto f = p.get_future();
    std::lock_guard lock(queue_mu_);
    if (!accepting_) {
      p.set_value(Reply{409, "NotRunning", "the control loop is not running", std::nullopt});
      return f;
    }
    queue_.emplace_back(std::move(c), std::move(p));
    return f;
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(snapshot_mu_);
    return snapshot_;
  }

  TelemetryHub& hub() { return hub_; }
  const System& system() const { return system_; }
  const telemetry::Header& header() const { return sim_->header(); }

 private:
  using Pending = std::pair<Command, std::promise<Reply>>;

  void loop() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(sim_->dt() / std::max(options_.speed, 1e-6)));
    auto deadline = clock::now();
    const std::uint64_t max_ticks = options_.duration
                                        ? static_cast<std::uint64_t>(std::llround(*options_.duration / sim_->dt()))
                                        : std::numeric_limits<std::uint64_t>::max();

    writer_.header(sim_->header());
    hub_.publish(telemetry::to_json(sim_->header()).dump());
    while (true) {
      bool stop = drain_commands() || stop_requested_;
      if (sim_->ticks() + 1 >= max_ticks) stop = true;
      const telemetry::Record r = sim_->tick(stop);
      const std::string line = telemetry::to_json(r).dump();
      writer_.line(line);
      hub_.publish(line);
      publish_snapshot(true, &r, line);
      if (sim_->faulted()) {
        exit_code_ = kExitFault;
        break;
      }
      if (stop) break;

      if (!options_.headless) {
        deadline += period;
        const auto now = clock::now();
        if (now > deadline + 5 * period) deadline = now;  // fell far behind; resync
        std::this_thread::sleep_until(deadline);
      }
    }
    writer_.flush();
    {
      std::lock_guard lock(queue_mu_);
      accepting_ = false;
      for (auto& [c, p] : queue_) p.set_value(Reply{409, "NotRunning", "the control loop has stopped", std::nullopt});
      queue_.clear();
    }
    running_ = false;
    publish_snapshot(false);
    hub_.close();
  }

  /// Applies queued commands. Returns true when a stop was requested.
  bool drain_commands() {
    std::deque<Pending> batch;
    {
      std::lock_guard lock(queue_mu_);
      batch.swap(queue_);
    }
    bool stop = false;
    for (auto& [c, p] : batch) p.set_value(apply(c, stop));
    return stop;
  }

  Reply apply(Command& c, bool& stop) {
    return std::visit(
        [&](auto& cmd) -> Reply {
          using T = std::decay_t<decltype(cmd)>;
          if constexpr (std::is_same_v<T, command::Transition>) {
            const TransitionResult r = sim_->transition(cmd.target);
            switch (r.status) {
              case TransitionStatus::kOk:
              case TransitionStatus::kNoOp:
                return {};
              case TransitionStatus::kUnknownState:
                return {404, std::string(r.code()), r.reason, std::nullopt};
              case TransitionStatus::kNotAllowed:
                return {409, std::string(r.code()), r.reason, std::nullopt};
            }
            return {};
          } else if constexpr (std::is_same_v<T, command::SetWaypoints>) {
            if (auto err = sim_->set_waypoints(std::move(cmd.waypoints)))
              return {400, "InvalidWaypoint", err->reason, err->index};
            return {};
          } else if constexpr (std::is_same_v<T, command::SetEnabled>) {
            sim_->set_enabled(cmd.enabled);
            return {};
          } else if constexpr (std::is_same_v<T, command::Teleop>) {
            sim_->set_teleop(cmd.values);
            return {};
          } else {
            stop = true;
            return {202, "", "stopping after the current tick", std::nullopt};
          }
        },
        c);
  }

  void publish_snapshot(bool running, const telemetry::Record* r = nullptr, const std::string& line = {}) {
    auto s = std::make_shared<Snapshot>();
    s->ticks = sim_->ticks();
    s->time = sim_->time();
    {
      std::lock_guard lock(snapshot_mu_);
      if (snapshot_ && !r) {
        s->record = snapshot_->record;
        s->record_json = snapshot_->record_json;
      }
    }
    if (r) {
      s->record = *r;
      s->record_json = line;
    }
    s->track.assign(sim_->track().begin(), sim_->track().end());
    s->waypoints = sim_->waypoints();
    if (const PathFollowing* pf = sim_->active_path()) s->waypoint_index = pf->active_index();
    s->state = sim_->fsm().active().name;
    s->allowed_transitions.assign(sim_->fsm().active().allowed_transitions.begin(),
                                  sim_->fsm().active().allowed_transitions.end());
    s->enabled = sim_->controller().enabled();
    s->running = running;
    std::lock_guard lock(snapshot_mu_);
    snapshot_ = std::move(s);
  }

  System system_;
  RunOptions options_;
  std::unique_ptr<Simulation> sim_;
  telemetry::Writer writer_;
  TelemetryHub hub_;

  std::mutex queue_mu_;
  std::deque<Pending> queue_;
  bool accepting_ = true;

  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const Snapshot> snapshot_;

  std::thread thread_;
  std::atomic<bool> running_{false};
  std::atomic<bool> stop_requested_{false};
  int exit_code_ = kExitOk;
};

}  // namespace mvp::runner
