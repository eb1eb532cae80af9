#pragma once

// HTTP front end for a Runner. Every mutation goes through the runner's
// command queue; reads come from the latest immutable snapshot. Errors are
// JSON bodies {"error": {"code", "message", ...}} with a 4xx status.

#include "mvp/dof.hpp"
#include "mvp/guidance.hpp"
#include "mvp/runner.hpp"
#include "mvp/telemetry.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace mvp::api {

using Json = nlohmann::ordered_json;

inline Json waypoint_to_json(const Waypoint& w) {
  Json j = Json::object();
  if (const auto* p = std::get_if<LocalPoint>(&w.position)) {
    j["x"] = p->x;
    j["y"] = p->y;
  } else {
    const auto& g = std::get<GeoPoint>(w.position);
    j["lat"] = g.lat;
    j["lon"] = g.lon;
  }
  if (w.depth) j["depth"] = *w.depth;
  if (w.altitude) j["altitude"] = *w.altitude;
  if (w.speed) j["speed"] = *w.speed;
  return j;
}

struct ParseFailure {
  std::size_t index = 0;
  std::string reason;
};

/// Structural parse only; value checks happen in the runner.
inline std::variant<std::vector<Waypoint>, ParseFailure> waypoints_from_json(const Json& body) {
  const Json* list = &body;
  if (body.is_object()) {
    if (!body.contains("waypoints")) return ParseFailure{0, "body needs a 'waypoints' list"};
    list = &body["waypoints"];
  }
  if (!list->is_array()) return ParseFailure{0, "'waypoints' must be a list"};
  std::vector<Waypoint> out;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const Json& e = (*list)[i];
    if (!e.is_object()) return ParseFailure{i, "waypoint must be an object"};
    for (auto it = e.begin(); it != e.end(); ++it) {
      static const std::vector<std::string> known{"x", "y", "lat", "lon", "depth", "altitude", "speed"};
      if (std::find(known.begin(), known.end(), it.key()) == known.end())
        return ParseFailure{i, "unknown field '" + it.key() + "'"};
      if (!it.value().is_number()) return ParseFailure{i, "field '" + it.key() + "' must be a number"};
    }
    Waypoint w;
    const bool local = e.contains("x") && e.contains("y");
    const bool geo = e.contains("lat") && e.contains("lon");
    if (local == geo) return ParseFailure{i, "give either x and y, or lat and lon"};
    if (local)
      w.position = LocalPoint{e["x"].get<double>(), e["y"].get<double>()};
    else
      w.position = GeoPoint{e["lat"].get<double>(), e["lon"].get<double>()};
    if (e.contains("depth")) w.depth = e["depth"].get<double>();
    if (e.contains("altitude")) w.altitude = e["altitude"].get<double>();
    if (e.contains("speed")) w.speed = e["speed"].get<double>();
    out.push_back(w);
  }
  return out;
}

inline Json error_body(const std::string& code, const std::string& message) {
  return Json{{"error", {{"code", code}, {"message", message}}}};
}

class Server {
 public:
  explicit Server(runner::Runner& r) : runner_(r) { routes(); }
  ~Server() { stop(); }

  /// Binds to host:port; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }

  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Server& http() { return server_; }

 private:
  static void send(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static std::optional<Json> parse_body(const httplib::Request& req, httplib::Response& res) {
    try {
      return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      send(res, 400, error_body("MalformedJson", e.what()));
      return std::nullopt;
    }
  }

  void reply(httplib::Response& res, runner::Command c) {
    auto f = runner_.submit(std::move(c));
    if (f.wait_for(std::chrono::seconds(5)) != std::future_status::ready) {
      send(res, 503, error_body("Timeout", "the control loop did not answer"));
      return;
    }
    const runner::Reply r = f.get();
    if (r.code.empty()) {
      Json body{{"ok", true}};
      if (!r.message.empty()) body["message"] = r.message;
      send(res, r.status, body);
      return;
    }
    Json body = error_body(r.code, r.message);
    if (r.index) body["error"]["index"] = *r.index;
    send(res, r.status, body);
  }

  void routes() {
    server_.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      const auto s = runner_.snapshot();
      Json body;
      body["running"] = s->running;
      body["tick"] = s->ticks;
      body["time"] = s->time;
      body["state"] = s->state;
      body["allowed_transitions"] = s->allowed_transitions;
      body["enabled"] = s->enabled;
      body["payload_power"] = runner_.system().runner.payload_power;
      body["record"] = s->record_json.empty() ? Json(nullptr) : Json::parse(s->record_json);
      send(res, 200, body);
    });

    server_.Get("/track", [this](const httplib::Request&, httplib::Response& res) {
      const auto s = runner_.snapshot();
      Json pts = Json::array();
      for (const auto& p : s->track) pts.push_back(telemetry::vec_json(p));
      send(res, 200, Json{{"positions", pts}});
    });

    server_.Get("/mission/waypoints", [this](const httplib::Request&, httplib::Response& res) {
      const auto s = runner_.snapshot();
      Json wps = Json::array();
      for (const auto& w : s->waypoints) wps.push_back(waypoint_to_json(w));
      Json body{{"waypoints", wps}};
      body["active_index"] = s->waypoint_index ? Json(*s->waypoint_index) : Json(nullptr);
      send(res, 200, body);
    });

    server_.Put("/mission/waypoints", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req, res);
      if (!body) return;
      auto parsed = waypoints_from_json(*body);
      if (auto* fail = std::get_if<ParseFailure>(&parsed)) {
        Json err = error_body("InvalidWaypoint", fail->reason);
        err["error"]["index"] = fail->index;
        send(res, 400, err);
        return;
      }
      reply(res, runner::command::SetWaypoints{std::move(std::get<std::vector<Waypoint>>(parsed))});
    });

    server_.Post("/fsm/transition", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req, res);
      if (!body) return;
      if (!body->is_object() || !body->contains("target") || !(*body)["target"].is_string()) {
        send(res, 400, error_body("InvalidRequest", "body needs a string 'target'"));
        return;
      }
      reply(res, runner::command::Transition{(*body)["target"].get<std::string>()});
    });

    server_.Post("/controller/enable", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, runner::command::SetEnabled{true});
    });
    server_.Post("/controller/disable", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, runner::command::SetEnabled{false});
    });

    server_.Post("/teleop", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req, res);
      if (!body) return;
      if (!body->is_object() || body->empty()) {
        send(res, 400, error_body("InvalidRequest", "body must map DOF names to values"));
        return;
      }
      DofValues values;
      for (auto it = body->begin(); it != body->end(); ++it) {
        const auto d = dof_from_name(it.key());
        if (!d) {
          send(res, 400, error_body("UnknownDof", "no DOF named '" + it.key() + "'"));
          return;
        }
        if (!it.value().is_number() || !std::isfinite(it.value().get<double>())) {
          send(res, 400, error_body("InvalidValue", "value for '" + it.key() + "' must be a finite number"));
          return;
        }
        values.set(*d, it.value().get<double>());
      }
      reply(res, runner::command::Teleop{values});
    });

    server_.Get("/config", [this](const httplib::Request&, httplib::Response& res) {
      send(res, 200, config_summary());
    });

    server_.Post("/stop", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, runner::command::Stop{});
    });

    // Server-sent events, one per telemetry line, starting with the header.
    server_.Get("/telemetry", [this](const httplib::Request& req, httplib::Response& res) {
      std::uint64_t from = 0;
      if (req.has_param("from")) from = std::stoull(req.get_param_value("from"));
      auto cursor = std::make_shared<std::uint64_t>(from);
      res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
        auto item = runner_.hub().next(*cursor, std::chrono::milliseconds(500));
        if (!item) {
          if (runner_.hub().closed() && runner_.hub().next_sequence() <= *cursor) {
            sink.done();
            return true;
          }
          const std::string ping = ": keepalive\n\n";
          return sink.write(ping.data(), ping.size());
        }
        const std::string event = "id: " + std::to_string(item->first) + "\ndata: " + item->second + "\n\n";
        *cursor = item->first + 1;
        return sink.write(event.data(), event.size());
      });
    });
  }

  Json config_summary() const {
    const auto& sys = runner_.system();
    Json j;
    j["vehicle"] = sys.vehicle.name;
    j["earth_frame"] = sys.vehicle.frame == EarthFrame::kEnu ? "enu" : "ned";
    j["control_rate"] = sys.runner.control_rate;
    j["physics_rate"] = sys.runner.physics_rate;
    j["seed"] = sys.runner.seed;
    j["duration"] = sys.runner.duration ? Json(*sys.runner.duration) : Json(nullptr);
    Json thrusters = Json::array();
    for (const auto& t : sys.vehicle.thrusters.fixed)
      thrusters.push_back({{"id", t.id}, {"type", "fixed"}, {"force_limits", {t.force_min, t.force_max}}});
    for (const auto& t : sys.vehicle.thrusters.articulated)
      thrusters.push_back({{"id", t.id},
                           {"type", "articulated"},
                           {"force_limits", {t.force_min, t.force_max}},
                           {"servo_rate", t.servo_rate},
                           {"angle_limits", {t.angle_min, t.angle_max}}});
    j["thrusters"] = thrusters;
    Json modes = Json::array();
    for (const auto& m : sys.vehicle.modes) {
      Json dofs = Json::array();
      for (Dof d : kAllDofs)
        if (m.dofs[index(d)]) dofs.push_back(std::string(dof_name(d)));
      modes.push_back({{"name", m.name}, {"dofs", dofs}});
    }
    j["control_modes"] = modes;
    Json states = Json::array();
    for (const auto& s : sys.fsm.states) {
      Json behaviors = Json::array();
      for (const auto& b : s.behaviors)
        behaviors.push_back({{"id", b.id}, {"kind", b.kind}, {"priority", b.priority}});
      states.push_back({{"name", s.name},
                        {"mode", s.mode},
                        {"allowed_transitions", s.allowed_transitions},
                        {"events", s.events},
                        {"behaviors", behaviors}});
    }
    j["states"] = states;
    j["initial_state"] = sys.fsm.initial_state;
    return j;
  }

  runner::Runner& runner_;
  httplib::Server server_;
  std::thread thread_;
};

/// Splits "host:port"; a bare port binds to 127.0.0.1.
inline std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) return {"127.0.0.1", std::stoi(bind)};
  return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
}

}  // namespace mvp::api
