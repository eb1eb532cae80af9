// Command-line entry point: run, validate, plot.

#include "mvp/api.hpp"
#include "mvp/config.hpp"
#include "mvp/plot.hpp"
#include "mvp/runner.hpp"
#include "mvp/telemetry.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

std::atomic<mvp::runner::Runner*> g_runner{nullptr};

void on_signal(int) {
  if (auto* r = g_runner.load()) r->request_stop();
}

struct RunArgs {
  std::string config;
  std::optional<std::string> mission;
  bool headless = false;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> log;
  std::optional<std::string> bind;
  bool no_api = false;
  double speed = 1.0;
};

mvp::runner::Overrides overrides(const RunArgs& a) {
  return {a.mission, a.duration, a.seed, a.log, a.bind};
}

int run(const RunArgs& a) {
  mvp::runner::System sys;
  try {
    sys = mvp::runner::load_and_validate(a.config, overrides(a));
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return mvp::runner::kExitValidation;
  }
  if (a.headless && !sys.runner.duration && a.no_api) {
    std::cerr << "headless runs without the API need a duration\n";
    return mvp::runner::kExitValidation;
  }

  std::ofstream log(sys.runner.log, std::ios::binary);
  if (!log) {
    std::cerr << "cannot open log file " << sys.runner.log << '\n';
    return mvp::runner::kExitValidation;
  }

  std::unique_ptr<mvp::runner::Runner> runner;
  try {
    runner = std::make_unique<mvp::runner::Runner>(
        sys, mvp::runner::RunOptions{a.headless, sys.runner.duration, a.speed}, &log);
  } catch (const std::exception& e) {
    std::cerr << "cannot compose the system: " << e.what() << '\n';
    return mvp::runner::kExitValidation;
  }

  std::optional<mvp::api::Server> server;
  if (!a.no_api) {
    server.emplace(*runner);
    const auto [host, port] = mvp::api::parse_bind(sys.runner.bind);
    const int bound = server->bind(host, port);
    if (bound < 0) {
      std::cerr << "cannot bind API to " << sys.runner.bind << '\n';
      return mvp::runner::kExitValidation;
    }
    server->start();
    std::cerr << "API listening on " << host << ':' << bound << '\n';
  }

  g_runner = runner.get();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int code = runner->run();
  g_runner = nullptr;
  if (server) server->stop();

  if (const auto s = runner->snapshot(); s->record && s->record->flags.fault)
    std::cerr << "fault: " << s->record->fault_reason << '\n';
  return code;
}

int validate(const RunArgs& a) {
  try {
    const auto sys = mvp::runner::load_and_validate(a.config, overrides(a));
    mvp::runner::Simulation sim(sys);
    std::cout << "ok: vehicle '" << sys.vehicle.name << "', " << sys.vehicle.thrusters.columns()
              << " allocation columns, " << sys.vehicle.modes.size() << " control modes, " << sys.fsm.states.size()
              << " states";
    if (sys.mission) std::cout << ", " << sys.mission->waypoints.size() << " waypoints";
    std::cout << '\n';
    return mvp::runner::kExitOk;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return mvp::runner::kExitValidation;
  }
}

int plot(const std::string& log_path, const std::string& out_path) {
  std::ifstream in(log_path);
  if (!in) {
    std::cerr << "cannot open " << log_path << '\n';
    return mvp::runner::kExitValidation;
  }
  try {
    const auto log = mvp::telemetry::read_log(in);
    std::ofstream out(out_path);
    out << mvp::plot::render(mvp::plot::panels_from_log(log));
    std::cout << "wrote " << out_path << " (" << log.records.size() << " records)\n";
    return mvp::runner::kExitOk;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return mvp::runner::kExitValidation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underwater vehicle GNC simulator"};
  app.require_subcommand(1);

  RunArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "Runner config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--mission", args.mission, "Mission file (.yaml or .kml), overrides the config");
    sub->add_option("--duration", args.duration, "Simulated seconds to run");
    sub->add_option("--seed", args.seed, "Noise seed");
    sub->add_option("--log", args.log, "Telemetry log path");
    sub->add_option("--bind", args.bind, "API address host:port");
  };

  auto* run_cmd = app.add_subcommand("run", "Run the simulation loop");
  add_common(run_cmd);
  run_cmd->add_flag("--headless", args.headless, "Run as fast as possible");
  run_cmd->add_flag("--no-api", args.no_api, "Do not start the HTTP API");
  run_cmd->add_option("--speed", args.speed, "Real-time pacing factor")->check(CLI::PositiveNumber);

  auto* validate_cmd = app.add_subcommand("validate", "Load and check the configuration");
  add_common(validate_cmd);

  std::string log_path, out_path = "telemetry.svg";
  auto* plot_cmd = app.add_subcommand("plot", "Render a telemetry log to SVG");
  plot_cmd->add_option("--log", log_path, "Telemetry log")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("-o,--output", out_path, "SVG output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mvp::runner::kExitValidation;
  }

  if (*run_cmd) return run(args);
  if (*validate_cmd) return validate(args);
  return plot(log_path, out_path);
}
