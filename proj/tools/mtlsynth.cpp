// mtlsynth: plan, rhc, monitor and plot on scenario files.

#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>

#include <iostream>
#include <thread>

#include "mtlsynth/cli.hpp"
#include "mtlsynth/reactive/server.hpp"

using namespace mtlsynth;

namespace {

struct ServeArgs {
  std::string endpoint;
  bool wall_clock = false;
  double speed = 1.0;
  bool paused = false;
  bool exit_when_done = false;
};

std::pair<std::string, unsigned short> split_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw Error("--serve expects ADDR:PORT, got '" + s + "'");
  const std::string port = s.substr(colon + 1);
  int value = -1;
  try {
    std::size_t used = 0;
    value = std::stoi(port, &used);
    if (used != port.size()) value = -1;
  } catch (const std::exception&) {
  }
  if (value < 0 || value > 65535) throw Error("--serve: bad port '" + port + "'");
  return {colon == 0 ? std::string("127.0.0.1") : s.substr(0, colon), static_cast<unsigned short>(value)};
}

int serve(const cli::RhcArgs& args, const ServeArgs& sa) {
  const Scenario sc = load_scenario(args.scenario);
  const auto updates = args.events.empty() ? std::vector<PredicateUpdate>{} : load_updates(args.events, sc);
  if (!(sa.speed > 0.0 && sa.speed <= 1000.0)) throw Error("--speed must lie in (0, 1000]");
  const auto [address, port] = split_endpoint(sa.endpoint);

  // Signals are handled by a dedicated thread; block them everywhere else.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  cli::RhcArtifacts artifacts(args.out_dir, args.timings);
  reactive::SessionOptions so;
  so.rhc = cli::rhc_options(args, sc);
  so.speed = sa.speed;
  so.start_paused = sa.paused;
  reactive::Session* session_ptr = nullptr;
  int code = cli::kOk;
  so.on_step = [&](const StepEvent& ev, const RhcRunner& runner) {
    if (ev.step == 0) artifacts.initial_geometry = cli::geometry_by_name(session_ptr->initial());
    artifacts.on_step(ev, runner);
  };
  so.on_done = [&](const RhcResult& r, const RhcRunner& runner) {
    artifacts.on_done(r, runner);
    cli::print_rhc_result(std::cout, r, runner);
    std::cout.flush();
    code = cli::exit_code(r.status);
  };
  reactive::Session session(sc, so, updates);
  session_ptr = &session;

  reactive::ServerOptions opts;
  opts.address = address;
  opts.port = port;
  opts.clock = sa.wall_clock ? reactive::ClockMode::Wall : reactive::ClockMode::Simulated;
  opts.exit_when_done = sa.exit_when_done;
  reactive::Server server(session, opts);
  server.start();
  std::cout << "listening on http://" << address << ':' << server.port() << " (websocket /ws)" << std::endl;
  std::thread([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  }).detach();
  server.wait();
  return session.done() ? code : cli::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lazy MTL trajectory synthesis"};
  app.require_subcommand(1);

  cli::PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "open-loop synthesis");
  plan_cmd->add_option("scenario", plan.scenario, "scenario file")->required();
  plan_cmd->add_option("-o,--output", plan.out_dir, "artifact directory")->capture_default_str();
  plan_cmd->add_flag("--full-encoding", plan.full_encoding, "activate every row group up front");
  plan_cmd->add_option("--max-iterations", plan.max_iterations, "cap on MILP solves (0: N * occurrences)")
      ->check(CLI::NonNegativeNumber);
  plan_cmd->add_option("--time-limit", plan.time_limit, "seconds (0: unlimited)")->check(CLI::NonNegativeNumber);
  plan_cmd->add_flag("--unicycle", plan.unicycle, "also write the unicycle tracking trace");

  cli::RhcArgs rhc;
  ServeArgs sa;
  auto* rhc_cmd = app.add_subcommand("rhc", "receding-horizon synthesis");
  rhc_cmd->add_option("scenario", rhc.scenario, "scenario file")->required();
  rhc_cmd->add_option("--events", rhc.events, "scripted predicate updates (JSON)");
  rhc_cmd->add_option("-o,--output", rhc.out_dir, "artifact directory")->capture_default_str();
  rhc_cmd->add_option("--deadline", rhc.deadline, "per-step budget in seconds (default: scenario rhc.deadline)")
      ->check(CLI::NonNegativeNumber);
  rhc_cmd->add_option("--startup-deadline", rhc.startup_deadline, "budget for step 0 in seconds")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  rhc_cmd->add_option("--step-iterations", rhc.step_iterations, "cap on MILP solves per step")
      ->check(CLI::PositiveNumber);
  rhc_cmd->add_flag("--timings", rhc.timings, "record solve_ms in events.jsonl");
  rhc_cmd->add_flag("--wall-budget", rhc.wall_budget, "budget steps in real seconds instead of solver pivots");
  rhc_cmd->add_option("--serve", sa.endpoint, "run the reactive server on ADDR:PORT");
  rhc_cmd->add_flag("--wall-clock", sa.wall_clock, "pace in real time; budgets are real seconds capped at the step period")
      ->needs("--serve");
  rhc_cmd->add_option("--speed", sa.speed, "playback speed factor")->needs("--serve")->capture_default_str();
  rhc_cmd->add_flag("--paused", sa.paused, "wait for a resume command")->needs("--serve");
  rhc_cmd->add_flag("--exit-when-done", sa.exit_when_done, "shut down after the run finishes")->needs("--serve");

  cli::MonitorArgs mon;
  auto* mon_cmd = app.add_subcommand("monitor", "robustness of a trajectory CSV");
  mon_cmd->add_option("trajectory", mon.trajectory, "trajectory CSV")->required();
  mon_cmd->add_option("--predicates", mon.predicates, "TOML file with [[predicates]] (a scenario file works)")
      ->required();
  mon_cmd->add_option("--formula", mon.formula, "MTL formula (default: the file's formula)");
  mon_cmd->add_option("--rho", mon.rho, "resize margin (default: the file's rho, else 0)");
  mon_cmd->add_flag("--json", mon.json_output, "JSON output");

  cli::PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "SVG figures from plan or rhc artifacts");
  plot_cmd->add_option("dir", plot.dir, "artifact directory")->required();
  plot_cmd->add_option("-o,--output", plot.out_dir, "output directory (default: the artifact directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli::kOk : cli::kInvalid;
  }

  try {
    if (*plan_cmd) return cli::cmd_plan(plan, std::cout);
    if (*rhc_cmd) return sa.endpoint.empty() ? cli::cmd_rhc(rhc, std::cout) : serve(rhc, sa);
    if (*mon_cmd) return cli::cmd_monitor(mon, std::cout);
    if (*plot_cmd) return cli::cmd_plot(plot, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kInvalid;
  }
  return cli::kInvalid;
}
