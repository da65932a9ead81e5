#pragma once

// Planner worker: the only thread touching the session. Clients talk to it
// through an ordered inbox; its messages leave through `deliver`.

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

#include "mtlsynth/reactive/session.hpp"

namespace mtlsynth::reactive {

/// Simulated: each step solves with the full per-step budget (pivot budget
/// by default) and time advances by dt per step. Wall: the budget is real
/// time, capped at the step period.
enum class ClockMode { Simulated, Wall };

/// Read-only view published after every worker iteration.
struct WorkerStatus {
  int step = 0;
  int horizon = 0;
  int clients = 0;
  bool paused = false;
  bool done = false;
  double speed = 1.0;
  std::uint64_t seq = 0;
  std::string scenario;
};

inline WorkerStatus status_of(const Session& session) {
  WorkerStatus s;
  s.step = session.step();
  s.horizon = session.runner().horizon();
  s.clients = session.clients();
  s.paused = session.paused();
  s.done = session.done();
  s.speed = session.speed();
  s.seq = session.seq();
  s.scenario = scenario_json(session.runner().scenario()).dump();
  return s;
}

class PlannerWorker {
public:
  using Deliver = std::function<void(const Outbound&)>;
  using Publish = std::function<void(const WorkerStatus&)>;

  /// Steps are paced at dt / speed real seconds; `pace = false` runs them
  /// back to back.
  PlannerWorker(Session& session, ClockMode mode, Deliver deliver, Publish publish = {}, bool pace = true,
                bool stop_when_done = false)
      : session_(session),
        mode_(mode),
        deliver_(std::move(deliver)),
        publish_(std::move(publish)),
        pace_(pace),
        stop_when_done_(stop_when_done),
        step_deadline_(session.runner().options().step_deadline) {}

  ~PlannerWorker() {
    stop();
    join();
  }

  void post_join(int client) { push({Input::Join, client, {}}); }
  void post_leave(int client) { push({Input::Leave, client, {}}); }
  void post_command(int client, std::string text) { push({Input::Command, client, std::move(text)}); }

  void stop() { push({Input::Stop, -1, {}}); }

  void start() { thread_ = std::thread([this] { run(); }); }
  void join() {
    if (thread_.joinable()) thread_.join();
  }

  /// Blocks until stopped.
  void run() {
    using Clock = std::chrono::steady_clock;
    auto next_due = Clock::now();
    bool was_runnable = session_.runnable();
    publish();
    for (;;) {
      std::deque<Input> batch;
      {
        std::unique_lock lk(mutex_);
        const auto ready = [this] { return !inbox_.empty(); };
        if (session_.runnable()) {
          cv_.wait_until(lk, next_due, ready);
        } else {
          cv_.wait(lk, ready);
        }
        batch.swap(inbox_);
      }
      for (auto& in : batch) {
        switch (in.type) {
          case Input::Stop:
            publish();
            return;
          case Input::Join:
            emit(session_.join(in.client));
            break;
          case Input::Leave:
            session_.leave(in.client);
            break;
          case Input::Command:
            emit(session_.handle(in.client, in.text));
            break;
        }
      }
      const bool runnable = session_.runnable();
      if (runnable && !was_runnable) next_due = Clock::now();
      was_runnable = runnable;
      if (runnable && (!pace_ || Clock::now() >= next_due)) {
        const double period = session_.runner().scenario().system.dt / session_.speed();
        if (mode_ == ClockMode::Wall) {
          session_.runner().set_budget_clock(BudgetClock::Wall);
          session_.runner().set_step_deadline(std::min(step_deadline_, period));
        }
        const auto began = Clock::now();
        emit(session_.tick());
        const auto step = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(period));
        next_due = std::max(began + step, Clock::now());
        if (!pace_) next_due = Clock::now();
        was_runnable = session_.runnable();
      }
      publish();
      if (stop_when_done_ && session_.done()) return;
    }
  }

private:
  struct Input {
    enum Type { Join, Leave, Command, Stop } type;
    int client;
    std::string text;
  };

  void push(Input in) {
    {
      std::lock_guard lk(mutex_);
      inbox_.push_back(std::move(in));
    }
    cv_.notify_one();
  }

  void emit(const std::vector<Outbound>& out) {
    for (const auto& o : out) deliver_(o);
  }

  void publish() {
    if (publish_) publish_(status_of(session_));
  }

  Session& session_;
  ClockMode mode_;
  Deliver deliver_;
  Publish publish_;
  bool pace_;
  bool stop_when_done_;
  double step_deadline_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Input> inbox_;
  std::thread thread_;
};

}  // namespace mtlsynth::reactive
