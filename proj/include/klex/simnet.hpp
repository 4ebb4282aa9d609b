#pragma once

#include <cstdint>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "klex/appmodel.hpp"
#include "klex/protocol.hpp"
#include "klex/rng.hpp"
#include "klex/topology.hpp"

namespace klex {

/// Global snapshot: every process, every channel's FIFO content and the
/// application side. Channels are indexed densely by TreeTopology.
struct Configuration {
  std::vector<ProcessState> procs;
  std::vector<std::deque<Message>> channels;
  AppState app;
  std::uint64_t step = 0;
  std::uint64_t timer = 0;  // steps since the root last restarted its timer
  std::uint64_t next_tag = 1;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

enum class EventKind : std::uint8_t { Deliver, Timeout, Local, Idle };

/// One scheduler decision.
struct Choice {
  EventKind kind = EventKind::Idle;
  ProcessId proc = 0;
  ChannelLabel channel = 0;  // Deliver only

  static Choice deliver(ProcessId p, ChannelLabel ch) { return {EventKind::Deliver, p, ch}; }
  static Choice local(ProcessId p) { return {EventKind::Local, p, 0}; }
  static Choice timeout(ProcessId root) { return {EventKind::Timeout, root, 0}; }
  static Choice idle() { return {}; }

  friend bool operator==(const Choice&, const Choice&) = default;
};

/// Replay file line for a choice.
inline std::string to_string(const Choice& c) {
  switch (c.kind) {
    case EventKind::Deliver: return "deliver " + std::to_string(c.proc) + " " + std::to_string(c.channel);
    case EventKind::Timeout: return "timeout";
    case EventKind::Local: return "local " + std::to_string(c.proc);
    case EventKind::Idle: return "idle";
  }
  return "?";
}

/// Parses a replay file: one of `deliver <p> <ch>`, `local <p>`, `timeout`, `idle` per line.
inline std::vector<Choice> parse_replay(std::istream& in, const TreeTopology& t) {
  std::vector<Choice> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string kw, trailing;
    if (!(fields >> kw)) continue;
    const auto bad = [&] { return ScenarioError("replay line " + std::to_string(line_no) + ": malformed `" + line + "`"); };
    long long p = -1, ch = -1;
    if (kw == "deliver") {
      if (!(fields >> p >> ch) || p < 0 || ch < 0 || static_cast<std::size_t>(p) >= t.size() ||
          static_cast<std::uint32_t>(ch) >= t.degree(static_cast<ProcessId>(p))) {
        throw bad();
      }
      out.push_back(Choice::deliver(static_cast<ProcessId>(p), static_cast<ChannelLabel>(ch)));
    } else if (kw == "local") {
      if (!(fields >> p) || p < 0 || static_cast<std::size_t>(p) >= t.size()) throw bad();
      out.push_back(Choice::local(static_cast<ProcessId>(p)));
    } else if (kw == "timeout") {
      out.push_back(Choice::timeout(t.root()));
    } else if (kw == "idle") {
      out.push_back(Choice::idle());
    } else {
      throw bad();
    }
    if (fields >> trailing) throw bad();
  }
  return out;
}

/// Everything that happened in one atomic step.
struct StepRecord {
  std::uint64_t step = 0;
  Choice choice;
  std::optional<Message> received;
  std::vector<Send> sends;
  bool entered_cs = false;
  bool timer_restarted = false;
  std::optional<TraversalEnd> traversal_end;
  std::vector<ProcessId> requested;  // Out -> Req by the application this step
};

/// `step=<i> proc=<p> event=<kind> msg=<msg> ch=<label> sends=[<ch>:<msg>,...]`
inline std::string format_trace_line(const StepRecord& r) {
  std::string line = "step=" + std::to_string(r.step);
  const bool has_proc = r.choice.kind != EventKind::Idle;
  line += " proc=" + (has_proc ? std::to_string(r.choice.proc) : std::string("-"));
  switch (r.choice.kind) {
    case EventKind::Deliver: line += " event=deliver"; break;
    case EventKind::Timeout: line += " event=timeout"; break;
    case EventKind::Local: line += " event=local"; break;
    case EventKind::Idle: line += " event=idle"; break;
  }
  line += " msg=" + (r.received ? to_string(*r.received) : std::string("-"));
  line += " ch=" + (r.choice.kind == EventKind::Deliver ? std::to_string(r.choice.channel) : std::string("-"));
  line += " sends=[";
  for (std::size_t i = 0; i < r.sends.size(); ++i) {
    if (i) line += ',';
    line += std::to_string(r.sends[i].channel) + ":" + to_string(r.sends[i].message);
  }
  line += "]";
  return line;
}

/// Default root timeout: well above one ring circulation with maximal queueing.
inline std::uint64_t default_timeout(const ProtocolParams& p) {
  return 20ull * 2 * (p.n - 1) * (p.c_max + p.ell + 3);
}

/// Deterministic discrete-event network of FIFO channels running the protocol.
class Simulator {
public:
  Simulator(TreeTopology topology, ProtocolParams params, Configuration init, std::uint64_t timeout)
      : topo_(std::move(topology)), params_(params), config_(std::move(init)), timeout_(timeout) {
    params_.validate();
    if (params_.n != topo_.size()) throw std::invalid_argument("params.n does not match the topology");
    if (timeout_ == 0) throw std::invalid_argument("timeout must be positive");
    if (config_.procs.size() != topo_.size() || config_.channels.size() != topo_.channel_count() ||
        config_.app.procs.size() != topo_.size()) {
      throw StructuralError("configuration shape does not match the topology");
    }
  }

  const TreeTopology& topology() const noexcept { return topo_; }
  const ProtocolParams& params() const noexcept { return params_; }
  const Configuration& config() const noexcept { return config_; }
  Configuration& mutable_config() noexcept { return config_; }
  std::uint64_t timeout() const noexcept { return timeout_; }

  ProcessContext context(ProcessId p) const { return ProcessContext{topo_.is_root(p), topo_.degree(p), params_}; }

  bool timeout_due() const noexcept { return config_.timer >= timeout_; }

  /// ReleaseCS() as seen by process p right now.
  bool release_cs(ProcessId p) const {
    return config_.procs[p].state == CsState::In && config_.app.release_cs(p);
  }

  const std::deque<Message>& incoming(ProcessId p, ChannelLabel label) const {
    return config_.channels[topo_.incoming_channel(p, label)];
  }

  bool has_local_work(ProcessId p) const { return klex::has_local_work(config_.procs[p], release_cs(p)); }

  bool has_event(ProcessId p) const {
    if (topo_.is_root(p) && timeout_due()) return true;
    for (ChannelLabel i = 0; i < topo_.degree(p); ++i) {
      if (!incoming(p, i).empty()) return true;
    }
    return has_local_work(p);
  }

  bool is_enabled(const Choice& c) const {
    switch (c.kind) {
      case EventKind::Deliver:
        return c.proc < topo_.size() && c.channel < topo_.degree(c.proc) && !incoming(c.proc, c.channel).empty();
      case EventKind::Timeout: return c.proc == topo_.root() && timeout_due();
      case EventKind::Local: return c.proc < topo_.size() && has_local_work(c.proc);
      case EventKind::Idle: return true;
    }
    return false;
  }

  /// Every enabled non-idle choice, in (process, kind, channel) order.
  std::vector<Choice> enabled_choices() const {
    std::vector<Choice> out;
    for (ProcessId p = 0; p < topo_.size(); ++p) {
      if (topo_.is_root(p) && timeout_due()) out.push_back(Choice::timeout(p));
      for (ChannelLabel i = 0; i < topo_.degree(p); ++i) {
        if (!incoming(p, i).empty()) out.push_back(Choice::deliver(p, i));
      }
      if (has_local_work(p)) out.push_back(Choice::local(p));
    }
    return out;
  }

  /// Application phase of a step, run before the scheduler picks an event.
  void begin_step() {
    tick_cs(config_.app, config_.procs);
    requested_ = apply_workload(config_.step, config_.app, config_.procs);
    ++config_.timer;
  }

  /// Protocol phase of a step: one event plus local actions of that process.
  StepRecord execute(const Choice& c) {
    if (!is_enabled(c)) throw StructuralError("scheduler chose a disabled event: " + to_string(c));
    StepRecord rec;
    rec.step = config_.step;
    rec.choice = c;
    rec.requested = std::move(requested_);
    requested_.clear();

    if (c.kind != EventKind::Idle) {
      const ProcessId p = c.proc;
      const auto ctx = context(p);
      HandlerOutput out{config_.procs[p]};
      if (c.kind == EventKind::Deliver) {
        auto& fifo = config_.channels[topo_.incoming_channel(p, c.channel)];
        const Message m = fifo.front();
        fifo.pop_front();
        rec.received = m;
        out = deliver(std::move(out.state), c.channel, m, ctx);
      } else if (c.kind == EventKind::Timeout) {
        out = on_timeout_root(std::move(out.state));
      }
      const bool release = out.state.state == CsState::In && config_.app.release_cs(p);
      auto local = local_actions(std::move(out.state), ctx, release);

      config_.procs[p] = std::move(local.state);
      rec.sends = std::move(out.sends);
      rec.sends.insert(rec.sends.end(), local.sends.begin(), local.sends.end());
      for (auto& s : rec.sends) {
        if (s.message.is(MessageKind::ResT) && s.message.tag == 0) s.message.tag = config_.next_tag++;
        config_.channels[topo_.outgoing_channel(p, s.channel)].push_back(s.message);
      }
      rec.entered_cs = local.entered_cs;
      if (local.entered_cs) on_enter_cs(config_.app, p);
      rec.timer_restarted = out.restart_timer;
      if (out.restart_timer) config_.timer = 0;
      rec.traversal_end = out.traversal_end;
    }
    ++config_.step;
    return rec;
  }

  StepRecord step(const Choice& c) {
    begin_step();
    return execute(c);
  }

private:
  TreeTopology topo_;
  ProtocolParams params_;
  Configuration config_;
  std::uint64_t timeout_;
  std::vector<ProcessId> requested_;
};

class Scheduler {
public:
  virtual ~Scheduler() = default;
  /// Next choice, or nullopt when nothing is enabled (an idle step).
  virtual std::optional<Choice> pick(const Simulator& sim) = 0;
  virtual bool exhausted() const { return false; }
};

/// Cycles over processes; each process cycles over its incoming channels. The
/// root's expired timeout takes precedence when the root is served.
class RoundRobinScheduler final : public Scheduler {
public:
  std::optional<Choice> pick(const Simulator& sim) override {
    const auto& t = sim.topology();
    const auto n = t.size();
    if (channel_cursor_.size() != n) channel_cursor_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = static_cast<ProcessId>((cursor_ + i) % n);
      if (auto c = pick_event(sim, p)) {
        cursor_ = (p + 1) % n;
        return c;
      }
    }
    return std::nullopt;
  }

private:
  std::optional<Choice> pick_event(const Simulator& sim, ProcessId p) {
    const auto& t = sim.topology();
    if (t.is_root(p) && sim.timeout_due()) return Choice::timeout(p);
    const auto deg = t.degree(p);
    for (ChannelLabel j = 0; j < deg; ++j) {
      const ChannelLabel label = (channel_cursor_[p] + j) % deg;
      if (!sim.incoming(p, label).empty()) {
        channel_cursor_[p] = (label + 1) % deg;
        return Choice::deliver(p, label);
      }
    }
    if (sim.has_local_work(p)) return Choice::local(p);
    return std::nullopt;
  }

  std::size_t cursor_ = 0;
  std::vector<ChannelLabel> channel_cursor_;
};

/// Seeded random choice among enabled processes. A process left waiting for
/// `window` consecutive picks is served next, so every enabled process runs at
/// least once per window.
class RandomFairScheduler final : public Scheduler {
public:
  RandomFairScheduler(std::uint64_t seed, std::size_t window) : rng_(seed), window_(window) {}

  std::optional<Choice> pick(const Simulator& sim) override {
    const auto& t = sim.topology();
    const auto n = t.size();
    if (waiting_.size() != n) waiting_.assign(n, 0);
    std::vector<ProcessId> enabled;
    for (ProcessId p = 0; p < n; ++p) {
      if (sim.has_event(p)) enabled.push_back(p);
      else waiting_[p] = 0;
    }
    if (enabled.empty()) return std::nullopt;

    ProcessId chosen = enabled[rng_.uniform(0, enabled.size() - 1)];
    std::size_t oldest = 0;
    for (ProcessId p : enabled) {
      if (waiting_[p] >= window_ && waiting_[p] > oldest) {
        oldest = waiting_[p];
        chosen = p;
      }
    }
    for (ProcessId p : enabled) waiting_[p] = p == chosen ? 0 : waiting_[p] + 1;

    if (t.is_root(chosen) && sim.timeout_due()) return Choice::timeout(chosen);
    std::vector<Choice> events;
    for (ChannelLabel i = 0; i < t.degree(chosen); ++i) {
      if (!sim.incoming(chosen, i).empty()) events.push_back(Choice::deliver(chosen, i));
    }
    if (sim.has_local_work(chosen)) events.push_back(Choice::local(chosen));
    return events[rng_.uniform(0, events.size() - 1)];
  }

private:
  Rng rng_;
  std::size_t window_;
  std::vector<std::size_t> waiting_;
};

/// Replays an explicit list of choices; the run ends when the list does.
class ReplayScheduler final : public Scheduler {
public:
  explicit ReplayScheduler(std::vector<Choice> choices) : choices_(std::move(choices)) {}

  std::optional<Choice> pick(const Simulator&) override { return choices_.at(next_++); }
  bool exhausted() const override { return next_ >= choices_.size(); }

private:
  std::vector<Choice> choices_;
  std::size_t next_ = 0;
};

/// Receives every step of a run. Observers are pure readers of the simulator.
class Observer {
public:
  virtual ~Observer() = default;
  virtual void on_start(const Simulator&) {}
  virtual void before_event(const Simulator&, const Choice&) {}
  virtual void after_step(const Simulator&, const StepRecord&) {}
  /// True once the observer has seen enough; ends the run.
  virtual bool done() const { return false; }
};

enum class StopReason : std::uint8_t { Budget, Terminal, ReplayEnd };

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::Budget: return "budget exhausted";
    case StopReason::Terminal: return "monitor terminal condition";
    case StopReason::ReplayEnd: return "replay exhausted";
  }
  return "?";
}

struct RunOutcome {
  std::uint64_t steps = 0;
  StopReason reason = StopReason::Budget;
};

/// Runs up to `budget` steps. Trace lines go to `trace` when given.
inline RunOutcome run(Simulator& sim, Scheduler& scheduler, std::uint64_t budget, std::span<Observer* const> observers,
                      std::ostream* trace = nullptr) {
  RunOutcome outcome;
  for (auto* o : observers) o->on_start(sim);
  while (outcome.steps < budget) {
    if (scheduler.exhausted()) {
      outcome.reason = StopReason::ReplayEnd;
      return outcome;
    }
    sim.begin_step();
    const Choice choice = scheduler.pick(sim).value_or(Choice::idle());
    for (auto* o : observers) o->before_event(sim, choice);
    const StepRecord rec = sim.execute(choice);
    ++outcome.steps;
    if (trace) *trace << format_trace_line(rec) << '\n';
    bool stop = false;
    for (auto* o : observers) {
      o->after_step(sim, rec);
      stop = stop || o->done();
    }
    if (stop) {
      outcome.reason = StopReason::Terminal;
      return outcome;
    }
  }
  if (scheduler.exhausted()) outcome.reason = StopReason::ReplayEnd;
  return outcome;
}

}  // namespace klex
