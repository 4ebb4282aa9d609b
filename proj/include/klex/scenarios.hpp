#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "klex/faults.hpp"
#include "klex/monitor.hpp"

namespace klex {

/// A fully specified regression scenario.
struct Scenario {
  std::string name;
  TreeTopology topology;
  ProtocolParams params;
  Configuration init;
  std::vector<WorkloadEvent> workload;
  std::vector<Choice> replay;  // empty: run under round robin
};

// Built-in scenario text. The files under scenarios/ carry the same content.

// Deadlock star: root 0 with four greedy children.
inline constexpr std::string_view kFig2Topology =
    "n 5 root 0\n"
    "0: 1 2 3 4\n"
    "1: 0\n"
    "2: 0\n"
    "3: 0\n"
    "4: 0\n";

inline constexpr std::string_view kFig2Workload =
    "req 0 1 3 5\n"
    "req 0 2 3 5\n"
    "req 0 3 3 5\n"
    "req 0 4 3 5\n";

// Livelock star: root r = 0, a = 1 on the root's channel 0, b = 2 on channel 1.
inline constexpr std::string_view kFig3Topology =
    "n 3 root 0\n"
    "0: 1 2\n"
    "1: 0\n"
    "2: 0\n";

/// One period of the livelock interleaving. Starting from configuration (i):
/// r takes the unit queued from a and enters, a reserves one unit, b takes its
/// unit and enters, the pusher travels a -> r -> b -> r -> a, r and b leave their
/// critical sections, the pusher strips a, and r forwards b's released unit to a.
inline constexpr std::string_view kFig3ReplayPeriod =
    "deliver 0 0\n"
    "deliver 1 0\n"
    "deliver 2 0\n"
    "deliver 0 0\n"
    "deliver 2 0\n"
    "deliver 0 1\n"
    "local 0\n"
    "local 2\n"
    "deliver 1 0\n"
    "deliver 0 1\n";

inline constexpr std::uint64_t kFig3Period = 10;

inline std::vector<WorkloadEvent> parse_workload_text(std::string_view text, std::size_t n, std::uint32_t k) {
  std::istringstream in{std::string(text)};
  return parse_scenario(in, n, k);
}

inline std::string fig3_workload_text(std::uint64_t periods) {
  std::ostringstream out;
  out << "req 0 1 2 inf\n";
  for (std::uint64_t i = 0; i < periods; ++i) {
    out << "req " << i * kFig3Period << " 0 1 6\n";
    out << "req " << i * kFig3Period << " 2 1 5\n";
  }
  return out.str();
}

inline std::string fig3_replay_text(std::uint64_t periods) {
  std::string out;
  for (std::uint64_t i = 0; i < periods; ++i) out += kFig3ReplayPeriod;
  return out;
}

/// Five units spread over the children's incoming channels, every child asking
/// for three. Without a pusher no child can ever collect enough.
inline Scenario fig2_scenario(bool with_pusher) {
  auto topo = parse_topology(std::string(kFig2Topology));
  ProtocolParams params{3, 5, 5, 2};
  params.replenish_push = with_pusher;
  params.replenish_prio = with_pusher;
  auto workload = parse_workload_text(kFig2Workload, topo.size(), params.k);
  auto init = empty_configuration(topo, workload);
  init.procs[0].my_c = 1;
  const std::uint32_t units[] = {2, 1, 1, 1};
  for (ChannelLabel ch = 0; ch < 4; ++ch) {
    auto& fifo = init.channels[topo.outgoing_channel(0, ch)];
    for (std::uint32_t i = 0; i < units[ch]; ++i) fifo.push_back(Message::res_t(init.next_tag++));
  }
  auto& first = init.channels[topo.outgoing_channel(0, 0)];
  if (with_pusher) {
    first.push_back(Message::prio_t());
    first.push_back(Message::push_t());
  }
  first.push_back(Message::ctrl(1, false, 0, 0));
  return Scenario{with_pusher ? "fig2-full" : "fig2-deadlock", std::move(topo), params, std::move(init),
                  std::move(workload), {}};
}

/// Three units, one pusher. a needs two units forever-long; r and b keep
/// requesting one. Without the priority token the replay strips a every period.
inline Scenario fig3_scenario(bool with_priority, std::uint64_t periods = 3) {
  auto topo = parse_topology(std::string(kFig3Topology));
  ProtocolParams params{2, 3, 3, 2};
  params.replenish_push = with_priority;
  params.replenish_prio = with_priority;
  auto workload = parse_workload_text(fig3_workload_text(periods), topo.size(), params.k);
  if (with_priority) workload.front().cs_duration = 4;
  auto init = empty_configuration(topo, workload);
  auto& r_to_a = init.channels[topo.outgoing_channel(0, 0)];
  auto& r_to_b = init.channels[topo.outgoing_channel(0, 1)];
  auto& a_to_r = init.channels[topo.outgoing_channel(1, 0)];
  r_to_a.push_back(Message::res_t(init.next_tag++));
  r_to_b.push_back(Message::res_t(init.next_tag++));
  a_to_r.push_back(Message::res_t(init.next_tag++));
  a_to_r.push_back(Message::push_t());
  std::vector<Choice> replay;
  if (with_priority) {
    init.procs[1].prio = 0;
  } else {
    std::istringstream in(fig3_replay_text(periods));
    replay = parse_replay(in, topo);
  }
  return Scenario{with_priority ? "fig3-priority" : "fig3-livelock", std::move(topo), params, std::move(init),
                  std::move(workload), std::move(replay)};
}

/// Stops once every workload event fired and no process is requesting or in CS.
class DrainedDetector final : public Observer {
public:
  void after_step(const Simulator& sim, const StepRecord&) override {
    const auto& c = sim.config();
    drained_ = !c.app.has_pending() && std::all_of(c.procs.begin(), c.procs.end(), [](const ProcessState& s) {
      return s.state == CsState::Out;
    });
  }
  bool done() const override { return drained_; }

private:
  bool drained_ = false;
};

struct VariantResult {
  std::string scenario;
  bool expected = false;  // the behavior the figure narrates was reproduced
  std::string detail;
};

struct FigureReport {
  std::string name;
  Verdict verdict = Verdict::Fail;
  std::vector<VariantResult> variants;

  std::string text() const {
    std::ostringstream out;
    out << "figure: " << name << '\n' << "verdict: " << verdict_name(verdict) << '\n';
    for (const auto& v : variants) {
      out << v.scenario << ": " << (v.expected ? "reproduced" : "NOT reproduced") << " (" << v.detail << ")\n";
    }
    return out.str();
  }
};

inline std::string describe_requests(const RequestTracker& tracker) {
  std::size_t satisfied = 0;
  for (const auto& r : tracker.requests()) satisfied += r.satisfied_at.has_value();
  return std::to_string(satisfied) + "/" + std::to_string(tracker.requests().size()) + " requests satisfied";
}

/// Small observer adapter so a RequestTracker can ride along a run.
class RequestObserver final : public Observer {
public:
  void on_start(const Simulator& sim) override { tracker.start(sim.config()); }
  void after_step(const Simulator& sim, const StepRecord& rec) override { tracker.observe(sim.config(), rec.step + 1); }
  RequestTracker tracker;
};

inline bool all_satisfied(const Simulator& sim, const RequestTracker& tracker) {
  const auto& c = sim.config();
  if (c.app.has_pending()) return false;
  for (const auto& r : tracker.requests()) {
    if (!r.satisfied_at) return false;
  }
  return true;
}

inline VariantResult run_fig2(bool with_pusher, std::ostream* trace) {
  auto sc = fig2_scenario(with_pusher);
  const auto timeout = default_timeout(sc.params);
  Simulator sim(sc.topology, sc.params, sc.init, timeout);
  RoundRobinScheduler rr;
  RequestObserver requests;
  QuiescenceDetector quiet(timeout);
  DrainedDetector drained;
  std::vector<Observer*> obs{&requests, &quiet};
  if (with_pusher) obs.push_back(&drained);
  const auto outcome = run(sim, rr, 50 * timeout, obs, trace);
  VariantResult v;
  v.scenario = sc.name;
  const auto summary = describe_requests(requests.tracker) + " after " + std::to_string(outcome.steps) + " steps";
  if (with_pusher) {
    v.expected = !quiet.quiescent_at() && all_satisfied(sim, requests.tracker);
    v.detail = summary;
  } else {
    const auto held = census(sim.topology(), sim.config()).res_tokens;
    v.expected = quiet.quiescent_at().has_value() && requests.tracker.entries() == 0;
    v.detail = (quiet.quiescent_at() ? "quiescent at step " + std::to_string(*quiet.quiescent_at()) : "no quiescence") +
               ", " + std::to_string(held) + " units all reserved, " + summary;
  }
  return v;
}

inline VariantResult run_fig3(bool with_priority, std::ostream* trace) {
  auto sc = fig3_scenario(with_priority);
  const auto timeout = default_timeout(sc.params);
  Simulator sim(sc.topology, sc.params, sc.init, timeout);
  RequestObserver requests;
  VariantResult v;
  v.scenario = sc.name;
  if (with_priority) {
    RoundRobinScheduler rr;
    DrainedDetector drained;
    std::vector<Observer*> obs{&requests, &drained};
    const auto outcome = run(sim, rr, 50 * timeout, obs, trace);
    const bool a_in = std::any_of(requests.tracker.requests().begin(), requests.tracker.requests().end(),
                                  [](const RequestRecord& r) { return r.proc == 1 && r.satisfied_at; });
    v.expected = a_in && all_satisfied(sim, requests.tracker);
    v.detail = std::string(a_in ? "a satisfied, " : "a not satisfied, ") + describe_requests(requests.tracker) +
               " after " + std::to_string(outcome.steps) + " steps";
  } else {
    ReplayScheduler replay(sc.replay);
    CycleDetector cycles;
    std::vector<Observer*> obs{&requests, &cycles};
    const auto outcome = run(sim, replay, sc.replay.size(), obs, trace);
    const bool a_starved = sim.config().procs[1].state == CsState::Req;
    v.expected = cycles.cycle().has_value() && a_starved;
    v.detail = (cycles.cycle() ? "configuration at step " + std::to_string(cycles.cycle()->second) +
                                     " repeats step " + std::to_string(cycles.cycle()->first)
                               : std::string("no cycle")) +
               ", a " + (a_starved ? "still requesting" : "satisfied") + " after " + std::to_string(outcome.steps) +
               " steps";
  }
  return v;
}

inline const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> names{"fig2-deadlock", "fig3-livelock"};
  return names;
}

/// Runs a figure's diagnostic variant and its full-complement counterpart.
inline FigureReport run_figure(const std::string& name, std::ostream* trace = nullptr) {
  FigureReport report;
  report.name = name;
  if (name == "fig2-deadlock") {
    report.variants.push_back(run_fig2(false, trace));
    report.variants.push_back(run_fig2(true, trace));
  } else if (name == "fig3-livelock") {
    report.variants.push_back(run_fig3(false, trace));
    report.variants.push_back(run_fig3(true, trace));
  } else {
    throw std::invalid_argument("unknown figure `" + name + "`");
  }
  report.verdict = std::all_of(report.variants.begin(), report.variants.end(),
                               [](const VariantResult& v) { return v.expected; })
                       ? Verdict::Pass
                       : Verdict::Fail;
  return report;
}

}  // namespace klex
