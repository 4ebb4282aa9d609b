#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "klex/protocol.hpp"
#include "klex/rng.hpp"

namespace klex {

/// CS duration that never ends; used for pinned-in-CS liveness scenarios.
inline constexpr std::uint64_t kForever = std::numeric_limits<std::uint64_t>::max();

class ScenarioError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Application request: at `at_step` (or the first later step at which the
/// process is Out) the process asks for `need` units and then stays in CS for
/// `cs_duration` scheduler steps.
struct WorkloadEvent {
  std::uint64_t at_step = 0;
  ProcessId process = 0;
  std::uint32_t need = 1;
  std::uint64_t cs_duration = 1;

  friend bool operator==(const WorkloadEvent&, const WorkloadEvent&) = default;
};

struct AppProcess {
  std::uint64_t remaining_cs = 0;   // steps left in the current CS; kForever pins it
  std::uint64_t next_duration = 1;  // duration assigned at the next EnterCS
  std::deque<WorkloadEvent> pending;

  friend bool operator==(const AppProcess&, const AppProcess&) = default;
};

struct AppState {
  std::vector<AppProcess> procs;

  /// ReleaseCS() for a process that is in its critical section.
  bool release_cs(ProcessId p) const { return procs.at(p).remaining_cs == 0; }

  bool has_pending() const {
    return std::any_of(procs.begin(), procs.end(), [](const AppProcess& a) { return !a.pending.empty(); });
  }

  friend bool operator==(const AppState&, const AppState&) = default;
};

/// Checks need bounds and per-process non-overlap. A process's next request may
/// only be scheduled after the previous one's CS could have finished.
inline void validate_workload(const std::vector<WorkloadEvent>& events, std::size_t n, std::uint32_t k) {
  std::vector<const WorkloadEvent*> last(n, nullptr);
  for (const auto& e : events) {
    const std::string who = "process " + std::to_string(e.process);
    if (e.process >= n) throw ScenarioError(who + ": no such process");
    if (e.need < 1 || e.need > k) throw ScenarioError(who + ": need must be in [1, k]");
    if (e.cs_duration == 0) throw ScenarioError(who + ": duration must be positive");
    if (const auto* prev = last[e.process]) {
      if (prev->cs_duration == kForever || e.at_step <= prev->at_step ||
          e.at_step - prev->at_step <= prev->cs_duration) {
        throw ScenarioError(who + ": overlapping workload events at steps " + std::to_string(prev->at_step) +
                            " and " + std::to_string(e.at_step));
      }
    }
    last[e.process] = &e;
  }
}

/// Parses `req <step> <process> <need> <duration|inf>` lines.
inline std::vector<WorkloadEvent> parse_scenario(std::istream& in, std::size_t n, std::uint32_t k) {
  std::vector<WorkloadEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string kw;
    if (!(fields >> kw)) continue;
    long long step = -1, proc = -1, need = -1;
    std::string duration, trailing;
    if (kw != "req" || !(fields >> step >> proc >> need >> duration) || (fields >> trailing) || step < 0 ||
        proc < 0 || need < 0) {
      throw ScenarioError("line " + std::to_string(line_no) + ": expected `req <step> <process> <need> <duration|inf>`");
    }
    WorkloadEvent e{static_cast<std::uint64_t>(step), static_cast<ProcessId>(proc), static_cast<std::uint32_t>(need),
                    kForever};
    if (duration != "inf") {
      std::size_t used = 0;
      long long d = -1;
      try {
        d = std::stoll(duration, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != duration.size() || d <= 0) {
        throw ScenarioError("line " + std::to_string(line_no) + ": bad duration `" + duration + "`");
      }
      e.cs_duration = static_cast<std::uint64_t>(d);
    }
    events.push_back(e);
  }
  validate_workload(events, n, k);
  return events;
}

inline std::string to_text(const std::vector<WorkloadEvent>& events) {
  std::ostringstream out;
  for (const auto& e : events) {
    out << "req " << e.at_step << ' ' << e.process << ' ' << e.need << ' ';
    if (e.cs_duration == kForever) out << "inf";
    else out << e.cs_duration;
    out << '\n';
  }
  return out.str();
}

inline AppState make_app_state(std::size_t n, const std::vector<WorkloadEvent>& events) {
  AppState app;
  app.procs.resize(n);
  auto sorted = events;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const WorkloadEvent& a, const WorkloadEvent& b) { return a.at_step < b.at_step; });
  for (const auto& e : sorted) app.procs.at(e.process).pending.push_back(e);
  return app;
}

/// Fires due requests (Out -> Req). Returns the processes that started requesting.
inline std::vector<ProcessId> apply_workload(std::uint64_t step, AppState& app, std::vector<ProcessState>& procs) {
  std::vector<ProcessId> fired;
  for (ProcessId p = 0; p < procs.size(); ++p) {
    auto& a = app.procs[p];
    if (a.pending.empty() || a.pending.front().at_step > step || procs[p].state != CsState::Out) continue;
    const auto e = a.pending.front();
    a.pending.pop_front();
    procs[p].state = CsState::Req;
    procs[p].need = e.need;
    a.next_duration = e.cs_duration;
    fired.push_back(p);
  }
  return fired;
}

/// Advances CS countdowns of processes in CS. Returns ReleaseCS() per process.
inline std::vector<bool> tick_cs(AppState& app, const std::vector<ProcessState>& procs) {
  std::vector<bool> release(procs.size(), false);
  for (ProcessId p = 0; p < procs.size(); ++p) {
    auto& a = app.procs[p];
    if (procs[p].state != CsState::In) continue;
    if (a.remaining_cs != kForever && a.remaining_cs > 0) --a.remaining_cs;
    release[p] = a.remaining_cs == 0;
  }
  return release;
}

inline void on_enter_cs(AppState& app, ProcessId p) { app.procs.at(p).remaining_cs = app.procs.at(p).next_duration; }

struct RandomWorkloadSpec {
  std::uint32_t requests_per_process = 4;
  std::uint64_t horizon = 2000;   // requests are drawn in [0, horizon]
  std::uint64_t max_duration = 10;  // D
};

/// Seeded random workload: need ~ U[1,k], duration ~ U[1,D], request times spread
/// over the horizon and spaced so that no two requests of one process overlap.
inline std::vector<WorkloadEvent> random_workload(Rng& rng, std::size_t n, std::uint32_t k,
                                                  const RandomWorkloadSpec& spec) {
  std::vector<WorkloadEvent> events;
  for (ProcessId p = 0; p < n; ++p) {
    std::vector<std::uint64_t> times;
    for (std::uint32_t i = 0; i < spec.requests_per_process; ++i) times.push_back(rng.uniform(0, spec.horizon));
    std::sort(times.begin(), times.end());
    std::uint64_t earliest = 0;
    for (auto t : times) {
      WorkloadEvent e{std::max(t, earliest), p, static_cast<std::uint32_t>(rng.uniform(1, k)),
                      rng.uniform(1, std::max<std::uint64_t>(1, spec.max_duration))};
      earliest = e.at_step + e.cs_duration + 1;
      events.push_back(e);
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const WorkloadEvent& a, const WorkloadEvent& b) { return a.at_step < b.at_step; });
  return events;
}

}  // namespace klex
