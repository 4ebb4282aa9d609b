#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "klex/simnet.hpp"

namespace klex {

enum class Verdict : std::uint8_t { Pass, Fail, Inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct Violation {
  std::uint64_t index = 0;  // configuration index (number of steps taken)
  std::string what;
};

/// Global token count of one configuration.
struct CensusReport {
  std::uint64_t res_tokens = 0;     // free ResT + sum of |RSet|
  std::uint64_t prio_tokens = 0;    // free PrioT + processes holding Prio
  std::uint64_t push_tokens = 0;    // free PushT
  std::uint64_t ctrl_tokens = 0;    // Ctrl messages valid at their receiver
  std::uint64_t ctrl_messages = 0;  // all Ctrl messages

  friend bool operator==(const CensusReport&, const CensusReport&) = default;
};

/// Whether a Ctrl stamped `c` arriving on channel q would be taken into account.
/// At a non-root the duplicate case (q = 0, c = myC) is retransmitted but not valid.
inline bool ctrl_valid_at(const ProcessState& s, bool is_root, ChannelLabel q, std::uint32_t c) {
  if (is_root) return q == s.succ && c == s.my_c;
  return (q == s.succ && c == s.my_c && s.succ != 0) || (q == 0 && c != s.my_c);
}

inline CensusReport census(const TreeTopology& t, const Configuration& c) {
  CensusReport r;
  for (const auto& s : c.procs) {
    r.res_tokens += s.rset.size();
    if (s.prio) ++r.prio_tokens;
  }
  for (std::size_t ch = 0; ch < c.channels.size(); ++ch) {
    const auto target = t.channel_target(ch);
    for (const auto& m : c.channels[ch]) {
      switch (m.kind) {
        case MessageKind::ResT: ++r.res_tokens; break;
        case MessageKind::PrioT: ++r.prio_tokens; break;
        case MessageKind::PushT: ++r.push_tokens; break;
        case MessageKind::Ctrl:
          ++r.ctrl_messages;
          if (ctrl_valid_at(c.procs[target.process], t.is_root(target.process), target.in_channel, m.counter)) {
            ++r.ctrl_tokens;
          }
          break;
      }
    }
  }
  return r;
}

/// Every process variable and message field inside its declared domain.
inline bool within_domains(const TreeTopology& t, const ProtocolParams& p, const Configuration& c) {
  const auto modulus = p.counter_modulus();
  for (ProcessId id = 0; id < t.size(); ++id) {
    const auto& s = c.procs[id];
    const auto deg = t.degree(id);
    if (s.my_c >= modulus || s.succ >= deg || s.rset.size() > p.k || s.need > p.k) return false;
    if (s.prio && *s.prio >= deg) return false;
    for (const auto& r : s.rset) {
      if (r.channel >= deg) return false;
    }
    if (t.is_root(id)) {
      if (s.s_token > p.token_cap() || s.s_push > 2 || s.s_prio > 2) return false;
    } else if (s.s_token || s.s_push || s.s_prio || s.reset) {
      return false;
    }
  }
  for (const auto& fifo : c.channels) {
    for (const auto& m : fifo) {
      if (m.is(MessageKind::Ctrl) && (m.counter >= modulus || m.passed_tokens > p.token_cap() || m.passed_prio > 2)) {
        return false;
      }
    }
  }
  return true;
}

/// Exactly ell resource tokens, one priority token, one pusher, at most one valid controller.
inline bool is_legitimate(const TreeTopology& t, const ProtocolParams& p, const Configuration& c) {
  const auto r = census(t, c);
  return r.res_tokens == p.ell && r.prio_tokens == 1 && r.push_tokens == 1 && r.ctrl_tokens <= 1 &&
         within_domains(t, p, c);
}

/// Tracks the index after which every observed configuration is legitimate.
class StabilizationTracker {
public:
  void observe(bool legitimate, std::uint64_t index) {
    ++observed_;
    last_legitimate_ = legitimate;
    if (!legitimate) {
      any_bad_ = true;
      last_bad_ = index;
    } else if (!first_good_) {
      first_good_ = index;
    }
  }

  /// First index of the all-legitimate suffix; nullopt if the last observation was not legitimate.
  std::optional<std::uint64_t> stabilization_time() const {
    if (observed_ == 0 || !last_legitimate_) return std::nullopt;
    return any_bad_ ? last_bad_ + 1 : 0;
  }

  std::optional<std::uint64_t> first_legitimate() const { return first_good_; }

private:
  std::uint64_t observed_ = 0;
  bool last_legitimate_ = false;
  bool any_bad_ = false;
  std::uint64_t last_bad_ = 0;
  std::optional<std::uint64_t> first_good_;
};

inline std::optional<std::uint64_t> stabilization_time(const TreeTopology& t, const ProtocolParams& p,
                                                       std::span<const Configuration> trace) {
  StabilizationTracker tracker;
  for (std::size_t i = 0; i < trace.size(); ++i) tracker.observe(is_legitimate(t, p, trace[i]), i);
  return tracker.stabilization_time();
}

/// Per-configuration safety. Units held in CS stay within ell overall and within k
/// per process; each resource token identity appears at most once.
class SafetyChecker {
public:
  void observe(const ProtocolParams& p, const Configuration& c, std::uint64_t index) {
    std::uint64_t in_use = 0;
    tags_.clear();
    for (ProcessId id = 0; id < c.procs.size(); ++id) {
      const auto& s = c.procs[id];
      if (s.state == CsState::In) {
        in_use += s.rset.size();
        if (s.rset.size() > p.k) {
          add(index, "process " + std::to_string(id) + " in CS holds " + std::to_string(s.rset.size()) + " > k units");
        }
      }
      for (const auto& r : s.rset) tags_.push_back(r.tag);
    }
    if (in_use > p.ell) add(index, "units in use " + std::to_string(in_use) + " exceed ell");
    for (const auto& fifo : c.channels) {
      for (const auto& m : fifo) {
        if (m.is(MessageKind::ResT)) tags_.push_back(m.tag);
      }
    }
    std::sort(tags_.begin(), tags_.end());
    for (std::size_t i = 1; i < tags_.size(); ++i) {
      if (tags_[i] != 0 && tags_[i] == tags_[i - 1]) {
        add(index, "resource unit #" + std::to_string(tags_[i]) + " present twice");
        break;
      }
    }
  }

  const std::vector<Violation>& violations() const noexcept { return violations_; }

  /// Violations before `from_index` are expected (pre-stabilization) and ignored.
  Verdict verdict(std::uint64_t from_index) const {
    return std::any_of(violations_.begin(), violations_.end(),
                       [&](const Violation& v) { return v.index >= from_index; })
               ? Verdict::Fail
               : Verdict::Pass;
  }

  std::size_t violations_from(std::uint64_t from_index) const {
    return static_cast<std::size_t>(std::count_if(violations_.begin(), violations_.end(),
                                                  [&](const Violation& v) { return v.index >= from_index; }));
  }

private:
  void add(std::uint64_t index, std::string what) {
    if (violations_.size() < kMaxRecorded) violations_.push_back(Violation{index, std::move(what)});
  }

  static constexpr std::size_t kMaxRecorded = 1000;
  std::vector<Violation> violations_;
  std::vector<std::uint64_t> tags_;
};

inline SafetyChecker check_safety(const ProtocolParams& p, std::span<const Configuration> trace) {
  SafetyChecker checker;
  for (std::size_t i = 0; i < trace.size(); ++i) checker.observe(p, trace[i], i);
  return checker;
}

struct RequestRecord {
  ProcessId proc = 0;
  std::uint32_t need = 0;
  std::uint64_t requested_at = 0;  // step in which the request fired
  std::optional<std::uint64_t> satisfied_at;  // step in which it entered CS
  std::uint64_t waiting = 0;  // CS entries by other processes while this request waited
};

struct FairnessReport {
  Verdict verdict = Verdict::Pass;
  std::size_t considered = 0;
  std::size_t satisfied = 0;
  std::size_t outstanding = 0;
  std::uint64_t max_wait = 0;
};

/// Follows State transitions: requests (Out -> Req), satisfactions (Req -> In),
/// waiting times, and transitions the interface forbids.
class RequestTracker {
public:
  void start(const Configuration& c) {
    prev_.clear();
    pending_.clear();
    for (const auto& s : c.procs) prev_.push_back(s.state);
    for (const auto& a : c.app.procs) pending_.push_back(a.pending.size());
    open_.assign(c.procs.size(), std::nullopt);
  }

  /// `index` is the configuration index after the step; requests are stamped
  /// with the step they fired in (index - 1).
  void observe(const Configuration& c, std::uint64_t index) {
    for (ProcessId p = 0; p < c.procs.size(); ++p) {
      // A request that fires and is satisfied in the same step only shows up
      // as a shorter application queue.
      const auto pending = c.app.procs[p].pending.size();
      const bool fired = pending < pending_[p];
      pending_[p] = pending;
      if (fired && prev_[p] == CsState::Out) {
        open_request(p, c.procs[p].need, index - 1);
        prev_[p] = CsState::Req;
      }
      const CsState before = prev_[p];
      const CsState after = c.procs[p].state;
      if (before == after) continue;
      prev_[p] = after;
      if (before == CsState::Out && after == CsState::Req) {
        open_request(p, c.procs[p].need, index - 1);
      } else if (before == CsState::Req && after == CsState::In) {
        ++entries_;
        for (ProcessId q = 0; q < open_.size(); ++q) {
          if (q != p && open_[q]) ++records_[*open_[q]].waiting;
        }
        if (open_[p]) {
          records_[*open_[p]].satisfied_at = index - 1;
          open_[p].reset();
        }
      } else if (!(before == CsState::In && after == CsState::Out)) {
        violations_.push_back(Violation{index, "process " + std::to_string(p) + " moved " + state_name(before) +
                                                   " -> " + state_name(after)});
      }
    }
  }

  const std::vector<RequestRecord>& requests() const noexcept { return records_; }
  const std::vector<Violation>& violations() const noexcept { return violations_; }
  std::uint64_t entries() const noexcept { return entries_; }

  /// Requests issued at or after `from_index`. Outstanding requests make the
  /// verdict inconclusive unless starvation is otherwise proven.
  FairnessReport fairness(std::uint64_t from_index, bool starvation_proven = false) const {
    FairnessReport r;
    for (const auto& rec : records_) {
      if (rec.requested_at < from_index) continue;
      ++r.considered;
      if (rec.satisfied_at) {
        ++r.satisfied;
        r.max_wait = std::max(r.max_wait, rec.waiting);
      } else {
        ++r.outstanding;
      }
    }
    if (!violations_.empty()) r.verdict = Verdict::Fail;
    else if (r.outstanding > 0) r.verdict = starvation_proven ? Verdict::Fail : Verdict::Inconclusive;
    return r;
  }

private:
  void open_request(ProcessId p, std::uint32_t need, std::uint64_t step) {
    open_[p] = records_.size();
    records_.push_back(RequestRecord{p, need, step, std::nullopt, 0});
  }

  std::vector<CsState> prev_;
  std::vector<std::size_t> pending_;
  std::vector<std::optional<std::size_t>> open_;
  std::vector<RequestRecord> records_;
  std::vector<Violation> violations_;
  std::uint64_t entries_ = 0;
};

inline RequestTracker check_fairness(std::span<const Configuration> trace) {
  RequestTracker tracker;
  if (trace.empty()) return tracker;
  tracker.start(trace.front());
  for (std::size_t i = 1; i < trace.size(); ++i) tracker.observe(trace[i], i);
  return tracker;
}

/// Waiting-time bound ell * (2n - 3)^2 for a stabilized system.
inline std::uint64_t waiting_time_bound(const ProtocolParams& p) {
  const std::uint64_t ring = 2ull * p.n - 3;
  return static_cast<std::uint64_t>(p.ell) * ring * ring;
}

/// Processes pinned in CS forever (holding alpha units in total) and requesters
/// outside that set, each asking for at most ell - alpha units.
struct LivenessScenario {
  std::vector<std::pair<ProcessId, std::uint32_t>> pinned;
  std::vector<std::pair<ProcessId, std::uint32_t>> requesters;

  std::uint32_t alpha() const {
    std::uint32_t a = 0;
    for (const auto& [p, units] : pinned) a += units;
    return a;
  }

  void validate(const ProtocolParams& params) const {
    const auto a = alpha();
    if (a > params.ell) throw std::invalid_argument("pinned processes hold more than ell units");
    for (const auto& [p, units] : pinned) {
      if (units < 1 || units > params.k) throw std::invalid_argument("pinned need outside [1, k]");
    }
    for (const auto& [q, r] : requesters) {
      if (r < 1 || r > params.k || r > params.ell - a) throw std::invalid_argument("requester asks for more than ell - alpha");
      for (const auto& [p, units] : pinned) {
        if (p == q) throw std::invalid_argument("a requester may not be pinned");
      }
    }
  }
};

/// (k, ell)-liveness: after `from_index`, some requester enters its critical section.
inline Verdict check_kl_liveness(const LivenessScenario& scenario, std::span<const Configuration> trace,
                                 std::uint64_t from_index = 0) {
  if (scenario.requesters.empty()) return Verdict::Pass;
  for (std::size_t i = from_index; i < trace.size(); ++i) {
    for (const auto& [q, r] : scenario.requesters) {
      if (trace[i].procs[q].state == CsState::In) return Verdict::Pass;
    }
  }
  return Verdict::Inconclusive;
}

/// Audits controller traversals.
///
/// A traversal is clean when the root starts it at a wrap while its controller is
/// the only Ctrl message in the system and no other process already carries the
/// new counter value, and no timeout fires before it ends. At the end of every
/// clean traversal the root's counts are compared against the census taken just
/// before the root handles the returning controller:
///  - reset traversal: no resource, priority or pusher token is left;
///  - otherwise each count is exact when within its cap, and the census exceeds
///    the cap when the count does.
/// The first clean traversal end that starts a non-reset traversal from a
/// legitimate configuration is the closure point.
class TraversalAuditor final : public Observer {
public:
  void on_start(const Simulator& sim) override { clean_ = initial_is_clean(sim); started_at_ = 0; }

  void before_event(const Simulator& sim, const Choice& choice) override {
    pending_.reset();
    if (choice.kind != EventKind::Deliver || !sim.topology().is_root(choice.proc)) return;
    const auto& fifo = sim.incoming(choice.proc, choice.channel);
    const auto& root = sim.config().procs[choice.proc];
    const Message& m = fifo.front();
    if (!m.is(MessageKind::Ctrl) || !ctrl_valid_at(root, true, choice.channel, m.counter)) return;
    if ((root.succ + 1) % sim.topology().degree(choice.proc) != 0) return;
    pending_ = census(sim.topology(), sim.config());
  }

  void after_step(const Simulator& sim, const StepRecord& rec) override {
    const std::uint64_t index = rec.step + 1;
    if (rec.choice.kind == EventKind::Timeout) {
      ++timeouts_;
      if (closure_) ++timeouts_after_closure_;
      clean_ = false;
    }
    if (!rec.traversal_end) return;
    const auto& end = *rec.traversal_end;
    const auto& prm = sim.params();
    if (clean_ && pending_) {
      ++clean_traversals_;
      max_clean_steps_ = std::max(max_clean_steps_, index - started_at_);
      const auto& cen = *pending_;
      if (end.ended_reset) {
        ++reset_checks_;
        if (cen.res_tokens || cen.prio_tokens || cen.push_tokens) {
          mismatch(index, "reset traversal left tokens (" + std::to_string(cen.res_tokens) + "," +
                              std::to_string(cen.prio_tokens) + "," + std::to_string(cen.push_tokens) + ")");
        }
      } else {
        ++count_checks_;
        check_count(index, "resource", end.res_count, cen.res_tokens, prm.ell);
        check_count(index, "priority", end.prio_count, cen.prio_tokens, 1);
        check_count(index, "pusher", end.push_count, cen.push_tokens, 1);
        if (end.res_count <= prm.ell) {
          ++exact_res_checks_;
          if (closure_) ++exact_res_checks_after_closure_;
        }
      }
      if (closure_) {
        ++clean_since_closure_;
      } else if (!end.reset && is_legitimate(sim.topology(), prm, sim.config())) {
        closure_ = index;
      }
    } else {
      ++unclean_traversals_;
    }
    clean_ = starts_clean(sim);
    started_at_ = index;
  }

  /// Configuration index of the closure point, if reached.
  std::optional<std::uint64_t> closure_index() const noexcept { return closure_; }
  std::uint64_t clean_traversals() const noexcept { return clean_traversals_; }
  std::uint64_t clean_traversals_since_closure() const noexcept { return clean_since_closure_; }
  std::uint64_t unclean_traversals() const noexcept { return unclean_traversals_; }
  std::uint64_t count_checks() const noexcept { return count_checks_; }
  std::uint64_t exact_resource_checks() const noexcept { return exact_res_checks_; }
  std::uint64_t exact_resource_checks_after_closure() const noexcept { return exact_res_checks_after_closure_; }
  std::uint64_t reset_checks() const noexcept { return reset_checks_; }
  std::uint64_t timeouts() const noexcept { return timeouts_; }
  std::uint64_t timeouts_after_closure() const noexcept { return timeouts_after_closure_; }
  std::uint64_t max_clean_traversal_steps() const noexcept { return max_clean_steps_; }
  const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
  void check_count(std::uint64_t index, const char* what, std::uint64_t counted, std::uint64_t actual, std::uint64_t cap) {
    const bool ok = counted <= cap ? counted == actual : actual > cap;
    if (!ok) {
      mismatch(index, std::string(what) + " count " + std::to_string(counted) + " but census " + std::to_string(actual));
    }
  }

  void mismatch(std::uint64_t index, std::string what) {
    if (violations_.size() < 1000) violations_.push_back(Violation{index, std::move(what)});
  }

  static bool starts_clean(const Simulator& sim) {
    const auto& t = sim.topology();
    const auto& c = sim.config();
    const auto& root = c.procs[t.root()];
    if (census(t, c).ctrl_messages != 1) return false;
    for (ProcessId p = 0; p < t.size(); ++p) {
      if (p != t.root() && c.procs[p].my_c == root.my_c) return false;
    }
    return true;
  }

  // A fresh controller that is the last message on the root's channel 0, with
  // nothing counted yet, behaves like one created at a wrap.
  static bool initial_is_clean(const Simulator& sim) {
    if (!starts_clean(sim)) return false;
    const auto& t = sim.topology();
    const auto& root = sim.config().procs[t.root()];
    const auto& fifo = sim.config().channels[t.outgoing_channel(t.root(), 0)];
    if (fifo.empty() || root.succ != 0 || root.s_token || root.s_push || root.s_prio) return false;
    const auto& m = fifo.back();
    return m.is(MessageKind::Ctrl) && m.counter == root.my_c && m.reset == root.reset && m.passed_tokens == 0 &&
           m.passed_prio == 0;
  }

  bool clean_ = false;
  std::uint64_t started_at_ = 0;
  std::optional<CensusReport> pending_;
  std::optional<std::uint64_t> closure_;
  std::uint64_t clean_traversals_ = 0;
  std::uint64_t clean_since_closure_ = 0;
  std::uint64_t unclean_traversals_ = 0;
  std::uint64_t count_checks_ = 0;
  std::uint64_t exact_res_checks_ = 0;
  std::uint64_t exact_res_checks_after_closure_ = 0;
  std::uint64_t reset_checks_ = 0;
  std::uint64_t timeouts_ = 0;
  std::uint64_t timeouts_after_closure_ = 0;
  std::uint64_t max_clean_steps_ = 0;
  std::vector<Violation> violations_;
};

/// Declares quiescent starvation: no free resource, priority or pusher token
/// anywhere, no process with a local action to take, and some process stuck
/// requesting, continuously for `window` steps.
class QuiescenceDetector final : public Observer {
public:
  explicit QuiescenceDetector(std::uint64_t window, bool stop_on_detect = true)
      : window_(window), stop_(stop_on_detect) {}

  void after_step(const Simulator& sim, const StepRecord& rec) override {
    if (quiescent_at_) return;
    if (!holds(sim)) {
      streak_ = 0;
      return;
    }
    if (++streak_ >= window_) quiescent_at_ = rec.step + 1;
  }

  bool done() const override { return stop_ && quiescent_at_.has_value(); }
  std::optional<std::uint64_t> quiescent_at() const noexcept { return quiescent_at_; }

  static bool holds(const Simulator& sim) {
    const auto& c = sim.config();
    for (const auto& fifo : c.channels) {
      for (const auto& m : fifo) {
        if (!m.is(MessageKind::Ctrl)) return false;
      }
    }
    bool starving = false;
    for (ProcessId p = 0; p < c.procs.size(); ++p) {
      if (sim.has_local_work(p)) return false;
      starving = starving || c.procs[p].state == CsState::Req;
    }
    return starving;
  }

private:
  std::uint64_t window_;
  bool stop_;
  std::uint64_t streak_ = 0;
  std::optional<std::uint64_t> quiescent_at_;
};

/// Token-level view of a configuration: request states, reservations, priority
/// holders and the non-controller channel contents. Controller bookkeeping and
/// token identities are left out.
inline std::string token_projection(const Configuration& c) {
  std::string out;
  for (const auto& s : c.procs) {
    out += state_name(s.state);
    out += ':' + std::to_string(s.need) + ':';
    out += s.prio ? std::to_string(*s.prio) : std::string("-");
    out += ":[";
    for (const auto& r : s.rset) out += std::to_string(r.channel) + ',';
    out += "] ";
  }
  out += '|';
  for (const auto& fifo : c.channels) {
    for (const auto& m : fifo) {
      if (!m.is(MessageKind::Ctrl)) out += kind_name(m.kind)[1];  // e, u, r
    }
    out += '/';
  }
  return out;
}

/// Detects a repeated token-level configuration, sampled after the application
/// phase of each step (just before the scheduled event runs).
class CycleDetector final : public Observer {
public:
  explicit CycleDetector(bool stop_on_detect = false) : stop_(stop_on_detect) {}

  void before_event(const Simulator& sim, const Choice&) override {
    if (cycle_) return;
    const auto index = sim.config().step;
    auto [it, inserted] = seen_.emplace(token_projection(sim.config()), index);
    if (!inserted) cycle_ = std::make_pair(it->second, index);
  }

  bool done() const override { return stop_ && cycle_.has_value(); }

  /// (first index, repeating index) of the first repeated configuration.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> cycle() const noexcept { return cycle_; }

private:
  bool stop_;
  std::unordered_map<std::string, std::uint64_t> seen_;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> cycle_;
};

struct RunMonitorOptions {
  bool stop_when_settled = true;
  std::uint64_t closure_traversals = 5;  // clean traversals to observe after the closure point
  std::uint64_t census_sample_every = 0;  // 0: no census timeline
};

/// Everything a single run is judged on: stabilization, closure, controller
/// audit, safety, fairness and waiting times.
class RunMonitor final : public Observer {
public:
  explicit RunMonitor(RunMonitorOptions opt = {}) : opt_(opt) {}

  void on_start(const Simulator& sim) override {
    auditor_.on_start(sim);
    const auto& c = sim.config();
    stab_.observe(is_legitimate(sim.topology(), sim.params(), c), 0);
    safety_.observe(sim.params(), c, 0);
    requests_.start(c);
    bound_ = waiting_time_bound(sim.params());
    sample(sim, 0);
  }

  void before_event(const Simulator& sim, const Choice& choice) override { auditor_.before_event(sim, choice); }

  void after_step(const Simulator& sim, const StepRecord& rec) override {
    auditor_.after_step(sim, rec);
    const auto index = rec.step + 1;
    const auto& c = sim.config();
    const bool legit = is_legitimate(sim.topology(), sim.params(), c);
    stab_.observe(legit, index);
    if (const auto closure = auditor_.closure_index(); closure && index > *closure && !legit) {
      if (!first_regression_) first_regression_ = index;
      ++regressions_;
    }
    safety_.observe(sim.params(), c, index);
    requests_.observe(c, index);
    sample(sim, index);
    settled_ = opt_.stop_when_settled && auditor_.closure_index() &&
               auditor_.clean_traversals_since_closure() >= opt_.closure_traversals && !c.app.has_pending() &&
               std::none_of(c.procs.begin(), c.procs.end(), [](const ProcessState& s) { return s.state == CsState::Req; });
    last_index_ = index;
  }

  bool done() const override { return settled_; }

  const TraversalAuditor& auditor() const noexcept { return auditor_; }
  const StabilizationTracker& stabilization() const noexcept { return stab_; }
  const SafetyChecker& safety() const noexcept { return safety_; }
  const RequestTracker& requests() const noexcept { return requests_; }
  std::uint64_t regressions() const noexcept { return regressions_; }
  std::uint64_t waiting_bound() const noexcept { return bound_; }
  std::uint64_t last_index() const noexcept { return last_index_; }

  /// Index from which properties are enforced: the closure point.
  std::optional<std::uint64_t> enforced_from() const { return auditor_.closure_index(); }

  FairnessReport fairness() const {
    const auto from = enforced_from();
    if (!from) return FairnessReport{Verdict::Inconclusive};
    return requests_.fairness(*from);
  }

  Verdict verdict() const {
    const auto from = enforced_from();
    if (regressions_ > 0 || !auditor_.violations().empty() || !requests_.violations().empty()) return Verdict::Fail;
    if (from && safety_.verdict(*from) == Verdict::Fail) return Verdict::Fail;
    const auto fair = fairness();
    if (from && fair.max_wait > bound_) return Verdict::Fail;
    if (!from || fair.verdict != Verdict::Pass) return Verdict::Inconclusive;
    return Verdict::Pass;
  }

  /// Structured text summary.
  std::string report() const {
    std::ostringstream out;
    const auto from = enforced_from();
    const auto fair = fairness();
    out << "verdict: " << verdict_name(verdict()) << '\n';
    out << "steps: " << last_index_ << '\n';
    out << "stabilization_step: " << opt_str(stab_.stabilization_time()) << '\n';
    out << "first_legitimate_step: " << opt_str(stab_.first_legitimate()) << '\n';
    out << "closure_step: " << opt_str(from) << '\n';
    out << "legitimacy_regressions: " << regressions_ << '\n';
    out << "clean_traversals: " << auditor_.clean_traversals() << '\n';
    out << "unclean_traversals: " << auditor_.unclean_traversals() << '\n';
    out << "count_checks: " << auditor_.count_checks() << " exact_resource: " << auditor_.exact_resource_checks()
        << " exact_resource_after_closure: " << auditor_.exact_resource_checks_after_closure() << '\n';
    out << "reset_checks: " << auditor_.reset_checks() << '\n';
    out << "timeouts: " << auditor_.timeouts() << '\n';
    out << "max_clean_traversal_steps: " << auditor_.max_clean_traversal_steps() << '\n';
    out << "requests: " << fair.considered << " satisfied: " << fair.satisfied << " outstanding: " << fair.outstanding
        << '\n';
    out << "max_wait: " << fair.max_wait << " bound: " << bound_ << '\n';
    out << "waits:";
    for (const auto& r : requests_.requests()) {
      if (!from || r.requested_at < *from) continue;
      out << ' ' << r.proc << '@' << r.requested_at << '=';
      if (r.satisfied_at) out << r.waiting;
      else out << "pending";
    }
    out << '\n';
    std::vector<Violation> all = auditor_.violations();
    all.insert(all.end(), requests_.violations().begin(), requests_.violations().end());
    for (const auto& v : safety_.violations()) {
      if (from && v.index >= *from) all.push_back(v);
    }
    out << "violations: " << all.size() << '\n';
    for (const auto& v : all) out << "  at " << v.index << ": " << v.what << '\n';
    if (!timeline_.empty()) {
      out << "census_timeline:\n";
      for (const auto& [index, r] : timeline_) {
        out << "  " << index << ": res=" << r.res_tokens << " prio=" << r.prio_tokens << " push=" << r.push_tokens
            << " ctrl=" << r.ctrl_tokens << '\n';
      }
    }
    return out.str();
  }

private:
  static std::string opt_str(const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : "none"; }

  void sample(const Simulator& sim, std::uint64_t index) {
    if (opt_.census_sample_every && index % opt_.census_sample_every == 0) {
      timeline_.emplace_back(index, census(sim.topology(), sim.config()));
    }
  }

  RunMonitorOptions opt_;
  TraversalAuditor auditor_;
  StabilizationTracker stab_;
  SafetyChecker safety_;
  RequestTracker requests_;
  std::uint64_t bound_ = 0;
  std::uint64_t regressions_ = 0;
  std::optional<std::uint64_t> first_regression_;
  bool settled_ = false;
  std::uint64_t last_index_ = 0;
  std::vector<std::pair<std::uint64_t, CensusReport>> timeline_;
};

}  // namespace klex
