#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "klex/faults.hpp"
#include "klex/monitor.hpp"

namespace klex {

/// Invalid run configuration; the message names the offending field.
class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class Policy : std::uint8_t { RoundRobin, RandomFair, Replay };

inline const char* policy_name(Policy p) {
  switch (p) {
    case Policy::RoundRobin: return "rr";
    case Policy::RandomFair: return "rand";
    case Policy::Replay: return "replay";
  }
  return "?";
}

struct RunConfig {
  std::uint32_t k = 1;
  std::uint32_t ell = 1;
  std::uint32_t c_max = 0;
  std::uint64_t seed = 0;
  Policy policy = Policy::RandomFair;
  std::optional<std::uint64_t> budget;   // default: 50 timeouts
  std::optional<std::uint64_t> timeout;  // default: default_timeout()
  FaultMode fault = FaultMode::None;

  std::optional<TreeTopology> topology;  // default: random tree on `nodes` processes
  std::uint32_t nodes = 5;
  std::optional<std::vector<WorkloadEvent>> workload;  // default: random workload
  RandomWorkloadSpec workload_spec;
  std::vector<Choice> replay;

  RunMonitorOptions monitor;
  bool keep_trace = false;

  void validate() const {
    if (k < 1) throw UsageError("k: must be at least 1");
    if (ell < 1) throw UsageError("ell: must be at least 1");
    if (k > ell) throw UsageError("k: k must not exceed ell");
    if (!topology && nodes < 2) throw UsageError("nodes: a tree needs at least 2 processes");
    if (timeout && *timeout == 0) throw UsageError("timeout: must be positive");
    if (policy == Policy::Replay && replay.empty()) throw UsageError("replay: replay policy needs a replay file");
    if (workload_spec.max_duration < 1) throw UsageError("cs-max: must be at least 1");
  }
};

/// Seeds of the independent random streams a run draws from.
struct RunSeeds {
  std::uint64_t topology, workload, fault, scheduler;

  explicit RunSeeds(std::uint64_t seed) {
    Rng master(seed);
    topology = master.raw();
    workload = master.raw();
    fault = master.raw();
    scheduler = master.raw();
  }
};

struct RunResult {
  std::uint64_t seed = 0;
  std::uint32_t n = 0, k = 0, ell = 0, c_max = 0;
  Policy policy = Policy::RandomFair;
  Verdict verdict = Verdict::Inconclusive;
  RunOutcome outcome;
  std::uint64_t timeout = 0;
  std::uint64_t budget = 0;

  std::optional<std::uint64_t> stabilization;
  std::optional<std::uint64_t> first_legitimate;
  std::optional<std::uint64_t> closure;
  std::uint64_t regressions = 0;
  std::size_t safety_violations_after_closure = 0;
  std::size_t audit_violations = 0;
  std::size_t transition_violations = 0;
  std::uint64_t clean_traversals = 0;
  std::uint64_t count_checks = 0;
  std::uint64_t exact_resource_checks = 0;
  std::uint64_t exact_resource_checks_after_closure = 0;
  std::uint64_t reset_checks = 0;
  std::uint64_t timeouts_after_closure = 0;
  FairnessReport fairness;
  std::uint64_t waiting_bound = 0;

  std::string report;
  std::string trace;
};

struct Prepared {
  TreeTopology topology;
  ProtocolParams params;
  Configuration init;
  std::uint64_t timeout;
  std::uint64_t budget;
};

inline Prepared prepare(const RunConfig& cfg) {
  cfg.validate();
  const RunSeeds seeds(cfg.seed);
  TreeTopology topo = cfg.topology ? *cfg.topology : [&] {
    Rng rng(seeds.topology);
    return random_tree(rng, cfg.nodes);
  }();
  ProtocolParams params{cfg.k, cfg.ell, static_cast<std::uint32_t>(topo.size()), cfg.c_max};
  std::vector<WorkloadEvent> workload;
  if (cfg.workload) {
    workload = *cfg.workload;
    try {
      validate_workload(workload, topo.size(), cfg.k);
    } catch (const ScenarioError& e) {
      throw UsageError(std::string("scenario: ") + e.what());
    }
  } else {
    Rng rng(seeds.workload);
    workload = random_workload(rng, topo.size(), cfg.k, cfg.workload_spec);
  }
  InjectOptions inject;
  inject.max_duration = cfg.workload_spec.max_duration;
  auto init = initial_configuration(cfg.fault, seeds.fault, topo, params, workload, inject);
  const auto timeout = cfg.timeout.value_or(default_timeout(params));
  const auto budget = cfg.budget.value_or(50 * timeout);
  return Prepared{std::move(topo), params, std::move(init), timeout, budget};
}

inline std::unique_ptr<Scheduler> make_scheduler(const RunConfig& cfg, std::size_t n) {
  switch (cfg.policy) {
    case Policy::RoundRobin: return std::make_unique<RoundRobinScheduler>();
    case Policy::RandomFair: return std::make_unique<RandomFairScheduler>(RunSeeds(cfg.seed).scheduler, 2 * n);
    case Policy::Replay: return std::make_unique<ReplayScheduler>(cfg.replay);
  }
  throw UsageError("policy: unknown");
}

/// One simulation, judged by the full monitor.
inline RunResult run_once(const RunConfig& cfg) {
  auto prep = prepare(cfg);
  Simulator sim(prep.topology, prep.params, std::move(prep.init), prep.timeout);
  auto scheduler = make_scheduler(cfg, prep.topology.size());
  RunMonitor monitor(cfg.monitor);
  Observer* observers[] = {&monitor};
  std::ostringstream trace;
  RunResult r;
  r.outcome = run(sim, *scheduler, prep.budget, observers, cfg.keep_trace ? &trace : nullptr);

  r.seed = cfg.seed;
  r.n = prep.params.n;
  r.k = cfg.k;
  r.ell = cfg.ell;
  r.c_max = cfg.c_max;
  r.policy = cfg.policy;
  r.timeout = prep.timeout;
  r.budget = prep.budget;
  r.verdict = monitor.verdict();
  r.stabilization = monitor.stabilization().stabilization_time();
  r.first_legitimate = monitor.stabilization().first_legitimate();
  r.closure = monitor.enforced_from();
  r.regressions = monitor.regressions();
  if (r.closure) r.safety_violations_after_closure = monitor.safety().violations_from(*r.closure);
  const auto& audit = monitor.auditor();
  r.audit_violations = audit.violations().size();
  r.transition_violations = monitor.requests().violations().size();
  r.clean_traversals = audit.clean_traversals();
  r.count_checks = audit.count_checks();
  r.exact_resource_checks = audit.exact_resource_checks();
  r.exact_resource_checks_after_closure = audit.exact_resource_checks_after_closure();
  r.reset_checks = audit.reset_checks();
  r.timeouts_after_closure = audit.timeouts_after_closure();
  r.fairness = monitor.fairness();
  r.waiting_bound = monitor.waiting_bound();
  r.report = "seed: " + std::to_string(cfg.seed) + "\nn: " + std::to_string(r.n) + " k: " + std::to_string(r.k) +
             " ell: " + std::to_string(r.ell) + " cmax: " + std::to_string(r.c_max) +
             "\npolicy: " + policy_name(cfg.policy) + "\ntimeout: " + std::to_string(r.timeout) +
             "\nbudget: " + std::to_string(r.budget) + "\nstopped: " + stop_reason_name(r.outcome.reason) + "\n" +
             monitor.report();
  if (cfg.keep_trace) r.trace = trace.str();
  return r;
}

inline int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Pass: return 0;
    case Verdict::Fail: return 1;
    case Verdict::Inconclusive: return 2;
  }
  return 1;
}

struct CampaignSpec {
  RunConfig base;
  std::uint64_t first_seed = 0;
  std::uint64_t count = 0;
  // Draw n, k, ell, C_MAX and the policy per seed instead of using `base`.
  bool randomize_shape = true;
  std::uint32_t min_nodes = 2, max_nodes = 10;
  std::uint32_t max_ell = 5;
  std::uint32_t max_cmax = 3;
  unsigned threads = 0;  // 0: hardware concurrency
};

inline RunConfig campaign_member(const CampaignSpec& spec, std::uint64_t seed) {
  RunConfig cfg = spec.base;
  cfg.seed = seed;
  cfg.keep_trace = false;
  if (spec.randomize_shape) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    cfg.nodes = static_cast<std::uint32_t>(rng.uniform(spec.min_nodes, spec.max_nodes));
    cfg.ell = static_cast<std::uint32_t>(rng.uniform(1, spec.max_ell));
    cfg.k = static_cast<std::uint32_t>(rng.uniform(1, cfg.ell));
    cfg.c_max = static_cast<std::uint32_t>(rng.uniform(0, spec.max_cmax));
    cfg.policy = rng.chance(1, 4) ? Policy::RoundRobin : Policy::RandomFair;
    cfg.topology.reset();
  }
  return cfg;
}

struct CampaignReport {
  std::vector<RunResult> runs;  // sorted by seed, report and trace text dropped

  std::size_t count(Verdict v) const {
    return static_cast<std::size_t>(
        std::count_if(runs.begin(), runs.end(), [v](const RunResult& r) { return r.verdict == v; }));
  }

  std::size_t stabilized() const {
    return static_cast<std::size_t>(
        std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return r.closure.has_value(); }));
  }

  template <typename F>
  std::uint64_t sum(F f) const {
    std::uint64_t s = 0;
    for (const auto& r : runs) s += f(r);
    return s;
  }

  std::size_t starvations() const {
    return sum([](const RunResult& r) { return r.fairness.outstanding; });
  }

  /// Largest observed waiting time relative to its run's bound.
  double max_wait_ratio() const {
    double m = 0;
    for (const auto& r : runs) {
      if (r.waiting_bound) m = std::max(m, static_cast<double>(r.fairness.max_wait) / static_cast<double>(r.waiting_bound));
    }
    return m;
  }

  /// A campaign fails on any failing seed; otherwise inconclusive seeds make it inconclusive.
  Verdict verdict() const {
    if (count(Verdict::Fail)) return Verdict::Fail;
    if (count(Verdict::Inconclusive)) return Verdict::Inconclusive;
    return Verdict::Pass;
  }

  std::string text() const {
    std::ostringstream out;
    std::vector<std::uint64_t> stab;
    for (const auto& r : runs) {
      if (r.stabilization) stab.push_back(*r.stabilization);
    }
    std::sort(stab.begin(), stab.end());
    out << "seeds: " << runs.size() << '\n';
    out << "verdict: " << verdict_name(verdict()) << " (pass " << count(Verdict::Pass) << ", fail "
        << count(Verdict::Fail) << ", inconclusive " << count(Verdict::Inconclusive) << ")\n";
    out << "stabilized: " << stabilized() << '/' << runs.size() << '\n';
    if (!stab.empty()) {
      out << "stabilization_step: min " << stab.front() << " median " << stab[stab.size() / 2] << " max "
          << stab.back() << '\n';
    }
    out << "legitimacy_regressions: " << sum([](const RunResult& r) { return r.regressions; }) << '\n';
    out << "safety_violations_after_closure: "
        << sum([](const RunResult& r) { return r.safety_violations_after_closure; }) << '\n';
    out << "audit_violations: " << sum([](const RunResult& r) { return r.audit_violations; }) << '\n';
    out << "count_checks: " << sum([](const RunResult& r) { return r.count_checks; }) << " exact_resource: "
        << sum([](const RunResult& r) { return r.exact_resource_checks; }) << " exact_resource_after_closure: "
        << sum([](const RunResult& r) { return r.exact_resource_checks_after_closure; }) << '\n';
    out << "reset_checks: " << sum([](const RunResult& r) { return r.reset_checks; }) << '\n';
    out << "timeouts_after_closure: " << sum([](const RunResult& r) { return r.timeouts_after_closure; }) << '\n';
    out << "requests_after_closure: " << sum([](const RunResult& r) { return r.fairness.considered; })
        << " starvations: " << starvations() << '\n';
    out << "max_wait_over_bound: " << max_wait_ratio() << '\n';
    for (const auto& r : runs) {
      if (r.verdict == Verdict::Pass) continue;
      out << "  seed " << r.seed << ": " << verdict_name(r.verdict) << " n=" << r.n << " k=" << r.k
          << " ell=" << r.ell << " cmax=" << r.c_max << " policy=" << policy_name(r.policy) << '\n';
    }
    return out.str();
  }
};

/// Runs every seed of the campaign, in parallel, and collects results in seed order.
inline CampaignReport run_campaign(const CampaignSpec& spec) {
  if (spec.count == 0) throw UsageError("campaign: needs at least one seed");
  CampaignReport report;
  report.runs.resize(spec.count);
  unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, spec.count));
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::uint64_t i = next++; i < spec.count; i = next++) {
      try {
        auto r = run_once(campaign_member(spec, spec.first_seed + i));
        r.report.clear();
        report.runs[i] = std::move(r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
  return report;
}

/// Result of one pinned-CS liveness scenario.
struct LivenessResult {
  LivenessScenario scenario;
  Verdict verdict = Verdict::Inconclusive;
  bool pinned_settled = false;
  std::optional<ProcessId> first_served;
  std::uint64_t steps = 0;
  bool safety_ok = true;
};

/// Draws I (pinned, alpha < ell in total) and R (requesters outside I, each
/// asking for at most ell - alpha, capped by k).
inline LivenessScenario random_liveness_scenario(Rng& rng, const TreeTopology& t, const ProtocolParams& p) {
  std::vector<ProcessId> order(t.size());
  for (ProcessId i = 0; i < t.size(); ++i) order[i] = i;
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.uniform(0, i)]);
  LivenessScenario sc;
  const auto alpha_target = static_cast<std::uint32_t>(rng.uniform(0, p.ell - 1));
  std::uint32_t alpha = 0;
  std::size_t next = 0;
  while (next + 1 < order.size() && alpha < alpha_target) {
    const auto units = static_cast<std::uint32_t>(rng.uniform(1, std::min(p.k, alpha_target - alpha)));
    sc.pinned.emplace_back(order[next++], units);
    alpha += units;
  }
  const std::uint32_t room = std::min(p.k, p.ell - alpha);
  const auto requesters = rng.uniform(1, order.size() - next);
  for (std::uint64_t i = 0; i < requesters; ++i) {
    sc.requesters.emplace_back(order[next++], static_cast<std::uint32_t>(rng.uniform(1, room)));
  }
  return sc;
}

/// Phase one pins I in its critical sections; phase two issues R's requests and
/// waits for any requester to enter.
inline LivenessResult run_liveness(const TreeTopology& t, const ProtocolParams& p, const LivenessScenario& sc,
                                   std::uint64_t seed, std::uint64_t budget) {
  sc.validate(p);
  std::vector<WorkloadEvent> pins;
  for (const auto& [q, units] : sc.pinned) pins.push_back(WorkloadEvent{0, q, units, kForever});
  Simulator sim(t, p, canonical_configuration(t, p, pins), default_timeout(p));
  RandomFairScheduler scheduler(seed, 2 * t.size());
  LivenessResult out;
  out.scenario = sc;

  struct Until final : Observer {
    std::vector<ProcessId> who;
    bool any = false;  // any of `who` in CS instead of all of them
    bool hit = false;
    void after_step(const Simulator& s, const StepRecord&) override {
      auto in = [&](ProcessId q) { return s.config().procs[q].state == CsState::In; };
      hit = any ? std::any_of(who.begin(), who.end(), in) : std::all_of(who.begin(), who.end(), in);
    }
    bool done() const override { return hit; }
  };
  struct Safety final : Observer {
    SafetyChecker checker;
    void after_step(const Simulator& s, const StepRecord& rec) override {
      checker.observe(s.params(), s.config(), rec.step + 1);
    }
  };

  Safety safety;
  Until pinned;
  for (const auto& [q, units] : sc.pinned) pinned.who.push_back(q);
  if (!pinned.who.empty()) {
    Observer* obs[] = {&pinned, &safety};
    out.steps += run(sim, scheduler, budget, obs).steps;
    if (!pinned.hit) return out;
  }
  out.pinned_settled = true;

  auto& app = sim.mutable_config().app;
  const auto now = sim.config().step;
  Until served;
  served.any = true;
  for (const auto& [q, units] : sc.requesters) {
    app.procs[q].pending.push_back(WorkloadEvent{now, q, units, 5});
    served.who.push_back(q);
  }
  if (!served.who.empty()) {
    Observer* obs[] = {&served, &safety};
    out.steps += run(sim, scheduler, budget, obs).steps;
  }
  out.safety_ok = safety.checker.violations().empty();
  if (served.who.empty() || served.hit) {
    out.verdict = out.safety_ok ? Verdict::Pass : Verdict::Fail;
    for (ProcessId q : served.who) {
      if (sim.config().procs[q].state == CsState::In) {
        out.first_served = q;
        break;
      }
    }
  } else if (!out.safety_ok) {
    out.verdict = Verdict::Fail;
  }
  return out;
}

}  // namespace klex
