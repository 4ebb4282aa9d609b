// Command-line runner for single simulations, seeded campaigns and the figure
// regressions.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "klex/klex.hpp"

namespace {

constexpr int kUsage = 64;

std::string read_file(const std::string& path, const char* field) {
  std::ifstream in(path);
  if (!in) throw klex::UsageError(std::string(field) + ": cannot open `" + path + "`");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw klex::UsageError("out: cannot write `" + path.string() + "`");
  out << text;
}

struct Options {
  std::optional<std::string> topology, scenario, replay, out, figure;
  std::uint32_t k = 1, ell = 1, cmax = 0, nodes = 5;
  std::uint64_t seed = 0, cs_max = 10;
  std::optional<std::uint64_t> budget, timeout, campaign;
  std::string policy = "rand", fault = "none";
  unsigned threads = 0;
  bool print_trace = false;
};

klex::RunConfig build_config(const Options& o) {
  klex::RunConfig cfg;
  cfg.k = o.k;
  cfg.ell = o.ell;
  cfg.c_max = o.cmax;
  cfg.seed = o.seed;
  cfg.nodes = o.nodes;
  cfg.budget = o.budget;
  cfg.timeout = o.timeout;
  cfg.workload_spec.max_duration = o.cs_max;
  cfg.policy = o.policy == "rr" ? klex::Policy::RoundRobin
               : o.policy == "replay" ? klex::Policy::Replay
                                      : klex::Policy::RandomFair;
  cfg.fault = o.fault == "arbitrary" ? klex::FaultMode::Arbitrary : klex::FaultMode::None;
  if (o.topology) {
    try {
      cfg.topology = klex::parse_topology(read_file(*o.topology, "topology"));
    } catch (const klex::TopologyError& e) {
      throw klex::UsageError(std::string("topology: ") + e.what());
    }
  }
  const std::size_t n = cfg.topology ? cfg.topology->size() : o.nodes;
  if (o.scenario) {
    std::istringstream in(read_file(*o.scenario, "scenario"));
    try {
      cfg.workload = klex::parse_scenario(in, n, o.k);
    } catch (const klex::ScenarioError& e) {
      throw klex::UsageError(std::string("scenario: ") + e.what());
    }
  }
  if (o.replay) {
    if (!cfg.topology) throw klex::UsageError("replay: needs --topology");
    std::istringstream in(read_file(*o.replay, "replay"));
    try {
      cfg.replay = klex::parse_replay(in, *cfg.topology);
    } catch (const klex::ScenarioError& e) {
      throw klex::UsageError(std::string("replay: ") + e.what());
    }
  }
  cfg.keep_trace = o.out.has_value() || o.print_trace;
  cfg.validate();
  return cfg;
}

int run_figure(const Options& o) {
  std::ostringstream trace;
  const auto report = klex::run_figure(*o.figure, &trace);
  std::cout << report.text();
  if (o.out) {
    std::filesystem::create_directories(*o.out);
    write_file(std::filesystem::path(*o.out) / "trace.txt", trace.str());
    write_file(std::filesystem::path(*o.out) / "report.txt", report.text());
  }
  if (o.print_trace) std::cout << trace.str();
  return klex::exit_code(report.verdict);
}

int run_campaign(const Options& o, klex::RunConfig base) {
  klex::CampaignSpec spec;
  base.keep_trace = false;
  spec.base = std::move(base);
  spec.first_seed = o.seed;
  spec.count = *o.campaign;
  spec.threads = o.threads;
  // Without an explicit topology each seed draws its own shape.
  spec.randomize_shape = !o.topology;
  const auto report = klex::run_campaign(spec);
  std::cout << report.text();
  if (o.out) {
    std::filesystem::create_directories(*o.out);
    write_file(std::filesystem::path(*o.out) / "campaign.txt", report.text());
  }
  return klex::exit_code(report.verdict());
}

int run_single(const Options& o, const klex::RunConfig& cfg) {
  const auto result = klex::run_once(cfg);
  std::cout << result.report;
  if (o.out) {
    std::filesystem::create_directories(*o.out);
    write_file(std::filesystem::path(*o.out) / "trace.txt", result.trace);
    write_file(std::filesystem::path(*o.out) / "report.txt", result.report);
  }
  if (o.print_trace) std::cout << result.trace;
  return klex::exit_code(result.verdict);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for self-stabilizing k-out-of-l exclusion on oriented trees"};
  Options o;
  app.add_option("--topology", o.topology, "Tree file (`n <count> root <id>` then `<id>: <neighbors>`)");
  app.add_option("--scenario", o.scenario, "Workload file of `req <step> <proc> <need> <duration|inf>` lines");
  app.add_option("--k", o.k, "Largest request size")->check(CLI::PositiveNumber);
  app.add_option("--ell", o.ell, "Number of resource units")->check(CLI::PositiveNumber);
  app.add_option("--cmax", o.cmax, "Bound on initial messages per channel");
  app.add_option("--seed", o.seed, "Seed (first seed of a campaign)");
  app.add_option("--policy", o.policy, "Scheduler")->check(CLI::IsMember({"rr", "rand", "replay"}));
  app.add_option("--replay", o.replay, "Replay file of scheduler choices");
  app.add_option("--budget", o.budget, "Step budget (default 50 timeouts)");
  app.add_option("--timeout", o.timeout, "Root timeout in steps")->check(CLI::PositiveNumber);
  app.add_option("--fault", o.fault, "Initial configuration")->check(CLI::IsMember({"none", "arbitrary"}));
  app.add_option("--out", o.out, "Directory for trace and report files");
  app.add_option("--figure", o.figure, "Figure regression: fig2-deadlock or fig3-livelock");
  app.add_option("--campaign", o.campaign, "Run this many consecutive seeds");
  app.add_option("--nodes", o.nodes, "Random tree size when no topology is given");
  app.add_option("--cs-max", o.cs_max, "Longest critical section in random workloads")->check(CLI::PositiveNumber);
  app.add_option("--threads", o.threads, "Campaign worker threads (0: all cores)");
  app.add_flag("--trace", o.print_trace, "Print the step trace to stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (o.figure) return run_figure(o);
    auto cfg = build_config(o);
    if (o.campaign) {
      if (*o.campaign == 0) throw klex::UsageError("campaign: needs at least one seed");
      return run_campaign(o, std::move(cfg));
    }
    return run_single(o, cfg);
  } catch (const klex::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const klex::StructuralError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
