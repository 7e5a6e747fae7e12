// Copyright 2026 The stabsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// stabsim: run token-circulation and clock-testbed scenarios, seed sweeps and
// brute-force verification suites.
//
// Exit codes: 0 success, 1 property violation / counterexample / simulation
// fault, 2 usage error.

#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "stabsim/scenario.hpp"
#include "stabsim/verify.hpp"

namespace {

constexpr int kUsageError = 2;

struct CommonFlags {
  stabsim::Scenario scenario;
  std::string byz = "none";
  std::string trace;
  std::string metrics;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  auto& sc = flags.scenario;
  cmd->add_option("--n", sc.n, "Number of nodes")->capture_default_str();
  cmd->add_option("--rounds", sc.rounds, "Rounds to simulate")
      ->capture_default_str();
  cmd->add_option("--init", sc.init, "Initial configuration spec")
      ->capture_default_str();
  cmd->add_option("--policy", sc.policy,
                  "Post-detection input: keep-bit | ones | zeros")
      ->capture_default_str();
  cmd->add_option("--detector", sc.detector, "Herman detector: full | aggregate")
      ->capture_default_str();
  cmd->add_option("--f", sc.f, "Byzantine bound f")->capture_default_str();
  cmd->add_option("--byz", flags.byz,
                  "Byzantine strategy: none | silent | echo-receiver | random | flip")
      ->capture_default_str();
  cmd->add_option("--width", sc.width, "Surrogate word width (clock)")
      ->capture_default_str();
  cmd->add_option("--k", sc.k, "Clock values (clock)")->capture_default_str();
  cmd->add_option("--trace", flags.trace, "Write line-delimited trace here");
  cmd->add_option("--metrics", flags.metrics, "Write metrics CSV here");
}

// Returns false (after printing) on a bad flag combination.
bool finish(CommonFlags& flags, stabsim::CaseKind kind) {
  auto& sc = flags.scenario;
  sc.kind = kind;
  if (flags.byz != "none") {
    auto s = stabsim::parse_strategy(flags.byz);
    if (!s) {
      std::cerr << "unknown Byzantine strategy '" << flags.byz << "'\n";
      return false;
    }
    sc.byz = s;
  }
  if (!flags.trace.empty()) sc.trace_path = flags.trace;
  if (!flags.metrics.empty()) sc.metrics_path = flags.metrics;
  return true;
}

int run_sweep(CommonFlags& flags, const std::string& kind,
              const std::string& seeds, unsigned jobs) {
  stabsim::CaseKind k;
  if (kind == "herman") {
    k = stabsim::CaseKind::kHerman;
  } else if (kind == "clock") {
    k = stabsim::CaseKind::kClock;
  } else {
    std::cerr << "--case must be herman or clock\n";
    return kUsageError;
  }
  if (!finish(flags, k)) return kUsageError;
  std::vector<std::uint64_t> seed_list;
  std::vector<stabsim::ScenarioResult> results;
  try {
    seed_list = stabsim::parse_seed_list(seeds);
    results = stabsim::sweep(flags.scenario, seed_list, jobs);
  } catch (const stabsim::ConfigError& e) {
    std::cerr << "invalid scenario: " << e.what() << '\n';
    return kUsageError;
  }

  std::ofstream file;
  if (flags.scenario.metrics_path) {
    file.open(*flags.scenario.metrics_path, std::ios::binary);
    if (!file) {
      std::cerr << "cannot write " << *flags.scenario.metrics_path << '\n';
      return kUsageError;
    }
    file << stabsim::metrics_csv_header() << '\n';
  }
  std::size_t converged = 0;
  std::size_t detected = 0;
  std::size_t bad = 0;
  for (const auto& r : results) {
    if (file.is_open()) file << stabsim::metrics_csv_row(r.metrics) << '\n';
    converged += r.metrics.convergence_round ? 1 : 0;
    detected += r.metrics.detection_round ? 1 : 0;
    if (r.fault || !r.violations.empty()) {
      ++bad;
      std::cerr << "seed " << r.metrics.seed << ": "
                << (r.fault ? r.fault->what : r.violations.front()) << '\n';
    }
  }
  std::cout << "runs=" << results.size() << " converged=" << converged
            << " detected=" << detected << " violations=" << bad << '\n';
  return bad == 0 ? 0 : 1;
}

int run_verify(const std::string& suite) {
  std::vector<std::string> names;
  if (suite == "all") {
    names = stabsim::verify_suite_names();
  } else {
    names = {suite};
  }
  int status = 0;
  for (const auto& name : names) {
    auto report = stabsim::run_verify_suite(name);
    if (!report) {
      std::cerr << "unknown suite '" << name << "'\n";
      return kUsageError;
    }
    std::cout << (report->passed ? "PASS " : "FAIL ") << report->suite
              << " cases=" << report->cases << '\n';
    if (!report->passed) {
      std::cout << "  counterexample: " << report->counterexample << '\n';
      status = 1;
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomization-adaptive self-stabilization simulator"};
  app.require_subcommand(1);

  CommonFlags herman;
  herman.scenario.n = 7;
  auto* herman_cmd = app.add_subcommand("herman", "Token circulation on an odd ring");
  add_common(herman_cmd, herman);
  herman_cmd->add_option("--seed", herman.scenario.seed, "Run seed")
      ->capture_default_str();

  CommonFlags clock;
  clock.scenario.n = 4;
  clock.scenario.f = 1;
  clock.scenario.init = "sync";
  auto* clock_cmd =
      app.add_subcommand("clock", "Byzantine clock testbed with surrogates");
  add_common(clock_cmd, clock);
  clock_cmd->add_option("--seed", clock.scenario.seed, "Run seed")
      ->capture_default_str();

  CommonFlags sweep;
  std::string sweep_case = "herman";
  std::string seeds = "1:100";
  unsigned jobs = std::max(1U, std::thread::hardware_concurrency());
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one scenario over many seeds");
  add_common(sweep_cmd, sweep);
  sweep_cmd->add_option("--case", sweep_case, "herman | clock")
      ->capture_default_str();
  sweep_cmd->add_option("--seeds", seeds, "Seed list: a:b, a,b,c or a")
      ->capture_default_str();
  sweep_cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str();

  std::string suite = "all";
  auto* verify_cmd = app.add_subcommand("verify", "Run a brute-force verification suite");
  verify_cmd
      ->add_option("--suite", suite,
                   "parity | closure | history | xor | tally | aggregate | all")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  if (herman_cmd->parsed()) {
    if (!finish(herman, stabsim::CaseKind::kHerman)) return kUsageError;
    return stabsim::run_scenario(herman.scenario, std::cout, std::cerr);
  }
  if (clock_cmd->parsed()) {
    if (!finish(clock, stabsim::CaseKind::kClock)) return kUsageError;
    return stabsim::run_scenario(clock.scenario, std::cout, std::cerr);
  }
  if (sweep_cmd->parsed()) return run_sweep(sweep, sweep_case, seeds, jobs);
  if (verify_cmd->parsed()) return run_verify(suite);
  return kUsageError;
}
