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

// Experiment scenarios: configuration, seeded runs, line-delimited trace
// records and summary metrics.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stabsim/byz_clock.hpp"
#include "stabsim/randomness.hpp"
#include "stabsim/round_engine.hpp"

namespace stabsim {

enum class CaseKind { kHerman, kClock };

struct Scenario {
  CaseKind kind = CaseKind::kHerman;
  std::size_t n = 7;
  Round rounds = 200;
  std::uint64_t seed = 1;
  std::size_t f = 0;
  std::optional<ByzStrategy> byz;
  // herman: random | worst | corrupted-history | bits:0110...
  // clock:  random | worst | sync | clocks:0,1,1,0
  std::string init = "random";
  std::string policy = "keep-bit";
  // herman detector: full | aggregate
  std::string detector = "full";
  unsigned width = 1;
  unsigned k = 2;
  std::optional<std::string> trace_path;
  std::optional<std::string> metrics_path;

  // Throws ConfigError describing the first problem found.
  void validate() const;
};

struct Metrics {
  std::uint64_t seed = 0;
  Round rounds_run = 0;
  std::optional<Round> convergence_round;
  std::optional<Round> detection_round;
  std::uint64_t total_bits = 0;
  std::uint64_t post_detection_bits = 0;
  bool fault = false;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct ScenarioResult {
  Metrics metrics;
  // One JSON object per configuration, in round order.
  std::vector<std::string> trace;
  std::optional<SimulationFault> fault;
  // Empty when every per-run property held.
  std::vector<std::string> violations;
};

/// Runs a scenario in memory. Throws ConfigError for invalid scenarios.
ScenarioResult simulate(const Scenario& scenario);

/// Recomputes the summary from trace records alone.
Metrics metrics_from_trace(CaseKind kind, std::span<const std::string> trace,
                           std::uint64_t seed);

std::string metrics_csv_header();
std::string metrics_csv_row(const Metrics& m);

/// Runs, writes the trace/metrics files named by the scenario, prints a short
/// summary to `out`. Returns 0, 1 on a property violation or simulation
/// fault, 2 on an invalid scenario.
int run_scenario(const Scenario& scenario, std::ostream& out,
                 std::ostream& err);

/// Runs `base` once per seed using up to `jobs` workers. Results come back in
/// seed order regardless of scheduling.
std::vector<ScenarioResult> sweep(const Scenario& base,
                                  std::span<const std::uint64_t> seeds,
                                  unsigned jobs);

/// Parses "a:b" (inclusive range), "a,b,c" or a single integer.
std::vector<std::uint64_t> parse_seed_list(const std::string& spec);

}  // namespace stabsim
