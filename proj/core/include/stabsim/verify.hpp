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

// Exhaustive and brute-force checks of the protocol properties, run by the
// `verify` subcommand.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stabsim {

struct VerifyReport {
  std::string suite;
  bool passed = true;
  std::uint64_t cases = 0;
  // First counterexample found, human readable.
  std::string counterexample;
};

/// Odd token count and non-increasing token count over seeded plain runs.
VerifyReport verify_parity(std::uint64_t runs_per_size = 400,
                           std::uint64_t rounds = 100);
/// n = 5: every single-token state under every holder coin sequence of
/// length 6 stays single-token and moves by 0 or +1.
VerifyReport verify_closure();
/// Exact d-round stabilization of history collection from corrupted arrays.
VerifyReport verify_history(std::uint64_t seeds_per_size = 50);
/// u -> u xor a is a bijection on 8-bit words for every bottom pattern over
/// up to four contributors.
VerifyReport verify_xor();
/// Tally bounds for every two-group split, n in [4, 10], echoing adversary;
/// and all-equal correct clocks pass under every shipped strategy.
VerifyReport verify_tally();
/// Closed-arc capped counts against direct token counts, and aggregated vs
/// full-history verdicts on seeded runs.
VerifyReport verify_aggregate(std::uint64_t runs = 200);

std::vector<std::string> verify_suite_names();
std::optional<VerifyReport> run_verify_suite(std::string_view name);

}  // namespace stabsim
