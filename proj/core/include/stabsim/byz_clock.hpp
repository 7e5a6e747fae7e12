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

// Tally detector for k-valued clocks under Byzantine faults, a small clock
// testbed, and its composition with the XOR randomness surrogate.
//
// Pipeline per node, all exchanges inside one synchronous round:
//   round t     clock broadcast, tally -> verdict_t
//   round t+1   verdict_t gates the surrogate words sent; XOR -> r_{t+1}
//   round t+2   r_{t+1} is the random input of the clock step
// Before the pipeline has produced anything (unknown verdict or XOR output)
// nodes fall back to fresh random bits.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stabsim/randomness.hpp"
#include "stabsim/round_engine.hpp"
#include "stabsim/types.hpp"

namespace stabsim {

struct ClockParams {
  std::size_t n = 4;
  std::size_t f = 1;
  unsigned k = 2;
  // Surrogate word width in bits.
  unsigned width = 1;

  std::size_t threshold() const { return n - f; }
  // Throws ConfigError on n < 3f + 1, k < 2, or a bad width.
  void validate() const;
};

struct ClockState {
  std::uint32_t value = 0;

  friend bool operator==(const ClockState&, const ClockState&) = default;
};

struct TallyReport {
  NodeId node = 0;
  std::size_t tally = 0;
  std::size_t threshold = 0;
  bool verdict = false;
};

/// Nodes (self included) reporting `own`'s value. `received` holds the other
/// nodes' reports; absent entries never match.
std::size_t tally(ClockState own,
                  std::span<const std::optional<ClockState>> received);

/// tally >= n - f. Throws ConfigError when n < 3f + 1.
bool clock_detect(std::size_t tally, std::size_t n, std::size_t f);

TallyReport make_report(NodeId node, std::size_t tally, std::size_t n,
                        std::size_t f);

/// floor((n - f') / 2) + f' <= n - f - 1: the most a minority-side correct
/// node can tally stays below the detector threshold.
bool tally_bound_holds(std::size_t n, std::size_t f, std::size_t f_actual);

/// Largest tally a node in the smaller of two correct clock groups can reach
/// when every Byzantine node echoes its value.
inline std::size_t minority_tally_bound(std::size_t n, std::size_t f_actual) {
  return (n - f_actual) / 2 + f_actual;
}

/// Testbed step: a value with support >= n - f (own report included) wins
/// and the clock advances past it; otherwise the clock takes the surrogate
/// word modulo k.
ClockState toy_clock_step(ClockState own,
                          std::span<const std::optional<ClockState>> received,
                          const RandWord& surrogate, const ClockParams& params);

struct ClockNodeState {
  ClockState clock;
  // Most recently terminated detector instance.
  std::optional<bool> verdict;
  // XOR output of the most recent surrogate exchange, not yet consumed.
  std::optional<RandWord> pending;
  // Surrogate words emitted this round, indexed by destination.
  std::vector<RandWord> outgoing;
  // Random input consumed by this round's clock step.
  RandWord input;
  std::size_t last_tally = 0;

  friend bool operator==(const ClockNodeState&, const ClockNodeState&) =
      default;
};

struct ClockMessage {
  std::optional<std::uint32_t> clock;
  RandWord word = RandWord::bottom();
};

class AdaptiveClock {
 public:
  using State = ClockNodeState;
  using Message = ClockMessage;

  explicit AdaptiveClock(ClockParams params);

  const ClockParams& params() const { return params_; }

  // Fresh node: nothing in the pipeline yet.
  State initial(std::uint32_t clock) const;

  State pulse(const State& s, const NodeContext& ctx, Entropy& entropy) const;
  std::optional<Message> send(const State& s, const NodeContext& ctx,
                              NodeId dest) const;
  State receive(State s, const NodeContext& ctx, Inbox<Message> inbox,
                Entropy& entropy) const;
  static std::size_t wire_size(const Message& m);

 private:
  ClockParams params_;
};

/// Whole-configuration round of the composed algorithm.
Configuration<ClockNodeState> adaptive_clock_round(
    const AdaptiveClock& protocol, const Topology& topology,
    const Configuration<ClockNodeState>& config,
    std::span<Entropy* const> entropy,
    const ByzantineFor<AdaptiveClock>* byz = nullptr,
    const MessageLog<ClockMessage>* past = nullptr);

enum class ByzStrategy { kSilent, kEchoReceiver, kRandom, kFlip };

std::optional<ByzStrategy> parse_strategy(std::string_view name);
std::string strategy_name(ByzStrategy s);
std::vector<ByzStrategy> shipped_strategies();

/// Adversary controlling `members`:
///   silent         sends nothing;
///   echo-receiver  reports each receiver's own clock, sends bottom words;
///   random         seeded clock values and words per (round, sender, receiver);
///   flip           reports the value after each receiver's clock, all-ones
///                  words.
ByzantineFor<AdaptiveClock> make_clock_adversary(ByzStrategy strategy,
                                                 std::set<NodeId> members,
                                                 const ClockParams& params,
                                                 std::uint64_t seed);

/// The last `count` node ids, the default placement of Byzantine nodes.
std::set<NodeId> trailing_members(std::size_t n, std::size_t count);

/// True iff every node outside `byzantine` shows the same clock value.
bool correct_clocks_agree(const std::vector<ClockNodeState>& states,
                          const std::set<NodeId>& byzantine);

}  // namespace stabsim
