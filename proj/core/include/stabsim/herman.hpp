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

// Herman's token circulation on an odd ring, the single-token predicates, and
// the randomization-adaptive composition: detector-gated coins layered over
// history collection layered over the ring rule.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "stabsim/history.hpp"
#include "stabsim/randomness.hpp"
#include "stabsim/round_engine.hpp"
#include "stabsim/types.hpp"

namespace stabsim {

/// One bit per node on an oriented ring of odd size n >= 3.
class RingBits {
 public:
  RingBits() = default;
  explicit RingBits(std::vector<Bit> bits);

  std::size_t size() const { return bits_.size(); }
  Bit operator[](std::size_t i) const { return bits_[i]; }
  std::span<const Bit> bits() const { return bits_; }

  friend bool operator==(const RingBits&, const RingBits&) = default;

 private:
  std::vector<Bit> bits_;
};

/// Throws ConfigError unless `topology` is a ring of odd size >= 3.
void require_odd_ring(const Topology& topology);

/// Nodes whose bit equals their left neighbor's, in increasing order.
std::vector<NodeId> tokens(std::span<const Bit> bits);
inline std::vector<NodeId> tokens(const RingBits& state) {
  return tokens(state.bits());
}

/// The ring rule for one node: copy the left bit when it differs, otherwise
/// (token held) take the coin.
inline Bit herman_rule(Bit own, Bit left, Bit coin) {
  return own != left ? left : coin;
}

/// Simultaneous application of the ring rule. Every token holder needs a
/// coin; a missing one is a ProtocolFault.
RingBits herman_step(const RingBits& state, const std::map<NodeId, Bit>& coins);

bool is_safe_tc(std::span<const Bit> bits);
inline bool is_safe_tc(const RingBits& state) { return is_safe_tc(state.bits()); }

/// Single-token step relation: the token stays or moves to index + 1.
/// Both states must be safe.
bool legal_transition(const RingBits& before, const RingBits& after);

/// The unique token holder of a safe state.
NodeId leader(const RingBits& state);

/// Plain randomized Herman: each token holder draws a fresh coin every round.
class HermanProtocol {
 public:
  using State = Bit;
  using Message = Bit;

  explicit HermanProtocol(const Topology& topology);

  State pulse(const State& s, const NodeContext&, Entropy&) const { return s; }
  std::optional<Message> send(const State& s, const NodeContext& ctx,
                              NodeId dest) const;
  State receive(State s, const NodeContext& ctx, Inbox<Message> inbox,
                Entropy& entropy) const;
  static std::size_t wire_size(const Message&) { return 1; }
};

/// Bit received from the left neighbor; faults when absent or not a bit.
Bit left_bit(Inbox<Bit> inbox, const NodeContext& ctx);

/// Full-history detector: collects whole past configurations.
struct FullHistoryDetector {
  using History = HistoryArray<Bit>;
  static constexpr const char* kName = "full";

  static History empty(std::size_t n, std::size_t d) {
    return History::empty(n, d);
  }
  static History shift(const History& h, Bit bit, NodeId self, Round now) {
    return shift_insert(h, std::optional<Bit>(bit), self, now);
  }
  static History collect(History pulsed, NodeId self, std::size_t n,
                         std::span<const History* const> by_sender);
  static bool detect(const History& h, std::size_t n);
  static std::size_t wire_size(const History& h);
};

/// Aggregated detector: per depth, only the capped token count of two arcs.
struct AggregateDetector {
  using History = AggregateHistory;
  static constexpr const char* kName = "aggregate";

  static History empty(std::size_t, std::size_t d) { return History::empty(d); }
  static History shift(const History& h, Bit bit, NodeId self, Round) {
    return agg_shift_insert(h, bit, self);
  }
  static History collect(History pulsed, NodeId self, std::size_t n,
                         std::span<const History* const> by_sender);
  static bool detect(const History& h, std::size_t n) {
    return agg_detect(h, n);
  }
  static std::size_t wire_size(const History& h);
};

template <class Detector>
struct AdaptiveHermanState {
  Bit bit = 0;
  typename Detector::History history;
  // Output of the most recently terminated detector instance.
  std::optional<bool> verdict;
  // Random input for the current round, fixed at the pulse.
  RandWord input;

  friend bool operator==(const AdaptiveHermanState&,
                         const AdaptiveHermanState&) = default;
};

template <class Detector>
struct AdaptiveHermanMessage {
  Bit bit = 0;
  typename Detector::History history;
};

/// Herman composed with a detector and detector-gated coin production.
///
/// Per round and node: the last verdict gates the coin (fresh bit, or the
/// policy's word once convergence was detected), the history is shifted,
/// exchanged with both ring neighbors and merged, the detector runs on the
/// deepest slot, and the ring rule consumes the coin.
template <class Detector>
class AdaptiveHermanProtocol {
 public:
  using State = AdaptiveHermanState<Detector>;
  using Message = AdaptiveHermanMessage<Detector>;
  using History = typename Detector::History;

  AdaptiveHermanProtocol(const Topology& topology, InputPolicy policy)
      : n_(topology.n), d_(diameter(topology)), policy_(policy) {
    require_odd_ring(topology);
  }

  std::size_t depth() const { return d_; }
  const InputPolicy& policy() const { return policy_; }

  State initial(Bit bit) const {
    return State{bit, Detector::empty(n_, d_), std::nullopt, {}};
  }

  State pulse(const State& s, const NodeContext& ctx, Entropy& entropy) const {
    State out;
    out.bit = s.bit;
    out.verdict = s.verdict;
    out.input = gate_input(s.verdict, entropy, policy_, 1, RandWord::of(s.bit, 1));
    out.history = Detector::shift(s.history, s.bit, ctx.self, ctx.round);
    return out;
  }

  std::optional<Message> send(const State& s, const NodeContext&,
                              NodeId) const {
    return Message{s.bit, s.history};
  }

  State receive(State s, const NodeContext& ctx, Inbox<Message> inbox,
                Entropy&) const {
    const NodeId left = ctx.topology->left(ctx.self);
    if (!inbox[left]) throw ProtocolFault("no message from left neighbor");
    const Bit lb = inbox[left]->bit;
    if (lb > 1) throw ProtocolFault("malformed bit from left neighbor");
    std::vector<const History*> by_sender(n_, nullptr);
    for (std::size_t j = 0; j < inbox.size(); ++j) {
      if (inbox[j]) by_sender[j] = &inbox[j]->history;
    }
    s.history = Detector::collect(std::move(s.history), ctx.self, n_,
                                  std::span<const History* const>(by_sender));
    const bool verdict = Detector::detect(s.history, n_);
    s.bit = herman_rule(s.bit, lb, static_cast<Bit>(s.input.bit(0)));
    s.verdict = verdict;
    return s;
  }

  static std::size_t wire_size(const Message& m) {
    return 1 + Detector::wire_size(m.history);
  }

 private:
  std::size_t n_;
  std::size_t d_;
  InputPolicy policy_;
};

using AdaptiveHerman = AdaptiveHermanProtocol<FullHistoryDetector>;
using AggregatedHerman = AdaptiveHermanProtocol<AggregateDetector>;

/// One round of the composed algorithm over a whole configuration.
template <class Detector>
Configuration<AdaptiveHermanState<Detector>> adaptive_herman_round(
    const AdaptiveHermanProtocol<Detector>& protocol, const Topology& topology,
    const Configuration<AdaptiveHermanState<Detector>>& config,
    std::span<Entropy* const> entropy) {
  return step(protocol, topology, config, entropy).next;
}

template <class Detector>
RingBits ring_of(const std::vector<AdaptiveHermanState<Detector>>& states) {
  std::vector<Bit> bits;
  bits.reserve(states.size());
  for (const auto& s : states) bits.push_back(s.bit);
  return RingBits(std::move(bits));
}

}  // namespace stabsim
