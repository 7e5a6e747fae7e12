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

// Synchronous-round execution: pulse, atomic message exchange, transition.
//
// A round runs in three phases over the round-start configuration:
//   1. pulse   - each honest node updates local state and may draw randomness;
//   2. send    - every message of the round is computed from the pulsed
//                states before any is delivered;
//   3. receive - each honest node transitions on its full inbox.
// Byzantine nodes skip all three; their messages and replacement states come
// from a strategy that sees only the round-start configuration and messages
// of earlier rounds.

#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stabsim/randomness.hpp"
#include "stabsim/types.hpp"

namespace stabsim {

enum class TopologyKind { kRing, kComplete };

struct Topology {
  TopologyKind kind = TopologyKind::kComplete;
  std::size_t n = 1;

  static Topology ring(std::size_t n) { return {TopologyKind::kRing, n}; }
  static Topology complete(std::size_t n) {
    return {TopologyKind::kComplete, n};
  }

  NodeId left(NodeId i) const {
    return static_cast<NodeId>((i + n - 1) % n);
  }
  NodeId right(NodeId i) const { return static_cast<NodeId>((i + 1) % n); }

  // Distinct neighbors in increasing id order; never includes `i` itself.
  std::vector<NodeId> neighbors(NodeId i) const;

  friend bool operator==(const Topology&, const Topology&) = default;
};

/// Hop diameter: floor(n/2) on a ring, 1 on a complete graph with n >= 2.
std::size_t diameter(const Topology& topology);

template <class S>
struct Configuration {
  Round round = 0;
  std::vector<S> states;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

struct NodeContext {
  Round round;
  NodeId self;
  const Topology* topology;
};

template <class M>
struct Envelope {
  NodeId from;
  NodeId to;
  M message;
};

// Index r holds every message sent during round r.
template <class M>
using MessageLog = std::vector<std::vector<Envelope<M>>>;

template <class M>
using Inbox = std::span<const std::optional<M>>;

/// A per-node transition function split into the three round phases.
template <class P>
concept Protocol = requires(const P& p, const typename P::State& s,
                            typename P::State owned, const NodeContext& ctx,
                            NodeId dest, Entropy& entropy,
                            Inbox<typename P::Message> inbox,
                            const typename P::Message& m) {
  typename P::State;
  typename P::Message;
  { p.pulse(s, ctx, entropy) } -> std::same_as<typename P::State>;
  { p.send(s, ctx, dest) } -> std::same_as<std::optional<typename P::Message>>;
  {
    p.receive(std::move(owned), ctx, inbox, entropy)
  } -> std::same_as<typename P::State>;
  { P::wire_size(m) } -> std::convertible_to<std::size_t>;
};

/// What a Byzantine strategy may look at when choosing one message.
template <class S, class M>
struct ByzantineView {
  Round round;
  NodeId self;
  NodeId receiver;
  const Configuration<S>& start;
  const MessageLog<M>& past;
};

template <class S, class M>
struct ByzantineSpec {
  using View = ByzantineView<S, M>;

  std::set<NodeId> members;
  // Declared fault bound; validate() checks n >= 3f + 1 and |members| <= f.
  std::size_t f = 0;
  std::function<std::optional<M>(const View&)> message;
  // Replacement state; when empty the stored state is left as is.
  std::function<S(const View&)> state;

  bool contains(NodeId i) const { return members.count(i) != 0; }

  void validate(const Topology& topology) const {
    if (topology.kind != TopologyKind::kComplete && !members.empty()) {
      throw ConfigError("Byzantine nodes require a complete topology");
    }
    if (topology.n < 3 * f + 1) {
      throw ConfigError("n = " + std::to_string(topology.n) +
                        " violates n >= 3f + 1 for f = " + std::to_string(f));
    }
    if (members.size() > f) {
      throw ConfigError("more Byzantine members than the bound f");
    }
    for (NodeId b : members) {
      if (b >= topology.n) throw ConfigError("Byzantine id out of range");
    }
  }
};

struct RoundEvents {
  Round round = 0;
  std::vector<std::uint64_t> bits_drawn;
  // Cumulative meter after the round; empty when the step was driven with
  // caller-supplied entropy.
  std::vector<std::uint64_t> meter;
  std::size_t messages = 0;
  std::size_t message_bytes = 0;
};

struct SimulationFault {
  Round round = 0;
  std::optional<NodeId> node;
  std::string what;
};

// Thrown by step(); carries the offending node.
class StepFault : public ProtocolFault {
 public:
  StepFault(Round round, NodeId node, const std::string& what)
      : ProtocolFault("round " + std::to_string(round) + ", node " +
                      std::to_string(node) + ": " + what),
        round_(round),
        node_(node),
        detail_(what) {}

  Round round() const { return round_; }
  NodeId node() const { return node_; }
  const std::string& detail() const { return detail_; }

 private:
  Round round_;
  NodeId node_;
  std::string detail_;
};

template <class S>
struct ExecutionTrace {
  // configurations[i].round == i.
  std::vector<Configuration<S>> configurations;
  // events[i] describes the step from configurations[i] to [i + 1].
  std::vector<RoundEvents> events;
  std::optional<SimulationFault> fault;
};

template <Protocol P>
struct StepOutput {
  Configuration<typename P::State> next;
  RoundEvents events;
  // Filled only when Byzantine members are present; strategies are the
  // only readers.
  std::vector<Envelope<typename P::Message>> sent;
};

template <Protocol P>
using ByzantineFor = ByzantineSpec<typename P::State, typename P::Message>;

/// One synchronous round. `entropy[i]` serves node i (ignored for Byzantine
/// members). `past` is what Byzantine strategies may observe.
template <Protocol P>
StepOutput<P> step(const P& protocol, const Topology& topology,
                   const Configuration<typename P::State>& config,
                   std::span<Entropy* const> entropy,
                   const ByzantineFor<P>* byz = nullptr,
                   const MessageLog<typename P::Message>* past = nullptr) {
  using State = typename P::State;
  using Message = typename P::Message;
  const std::size_t n = topology.n;
  if (config.states.size() != n) {
    throw ContractViolation("configuration has " +
                            std::to_string(config.states.size()) +
                            " states for " + std::to_string(n) + " nodes");
  }
  if (entropy.size() != n) {
    throw ContractViolation("one entropy source per node required");
  }
  static const MessageLog<Message> kNoHistory;
  const MessageLog<Message>& history = past != nullptr ? *past : kNoHistory;
  auto honest = [&](NodeId i) { return byz == nullptr || !byz->contains(i); };
  const bool keep_sent = byz != nullptr && !byz->members.empty();
  const Round round = config.round;

  std::vector<std::uint64_t> drawn_before(n);
  for (std::size_t i = 0; i < n; ++i) {
    drawn_before[i] = entropy[i] != nullptr ? entropy[i]->bits_drawn() : 0;
  }

  std::vector<State> pulsed;
  pulsed.reserve(n);
  for (NodeId i = 0; i < n; ++i) {
    if (!honest(i)) {
      pulsed.push_back(config.states[i]);
      continue;
    }
    if (entropy[i] == nullptr) throw ContractViolation("missing entropy");
    const NodeContext ctx{round, i, &topology};
    try {
      pulsed.push_back(protocol.pulse(config.states[i], ctx, *entropy[i]));
    } catch (const StepFault&) {
      throw;
    } catch (const ProtocolFault& e) {
      throw StepFault(round, i, e.what());
    }
  }

  StepOutput<P> out;
  // inbox[to][from]; every message is computed before any is delivered.
  std::vector<std::vector<std::optional<Message>>> inbox(
      n, std::vector<std::optional<Message>>(n));
  for (NodeId i = 0; i < n; ++i) {
    const NodeContext ctx{round, i, &topology};
    for (NodeId dest : topology.neighbors(i)) {
      std::optional<Message> msg;
      if (honest(i)) {
        msg = protocol.send(pulsed[i], ctx, dest);
      } else if (byz->message) {
        msg = byz->message({round, i, dest, config, history});
      }
      if (!msg) continue;
      out.events.message_bytes += P::wire_size(*msg);
      ++out.events.messages;
      if (keep_sent) out.sent.push_back({i, dest, *msg});
      inbox[dest][i] = std::move(msg);
    }
  }

  out.next.round = round + 1;
  out.next.states.reserve(n);
  for (NodeId i = 0; i < n; ++i) {
    if (!honest(i)) {
      out.next.states.push_back(byz->state
                                    ? byz->state({round, i, i, config, history})
                                    : config.states[i]);
      continue;
    }
    const NodeContext ctx{round, i, &topology};
    try {
      out.next.states.push_back(protocol.receive(
          std::move(pulsed[i]), ctx, Inbox<Message>(inbox[i]), *entropy[i]));
    } catch (const StepFault&) {
      throw;
    } catch (const ProtocolFault& e) {
      throw StepFault(round, i, e.what());
    }
  }

  out.events.round = round;
  out.events.bits_drawn.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.events.bits_drawn[i] =
        entropy[i] != nullptr ? entropy[i]->bits_drawn() - drawn_before[i] : 0;
  }
  return out;
}

/// One round with explicit random inputs: node i's draws replay
/// `rand_inputs[i]` (one word per draw). Nodes without an entry fault if
/// they try to draw.
template <Protocol P>
Configuration<typename P::State> step(
    const P& protocol, const Topology& topology,
    const Configuration<typename P::State>& config,
    const std::map<NodeId, RandWord>& rand_inputs,
    const ByzantineFor<P>* byz = nullptr,
    const MessageLog<typename P::Message>* past = nullptr) {
  std::vector<ScriptedEntropy> scripted;
  scripted.reserve(topology.n);
  for (NodeId i = 0; i < topology.n; ++i) {
    auto it = rand_inputs.find(i);
    scripted.emplace_back(it == rand_inputs.end()
                              ? std::vector<RandWord>{}
                              : std::vector<RandWord>{it->second});
  }
  std::vector<Entropy*> ptrs;
  for (auto& s : scripted) ptrs.push_back(&s);
  return step(protocol, topology, config, std::span<Entropy* const>(ptrs), byz,
              past)
      .next;
}

/// Seeded execution of `rounds` rounds. Node i draws from its own stream
/// derive_seed(seed, i), so identical inputs give identical traces. A fault
/// halts the run and is recorded in the trace.
template <Protocol P>
ExecutionTrace<typename P::State> run(
    const P& protocol, const Topology& topology,
    Configuration<typename P::State> initial, Round rounds, std::uint64_t seed,
    const ByzantineFor<P>* byz = nullptr) {
  using Message = typename P::Message;
  if (byz != nullptr) byz->validate(topology);
  if (initial.states.size() != topology.n) {
    throw ContractViolation("initial configuration size mismatch");
  }
  const std::size_t n = topology.n;
  std::vector<BitSource> sources;
  sources.reserve(n);
  for (std::size_t i = 0; i < n; ++i) sources.emplace_back(derive_seed(seed, i));
  RandMeter meter(n);
  std::vector<MeteredEntropy> metered;
  metered.reserve(n);
  for (NodeId i = 0; i < n; ++i) metered.emplace_back(sources[i], meter, i);
  std::vector<Entropy*> ptrs;
  for (auto& m : metered) ptrs.push_back(&m);

  const bool log_messages = byz != nullptr && !byz->members.empty();
  MessageLog<Message> log;

  ExecutionTrace<typename P::State> trace;
  trace.configurations.reserve(static_cast<std::size_t>(rounds) + 1);
  trace.events.reserve(static_cast<std::size_t>(rounds));
  trace.configurations.push_back(std::move(initial));
  for (Round r = 0; r < rounds; ++r) {
    try {
      auto out = step(protocol, topology, trace.configurations.back(),
                      std::span<Entropy* const>(ptrs), byz,
                      log_messages ? &log : nullptr);
      out.events.meter.assign(meter.counts().begin(), meter.counts().end());
      trace.events.push_back(std::move(out.events));
      trace.configurations.push_back(std::move(out.next));
      if (log_messages) log.push_back(std::move(out.sent));
    } catch (const StepFault& e) {
      trace.fault = SimulationFault{e.round(), e.node(), e.detail()};
      break;
    }
  }
  return trace;
}

}  // namespace stabsim
