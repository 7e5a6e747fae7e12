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

#include "stabsim/herman.hpp"

#include <string>

namespace stabsim {

RingBits::RingBits(std::vector<Bit> bits) : bits_(std::move(bits)) {
  if (bits_.size() < 3 || bits_.size() % 2 == 0) {
    throw ConfigError("ring size must be odd and at least 3, got " +
                      std::to_string(bits_.size()));
  }
  for (Bit b : bits_) {
    if (b > 1) throw ConfigError("ring state holds a non-bit value");
  }
}

void require_odd_ring(const Topology& topology) {
  if (topology.kind != TopologyKind::kRing) {
    throw ConfigError("token circulation needs a ring topology");
  }
  if (topology.n < 3 || topology.n % 2 == 0) {
    throw ConfigError("token circulation needs an odd ring with n >= 3, got " +
                      std::to_string(topology.n));
  }
}

std::vector<NodeId> tokens(std::span<const Bit> bits) {
  std::vector<NodeId> out;
  const std::size_t n = bits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (bits[i] == bits[(i + n - 1) % n]) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

RingBits herman_step(const RingBits& state,
                     const std::map<NodeId, Bit>& coins) {
  const std::size_t n = state.size();
  std::vector<Bit> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Bit own = state[i];
    const Bit left = state[(i + n - 1) % n];
    if (own != left) {
      next[i] = left;
      continue;
    }
    auto it = coins.find(static_cast<NodeId>(i));
    if (it == coins.end()) {
      throw ProtocolFault("no coin for token holder " + std::to_string(i));
    }
    next[i] = it->second & 1U;
  }
  return RingBits(std::move(next));
}

bool is_safe_tc(std::span<const Bit> bits) { return tokens(bits).size() == 1; }

bool legal_transition(const RingBits& before, const RingBits& after) {
  if (before.size() != after.size()) {
    throw ContractViolation("legal_transition: ring sizes differ");
  }
  if (!is_safe_tc(before) || !is_safe_tc(after)) {
    throw ContractViolation("legal_transition: both states must hold one token");
  }
  const NodeId from = leader(before);
  const NodeId to = leader(after);
  return to == from || to == (from + 1) % before.size();
}

NodeId leader(const RingBits& state) {
  auto t = tokens(state);
  if (t.size() != 1) {
    throw ContractViolation("leader: state holds " + std::to_string(t.size()) +
                            " tokens");
  }
  return t.front();
}

HermanProtocol::HermanProtocol(const Topology& topology) {
  require_odd_ring(topology);
}

std::optional<HermanProtocol::Message> HermanProtocol::send(
    const State& s, const NodeContext& ctx, NodeId dest) const {
  if (dest != ctx.topology->right(ctx.self)) return std::nullopt;
  return s;
}

Bit left_bit(Inbox<Bit> inbox, const NodeContext& ctx) {
  const NodeId left = ctx.topology->left(ctx.self);
  if (left >= inbox.size() || !inbox[left]) {
    throw ProtocolFault("no bit from left neighbor");
  }
  if (*inbox[left] > 1) throw ProtocolFault("malformed bit from left neighbor");
  return *inbox[left];
}

HermanProtocol::State HermanProtocol::receive(State s, const NodeContext& ctx,
                                              Inbox<Message> inbox,
                                              Entropy& entropy) const {
  const Bit left = left_bit(inbox, ctx);
  if (s != left) return left;
  return static_cast<Bit>(entropy.draw(1).bit(0));
}

FullHistoryDetector::History FullHistoryDetector::collect(
    History pulsed, NodeId, std::size_t,
    std::span<const History* const> by_sender) {
  for (const History* h : by_sender) {
    if (h != nullptr) pulsed = merge(std::move(pulsed), *h);
  }
  return pulsed;
}

bool FullHistoryDetector::detect(const History& h, std::size_t) {
  return hist_detect(h, [](std::span<const Bit> c) { return is_safe_tc(c); });
}

std::size_t FullHistoryDetector::wire_size(const History& h) {
  // (slot index, node id, state) triples.
  std::size_t triples = 0;
  for (const auto& slot : h.slots) triples += slot.present();
  return triples * (sizeof(std::uint32_t) * 2 + sizeof(Bit));
}

AggregateDetector::History AggregateDetector::collect(
    History pulsed, NodeId self, std::size_t n,
    std::span<const History* const> by_sender) {
  const NodeId left = static_cast<NodeId>((self + n - 1) % n);
  const NodeId right = static_cast<NodeId>((self + 1) % n);
  return agg_collect(std::move(pulsed), self,
                     left < by_sender.size() ? by_sender[left] : nullptr,
                     right < by_sender.size() ? by_sender[right] : nullptr, n);
}

std::size_t AggregateDetector::wire_size(const History& h) {
  // own bit plus two arcs (first, length, count, two bits) per slot.
  return h.slots.size() * (1 + 2 * (sizeof(std::uint32_t) * 2 + 3));
}

}  // namespace stabsim
