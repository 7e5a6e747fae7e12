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

// Self-stabilizing history collection and the detectors built on it.
//
// Every node keeps d + 1 partial configurations, slot j describing the system
// j rounds in the past. Each pulse shifts the array one slot deeper, puts the
// node's own current state in slot 0, sends the array to all neighbors and
// merges what arrives. After d rounds slot d is full and correct no matter
// how the arrays were initialized.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stabsim/randomness.hpp"
#include "stabsim/types.hpp"

namespace stabsim {

template <class S>
struct PartialConfiguration {
  // Intended round; negative for slots reaching back before round 0.
  std::int64_t round = 0;
  std::vector<std::optional<S>> entries;

  bool full() const {
    for (const auto& e : entries) {
      if (!e) return false;
    }
    return true;
  }

  std::size_t present() const {
    std::size_t c = 0;
    for (const auto& e : entries) c += e.has_value() ? 1 : 0;
    return c;
  }

  // The configuration itself when every node's entry is present.
  std::optional<std::vector<S>> complete() const {
    if (!full()) return std::nullopt;
    std::vector<S> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(*e);
    return out;
  }

  friend bool operator==(const PartialConfiguration&,
                         const PartialConfiguration&) = default;
};

template <class S>
struct HistoryArray {
  std::vector<PartialConfiguration<S>> slots;

  static HistoryArray empty(std::size_t n, std::size_t d) {
    HistoryArray h;
    h.slots.resize(d + 1);
    for (std::size_t j = 0; j < h.slots.size(); ++j) {
      h.slots[j].round = -static_cast<std::int64_t>(j);
      h.slots[j].entries.resize(n);
    }
    return h;
  }

  std::size_t depth() const { return slots.empty() ? 0 : slots.size() - 1; }

  friend bool operator==(const HistoryArray&, const HistoryArray&) = default;
};

/// Deepens every slot by one, drops the deepest, and starts slot 0 with only
/// the owner's state. Intended rounds are rewritten from slot positions.
template <class S>
HistoryArray<S> shift_insert(const HistoryArray<S>& history,
                             std::optional<S> self_state, NodeId self_id,
                             Round now) {
  if (history.slots.empty()) {
    throw ContractViolation("shift_insert: history has no slots");
  }
  const std::size_t n = history.slots.front().entries.size();
  if (self_id >= n) throw ContractViolation("shift_insert: self id out of range");
  HistoryArray<S> out;
  out.slots.resize(history.slots.size());
  for (std::size_t j = history.slots.size() - 1; j >= 1; --j) {
    out.slots[j].entries = history.slots[j - 1].entries;
    out.slots[j].entries.resize(n);
  }
  out.slots[0].entries.assign(n, std::nullopt);
  out.slots[0].entries[self_id] = std::move(self_state);
  for (std::size_t j = 0; j < out.slots.size(); ++j) {
    out.slots[j].round =
        static_cast<std::int64_t>(now) - static_cast<std::int64_t>(j);
  }
  return out;
}

/// Slot-wise union. On a key present in both, the receiver's entry wins.
template <class S>
HistoryArray<S> merge(HistoryArray<S> mine, const HistoryArray<S>& theirs) {
  if (mine.slots.size() != theirs.slots.size()) {
    throw ProtocolFault("history length mismatch: " +
                        std::to_string(mine.slots.size()) + " vs " +
                        std::to_string(theirs.slots.size()));
  }
  for (std::size_t j = 0; j < mine.slots.size(); ++j) {
    auto& dst = mine.slots[j].entries;
    const auto& src = theirs.slots[j].entries;
    if (dst.size() != src.size()) {
      throw ProtocolFault("history slot " + std::to_string(j) +
                          " has the wrong node count");
    }
    for (std::size_t k = 0; k < dst.size(); ++k) {
      if (!dst[k] && src[k]) dst[k] = src[k];
    }
  }
  return mine;
}

/// True iff the deepest slot is full and `is_safe` accepts it.
template <class S, class Pred>
bool hist_detect(const HistoryArray<S>& history, Pred&& is_safe) {
  if (history.slots.empty()) return false;
  auto config = history.slots.back().complete();
  if (!config) return false;
  return is_safe(std::span<const S>(*config));
}

// ---------------------------------------------------------------------------
// Token-count aggregation on a ring.

/// Summary of a contiguous ring arc for Herman tokens. A token sits at node
/// k when bit(k) == bit(k - 1); the arc counts tokens on its interior
/// adjacent pairs, saturating at 2.
struct TokenAggregate {
  static constexpr std::uint8_t kMany = 2;

  NodeId first = 0;
  std::size_t length = 1;
  std::uint8_t capped_count = 0;
  Bit first_bit = 0;
  Bit last_bit = 0;
  // Covers the whole ring, including the pair closing it.
  bool closed = false;

  static TokenAggregate single(NodeId node, Bit bit) {
    return {node, 1, 0, bit, bit, false};
  }

  NodeId last(std::size_t n) const {
    return static_cast<NodeId>((first + length - 1) % n);
  }

  friend bool operator==(const TokenAggregate&, const TokenAggregate&) =
      default;
};

/// Union of two arcs that meet end to start (adjacent or sharing one node) at
/// one or both ends. Returns nullopt when the arcs cannot be stitched.
std::optional<TokenAggregate> agg_merge(const TokenAggregate& a,
                                        const TokenAggregate& b,
                                        std::size_t n);

/// Token count of a full ring, capped at 2, computed by folding single-node
/// arcs. Used by tests to cross-check the closed-arc path.
std::uint8_t capped_tokens(std::span<const Bit> bits);

/// O(d) replacement for a HistoryArray<Bit> on a ring. Slot j holds the
/// node's own bit j rounds ago and two arcs ending/starting at the node:
/// `left` over [i - j, i] and `right` over [i, i + j], both as of j rounds
/// ago.
struct AggregateSlot {
  std::optional<Bit> own;
  std::optional<TokenAggregate> left;
  std::optional<TokenAggregate> right;

  friend bool operator==(const AggregateSlot&, const AggregateSlot&) = default;
};

struct AggregateHistory {
  std::vector<AggregateSlot> slots;

  static AggregateHistory empty(std::size_t d) {
    AggregateHistory h;
    h.slots.resize(d + 1);
    return h;
  }

  friend bool operator==(const AggregateHistory&, const AggregateHistory&) =
      default;
};

AggregateHistory agg_shift_insert(const AggregateHistory& history, Bit self_bit,
                                  NodeId self);

/// Extends the node's arcs by one hop using its neighbors' shifted arrays.
/// A missing or malformed neighbor array leaves the affected arcs empty.
AggregateHistory agg_collect(AggregateHistory pulsed, NodeId self,
                             const AggregateHistory* from_left,
                             const AggregateHistory* from_right,
                             std::size_t n);

/// Capped token count of the configuration d rounds past, if known.
std::optional<std::uint8_t> agg_tokens(const AggregateHistory& history,
                                       std::size_t n);

/// Detector verdict: the deepest slot stitches into a closed ring with
/// exactly one token.
bool agg_detect(const AggregateHistory& history, std::size_t n);

// ---------------------------------------------------------------------------
// Weakened detector: randomness carried inside the history.

/// Per depth, generator -> one word per system node. A generator appears only
/// at depths where its detector reported unsafe.
using RandStore = HistoryArray<std::vector<RandWord>>;

/// Shifts the store and, when this node's detector says unsafe, records one
/// fresh word for every node of the system under its own id.
RandStore rand_store_insert(const RandStore& store, bool detector_safe,
                            Entropy& entropy, NodeId self, Round now,
                            unsigned width);

/// XOR over every generator's depth-d word addressed to `p`.
RandWord weak_rand(const RandStore& store, NodeId p, unsigned width);

}  // namespace stabsim
