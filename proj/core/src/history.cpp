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

#include "stabsim/history.hpp"

#include <algorithm>

namespace stabsim {

namespace {

std::uint8_t saturating_add(std::uint8_t a, std::uint8_t b) {
  return static_cast<std::uint8_t>(
      std::min<unsigned>(unsigned{a} + b, TokenAggregate::kMany));
}

std::size_t ring_gap(NodeId from, NodeId to, std::size_t n) {
  return (to + n - from) % n;
}

// a's end meets b's start.
std::optional<TokenAggregate> stitch(const TokenAggregate& a,
                                     const TokenAggregate& b, std::size_t n) {
  const std::size_t gap = ring_gap(a.last(n), b.first, n);
  std::uint8_t count = saturating_add(a.capped_count, b.capped_count);
  std::size_t covered = a.length + b.length;
  if (gap == 1) {
    if (a.last_bit == b.first_bit) count = saturating_add(count, 1);
  } else if (gap == 0) {
    if (a.last_bit != b.first_bit) return std::nullopt;
    covered -= 1;
  } else {
    return std::nullopt;
  }

  TokenAggregate out;
  out.first = a.first;
  out.first_bit = a.first_bit;
  out.last_bit = b.last_bit;
  if (covered < n) {
    out.length = covered;
    out.capped_count = count;
    return out;
  }
  // The union wraps around: the closing junction joins b's end to a's start.
  const std::size_t closing = ring_gap(b.last(n), a.first, n);
  if (covered == n && closing == 1) {
    if (b.last_bit == a.first_bit) count = saturating_add(count, 1);
  } else if (covered == n + 1 && closing == 0) {
    if (b.last_bit != a.first_bit) return std::nullopt;
  } else {
    return std::nullopt;
  }
  out.length = n;
  out.capped_count = count;
  out.closed = true;
  return out;
}

}  // namespace

std::optional<TokenAggregate> agg_merge(const TokenAggregate& a,
                                        const TokenAggregate& b,
                                        std::size_t n) {
  if (n == 0 || a.length == 0 || b.length == 0 || a.length > n ||
      b.length > n || a.first >= n || b.first >= n) {
    return std::nullopt;
  }
  if (a.closed || b.closed) {
    TokenAggregate out = a.closed ? a : b;
    out.capped_count = std::max(a.capped_count, b.capped_count);
    return out;
  }
  if (auto m = stitch(a, b, n)) return m;
  return stitch(b, a, n);
}

std::uint8_t capped_tokens(std::span<const Bit> bits) {
  const std::size_t n = bits.size();
  if (n == 0) return 0;
  TokenAggregate acc = TokenAggregate::single(0, bits[0]);
  for (std::size_t i = 1; i < n; ++i) {
    acc = *agg_merge(acc, TokenAggregate::single(static_cast<NodeId>(i), bits[i]),
                     n);
  }
  // A single node is its own left neighbor.
  if (n == 1) return 1;
  return acc.capped_count;
}

AggregateHistory agg_shift_insert(const AggregateHistory& history, Bit self_bit,
                                  NodeId self) {
  if (history.slots.empty()) {
    throw ContractViolation("agg_shift_insert: history has no slots");
  }
  AggregateHistory out;
  out.slots.resize(history.slots.size());
  for (std::size_t j = history.slots.size() - 1; j >= 1; --j) {
    out.slots[j] = history.slots[j - 1];
  }
  const auto me = TokenAggregate::single(self, self_bit);
  out.slots[0] = AggregateSlot{self_bit, me, me};
  return out;
}

AggregateHistory agg_collect(AggregateHistory pulsed, NodeId self,
                             const AggregateHistory* from_left,
                             const AggregateHistory* from_right,
                             std::size_t n) {
  const std::size_t depth = pulsed.slots.size();
  auto usable = [depth](const AggregateHistory* h) {
    return h != nullptr && h->slots.size() == depth;
  };
  const bool have_left = usable(from_left);
  const bool have_right = usable(from_right);
  for (std::size_t j = 1; j < depth; ++j) {
    auto& slot = pulsed.slots[j];
    std::optional<TokenAggregate> me;
    if (slot.own) me = TokenAggregate::single(self, *slot.own);

    slot.left.reset();
    if (me && have_left && from_left->slots[j].left) {
      // Neighbor's [i - j, i - 1] followed by this node.
      const auto& theirs = *from_left->slots[j].left;
      if (!theirs.closed && ring_gap(theirs.last(n), self, n) == 1) {
        slot.left = agg_merge(theirs, *me, n);
      }
    }
    slot.right.reset();
    if (me && have_right && from_right->slots[j].right) {
      const auto& theirs = *from_right->slots[j].right;
      if (!theirs.closed && ring_gap(self, theirs.first, n) == 1) {
        slot.right = agg_merge(*me, theirs, n);
      }
    }
  }
  return pulsed;
}

std::optional<std::uint8_t> agg_tokens(const AggregateHistory& history,
                                       std::size_t n) {
  if (history.slots.empty()) return std::nullopt;
  const auto& deepest = history.slots.back();
  if (!deepest.left || !deepest.right) return std::nullopt;
  auto whole = agg_merge(*deepest.left, *deepest.right, n);
  if (!whole || !whole->closed) return std::nullopt;
  return whole->capped_count;
}

bool agg_detect(const AggregateHistory& history, std::size_t n) {
  auto count = agg_tokens(history, n);
  return count.has_value() && *count == 1;
}

RandStore rand_store_insert(const RandStore& store, bool detector_safe,
                            Entropy& entropy, NodeId self, Round now,
                            unsigned width) {
  std::optional<std::vector<RandWord>> mine;
  if (!detector_safe) {
    const std::size_t n = store.slots.front().entries.size();
    std::vector<RandWord> words;
    words.reserve(n);
    for (std::size_t p = 0; p < n; ++p) words.push_back(entropy.draw(width));
    mine = std::move(words);
  }
  return shift_insert(store, std::move(mine), self, now);
}

RandWord weak_rand(const RandStore& store, NodeId p, unsigned width) {
  std::vector<RandWord> contributions;
  if (!store.slots.empty()) {
    for (const auto& generator : store.slots.back().entries) {
      if (generator && p < generator->size()) {
        contributions.push_back((*generator)[p].resized(width));
      }
    }
  }
  return xor_combine(contributions, width);
}

}  // namespace stabsim
