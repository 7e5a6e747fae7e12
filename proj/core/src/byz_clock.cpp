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

#include "stabsim/byz_clock.hpp"

#include <algorithm>

namespace stabsim {

void ClockParams::validate() const {
  if (n == 0) throw ConfigError("clock testbed needs at least one node");
  if (n < 3 * f + 1) {
    throw ConfigError("n = " + std::to_string(n) + " violates n >= 3f + 1 for f = " +
                      std::to_string(f));
  }
  if (k < 2) throw ConfigError("clock needs k >= 2 values");
  if (width == 0 || width > RandWord::kMaxWidth) {
    throw ConfigError("surrogate width must be in [1, 64]");
  }
}

std::size_t tally(ClockState own,
                  std::span<const std::optional<ClockState>> received) {
  std::size_t t = 1;
  for (const auto& r : received) {
    if (r && r->value == own.value) ++t;
  }
  return t;
}

bool clock_detect(std::size_t tally, std::size_t n, std::size_t f) {
  if (n < 3 * f + 1) {
    throw ConfigError("clock_detect: n < 3f + 1");
  }
  return tally >= n - f;
}

TallyReport make_report(NodeId node, std::size_t t, std::size_t n,
                        std::size_t f) {
  return {node, t, n - f, clock_detect(t, n, f)};
}

bool tally_bound_holds(std::size_t n, std::size_t f, std::size_t f_actual) {
  if (f_actual > f || n < 3 * f + 1) return false;
  return minority_tally_bound(n, f_actual) + 1 <= n - f;
}

ClockState toy_clock_step(ClockState own,
                          std::span<const std::optional<ClockState>> received,
                          const RandWord& surrogate, const ClockParams& params) {
  std::vector<std::size_t> support(params.k, 0);
  if (own.value < params.k) ++support[own.value];
  for (const auto& r : received) {
    if (r && r->value < params.k) ++support[r->value];
  }
  for (std::uint32_t v = 0; v < params.k; ++v) {
    if (support[v] >= params.threshold()) {
      return {static_cast<std::uint32_t>((v + 1) % params.k)};
    }
  }
  const std::uint64_t bits = surrogate.is_bottom() ? 0 : surrogate.bits();
  return {static_cast<std::uint32_t>(bits % params.k)};
}

AdaptiveClock::AdaptiveClock(ClockParams params) : params_(params) {
  params_.validate();
}

ClockNodeState AdaptiveClock::initial(std::uint32_t clock) const {
  ClockNodeState s;
  s.clock.value = clock % params_.k;
  return s;
}

ClockNodeState AdaptiveClock::pulse(const State& s, const NodeContext&,
                                    Entropy& entropy) const {
  State out = s;
  out.outgoing =
      surrogate_emit(s.verdict.value_or(false), entropy, params_.n, params_.width);
  if (s.pending && !s.pending->is_bottom()) {
    out.input = s.pending->resized(params_.width);
  } else {
    out.input = entropy.draw(params_.width);
  }
  out.pending.reset();
  return out;
}

std::optional<ClockMessage> AdaptiveClock::send(const State& s,
                                                const NodeContext&,
                                                NodeId dest) const {
  ClockMessage m;
  m.clock = s.clock.value;
  m.word = dest < s.outgoing.size() ? s.outgoing[dest] : RandWord::bottom();
  return m;
}

ClockNodeState AdaptiveClock::receive(State s, const NodeContext& ctx,
                                      Inbox<Message> inbox, Entropy&) const {
  std::vector<std::optional<ClockState>> reports;
  std::vector<RandWord> words;
  reports.reserve(params_.n);
  words.reserve(params_.n);
  words.push_back(ctx.self < s.outgoing.size() ? s.outgoing[ctx.self]
                                               : RandWord::bottom());
  for (NodeId j = 0; j < inbox.size(); ++j) {
    if (j == ctx.self) continue;
    const auto& m = inbox[j];
    if (!m) {
      reports.emplace_back();
      continue;
    }
    if (m->clock && *m->clock < params_.k) {
      reports.push_back(ClockState{*m->clock});
    } else {
      reports.emplace_back();
    }
    words.push_back(m->word.resized(params_.width));
  }
  const std::size_t t = tally(s.clock, reports);
  const bool verdict = clock_detect(t, params_.n, params_.f);
  s.pending = xor_combine(words, params_.width);
  s.clock = toy_clock_step(s.clock, reports, s.input, params_);
  s.verdict = verdict;
  s.last_tally = t;
  return s;
}

std::size_t AdaptiveClock::wire_size(const Message& m) {
  return (m.clock ? 4 : 0) + 1 + (m.word.is_bottom() ? 0 : 8);
}

Configuration<ClockNodeState> adaptive_clock_round(
    const AdaptiveClock& protocol, const Topology& topology,
    const Configuration<ClockNodeState>& config,
    std::span<Entropy* const> entropy, const ByzantineFor<AdaptiveClock>* byz,
    const MessageLog<ClockMessage>* past) {
  if (topology.kind != TopologyKind::kComplete ||
      topology.n != protocol.params().n) {
    throw ConfigError("clock testbed needs a complete graph of n nodes");
  }
  return step(protocol, topology, config, entropy, byz, past).next;
}

std::optional<ByzStrategy> parse_strategy(std::string_view name) {
  if (name == "silent") return ByzStrategy::kSilent;
  if (name == "echo-receiver" || name == "echo") return ByzStrategy::kEchoReceiver;
  if (name == "random") return ByzStrategy::kRandom;
  if (name == "flip") return ByzStrategy::kFlip;
  return std::nullopt;
}

std::string strategy_name(ByzStrategy s) {
  switch (s) {
    case ByzStrategy::kSilent:
      return "silent";
    case ByzStrategy::kEchoReceiver:
      return "echo-receiver";
    case ByzStrategy::kRandom:
      return "random";
    case ByzStrategy::kFlip:
      return "flip";
  }
  return "?";
}

std::vector<ByzStrategy> shipped_strategies() {
  return {ByzStrategy::kSilent, ByzStrategy::kEchoReceiver, ByzStrategy::kRandom,
          ByzStrategy::kFlip};
}

ByzantineFor<AdaptiveClock> make_clock_adversary(ByzStrategy strategy,
                                                 std::set<NodeId> members,
                                                 const ClockParams& params,
                                                 std::uint64_t seed) {
  using View = ByzantineFor<AdaptiveClock>::View;
  ByzantineFor<AdaptiveClock> spec;
  spec.members = std::move(members);
  spec.f = params.f;
  const unsigned k = params.k;
  const unsigned width = params.width;
  switch (strategy) {
    case ByzStrategy::kSilent:
      spec.message = [](const View&) { return std::optional<ClockMessage>(); };
      break;
    case ByzStrategy::kEchoReceiver:
      spec.message = [](const View& v) {
        return std::optional<ClockMessage>(ClockMessage{
            v.start.states[v.receiver].clock.value, RandWord::bottom()});
      };
      break;
    case ByzStrategy::kRandom:
      spec.message = [seed, k, width](const View& v) {
        const std::uint64_t h = derive_seed(
            seed, (v.round * 1'000'003ULL + v.self) * 1'000'003ULL + v.receiver);
        return std::optional<ClockMessage>(ClockMessage{
            static_cast<std::uint32_t>(h % k), RandWord::of(mix64(h), width)});
      };
      break;
    case ByzStrategy::kFlip:
      spec.message = [k, width](const View& v) {
        const std::uint32_t theirs = v.start.states[v.receiver].clock.value;
        return std::optional<ClockMessage>(
            ClockMessage{(theirs + 1) % k, RandWord::ones(width)});
      };
      break;
  }
  return spec;
}

std::set<NodeId> trailing_members(std::size_t n, std::size_t count) {
  std::set<NodeId> out;
  for (std::size_t i = n - std::min(n, count); i < n; ++i) {
    out.insert(static_cast<NodeId>(i));
  }
  return out;
}

bool correct_clocks_agree(const std::vector<ClockNodeState>& states,
                          const std::set<NodeId>& byzantine) {
  std::optional<std::uint32_t> seen;
  for (NodeId i = 0; i < states.size(); ++i) {
    if (byzantine.count(i) != 0) continue;
    if (seen && *seen != states[i].clock.value) return false;
    seen = states[i].clock.value;
  }
  return true;
}

}  // namespace stabsim
