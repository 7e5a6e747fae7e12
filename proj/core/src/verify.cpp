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

#include "stabsim/verify.hpp"

#include <sstream>

#include "stabsim/byz_clock.hpp"
#include "stabsim/herman.hpp"
#include "stabsim/history.hpp"
#include "stabsim/randomness.hpp"
#include "stabsim/round_engine.hpp"

namespace stabsim {

namespace {

std::string bits_str(std::span<const Bit> bits) {
  std::string s;
  for (Bit b : bits) s.push_back(static_cast<char>('0' + b));
  return s;
}

void fail(VerifyReport& r, const std::string& what) {
  if (r.passed) r.counterexample = what;
  r.passed = false;
}

std::vector<Bit> random_bits(std::size_t n, std::uint64_t seed) {
  BitSource src(derive_seed(seed, 0xB175));
  std::vector<Bit> bits(n);
  for (auto& b : bits) b = static_cast<Bit>(src.take(1));
  return bits;
}

}  // namespace

VerifyReport verify_parity(std::uint64_t runs_per_size, std::uint64_t rounds) {
  VerifyReport r{"parity", true, 0, {}};
  for (std::size_t n = 3; n <= 11; n += 2) {
    const Topology topo = Topology::ring(n);
    const HermanProtocol proto(topo);
    for (std::uint64_t seed = 0; seed < runs_per_size && r.passed; ++seed) {
      Configuration<Bit> init{0, random_bits(n, seed * 131 + n)};
      const auto trace = run(proto, topo, init, rounds, seed);
      std::size_t prev = n + 1;
      for (const auto& c : trace.configurations) {
        const std::size_t t = tokens(c.states).size();
        if (t % 2 == 0 || t > prev) {
          std::ostringstream os;
          os << "n=" << n << " seed=" << seed << " round=" << c.round
             << " bits=" << bits_str(c.states) << " tokens=" << t;
          fail(r, os.str());
          break;
        }
        prev = t;
      }
      ++r.cases;
    }
  }
  return r;
}

VerifyReport verify_closure() {
  VerifyReport r{"closure", true, 0, {}};
  constexpr std::size_t n = 5;
  constexpr unsigned kLength = 6;
  for (unsigned mask = 0; mask < (1U << n); ++mask) {
    std::vector<Bit> bits(n);
    for (std::size_t i = 0; i < n; ++i) bits[i] = (mask >> i) & 1U;
    if (!is_safe_tc(bits)) continue;
    for (unsigned coins = 0; coins < (1U << kLength); ++coins) {
      RingBits state(bits);
      for (unsigned t = 0; t < kLength; ++t) {
        const Bit coin = (coins >> t) & 1U;
        std::map<NodeId, Bit> all;
        for (NodeId i = 0; i < n; ++i) all[i] = coin;
        RingBits next = herman_step(state, all);
        ++r.cases;
        if (!is_safe_tc(next) || !legal_transition(state, next)) {
          std::ostringstream os;
          os << "start=" << bits_str(bits) << " coins=" << coins
             << " step=" << t << " " << bits_str(state.bits()) << " -> "
             << bits_str(next.bits());
          fail(r, os.str());
          break;
        }
        state = next;
      }
    }
  }
  return r;
}

VerifyReport verify_history(std::uint64_t seeds_per_size) {
  VerifyReport r{"history", true, 0, {}};
  for (std::size_t n = 3; n <= 9 && r.passed; n += 2) {
    const Topology topo = Topology::ring(n);
    const std::size_t d = diameter(topo);
    const AdaptiveHerman proto(topo, InputPolicy::keep_bit());
    for (std::uint64_t seed = 0; seed < seeds_per_size && r.passed; ++seed) {
      BitSource junk(derive_seed(seed, 0xC0DE + n));
      Configuration<AdaptiveHerman::State> init;
      for (const Bit b : random_bits(n, seed + 7 * n)) {
        auto s = proto.initial(b);
        for (auto& slot : s.history.slots) {
          for (auto& e : slot.entries) {
            // Mix of missing and fabricated entries.
            const auto roll = junk.take(2);
            e = roll == 0 ? std::nullopt
                          : std::optional<Bit>(static_cast<Bit>(roll & 1U));
          }
        }
        s.verdict = junk.take(1) == 1;
        init.states.push_back(std::move(s));
      }
      const Round rounds = 3 * d + 4;
      const auto trace = run(proto, topo, init, rounds, seed);
      const auto& cfg = trace.configurations;
      for (Round end = d; end < rounds; ++end) {
        // Configuration after round `end` must know the round end - d.
        const auto expect = ring_of(cfg[end - d].states);
        for (NodeId i = 0; i < n; ++i) {
          const auto got = cfg[end + 1].states[i].history.slots[d].complete();
          ++r.cases;
          if (!got || *got != std::vector<Bit>(expect.bits().begin(),
                                               expect.bits().end())) {
            std::ostringstream os;
            os << "n=" << n << " seed=" << seed << " round=" << end
               << " node=" << i << " holds a wrong depth-" << d << " slot";
            fail(r, os.str());
          }
        }
      }
    }
  }
  return r;
}

VerifyReport verify_xor() {
  VerifyReport r{"xor", true, 0, {}};
  constexpr unsigned W = 8;
  for (unsigned contributors = 1; contributors <= 4; ++contributors) {
    for (unsigned honest = 0; honest < contributors; ++honest) {
      for (unsigned pattern = 0; pattern < (1U << (contributors - 1));
           ++pattern) {
        for (unsigned a = 0; a < 256; ++a) {
          // Fixed adversary words: the first non-bottom other carries `a`,
          // the rest carry words derived from it.
          std::vector<RandWord> words(contributors);
          std::uint64_t fixed = 0;
          unsigned other = 0;
          bool first = true;
          for (unsigned c = 0; c < contributors; ++c) {
            if (c == honest) continue;
            if ((pattern >> other++) & 1U) {
              words[c] = RandWord::bottom();
            } else {
              const std::uint64_t v = first ? a : mix64(a * 31 + c) & 0xFF;
              first = false;
              words[c] = RandWord::of(v, W);
              fixed ^= v;
            }
          }
          std::vector<bool> seen(256, false);
          for (unsigned u = 0; u < 256; ++u) {
            words[honest] = RandWord::of(u, W);
            const auto out = xor_combine(words, W).bits();
            ++r.cases;
            if (out != (u ^ fixed) || seen[out]) {
              std::ostringstream os;
              os << "contributors=" << contributors << " honest=" << honest
                 << " pattern=" << pattern << " a=" << a << " u=" << u;
              fail(r, os.str());
            }
            seen[out] = true;
          }
        }
      }
    }
  }
  return r;
}

namespace {

// Runs one detector round and returns the resulting node states.
std::vector<ClockNodeState> tally_round(const ClockParams& params,
                                        const std::vector<std::uint32_t>& clocks,
                                        const ByzantineFor<AdaptiveClock>& adv) {
  const AdaptiveClock proto(params);
  const Topology topo = Topology::complete(params.n);
  Configuration<ClockNodeState> config;
  for (auto c : clocks) config.states.push_back(proto.initial(c));
  std::vector<BitSource> sources;
  RandMeter meter(params.n);
  for (std::size_t i = 0; i < params.n; ++i) sources.emplace_back(i);
  std::vector<MeteredEntropy> ent;
  for (NodeId i = 0; i < params.n; ++i) ent.emplace_back(sources[i], meter, i);
  std::vector<Entropy*> ptrs;
  for (auto& e : ent) ptrs.push_back(&e);
  return adaptive_clock_round(proto, topo, config, ptrs, &adv).states;
}

}  // namespace

VerifyReport verify_tally() {
  VerifyReport r{"tally", true, 0, {}};
  for (std::size_t n = 4; n <= 10; ++n) {
    const std::size_t f = (n - 1) / 3;
    const ClockParams params{n, f, 2, 1};
    for (std::size_t fa = 0; fa <= f; ++fa) {
      const std::size_t correct = n - fa;
      const auto members = trailing_members(n, fa);
      const auto echo = make_clock_adversary(ByzStrategy::kEchoReceiver,
                                             members, params, 0);
      if (!tally_bound_holds(n, f, fa)) {
        fail(r, "bound fails for n=" + std::to_string(n) +
                    " f'=" + std::to_string(fa));
      }
      for (std::uint64_t mask = 0; mask < (1ULL << correct); ++mask) {
        std::vector<std::uint32_t> clocks(n, 0);
        std::size_t ones = 0;
        for (std::size_t i = 0; i < correct; ++i) {
          clocks[i] = (mask >> i) & 1U;
          ones += clocks[i];
        }
        ++r.cases;
        if (ones == 0 || ones == correct) {
          // Synchronized: every shipped strategy must leave verdicts true.
          for (auto strat : shipped_strategies()) {
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
              const auto adv =
                  make_clock_adversary(strat, members, params, seed);
              const auto states = tally_round(params, clocks, adv);
              for (NodeId i = 0; i < correct; ++i) {
                if (!states[i].verdict.value_or(false)) {
                  fail(r, "synchronized n=" + std::to_string(n) + " f'=" +
                              std::to_string(fa) + " strategy=" +
                              strategy_name(strat) + " node " +
                              std::to_string(i) + " verdict false");
                }
              }
            }
          }
          continue;
        }
        const auto states = tally_round(params, clocks, echo);
        const std::size_t zeros = correct - ones;
        const std::size_t minority = std::min(zeros, ones);
        const std::size_t bound = minority_tally_bound(n, fa);
        bool some_false = false;
        for (NodeId i = 0; i < correct; ++i) {
          const std::size_t group = clocks[i] == 1 ? ones : zeros;
          if (!states[i].verdict.value_or(true)) some_false = true;
          if (group != minority) continue;
          if (states[i].last_tally > bound || bound > n - f - 1 ||
              states[i].verdict.value_or(true)) {
            std::ostringstream os;
            os << "n=" << n << " f'=" << fa << " mask=" << mask << " node "
               << i << " tally=" << states[i].last_tally << " bound=" << bound;
            fail(r, os.str());
          }
        }
        if (!some_false) {
          fail(r, "no correct detector false for n=" + std::to_string(n) +
                      " mask=" + std::to_string(mask));
        }
      }
    }
  }
  return r;
}

VerifyReport verify_aggregate(std::uint64_t runs) {
  VerifyReport r{"aggregate", true, 0, {}};
  // Closed arcs built by stitching a left and a right half-ring at every node
  // against direct counting.
  for (std::size_t n = 3; n <= 11; n += 2) {
    const std::size_t d = n / 2;
    for (unsigned mask = 0; mask < (1U << n); ++mask) {
      std::vector<Bit> bits(n);
      for (std::size_t i = 0; i < n; ++i) bits[i] = (mask >> i) & 1U;
      const auto want = static_cast<std::uint8_t>(
          std::min<std::size_t>(tokens(bits).size(), 2));
      for (NodeId i = 0; i < n; ++i) {
        std::optional<TokenAggregate> left = TokenAggregate::single(i, bits[i]);
        std::optional<TokenAggregate> right = left;
        for (std::size_t j = 1; j <= d; ++j) {
          const NodeId l = static_cast<NodeId>((i + n - j) % n);
          const NodeId rr = static_cast<NodeId>((i + j) % n);
          left = agg_merge(TokenAggregate::single(l, bits[l]), *left, n);
          right = agg_merge(*right, TokenAggregate::single(rr, bits[rr]), n);
        }
        const auto whole = agg_merge(*left, *right, n);
        ++r.cases;
        if (!whole || !whole->closed || whole->capped_count != want) {
          fail(r, "n=" + std::to_string(n) + " bits=" + bits_str(bits) +
                      " node=" + std::to_string(i));
        }
      }
    }
  }
  // Differential runs.
  for (std::uint64_t seed = 0; seed < runs && r.passed; ++seed) {
    const std::size_t n = 3 + 2 * (seed % 4);
    const Topology topo = Topology::ring(n);
    const AdaptiveHerman full(topo, InputPolicy::keep_bit());
    const AggregatedHerman agg(topo, InputPolicy::keep_bit());
    const auto bits = random_bits(n, seed);
    Configuration<AdaptiveHerman::State> a;
    Configuration<AggregatedHerman::State> b;
    for (Bit x : bits) {
      a.states.push_back(full.initial(x));
      b.states.push_back(agg.initial(x));
    }
    const auto ta = run(full, topo, a, 60, seed);
    const auto tb = run(agg, topo, b, 60, seed);
    for (std::size_t c = 0; c < ta.configurations.size(); ++c) {
      for (NodeId i = 0; i < n; ++i) {
        ++r.cases;
        if (ta.configurations[c].states[i].verdict !=
            tb.configurations[c].states[i].verdict) {
          fail(r, "seed=" + std::to_string(seed) + " round=" +
                      std::to_string(c) + " node=" + std::to_string(i));
        }
      }
    }
  }
  return r;
}

std::vector<std::string> verify_suite_names() {
  return {"parity", "closure", "history", "xor", "tally", "aggregate"};
}

std::optional<VerifyReport> run_verify_suite(std::string_view name) {
  if (name == "parity") return verify_parity();
  if (name == "closure") return verify_closure();
  if (name == "history") return verify_history();
  if (name == "xor") return verify_xor();
  if (name == "tally") return verify_tally();
  if (name == "aggregate") return verify_aggregate();
  return std::nullopt;
}

}  // namespace stabsim
