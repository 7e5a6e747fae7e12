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

// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stabsim/byz_clock.hpp"
#include "stabsim/herman.hpp"
#include "stabsim/history.hpp"
#include "stabsim/randomness.hpp"
#include "stabsim/round_engine.hpp"
#include "stabsim/scenario.hpp"

using namespace stabsim;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

// Oracles below recount from raw bits instead of calling the library.

std::size_t count_tokens(const std::vector<Bit>& b) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    c += b[i] == b[(i + b.size() - 1) % b.size()] ? 1 : 0;
  }
  return c;
}

std::size_t holder(const std::vector<Bit>& b) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] == b[(i + b.size() - 1) % b.size()]) return i;
  }
  return b.size();
}

template <class S>
std::vector<Bit> bits_of(const std::vector<S>& states) {
  std::vector<Bit> out;
  for (const auto& s : states) out.push_back(s.bit);
  return out;
}

std::vector<Bit> random_bits(std::mt19937_64& rng, std::size_t n) {
  std::vector<Bit> b(n);
  for (auto& x : b) x = rng() & 1U;
  return b;
}

template <class P>
Configuration<typename P::State> fresh(const P& p, const std::vector<Bit>& b) {
  Configuration<typename P::State> c;
  for (Bit x : b) c.states.push_back(p.initial(x));
  return c;
}

std::string at(const char* what, std::uint64_t a, std::uint64_t b) {
  std::ostringstream os;
  os << what << " " << a << "/" << b;
  return os.str();
}

// 1. History slot d is exact from round d on, and can be wrong one round
// earlier.
Outcome exact_stabilization() {
  Outcome o;
  std::mt19937_64 rng(101);
  for (std::size_t n : {3U, 5U, 7U, 9U}) {
    const auto topo = Topology::ring(n);
    AdaptiveHerman p(topo, InputPolicy::keep_bit());
    const std::size_t d = p.depth();
    if (d != (n - 1) / 2) o.fail("diameter");
    for (int trial = 0; trial < 200; ++trial) {
      auto init = fresh(p, random_bits(rng, n));
      for (auto& s : init.states) {
        for (auto& sl : s.history.slots) {
          sl.round = static_cast<std::int64_t>(rng() % 100);
          for (auto& e : sl.entries) {
            if (rng() % 4 != 0) e = static_cast<Bit>(rng() & 1U);
          }
        }
        s.verdict = (rng() & 1U) != 0;
      }
      auto trace = run(p, topo, init, 3 * d + 4, rng());
      if (trace.fault) return o.fail("fault"), o;
      const auto& cs = trace.configurations;
      // Round r executes on configuration r; its result is stored in r + 1.
      for (std::size_t r = d; r + 1 < cs.size(); ++r) {
        const auto truth = bits_of(cs[r - d].states);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& deepest = cs[r + 1].states[i].history.slots[d];
          const auto got = deepest.complete();
          if (!got || *got != truth ||
              deepest.round != static_cast<std::int64_t>(r - d)) {
            o.fail(at("slot d wrong at n/round", n, r));
          }
        }
      }
    }

    // Fabricated all-zero slot 0 everywhere; the start has fewer than n
    // tokens, so all-zero never occurs in the run.
    for (int trial = 0; trial < 50; ++trial) {
      auto b = random_bits(rng, n);
      const std::size_t k = rng() % n;
      b[k] = 1;
      b[(k + 1) % n] = 0;
      auto init = fresh(p, b);
      for (auto& s : init.states) {
        for (auto& e : s.history.slots[0].entries) e = Bit{0};
      }
      auto trace = run(p, topo, init, d + 2, rng());
      const std::vector<Bit> fake(n, 0);
      for (const auto& c : trace.configurations) {
        if (bits_of(c.states) == fake) o.fail("fabricated state occurred");
      }
      bool wrong = false;
      for (const auto& s : trace.configurations[d].states) {
        const auto got = s.history.slots[d].complete();
        wrong = wrong || (got && *got == fake);
      }
      if (!wrong) o.fail(at("no wrong slot at round d-1 for n", n, d));
    }
  }
  return o;
}

// 2. n = 5, every single-token state, every coin sequence of length 6.
Outcome closure() {
  Outcome o;
  std::size_t safe_states = 0;
  for (unsigned mask = 0; mask < 32; ++mask) {
    std::vector<Bit> b(5);
    for (unsigned i = 0; i < 5; ++i) b[i] = (mask >> i) & 1U;
    if (count_tokens(b) != 1) continue;
    ++safe_states;
    for (unsigned seq = 0; seq < 64; ++seq) {
      RingBits s(b);
      for (unsigned k = 0; k < 6; ++k) {
        const std::size_t t = holder({s.bits().begin(), s.bits().end()});
        const RingBits next =
            herman_step(s, {{static_cast<NodeId>(t), Bit((seq >> k) & 1U)}});
        std::vector<Bit> nb(next.bits().begin(), next.bits().end());
        const std::size_t t2 = holder(nb);
        if (count_tokens(nb) != 1 || !legal_transition(s, next) ||
            (t2 != t && t2 != (t + 1) % 5)) {
          o.fail(at("closure broken mask/seq", mask, seq));
        }
        s = next;
      }
    }
  }
  if (safe_states != 10) o.fail("expected 10 safe states");
  return o;
}

// 3. 10^4 plain runs, odd n in [3, 11], 100 rounds.
Outcome parity_monotone() {
  Outcome o;
  std::mt19937_64 rng(303);
  const std::vector<std::size_t> sizes{3, 5, 7, 9, 11};
  for (int r = 0; r < 10000; ++r) {
    const std::size_t n = sizes[r % sizes.size()];
    const auto topo = Topology::ring(n);
    HermanProtocol p(topo);
    auto trace = run(p, topo, {0, random_bits(rng, n)}, 100, rng());
    if (trace.fault || trace.configurations.size() != 101) {
      o.fail("run incomplete");
      continue;
    }
    std::size_t prev = n + 1;
    for (const auto& c : trace.configurations) {
      const std::size_t t = count_tokens(c.states);
      if (t % 2 == 0) o.fail(at("even token count run/n", r, n));
      if (t > prev) o.fail(at("token count grew run/n", r, n));
      prev = t;
    }
  }
  return o;
}

// 4 and 5 share the same runs.
struct AdaptiveRuns {
  Outcome adaptive;
  Outcome detector;
};

AdaptiveRuns adaptive_runs() {
  AdaptiveRuns out;
  const std::size_t n = 7;
  const auto topo = Topology::ring(n);
  AdaptiveHerman p(topo, InputPolicy::keep_bit());
  const std::size_t d = p.depth();
  std::mt19937_64 rng(404);
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    auto trace = run(p, topo, fresh(p, random_bits(rng, n)), 500, seed);
    if (trace.fault) {
      out.adaptive.fail("fault");
      continue;
    }
    const auto& cs = trace.configurations;
    const auto& ev = trace.events;
    std::size_t conv = cs.size();
    for (std::size_t t = 0; t < cs.size(); ++t) {
      if (count_tokens(bits_of(cs[t].states)) == 1) {
        conv = t;
        break;
      }
    }
    if (conv == cs.size()) {
      out.adaptive.fail(at("no single token seed", seed, 0));
      continue;
    }
    std::size_t detect = cs.size();
    for (std::size_t t = 0; t < cs.size(); ++t) {
      bool all = true;
      for (const auto& s : cs[t].states) all = all && s.verdict.value_or(false);
      if (all) {
        detect = t;
        break;
      }
    }
    if (detect == cs.size()) {
      out.adaptive.fail(at("never detected seed", seed, 0));
      continue;
    }
    for (std::size_t t = detect; t < ev.size(); ++t) {
      if (ev[t].meter != (t == 0 ? std::vector<std::uint64_t>(n, 0)
                                 : ev[t - 1].meter)) {
        out.adaptive.fail(at("meter grew seed/round", seed, t));
      }
      const auto a = bits_of(cs[t].states);
      const auto b = bits_of(cs[t + 1].states);
      if (count_tokens(a) != 1 || holder(b) != (holder(a) + 1) % n) {
        out.adaptive.fail(at("token did not advance seed/round", seed, t));
      }
    }
    for (const auto& c : cs) {
      const auto b = bits_of(c.states);
      if (count_tokens(b) == 1 && leader(RingBits(b)) != holder(b)) {
        out.adaptive.fail(at("leader mismatch seed", seed, c.round));
      }
    }
    // Detector invoked in round r reads configuration r - d; its verdict is
    // stored in configuration r + 1.
    for (std::size_t r = d; r + 1 < cs.size(); ++r) {
      const bool safe = count_tokens(bits_of(cs[r - d].states)) == 1;
      for (const auto& s : cs[r + 1].states) {
        const bool v = s.verdict.value_or(false);
        if (v && !safe) out.detector.fail(at("unsound seed/round", seed, r));
        if (r >= conv + d && !v) {
          out.detector.fail(at("incomplete seed/round", seed, r));
        }
      }
    }
  }
  return out;
}

// 6. XOR of one honest word with any adversary contribution is a bijection.
Outcome xor_masking() {
  Outcome o;
  constexpr unsigned W = 8;
  const std::uint64_t filler[] = {0x5A, 0xC3, 0x17};
  for (unsigned m = 1; m <= 4; ++m) {
    for (unsigned h = 0; h < m; ++h) {
      for (unsigned pattern = 0; pattern < (1U << (m - 1)); ++pattern) {
        for (unsigned a = 0; a < 256; ++a) {
          std::vector<RandWord> words(m);
          int lead = -1;
          std::uint64_t rest = 0;
          unsigned k = 0;
          for (unsigned c = 0; c < m; ++c) {
            if (c == h) continue;
            if ((pattern >> k) & 1U) {
              words[c] = RandWord::bottom();
            } else if (lead < 0) {
              lead = static_cast<int>(c);
            } else {
              words[c] = RandWord::of(filler[k], W);
              rest ^= filler[k];
            }
            ++k;
          }
          // Non-bottom adversary words XOR to exactly `a`.
          const std::uint64_t adv = lead < 0 ? 0 : a;
          if (lead >= 0) words[lead] = RandWord::of(a ^ rest, W);
          std::vector<bool> hit(256, false);
          for (unsigned u = 0; u < 256; ++u) {
            words[h] = RandWord::of(u, W);
            const RandWord r = xor_combine(words, W);
            if (r.width() != W || r.is_bottom() || r.bits() != (u ^ adv) ||
                hit[r.bits()]) {
              o.fail(at("not a bijection m/a", m, a));
            }
            hit[r.bits() & 0xFF] = true;
          }
        }
      }
    }
  }
  return o;
}

struct NodeSources {
  NodeSources(std::size_t n, std::uint64_t seed) : meter(n) {
    for (std::size_t i = 0; i < n; ++i) bits.emplace_back(derive_seed(seed, i));
    for (NodeId i = 0; i < n; ++i) entropy.emplace_back(bits[i], meter, i);
    for (auto& e : entropy) ptrs.push_back(&e);
  }
  std::span<Entropy* const> span() const { return ptrs; }

  std::vector<BitSource> bits;
  RandMeter meter;
  std::vector<MeteredEntropy> entropy;
  std::vector<Entropy*> ptrs;
};

Configuration<ClockNodeState> clock_config(const AdaptiveClock& p,
                                           const std::vector<std::uint32_t>& v) {
  Configuration<ClockNodeState> c;
  for (auto x : v) c.states.push_back(p.initial(x));
  return c;
}

std::set<NodeId> last_ids(std::size_t n, std::size_t count) {
  std::set<NodeId> out;
  for (std::size_t i = n - count; i < n; ++i) out.insert(static_cast<NodeId>(i));
  return out;
}

// 7. Minority-side tallies stay below n - f; equal correct clocks pass.
Outcome tally_bounds() {
  Outcome o;
  for (std::size_t n = 4; n <= 10; ++n) {
    const std::size_t f = (n - 1) / 3;
    const ClockParams params{n, f, 2, 1};
    AdaptiveClock p(params);
    const auto topo = Topology::complete(n);
    for (std::size_t fa = 0; fa <= f; ++fa) {
      const std::size_t correct = n - fa;
      const std::size_t bound = (n - fa) / 2 + fa;
      if (bound > n - f - 1) o.fail(at("bound exceeds threshold n/f'", n, fa));
      auto echo = make_clock_adversary(ByzStrategy::kEchoReceiver,
                                       last_ids(n, fa), params, 0);
      for (unsigned mask = 1; mask + 1 < (1U << correct); ++mask) {
        std::vector<std::uint32_t> v(n, 0);
        std::size_t ones = 0;
        for (std::size_t i = 0; i < correct; ++i) {
          v[i] = (mask >> i) & 1U;
          ones += v[i];
        }
        const std::size_t zeros = correct - ones;
        NodeSources src(n, mask);
        const auto next =
            adaptive_clock_round(p, topo, clock_config(p, v), src.span(), &echo);
        bool some_false = false;
        for (std::size_t i = 0; i < correct; ++i) {
          const auto& s = next.states[i];
          const std::size_t group = v[i] == 1 ? ones : zeros;
          // Own group plus every Byzantine echo.
          if (s.last_tally != group + fa) o.fail(at("tally n/mask", n, mask));
          some_false = some_false || !*s.verdict;
          if (group <= correct - group) {
            if (s.last_tally > bound || *s.verdict) {
              o.fail(at("minority passed n/mask", n, mask));
            }
          }
        }
        if (!some_false) o.fail(at("no false verdict n/mask", n, mask));
      }
      for (auto strat : shipped_strategies()) {
        auto byz = make_clock_adversary(strat, last_ids(n, fa), params, n);
        for (std::uint32_t value : {0U, 1U}) {
          std::vector<std::uint32_t> v(n, value);
          NodeSources src(n, value + 7);
          const auto next =
              adaptive_clock_round(p, topo, clock_config(p, v), src.span(), &byz);
          for (std::size_t i = 0; i < correct; ++i) {
            if (!*next.states[i].verdict) {
              o.fail("equal clocks rejected under " + strategy_name(strat));
            }
          }
        }
      }
    }
  }
  return o;
}

// 8. Synchronized start stays synchronized, and stops drawing bits.
Outcome byzantine_closure() {
  Outcome o;
  for (std::size_t n : {4U, 7U}) {
    const std::size_t f = (n - 1) / 3;
    const ClockParams params{n, f, 2, 1};
    AdaptiveClock p(params);
    const auto topo = Topology::complete(n);
    for (auto strat : shipped_strategies()) {
      for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto byz = make_clock_adversary(strat, last_ids(n, f), params, seed);
        const std::vector<std::uint32_t> v(n, static_cast<std::uint32_t>(seed % 2));
        auto trace = run(p, topo, clock_config(p, v), 100, seed, &byz);
        if (trace.fault || trace.configurations.size() != 101) {
          o.fail("run incomplete");
          continue;
        }
        for (const auto& c : trace.configurations) {
          std::set<std::uint32_t> seen;
          for (std::size_t i = 0; i < n - f; ++i) seen.insert(c.states[i].clock.value);
          if (seen.size() != 1) o.fail(at("correct clocks split seed/round", seed, c.round));
        }
        // Rounds 0 and 1 are the pipeline flush.
        for (std::size_t r = 2; r < trace.events.size(); ++r) {
          if (trace.events[r].meter != trace.events[1].meter) {
            o.fail(strategy_name(strat) + " " + at("meter grew seed/round", seed, r));
          }
        }
      }
    }
  }
  return o;
}

// 9. Without faults, every start reaches agreement within 200 rounds.
Outcome fault_free_convergence() {
  Outcome o;
  const ClockParams params{4, 0, 2, 1};
  AdaptiveClock p(params);
  const auto topo = Topology::complete(4);
  for (unsigned mask = 0; mask < 16; ++mask) {
    std::vector<std::uint32_t> v(4);
    for (unsigned i = 0; i < 4; ++i) v[i] = (mask >> i) & 1U;
    for (std::uint64_t seed = 1; seed <= 250; ++seed) {
      auto trace = run(p, topo, clock_config(p, v), 200, seed * 16 + mask);
      bool agreed = false;
      for (const auto& c : trace.configurations) {
        const auto x = c.states[0].clock.value;
        bool same = true;
        for (const auto& s : c.states) same = same && s.clock.value == x;
        if (same) {
          agreed = true;
          break;
        }
      }
      if (trace.fault || !agreed) o.fail(at("no agreement mask/seed", mask, seed));
    }
  }
  return o;
}

// 10. Aggregated and full detectors agree node by node, round by round.
Outcome aggregation_fidelity() {
  Outcome o;
  std::mt19937_64 rng(1010);
  const std::vector<std::size_t> sizes{3, 5, 7, 9};
  for (int r = 0; r < 1000; ++r) {
    const std::size_t n = sizes[r % sizes.size()];
    const auto topo = Topology::ring(n);
    AdaptiveHerman full(topo, InputPolicy::keep_bit());
    AggregatedHerman agg(topo, InputPolicy::keep_bit());
    const auto b = random_bits(rng, n);
    const std::uint64_t seed = rng();
    auto tf = run(full, topo, fresh(full, b), 80, seed);
    auto ta = run(agg, topo, fresh(agg, b), 80, seed);
    if (tf.fault || ta.fault ||
        tf.configurations.size() != ta.configurations.size()) {
      o.fail("run incomplete");
      continue;
    }
    for (std::size_t t = 0; t < tf.configurations.size(); ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& x = tf.configurations[t].states[i];
        const auto& y = ta.configurations[t].states[i];
        if (x.verdict != y.verdict || x.bit != y.bit) {
          o.fail(at("divergence run/round", r, t));
        }
      }
    }
  }
  return o;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 11. Identical flags, identical bytes.
Outcome determinism() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "stabsim_acceptance";
  fs::create_directories(dir);

  std::vector<Scenario> all;
  for (const char* init : {"random", "worst", "corrupted-history"}) {
    for (const char* det : {"full", "aggregate"}) {
      Scenario s;
      s.kind = CaseKind::kHerman;
      s.n = 9;
      s.rounds = 150;
      s.seed = 42;
      s.init = init;
      s.detector = det;
      all.push_back(s);
    }
  }
  Scenario ones;
  ones.policy = "constant-ones";
  ones.seed = 3;
  all.push_back(ones);
  for (auto strat : shipped_strategies()) {
    Scenario s;
    s.kind = CaseKind::kClock;
    s.n = 7;
    s.f = 2;
    s.byz = strat;
    s.init = "random";
    s.width = 4;
    s.rounds = 120;
    s.seed = 11;
    all.push_back(s);
  }
  Scenario split;
  split.kind = CaseKind::kClock;
  split.n = 4;
  split.init = "worst";
  all.push_back(split);

  for (std::size_t i = 0; i < all.size(); ++i) {
    std::string trace[2];
    std::string metrics[2];
    for (int pass = 0; pass < 2; ++pass) {
      Scenario s = all[i];
      s.trace_path = (dir / ("t" + std::to_string(pass) + ".jsonl")).string();
      s.metrics_path = (dir / ("m" + std::to_string(pass) + ".csv")).string();
      std::ostringstream out, err;
      const int code = run_scenario(s, out, err);
      if (code == 2) o.fail("scenario rejected: " + err.str());
      trace[pass] = read_file(*s.trace_path);
      metrics[pass] = read_file(*s.metrics_path);
    }
    if (trace[0].empty() || metrics[0].empty()) o.fail(at("empty output scenario", i, 0));
    if (trace[0] != trace[1] || metrics[0] != metrics[1]) {
      o.fail(at("bytes differ scenario", i, 0));
    }
  }
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  using Clock = std::chrono::steady_clock;
  int failures = 0;
  auto report = [&](int id, const char* name, double limit_s, double secs,
                    const Outcome& o) {
    const bool in_time = limit_s <= 0 || secs < limit_s;
    const bool pass = o.ok && in_time;
    failures += pass ? 0 : 1;
    std::printf("AC%-2d %s  %-44s %7.3f s", id, pass ? "PASS" : "FAIL", name,
                secs);
    if (limit_s > 0) std::printf(" (limit %.0f s)", limit_s);
    if (!o.ok) std::printf("  %s", o.detail.c_str());
    if (!in_time) std::printf("  too slow");
    std::printf("\n");
    std::fflush(stdout);
  };
  auto timed = [&](int id, const char* name, double limit_s,
                   const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    const Outcome o = body();
    report(id, name, limit_s,
           std::chrono::duration<double>(Clock::now() - t0).count(), o);
  };

  timed(1, "exact-d history stabilization", 1, exact_stabilization);
  timed(2, "closure, n=5 exhaustive", 1, closure);
  timed(3, "token parity and monotonicity", 10, parity_monotone);

  const auto t0 = Clock::now();
  const AdaptiveRuns runs = adaptive_runs();
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  report(4, "randomization adaptiveness, n=7 x 1000", 10, secs, runs.adaptive);
  report(5, "detector soundness and completeness", 10, secs, runs.detector);

  timed(6, "XOR surrogate masking, W=8", 1, xor_masking);
  timed(7, "tally bounds, n in [4,10]", 5, tally_bounds);
  timed(8, "Byzantine closure and adaptiveness", 10, byzantine_closure);
  timed(9, "fault-free testbed convergence", 10, fault_free_convergence);
  timed(10, "aggregation fidelity, 1000 runs", 0, aggregation_fidelity);
  timed(11, "byte-identical reruns", 0, determinism);

  std::printf("%s: %d of 11 criteria failed\n", failures ? "FAIL" : "PASS",
              failures);
  return failures == 0 ? 0 : 1;
}
