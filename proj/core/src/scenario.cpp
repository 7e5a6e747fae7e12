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

#include "stabsim/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "stabsim/herman.hpp"

namespace stabsim {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kInitStream = 0x494E4954;  // "INIT"

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("cannot parse ") + what + " '" + s + "'");
  }
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

// First index from which `holds` is true through the end.
template <class Pred>
std::optional<Round> stable_from(std::size_t count, Pred holds) {
  std::optional<Round> from;
  for (std::size_t i = count; i-- > 0;) {
    if (!holds(i)) break;
    from = i;
  }
  return from;
}

std::uint64_t sum(std::span<const std::uint64_t> v) {
  std::uint64_t t = 0;
  for (auto x : v) t += x;
  return t;
}

Json optional_bool(const std::optional<bool>& v) {
  return v ? Json(*v) : Json(nullptr);
}

// Shared per-record fields from the engine events.
void add_events(Json& rec, const std::vector<RoundEvents>& events, std::size_t i,
                std::size_t n) {
  if (i == 0) {
    rec["drawn"] = std::vector<std::uint64_t>(n, 0);
    rec["meter"] = std::vector<std::uint64_t>(n, 0);
    rec["messages"] = 0;
    rec["message_bytes"] = 0;
    return;
  }
  const auto& ev = events[i - 1];
  rec["drawn"] = ev.bits_drawn;
  rec["meter"] = ev.meter;
  rec["messages"] = ev.messages;
  rec["message_bytes"] = ev.message_bytes;
}

std::vector<std::uint64_t> meter_at(const std::vector<RoundEvents>& events,
                                    std::size_t i, std::size_t n) {
  if (i == 0) return std::vector<std::uint64_t>(n, 0);
  return events[i - 1].meter;
}

std::vector<Bit> herman_bits(const Scenario& sc) {
  const std::size_t n = sc.n;
  std::vector<Bit> bits(n, 0);
  if (sc.init == "random" || sc.init == "corrupted-history") {
    BitSource src(derive_seed(sc.seed, kInitStream));
    for (auto& b : bits) b = static_cast<Bit>(src.take(1));
  } else if (sc.init == "worst") {
    // All equal: every node holds a token.
  } else if (starts_with(sc.init, "bits:")) {
    const std::string spec = sc.init.substr(5);
    if (spec.size() != n) throw ConfigError("init bit list length != n");
    for (std::size_t i = 0; i < n; ++i) {
      if (spec[i] != '0' && spec[i] != '1') {
        throw ConfigError("init bit list must contain only 0 and 1");
      }
      bits[i] = static_cast<Bit>(spec[i] - '0');
    }
  } else {
    throw ConfigError("unknown herman init '" + sc.init + "'");
  }
  return bits;
}

void corrupt(HistoryArray<Bit>& h, BitSource& src, std::size_t n) {
  for (auto& slot : h.slots) {
    slot.entries.assign(n, std::nullopt);
    for (auto& e : slot.entries) e = static_cast<Bit>(src.take(1));
  }
}

void corrupt(AggregateHistory& h, BitSource& src, std::size_t n) {
  for (auto& slot : h.slots) {
    slot.own = static_cast<Bit>(src.take(1));
    auto arc = [&] {
      TokenAggregate a;
      a.first = static_cast<NodeId>(src.take(16) % n);
      a.length = 1 + src.take(16) % n;
      a.capped_count = static_cast<std::uint8_t>(src.take(2) % 3);
      a.first_bit = static_cast<Bit>(src.take(1));
      a.last_bit = static_cast<Bit>(src.take(1));
      a.closed = a.length == n && src.take(1) == 1;
      return a;
    };
    slot.left = arc();
    slot.right = arc();
  }
}

template <class Detector>
ScenarioResult simulate_herman(const Scenario& sc) {
  using Protocol = AdaptiveHermanProtocol<Detector>;
  const Topology topo = Topology::ring(sc.n);
  const Protocol proto(topo, *InputPolicy::parse(sc.policy));
  const auto bits = herman_bits(sc);

  Configuration<typename Protocol::State> init;
  BitSource corruption(derive_seed(sc.seed, kInitStream + 1));
  for (NodeId i = 0; i < sc.n; ++i) {
    auto s = proto.initial(bits[i]);
    if (sc.init == "corrupted-history") {
      corrupt(s.history, corruption, sc.n);
      s.verdict = corruption.take(1) == 1;
    }
    init.states.push_back(std::move(s));
  }

  const auto trace = run(proto, topo, std::move(init), sc.rounds, sc.seed);
  const auto& configs = trace.configurations;

  ScenarioResult res;
  res.fault = trace.fault;
  std::vector<std::vector<NodeId>> toks;
  std::vector<bool> all_true;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& states = configs[i].states;
    std::vector<Bit> b;
    std::vector<Json> verdicts;
    bool every = true;
    for (const auto& s : states) {
      b.push_back(s.bit);
      verdicts.push_back(optional_bool(s.verdict));
      every = every && s.verdict.value_or(false);
    }
    toks.push_back(tokens(b));
    all_true.push_back(every);

    Json rec;
    rec["round"] = i;
    rec["case"] = "herman";
    rec["bits"] = b;
    rec["tokens"] = toks.back();
    rec["leader"] = toks.back().size() == 1 ? Json(toks.back().front())
                                            : Json(nullptr);
    rec["verdicts"] = verdicts;
    add_events(rec, trace.events, i, sc.n);
    res.trace.push_back(rec.dump());
  }

  Metrics& m = res.metrics;
  m.seed = sc.seed;
  m.rounds_run = configs.size() - 1;
  m.fault = trace.fault.has_value();
  m.convergence_round = stable_from(
      configs.size(), [&](std::size_t i) { return toks[i].size() == 1; });
  m.detection_round =
      stable_from(configs.size(), [&](std::size_t i) { return all_true[i]; });
  const auto final_meter = meter_at(trace.events, configs.size() - 1, sc.n);
  m.total_bits = sum(final_meter);
  if (m.detection_round) {
    m.post_detection_bits =
        m.total_bits - sum(meter_at(trace.events, *m.detection_round, sc.n));
  }

  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].size() % 2 == 0) {
      res.violations.push_back("round " + std::to_string(i) +
                               ": even token count");
    }
    if (i > 0 && toks[i].size() > toks[i - 1].size()) {
      res.violations.push_back("round " + std::to_string(i) +
                               ": token count increased");
    }
  }
  if (m.detection_round && m.post_detection_bits != 0) {
    res.violations.push_back("bits drawn after detection");
  }
  if (m.detection_round && sc.policy == "keep-bit") {
    for (std::size_t i = *m.detection_round; i + 1 < toks.size(); ++i) {
      if (toks[i].size() != 1 || toks[i + 1].size() != 1 ||
          toks[i + 1][0] != (toks[i][0] + 1) % sc.n) {
        res.violations.push_back("round " + std::to_string(i) +
                                 ": token did not advance");
        break;
      }
    }
  }
  return res;
}

std::vector<std::uint32_t> clock_values(const Scenario& sc) {
  std::vector<std::uint32_t> v(sc.n, 0);
  if (sc.init == "random") {
    BitSource src(derive_seed(sc.seed, kInitStream));
    for (auto& c : v) c = static_cast<std::uint32_t>(src.take(32) % sc.k);
  } else if (sc.init == "sync") {
    // All zero.
  } else if (sc.init == "worst") {
    for (std::size_t i = 0; i < sc.n; ++i) v[i] = i < sc.n / 2 ? 0 : 1;
  } else if (starts_with(sc.init, "clocks:")) {
    const auto parts = split(sc.init.substr(7), ',');
    if (parts.size() != sc.n) throw ConfigError("init clock list length != n");
    for (std::size_t i = 0; i < sc.n; ++i) {
      const auto c = parse_u64(parts[i], "clock value");
      if (c >= sc.k) throw ConfigError("init clock value >= k");
      v[i] = static_cast<std::uint32_t>(c);
    }
  } else {
    throw ConfigError("unknown clock init '" + sc.init + "'");
  }
  return v;
}

ScenarioResult simulate_clock(const Scenario& sc) {
  const ClockParams params{sc.n, sc.f, sc.k, sc.width};
  const AdaptiveClock proto(params);
  const Topology topo = Topology::complete(sc.n);
  const auto clocks = clock_values(sc);
  Configuration<ClockNodeState> init;
  for (auto c : clocks) init.states.push_back(proto.initial(c));

  std::optional<ByzantineFor<AdaptiveClock>> adversary;
  std::set<NodeId> byz_ids;
  if (sc.byz && sc.f > 0) {
    byz_ids = trailing_members(sc.n, sc.f);
    adversary = make_clock_adversary(*sc.byz, byz_ids, params,
                                     derive_seed(sc.seed, kInitStream + 2));
  }
  const bool started_agreed = correct_clocks_agree(init.states, byz_ids);
  const auto trace = run(proto, topo, std::move(init), sc.rounds, sc.seed,
                         adversary ? &*adversary : nullptr);
  const auto& configs = trace.configurations;

  ScenarioResult res;
  res.fault = trace.fault;
  std::vector<bool> agreed;
  std::vector<bool> all_true;
  std::vector<std::uint64_t> correct_meter_sum;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& states = configs[i].states;
    std::vector<std::uint32_t> cl;
    std::vector<Json> verdicts;
    std::vector<std::size_t> tallies;
    std::vector<std::string> inputs;
    std::vector<std::size_t> fresh;
    bool every = true;
    for (NodeId j = 0; j < states.size(); ++j) {
      const auto& s = states[j];
      cl.push_back(s.clock.value);
      const bool byz = byz_ids.count(j) != 0;
      verdicts.push_back(byz ? Json(nullptr) : optional_bool(s.verdict));
      tallies.push_back(s.last_tally);
      inputs.push_back(i == 0 || byz ? std::string() : s.input.to_string());
      fresh.push_back(static_cast<std::size_t>(std::count_if(
          s.outgoing.begin(), s.outgoing.end(),
          [](const RandWord& w) { return !w.is_bottom(); })));
      if (!byz) every = every && s.verdict.value_or(false);
    }
    agreed.push_back(correct_clocks_agree(states, byz_ids));
    all_true.push_back(every);

    Json rec;
    rec["round"] = i;
    rec["case"] = "clock";
    rec["clocks"] = cl;
    rec["byzantine"] = std::vector<NodeId>(byz_ids.begin(), byz_ids.end());
    rec["agreed"] = agreed.back();
    rec["tallies"] = tallies;
    rec["verdicts"] = verdicts;
    rec["inputs"] = inputs;
    rec["fresh_words"] = fresh;
    add_events(rec, trace.events, i, sc.n);
    res.trace.push_back(rec.dump());
  }

  Metrics& m = res.metrics;
  m.seed = sc.seed;
  m.rounds_run = configs.size() - 1;
  m.fault = trace.fault.has_value();
  m.convergence_round =
      stable_from(configs.size(), [&](std::size_t i) { return agreed[i]; });
  m.detection_round =
      stable_from(configs.size(), [&](std::size_t i) { return all_true[i]; });
  m.total_bits = sum(meter_at(trace.events, configs.size() - 1, sc.n));
  if (m.detection_round) {
    m.post_detection_bits =
        m.total_bits - sum(meter_at(trace.events, *m.detection_round, sc.n));
  }

  if (started_agreed) {
    for (std::size_t i = 0; i < agreed.size(); ++i) {
      if (!agreed[i]) {
        res.violations.push_back("round " + std::to_string(i) +
                                 ": correct clocks diverged");
        break;
      }
    }
  }
  if (m.detection_round && m.post_detection_bits != 0) {
    res.violations.push_back("bits drawn after detection");
  }
  return res;
}

std::string opt_cell(const std::optional<Round>& r) {
  return r ? std::to_string(*r) : std::string();
}

}  // namespace

void Scenario::validate() const {
  if (kind == CaseKind::kHerman) {
    if (n < 3 || n % 2 == 0) {
      throw ConfigError("herman needs an odd ring size n >= 3");
    }
    if (f != 0 || byz) throw ConfigError("herman runs have no Byzantine nodes");
    if (!InputPolicy::parse(policy)) {
      throw ConfigError("unknown policy '" + policy + "'");
    }
    if (detector != "full" && detector != "aggregate") {
      throw ConfigError("unknown detector '" + detector + "'");
    }
  } else {
    ClockParams{n, f, k, width}.validate();
  }
}

ScenarioResult simulate(const Scenario& scenario) {
  scenario.validate();
  if (scenario.kind == CaseKind::kClock) return simulate_clock(scenario);
  if (scenario.detector == "aggregate") {
    return simulate_herman<AggregateDetector>(scenario);
  }
  return simulate_herman<FullHistoryDetector>(scenario);
}

Metrics metrics_from_trace(CaseKind kind, std::span<const std::string> trace,
                           std::uint64_t seed) {
  Metrics m;
  m.seed = seed;
  if (trace.empty()) return m;
  std::vector<Json> recs;
  recs.reserve(trace.size());
  for (const auto& line : trace) recs.push_back(Json::parse(line));
  m.rounds_run = recs.back()["round"].get<Round>();

  auto meter_sum = [&](std::size_t i) {
    std::uint64_t t = 0;
    for (const auto& v : recs[i]["meter"]) t += v.get<std::uint64_t>();
    return t;
  };
  auto verdicts_true = [&](std::size_t i) {
    for (const auto& v : recs[i]["verdicts"]) {
      if (!v.is_null() && !v.get<bool>()) return false;
      if (v.is_null() && kind == CaseKind::kHerman) return false;
    }
    if (kind == CaseKind::kClock) {
      // Correct nodes with no verdict yet do not count as detected.
      const auto& byz = recs[i]["byzantine"];
      const auto& vs = recs[i]["verdicts"];
      for (std::size_t j = 0; j < vs.size(); ++j) {
        const bool is_byz =
            std::find(byz.begin(), byz.end(), Json(j)) != byz.end();
        if (!is_byz && vs[j].is_null()) return false;
      }
    }
    return true;
  };
  auto converged = [&](std::size_t i) {
    if (kind == CaseKind::kHerman) return recs[i]["tokens"].size() == 1;
    return recs[i]["agreed"].get<bool>();
  };
  m.convergence_round = stable_from(recs.size(), converged);
  m.detection_round = stable_from(recs.size(), verdicts_true);
  m.total_bits = meter_sum(recs.size() - 1);
  if (m.detection_round) {
    m.post_detection_bits = m.total_bits - meter_sum(*m.detection_round);
  }
  return m;
}

std::string metrics_csv_header() {
  return "seed,rounds,convergence_round,detection_round,total_bits,"
         "post_detection_bits,fault";
}

std::string metrics_csv_row(const Metrics& m) {
  std::ostringstream os;
  os << m.seed << ',' << m.rounds_run << ',' << opt_cell(m.convergence_round)
     << ',' << opt_cell(m.detection_round) << ',' << m.total_bits << ','
     << m.post_detection_bits << ',' << (m.fault ? 1 : 0);
  return os.str();
}

int run_scenario(const Scenario& scenario, std::ostream& out,
                 std::ostream& err) {
  ScenarioResult res;
  try {
    res = simulate(scenario);
  } catch (const ConfigError& e) {
    err << "invalid scenario: " << e.what() << '\n';
    return 2;
  }
  if (scenario.trace_path) {
    std::ofstream f(*scenario.trace_path, std::ios::binary);
    if (!f) {
      err << "cannot write " << *scenario.trace_path << '\n';
      return 2;
    }
    for (const auto& line : res.trace) f << line << '\n';
  }
  if (scenario.metrics_path) {
    std::ofstream f(*scenario.metrics_path, std::ios::binary);
    if (!f) {
      err << "cannot write " << *scenario.metrics_path << '\n';
      return 2;
    }
    f << metrics_csv_header() << '\n' << metrics_csv_row(res.metrics) << '\n';
  }
  out << metrics_csv_header() << '\n' << metrics_csv_row(res.metrics) << '\n';
  int status = 0;
  if (res.fault) {
    err << "simulation fault at round " << res.fault->round;
    if (res.fault->node) err << ", node " << *res.fault->node;
    err << ": " << res.fault->what << '\n';
    status = 1;
  }
  for (const auto& v : res.violations) {
    err << "violation: " << v << '\n';
    status = 1;
  }
  return status;
}

std::vector<ScenarioResult> sweep(const Scenario& base,
                                  std::span<const std::uint64_t> seeds,
                                  unsigned jobs) {
  base.validate();
  std::vector<ScenarioResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      Scenario sc = base;
      sc.seed = seeds[i];
      try {
        results[i] = simulate(sc);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers =
      std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(seeds.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& spec) {
  std::vector<std::uint64_t> out;
  if (auto colon = spec.find(':'); colon != std::string::npos) {
    const auto lo = parse_u64(spec.substr(0, colon), "seed range");
    const auto hi = parse_u64(spec.substr(colon + 1), "seed range");
    if (hi < lo) throw ConfigError("empty seed range");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  for (const auto& part : split(spec, ',')) {
    out.push_back(parse_u64(part, "seed"));
  }
  if (out.empty()) throw ConfigError("no seeds given");
  return out;
}

}  // namespace stabsim
