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

// Random bit sources, metering, detector-gated bit production and the
// XOR-combining randomness surrogate.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stabsim/types.hpp"

namespace stabsim {

/// Fixed-width bit vector (width <= 64) or the distinguished bottom marker.
///
/// Bottom is a tagged empty word: it compares unequal to every bit pattern,
/// including an all-zeros word, but contributes the zero word under XOR.
class RandWord {
 public:
  static constexpr unsigned kMaxWidth = 64;

  RandWord() = default;

  static RandWord of(std::uint64_t bits, unsigned width);
  static RandWord zeros(unsigned width) { return of(0, width); }
  static RandWord ones(unsigned width);
  static RandWord bottom();

  std::uint64_t bits() const { return bits_; }
  unsigned width() const { return width_; }
  bool is_bottom() const { return bottom_; }
  bool bit(unsigned i) const { return (bits_ >> i) & 1U; }

  // Truncates or zero-extends to `width`; bottom stays bottom.
  RandWord resized(unsigned width) const;

  std::string to_string() const;

  friend bool operator==(const RandWord&, const RandWord&) = default;

 private:
  std::uint64_t bits_ = 0;
  std::uint8_t width_ = 0;
  bool bottom_ = false;
};

std::uint64_t mask_for(unsigned width);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Independent per-node stream seed derived from a run seed.
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream);

/// Counter-based deterministic bit stream: bit `p` of a source depends only
/// on (seed, p), so a source is fully described by its seed and position.
class BitSource {
 public:
  explicit BitSource(std::uint64_t seed, std::uint64_t position = 0)
      : seed_(seed), position_(position) {}

  // Next k bits (k <= 64), least significant first.
  std::uint64_t take(unsigned k);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

 private:
  std::uint64_t block(std::uint64_t index) const;

  std::uint64_t seed_;
  std::uint64_t position_;
};

/// Cumulative count of bits drawn, per node.
class RandMeter {
 public:
  RandMeter() = default;
  explicit RandMeter(std::size_t nodes) : counts_(nodes, 0) {}

  void add(NodeId owner, std::uint64_t bits);
  std::uint64_t operator[](NodeId owner) const { return counts_.at(owner); }
  std::uint64_t total() const;
  std::span<const std::uint64_t> counts() const { return counts_; }
  std::size_t size() const { return counts_.size(); }

 private:
  std::vector<std::uint64_t> counts_;
};

/// k bits from `source`, charged to `owner` on `meter`.
RandWord draw(BitSource& source, unsigned k, RandMeter& meter, NodeId owner);

/// Where a node's random input comes from during one round. Counts the bits
/// it hands out so the engine can report per-round consumption.
class Entropy {
 public:
  virtual ~Entropy() = default;

  RandWord draw(unsigned k) {
    RandWord w = do_draw(k);
    drawn_ += k;
    return w;
  }
  std::uint64_t bits_drawn() const { return drawn_; }

 protected:
  virtual RandWord do_draw(unsigned k) = 0;

 private:
  std::uint64_t drawn_ = 0;
};

/// Draws from a node's BitSource and charges its meter entry.
class MeteredEntropy final : public Entropy {
 public:
  MeteredEntropy(BitSource& source, RandMeter& meter, NodeId owner)
      : source_(&source), meter_(&meter), owner_(owner) {}

 protected:
  RandWord do_draw(unsigned k) override;

 private:
  BitSource* source_;
  RandMeter* meter_;
  NodeId owner_;
};

/// Replays a fixed list of words; each draw consumes one word truncated to
/// the requested width. Running out is a ProtocolFault.
class ScriptedEntropy final : public Entropy {
 public:
  ScriptedEntropy() = default;
  explicit ScriptedEntropy(std::vector<RandWord> script)
      : script_(std::move(script)) {}

 protected:
  RandWord do_draw(unsigned k) override;

 private:
  std::vector<RandWord> script_;
  std::size_t next_ = 0;
};

/// Input substituted for randomness once the detector reports convergence.
struct InputPolicy {
  enum class Kind { kConstantOnes, kZeros, kKeepBit };

  Kind kind = Kind::kKeepBit;

  static InputPolicy constant_ones() { return {Kind::kConstantOnes}; }
  static InputPolicy zeros() { return {Kind::kZeros}; }
  static InputPolicy keep_bit() { return {Kind::kKeepBit}; }

  // `kept` is the node's own value, used by kKeepBit.
  RandWord word(unsigned width, const RandWord& kept) const;

  static std::optional<InputPolicy> parse(std::string_view name);
  std::string name() const;
};

/// Detector-gated bit production for one node and round. A false (or
/// unknown) last verdict draws `width` fresh bits; a true verdict returns the
/// policy's deterministic word without touching the entropy.
RandWord gate_input(std::optional<bool> last_verdict, Entropy& entropy,
                   const InputPolicy& policy, unsigned width,
                   const RandWord& kept = {});

/// Bitwise XOR of all non-bottom words; bottom contributes zero. Every
/// non-bottom word must have `width` bits.
RandWord xor_combine(std::span<const RandWord> words, unsigned width);

/// Outgoing surrogate words: one independent fresh word per destination
/// when the node's detector says unsafe, bottom everywhere otherwise.
std::vector<RandWord> surrogate_emit(bool verdict_safe, Entropy& entropy,
                                     std::size_t destinations, unsigned width);

struct SurrogateResult {
  std::map<NodeId, RandWord> outgoing;
  RandWord r;
};

/// One full surrogate exchange as seen by one node: emit to every node in
/// [0, n), and combine what was received. Senders absent from `received`
/// count as bottom; received words are coerced to `width`.
SurrogateResult surrogate_round(bool verdict_safe, Entropy& entropy,
                                std::size_t n, unsigned width,
                                const std::map<NodeId, RandWord>& received);

/// Outputs of pipelined protocol instances. An instance started at round s
/// with latency L terminates at the end of round s + L and its output is
/// consumable from round s + L + 1 on.
template <class T>
class Pipeline {
 public:
  void launch(Round start, unsigned latency, T output) {
    instances_.push_back({start, latency, std::move(output)});
  }

  // Output of the most recently started instance that has terminated
  // before `current`.
  std::optional<T> latest(Round current) const {
    const Instance* best = nullptr;
    for (const auto& inst : instances_) {
      if (inst.start + inst.latency + 1 <= current &&
          (best == nullptr || inst.start > best->start)) {
        best = &inst;
      }
    }
    if (best == nullptr) return std::nullopt;
    return best->output;
  }

  std::optional<Round> latest_start(Round current) const {
    std::optional<Round> best;
    for (const auto& inst : instances_) {
      if (inst.start + inst.latency + 1 <= current &&
          (!best || inst.start > *best)) {
        best = inst.start;
      }
    }
    return best;
  }

 private:
  struct Instance {
    Round start;
    unsigned latency;
    T output;
  };
  std::vector<Instance> instances_;
};

}  // namespace stabsim
