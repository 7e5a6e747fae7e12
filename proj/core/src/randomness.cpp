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

#include "stabsim/randomness.hpp"

#include <algorithm>

namespace stabsim {

std::uint64_t mask_for(unsigned width) {
  return width >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
}

RandWord RandWord::of(std::uint64_t bits, unsigned width) {
  if (width > kMaxWidth) {
    throw ConfigError("word width " + std::to_string(width) + " exceeds 64");
  }
  RandWord w;
  w.bits_ = bits & mask_for(width);
  w.width_ = static_cast<std::uint8_t>(width);
  return w;
}

RandWord RandWord::ones(unsigned width) { return of(~std::uint64_t{0}, width); }

RandWord RandWord::bottom() {
  RandWord w;
  w.bottom_ = true;
  return w;
}

RandWord RandWord::resized(unsigned width) const {
  if (bottom_) return *this;
  return of(bits_, width);
}

std::string RandWord::to_string() const {
  if (bottom_) return "_";
  std::string s(width_, '0');
  // Most significant bit first.
  for (unsigned i = 0; i < width_; ++i) {
    if (bit(i)) s[width_ - 1 - i] = '1';
  }
  return s;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream) {
  return mix64(run_seed ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

std::uint64_t BitSource::block(std::uint64_t index) const {
  return mix64(seed_ + index * 0x9E3779B97F4A7C15ULL);
}

std::uint64_t BitSource::take(unsigned k) {
  if (k > 64) throw ContractViolation("BitSource::take: k > 64");
  if (k == 0) return 0;
  const std::uint64_t idx = position_ / 64;
  const unsigned off = static_cast<unsigned>(position_ % 64);
  std::uint64_t out = block(idx) >> off;
  if (off != 0 && off + k > 64) out |= block(idx + 1) << (64 - off);
  position_ += k;
  return out & mask_for(k);
}

void RandMeter::add(NodeId owner, std::uint64_t bits) {
  counts_.at(owner) += bits;
}

std::uint64_t RandMeter::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

RandWord draw(BitSource& source, unsigned k, RandMeter& meter, NodeId owner) {
  if (k > RandWord::kMaxWidth) throw ContractViolation("draw: k > 64");
  RandWord w = RandWord::of(source.take(k), k);
  meter.add(owner, k);
  return w;
}

RandWord MeteredEntropy::do_draw(unsigned k) {
  return stabsim::draw(*source_, k, *meter_, owner_);
}

RandWord ScriptedEntropy::do_draw(unsigned k) {
  if (next_ >= script_.size()) {
    throw ProtocolFault("scripted random input exhausted");
  }
  return script_[next_++].resized(k);
}

RandWord InputPolicy::word(unsigned width, const RandWord& kept) const {
  switch (kind) {
    case Kind::kConstantOnes:
      return RandWord::ones(width);
    case Kind::kZeros:
      return RandWord::zeros(width);
    case Kind::kKeepBit:
      return kept.is_bottom() ? RandWord::zeros(width) : kept.resized(width);
  }
  return RandWord::zeros(width);
}

std::optional<InputPolicy> InputPolicy::parse(std::string_view name) {
  if (name == "keep-bit") return keep_bit();
  if (name == "ones" || name == "constant-ones") return constant_ones();
  if (name == "zeros") return zeros();
  return std::nullopt;
}

std::string InputPolicy::name() const {
  switch (kind) {
    case Kind::kConstantOnes:
      return "constant-ones";
    case Kind::kZeros:
      return "zeros";
    case Kind::kKeepBit:
      return "keep-bit";
  }
  return "?";
}

RandWord gate_input(std::optional<bool> last_verdict, Entropy& entropy,
                   const InputPolicy& policy, unsigned width,
                   const RandWord& kept) {
  if (last_verdict.value_or(false)) return policy.word(width, kept);
  return entropy.draw(width);
}

RandWord xor_combine(std::span<const RandWord> words, unsigned width) {
  std::uint64_t acc = 0;
  for (const auto& w : words) {
    if (w.is_bottom()) continue;
    if (w.width() != width) {
      throw ContractViolation("xor_combine: word of width " +
                              std::to_string(w.width()) + ", expected " +
                              std::to_string(width));
    }
    acc ^= w.bits();
  }
  return RandWord::of(acc, width);
}

std::vector<RandWord> surrogate_emit(bool verdict_safe, Entropy& entropy,
                                     std::size_t destinations, unsigned width) {
  std::vector<RandWord> out;
  out.reserve(destinations);
  for (std::size_t j = 0; j < destinations; ++j) {
    out.push_back(verdict_safe ? RandWord::bottom() : entropy.draw(width));
  }
  return out;
}

SurrogateResult surrogate_round(bool verdict_safe, Entropy& entropy,
                                std::size_t n, unsigned width,
                                const std::map<NodeId, RandWord>& received) {
  SurrogateResult res;
  auto words = surrogate_emit(verdict_safe, entropy, n, width);
  for (std::size_t j = 0; j < n; ++j) {
    res.outgoing.emplace(static_cast<NodeId>(j), words[j]);
  }
  std::vector<RandWord> in;
  in.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto it = received.find(static_cast<NodeId>(j));
    in.push_back(it == received.end() ? RandWord::bottom()
                                      : it->second.resized(width));
  }
  res.r = xor_combine(in, width);
  return res;
}

}  // namespace stabsim
