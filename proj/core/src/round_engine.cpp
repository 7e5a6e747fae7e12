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

#include "stabsim/round_engine.hpp"

namespace stabsim {

std::vector<NodeId> Topology::neighbors(NodeId i) const {
  std::vector<NodeId> out;
  if (n <= 1) return out;
  if (kind == TopologyKind::kRing) {
    NodeId l = left(i);
    NodeId r = right(i);
    if (l == r) return {l};
    out = {l, r};
    if (out[0] > out[1]) std::swap(out[0], out[1]);
    return out;
  }
  out.reserve(n - 1);
  for (NodeId j = 0; j < n; ++j) {
    if (j != i) out.push_back(j);
  }
  return out;
}

std::size_t diameter(const Topology& topology) {
  if (topology.n <= 1) return 0;
  if (topology.kind == TopologyKind::kRing) return topology.n / 2;
  return 1;
}

}  // namespace stabsim
