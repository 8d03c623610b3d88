// Copyright (c) 2026 dualsim authors
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

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualsim/vec.hpp"

namespace dualsim {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Realization of a node's random state (channel, noise, ...) at one slot.
struct StateSample {
  int node = 0;
  long slot = 0;
  Vec value;
};

// Primal decision of one node: x is the deterministic allocation, p the
// realized policy value for the sampled state. Either may be empty for
// problems that lack that part. `flagged` marks a slot the node could not
// serve (used by the beamforming subproblem when no feasible point exists);
// flagged allocations carry zero gradients so the dual iterate is unchanged.
struct Allocation {
  int node = 0;
  long slot = 0;
  Vec x;
  Vec p;
  bool flagged = false;
};

// Stochastic constraint evaluation g^i together with its staleness stamps.
// dual_stamp is the index of the dual iterate used when the gradient was
// formed (slot index for fusion-center engines, cycle index for ring
// engines); state_slot is the slot whose state realization was used.
struct StochGradient {
  int node = 0;
  Vec g;
  long state_slot = 0;
  long dual_stamp = 0;
  long dual_recv_slot = 0;
};

// One node of a separable resource allocation problem:
//   maximize sum_i f^i(x^i)  s.t.  sum_i E[g^i] >= 0 componentwise,
// where g^i(x, p; h) couples the nodes. Implementations must be pure: given
// the same inputs they return the same outputs, and all randomness flows
// through (seed, node, slot) counters.
class NodeOracle {
 public:
  virtual ~NodeOracle() = default;

  virtual int node_id() const = 0;
  virtual int dual_dim() const = 0;
  virtual int state_dim() const = 0;

  virtual StateSample sample_state(long slot, std::uint64_t seed) const = 0;

  // argmax over (x, p) of f^i(x) + <lam, g^i(x, p; state)>.
  virtual Allocation best_response(const Vec& lam,
                                   const StateSample& state) const = 0;

  virtual Vec gradient(const Allocation& alloc,
                       const StateSample& state) const = 0;

  virtual double objective(const Vec& x) const = 0;

  // Componentwise bounds of X^i and of the per-state policy box, when the
  // problem has gridable domains (used by brute-force oracles).
  virtual std::optional<std::pair<Vec, Vec>> x_bounds() const {
    return std::nullopt;
  }
  virtual std::optional<std::pair<Vec, Vec>> p_bounds() const {
    return std::nullopt;
  }

  // Declared a.s. bound V_i on ||g^i|| and Lipschitz bound L_i on the dual
  // gradient, when known.
  virtual std::optional<double> gradient_bound() const { return std::nullopt; }
  virtual std::optional<double> lipschitz_bound() const { return std::nullopt; }
};

// A problem instance: K node oracles sharing one dual space of dimension d.
struct Problem {
  int dual_dim = 0;
  std::string name;
  std::vector<std::shared_ptr<const NodeOracle>> nodes;

  int num_nodes() const { return int(nodes.size()); }
  const NodeOracle& node(int i) const { return *nodes[std::size_t(i)]; }
};

// f^i(x) + <lam, g^i(x, p; state)> for one node.
inline double lagrangian_term(const NodeOracle& node, const Vec& lam,
                              const Allocation& alloc,
                              const StateSample& state) {
  if (int(lam.size()) != node.dual_dim())
    throw DimensionError("lagrangian_term: dual vector has dimension " +
                         std::to_string(lam.size()) + ", node expects " +
                         std::to_string(node.dual_dim()));
  Vec g = node.gradient(alloc, state);
  return node.objective(alloc.x) + dot(lam, g);
}

}  // namespace dualsim
