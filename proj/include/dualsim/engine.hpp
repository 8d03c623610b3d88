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
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "dualsim/delay.hpp"
#include "dualsim/step.hpp"
#include "dualsim/trace.hpp"
#include "dualsim/types.hpp"

namespace dualsim {

struct EngineOptions {
  StepSchedule step;
  long T = 1000;
  std::uint64_t seed = 1;
  Vec lambda1;  // empty -> zero vector
};

// One summand of a finite-sum dual function: returns a stochastic
// subgradient of its term at `lam` using the state realized at `state_slot`.
// Resource-allocation nodes are wrapped into this interface; purely
// mathematical oracles leave x/p empty.
class GradientOracle {
 public:
  struct Eval {
    Vec g;
    Vec x;
    Vec p;
    bool flagged = false;
  };

  virtual ~GradientOracle() = default;
  virtual int dual_dim() const = 0;
  virtual Eval evaluate(const Vec& lam, long state_slot,
                        std::uint64_t seed) const = 0;
  virtual std::optional<double> gradient_bound() const { return std::nullopt; }
};

// Feasible-set projection for the general engine. `is_nonneg` selects the
// shared nonnegative-orthant fast path (bitwise identical to the dedicated
// engines); otherwise `apply` is called on the post-step iterate.
struct ProjectionSpec {
  bool is_nonneg = true;
  std::function<void(Vec&)> apply;
};

// lambda_{t+1} = [lambda_t - eps_t * sum_i g_t^i(lambda_t)]^+ with every
// node's best response taken at the current iterate.
RunTrace run_synchronous(const Problem& problem, const EngineOptions& opts);

// Fusion-center iteration: nodes allocate against (possibly stale) broadcast
// iterates and the center applies one batch step per slot using the latest
// stored gradient per node. Accepts constant or subset_fc schedules.
RunTrace run_async_fc(const Problem& problem, const DelaySchedule& delay,
                      const EngineOptions& opts);

// Incremental ring iteration: a token sweeps the nodes in index order, each
// visit applying one projected step with the node's stored gradient. Accepts
// budget_incremental schedules (tau_max = 0 selects the degenerate
// zero-staleness schedule, which is the synchronous batch step).
RunTrace run_aisdd(const Problem& problem, const DelaySchedule& delay,
                   const EngineOptions& opts);

// General incremental engine over arbitrary gradient oracles and an
// arbitrary closed convex feasible set. Accepts budget_incremental schedules
// (ring mechanics) and constant schedules (one cycle per slot, each node
// update evaluated at the positional iterate from c cycles back).
RunTrace run_aisdd_general(const std::vector<const GradientOracle*>& oracles,
                           const ProjectionSpec& projection,
                           const DelaySchedule& delay,
                           const EngineOptions& opts);

// Adapter exposing a NodeOracle as a GradientOracle summand.
class NodeGradientOracle : public GradientOracle {
 public:
  explicit NodeGradientOracle(std::shared_ptr<const NodeOracle> node)
      : node_(std::move(node)) {}

  int dual_dim() const override { return node_->dual_dim(); }

  Eval evaluate(const Vec& lam, long state_slot,
                std::uint64_t seed) const override {
    StateSample h = node_->sample_state(state_slot, seed);
    Allocation a = node_->best_response(lam, h);
    Eval e;
    e.x = a.x;
    e.p = a.p;
    e.flagged = a.flagged;
    e.g = a.flagged ? Vec(std::size_t(node_->dual_dim()), 0.0)
                    : node_->gradient(a, h);
    return e;
  }

  std::optional<double> gradient_bound() const override {
    return node_->gradient_bound();
  }

 private:
  std::shared_ptr<const NodeOracle> node_;
};

}  // namespace dualsim
