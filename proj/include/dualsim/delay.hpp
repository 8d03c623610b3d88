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
#include <stdexcept>
#include <string>
#include <vector>

#include "dualsim/rng.hpp"

namespace dualsim {

struct UpdateBudget {
  int min_updates = 1;
  int max_updates = 1;
};

// Staleness model for a run. Three kinds:
//  * constant: every node allocates with the iterate from c slots ago and
//    delivers its gradient immediately (pi = c, delta = 0, tau = c).
//  * subset_fc: each slot a random m-subset of nodes exchanges with the
//    fusion center (receives the current iterate, delivers a fresh
//    gradient); other nodes' stored gradients and dual copies age. Nodes
//    whose stored gradient would exceed tau_max slots are force-included.
//  * budget_incremental: ring token for the incremental engine; each slot
//    performs a random number of token steps within [min, max], never
//    processing a cycle index ahead of the wall clock. Extra steps are
//    forced whenever a node's dual copy would otherwise exceed tau_max
//    slots of age, so every recorded age stays within tau_max even when the
//    nominal budget is too slow to honor it. tau_max = 0 with a full-cycle
//    budget selects the degenerate zero-staleness schedule (one synchronous
//    batch step per slot).
struct DelaySchedule {
  enum class Kind { kNone, kConstant, kSubsetFc, kBudgetIncremental };

  Kind kind = Kind::kNone;
  int c = 0;
  int m = 0;
  UpdateBudget budget;
  int K = 0;
  int tau_max = 0;
  std::uint64_t seed = 0;

  bool zero_staleness() const {
    switch (kind) {
      case Kind::kNone:
        return true;
      case Kind::kConstant:
        return c == 0;
      case Kind::kSubsetFc:
        return m == K && tau_max == 0;
      case Kind::kBudgetIncremental:
        return tau_max == 0;
    }
    return false;
  }
};

inline DelaySchedule constant_delay(int c) {
  if (c < 0) throw std::invalid_argument("constant_delay: c must be >= 0");
  DelaySchedule d;
  d.kind = DelaySchedule::Kind::kConstant;
  d.c = c;
  d.tau_max = c;
  return d;
}

inline DelaySchedule subset_fc_delay(int m, int K, int tau_max,
                                     std::uint64_t seed) {
  if (K < 1) throw std::invalid_argument("subset_fc_delay: K must be >= 1");
  if (m < 1 || m > K)
    throw std::invalid_argument("subset_fc_delay: m must lie in [1, K], got " +
                                std::to_string(m));
  if (tau_max < 0)
    throw std::invalid_argument("subset_fc_delay: tau_max must be >= 0");
  if (tau_max == 0 && m != K)
    throw std::invalid_argument(
        "subset_fc_delay: tau_max = 0 requires m = K (every node must "
        "exchange every slot)");
  DelaySchedule d;
  d.kind = DelaySchedule::Kind::kSubsetFc;
  d.m = m;
  d.K = K;
  d.tau_max = tau_max;
  d.seed = seed;
  return d;
}

inline DelaySchedule budget_incremental_schedule(UpdateBudget budget, int K,
                                                 int tau_max,
                                                 std::uint64_t seed) {
  if (K < 1)
    throw std::invalid_argument("budget_incremental_schedule: K must be >= 1");
  if (budget.min_updates < 1 || budget.max_updates < budget.min_updates)
    throw std::invalid_argument(
        "budget_incremental_schedule: need 1 <= min_updates <= max_updates");
  if (tau_max == 0) {
    if (budget.min_updates != K || budget.max_updates != K)
      throw std::invalid_argument(
          "budget_incremental_schedule: tau_max = 0 (zero staleness) "
          "requires budget {K, K}");
  } else if (tau_max < 1) {
    throw std::invalid_argument(
        "budget_incremental_schedule: tau_max must be >= 1 (the ring model "
        "has one slot of inherent lag), or 0 for the degenerate "
        "zero-staleness schedule");
  }
  DelaySchedule d;
  d.kind = DelaySchedule::Kind::kBudgetIncremental;
  d.budget = budget;
  d.K = K;
  d.tau_max = tau_max;
  d.seed = seed;
  return d;
}

// Sequential subset generator for subset_fc schedules. Slots must be queried
// in order starting at 1. Slot 1 is a full exchange (the fusion center needs
// one gradient per node before its first update); later slots draw a uniform
// m-subset, force-including any node whose stored gradient would otherwise
// exceed tau_max slots.
class SubsetSequence {
 public:
  explicit SubsetSequence(const DelaySchedule& d);

  const std::vector<int>& exchange_set(long slot);

 private:
  DelaySchedule sched_;
  long next_slot_ = 1;
  std::vector<long> last_delivery_;
  std::vector<int> current_;
};

// Per-slot token-step budgets for budget_incremental schedules. Draws are
// counter-based on (seed, slot) so they do not depend on engine internals.
class BudgetSequence {
 public:
  explicit BudgetSequence(const DelaySchedule& d) : sched_(d) {}

  int steps_for_slot(long slot) const {
    if (sched_.budget.min_updates == sched_.budget.max_updates)
      return sched_.budget.min_updates;
    Rng r(sched_.seed, 0x62756447u /* stream tag */, std::uint64_t(slot));
    return int(r.uniform_int(sched_.budget.min_updates,
                             sched_.budget.max_updates));
  }

 private:
  DelaySchedule sched_;
};

}  // namespace dualsim
