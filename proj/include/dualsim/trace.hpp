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
#include <map>
#include <string>
#include <vector>

#include "dualsim/vec.hpp"

namespace dualsim {

// Execution record of one run. Events are stored columnwise with fixed
// per-run dimensions so large runs stay cache- and memory-friendly.
//
// Two event families:
//  * allocation events: one per (slot, node); every node allocates every
//    slot. `alloc_pi` is the wall-clock age (in slots) of the dual copy the
//    node used; `alloc_dual_index` is that copy's iterate index (slot index
//    for fusion-center engines, cycle index for ring engines).
//  * update events: one per dual-step gradient use. Fusion-center engines
//    emit K rows per slot (one per summand of the batch step); ring engines
//    emit one row per token visit. `up_tau` / `up_delta` are the realized
//    wall-clock ages of the consumed gradient's dual copy and state.
struct RunTrace {
  std::string engine;
  std::string problem;
  int K = 0;
  int d = 0;
  int x_dim = 0;
  int p_dim = 0;
  long T = 0;
  std::uint64_t seed = 0;
  int tau_max = -1;  // -1 when the run has no delay schedule

  // Iterate at the start of each slot, rows 0..T (row T = final iterate).
  std::vector<double> lambda_slot;
  // Ring engines: cycle-start iterates lambda^0_c, rows 0..cycles_completed.
  std::vector<double> lambda_cycle;
  long cycles_completed = 0;

  // Allocation events, slot-major then node order: T*K rows.
  std::vector<long> alloc_slot;
  std::vector<int> alloc_node;
  std::vector<long> alloc_dual_index;
  std::vector<long> alloc_dual_recv_slot;
  std::vector<int> alloc_pi;
  std::vector<std::uint8_t> alloc_flagged;
  std::vector<double> alloc_x;  // x_dim per row
  std::vector<double> alloc_p;  // p_dim per row
  std::vector<double> alloc_g;  // d per row

  // Update events.
  std::vector<long> up_slot;
  std::vector<long> up_index;  // slot (fc/sync) or cycle (ring)
  std::vector<int> up_node;
  std::vector<int> up_tau;
  std::vector<int> up_delta;
  std::vector<long> up_state_slot;
  std::vector<long> up_dual_index;
  std::vector<double> up_eps;
  std::vector<double> up_g;          // d per row
  std::vector<double> up_step_norm;  // ring engines: per-visit displacement
  // Batch engines: one projected step per slot; its displacement norm.
  std::vector<double> slot_step_norm;

  std::vector<std::string> notes;

  // Named per-slot series attached by application layers (e.g. transmit
  // power or realized SINR for the beamforming wrapper).
  std::map<std::string, Vec> aux;

  long alloc_rows() const { return long(alloc_slot.size()); }
  long up_rows() const { return long(up_slot.size()); }

  Vec lambda_at_slot(long t) const {  // iterate at start of slot t, 1-based
    Vec v(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < d; ++j)
      v[std::size_t(j)] = lambda_slot[std::size_t(t - 1) * d + j];
    return v;
  }
  Vec final_lambda() const { return lambda_at_slot(T + 1); }

  Vec lambda_at_cycle(long c) const {  // lambda^0_c, 1-based
    Vec v(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < d; ++j)
      v[std::size_t(j)] = lambda_cycle[std::size_t(c - 1) * d + j];
    return v;
  }
  Vec final_cycle_lambda() const {
    return lambda_at_cycle(cycles_completed + 1);
  }

  Vec alloc_x_row(long r) const {
    return Vec(alloc_x.begin() + r * x_dim, alloc_x.begin() + (r + 1) * x_dim);
  }
  Vec alloc_p_row(long r) const {
    return Vec(alloc_p.begin() + r * p_dim, alloc_p.begin() + (r + 1) * p_dim);
  }
  Vec alloc_g_row(long r) const {
    return Vec(alloc_g.begin() + r * d, alloc_g.begin() + (r + 1) * d);
  }
  Vec up_g_row(long r) const {
    return Vec(up_g.begin() + r * d, up_g.begin() + (r + 1) * d);
  }
};

// Realized staleness summary. Age-at-use statistics and the inter-update gap
// convention are both reported since averages differ between them.
struct DelayStats {
  double mean_pi = 0.0, max_pi = 0.0;
  double mean_delta = 0.0, max_delta = 0.0;
  double mean_tau = 0.0, max_tau = 0.0;
  double mean_interupdate_gap = 0.0;
  double cycles_per_slot = 0.0;
};

DelayStats summarize_delays(const RunTrace& trace);

// Structural invariants every trace must satisfy: nonnegative iterates,
// realized ages within tau_max, delta <= tau per update row. Returns a list
// of human-readable violations (empty when clean).
std::vector<std::string> check_trace(const RunTrace& trace);

}  // namespace dualsim
