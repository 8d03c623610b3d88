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
//
// Multi-cell downlink beamforming: each base station designs beamformers for
// its own users to minimize transmit power under per-user SINR targets, while
// the interference it may cause elsewhere is budgeted through nonnegative
// per-user variables I_j. The coupling constraint asks that the mean
// cross-cell leakage received by user j stay below E[I_j]; a hard per-link
// cap |h^H w| <= rho limits the worst case. Dualizing the mean constraint
// gives one multiplier per user and per-cell subproblems, so the problem
// plugs straight into the synchronous / fusion-center / ring engines.

#pragma once

#include <complex>
#include <string>
#include <vector>

#include "dualsim/delay.hpp"
#include "dualsim/engine.hpp"
#include "dualsim/problems.hpp"
#include "dualsim/trace.hpp"

namespace dualsim {

using CVec = std::vector<std::complex<double>>;

// Network description. Users are grouped by cell: cell i owns user indices
// [i*users_per_cell, (i+1)*users_per_cell). Cells are homogeneous (same
// antenna count and user count) so traces have fixed per-node dimensions.
struct BeamSpec {
  int B = 3;               // base stations
  int N = 2;               // transmit antennas per station
  int users_per_cell = 1;
  double sigma2 = 1.0;     // receiver noise power
  double gamma = 10.0;     // SINR target, linear scale (10 dB)
  double rho = 1.65;       // instantaneous per-link leakage cap
  double clip = 5.0;       // channel entries truncated to this magnitude
  int pg_iters = 500;      // projected-gradient budget per subproblem
  double pg_tol = 1e-6;    // relative objective-change stopping tolerance
  int feas_passes = 200;   // alternating-projection budget for feasibility

  void validate() const;
  int num_users() const { return B * users_per_cell; }
  int cell_of(int j) const { return j / users_per_cell; }
};

// Channels out of one base station: h[j] is the length-N vector toward user
// j (all users, own and other-cell). Entries are circularly-symmetric unit
// variance Gaussians redrawn every slot, clipped to |entry| <= spec.clip.
std::vector<CVec> sample_cell_channels(const BeamSpec& spec, int cell,
                                       long slot, std::uint64_t seed);

// Received SINR of user j given every station's channels toward j and every
// beamformer. channels[m][j] is the channel from station m to user j;
// w[n] is user n's beamformer (designed by cell_of(n)).
double sinr(const BeamSpec& spec,
            const std::vector<std::vector<CVec>>& channels,
            const std::vector<CVec>& w, int j);

struct SubproblemResult {
  bool feasible = false;
  std::vector<CVec> w;  // beamformers for this cell's users, in user order
  Vec I;                // interference budgets for this cell's users
  double objective = 0.0;  // power - lam*I + cross-cell leakage penalty
  int iters = 0;
};

// One cell's slot subproblem: minimize
//   sum_own ||w_j||^2 - lam_j I_j  +  sum_other lam_j * (own leakage to j)
// subject to the per-user SINR floor (with I_j eliminated at its optimal
// value) and the |h^H w| <= rho caps. `sigma2_override` >= 0 substitutes the
// noise power (used by the uncoordinated baseline's inflated noise term).
// Infeasible cap geometry is reported via feasible = false, never thrown.
SubproblemResult solve_bs_subproblem(const BeamSpec& spec, int cell,
                                     const Vec& lam,
                                     const std::vector<CVec>& channels,
                                     double sigma2_override = -1.0);

// The per-cell dual step: own users move against their interference budget,
// other-cell users accumulate this cell's leakage; both clipped at zero.
// `I_own` has one entry per own user; `leak` has one entry per user (own
// entries ignored) holding sum_n |h_{cell,j}^H w_n| over this cell's n.
Vec beamforming_dual_update(const BeamSpec& spec, int cell, const Vec& lam,
                            double eps, const Vec& I_own, const Vec& leak);

// Wrap the network as a Problem: one node per cell, dual dimension = #users,
// x = beamformers as interleaved re/im pairs, p = interference budgets,
// objective = -||x||^2 (negated transmit power). Infeasible slots are
// flagged; their allocation is zero and their gradient contribution vanishes.
Problem make_beamforming(const BeamSpec& spec);

enum class BeamEngine { kSynchronous, kAsyncFc, kAisdd };
enum class BeamBaseline { kNone, kUncoordinated };

// Full experiment: run the chosen engine (or the per-cell uncoordinated
// baseline, which ignores `engine` and `delay` and never aborts), then
// attach per-slot series to trace.aux:
//   "power"       total transmit power sum_j ||w_j||^2
//   "sinr_u<j>"   realized SINR of user j (actual cross-cell interference)
//   "cons24_u<j>" running mean of (received leakage - I_j) for user j
//   "flagged_frac" single entry, fraction of flagged (cell, slot) pairs
// Engine runs abort (OracleError) when more than half the slots flag.
RunTrace run_beamforming(const BeamSpec& spec, BeamEngine engine,
                         BeamBaseline baseline, const StepSchedule& step,
                         const DelaySchedule& delay, long T,
                         std::uint64_t seed);

}  // namespace dualsim
