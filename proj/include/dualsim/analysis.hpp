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
#include <string>
#include <vector>

#include "dualsim/problems.hpp"
#include "dualsim/trace.hpp"
#include "dualsim/types.hpp"

namespace dualsim {

// Inputs of the convergence bounds: K summands with gradient norms bounded
// by V, total staleness bounded by tau, B0 bounding the initial distance to
// a minimizer, B bounding the iterate norms and L the dual-gradient
// Lipschitz constant (B and L are empirical surrogates here).
struct TheoryConstants {
  int K = 1;
  double V = 1.0;
  int tau = 0;
  double B0 = 1.0;
  double B = 1.0;
  double L = 1.0;
};

struct ConstantsC {
  double C1 = 0.0;
  double C2 = 0.0;
  double C2prime = 0.0;
  double C_of_tau = 0.0;
};

// C1 = K V^2, C2 = K V^2 (K-1), C2' = 4 K^2 V^2, C(tau) = C1 + C2 + tau C2'.
ConstantsC theory_constants_c(int K, double V, int tau);

struct DualRateBound {
  double gap_bound = 0.0;  // (eps * C(tau) + eta) / 2
  double T_bound = 0.0;    // B0^2 / (eps * eta)
};

// Constant-step dual convergence bound: within T_bound cycles the best dual
// value visited is within gap_bound of the optimum (in expectation).
DualRateBound theorem1_bound(double eps, double eta, const TheoryConstants& c);

// Primal near-optimality bound eps * (C3 + tau * C4) with C3 = V^2 K^2 / 2
// and C4 = K^2 B L V + 2 K^2 V^2.
double theorem2_bound(double eps, int tau, int K, double V, double B,
                      double L);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  long n = 0;
};

// Monte Carlo estimate of the dual function D(lam) = sum_i E max_{x,p}
// [f^i + <lam, g^i>]: sample a state per node, take the best response,
// average the realized Lagrangian terms. Deterministic in `seed`, which
// should differ from engine run seeds.
Estimate estimate_dual(const Problem& problem, const Vec& lam, long n_samples,
                       std::uint64_t seed);

struct PrimalAverage {
  std::vector<Vec> x_bar;      // one mean allocation per node
  Vec node_objective;          // f^i(x_bar^i)
  double objective = 0.0;      // sum of the above
  long slots_used = 0;         // horizon actually averaged
};

// Running average of the deterministic allocations over slots 1..T (flagged
// slots excluded per node) and the objective at the averaged point.
PrimalAverage running_primal_average(const RunTrace& trace,
                                     const Problem& problem, long T);

// Mean over the first `T` update groups (slots for batch engines, cycles for
// ring engines) of the summed constraint gradients: the running feasibility
// measure. Only complete groups (one row per node) are counted.
Vec feasibility_gap(const RunTrace& trace, long T);

// Prefix means at every complete group index: series[k] is the gap after
// k + 1 groups.
std::vector<Vec> feasibility_gap_series(const RunTrace& trace);

struct VBL {
  double V = 0.0;      // 1.05 * max sampled gradient norm over the domains
  double B_hat = 0.0;  // max ||lambda_t|| along a synchronous pilot run
  double L_hat = 0.0;  // max finite-difference ratio of MC dual gradients
};

// Empirical surrogates for the bound inputs. Gradient norms are sampled on
// the allocation boxes when the oracles expose them and at best responses
// to random multipliers otherwise.
VBL estimate_V_B_L(const Problem& problem, long n_samples, std::uint64_t seed);

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares y ~ slope * x + intercept, with the coefficient of
// determination. Degenerate inputs (constant y) report r2 = 1 when the fit
// is exact and 0 otherwise.
LinFit fit_linear(const std::vector<double>& x, const std::vector<double>& y);

struct BruteForceOptions {
  int x_grid = 201;        // points per primal axis
  int lam_grid = 161;      // points per dual axis (coarse stage)
  double lam_hi = 8.0;     // dual box [0, lam_hi]^d
  long n_states = 400;     // empirical program sample count (stochastic case)
  int p_grid = 121;        // points per policy axis
  std::uint64_t seed = 1;
  double tol = 0.02;       // relative duality-gap tolerance
};

struct BruteForceResult {
  bool feasible = true;
  double primal_value = 0.0;
  std::vector<Vec> x_star;
  double dual_value = 0.0;
  Vec lambda_star;
  double gap = 0.0;  // dual_value - primal_value, nonnegative up to grids
  std::string diagnostic;  // non-empty when the grids look too coarse
};

// Exhaustive reference for the quadratic instance: primal grid over the
// allocation box, dual grid with grid inner maximization. The zero-mean
// noise enters the Lagrangian additively, so the deterministic grids are
// exact for the expected problem.
BruteForceResult brute_force_quadratic(const QuadraticSpec& spec,
                                       const BruteForceOptions& opts);

// Reference for a K <= 3 instance of the rate/power problem on an empirical
// program built from a common set of sampled channels: primal side via
// per-node rate/power frontiers (greedy marginal power allocation, exact for
// the concave rates up to the quantum), dual side via a two-stage grid with
// grid inner maximization.
BruteForceResult brute_force_tiny_num(const NumSpec& spec,
                                      const BruteForceOptions& opts);

}  // namespace dualsim
