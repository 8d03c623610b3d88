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

#include "dualsim/types.hpp"

namespace dualsim {

// Scalar quadratic utilities under a shared linear budget:
//   maximize sum_i -(x_i - a_i)^2  s.t.  sum_i E[b/K - x_i + n_i] >= 0,
// x_i in [0, x_max], n_i ~ U[-noise_amp, noise_amp]. d = 1. Closed-form
// best response x_i(lam) = clamp(a_i - lam/2, 0, x_max).
struct QuadraticSpec {
  int K = 3;
  Vec a = {1.0, 2.0, 3.0};
  double b = 3.0;
  double x_max = 5.0;
  double noise_amp = 0.1;

  void validate() const;
};

Problem make_quadratic(const QuadraticSpec& spec);

struct QuadAnalytic {
  double lambda_star = 0.0;
  Vec x_star;
  double primal_value = 0.0;  // equals the dual optimum (zero gap)
};

// Exact multiplier/allocations: interior formula lam* = 2(sum a - b)/K when
// no clamp binds, otherwise bisection on sum_i clamp(a_i - lam/2, 0, x_max).
QuadAnalytic quad_analytic_solution(const QuadraticSpec& spec);

// Exact D(lam) (the noise has zero mean, so the expectation is closed-form).
double quad_dual_value(const QuadraticSpec& spec, double lam);

double quad_gradient_bound(const QuadraticSpec& spec, int node);
double quad_lipschitz_bound(const QuadraticSpec& spec);  // per node

// Network utility maximization over a fading channel: per node a rate r_i in
// [r_min, r_max] with utility w_i log r_i, and a power policy p_i(h) in
// [0, p_max] on h ~ Exp(1) clamped at h_max. d = 2:
//   g_i = [ 0.5 log(1 + h p_i) - r_i ,  P_max/K - p_i ].
struct NumSpec {
  int K = 5;
  Vec w;  // empty -> all ones
  double r_min = 0.1;
  double r_max = 2.0;
  double p_max = 5.0;
  double P_max = 5.0;
  double h_max = 10.0;

  void validate() const;
  double weight(int i) const {
    return w.empty() ? 1.0 : w[std::size_t(i)];
  }
};

Problem make_num(const NumSpec& spec);

double num_gradient_bound(const NumSpec& spec);

// Strict-feasibility margin: best over a grid of flat power levels p~ of
// min(rate margin, power margin) per node at r = r_min, using n Monte Carlo
// channel draws. Positive margin certifies an interior point.
double num_slater_margin(const NumSpec& spec, long n, std::uint64_t seed);

}  // namespace dualsim
