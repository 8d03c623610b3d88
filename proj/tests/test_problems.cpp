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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "dualsim/problems.hpp"
#include "dualsim/rng.hpp"

using namespace dualsim;

TEST_CASE("quadratic: default instance analytic optimum") {
  QuadraticSpec spec;
  QuadAnalytic sol = quad_analytic_solution(spec);
  CHECK(sol.lambda_star == doctest::Approx(2.0).epsilon(1e-10));
  REQUIRE(sol.x_star.size() == 3);
  CHECK(sol.x_star[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(sol.x_star[1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.x_star[2] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(sol.primal_value == doctest::Approx(-3.0).epsilon(1e-10));
}

TEST_CASE("quadratic: analytic optimum with slack budget") {
  QuadraticSpec spec;
  spec.b = 5.9;  // sum a = 6 > b, but supply at lam = 0 is 6 > 5.9
  QuadAnalytic sol = quad_analytic_solution(spec);
  CHECK(sol.lambda_star > 0.0);
  spec.b = 5.0;
  sol = quad_analytic_solution(spec);
  // Interior: lam* = 2(sum a - b)/K = 2/3, x = a - lam/2.
  CHECK(sol.lambda_star == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  CHECK(sol.x_star[0] == doctest::Approx(1.0 - 1.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("quadratic: bisection handles clamped nodes") {
  QuadraticSpec spec;
  spec.a = {0.2, 2.0, 3.0};
  spec.b = 2.0;
  QuadAnalytic sol = quad_analytic_solution(spec);
  double supply = 0.0;
  for (double ai : spec.a) supply += clamp(ai - sol.lambda_star / 2.0, 0.0, spec.x_max);
  CHECK(supply == doctest::Approx(spec.b).epsilon(1e-8));
  // Node 0 is clamped at zero for this multiplier.
  CHECK(clamp(spec.a[0] - sol.lambda_star / 2.0, 0.0, spec.x_max) == 0.0);
}

TEST_CASE("quadratic: dual value at the optimum equals the primal value") {
  QuadraticSpec spec;
  QuadAnalytic sol = quad_analytic_solution(spec);
  CHECK(quad_dual_value(spec, sol.lambda_star) ==
        doctest::Approx(sol.primal_value).epsilon(1e-10));
  // Weak duality: D(lam) >= P* everywhere on the grid.
  for (int k = 0; k <= 200; ++k) {
    double lam = 0.04 * k;
    CHECK(quad_dual_value(spec, lam) >= sol.primal_value - 1e-12);
  }
}

TEST_CASE("quadratic: best response maximizes the lagrangian term") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  for (int i = 0; i < prob.num_nodes(); ++i) {
    const NodeOracle& node = prob.node(i);
    StateSample h = node.sample_state(7, 123);
    for (double lam1 : {0.0, 0.7, 2.0, 5.0}) {
      Vec lam = {lam1};
      Allocation best = node.best_response(lam, h);
      double vbest = lagrangian_term(node, lam, best, h);
      for (int k = 0; k <= 500; ++k) {
        Allocation trial = best;
        trial.x = {spec.x_max * k / 500.0};
        CHECK(lagrangian_term(node, lam, trial, h) <= vbest + 1e-9);
      }
    }
  }
}

TEST_CASE("quadratic: state noise is bounded, centered, reproducible") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  const NodeOracle& node = prob.node(1);
  double sum = 0.0;
  const int n = 20000;
  for (int t = 1; t <= n; ++t) {
    StateSample s = node.sample_state(t, 99);
    REQUIRE(s.value.size() == 1);
    CHECK(std::abs(s.value[0]) <= spec.noise_amp);
    sum += s.value[0];
  }
  CHECK(std::abs(sum / n) < 0.005);
  StateSample a = node.sample_state(5, 99), b = node.sample_state(5, 99);
  CHECK(a.value[0] == b.value[0]);
  CHECK(node.sample_state(5, 100).value[0] != a.value[0]);
}

TEST_CASE("quadratic: declared gradient bounds hold and match hand values") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  CHECK(quad_gradient_bound(spec, 0) == doctest::Approx(1.1));
  CHECK(quad_gradient_bound(spec, 1) == doctest::Approx(1.1));
  CHECK(quad_gradient_bound(spec, 2) == doctest::Approx(2.1));
  CHECK(quad_lipschitz_bound(spec) == doctest::Approx(0.5));
  Rng r(3, 0, 0);
  for (int i = 0; i < prob.num_nodes(); ++i) {
    const NodeOracle& node = prob.node(i);
    double V = *node.gradient_bound();
    for (int k = 0; k < 200; ++k) {
      Vec lam = {r.uniform(0.0, 8.0)};
      StateSample h = node.sample_state(k + 1, 17);
      Allocation a = node.best_response(lam, h);
      CHECK(norm2(node.gradient(a, h)) <= V + 1e-12);
    }
  }
}

TEST_CASE("quadratic: spec validation") {
  QuadraticSpec spec;
  spec.a = {1.0, 2.0};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = QuadraticSpec{};
  spec.b = 7.0;  // >= sum a
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = QuadraticSpec{};
  spec.x_max = 2.0;  // <= max a
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = QuadraticSpec{};
  spec.noise_amp = -0.1;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("num: best response closed form and tie breaks") {
  NumSpec spec;
  Problem prob = make_num(spec);
  const NodeOracle& node = prob.node(0);
  StateSample h;
  h.node = 0;
  h.slot = 1;
  h.value = {1.0};

  Allocation a = node.best_response(Vec{1.0, 0.5}, h);
  CHECK(a.x[0] == doctest::Approx(1.0));  // r = w/lam1 inside [r_min, r_max]
  CHECK(a.p[0] == doctest::Approx(0.0));  // waterfilling at the boundary

  a = node.best_response(Vec{4.0, 0.25}, h);
  CHECK(a.x[0] == doctest::Approx(0.25));
  CHECK(a.p[0] == doctest::Approx(clamp(4.0 / (2.0 * 0.25) - 1.0, 0.0,
                                        spec.p_max)));

  // lam1 <= 0: rate reward is free, power only hurts.
  a = node.best_response(Vec{0.0, 0.5}, h);
  CHECK(a.x[0] == doctest::Approx(spec.r_max));
  CHECK(a.p[0] == doctest::Approx(0.0));

  // lam2 = 0 with positive lam1: power is free, transmit at full power.
  a = node.best_response(Vec{1.0, 0.0}, h);
  CHECK(a.p[0] == doctest::Approx(spec.p_max));

  // Tiny lam1: r = w/lam1 exceeds r_max, clamps.
  a = node.best_response(Vec{0.01, 1.0}, h);
  CHECK(a.x[0] == doctest::Approx(spec.r_max));
}

TEST_CASE("num: best response maximizes over an (r, p) grid") {
  NumSpec spec;
  Problem prob = make_num(spec);
  const NodeOracle& node = prob.node(2);
  for (long slot : {1L, 9L, 40L}) {
    StateSample h = node.sample_state(slot, 5);
    for (Vec lam : {Vec{0.8, 0.3}, Vec{2.0, 1.0}, Vec{0.3, 2.0}}) {
      Allocation best = node.best_response(lam, h);
      double vbest = lagrangian_term(node, lam, best, h);
      for (int ir = 0; ir <= 150; ++ir) {
        for (int ip = 0; ip <= 150; ++ip) {
          Allocation t = best;
          t.x = {spec.r_min + (spec.r_max - spec.r_min) * ir / 150.0};
          t.p = {spec.p_max * ip / 150.0};
          CHECK(lagrangian_term(node, lam, t, h) <= vbest + 1e-6);
        }
      }
    }
  }
}

TEST_CASE("num: channel states are clipped exponentials") {
  NumSpec spec;
  Problem prob = make_num(spec);
  const NodeOracle& node = prob.node(3);
  double sum = 0.0;
  const int n = 20000;
  for (int t = 1; t <= n; ++t) {
    StateSample s = node.sample_state(t, 21);
    CHECK(s.value[0] >= 0.0);
    CHECK(s.value[0] <= spec.h_max);
    sum += s.value[0];
  }
  CHECK(sum / n == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("num: gradient bound covers sampled gradients") {
  NumSpec spec;
  double V = num_gradient_bound(spec);
  CHECK(V == doctest::Approx(std::sqrt(
                 std::pow(0.5 * std::log1p(spec.h_max * spec.p_max) +
                              spec.r_max,
                          2.0) +
                 std::pow(std::max(spec.P_max / spec.K,
                                   spec.p_max - spec.P_max / spec.K),
                          2.0))));
  Problem prob = make_num(spec);
  Rng r(8, 1, 1);
  for (int i = 0; i < prob.num_nodes(); ++i) {
    const NodeOracle& node = prob.node(i);
    for (int k = 0; k < 300; ++k) {
      Vec lam = {r.uniform(0.0, 5.0), r.uniform(0.0, 5.0)};
      StateSample h = node.sample_state(k + 1, 33);
      Allocation a = node.best_response(lam, h);
      CHECK(norm2(node.gradient(a, h)) <= V + 1e-12);
    }
  }
}

TEST_CASE("num: default instance has a strictly feasible point") {
  NumSpec spec;
  CHECK(num_slater_margin(spec, 4000, 7) > 0.0);
}

TEST_CASE("num: spec validation") {
  NumSpec spec;
  spec.r_min = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = NumSpec{};
  spec.r_max = spec.r_min;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = NumSpec{};
  spec.w = {1.0, 1.0};  // wrong length for K = 5
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = NumSpec{};
  spec.P_max = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
