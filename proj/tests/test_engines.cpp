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
#include <cstdint>

#include "doctest.h"
#include "dualsim/engine.hpp"
#include "dualsim/problems.hpp"

using namespace dualsim;

namespace {

EngineOptions quad_opts(double eps, long T, std::uint64_t seed) {
  EngineOptions o;
  o.step = StepSchedule::Constant(eps);
  o.T = T;
  o.seed = seed;
  return o;
}

// g(lam) = scale * lam, state-independent. With K = 1, no staleness and an
// identity projection the iteration contracts geometrically.
class LinearOracle : public GradientOracle {
 public:
  LinearOracle(int d, double scale) : d_(d), scale_(scale) {}
  int dual_dim() const override { return d_; }
  Eval evaluate(const Vec& lam, long, std::uint64_t) const override {
    Eval e;
    e.g = lam;
    for (double& v : e.g) v *= scale_;
    return e;
  }

 private:
  int d_;
  double scale_;
};

ProjectionSpec identity_projection() {
  ProjectionSpec p;
  p.is_nonneg = false;
  p.apply = [](Vec&) {};
  return p;
}

}  // namespace

TEST_CASE("synchronous iterates settle near the exact multiplier") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  RunTrace tr = run_synchronous(prob, quad_opts(0.02, 4000, 5));
  CHECK(check_trace(tr).empty());
  double lam_star = quad_analytic_solution(spec).lambda_star;
  double tail = 0.0;
  for (long t = 3001; t <= 4001; ++t) tail += tr.lambda_at_slot(t)[0];
  tail /= 1001.0;
  CHECK(tail == doctest::Approx(lam_star).epsilon(0.08));
  CHECK(std::abs(tr.final_lambda()[0] - lam_star) < 0.4);
}

TEST_CASE("zero-staleness configurations of all engines coincide bitwise") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  EngineOptions o = quad_opts(0.05, 400, 11);

  RunTrace sync = run_synchronous(prob, o);
  RunTrace fc0 = run_async_fc(prob, constant_delay(0), o);
  RunTrace sub0 = run_async_fc(prob, subset_fc_delay(3, 3, 0, 123), o);
  RunTrace ring0 =
      run_aisdd(prob, budget_incremental_schedule({3, 3}, 3, 0, 9), o);

  CHECK(sync.lambda_slot == fc0.lambda_slot);
  CHECK(sync.lambda_slot == sub0.lambda_slot);
  CHECK(sync.lambda_slot == ring0.lambda_slot);
  CHECK(sync.up_g == ring0.up_g);
}

TEST_CASE("K = 1 ring with unit budget reproduces the synchronous run") {
  QuadraticSpec spec;
  spec.K = 1;
  spec.a = {2.0};
  spec.b = 1.0;
  Problem prob = make_quadratic(spec);
  EngineOptions o = quad_opts(0.04, 600, 3);

  RunTrace sync = run_synchronous(prob, o);
  for (int tau_max : {1, 2, 5}) {
    RunTrace ring = run_aisdd(
        prob, budget_incremental_schedule({1, 1}, 1, tau_max, 77), o);
    CHECK(sync.lambda_slot == ring.lambda_slot);
    CHECK(ring.cycles_completed == 600);
  }
  // Any budget: the token can never run ahead of the wall clock.
  RunTrace ring2 =
      run_aisdd(prob, budget_incremental_schedule({2, 6}, 1, 4, 77), o);
  CHECK(sync.lambda_slot == ring2.lambda_slot);
}

TEST_CASE("ring trace: ages bounded, cycles ordered, structure clean") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  EngineOptions o = quad_opts(0.03, 500, 21);
  DelaySchedule d = budget_incremental_schedule({1, 3}, 3, 4, 5);
  RunTrace tr = run_aisdd(prob, d, o);

  auto issues = check_trace(tr);
  for (const auto& s : issues) MESSAGE(s);
  CHECK(issues.empty());

  DelayStats st = summarize_delays(tr);
  CHECK(st.max_tau <= 4);
  CHECK(st.max_pi <= 4);
  CHECK(st.max_delta == 0);  // stored gradients refresh every slot
  CHECK(st.cycles_per_slot <= 1.0);
  CHECK(st.cycles_per_slot > 0.3);

  long rows = tr.up_rows();
  for (long r = 0; r + 1 < rows; ++r) {
    CHECK(tr.up_index[std::size_t(r)] <= tr.up_index[std::size_t(r + 1)]);
    CHECK(tr.up_index[std::size_t(r)] <= tr.up_slot[std::size_t(r)]);
    if (tr.up_index[std::size_t(r)] == tr.up_index[std::size_t(r + 1)])
      CHECK(tr.up_node[std::size_t(r)] + 1 == tr.up_node[std::size_t(r + 1)]);
  }
  CHECK(tr.cycles_completed <= tr.T);
  CHECK(long(tr.lambda_cycle.size()) == (tr.cycles_completed + 1) * tr.d);
}

TEST_CASE("ring displacement per visit is bounded by eps * V") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  EngineOptions o;
  o.step = StepSchedule::PowerDecay(0.5, 0.6);
  o.T = 400;
  o.seed = 13;
  RunTrace tr =
      run_aisdd(prob, budget_incremental_schedule({2, 4}, 3, 10, 31), o);
  for (long r = 0; r < tr.up_rows(); ++r) {
    double V = quad_gradient_bound(spec, tr.up_node[std::size_t(r)]);
    CHECK(tr.up_step_norm[std::size_t(r)] <=
          tr.up_eps[std::size_t(r)] * V + 1e-12);
  }
}

TEST_CASE("ring pacing follows the budget when tau_max is loose") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  EngineOptions o = quad_opts(0.01, 3000, 2);
  // Mean budget 1 against K = 3: one cycle every three slots.
  RunTrace slow = run_aisdd(
      prob, budget_incremental_schedule({1, 1}, 3, 10, 4), o);
  CHECK(std::abs(slow.cycles_completed - 1000) <= 2);
  CHECK(check_trace(slow).empty());

  // Mean budget 3 against K = 3: keeps pace with the wall clock.
  RunTrace paced = run_aisdd(
      prob, budget_incremental_schedule({2, 4}, 3, 10, 4), o);
  CHECK(paced.cycles_completed > 2700);
  CHECK(paced.cycles_completed <= 3000);
}

TEST_CASE("ring forcing keeps ages bounded when the budget is too slow") {
  QuadraticSpec spec;
  spec.K = 5;
  spec.a = {1.0, 1.5, 2.0, 2.5, 3.0};
  spec.b = 4.0;
  Problem prob = make_quadratic(spec);
  EngineOptions o = quad_opts(0.02, 400, 6);
  // Natural pace would refresh copies every ~5 slots; tau_max = 3 forces
  // extra token steps.
  RunTrace tr =
      run_aisdd(prob, budget_incremental_schedule({1, 1}, 5, 3, 8), o);
  CHECK(check_trace(tr).empty());
  DelayStats st = summarize_delays(tr);
  CHECK(st.max_pi <= 3);
  CHECK(st.max_tau <= 3);
  CHECK(st.cycles_per_slot > 1.0 / 5.0 + 0.05);
}

TEST_CASE("fusion center with constant lag records the exact ages") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  EngineOptions o = quad_opts(0.03, 300, 17);
  RunTrace tr = run_async_fc(prob, constant_delay(5), o);
  CHECK(check_trace(tr).empty());
  for (long r = 0; r < tr.alloc_rows(); ++r) {
    long t = tr.alloc_slot[std::size_t(r)];
    CHECK(tr.alloc_pi[std::size_t(r)] == int(std::min<long>(5, t - 1)));
  }
  DelayStats st = summarize_delays(tr);
  CHECK(st.max_tau == 5);
  CHECK(st.max_delta == 0);
}

TEST_CASE("fusion center with subset exchanges bounds all ages") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  EngineOptions o = quad_opts(0.03, 800, 19);
  RunTrace tr = run_async_fc(prob, subset_fc_delay(1, 3, 6, 99), o);
  CHECK(check_trace(tr).empty());
  DelayStats st = summarize_delays(tr);
  CHECK(st.max_tau <= 6);
  CHECK(st.max_pi <= 6);
  CHECK(st.mean_tau > 0.5);  // staleness actually occurs
  CHECK(st.mean_delta == st.mean_tau);  // gradients age with their copies
}

TEST_CASE("stale runs still settle near the multiplier") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  double lam_star = quad_analytic_solution(spec).lambda_star;

  RunTrace fc = run_async_fc(prob, constant_delay(8), quad_opts(0.01, 6000, 23));
  double tail = 0.0;
  for (long t = 5001; t <= 6001; ++t) tail += fc.lambda_at_slot(t)[0];
  CHECK(tail / 1001.0 == doctest::Approx(lam_star).epsilon(0.1));

  RunTrace ring = run_aisdd(
      prob, budget_incremental_schedule({2, 4}, 3, 10, 3),
      quad_opts(0.01, 6000, 23));
  double tail2 = 0.0;
  for (long c = ring.cycles_completed - 999; c <= ring.cycles_completed + 1;
       ++c)
    tail2 += ring.lambda_at_cycle(c)[0];
  CHECK(tail2 / 1001.0 == doctest::Approx(lam_star).epsilon(0.1));
}

TEST_CASE("seed determinism and sensitivity") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  EngineOptions o = quad_opts(0.05, 200, 31);
  DelaySchedule d = budget_incremental_schedule({1, 3}, 3, 6, 41);

  RunTrace a = run_aisdd(prob, d, o);
  RunTrace b = run_aisdd(prob, d, o);
  CHECK(a.lambda_slot == b.lambda_slot);
  CHECK(a.up_g == b.up_g);
  CHECK(a.alloc_x == b.alloc_x);

  EngineOptions o2 = o;
  o2.seed = 32;
  RunTrace c = run_aisdd(prob, d, o2);
  CHECK(a.lambda_slot != c.lambda_slot);
}

TEST_CASE("general engine: geometric contraction without staleness") {
  LinearOracle lin(1, 1.0);
  EngineOptions o;
  o.step = StepSchedule::Constant(0.2);
  o.T = 50;
  o.lambda1 = {1.0};
  DelaySchedule none;
  RunTrace tr = run_aisdd_general({&lin}, identity_projection(), none, o);
  double x = 1.0;
  for (long t = 1; t <= 51; ++t) {
    CHECK(tr.lambda_at_slot(t)[0] == doctest::Approx(x).epsilon(1e-12));
    x = x - 0.2 * x;
  }
}

TEST_CASE("general engine: constant positional lag gives the two-term recursion") {
  LinearOracle lin(1, 1.0);
  EngineOptions o;
  o.step = StepSchedule::Constant(0.1);
  o.T = 40;
  o.lambda1 = {1.0};
  RunTrace tr =
      run_aisdd_general({&lin}, identity_projection(), constant_delay(1), o);
  // lam_{t+1} = lam_t - eps * lam_{max(1, t-1)}
  std::vector<double> ref = {1.0};
  for (long t = 1; t <= 40; ++t) {
    double stale = ref[std::size_t(std::max<long>(1, t - 1) - 1)];
    ref.push_back(ref.back() - 0.1 * stale);
  }
  for (long t = 1; t <= 41; ++t)
    CHECK(tr.lambda_at_slot(t)[0] ==
          doctest::Approx(ref[std::size_t(t - 1)]).epsilon(1e-12));
}

TEST_CASE("general engine: box projection keeps iterates feasible") {
  LinearOracle lin(2, -1.0);  // gradient -lam pushes the iterate upward
  ProjectionSpec box;
  box.is_nonneg = false;
  box.apply = [](Vec& v) {
    for (double& x : v) x = clamp(x, 0.0, 1.0);
  };
  EngineOptions o;
  o.step = StepSchedule::Constant(0.5);
  o.T = 60;
  o.lambda1 = {0.9, 0.2};
  DelaySchedule d = budget_incremental_schedule({1, 2}, 1, 3, 2);
  RunTrace tr = run_aisdd_general({&lin}, box, d, o);
  for (long t = 1; t <= 61; ++t) {
    Vec v = tr.lambda_at_slot(t);
    CHECK(v[0] <= 1.0 + 1e-15);
    CHECK(v[1] <= 1.0 + 1e-15);
    CHECK(v[0] >= 0.0);
    CHECK(v[1] >= 0.0);
  }
  CHECK(tr.lambda_at_slot(61)[0] == doctest::Approx(1.0));
}

TEST_CASE("general engine: bogus projections are rejected") {
  LinearOracle lin(1, 1.0);
  ProjectionSpec bad;
  bad.is_nonneg = false;
  bad.apply = [](Vec& v) {
    for (double& x : v) x *= 2.0;
  };
  EngineOptions o;
  o.step = StepSchedule::Constant(0.1);
  o.T = 5;
  DelaySchedule none;
  CHECK_THROWS_AS(run_aisdd_general({&lin}, bad, none, o),
                  std::invalid_argument);
}

TEST_CASE("engines validate schedule kinds and initial iterates") {
  QuadraticSpec spec;
  Problem prob = make_quadratic(spec);
  EngineOptions o = quad_opts(0.05, 10, 1);
  CHECK_THROWS_AS(
      run_async_fc(prob, budget_incremental_schedule({1, 1}, 3, 4, 1), o),
      std::invalid_argument);
  CHECK_THROWS_AS(run_aisdd(prob, constant_delay(2), o),
                  std::invalid_argument);

  EngineOptions neg = o;
  neg.lambda1 = {-1.0};
  CHECK_THROWS_AS(run_synchronous(prob, neg), std::invalid_argument);
  EngineOptions wrong = o;
  wrong.lambda1 = {1.0, 2.0};
  CHECK_THROWS_AS(run_synchronous(prob, wrong), DimensionError);

  // Schedule built for a different node count.
  CHECK_THROWS_AS(
      run_aisdd(prob, budget_incremental_schedule({1, 1}, 4, 4, 1), o),
      std::invalid_argument);
}
