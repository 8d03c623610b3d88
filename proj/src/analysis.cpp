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

#include "dualsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "dualsim/engine.hpp"
#include "dualsim/rng.hpp"

namespace dualsim {

ConstantsC theory_constants_c(int K, double V, int tau) {
  if (K < 1 || V <= 0.0 || tau < 0)
    throw std::invalid_argument("theory_constants_c: need K >= 1, V > 0, tau >= 0");
  ConstantsC c;
  double v2 = V * V;
  c.C1 = K * v2;
  c.C2 = K * v2 * (K - 1);
  c.C2prime = 4.0 * K * K * v2;
  c.C_of_tau = c.C1 + c.C2 + tau * c.C2prime;
  return c;
}

DualRateBound theorem1_bound(double eps, double eta,
                             const TheoryConstants& tc) {
  if (eps <= 0.0 || eta <= 0.0)
    throw std::invalid_argument("theorem1_bound: eps and eta must be > 0");
  ConstantsC c = theory_constants_c(tc.K, tc.V, tc.tau);
  DualRateBound b;
  b.gap_bound = (eps * c.C_of_tau + eta) / 2.0;
  b.T_bound = tc.B0 * tc.B0 / (eps * eta);
  return b;
}

double theorem2_bound(double eps, int tau, int K, double V, double B,
                      double L) {
  if (eps < 0.0 || tau < 0 || K < 1 || V < 0.0 || B < 0.0 || L < 0.0)
    throw std::invalid_argument("theorem2_bound: inputs must be nonnegative");
  double C3 = V * V * K * K / 2.0;
  double C4 = double(K) * K * B * L * V + 2.0 * double(K) * K * V * V;
  return eps * (C3 + tau * C4);
}

Estimate estimate_dual(const Problem& problem, const Vec& lam, long n_samples,
                       std::uint64_t seed) {
  if (n_samples < 1)
    throw std::invalid_argument("estimate_dual: n_samples must be >= 1");
  if (int(lam.size()) != problem.dual_dim)
    throw DimensionError("estimate_dual: lam has wrong dimension");
  std::vector<double> totals(std::size_t(n_samples), 0.0);
  double sum = 0.0;
  for (long s = 1; s <= n_samples; ++s) {
    double total = 0.0;
    for (int i = 0; i < problem.num_nodes(); ++i) {
      const NodeOracle& node = problem.node(i);
      StateSample h = node.sample_state(s, seed);
      Allocation a = node.best_response(lam, h);
      total += a.flagged ? node.objective(a.x)
                         : lagrangian_term(node, lam, a, h);
    }
    totals[std::size_t(s - 1)] = total;
    sum += total;
  }
  Estimate e;
  e.n = n_samples;
  e.mean = sum / double(n_samples);
  if (n_samples > 1) {
    double ss = 0.0;  // two-pass: exact zero for constant samples
    for (double t : totals) {
      double d = t - e.mean;
      ss += d * d;
    }
    e.se = std::sqrt(ss / double(n_samples - 1) / double(n_samples));
  }
  return e;
}

PrimalAverage running_primal_average(const RunTrace& trace,
                                     const Problem& problem, long T) {
  if (T < 1 || T > trace.T)
    throw std::invalid_argument("running_primal_average: T out of range");
  int K = trace.K;
  if (K != problem.num_nodes())
    throw DimensionError("running_primal_average: trace/problem node counts differ");
  PrimalAverage out;
  out.slots_used = T;
  out.x_bar.assign(std::size_t(K), Vec(std::size_t(trace.x_dim), 0.0));
  std::vector<long> counts(std::size_t(K), 0);
  for (long r = 0; r < trace.alloc_rows(); ++r) {
    if (trace.alloc_slot[std::size_t(r)] > T) continue;
    if (trace.alloc_flagged[std::size_t(r)]) continue;
    int i = trace.alloc_node[std::size_t(r)];
    for (int j = 0; j < trace.x_dim; ++j)
      out.x_bar[std::size_t(i)][std::size_t(j)] +=
          trace.alloc_x[std::size_t(r) * trace.x_dim + j];
    ++counts[std::size_t(i)];
  }
  out.node_objective.assign(std::size_t(K), 0.0);
  for (int i = 0; i < K; ++i) {
    if (counts[std::size_t(i)] > 0)
      for (double& v : out.x_bar[std::size_t(i)])
        v /= double(counts[std::size_t(i)]);
    out.node_objective[std::size_t(i)] =
        problem.node(i).objective(out.x_bar[std::size_t(i)]);
    out.objective += out.node_objective[std::size_t(i)];
  }
  return out;
}

namespace {

// Walk the update rows group by group (all rows of one up_index are
// contiguous) and hand complete groups (one row per node) to `fn`.
template <typename F>
void for_each_complete_group(const RunTrace& trace, long max_index, F fn) {
  long rows = trace.up_rows();
  int d = trace.d;
  Vec group_sum(std::size_t(d), 0.0);
  long current = -1;
  int count = 0;
  auto flush = [&]() {
    if (current >= 1 && current <= max_index && count == trace.K)
      fn(group_sum);
    std::fill(group_sum.begin(), group_sum.end(), 0.0);
    count = 0;
  };
  for (long r = 0; r < rows; ++r) {
    long idx = trace.up_index[std::size_t(r)];
    if (idx != current) {
      flush();
      current = idx;
    }
    for (int j = 0; j < d; ++j)
      group_sum[std::size_t(j)] += trace.up_g[std::size_t(r) * d + j];
    ++count;
  }
  flush();
}

}  // namespace

Vec feasibility_gap(const RunTrace& trace, long T) {
  Vec acc(std::size_t(trace.d), 0.0);
  long groups = 0;
  for_each_complete_group(trace, T, [&](const Vec& g) {
    add_into(acc, g);
    ++groups;
  });
  if (groups > 0)
    for (double& v : acc) v /= double(groups);
  return acc;
}

std::vector<Vec> feasibility_gap_series(const RunTrace& trace) {
  std::vector<Vec> series;
  Vec acc(std::size_t(trace.d), 0.0);
  long groups = 0;
  for_each_complete_group(trace, trace.T, [&](const Vec& g) {
    add_into(acc, g);
    ++groups;
    Vec mean = acc;
    for (double& v : mean) v /= double(groups);
    series.push_back(std::move(mean));
  });
  return series;
}

namespace {

Vec mc_dual_gradient(const Problem& problem, const Vec& lam, long n,
                     std::uint64_t seed) {
  Vec g(std::size_t(problem.dual_dim), 0.0);
  for (long s = 1; s <= n; ++s) {
    for (int i = 0; i < problem.num_nodes(); ++i) {
      const NodeOracle& node = problem.node(i);
      StateSample h = node.sample_state(s, seed);
      Allocation a = node.best_response(lam, h);
      if (!a.flagged) add_into(g, node.gradient(a, h));
    }
  }
  for (double& v : g) v /= double(n);
  return g;
}

}  // namespace

VBL estimate_V_B_L(const Problem& problem, long n_samples,
                   std::uint64_t seed) {
  if (n_samples < 2)
    throw std::invalid_argument("estimate_V_B_L: n_samples must be >= 2");
  VBL out;

  // Gradient norm envelope over the allocation boxes (or best responses to
  // random multipliers when a node has no box).
  std::uint64_t state_seed = splitmix64(seed ^ 0x5642736565640001ULL);
  double vmax = 0.0;
  for (int i = 0; i < problem.num_nodes(); ++i) {
    const NodeOracle& node = problem.node(i);
    auto xb = node.x_bounds();
    auto pb = node.p_bounds();
    Rng r(seed, 0x56626f78ULL + std::uint64_t(i), 0);
    for (long s = 1; s <= n_samples; ++s) {
      StateSample h = node.sample_state(s, state_seed);
      Vec g;
      if (xb) {
        Allocation a;
        a.node = i;
        a.slot = s;
        a.x.resize(xb->first.size());
        for (std::size_t j = 0; j < a.x.size(); ++j)
          a.x[j] = r.uniform(xb->first[j], xb->second[j]);
        if (pb) {
          a.p.resize(pb->first.size());
          for (std::size_t j = 0; j < a.p.size(); ++j)
            a.p[j] = r.uniform(pb->first[j], pb->second[j]);
        }
        g = node.gradient(a, h);
      } else {
        Vec lam(std::size_t(problem.dual_dim));
        for (double& v : lam) v = r.uniform(0.0, 8.0);
        Allocation a = node.best_response(lam, h);
        if (a.flagged) continue;
        g = node.gradient(a, h);
      }
      vmax = std::max(vmax, norm2(g));
    }
  }
  out.V = 1.05 * vmax;

  // Iterate-norm bound along a synchronous pilot run.
  EngineOptions pilot;
  pilot.step = StepSchedule::Constant(0.05);
  pilot.T = 2000;
  pilot.seed = splitmix64(seed ^ 0x4268617470696c6fULL);
  RunTrace tr = run_synchronous(problem, pilot);
  for (long t = 1; t <= tr.T + 1; ++t)
    out.B_hat = std::max(out.B_hat, norm2(tr.lambda_at_slot(t)));

  // Dual-gradient Lipschitz surrogate from finite differences of MC means
  // with common random numbers.
  double hi = std::max(1.0, 1.2 * out.B_hat);
  long m = std::min<long>(n_samples, 2000);
  Rng pr(seed, 0x4c706169u, 0);
  std::uint64_t grad_seed = splitmix64(seed ^ 0x4c6772616400beefULL);
  for (int k = 0; k < 16; ++k) {
    Vec u(std::size_t(problem.dual_dim), 0.0),
        v(std::size_t(problem.dual_dim), 0.0);
    for (int j = 0; j < problem.dual_dim; ++j) {
      u[std::size_t(j)] = pr.uniform(0.0, hi);
      v[std::size_t(j)] = pr.uniform(0.0, hi);
    }
    double dist = 0.0;
    for (int j = 0; j < problem.dual_dim; ++j) {
      double dj = u[std::size_t(j)] - v[std::size_t(j)];
      dist += dj * dj;
    }
    dist = std::sqrt(dist);
    if (dist < 1e-6) continue;
    Vec gu = mc_dual_gradient(problem, u, m, grad_seed);
    Vec gv = mc_dual_gradient(problem, v, m, grad_seed);
    double diff = 0.0;
    for (int j = 0; j < problem.dual_dim; ++j) {
      double dj = gu[std::size_t(j)] - gv[std::size_t(j)];
      diff += dj * dj;
    }
    out.L_hat = std::max(out.L_hat, std::sqrt(diff) / dist);
  }
  return out;
}

LinFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_linear: need two same-length series");
  double n = double(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  double denom = n * sxx - sx * sx;
  LinFit f;
  if (std::abs(denom) < 1e-30) return f;  // vertical data: no slope
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0.0, ss_tot = 0.0, ybar = sy / n;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double e = y[k] - (f.slope * x[k] + f.intercept);
    ss_res += e * e;
    double d = y[k] - ybar;
    ss_tot += d * d;
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return f;
}

namespace {

double quad_inner_max(const QuadraticSpec& spec, int i, double lam,
                      int x_grid) {
  double best = -1e300;
  double share = spec.b / spec.K;
  for (int k = 0; k < x_grid; ++k) {
    double x = spec.x_max * double(k) / double(x_grid - 1);
    double v = -(x - spec.a[std::size_t(i)]) * (x - spec.a[std::size_t(i)]) +
               lam * (share - x);
    best = std::max(best, v);
  }
  return best;
}

}  // namespace

BruteForceResult brute_force_quadratic(const QuadraticSpec& spec,
                                       const BruteForceOptions& opts) {
  spec.validate();
  if (spec.K > 3)
    throw std::invalid_argument("brute_force_quadratic: K must be <= 3");
  BruteForceResult res;

  // Primal grid: maximize sum -(x-a)^2 subject to sum x <= b (the zero-mean
  // noise drops from the expected constraint).
  int n = opts.x_grid;
  std::vector<int> idx(std::size_t(spec.K), 0);
  double best = -1e300;
  Vec bestx(std::size_t(spec.K), 0.0);
  bool any = false;
  while (true) {
    double sumx = 0.0, val = 0.0;
    for (int i = 0; i < spec.K; ++i) {
      double x = spec.x_max * double(idx[std::size_t(i)]) / double(n - 1);
      sumx += x;
      val -= (x - spec.a[std::size_t(i)]) * (x - spec.a[std::size_t(i)]);
    }
    if (sumx <= spec.b && val > best) {
      best = val;
      any = true;
      for (int i = 0; i < spec.K; ++i)
        bestx[std::size_t(i)] =
            spec.x_max * double(idx[std::size_t(i)]) / double(n - 1);
    }
    int c = 0;
    while (c < spec.K && ++idx[std::size_t(c)] == n) {
      idx[std::size_t(c)] = 0;
      ++c;
    }
    if (c == spec.K) break;
  }
  res.feasible = any;
  if (!any) {
    res.diagnostic = "no feasible grid point";
    return res;
  }
  res.primal_value = best;
  res.x_star.clear();
  for (int i = 0; i < spec.K; ++i) res.x_star.push_back({bestx[std::size_t(i)]});

  // Dual grid with one refinement stage.
  auto dual_at = [&](double lam) {
    double v = 0.0;
    for (int i = 0; i < spec.K; ++i) v += quad_inner_max(spec, i, lam, n);
    return v;
  };
  double lo = 0.0, hi = opts.lam_hi, bestlam = 0.0, bestd = 1e300;
  for (int stage = 0; stage < 2; ++stage) {
    int m = opts.lam_grid;
    for (int k = 0; k < m; ++k) {
      double lam = lo + (hi - lo) * double(k) / double(m - 1);
      double v = dual_at(lam);
      if (v < bestd) {
        bestd = v;
        bestlam = lam;
      }
    }
    double cell = (hi - lo) / double(m - 1);
    lo = std::max(0.0, bestlam - cell);
    hi = bestlam + cell;
  }
  res.dual_value = bestd;
  res.lambda_star = {bestlam};
  res.gap = res.dual_value - res.primal_value;
  double scale = std::max(1.0, std::abs(res.primal_value));
  if (res.gap > opts.tol * scale || res.gap < -1e-9)
    res.diagnostic = "duality gap " + std::to_string(res.gap) +
                     " exceeds tolerance; grids may be too coarse";
  return res;
}

namespace {

// Greedy marginal power allocation over a common sample set: rates achieved
// per mean-power budget, recorded on a uniform budget grid. Exact for the
// concave per-sample rates up to the power quantum.
struct RateFrontier {
  double budget_hi = 0.0;
  std::vector<double> rate;  // rate[k] = best mean rate with budget k*dp

  double at(double budget) const {
    if (rate.empty()) return 0.0;
    double pos = budget / budget_hi * double(rate.size() - 1);
    long k = std::lround(std::floor(pos));
    if (k >= long(rate.size()) - 1) return rate.back();
    double f = pos - double(k);
    return rate[std::size_t(k)] * (1.0 - f) + rate[std::size_t(k) + 1] * f;
  }
};

RateFrontier build_frontier(const std::vector<double>& h, double p_max,
                            double budget_hi, int budget_grid, int quanta) {
  RateFrontier fr;
  fr.budget_hi = budget_hi;
  fr.rate.assign(std::size_t(budget_grid), 0.0);
  std::size_t n = h.size();
  double dp = p_max / double(quanta);
  std::vector<double> p(n, 0.0);
  double mean_rate = 0.0, mean_power = 0.0;
  auto gain = [&](std::size_t s) {
    if (p[s] + dp > p_max + 1e-12) return -1.0;
    return 0.5 * (std::log1p(h[s] * (p[s] + dp)) - std::log1p(h[s] * p[s]));
  };
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> heap;
  for (std::size_t s = 0; s < n; ++s) heap.push({gain(s), s});
  int next_level = 0;
  auto record_up_to = [&](double power) {
    while (next_level < budget_grid &&
           budget_hi * double(next_level) / double(budget_grid - 1) <=
               power + 1e-12) {
      fr.rate[std::size_t(next_level)] = mean_rate;
      ++next_level;
    }
  };
  record_up_to(0.0);
  while (!heap.empty() && next_level < budget_grid) {
    auto [g, s] = heap.top();
    heap.pop();
    if (g <= 0.0) break;
    double fresh = gain(s);
    if (fresh < g - 1e-15) {  // stale entry: reinsert with current gain
      if (fresh > 0.0) heap.push({fresh, s});
      continue;
    }
    p[s] += dp;
    mean_rate += g / double(n);
    mean_power += dp / double(n);
    record_up_to(mean_power);
    double ng = gain(s);
    if (ng > 0.0) heap.push({ng, s});
  }
  for (int k = next_level; k < budget_grid; ++k)
    fr.rate[std::size_t(k)] = mean_rate;
  return fr;
}

}  // namespace

BruteForceResult brute_force_tiny_num(const NumSpec& spec,
                                      const BruteForceOptions& opts) {
  spec.validate();
  if (spec.K > 3)
    throw std::invalid_argument("brute_force_tiny_num: K must be <= 3");
  BruteForceResult res;

  // Common channel samples per node: the empirical program is the ground
  // truth for both sides, so zero duality gap is testable.
  std::vector<std::vector<double>> h(std::size_t(spec.K));
  for (int i = 0; i < spec.K; ++i) {
    h[std::size_t(i)].resize(std::size_t(opts.n_states));
    Rng r(opts.seed, 0xb0000000ULL + std::uint64_t(i), 1);
    for (long s = 0; s < opts.n_states; ++s)
      h[std::size_t(i)][std::size_t(s)] =
          std::min(r.exponential(1.0), spec.h_max);
  }

  // Primal side: per-node rate/power frontiers, then a grid over the power
  // split and the rate split.
  double budget_hi = std::min(spec.p_max, spec.P_max);
  int bgrid = 81, quanta = 400;
  std::vector<RateFrontier> fr;
  for (int i = 0; i < spec.K; ++i)
    fr.push_back(build_frontier(h[std::size_t(i)], spec.p_max, budget_hi,
                                bgrid, quanta));

  int splits = 61, rgrid = spec.K == 3 ? 61 : 161;
  double best = -1e300;
  bool any = false;
  std::vector<Vec> bestx;
  auto rate_value = [&](double r_total, std::vector<double>& r_out) {
    // Maximize sum w_i log r_i over the box subject to sum r_i <= r_total.
    double bv = -1e300;
    if (spec.K == 1) {
      double r1 = clamp(r_total, spec.r_min, spec.r_max);
      if (r_total >= spec.r_min) {
        bv = spec.weight(0) * std::log(r1);
        r_out = {r1};
      }
      return bv;
    }
    for (int k1 = 0; k1 < rgrid; ++k1) {
      double r1 = spec.r_min +
                  (spec.r_max - spec.r_min) * double(k1) / double(rgrid - 1);
      if (spec.K == 2) {
        double r2 = std::min(spec.r_max, r_total - r1);
        if (r2 < spec.r_min) continue;
        double v = spec.weight(0) * std::log(r1) + spec.weight(1) * std::log(r2);
        if (v > bv) {
          bv = v;
          r_out = {r1, r2};
        }
      } else {
        for (int k2 = 0; k2 < rgrid; ++k2) {
          double r2 = spec.r_min + (spec.r_max - spec.r_min) * double(k2) /
                                       double(rgrid - 1);
          double r3 = std::min(spec.r_max, r_total - r1 - r2);
          if (r3 < spec.r_min) continue;
          double v = spec.weight(0) * std::log(r1) +
                     spec.weight(1) * std::log(r2) +
                     spec.weight(2) * std::log(r3);
          if (v > bv) {
            bv = v;
            r_out = {r1, r2, r3};
          }
        }
      }
    }
    return bv;
  };

  auto try_split = [&](const std::vector<double>& budgets) {
    double r_total = 0.0;
    for (int i = 0; i < spec.K; ++i)
      r_total += fr[std::size_t(i)].at(budgets[std::size_t(i)]);
    std::vector<double> r_out;
    double v = rate_value(r_total, r_out);
    if (v > best && !r_out.empty()) {
      best = v;
      any = true;
      bestx.clear();
      for (double rv : r_out) bestx.push_back({rv});
    }
  };

  if (spec.K == 1) {
    try_split({std::min(budget_hi, spec.P_max)});
  } else if (spec.K == 2) {
    for (int k = 0; k < splits; ++k) {
      double p1 = std::min(budget_hi, spec.P_max * double(k) / double(splits - 1));
      double p2 = std::min(budget_hi, spec.P_max - p1);
      try_split({p1, p2});
    }
  } else {
    for (int k1 = 0; k1 < splits; ++k1) {
      for (int k2 = 0; k2 < splits - k1; ++k2) {
        double p1 = std::min(budget_hi, spec.P_max * double(k1) / double(splits - 1));
        double p2 = std::min(budget_hi, spec.P_max * double(k2) / double(splits - 1));
        double p3 = std::min(budget_hi, std::max(0.0, spec.P_max - p1 - p2));
        try_split({p1, p2, p3});
      }
    }
  }
  res.feasible = any;
  if (!any) {
    res.diagnostic =
        "no feasible rate assignment: the rate floor K*r_min exceeds the "
        "achievable mean rate under the power budget";
    return res;
  }
  res.primal_value = best;
  res.x_star = bestx;

  // Dual side: two-stage grid over [0, lam_hi]^2 with grid inner maxima on
  // the same empirical program.
  int rg = 201, pg = opts.p_grid, lg = 41;
  auto dual_at = [&](double l1, double l2) {
    double total = 0.0;
    for (int i = 0; i < spec.K; ++i) {
      double bestr = -1e300;
      for (int k = 0; k < rg; ++k) {
        double r = spec.r_min +
                   (spec.r_max - spec.r_min) * double(k) / double(rg - 1);
        bestr = std::max(bestr, spec.weight(i) * std::log(r) - l1 * r);
      }
      double mean_p = 0.0;
      for (double hv : h[std::size_t(i)]) {
        double bp = 0.0;  // p = 0 attains 0
        for (int k = 1; k < pg; ++k) {
          double p = spec.p_max * double(k) / double(pg - 1);
          bp = std::max(bp, l1 * 0.5 * std::log1p(hv * p) - l2 * p);
        }
        mean_p += bp;
      }
      mean_p /= double(h[std::size_t(i)].size());
      total += bestr + mean_p + l2 * spec.P_max / spec.K;
    }
    return total;
  };
  double lo1 = 0.0, hi1 = opts.lam_hi, lo2 = 0.0, hi2 = opts.lam_hi;
  double b1 = 0.0, b2 = 0.0, bestd = 1e300;
  for (int stage = 0; stage < 2; ++stage) {
    for (int k1 = 0; k1 < lg; ++k1) {
      double l1 = lo1 + (hi1 - lo1) * double(k1) / double(lg - 1);
      for (int k2 = 0; k2 < lg; ++k2) {
        double l2 = lo2 + (hi2 - lo2) * double(k2) / double(lg - 1);
        double v = dual_at(l1, l2);
        if (v < bestd) {
          bestd = v;
          b1 = l1;
          b2 = l2;
        }
      }
    }
    double c1 = (hi1 - lo1) / double(lg - 1), c2 = (hi2 - lo2) / double(lg - 1);
    lo1 = std::max(0.0, b1 - c1);
    hi1 = b1 + c1;
    lo2 = std::max(0.0, b2 - c2);
    hi2 = b2 + c2;
  }
  res.dual_value = bestd;
  res.lambda_star = {b1, b2};
  res.gap = res.dual_value - res.primal_value;
  double scale = std::max(1.0, std::abs(res.primal_value));
  if (res.gap > opts.tol * scale || res.gap < -1e-9)
    res.diagnostic = "duality gap " + std::to_string(res.gap) +
                     " exceeds tolerance; grids may be too coarse";
  return res;
}

}  // namespace dualsim
