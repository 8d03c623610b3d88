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

#include "dualsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace dualsim {
namespace {

Vec initial_lambda(const EngineOptions& opts, int d, bool require_nonneg) {
  if (opts.lambda1.empty()) return Vec(std::size_t(d), 0.0);
  if (int(opts.lambda1.size()) != d)
    throw DimensionError("initial iterate has dimension " +
                         std::to_string(opts.lambda1.size()) + ", expected " +
                         std::to_string(d));
  if (require_nonneg)
    for (double v : opts.lambda1)
      if (v < 0.0)
        throw std::invalid_argument(
            "initial iterate must be componentwise nonnegative");
  return opts.lambda1;
}

void validate_options(const EngineOptions& opts) {
  opts.step.validate();
  if (opts.T < 1) throw std::invalid_argument("T must be >= 1");
}

// Event recorder with lazily fixed allocation dimensions (taken from the
// first evaluation; all nodes must agree so columns stay rectangular).
class TraceBuilder {
 public:
  explicit TraceBuilder(RunTrace& t) : t_(t) {}

  void alloc(long slot, int node, long dual_index, long recv_slot, int pi,
             const GradientOracle::Eval& e) {
    fix_dims(e);
    t_.alloc_slot.push_back(slot);
    t_.alloc_node.push_back(node);
    t_.alloc_dual_index.push_back(dual_index);
    t_.alloc_dual_recv_slot.push_back(recv_slot);
    t_.alloc_pi.push_back(pi);
    t_.alloc_flagged.push_back(e.flagged ? 1 : 0);
    t_.alloc_x.insert(t_.alloc_x.end(), e.x.begin(), e.x.end());
    t_.alloc_p.insert(t_.alloc_p.end(), e.p.begin(), e.p.end());
    t_.alloc_g.insert(t_.alloc_g.end(), e.g.begin(), e.g.end());
  }

  void update(long slot, long index, int node, int tau, int delta,
              long state_slot, long dual_index, double eps, const Vec& g,
              double step_norm) {
    t_.up_slot.push_back(slot);
    t_.up_index.push_back(index);
    t_.up_node.push_back(node);
    t_.up_tau.push_back(tau);
    t_.up_delta.push_back(delta);
    t_.up_state_slot.push_back(state_slot);
    t_.up_dual_index.push_back(dual_index);
    t_.up_eps.push_back(eps);
    t_.up_g.insert(t_.up_g.end(), g.begin(), g.end());
    t_.up_step_norm.push_back(step_norm);
  }

  void push_slot_lambda(const Vec& lam) {
    t_.lambda_slot.insert(t_.lambda_slot.end(), lam.begin(), lam.end());
  }
  void push_cycle_lambda(const Vec& lam) {
    t_.lambda_cycle.insert(t_.lambda_cycle.end(), lam.begin(), lam.end());
  }

 private:
  void fix_dims(const GradientOracle::Eval& e) {
    if (!dims_set_) {
      t_.x_dim = int(e.x.size());
      t_.p_dim = int(e.p.size());
      dims_set_ = true;
      return;
    }
    if (int(e.x.size()) != t_.x_dim || int(e.p.size()) != t_.p_dim)
      throw DimensionError(
          "allocation dimensions differ across nodes; traces require "
          "uniform x/p dimensions");
  }

  RunTrace& t_;
  bool dims_set_ = false;
};

double apply_step(Vec& lam, const Vec& g, double eps,
                  const ProjectionSpec& proj, Vec& prev) {
  prev = lam;
  if (proj.is_nonneg) {
    projected_step_nonneg(lam, g, eps);
  } else {
    for (std::size_t j = 0; j < lam.size(); ++j) lam[j] -= eps * g[j];
    proj.apply(lam);
  }
  double s = 0.0;
  for (std::size_t j = 0; j < lam.size(); ++j) {
    double dj = lam[j] - prev[j];
    s += dj * dj;
  }
  return std::sqrt(s);
}

void check_projection(const ProjectionSpec& proj, int d) {
  if (proj.is_nonneg) return;
  if (!proj.apply)
    throw std::invalid_argument(
        "custom feasible set requires a projection callable");
  // Spot check: projections onto closed convex sets are non-expansive and
  // idempotent. A handful of random pairs catches most wiring mistakes.
  Rng r(0x70726f6aULL, 0, 0);
  Vec u(static_cast<std::size_t>(d), 0.0), v(static_cast<std::size_t>(d), 0.0);
  for (int k = 0; k < 64; ++k) {
    for (int j = 0; j < d; ++j) {
      u[std::size_t(j)] = r.uniform(-3.0, 7.0);
      v[std::size_t(j)] = r.uniform(-3.0, 7.0);
    }
    Vec pu = u, pv = v;
    proj.apply(pu);
    proj.apply(pv);
    Vec ppu = pu;
    proj.apply(ppu);
    double du = 0.0, dp = 0.0, idem = 0.0;
    for (int j = 0; j < d; ++j) {
      double a = u[std::size_t(j)] - v[std::size_t(j)];
      double b = pu[std::size_t(j)] - pv[std::size_t(j)];
      double c = ppu[std::size_t(j)] - pu[std::size_t(j)];
      du += a * a;
      dp += b * b;
      idem += c * c;
    }
    if (dp > du * (1.0 + 1e-9) + 1e-12)
      throw std::invalid_argument(
          "projection failed a non-expansiveness spot check; it does not "
          "look like a projection onto a closed convex set");
    if (idem > 1e-18)
      throw std::invalid_argument(
          "projection failed an idempotence spot check");
  }
}

int checked_dual_dim(const std::vector<const GradientOracle*>& oracles) {
  if (oracles.empty())
    throw std::invalid_argument("need at least one gradient oracle");
  int d = oracles.front()->dual_dim();
  if (d < 1) throw DimensionError("dual dimension must be >= 1");
  for (const auto* o : oracles)
    if (o->dual_dim() != d)
      throw DimensionError("gradient oracles disagree on dual dimension");
  return d;
}

// One batch projected step per slot with every summand evaluated at the
// current iterate. This is the shared zero-staleness path: the synchronous
// engine, the fusion-center engine with delay 0, and the incremental engine
// with a full-cycle budget and tau_max = 0 all reduce to it, so their
// trajectories coincide bitwise.
RunTrace run_batch_core(const std::vector<const GradientOracle*>& oracles,
                        const ProjectionSpec& proj, const EngineOptions& opts,
                        const char* engine_name, int tau_max_meta) {
  validate_options(opts);
  int d = checked_dual_dim(oracles);
  int K = int(oracles.size());
  check_projection(proj, d);

  RunTrace tr;
  tr.engine = engine_name;
  tr.K = K;
  tr.d = d;
  tr.T = opts.T;
  tr.seed = opts.seed;
  tr.tau_max = tau_max_meta;
  TraceBuilder out(tr);

  Vec lam = initial_lambda(opts, d, proj.is_nonneg);
  if (!proj.is_nonneg) proj.apply(lam);
  Vec sum(static_cast<std::size_t>(d), 0.0), prev;
  out.push_slot_lambda(lam);
  out.push_cycle_lambda(lam);

  for (long t = 1; t <= opts.T; ++t) {
    double eps = opts.step.at(t);
    std::fill(sum.begin(), sum.end(), 0.0);
    for (int i = 0; i < K; ++i) {
      GradientOracle::Eval e =
          oracles[std::size_t(i)]->evaluate(lam, t, opts.seed);
      out.alloc(t, i, t, t, 0, e);
      out.update(t, t, i, 0, 0, t, t, eps, e.g, 0.0);
      add_into(sum, e.g);
    }
    double moved = apply_step(lam, sum, eps, proj, prev);
    tr.slot_step_norm.push_back(moved);
    out.push_slot_lambda(lam);
    out.push_cycle_lambda(lam);
  }
  tr.cycles_completed = opts.T;
  return tr;
}

// Fusion-center iteration with a constant broadcast/delivery lag c >= 1:
// every node allocates at slot t with the iterate from slot max(1, t - c)
// and its gradient reaches the center within the slot.
RunTrace run_fc_constant(const std::vector<const GradientOracle*>& oracles,
                         int c, const EngineOptions& opts) {
  validate_options(opts);
  int d = checked_dual_dim(oracles);
  int K = int(oracles.size());

  RunTrace tr;
  tr.engine = "async_fc";
  tr.K = K;
  tr.d = d;
  tr.T = opts.T;
  tr.seed = opts.seed;
  tr.tau_max = c;
  TraceBuilder out(tr);

  ProjectionSpec nonneg;
  Vec lam = initial_lambda(opts, d, true);
  Vec sum(static_cast<std::size_t>(d), 0.0), prev;
  out.push_slot_lambda(lam);
  out.push_cycle_lambda(lam);

  for (long t = 1; t <= opts.T; ++t) {
    double eps = opts.step.at(t);
    long u = std::max<long>(1, t - c);
    Vec lam_used = tr.lambda_at_slot(u);
    int age = int(t - u);
    std::fill(sum.begin(), sum.end(), 0.0);
    for (int i = 0; i < K; ++i) {
      GradientOracle::Eval e =
          oracles[std::size_t(i)]->evaluate(lam_used, t, opts.seed);
      out.alloc(t, i, u, u, age, e);
      out.update(t, t, i, age, 0, t, u, eps, e.g, 0.0);
      add_into(sum, e.g);
    }
    double moved = apply_step(lam, sum, eps, nonneg, prev);
    tr.slot_step_norm.push_back(moved);
    out.push_slot_lambda(lam);
    out.push_cycle_lambda(lam);
  }
  tr.cycles_completed = opts.T;
  return tr;
}

// Fusion-center iteration with random m-subset exchanges. Nodes in the slot-t
// exchange set receive lambda_t before allocating and deliver the gradient
// they compute with it; everyone else allocates with its last received copy
// and the center keeps using its last delivered gradient.
RunTrace run_fc_subset(const std::vector<const GradientOracle*>& oracles,
                       const DelaySchedule& delay, const EngineOptions& opts) {
  validate_options(opts);
  int d = checked_dual_dim(oracles);
  int K = int(oracles.size());
  if (delay.K != K)
    throw std::invalid_argument("delay schedule was built for K = " +
                                std::to_string(delay.K) + " nodes, run has " +
                                std::to_string(K));

  RunTrace tr;
  tr.engine = "async_fc";
  tr.K = K;
  tr.d = d;
  tr.T = opts.T;
  tr.seed = opts.seed;
  tr.tau_max = delay.tau_max;
  TraceBuilder out(tr);

  ProjectionSpec nonneg;
  Vec lam = initial_lambda(opts, d, true);
  Vec sum(static_cast<std::size_t>(d), 0.0), prev;
  out.push_slot_lambda(lam);
  out.push_cycle_lambda(lam);

  struct Copy {
    Vec value;
    long recv = 0;
  };
  struct Stored {
    Vec g;
    long state_slot = 0;
    long recv = 0;  // exchange slot of the dual copy the gradient used
  };
  std::vector<Copy> copies(static_cast<std::size_t>(K));
  std::vector<Stored> stored(static_cast<std::size_t>(K));
  SubsetSequence seq(delay);

  for (long t = 1; t <= opts.T; ++t) {
    double eps = opts.step.at(t);
    const std::vector<int>& ex = seq.exchange_set(t);
    for (int i : ex) {
      copies[std::size_t(i)].value = lam;
      copies[std::size_t(i)].recv = t;
    }
    std::vector<std::uint8_t> in_ex(std::size_t(K), 0);
    for (int i : ex) in_ex[std::size_t(i)] = 1;

    for (int i = 0; i < K; ++i) {
      const Copy& cp = copies[std::size_t(i)];
      GradientOracle::Eval e =
          oracles[std::size_t(i)]->evaluate(cp.value, t, opts.seed);
      out.alloc(t, i, cp.recv, cp.recv, int(t - cp.recv), e);
      if (in_ex[std::size_t(i)]) {
        stored[std::size_t(i)] = Stored{e.g, t, t};
      }
    }

    std::fill(sum.begin(), sum.end(), 0.0);
    for (int i = 0; i < K; ++i) {
      const Stored& st = stored[std::size_t(i)];
      out.update(t, t, i, int(t - st.recv), int(t - st.state_slot),
                 st.state_slot, st.recv, eps, st.g, 0.0);
      add_into(sum, st.g);
    }
    double moved = apply_step(lam, sum, eps, nonneg, prev);
    tr.slot_step_norm.push_back(moved);
    out.push_slot_lambda(lam);
    out.push_cycle_lambda(lam);
  }
  tr.cycles_completed = opts.T;
  return tr;
}

// Incremental ring with a per-slot token-step budget. Slot layout: first
// every node computes an allocation against its current dual copy and
// refreshes its stored gradient; then the token performs its steps. The
// token never processes a cycle index ahead of the wall clock, and extra
// steps are forced whenever the copy the token refreshes next would
// otherwise exceed tau_max slots of age, which caps every recorded age at
// tau_max (copies age in ring order, so the next-refreshed copy is always
// the oldest). When a visit to the last node completes a cycle the fresh
// iterate is handed to node 0 in the same slot.
RunTrace run_ring_budget(const std::vector<const GradientOracle*>& oracles,
                         const ProjectionSpec& proj,
                         const DelaySchedule& delay, const EngineOptions& opts,
                         const char* engine_name) {
  validate_options(opts);
  int d = checked_dual_dim(oracles);
  int K = int(oracles.size());
  check_projection(proj, d);
  if (delay.K != K)
    throw std::invalid_argument("delay schedule was built for K = " +
                                std::to_string(delay.K) + " nodes, run has " +
                                std::to_string(K));

  RunTrace tr;
  tr.engine = engine_name;
  tr.K = K;
  tr.d = d;
  tr.T = opts.T;
  tr.seed = opts.seed;
  tr.tau_max = delay.tau_max;
  TraceBuilder out(tr);

  Vec lam = initial_lambda(opts, d, proj.is_nonneg);
  if (!proj.is_nonneg) proj.apply(lam);
  Vec prev;
  out.push_slot_lambda(lam);
  out.push_cycle_lambda(lam);
  Vec cycle_start = lam;

  struct Copy {
    Vec value;
    long cycle = 1;
    long recv = 0;
  };
  struct Stored {
    Vec g;
    long state_slot = 0;
    long dual_cycle = 1;
    long dual_recv = 0;
  };
  std::vector<Copy> copies(std::size_t(K), Copy{lam, 1, 0});
  std::vector<Stored> stored(static_cast<std::size_t>(K));
  BudgetSequence budget(delay);

  long cycle = 1;
  int pos = 0;  // next node index the token visits
  for (long s = 1; s <= opts.T; ++s) {
    for (int i = 0; i < K; ++i) {
      const Copy& cp = copies[std::size_t(i)];
      GradientOracle::Eval e =
          oracles[std::size_t(i)]->evaluate(cp.value, s, opts.seed);
      out.alloc(s, i, cp.cycle, cp.recv, int(s - cp.recv), e);
      stored[std::size_t(i)] =
          Stored{std::move(e.g), s, cp.cycle, cp.recv};
    }

    int n = budget.steps_for_slot(s);
    int steps = 0;
    while (cycle <= s) {
      int oldest = (pos + 1) % K;
      bool force = (s + 1 - copies[std::size_t(oldest)].recv > delay.tau_max);
      if (steps >= n && !force) break;
      const Stored& st = stored[std::size_t(pos)];
      double eps = opts.step.at(cycle);
      double moved = apply_step(lam, st.g, eps, proj, prev);
      out.update(s, cycle, pos, int(s - st.dual_recv),
                 int(s - st.state_slot), st.state_slot, st.dual_cycle, eps,
                 st.g, moved);
      ++steps;
      if (pos + 1 < K) {
        ++pos;
        copies[std::size_t(pos)] = Copy{lam, cycle, s};
      } else {
        out.push_cycle_lambda(lam);
        cycle_start = lam;
        ++cycle;
        pos = 0;
        copies[0] = Copy{lam, cycle, s};
      }
    }
    out.push_slot_lambda(cycle_start);
  }
  tr.cycles_completed = cycle - 1;
  return tr;
}

// General incremental iteration with a constant positional lag: one cycle
// per slot, and the visit to node i of cycle t is evaluated at the iterate
// that sat at the same position c cycles earlier.
RunTrace run_ring_constant(const std::vector<const GradientOracle*>& oracles,
                           const ProjectionSpec& proj, int c,
                           const EngineOptions& opts) {
  validate_options(opts);
  int d = checked_dual_dim(oracles);
  int K = int(oracles.size());
  check_projection(proj, d);

  RunTrace tr;
  tr.engine = "aisdd_general";
  tr.K = K;
  tr.d = d;
  tr.T = opts.T;
  tr.seed = opts.seed;
  tr.tau_max = c;
  TraceBuilder out(tr);

  Vec lam = initial_lambda(opts, d, proj.is_nonneg);
  if (!proj.is_nonneg) proj.apply(lam);
  Vec prev;
  out.push_slot_lambda(lam);
  out.push_cycle_lambda(lam);
  const Vec lam1 = lam;

  // hist[(t % (c+1)) * K + i] = iterate seen by node i's visit in cycle t.
  std::vector<Vec> hist(std::size_t(c + 1) * std::size_t(K));

  for (long t = 1; t <= opts.T; ++t) {
    double eps = opts.step.at(t);
    long u = std::max<long>(1, t - c);
    int age = int(t - u);
    for (int i = 0; i < K; ++i) {
      hist[std::size_t(t % (c + 1)) * K + i] = lam;
      const Vec& lam_used =
          (t - c < 1) ? lam1 : hist[std::size_t(u % (c + 1)) * K + i];
      GradientOracle::Eval e =
          oracles[std::size_t(i)]->evaluate(lam_used, t, opts.seed);
      out.alloc(t, i, u, u, age, e);
      double moved = apply_step(lam, e.g, eps, proj, prev);
      out.update(t, t, i, age, 0, t, u, eps, e.g, moved);
    }
    out.push_slot_lambda(lam);
    out.push_cycle_lambda(lam);
  }
  tr.cycles_completed = opts.T;
  return tr;
}

std::vector<std::unique_ptr<NodeGradientOracle>> wrap_nodes(
    const Problem& problem) {
  std::vector<std::unique_ptr<NodeGradientOracle>> owned;
  owned.reserve(std::size_t(problem.num_nodes()));
  for (int i = 0; i < problem.num_nodes(); ++i)
    owned.push_back(std::make_unique<NodeGradientOracle>(problem.nodes[std::size_t(i)]));
  return owned;
}

std::vector<const GradientOracle*> raw_view(
    const std::vector<std::unique_ptr<NodeGradientOracle>>& owned) {
  std::vector<const GradientOracle*> v;
  v.reserve(owned.size());
  for (const auto& o : owned) v.push_back(o.get());
  return v;
}

}  // namespace

RunTrace run_synchronous(const Problem& problem, const EngineOptions& opts) {
  auto owned = wrap_nodes(problem);
  RunTrace tr =
      run_batch_core(raw_view(owned), ProjectionSpec{}, opts, "synchronous",
                     /*tau_max_meta=*/-1);
  tr.problem = problem.name;
  return tr;
}

RunTrace run_async_fc(const Problem& problem, const DelaySchedule& delay,
                      const EngineOptions& opts) {
  auto owned = wrap_nodes(problem);
  auto view = raw_view(owned);
  RunTrace tr;
  switch (delay.kind) {
    case DelaySchedule::Kind::kNone:
      tr = run_batch_core(view, ProjectionSpec{}, opts, "async_fc", -1);
      break;
    case DelaySchedule::Kind::kConstant:
      tr = delay.c == 0
               ? run_batch_core(view, ProjectionSpec{}, opts, "async_fc", 0)
               : run_fc_constant(view, delay.c, opts);
      break;
    case DelaySchedule::Kind::kSubsetFc:
      tr = delay.zero_staleness()
               ? run_batch_core(view, ProjectionSpec{}, opts, "async_fc", 0)
               : run_fc_subset(view, delay, opts);
      break;
    case DelaySchedule::Kind::kBudgetIncremental:
      throw std::invalid_argument(
          "budget_incremental schedules drive the incremental engine, not "
          "the fusion-center engine");
  }
  tr.problem = problem.name;
  return tr;
}

RunTrace run_aisdd(const Problem& problem, const DelaySchedule& delay,
                   const EngineOptions& opts) {
  if (delay.kind != DelaySchedule::Kind::kBudgetIncremental)
    throw std::invalid_argument(
        "the incremental engine takes a budget_incremental schedule");
  auto owned = wrap_nodes(problem);
  auto view = raw_view(owned);
  RunTrace tr =
      delay.zero_staleness()
          ? run_batch_core(view, ProjectionSpec{}, opts, "aisdd", 0)
          : run_ring_budget(view, ProjectionSpec{}, delay, opts, "aisdd");
  tr.problem = problem.name;
  return tr;
}

RunTrace run_aisdd_general(const std::vector<const GradientOracle*>& oracles,
                           const ProjectionSpec& projection,
                           const DelaySchedule& delay,
                           const EngineOptions& opts) {
  RunTrace tr;
  switch (delay.kind) {
    case DelaySchedule::Kind::kNone:
      tr = run_batch_core(oracles, projection, opts, "aisdd_general", -1);
      break;
    case DelaySchedule::Kind::kConstant:
      tr = delay.c == 0 ? run_batch_core(oracles, projection, opts,
                                         "aisdd_general", 0)
                        : run_ring_constant(oracles, projection, delay.c,
                                            opts);
      break;
    case DelaySchedule::Kind::kBudgetIncremental:
      tr = delay.zero_staleness()
               ? run_batch_core(oracles, projection, opts, "aisdd_general", 0)
               : run_ring_budget(oracles, projection, delay, opts,
                                 "aisdd_general");
      break;
    case DelaySchedule::Kind::kSubsetFc:
      throw std::invalid_argument(
          "subset_fc schedules drive the fusion-center engine, not the "
          "general incremental engine");
  }
  tr.problem = "custom";
  return tr;
}

}  // namespace dualsim
