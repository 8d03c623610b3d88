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

#include "dualsim/problems.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "dualsim/rng.hpp"

namespace dualsim {

void QuadraticSpec::validate() const {
  if (K < 1) throw std::invalid_argument("quadratic: K must be >= 1");
  if (int(a.size()) != K)
    throw std::invalid_argument("quadratic: a must have K entries");
  for (double ai : a)
    if (!(ai > 0.0)) throw std::invalid_argument("quadratic: a_i must be > 0");
  double amax = *std::max_element(a.begin(), a.end());
  if (!(x_max > amax))
    throw std::invalid_argument("quadratic: x_max must exceed max a_i");
  double asum = std::accumulate(a.begin(), a.end(), 0.0);
  if (!(b > 0.0 && asum > b))
    throw std::invalid_argument("quadratic: need 0 < b < sum a_i");
  if (noise_amp < 0.0)
    throw std::invalid_argument("quadratic: noise_amp must be >= 0");
}

namespace {

class QuadraticNode final : public NodeOracle {
 public:
  QuadraticNode(QuadraticSpec spec, int id) : spec_(std::move(spec)), id_(id) {}

  int node_id() const override { return id_; }
  int dual_dim() const override { return 1; }
  int state_dim() const override { return 1; }

  StateSample sample_state(long slot, std::uint64_t seed) const override {
    Rng r(seed, std::uint64_t(id_), std::uint64_t(slot));
    StateSample s;
    s.node = id_;
    s.slot = slot;
    s.value = {r.uniform(-spec_.noise_amp, spec_.noise_amp)};
    return s;
  }

  Allocation best_response(const Vec& lam,
                           const StateSample& state) const override {
    Allocation a;
    a.node = id_;
    a.slot = state.slot;
    double ai = spec_.a[std::size_t(id_)];
    a.x = {clamp(ai - lam[0] / 2.0, 0.0, spec_.x_max)};
    return a;
  }

  Vec gradient(const Allocation& alloc,
               const StateSample& state) const override {
    return {spec_.b / spec_.K - alloc.x[0] + state.value[0]};
  }

  double objective(const Vec& x) const override {
    double dx = x[0] - spec_.a[std::size_t(id_)];
    return -dx * dx;
  }

  std::optional<std::pair<Vec, Vec>> x_bounds() const override {
    return std::make_pair(Vec{0.0}, Vec{spec_.x_max});
  }

  std::optional<double> gradient_bound() const override {
    return quad_gradient_bound(spec_, id_);
  }

  std::optional<double> lipschitz_bound() const override {
    return quad_lipschitz_bound(spec_);
  }

 private:
  QuadraticSpec spec_;
  int id_;
};

}  // namespace

Problem make_quadratic(const QuadraticSpec& spec) {
  spec.validate();
  Problem p;
  p.dual_dim = 1;
  p.name = "quadratic";
  for (int i = 0; i < spec.K; ++i)
    p.nodes.push_back(std::make_shared<QuadraticNode>(spec, i));
  return p;
}

QuadAnalytic quad_analytic_solution(const QuadraticSpec& spec) {
  spec.validate();
  QuadAnalytic out;
  double asum = std::accumulate(spec.a.begin(), spec.a.end(), 0.0);

  auto supply = [&](double lam) {
    double s = 0.0;
    for (double ai : spec.a) s += clamp(ai - lam / 2.0, 0.0, spec.x_max);
    return s;
  };

  if (supply(0.0) <= spec.b) {
    out.lambda_star = 0.0;
  } else {
    // Interior candidate; exact when no clamp is strictly active.
    double cand = 2.0 * (asum - spec.b) / spec.K;
    bool interior = cand >= 0.0;
    for (double ai : spec.a) {
      double x = ai - cand / 2.0;
      if (x < 0.0 || x > spec.x_max) interior = false;
    }
    if (interior) {
      out.lambda_star = cand;
    } else {
      double lo = 0.0, hi = 2.0 * *std::max_element(spec.a.begin(),
                                                    spec.a.end());
      for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (supply(mid) > spec.b ? lo : hi) = mid;
      }
      out.lambda_star = 0.5 * (lo + hi);
    }
  }

  out.x_star.resize(spec.a.size());
  out.primal_value = 0.0;
  for (std::size_t i = 0; i < spec.a.size(); ++i) {
    out.x_star[i] = clamp(spec.a[i] - out.lambda_star / 2.0, 0.0, spec.x_max);
    double dx = out.x_star[i] - spec.a[i];
    out.primal_value -= dx * dx;
  }
  return out;
}

double quad_dual_value(const QuadraticSpec& spec, double lam) {
  double v = 0.0;
  for (double ai : spec.a) {
    double x = clamp(ai - lam / 2.0, 0.0, spec.x_max);
    double dx = x - ai;
    v += -dx * dx + lam * (spec.b / spec.K - x);
  }
  return v;
}

double quad_gradient_bound(const QuadraticSpec& spec, int node) {
  // Reachable allocations are clamp(a_i - lam/2, 0, x_max) for lam >= 0,
  // i.e. [0, min(a_i, x_max)].
  double bk = spec.b / spec.K;
  double xtop = std::min(spec.a[std::size_t(node)], spec.x_max);
  return spec.noise_amp + std::max(bk, std::abs(xtop - bk));
}

double quad_lipschitz_bound(const QuadraticSpec&) {
  // |d/dlam E[g_i]| = |x_i'(lam)| <= 1/2.
  return 0.5;
}

void NumSpec::validate() const {
  if (K < 1) throw std::invalid_argument("num: K must be >= 1");
  if (!w.empty() && int(w.size()) != K)
    throw std::invalid_argument("num: w must be empty or have K entries");
  for (double wi : w)
    if (!(wi > 0.0)) throw std::invalid_argument("num: w_i must be > 0");
  if (!(r_min > 0.0 && r_max > r_min))
    throw std::invalid_argument("num: need 0 < r_min < r_max");
  if (!(p_max > 0.0)) throw std::invalid_argument("num: p_max must be > 0");
  if (!(P_max > 0.0)) throw std::invalid_argument("num: P_max must be > 0");
  if (!(h_max > 0.0)) throw std::invalid_argument("num: h_max must be > 0");
}

namespace {

class NumNode final : public NodeOracle {
 public:
  NumNode(NumSpec spec, int id) : spec_(std::move(spec)), id_(id) {}

  int node_id() const override { return id_; }
  int dual_dim() const override { return 2; }
  int state_dim() const override { return 1; }

  StateSample sample_state(long slot, std::uint64_t seed) const override {
    Rng r(seed, std::uint64_t(id_), std::uint64_t(slot));
    StateSample s;
    s.node = id_;
    s.slot = slot;
    s.value = {std::min(r.exponential(1.0), spec_.h_max)};
    return s;
  }

  Allocation best_response(const Vec& lam,
                           const StateSample& state) const override {
    Allocation a;
    a.node = id_;
    a.slot = state.slot;
    double w = spec_.weight(id_);
    double h = state.value[0];
    double r, p;
    if (lam[0] <= 0.0) {
      r = spec_.r_max;  // utility is increasing in r, rate price is zero
      p = 0.0;          // power price only
    } else {
      r = clamp(w / lam[0], spec_.r_min, spec_.r_max);
      if (lam[1] <= 0.0) {
        p = spec_.p_max;
      } else {
        p = clamp(lam[0] / (2.0 * lam[1]) - 1.0 / h, 0.0, spec_.p_max);
      }
    }
    a.x = {r};
    a.p = {p};
    return a;
  }

  Vec gradient(const Allocation& alloc,
               const StateSample& state) const override {
    double h = state.value[0];
    return {0.5 * std::log1p(h * alloc.p[0]) - alloc.x[0],
            spec_.P_max / spec_.K - alloc.p[0]};
  }

  double objective(const Vec& x) const override {
    return spec_.weight(id_) * std::log(x[0]);
  }

  std::optional<std::pair<Vec, Vec>> x_bounds() const override {
    return std::make_pair(Vec{spec_.r_min}, Vec{spec_.r_max});
  }

  std::optional<std::pair<Vec, Vec>> p_bounds() const override {
    return std::make_pair(Vec{0.0}, Vec{spec_.p_max});
  }

  std::optional<double> gradient_bound() const override {
    return num_gradient_bound(spec_);
  }

 private:
  NumSpec spec_;
  int id_;
};

}  // namespace

Problem make_num(const NumSpec& spec) {
  spec.validate();
  Problem p;
  p.dual_dim = 2;
  p.name = "num";
  for (int i = 0; i < spec.K; ++i)
    p.nodes.push_back(std::make_shared<NumNode>(spec, i));
  return p;
}

double num_gradient_bound(const NumSpec& spec) {
  double rate = 0.5 * std::log1p(spec.h_max * spec.p_max) + spec.r_max;
  double pk = spec.P_max / spec.K;
  double power = std::max(pk, spec.p_max - pk);
  return std::sqrt(rate * rate + power * power);
}

double num_slater_margin(const NumSpec& spec, long n, std::uint64_t seed) {
  spec.validate();
  double pk = spec.P_max / spec.K;
  double best = -1e300;
  const int grid = 64;
  for (int k = 1; k < grid; ++k) {
    double pt = std::min(spec.p_max, pk) * double(k) / double(grid);
    double mean_rate = 0.0;
    for (long s = 0; s < n; ++s) {
      Rng r(seed, 0x517a73e5ULL, std::uint64_t(s));
      double h = std::min(r.exponential(1.0), spec.h_max);
      mean_rate += 0.5 * std::log1p(h * pt);
    }
    mean_rate /= double(n);
    best = std::max(best, std::min(mean_rate - spec.r_min, pk - pt));
  }
  return best;
}

}  // namespace dualsim
