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

#include "dualsim/beamforming.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "dualsim/rng.hpp"

namespace dualsim {

void BeamSpec::validate() const {
  if (B < 1) throw std::invalid_argument("BeamSpec: B must be >= 1");
  if (N < 1) throw std::invalid_argument("BeamSpec: N must be >= 1");
  if (users_per_cell < 1)
    throw std::invalid_argument("BeamSpec: users_per_cell must be >= 1");
  if (sigma2 <= 0.0) throw std::invalid_argument("BeamSpec: sigma2 must be > 0");
  if (gamma <= 0.0) throw std::invalid_argument("BeamSpec: gamma must be > 0");
  if (rho <= 0.0) throw std::invalid_argument("BeamSpec: rho must be > 0");
  if (clip <= 0.0) throw std::invalid_argument("BeamSpec: clip must be > 0");
  if (pg_iters < 1 || feas_passes < 1)
    throw std::invalid_argument("BeamSpec: iteration budgets must be >= 1");
  if (pg_tol <= 0.0) throw std::invalid_argument("BeamSpec: pg_tol must be > 0");
}

std::vector<CVec> sample_cell_channels(const BeamSpec& spec, int cell,
                                       long slot, std::uint64_t seed) {
  Rng r(seed, std::uint64_t(cell), std::uint64_t(slot));
  int U = spec.num_users();
  std::vector<CVec> h(std::size_t(U), CVec(std::size_t(spec.N)));
  double scale = std::sqrt(0.5);
  for (int j = 0; j < U; ++j) {
    for (int k = 0; k < spec.N; ++k) {
      std::complex<double> z(scale * r.normal(), scale * r.normal());
      double a = std::abs(z);
      if (a > spec.clip) z *= spec.clip / a;
      h[std::size_t(j)][std::size_t(k)] = z;
    }
  }
  return h;
}

namespace {

// h^H w
std::complex<double> cdot(const CVec& h, const CVec& w) {
  std::complex<double> z(0.0, 0.0);
  for (std::size_t k = 0; k < h.size(); ++k) z += std::conj(h[k]) * w[k];
  return z;
}

double cnorm2(const CVec& v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

CVec czeros(int n) {
  return CVec(std::size_t(n), std::complex<double>(0.0, 0.0));
}

std::vector<CVec> cmat(int rows, int cols) {
  return std::vector<CVec>(std::size_t(rows), czeros(cols));
}

}  // namespace

double sinr(const BeamSpec& spec,
            const std::vector<std::vector<CVec>>& channels,
            const std::vector<CVec>& w, int j) {
  int U = spec.num_users();
  if (int(channels.size()) != spec.B || int(w.size()) != U)
    throw DimensionError("sinr: channels/beamformer dimensions inconsistent");
  int i = spec.cell_of(j);
  double num = std::norm(cdot(channels[std::size_t(i)][std::size_t(j)],
                              w[std::size_t(j)]));
  double den = spec.sigma2;
  for (int n = 0; n < U; ++n) {
    if (n == j) continue;
    int m = spec.cell_of(n);
    den += std::norm(cdot(channels[std::size_t(m)][std::size_t(j)],
                          w[std::size_t(n)]));
  }
  return num / den;
}

namespace {

// Internal workspace for one cell's subproblem. Own users are indexed
// 0..P-1 locally; user(j_local) maps back to the global user index.
struct CellProblem {
  const BeamSpec& spec;
  int cell;
  const Vec& lam;
  const std::vector<CVec>& h;  // channels toward every user
  double sig2;
  std::vector<int> own;     // global indices of this cell's users
  std::vector<int> others;  // global indices of every other user

  CellProblem(const BeamSpec& s, int c, const Vec& l,
              const std::vector<CVec>& ch, double sg)
      : spec(s), cell(c), lam(l), h(ch), sig2(sg) {
    for (int j = 0; j < s.num_users(); ++j)
      (s.cell_of(j) == c ? own : others).push_back(j);
  }

  // SINR slack of own user j_local at I = 0 (in |h^H w_j|^2 units).
  double slack(const std::vector<CVec>& w, int jl) const {
    int j = own[std::size_t(jl)];
    double zz = std::norm(cdot(h[std::size_t(j)], w[std::size_t(jl)]));
    return zz / spec.gamma - intra(w, jl) - sig2;
  }

  double intra(const std::vector<CVec>& w, int jl) const {
    int j = own[std::size_t(jl)];
    double s = 0.0;
    for (std::size_t kl = 0; kl < own.size(); ++kl)
      if (int(kl) != jl) s += std::norm(cdot(h[std::size_t(j)], w[kl]));
    return s;
  }

  double budget(const std::vector<CVec>& w, int jl) const {
    return std::sqrt(std::max(0.0, slack(w, jl)));
  }

  double objective(const std::vector<CVec>& w) const {
    double v = 0.0;
    for (const CVec& wn : w) v += cnorm2(wn);
    for (std::size_t jl = 0; jl < own.size(); ++jl)
      v -= lam[std::size_t(own[jl])] * budget(w, int(jl));
    for (int l : others) {
      double leak = 0.0;
      for (const CVec& wn : w) leak += std::abs(cdot(h[std::size_t(l)], wn));
      v += lam[std::size_t(l)] * leak;
    }
    return v;
  }

  // Objective gradient in the complex encoding (real gradient is the
  // re/im pairs of the returned vectors).
  std::vector<CVec> gradient(const std::vector<CVec>& w) const {
    std::size_t P = own.size();
    std::vector<CVec> g(P, CVec(std::size_t(spec.N), {0.0, 0.0}));
    for (std::size_t n = 0; n < P; ++n)
      for (int k = 0; k < spec.N; ++k)
        g[n][std::size_t(k)] = 2.0 * w[n][std::size_t(k)];
    for (std::size_t jl = 0; jl < P; ++jl) {
      double lj = lam[std::size_t(own[jl])];
      if (lj == 0.0) continue;
      double s = slack(w, int(jl));
      if (s <= 0.0) continue;  // budget pinned at zero: flat here
      double Ig = std::max(std::sqrt(s), 1e-6);
      const CVec& hj = h[std::size_t(own[jl])];
      for (std::size_t n = 0; n < P; ++n) {
        std::complex<double> z = cdot(hj, w[n]);
        // d budget / d w_n, scaled by -lam_j
        std::complex<double> coef =
            (n == jl) ? -lj * z / (spec.gamma * Ig) : lj * z / Ig;
        for (int k = 0; k < spec.N; ++k) g[n][std::size_t(k)] += coef * hj[std::size_t(k)];
      }
    }
    for (int l : others) {
      double ll = lam[std::size_t(l)];
      if (ll == 0.0) continue;
      const CVec& hl = h[std::size_t(l)];
      for (std::size_t n = 0; n < P; ++n) {
        std::complex<double> z = cdot(hl, w[n]);
        double a = std::abs(z);
        if (a < 1e-12) continue;
        std::complex<double> coef = ll * z / a;
        for (int k = 0; k < spec.N; ++k) g[n][std::size_t(k)] += coef * hl[std::size_t(k)];
      }
    }
    return g;
  }

  // One sweep of alternating projections: align phases, lift own-user inner
  // products to the SINR floor, shrink leakage over the caps. Returns the
  // remaining violation.
  double project_pass(std::vector<CVec>& w) const {
    std::size_t P = own.size();
    for (std::size_t jl = 0; jl < P; ++jl) {
      const CVec& hj = h[std::size_t(own[jl])];
      std::complex<double> z = cdot(hj, w[jl]);
      double a = std::abs(z);
      if (a > 1e-12) {
        std::complex<double> rot = std::conj(z) / a;
        for (auto& c : w[jl]) c *= rot;
      }
    }
    for (std::size_t jl = 0; jl < P; ++jl) {
      const CVec& hj = h[std::size_t(own[jl])];
      double hn = cnorm2(hj);
      if (hn < 1e-300) continue;
      double c = std::sqrt(spec.gamma * (intra(w, int(jl)) + sig2));
      double zr = cdot(hj, w[jl]).real();
      if (zr < c) {
        double t = (c - zr) / hn;
        for (int k = 0; k < spec.N; ++k) w[jl][std::size_t(k)] += t * hj[std::size_t(k)];
      }
    }
    for (int l : others) {
      const CVec& hl = h[std::size_t(l)];
      double hn = cnorm2(hl);
      if (hn < 1e-300) continue;
      for (std::size_t n = 0; n < P; ++n) {
        std::complex<double> z = cdot(hl, w[n]);
        double a = std::abs(z);
        if (a > spec.rho) {
          std::complex<double> coef = z * (1.0 - spec.rho / a) / hn;
          for (int k = 0; k < spec.N; ++k)
            w[n][std::size_t(k)] -= coef * hl[std::size_t(k)];
        }
      }
    }
    return violation(w);
  }

  double violation(const std::vector<CVec>& w) const {
    double v = 0.0;
    for (std::size_t jl = 0; jl < own.size(); ++jl) {
      double c = std::sqrt(spec.gamma * (intra(w, int(jl)) + sig2));
      v += std::max(0.0, c - cdot(h[std::size_t(own[jl])], w[jl]).real());
    }
    for (int l : others)
      for (const CVec& wn : w)
        v += std::max(0.0, std::abs(cdot(h[std::size_t(l)], wn)) - spec.rho);
    return v;
  }

  // Drive w into the feasible set; false if the budget runs out first.
  bool restore(std::vector<CVec>& w, int passes, double tol) const {
    double v = violation(w);
    for (int p = 0; p < passes && v > tol; ++p) v = project_pass(w);
    return v <= tol;
  }
};

// Solve the square complex system A x = b by Gaussian elimination with
// partial pivoting. Returns false when A is numerically singular.
bool solve_complex(std::vector<CVec> A, CVec b, CVec& x) {
  std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    if (std::abs(A[piv][c]) < 1e-12) return false;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      std::complex<double> f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  x.assign(n, {0.0, 0.0});
  for (std::size_t r = n; r-- > 0;) {
    std::complex<double> s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= A[r][k] * x[k];
    x[r] = s / A[r][r];
  }
  return true;
}

// Exact feasibility of the single-own-user cell: needs Re(h0^H w) >= c with
// |h_l^H w| <= rho per victim. With fewer victims than antennas, steering in
// the victims' null space leaks nothing, so the floor is always reachable.
// With exactly N victims the cap polydisc maps bijectively onto w-space and
// the best own gain is rho * sum_k |(M^-H h0)_k| with aligned phases.
// Returns 1 feasible (anchor filled), 0 infeasible, -1 undecided.
int exact_single_user_anchor(const BeamSpec& spec, const CVec& h0,
                             const std::vector<const CVec*>& victims,
                             double c, CVec& anchor) {
  int N = spec.N;
  int V = int(victims.size());
  if (V < N) {
    // Gram-Schmidt basis of the victim span, then project h0 out of it.
    std::vector<CVec> basis;
    for (const CVec* hv : victims) {
      CVec u = *hv;
      for (const CVec& bvec : basis) {
        std::complex<double> p = cdot(bvec, u);
        for (int k = 0; k < N; ++k) u[std::size_t(k)] -= p * bvec[std::size_t(k)];
      }
      double nn = std::sqrt(cnorm2(u));
      if (nn > 1e-10) {
        for (auto& z : u) z /= nn;
        basis.push_back(std::move(u));
      }
    }
    CVec r = h0;
    for (const CVec& bvec : basis) {
      std::complex<double> p = cdot(bvec, r);
      for (int k = 0; k < N; ++k) r[std::size_t(k)] -= p * bvec[std::size_t(k)];
    }
    double rn = cnorm2(r);
    if (rn < 1e-16) return -1;  // h0 inside the victim span: degenerate
    anchor = r;
    double amp = c / cdot(h0, r).real();  // = c / ||P h0||^2 > 0
    for (auto& z : anchor) z *= amp;
    return 1;
  }
  if (V == N) {
    // u = M^-H h0  <=>  M^H u = h0, rows of M are victims' h^H, so
    // (M^H)[r][k] = h_k[r] with no conjugate.
    std::vector<CVec> MH = cmat(N, N);
    for (int r = 0; r < N; ++r)
      for (int k = 0; k < N; ++k)
        MH[std::size_t(r)][std::size_t(k)] =
            (*victims[std::size_t(k)])[std::size_t(r)];
    CVec u;
    if (!solve_complex(MH, h0, u)) return -1;
    double gmax = 0.0;
    for (const auto& z : u) gmax += std::abs(z);
    gmax *= spec.rho;
    if (gmax < c) return 0;
    // v_l = rho * e^{i arg(u_l)} makes every term of u^H v real positive;
    // w = M^-1 v, scaled down to sit exactly on the floor.
    CVec v = czeros(N);
    for (int l = 0; l < N; ++l) {
      double a = std::abs(u[std::size_t(l)]);
      v[std::size_t(l)] = a > 1e-300 ? spec.rho * u[std::size_t(l)] / a
                                     : std::complex<double>(spec.rho, 0.0);
    }
    std::vector<CVec> M = cmat(N, N);
    for (int r = 0; r < N; ++r)
      for (int k = 0; k < N; ++k)
        M[std::size_t(r)][std::size_t(k)] = std::conj((*victims[std::size_t(r)])[std::size_t(k)]);
    CVec w;
    if (!solve_complex(M, v, w)) return -1;
    double scale = c / gmax;
    for (auto& z : w) z *= scale;
    anchor = std::move(w);
    return 1;
  }
  return -1;  // more victims than antennas: no closed form here
}

}  // namespace

SubproblemResult solve_bs_subproblem(const BeamSpec& spec, int cell,
                                     const Vec& lam,
                                     const std::vector<CVec>& channels,
                                     double sigma2_override) {
  spec.validate();
  if (cell < 0 || cell >= spec.B)
    throw std::invalid_argument("solve_bs_subproblem: cell out of range");
  if (int(lam.size()) != spec.num_users())
    throw DimensionError("solve_bs_subproblem: lam must have one entry per user");
  for (double l : lam)
    if (l < 0.0)
      throw std::invalid_argument("solve_bs_subproblem: negative multiplier");
  if (int(channels.size()) != spec.num_users())
    throw DimensionError("solve_bs_subproblem: one channel per user required");

  double sig2 = sigma2_override >= 0.0 ? sigma2_override : spec.sigma2;
  CellProblem cp(spec, cell, lam, channels, sig2);
  std::size_t P = cp.own.size();

  SubproblemResult res;
  res.w.assign(P, CVec(std::size_t(spec.N), {0.0, 0.0}));
  res.I.assign(P, 0.0);

  // Matched-filter start at the zero-interference-budget power level.
  for (std::size_t jl = 0; jl < P; ++jl) {
    const CVec& hj = channels[std::size_t(cp.own[jl])];
    double hn = cnorm2(hj);
    if (hn < 1e-300) return res;  // dead channel: cannot meet any SINR
    double amp = std::sqrt(spec.gamma * sig2) / hn;
    for (int k = 0; k < spec.N; ++k)
      res.w[jl][std::size_t(k)] = amp * hj[std::size_t(k)];
  }

  // Decide feasibility. Single-own-user cells admit an exact test and an
  // exact feasible anchor; otherwise alternating projections decide.
  bool have_anchor = false;
  CVec anchor;
  if (P == 1) {
    std::vector<const CVec*> victims;
    for (int l : cp.others) victims.push_back(&channels[std::size_t(l)]);
    int verdict = exact_single_user_anchor(
        spec, channels[std::size_t(cp.own[0])], victims,
        std::sqrt(spec.gamma * sig2), anchor);
    if (verdict == 0) return res;  // provably infeasible
    have_anchor = verdict == 1;
  }
  if (!cp.restore(res.w, spec.feas_passes, 1e-7)) {
    if (!have_anchor) return res;  // alternating projections gave up
    res.w[0] = anchor;
    if (!cp.restore(res.w, spec.feas_passes, 1e-7)) return res;
  }

  double phi = cp.objective(res.w);
  int used = 0;
  int small_streak = 0;  // consecutive accepted steps with negligible drop
  while (used < spec.pg_iters) {
    std::vector<CVec> grad = cp.gradient(res.w);
    // Fresh backtracking line search every iteration. The eliminated-I term
    // has unbounded slope at the SINR floor, so a step size carried over
    // from one iteration can collapse there and stall the descent.
    double alpha = 0.2;
    bool accepted = false;
    double drop = 0.0;
    for (int bt = 0; bt < 30; ++bt) {
      std::vector<CVec> trial = res.w;
      for (std::size_t n = 0; n < P; ++n)
        for (int k = 0; k < spec.N; ++k)
          trial[n][std::size_t(k)] -= alpha * grad[n][std::size_t(k)];
      if (!cp.restore(trial, 60, 1e-10)) {
        alpha *= 0.5;
        continue;
      }
      double phi_t = cp.objective(trial);
      if (phi_t <= phi - 1e-12 * std::max(1.0, std::abs(phi))) {
        drop = phi - phi_t;
        res.w = std::move(trial);
        phi = phi_t;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++used;
    if (!accepted) break;
    if (drop <= spec.pg_tol * std::max(1.0, std::abs(phi))) {
      if (++small_streak >= 2) break;
    } else {
      small_streak = 0;
    }
  }

  res.feasible = true;
  res.iters = used;
  res.objective = phi;
  for (std::size_t jl = 0; jl < P; ++jl) res.I[jl] = cp.budget(res.w, int(jl));
  return res;
}

Vec beamforming_dual_update(const BeamSpec& spec, int cell, const Vec& lam,
                            double eps, const Vec& I_own, const Vec& leak) {
  int U = spec.num_users();
  if (int(lam.size()) != U || int(leak.size()) != U ||
      int(I_own.size()) != spec.users_per_cell)
    throw DimensionError("beamforming_dual_update: dimension mismatch");
  Vec g(std::size_t(U), 0.0);
  for (int j = 0; j < U; ++j)
    g[std::size_t(j)] = spec.cell_of(j) == cell
                            ? I_own[std::size_t(j - cell * spec.users_per_cell)]
                            : -leak[std::size_t(j)];
  Vec out = lam;
  projected_step_nonneg(out, g, eps);
  return out;
}

namespace {

class BeamformingNode final : public NodeOracle {
 public:
  BeamformingNode(const BeamSpec& spec, int cell) : spec_(spec), cell_(cell) {}

  int node_id() const override { return cell_; }
  int dual_dim() const override { return spec_.num_users(); }
  int state_dim() const override { return 2 * spec_.N * spec_.num_users(); }

  StateSample sample_state(long slot, std::uint64_t seed) const override {
    StateSample s;
    s.node = cell_;
    s.slot = slot;
    auto h = sample_cell_channels(spec_, cell_, slot, seed);
    s.value.reserve(std::size_t(state_dim()));
    for (const CVec& hj : h)
      for (const auto& z : hj) {
        s.value.push_back(z.real());
        s.value.push_back(z.imag());
      }
    return s;
  }

  Allocation best_response(const Vec& lam,
                           const StateSample& state) const override {
    auto h = unpack(state);
    SubproblemResult r = solve_bs_subproblem(spec_, cell_, lam, h);
    Allocation a;
    a.node = cell_;
    a.slot = state.slot;
    int P = spec_.users_per_cell;
    a.x.assign(std::size_t(2 * spec_.N * P), 0.0);
    a.p.assign(std::size_t(P), 0.0);
    a.flagged = !r.feasible;
    if (r.feasible) {
      std::size_t pos = 0;
      for (const CVec& wn : r.w)
        for (const auto& z : wn) {
          a.x[pos++] = z.real();
          a.x[pos++] = z.imag();
        }
      a.p = r.I;
    }
    return a;
  }

  Vec gradient(const Allocation& alloc,
               const StateSample& state) const override {
    int U = spec_.num_users();
    Vec g(std::size_t(U), 0.0);
    if (alloc.flagged) return g;
    auto h = unpack(state);
    auto w = unpack_w(alloc.x);
    for (int j = 0; j < U; ++j) {
      if (spec_.cell_of(j) == cell_) {
        g[std::size_t(j)] =
            alloc.p[std::size_t(j - cell_ * spec_.users_per_cell)];
      } else {
        double leak = 0.0;
        for (const CVec& wn : w) leak += std::abs(cdot(h[std::size_t(j)], wn));
        g[std::size_t(j)] = -leak;
      }
    }
    return g;
  }

  double objective(const Vec& x) const override {
    double p = 0.0;
    for (double v : x) p += v * v;
    return -p;  // maximization framework: negated transmit power
  }

 private:
  std::vector<CVec> unpack(const StateSample& state) const {
    int U = spec_.num_users();
    std::vector<CVec> h(std::size_t(U), CVec(std::size_t(spec_.N)));
    std::size_t pos = 0;
    for (int j = 0; j < U; ++j)
      for (int k = 0; k < spec_.N; ++k) {
        h[std::size_t(j)][std::size_t(k)] =
            std::complex<double>(state.value[pos], state.value[pos + 1]);
        pos += 2;
      }
    return h;
  }

  std::vector<CVec> unpack_w(const Vec& x) const {
    std::vector<CVec> w(std::size_t(spec_.users_per_cell),
                        CVec(std::size_t(spec_.N)));
    std::size_t pos = 0;
    for (auto& wn : w)
      for (int k = 0; k < spec_.N; ++k) {
        wn[std::size_t(k)] = std::complex<double>(x[pos], x[pos + 1]);
        pos += 2;
      }
    return w;
  }

  BeamSpec spec_;
  int cell_;
};

}  // namespace

Problem make_beamforming(const BeamSpec& spec) {
  spec.validate();
  Problem p;
  p.name = "beamforming";
  p.dual_dim = spec.num_users();
  for (int i = 0; i < spec.B; ++i)
    p.nodes.push_back(std::make_shared<BeamformingNode>(spec, i));
  return p;
}

namespace {

// Recompute per-slot power, realized SINR, and the leakage-vs-budget running
// means from the recorded allocations, replaying the channel draws.
void attach_beam_aux(const BeamSpec& spec, RunTrace& tr, bool with_cons24) {
  int U = spec.num_users();
  int B = spec.B;
  long T = tr.T;
  Vec power(std::size_t(T), 0.0);
  std::vector<Vec> user_sinr(std::size_t(U), Vec(std::size_t(T), 0.0));
  std::vector<Vec> cons(std::size_t(U), Vec(std::size_t(T), 0.0));
  Vec cons_sum(std::size_t(U), 0.0);
  long flagged = 0;

  std::vector<std::vector<CVec>> channels;
  channels.resize(std::size_t(B));
  std::vector<CVec> w(std::size_t(U), CVec(std::size_t(spec.N)));
  Vec I(std::size_t(U), 0.0);

  for (long t = 1; t <= T; ++t) {
    for (int m = 0; m < B; ++m)
      channels[std::size_t(m)] = sample_cell_channels(spec, m, t, tr.seed);
    // rows are slot-major, node order: row (t-1)*B + i
    for (int i = 0; i < B; ++i) {
      long r = (t - 1) * B + i;
      if (tr.alloc_flagged[std::size_t(r)]) ++flagged;
      std::size_t pos = std::size_t(r) * tr.x_dim;
      for (int ul = 0; ul < spec.users_per_cell; ++ul) {
        int j = i * spec.users_per_cell + ul;
        I[std::size_t(j)] = tr.alloc_p[std::size_t(r) * tr.p_dim + ul];
        for (int k = 0; k < spec.N; ++k) {
          w[std::size_t(j)][std::size_t(k)] = std::complex<double>(
              tr.alloc_x[pos], tr.alloc_x[pos + 1]);
          pos += 2;
        }
      }
    }
    double pw = 0.0;
    for (const CVec& wn : w) pw += cnorm2(wn);
    power[std::size_t(t - 1)] = pw;
    for (int j = 0; j < U; ++j) {
      user_sinr[std::size_t(j)][std::size_t(t - 1)] =
          sinr(spec, channels, w, j);
      if (!with_cons24) continue;
      double leak = 0.0;
      for (int n = 0; n < U; ++n) {
        int m = spec.cell_of(n);
        if (m == spec.cell_of(j)) continue;
        leak += std::abs(cdot(channels[std::size_t(m)][std::size_t(j)],
                              w[std::size_t(n)]));
      }
      cons_sum[std::size_t(j)] += leak - I[std::size_t(j)];
      cons[std::size_t(j)][std::size_t(t - 1)] =
          cons_sum[std::size_t(j)] / double(t);
    }
  }

  tr.aux["power"] = std::move(power);
  for (int j = 0; j < U; ++j) {
    tr.aux["sinr_u" + std::to_string(j)] = std::move(user_sinr[std::size_t(j)]);
    if (with_cons24)
      tr.aux["cons24_u" + std::to_string(j)] = std::move(cons[std::size_t(j)]);
  }
  tr.aux["flagged_frac"] = {double(flagged) / double(T * B)};
}

RunTrace run_uncoordinated(const BeamSpec& spec, long T, std::uint64_t seed) {
  int U = spec.num_users();
  int B = spec.B;
  RunTrace tr;
  tr.engine = "uncoordinated";
  tr.problem = "beamforming";
  tr.K = B;
  tr.d = U;
  tr.x_dim = 2 * spec.N * spec.users_per_cell;
  tr.p_dim = spec.users_per_cell;
  tr.T = T;
  tr.seed = seed;
  tr.lambda_slot.assign(std::size_t(T + 1) * U, 0.0);
  // Every cell meets the inflated-noise SINR target on its own: the mean
  // cross-cell interference is replaced by its cap-implied worst case.
  double sig2_eff =
      spec.sigma2 + spec.rho * spec.rho * double(U - spec.users_per_cell);
  Vec lam0(std::size_t(U), 0.0);
  for (long t = 1; t <= T; ++t) {
    for (int i = 0; i < B; ++i) {
      auto h = sample_cell_channels(spec, i, t, seed);
      SubproblemResult r = solve_bs_subproblem(spec, i, lam0, h, sig2_eff);
      tr.alloc_slot.push_back(t);
      tr.alloc_node.push_back(i);
      tr.alloc_dual_index.push_back(t);
      tr.alloc_dual_recv_slot.push_back(t);
      tr.alloc_pi.push_back(0);
      tr.alloc_flagged.push_back(r.feasible ? 0 : 1);
      Vec x(std::size_t(tr.x_dim), 0.0);
      Vec p(std::size_t(tr.p_dim), 0.0);
      if (r.feasible) {
        std::size_t pos = 0;
        for (const CVec& wn : r.w)
          for (const auto& z : wn) {
            x[pos++] = z.real();
            x[pos++] = z.imag();
          }
        p = r.I;
      }
      tr.alloc_x.insert(tr.alloc_x.end(), x.begin(), x.end());
      tr.alloc_p.insert(tr.alloc_p.end(), p.begin(), p.end());
      tr.alloc_g.insert(tr.alloc_g.end(), std::size_t(U), 0.0);
    }
  }
  tr.notes.push_back("uncoordinated baseline: sigma2_eff = " +
                     std::to_string(sig2_eff) + ", no dual process");
  attach_beam_aux(spec, tr, /*with_cons24=*/false);
  return tr;
}

}  // namespace

RunTrace run_beamforming(const BeamSpec& spec, BeamEngine engine,
                         BeamBaseline baseline, const StepSchedule& step,
                         const DelaySchedule& delay, long T,
                         std::uint64_t seed) {
  spec.validate();
  if (T < 1) throw std::invalid_argument("run_beamforming: T must be >= 1");
  if (baseline == BeamBaseline::kUncoordinated)
    return run_uncoordinated(spec, T, seed);

  Problem problem = make_beamforming(spec);
  EngineOptions opts;
  opts.step = step;
  opts.T = T;
  opts.seed = seed;
  RunTrace tr;
  switch (engine) {
    case BeamEngine::kSynchronous:
      tr = run_synchronous(problem, opts);
      break;
    case BeamEngine::kAsyncFc:
      tr = run_async_fc(problem, delay, opts);
      break;
    case BeamEngine::kAisdd:
      tr = run_aisdd(problem, delay, opts);
      break;
  }
  attach_beam_aux(spec, tr, /*with_cons24=*/true);
  double frac = tr.aux.at("flagged_frac")[0];
  if (frac > 0.5)
    throw OracleError(
        "run_beamforming: " + std::to_string(100.0 * frac) +
        "% of cell-slot subproblems were infeasible; the leakage cap rho is "
        "too tight for this SINR target and antenna count");
  return tr;
}

}  // namespace dualsim
