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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace dualsim {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void add_into(Vec& acc, const Vec& g) {
  for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
}

// Euclidean projection onto the nonnegative orthant, componentwise.
inline void project_nonneg(Vec& v) {
  for (double& x : v) x = std::max(x, 0.0);
}

inline Vec projected_nonneg(Vec v) {
  project_nonneg(v);
  return v;
}

// One projected dual step lam <- [lam - eps * g]^+. All engines route their
// nonnegative-orthant updates through this helper so that configurations that
// must coincide (zero delay across engines) do so bitwise.
inline void projected_step_nonneg(Vec& lam, const Vec& g, double eps) {
  for (std::size_t j = 0; j < lam.size(); ++j)
    lam[j] = std::max(lam[j] - eps * g[j], 0.0);
}

inline double clamp(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

}  // namespace dualsim
