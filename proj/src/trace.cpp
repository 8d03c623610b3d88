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

#include "dualsim/trace.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace dualsim {

DelayStats summarize_delays(const RunTrace& trace) {
  DelayStats s;
  long n = trace.alloc_rows();
  for (long r = 0; r < n; ++r) {
    s.mean_pi += trace.alloc_pi[std::size_t(r)];
    s.max_pi = std::max(s.max_pi, double(trace.alloc_pi[std::size_t(r)]));
  }
  if (n > 0) s.mean_pi /= double(n);

  long m = trace.up_rows();
  for (long r = 0; r < m; ++r) {
    s.mean_delta += trace.up_delta[std::size_t(r)];
    s.mean_tau += trace.up_tau[std::size_t(r)];
    s.max_delta = std::max(s.max_delta, double(trace.up_delta[std::size_t(r)]));
    s.max_tau = std::max(s.max_tau, double(trace.up_tau[std::size_t(r)]));
  }
  if (m > 0) {
    s.mean_delta /= double(m);
    s.mean_tau /= double(m);
  }

  // Inter-update gap: per node, mean gap between consecutive slots at which
  // a fresh gradient of that node entered a dual step (state_slot == slot).
  std::map<int, long> last;
  double gap_sum = 0.0;
  long gap_n = 0;
  for (long r = 0; r < m; ++r) {
    if (trace.up_state_slot[std::size_t(r)] != trace.up_slot[std::size_t(r)])
      continue;
    int node = trace.up_node[std::size_t(r)];
    long slot = trace.up_slot[std::size_t(r)];
    auto it = last.find(node);
    if (it != last.end() && slot > it->second) {
      gap_sum += double(slot - it->second);
      ++gap_n;
    }
    last[node] = slot;
  }
  if (gap_n > 0) s.mean_interupdate_gap = gap_sum / double(gap_n);

  if (trace.T > 0 && trace.cycles_completed > 0)
    s.cycles_per_slot = double(trace.cycles_completed) / double(trace.T);
  return s;
}

std::vector<std::string> check_trace(const RunTrace& trace) {
  std::vector<std::string> bad;
  auto complain = [&](const std::string& msg) {
    if (bad.size() < 20) bad.push_back(msg);
  };

  for (std::size_t k = 0; k < trace.lambda_slot.size(); ++k)
    if (trace.lambda_slot[k] < 0.0) {
      complain("lambda_slot has negative entry at flat index " +
               std::to_string(k));
      break;
    }
  for (std::size_t k = 0; k < trace.lambda_cycle.size(); ++k)
    if (trace.lambda_cycle[k] < 0.0) {
      complain("lambda_cycle has negative entry at flat index " +
               std::to_string(k));
      break;
    }

  for (long r = 0; r < trace.alloc_rows(); ++r) {
    int pi = trace.alloc_pi[std::size_t(r)];
    if (pi < 0)
      complain("alloc row " + std::to_string(r) + ": pi = " +
               std::to_string(pi) + " < 0");
    if (trace.tau_max >= 0 && pi > trace.tau_max)
      complain("alloc row " + std::to_string(r) + ": pi = " +
               std::to_string(pi) + " exceeds tau_max = " +
               std::to_string(trace.tau_max));
  }

  for (long r = 0; r < trace.up_rows(); ++r) {
    int tau = trace.up_tau[std::size_t(r)];
    int delta = trace.up_delta[std::size_t(r)];
    if (delta < 0 || tau < 0)
      complain("update row " + std::to_string(r) + ": negative age");
    if (delta > tau)
      complain("update row " + std::to_string(r) + ": delta = " +
               std::to_string(delta) + " > tau = " + std::to_string(tau));
    if (trace.tau_max >= 0 && tau > trace.tau_max)
      complain("update row " + std::to_string(r) + ": tau = " +
               std::to_string(tau) + " exceeds tau_max = " +
               std::to_string(trace.tau_max));
  }
  return bad;
}

}  // namespace dualsim
