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

#include "dualsim/delay.hpp"

#include <algorithm>
#include <stdexcept>

namespace dualsim {

SubsetSequence::SubsetSequence(const DelaySchedule& d) : sched_(d) {
  if (d.kind != DelaySchedule::Kind::kSubsetFc)
    throw std::invalid_argument("SubsetSequence: schedule kind mismatch");
  last_delivery_.assign(std::size_t(d.K), 0);
}

const std::vector<int>& SubsetSequence::exchange_set(long slot) {
  if (slot != next_slot_)
    throw std::logic_error("SubsetSequence: slots must be queried in order");
  ++next_slot_;

  current_.clear();
  const int K = sched_.K;
  if (slot == 1 || sched_.m == K) {
    for (int i = 0; i < K; ++i) current_.push_back(i);
  } else {
    // Overdue nodes first, then a uniform fill up to m.
    std::vector<int> rest;
    for (int i = 0; i < K; ++i) {
      if (slot - last_delivery_[std::size_t(i)] > sched_.tau_max)
        current_.push_back(i);
      else
        rest.push_back(i);
    }
    Rng r(sched_.seed, 0x73756273u, std::uint64_t(slot));
    while (int(current_.size()) < sched_.m && !rest.empty()) {
      std::size_t k = std::size_t(r.uniform_int(0, long(rest.size()) - 1));
      current_.push_back(rest[k]);
      rest[k] = rest.back();
      rest.pop_back();
    }
    std::sort(current_.begin(), current_.end());
  }
  for (int i : current_) last_delivery_[std::size_t(i)] = slot;
  return current_;
}

}  // namespace dualsim
