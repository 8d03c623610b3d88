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

#include <cmath>
#include <stdexcept>
#include <string>

namespace dualsim {

// Step size sequence for the dual iteration. `constant` keeps eps_t = eps;
// `power_decay` uses eps_t = eps * t^(-alpha) with alpha in (1/2, 1), which
// satisfies sum eps_t = inf and sum eps_t^2 < inf. For incremental ring
// engines t is the cycle index.
struct StepSchedule {
  enum class Kind { kConstant, kPowerDecay };

  Kind kind = Kind::kConstant;
  double eps = 0.1;
  double alpha = 0.6;

  static StepSchedule Constant(double eps) {
    StepSchedule s;
    s.kind = Kind::kConstant;
    s.eps = eps;
    s.validate();
    return s;
  }

  static StepSchedule PowerDecay(double eps, double alpha) {
    StepSchedule s;
    s.kind = Kind::kPowerDecay;
    s.eps = eps;
    s.alpha = alpha;
    s.validate();
    return s;
  }

  void validate() const {
    if (eps <= 0.0) throw std::invalid_argument("step: eps must be > 0");
    if (kind == Kind::kPowerDecay && !(alpha > 0.5 && alpha < 1.0))
      throw std::invalid_argument("step: alpha must lie in (1/2, 1), got " +
                                  std::to_string(alpha));
  }

  double at(long t) const {
    if (kind == Kind::kConstant) return eps;
    return eps * std::pow(double(t), -alpha);
  }
};

}  // namespace dualsim
