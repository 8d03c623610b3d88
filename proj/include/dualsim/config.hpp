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

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualsim/beamforming.hpp"
#include "dualsim/delay.hpp"
#include "dualsim/problems.hpp"
#include "dualsim/step.hpp"
#include "dualsim/types.hpp"

namespace dualsim {

// Experiment documents are flat `section.key = value` lines. `#` starts a
// comment, blank lines are ignored, keys must be unique, and unknown keys
// are errors (strict mode). Values are scalars or comma-separated lists.
//
// Sections:
//   problem.kind                       quadratic | num | beamforming
//   problem.quadratic.{a,b,x_max,noise_amp}
//   problem.num.{K,w,r_min,r_max,p_max,P_max,h_max}
//   problem.beamforming.{B,N,users_per_cell,sigma2,gamma_db,gamma_linear,
//                        rho,clip,pg_iters,pg_tol,baseline}
//   engine.{kind,T,seeds}              kind: synchronous | async_fc | aisdd
//   engine.step.{kind,eps,alpha}       kind: constant | power_decay
//   delay.{kind,c,m,tau_max,seed,min_updates,max_updates}
//   analysis.{cadence,mc_samples,dstar_mode,dstar_value}
//   output.{dir,formats}               formats subset of {csv,jsonl}
//   case.<name> = key=value, key=value, ...   (named run variants)
//   assert.{feasibility_gap_min,primal_objective_min,lambda_ratio_max,
//           power_avg_max}
//
// gamma_db is converted to linear scale at parse time and the result is
// echoed back into the document as problem.beamforming.gamma_linear; a
// user-supplied gamma_linear must agree with the conversion.
struct CaseOverride {
  std::string name;
  std::map<std::string, std::string> overrides;

  bool operator==(const CaseOverride& o) const {
    return name == o.name && overrides == o.overrides;
  }
};

struct RunConfig {
  // Canonical document: defaults filled, values re-serialized in canonical
  // form, keys sorted. Two configs are equal iff these maps are equal.
  std::map<std::string, std::string> kv;

  // Typed views derived from kv.
  std::string problem_kind;
  QuadraticSpec quadratic;
  NumSpec num;
  BeamSpec beam;
  BeamBaseline beam_baseline = BeamBaseline::kNone;
  double beam_gamma_db = 10.0;

  std::string engine_kind;
  StepSchedule step;
  long T = 1000;
  std::vector<std::uint64_t> seeds = {1};

  bool has_delay = false;
  DelaySchedule delay;

  long cadence = 1;
  long mc_samples = 2000;
  std::string dstar_mode = "none";  // none | fixed
  double dstar_value = 0.0;

  std::string out_dir = "out";
  bool want_csv = true;
  bool want_jsonl = true;

  std::vector<CaseOverride> cases;            // empty -> one unnamed case
  std::map<std::string, double> assertions;   // assert.<name> -> threshold

  int problem_K() const;  // node count of the configured problem

  bool operator==(const RunConfig& o) const { return kv == o.kv; }
  bool operator!=(const RunConfig& o) const { return !(*this == o); }
};

struct ConfigParse {
  RunConfig config;                 // valid only when errors is empty
  std::vector<std::string> errors;  // every problem found, not just the first

  bool ok() const { return errors.empty(); }
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

// Parse and validate a whole document. All validation errors are collected;
// the returned config is usable only when `ok()`.
ConfigParse parse_config_text(const std::string& text);
ConfigParse parse_config_file(const std::string& path);

// Throwing convenience wrapper: returns the validated config or throws
// ConfigError carrying the full error list.
RunConfig parse_config(const std::string& path);

// Canonical document emission. parse_config_text(emit_config(c)).config == c.
std::string emit_config(const RunConfig& c);

// FNV-1a over the canonical document, as fixed-width hex.
std::string config_hash(const RunConfig& c);

// Re-parse the base document with a set of key overrides applied (used for
// case expansion and CLI sweeps). Errors are prefixed with `label`.
ConfigParse apply_overrides(const RunConfig& base,
                            const std::map<std::string, std::string>& overrides,
                            const std::string& label);

// Named concrete variants of a config: each case override applied and
// revalidated, with case.* keys stripped from the variants. A config
// without cases expands to {"run", config-without-case-keys}.
std::vector<std::pair<std::string, RunConfig>> expand_cases(const RunConfig& c);

// Human-readable notes produced at parse time (unit conversions and filled
// defaults worth surfacing), e.g. the dB -> linear echo.
std::vector<std::string> config_notes(const RunConfig& c);

}  // namespace dualsim
