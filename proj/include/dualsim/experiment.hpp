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

#include <iosfwd>
#include <string>
#include <vector>

#include "dualsim/config.hpp"
#include "dualsim/trace.hpp"

namespace dualsim {

// Plot table for one metric over a set of runs sharing a horizon: one row
// per sampled slot (t = cadence, 2*cadence, ...), one column per run, then
// the across-run mean and the 1.96 * se normal 95% half-width. Vector-valued
// metrics (feasibility_gap) emit per-component column groups run<k>_c<j>,
// mean_c<j>, ci95_c<j>. The header carries the column names and the config
// hash, so files are self-describing.
//
// Metrics: "lambda_norm" (from the iterate record), "feasibility_gap" (from
// the attached gap series), and any per-slot aux series attached to the
// traces ("primal_objective", "power", "power_avg", "sinr_u<j>", ...).
// Throws std::invalid_argument on an empty set, mixed horizons, or a metric
// some trace lacks.
void emit_plot_data(const std::vector<const RunTrace*>& traces,
                    const std::string& metric, long cadence,
                    const std::string& config_hash, std::ostream& out);

// Attaches the derived per-slot series used by plots and metrics: for
// resource-allocation runs "primal_objective" (objective at the running
// non-flagged allocation average), "feasibility_gap_c<j>" (running group
// mean of the summed constraint gradients, carried forward between group
// completions) and "lambda_norm"; beamforming runs get "power_avg" and
// "lambda_norm" on top of the series the wrapper already wrote.
void attach_run_series(RunTrace& trace, const RunConfig& cfg);

// One engine run for the configured problem, with series attached.
RunTrace run_configured(const RunConfig& cfg, std::uint64_t seed);

struct ExperimentOptions {
  std::string out_root;      // prefix for the config's output.dir
  std::string out_override;  // non-empty: use this directory verbatim
  int threads = 1;
  bool dry_run = false;      // validate and plan only, write nothing
};

struct AssertOutcome {
  std::string case_name;
  std::string name;
  double threshold = 0.0;
  double actual = 0.0;
  bool pass = false;
};

struct ExperimentResult {
  std::string out_dir;
  bool ok = true;  // all configured assertions passed (or none configured)
  std::vector<AssertOutcome> asserts;
  std::vector<std::string> notes;
};

// Runs every (case x seed) job and writes, under the output directory:
//   <case>/seed_<s>/trace.jsonl   chronological event records (jsonl format)
//   <case>/seed_<s>/metrics.json  scalar summaries of the run
//   <case>/plot_<metric>.csv      per-case tables over seeds (csv format)
//   plot_<metric>_by_case.csv     case means side by side (when > 1 case)
//   report.json                   aggregates and assertion outcomes
//   config_echo.conf              canonical config document
// Jobs are independent and run on `threads` workers; outputs are
// bit-identical for identical (config, seed) regardless of thread count.
//
// Configured assertions (assert.* keys) are evaluated per case on the run
// metrics: feasibility_gap_min <= every final gap component, seed-mean
// primal_objective >= primal_objective_min, every run's second-half /
// first-half max-||lambda|| ratio <= lambda_ratio_max, and seed-mean final
// average power <= power_avg_max.
ExperimentResult run_experiment(const RunConfig& cfg,
                                const ExperimentOptions& opts);

// Rebuilds report.json from the per-seed metrics stored under `dir` (the
// inverse of run_experiment's aggregation step). Returns the report text.
// Throws std::runtime_error on missing artifacts or mixed config hashes.
std::string analyze_dir(const std::string& dir);

}  // namespace dualsim
