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

#include "dualsim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dualsim/analysis.hpp"
#include "dualsim/beamforming.hpp"
#include "dualsim/engine.hpp"
#include "json.hpp"

namespace dualsim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Problem make_configured_problem(const RunConfig& cfg) {
  if (cfg.problem_kind == "quadratic") return make_quadratic(cfg.quadratic);
  if (cfg.problem_kind == "num") return make_num(cfg.num);
  return make_beamforming(cfg.beam);
}

// Running group means of the summed constraint gradients, resampled onto the
// slot axis: a group is one update row per node sharing an update index, and
// the value is carried forward between group completions.
std::vector<Vec> gap_series_by_slot(const RunTrace& tr) {
  const int K = tr.K;
  const int d = tr.d;
  std::vector<std::pair<long, Vec>> completions;  // (slot, running mean)
  Vec running(std::size_t(d), 0.0);
  long groups = 0;
  long cur_index = -1;
  int rows_in_group = 0;
  Vec group_sum(std::size_t(d), 0.0);
  for (long r = 0; r < tr.up_rows(); ++r) {
    if (tr.up_index[std::size_t(r)] != cur_index) {
      cur_index = tr.up_index[std::size_t(r)];
      rows_in_group = 0;
      std::fill(group_sum.begin(), group_sum.end(), 0.0);
    }
    Vec g = tr.up_g_row(r);
    add_into(group_sum, g);
    if (++rows_in_group == K) {
      ++groups;
      for (int j = 0; j < d; ++j)
        running[std::size_t(j)] +=
            (group_sum[std::size_t(j)] - running[std::size_t(j)]) /
            double(groups);
      completions.emplace_back(tr.up_slot[std::size_t(r)], running);
      rows_in_group = 0;
      cur_index = -1;
    }
  }
  std::vector<Vec> by_slot(std::size_t(tr.T), Vec(std::size_t(d), 0.0));
  if (completions.empty()) return by_slot;
  std::size_t p = 0;
  Vec cur = completions.front().second;  // carry the first value back
  for (long t = 1; t <= tr.T; ++t) {
    while (p < completions.size() && completions[p].first <= t) {
      cur = completions[p].second;
      ++p;
    }
    by_slot[std::size_t(t - 1)] = cur;
  }
  return by_slot;
}

// Drops the bulky per-event columns once metrics and trace files are
// written; plots only need the iterate record and the aux series.
void slim_trace(RunTrace& tr) {
  tr.alloc_slot.clear();
  tr.alloc_node.clear();
  tr.alloc_dual_index.clear();
  tr.alloc_dual_recv_slot.clear();
  tr.alloc_pi.clear();
  tr.alloc_flagged.clear();
  tr.alloc_x.clear();
  tr.alloc_p.clear();
  tr.alloc_g.clear();
  tr.up_slot.clear();
  tr.up_index.clear();
  tr.up_node.clear();
  tr.up_tau.clear();
  tr.up_delta.clear();
  tr.up_state_slot.clear();
  tr.up_dual_index.clear();
  tr.up_eps.clear();
  tr.up_g.clear();
  tr.up_step_norm.clear();
  tr.slot_step_norm.clear();
  tr.lambda_cycle.clear();
}

json to_json(const Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

json run_metrics(const RunConfig& cfg, const std::string& case_name,
                 std::uint64_t seed, const RunTrace& tr,
                 const std::string& parent_hash) {
  json m;
  m["case"] = case_name;
  m["seed"] = seed;
  m["config_hash"] = parent_hash;
  m["engine"] = tr.engine;
  m["problem"] = tr.problem;
  m["T"] = tr.T;

  Vec lam_final = tr.final_lambda();
  m["final_lambda"] = to_json(lam_final);
  m["final_lambda_norm"] = norm2(lam_final);

  double first_half = 0.0, second_half = 0.0;
  for (long t = 1; t <= tr.T + 1; ++t) {
    double n = norm2(tr.lambda_at_slot(t));
    if (t <= (tr.T + 1) / 2)
      first_half = std::max(first_half, n);
    else
      second_half = std::max(second_half, n);
  }
  double ratio = 1.0;
  if (first_half > 0.0)
    ratio = second_half / first_half;
  else if (second_half > 0.0)
    ratio = std::numeric_limits<double>::max();
  m["lambda_ratio"] = ratio;

  double flagged = 0.0;
  for (std::uint8_t f : tr.alloc_flagged) flagged += f ? 1.0 : 0.0;
  m["flagged_frac"] =
      tr.alloc_rows() > 0 ? flagged / double(tr.alloc_rows()) : 0.0;

  if (tr.up_rows() > 0) {
    DelayStats ds = summarize_delays(tr);
    m["delay"] = {{"mean_pi", ds.mean_pi},     {"max_pi", ds.max_pi},
                  {"mean_delta", ds.mean_delta}, {"max_delta", ds.max_delta},
                  {"mean_tau", ds.mean_tau},   {"max_tau", ds.max_tau}};
  }

  if (cfg.problem_kind == "beamforming") {
    const Vec& pavg = tr.aux.at("power_avg");
    m["power_avg"] = pavg.empty() ? 0.0 : pavg.back();
  } else {
    Problem prob = make_configured_problem(cfg);
    PrimalAverage pa = running_primal_average(tr, prob, tr.T);
    m["primal_objective"] = pa.objective;
    std::vector<Vec> gaps = feasibility_gap_series(tr);
    m["feasibility_gap"] =
        gaps.empty() ? json::array() : to_json(gaps.back());
    if (cfg.dstar_mode == "fixed") {
      Estimate est = estimate_dual(prob, lam_final, cfg.mc_samples,
                                   seed ^ 0x4d43444dULL);
      m["dual_mc_mean"] = est.mean;
      m["dual_mc_se"] = est.se;
      m["dstar_gap"] = std::abs(est.mean - cfg.dstar_value);
    }
  }
  return m;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

void write_trace_jsonl(const std::string& path, const RunTrace& tr,
                       const std::string& hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);

  json hdr;
  hdr["kind"] = "header";
  hdr["config_hash"] = hash;
  hdr["engine"] = tr.engine;
  hdr["problem"] = tr.problem;
  hdr["K"] = tr.K;
  hdr["d"] = tr.d;
  hdr["x_dim"] = tr.x_dim;
  hdr["p_dim"] = tr.p_dim;
  hdr["T"] = tr.T;
  hdr["seed"] = tr.seed;
  hdr["tau_max"] = tr.tau_max;
  out << hdr.dump() << '\n';

  const bool batch_iterates =
      tr.engine == "synchronous" || tr.engine == "async_fc";
  long up_ptr = 0;
  for (long t = 1; t <= tr.T; ++t) {
    for (int i = 0; i < tr.K; ++i) {
      long r = (t - 1) * tr.K + i;
      if (r >= tr.alloc_rows()) break;
      json rec;
      rec["kind"] = "alloc";
      rec["t"] = t;
      rec["node"] = tr.alloc_node[std::size_t(r)];
      rec["cycle"] = tr.alloc_dual_index[std::size_t(r)];
      rec["pi"] = tr.alloc_pi[std::size_t(r)];
      rec["delta"] = nullptr;
      rec["tau"] = nullptr;
      rec["flagged"] = tr.alloc_flagged[std::size_t(r)] != 0;
      long idx = tr.alloc_dual_index[std::size_t(r)];
      if (batch_iterates && idx >= 1 && idx <= tr.T + 1)
        rec["lambda_snapshot"] = to_json(tr.lambda_at_slot(idx));
      else
        rec["lambda_snapshot"] = nullptr;
      rec["g"] = to_json(tr.alloc_g_row(r));
      rec["x"] = to_json(tr.alloc_x_row(r));
      rec["p"] = to_json(tr.alloc_p_row(r));
      out << rec.dump() << '\n';
    }
    while (up_ptr < tr.up_rows() && tr.up_slot[std::size_t(up_ptr)] == t) {
      long r = up_ptr;
      json rec;
      rec["kind"] = "update";
      rec["t"] = t;
      rec["node"] = tr.up_node[std::size_t(r)];
      rec["cycle"] = tr.up_index[std::size_t(r)];
      rec["pi"] = nullptr;
      rec["delta"] = tr.up_delta[std::size_t(r)];
      rec["tau"] = tr.up_tau[std::size_t(r)];
      rec["eps"] = tr.up_eps[std::size_t(r)];
      rec["lambda_snapshot"] = nullptr;
      rec["g"] = to_json(tr.up_g_row(r));
      rec["x"] = nullptr;
      rec["p"] = nullptr;
      out << rec.dump() << '\n';
      ++up_ptr;
    }
  }
}

// Metric values per slot as a T x m matrix (m = 1 for scalar metrics).
std::vector<Vec> metric_matrix(const RunTrace& tr, const std::string& metric) {
  if (metric == "lambda_norm") {
    std::vector<Vec> rows(std::size_t(tr.T));
    for (long t = 1; t <= tr.T; ++t)
      rows[std::size_t(t - 1)] = {norm2(tr.lambda_at_slot(t))};
    return rows;
  }
  if (metric == "feasibility_gap") {
    std::vector<const Vec*> comps;
    for (int j = 0;; ++j) {
      auto it = tr.aux.find("feasibility_gap_c" + std::to_string(j));
      if (it == tr.aux.end()) break;
      comps.push_back(&it->second);
    }
    if (comps.empty())
      throw std::invalid_argument(
          "emit_plot_data: trace has no feasibility_gap series");
    std::vector<Vec> rows(std::size_t(tr.T), Vec(comps.size(), 0.0));
    for (long t = 1; t <= tr.T; ++t)
      for (std::size_t j = 0; j < comps.size(); ++j)
        rows[std::size_t(t - 1)][j] = (*comps[j])[std::size_t(t - 1)];
    return rows;
  }
  auto it = tr.aux.find(metric);
  if (it == tr.aux.end() || long(it->second.size()) != tr.T) {
    std::string avail = "lambda_norm";
    for (const auto& [k, v] : tr.aux)
      if (long(v.size()) == tr.T) avail += ", " + k;
    throw std::invalid_argument("emit_plot_data: metric '" + metric +
                                "' not available (have: " + avail + ")");
  }
  std::vector<Vec> rows(std::size_t(tr.T));
  for (long t = 1; t <= tr.T; ++t)
    rows[std::size_t(t - 1)] = {it->second[std::size_t(t - 1)]};
  return rows;
}

const std::vector<std::string>& metric_list(const RunConfig& cfg) {
  static const std::vector<std::string> alloc_metrics = {
      "primal_objective", "feasibility_gap", "lambda_norm"};
  static const std::vector<std::string> beam_metrics = {"power", "power_avg",
                                                        "lambda_norm"};
  return cfg.problem_kind == "beamforming" ? beam_metrics : alloc_metrics;
}

struct CaseMetrics {
  std::string name;
  std::vector<json> runs;  // one metrics object per seed, in seed order
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / double(v.size() - 1));
}

// Aggregates scalar fields present in every run of a case.
json aggregate_case(const CaseMetrics& cm) {
  json agg;
  static const char* kFields[] = {"final_lambda_norm", "primal_objective",
                                  "power_avg", "flagged_frac", "lambda_ratio",
                                  "dual_mc_mean", "dstar_gap"};
  for (const char* f : kFields) {
    std::vector<double> vals;
    bool all = true;
    for (const json& r : cm.runs) {
      if (!r.contains(f) || !r[f].is_number()) {
        all = false;
        break;
      }
      vals.push_back(r[f].get<double>());
    }
    if (all && !vals.empty())
      agg[f] = {{"mean", mean_of(vals)}, {"sd", sd_of(vals)}};
  }
  return agg;
}

std::pair<json, std::vector<AssertOutcome>> build_report(
    const RunConfig& cfg, const std::vector<CaseMetrics>& cases) {
  json rep;
  rep["config_hash"] = config_hash(cfg);
  rep["cases"] = json::object();
  for (const CaseMetrics& cm : cases) {
    json c;
    c["runs"] = json::array();
    for (const json& r : cm.runs) c["runs"].push_back(r);
    c["aggregate"] = aggregate_case(cm);
    rep["cases"][cm.name] = std::move(c);
  }

  std::vector<AssertOutcome> outcomes;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const CaseMetrics& cm : cases) {
    for (const auto& [name, thr] : cfg.assertions) {
      AssertOutcome o;
      o.case_name = cm.name;
      o.name = name;
      o.threshold = thr;
      o.actual = nan;
      o.pass = false;
      if (name == "feasibility_gap_min") {
        double worst = std::numeric_limits<double>::infinity();
        bool have = !cm.runs.empty();
        for (const json& r : cm.runs) {
          if (!r.contains("feasibility_gap") || r["feasibility_gap"].empty()) {
            have = false;
            break;
          }
          for (const auto& v : r["feasibility_gap"])
            worst = std::min(worst, v.get<double>());
        }
        if (have) {
          o.actual = worst;
          o.pass = worst >= thr;
        }
      } else if (name == "primal_objective_min") {
        std::vector<double> vals;
        for (const json& r : cm.runs)
          if (r.contains("primal_objective"))
            vals.push_back(r["primal_objective"].get<double>());
        if (vals.size() == cm.runs.size() && !vals.empty()) {
          o.actual = mean_of(vals);
          o.pass = o.actual >= thr;
        }
      } else if (name == "lambda_ratio_max") {
        double worst = 0.0;
        bool have = !cm.runs.empty();
        for (const json& r : cm.runs) {
          if (!r.contains("lambda_ratio")) {
            have = false;
            break;
          }
          worst = std::max(worst, r["lambda_ratio"].get<double>());
        }
        if (have) {
          o.actual = worst;
          o.pass = worst <= thr;
        }
      } else if (name == "power_avg_max") {
        std::vector<double> vals;
        for (const json& r : cm.runs)
          if (r.contains("power_avg"))
            vals.push_back(r["power_avg"].get<double>());
        if (vals.size() == cm.runs.size() && !vals.empty()) {
          o.actual = mean_of(vals);
          o.pass = o.actual <= thr;
        }
      }
      outcomes.push_back(o);
    }
  }

  json ja = json::array();
  bool all_ok = true;
  for (const AssertOutcome& o : outcomes) {
    ja.push_back({{"case", o.case_name},
                  {"name", o.name},
                  {"threshold", o.threshold},
                  {"actual", o.actual},
                  {"pass", o.pass}});
    all_ok = all_ok && o.pass;
  }
  rep["asserts"] = std::move(ja);
  rep["ok"] = all_ok;
  return {std::move(rep), std::move(outcomes)};
}

}  // namespace

void attach_run_series(RunTrace& tr, const RunConfig& cfg) {
  Vec ln(std::size_t(tr.T), 0.0);
  for (long t = 1; t <= tr.T; ++t)
    ln[std::size_t(t - 1)] = norm2(tr.lambda_at_slot(t));
  tr.aux["lambda_norm"] = std::move(ln);

  if (cfg.problem_kind == "beamforming") {
    const Vec& power = tr.aux.at("power");
    Vec avg(power.size(), 0.0);
    double sum = 0.0;
    for (std::size_t t = 0; t < power.size(); ++t) {
      sum += power[t];
      avg[t] = sum / double(t + 1);
    }
    tr.aux["power_avg"] = std::move(avg);
    return;
  }

  Problem prob = make_configured_problem(cfg);
  const int K = tr.K;
  std::vector<Vec> sums(static_cast<std::size_t>(K));
  std::vector<long> counts(std::size_t(K), 0);
  for (int i = 0; i < K; ++i)
    sums[std::size_t(i)] = Vec(std::size_t(tr.x_dim), 0.0);
  Vec series(std::size_t(tr.T), 0.0);
  Vec xbar(std::size_t(tr.x_dim), 0.0);
  for (long t = 1; t <= tr.T; ++t) {
    for (int i = 0; i < K; ++i) {
      long r = (t - 1) * K + i;
      if (tr.alloc_flagged[std::size_t(r)]) continue;
      Vec x = tr.alloc_x_row(r);
      add_into(sums[std::size_t(i)], x);
      ++counts[std::size_t(i)];
    }
    double obj = 0.0;
    for (int i = 0; i < K; ++i) {
      if (counts[std::size_t(i)] == 0) {
        std::fill(xbar.begin(), xbar.end(), 0.0);
      } else {
        for (int k = 0; k < tr.x_dim; ++k)
          xbar[std::size_t(k)] = sums[std::size_t(i)][std::size_t(k)] /
                                 double(counts[std::size_t(i)]);
      }
      obj += prob.node(i).objective(xbar);
    }
    series[std::size_t(t - 1)] = obj;
  }
  tr.aux["primal_objective"] = std::move(series);

  std::vector<Vec> gaps = gap_series_by_slot(tr);
  for (int j = 0; j < tr.d; ++j) {
    Vec comp(std::size_t(tr.T), 0.0);
    for (long t = 1; t <= tr.T; ++t)
      comp[std::size_t(t - 1)] = gaps[std::size_t(t - 1)][std::size_t(j)];
    tr.aux["feasibility_gap_c" + std::to_string(j)] = std::move(comp);
  }
}

RunTrace run_configured(const RunConfig& cfg, std::uint64_t seed) {
  RunTrace tr;
  if (cfg.problem_kind == "beamforming") {
    BeamEngine eng = BeamEngine::kSynchronous;
    if (cfg.engine_kind == "async_fc") eng = BeamEngine::kAsyncFc;
    if (cfg.engine_kind == "aisdd") eng = BeamEngine::kAisdd;
    DelaySchedule delay = cfg.has_delay ? cfg.delay : DelaySchedule();
    tr = run_beamforming(cfg.beam, eng, cfg.beam_baseline, cfg.step, delay,
                         cfg.T, seed);
  } else {
    Problem prob = make_configured_problem(cfg);
    EngineOptions opts;
    opts.step = cfg.step;
    opts.T = cfg.T;
    opts.seed = seed;
    if (cfg.engine_kind == "synchronous")
      tr = run_synchronous(prob, opts);
    else if (cfg.engine_kind == "async_fc")
      tr = run_async_fc(prob, cfg.delay, opts);
    else
      tr = run_aisdd(prob, cfg.delay, opts);
  }
  attach_run_series(tr, cfg);
  return tr;
}

void emit_plot_data(const std::vector<const RunTrace*>& traces,
                    const std::string& metric, long cadence,
                    const std::string& config_hash, std::ostream& out) {
  if (traces.empty())
    throw std::invalid_argument("emit_plot_data: empty trace set");
  if (cadence < 1)
    throw std::invalid_argument("emit_plot_data: cadence must be >= 1");
  const long T = traces.front()->T;
  for (const RunTrace* tr : traces)
    if (tr->T != T)
      throw std::invalid_argument(
          "emit_plot_data: traces have mixed horizons (" + std::to_string(T) +
          " vs " + std::to_string(tr->T) + ")");

  std::vector<std::vector<Vec>> mats;
  mats.reserve(traces.size());
  for (const RunTrace* tr : traces) mats.push_back(metric_matrix(*tr, metric));
  const std::size_t m = mats.front().front().size();
  for (const auto& mat : mats)
    if (mat.front().size() != m)
      throw std::invalid_argument(
          "emit_plot_data: traces disagree on the metric dimension");

  out << "# config_hash=" << config_hash << "\n";
  out << "# metric=" << metric << "\n";
  out << "# runs:";
  for (std::size_t k = 0; k < traces.size(); ++k)
    out << " run_" << (k + 1) << "=seed " << traces[k]->seed
        << (k + 1 < traces.size() ? "," : "");
  out << "\n";

  auto col_suffix = [&](std::size_t j) {
    return m == 1 ? std::string() : "_c" + std::to_string(j);
  };
  out << "t";
  for (std::size_t k = 0; k < traces.size(); ++k)
    for (std::size_t j = 0; j < m; ++j)
      out << ",run_" << (k + 1) << col_suffix(j);
  for (std::size_t j = 0; j < m; ++j) out << ",mean" << col_suffix(j);
  for (std::size_t j = 0; j < m; ++j) out << ",ci95" << col_suffix(j);
  out << "\n";

  const std::size_t S = traces.size();
  for (long t = cadence; t <= T; t += cadence) {
    out << t;
    for (std::size_t k = 0; k < S; ++k)
      for (std::size_t j = 0; j < m; ++j)
        out << "," << fmt(mats[k][std::size_t(t - 1)][j]);
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> vals(S);
      for (std::size_t k = 0; k < S; ++k)
        vals[k] = mats[k][std::size_t(t - 1)][j];
      out << "," << fmt(mean_of(vals));
    }
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> vals(S);
      for (std::size_t k = 0; k < S; ++k)
        vals[k] = mats[k][std::size_t(t - 1)][j];
      double ci = S > 1 ? 1.96 * sd_of(vals) / std::sqrt(double(S)) : 0.0;
      out << "," << fmt(ci);
    }
    out << "\n";
  }
}

ExperimentResult run_experiment(const RunConfig& cfg,
                                const ExperimentOptions& opts) {
  ExperimentResult res;
  res.notes = config_notes(cfg);

  auto cases = expand_cases(cfg);
  std::string dir = !opts.out_override.empty()
                        ? opts.out_override
                        : (opts.out_root.empty()
                               ? cfg.out_dir
                               : opts.out_root + "/" + cfg.out_dir);
  res.out_dir = dir;
  res.notes.push_back("output directory: " + dir);

  struct Job {
    std::size_t case_idx;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cases.size(); ++c)
    for (std::uint64_t s : cfg.seeds) jobs.push_back({c, s});

  if (opts.dry_run) {
    res.notes.push_back("dry run: " + std::to_string(jobs.size()) +
                        " job(s) validated, nothing written");
    return res;
  }

  const std::string parent_hash = config_hash(cfg);
  for (const auto& [name, ccfg] : cases) {
    (void)ccfg;
    for (std::uint64_t s : cfg.seeds)
      fs::create_directories(fs::path(dir) / name /
                             ("seed_" + std::to_string(s)));
  }

  std::vector<json> metrics(jobs.size());
  std::vector<RunTrace> traces(jobs.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::string> job_errors(jobs.size());
  auto worker = [&]() {
    for (std::size_t j = next.fetch_add(1); j < jobs.size();
         j = next.fetch_add(1)) {
      const Job& job = jobs[j];
      const auto& [case_name, ccfg] = cases[job.case_idx];
      try {
        RunTrace tr = run_configured(ccfg, job.seed);
        json m = run_metrics(ccfg, case_name, job.seed, tr, parent_hash);
        std::string sdir = dir + "/" + case_name + "/seed_" +
                           std::to_string(job.seed);
        if (cfg.want_jsonl)
          write_trace_jsonl(sdir + "/trace.jsonl", tr, parent_hash);
        write_text(sdir + "/metrics.json", m.dump(2) + "\n");
        slim_trace(tr);
        metrics[j] = std::move(m);
        traces[j] = std::move(tr);
      } catch (const std::exception& e) {
        job_errors[j] = std::string("case '") + case_name + "' seed " +
                        std::to_string(job.seed) + ": " + e.what();
      }
    }
  };
  int n_threads = std::max(1, std::min<int>(opts.threads, int(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const std::string& e : job_errors)
    if (!e.empty()) throw std::runtime_error("run failed: " + e);

  if (cfg.want_csv) {
    const std::size_t S = cfg.seeds.size();
    for (std::size_t c = 0; c < cases.size(); ++c) {
      std::vector<const RunTrace*> ptrs;
      for (std::size_t s = 0; s < S; ++s) ptrs.push_back(&traces[c * S + s]);
      for (const std::string& metric : metric_list(cases[c].second)) {
        std::ostringstream ss;
        emit_plot_data(ptrs, metric, cases[c].second.cadence, parent_hash, ss);
        write_text(dir + "/" + cases[c].first + "/plot_" + metric + ".csv",
                   ss.str());
      }
    }
    if (cases.size() > 1) {
      // case means side by side, one file per metric
      for (const std::string& metric : metric_list(cases.front().second)) {
        std::ostringstream ss;
        ss << "# config_hash=" << parent_hash << "\n# metric=" << metric
           << " (case means)\n";
        std::vector<std::vector<Vec>> case_mean(cases.size());
        bool have_all = true;
        for (std::size_t c = 0; c < cases.size() && have_all; ++c) {
          std::vector<std::vector<Vec>> mats;
          try {
            for (std::size_t s = 0; s < S; ++s) {
              if (traces[c * S + s].T != cfg.T)
                throw std::invalid_argument("mixed horizons across cases");
              mats.push_back(metric_matrix(traces[c * S + s], metric));
            }
          } catch (const std::invalid_argument&) {
            have_all = false;
            break;
          }
          case_mean[c].assign(std::size_t(cfg.T),
                              Vec(mats.front().front().size(), 0.0));
          for (long t = 1; t <= cfg.T; ++t)
            for (std::size_t j = 0; j < mats.front().front().size(); ++j) {
              double sum = 0.0;
              for (std::size_t s = 0; s < S; ++s)
                sum += mats[s][std::size_t(t - 1)][j];
              case_mean[c][std::size_t(t - 1)][j] = sum / double(S);
            }
        }
        if (!have_all) continue;
        const std::size_t m = case_mean.front().front().size();
        ss << "t";
        for (const auto& [name, ccfg] : cases) {
          (void)ccfg;
          for (std::size_t j = 0; j < m; ++j)
            ss << "," << name
               << (m == 1 ? std::string() : "_c" + std::to_string(j));
        }
        ss << "\n";
        for (long t = cfg.cadence; t <= cfg.T; t += cfg.cadence) {
          ss << t;
          for (std::size_t c = 0; c < cases.size(); ++c)
            for (std::size_t j = 0; j < m; ++j)
              ss << "," << fmt(case_mean[c][std::size_t(t - 1)][j]);
          ss << "\n";
        }
        write_text(dir + "/plot_" + metric + "_by_case.csv", ss.str());
      }
    }
  }

  write_text(dir + "/config_echo.conf", emit_config(cfg));

  std::vector<CaseMetrics> cms;
  {
    // report.json lists runs in ascending seed order so that analyze_dir
    // rebuilds it byte-identically
    const std::size_t S = cfg.seeds.size();
    std::vector<std::size_t> order(S);
    for (std::size_t s = 0; s < S; ++s) order[s] = s;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return cfg.seeds[a] < cfg.seeds[b];
    });
    for (std::size_t c = 0; c < cases.size(); ++c) {
      CaseMetrics cm;
      cm.name = cases[c].first;
      for (std::size_t s : order) cm.runs.push_back(metrics[c * S + s]);
      cms.push_back(std::move(cm));
    }
  }
  auto [rep, outcomes] = build_report(cfg, cms);
  write_text(dir + "/report.json", rep.dump(2) + "\n");
  res.asserts = std::move(outcomes);
  res.ok = true;
  for (const AssertOutcome& o : res.asserts) res.ok = res.ok && o.pass;
  return res;
}

std::string analyze_dir(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "config_echo.conf");
  if (!in)
    throw std::runtime_error("analyze: missing " + dir + "/config_echo.conf");
  std::ostringstream ss;
  ss << in.rdbuf();
  ConfigParse parsed = parse_config_text(ss.str());
  if (!parsed.ok()) {
    std::string msg = "analyze: stored config no longer parses:";
    for (const auto& e : parsed.errors) msg += "\n  - " + e;
    throw std::runtime_error(msg);
  }
  const RunConfig& cfg = parsed.config;
  const std::string expect_hash = config_hash(cfg);

  std::vector<std::string> case_dirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) case_dirs.push_back(entry.path().filename());
  std::sort(case_dirs.begin(), case_dirs.end());

  std::vector<CaseMetrics> cms;
  for (const std::string& cname : case_dirs) {
    std::vector<std::pair<std::uint64_t, json>> runs;
    for (const auto& entry : fs::directory_iterator(fs::path(dir) / cname)) {
      if (!entry.is_directory()) continue;
      std::string leaf = entry.path().filename();
      if (leaf.rfind("seed_", 0) != 0) continue;
      std::ifstream mf(entry.path() / "metrics.json");
      if (!mf)
        throw std::runtime_error("analyze: missing metrics.json under " +
                                 std::string(entry.path()));
      json m = json::parse(mf);
      if (m.value("config_hash", std::string()) != expect_hash)
        throw std::runtime_error(
            "analyze: mixed config hashes under " + dir +
            " (stale artifacts from a different configuration?)");
      runs.emplace_back(std::stoull(leaf.substr(5)), std::move(m));
    }
    if (runs.empty()) continue;
    std::sort(runs.begin(), runs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    CaseMetrics cm;
    cm.name = cname;
    for (auto& [s, m] : runs) cm.runs.push_back(std::move(m));
    cms.push_back(std::move(cm));
  }
  if (cms.empty())
    throw std::runtime_error("analyze: no run artifacts under " + dir);

  auto [rep, outcomes] = build_report(cfg, cms);
  (void)outcomes;
  std::string text = rep.dump(2) + "\n";
  write_text((fs::path(dir) / "report.json").string(), text);
  return text;
}

}  // namespace dualsim
