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

#include "dualsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace dualsim {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::string canon_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e && std::isfinite(out);
}

bool parse_long(const std::string& s, long& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

const std::set<std::string>& key_registry() {
  static const std::set<std::string> keys = {
      "problem.kind",
      "problem.quadratic.a",
      "problem.quadratic.b",
      "problem.quadratic.x_max",
      "problem.quadratic.noise_amp",
      "problem.num.K",
      "problem.num.w",
      "problem.num.r_min",
      "problem.num.r_max",
      "problem.num.p_max",
      "problem.num.P_max",
      "problem.num.h_max",
      "problem.beamforming.B",
      "problem.beamforming.N",
      "problem.beamforming.users_per_cell",
      "problem.beamforming.sigma2",
      "problem.beamforming.gamma_db",
      "problem.beamforming.gamma_linear",
      "problem.beamforming.rho",
      "problem.beamforming.clip",
      "problem.beamforming.pg_iters",
      "problem.beamforming.pg_tol",
      "problem.beamforming.baseline",
      "engine.kind",
      "engine.T",
      "engine.seeds",
      "engine.step.kind",
      "engine.step.eps",
      "engine.step.alpha",
      "delay.kind",
      "delay.c",
      "delay.m",
      "delay.tau_max",
      "delay.seed",
      "delay.min_updates",
      "delay.max_updates",
      "analysis.cadence",
      "analysis.mc_samples",
      "analysis.dstar_mode",
      "analysis.dstar_value",
      "output.dir",
      "output.formats",
  };
  return keys;
}

const std::set<std::string>& assert_names() {
  static const std::set<std::string> names = {
      "feasibility_gap_min",
      "primal_objective_min",
      "lambda_ratio_max",
      "power_avg_max",
  };
  return names;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  return true;
}

struct RawDoc {
  std::map<std::string, std::string> kv;
  std::vector<std::string> errors;
};

RawDoc tokenize(const std::string& text) {
  RawDoc doc;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      doc.errors.push_back("line " + std::to_string(lineno) +
                           ": expected 'key = value', got '" + line + "'");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      doc.errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (doc.kv.count(key)) {
      doc.errors.push_back("line " + std::to_string(lineno) +
                           ": duplicate key '" + key + "'");
      continue;
    }
    doc.kv[key] = value;
  }
  return doc;
}

// Reads raw keys with type checking and error collection, echoing canonical
// values (including filled defaults) into the config's kv map.
struct Builder {
  std::map<std::string, std::string> raw;
  std::set<std::string> consumed;
  RunConfig cfg;
  std::vector<std::string> errors;

  void err(const std::string& m) { errors.push_back(m); }

  bool has(const std::string& key) const { return raw.count(key) != 0; }

  std::optional<std::string> read(const std::string& key) {
    auto it = raw.find(key);
    if (it == raw.end()) return std::nullopt;
    consumed.insert(key);
    return it->second;
  }

  void echo(const std::string& key, const std::string& canon) {
    cfg.kv[key] = canon;
  }

  std::string take_enum(const std::string& key, const std::string& def,
                        const std::set<std::string>& allowed, bool required) {
    auto v = read(key);
    std::string val = v ? *v : def;
    if (!v && required) {
      err("missing required key '" + key + "'");
      return def;
    }
    if (!allowed.count(val)) {
      std::string opts;
      for (const auto& a : allowed) opts += (opts.empty() ? "" : " | ") + a;
      err(key + ": expected one of {" + opts + "}, got '" + val + "'");
      return def;
    }
    echo(key, val);
    return val;
  }

  double take_double(const std::string& key, double def) {
    auto v = read(key);
    double out = def;
    if (v && !parse_double(*v, out)) {
      err(key + ": expected a finite number, got '" + *v + "'");
      out = def;
    }
    echo(key, canon_double(out));
    return out;
  }

  long take_long(const std::string& key, long def) {
    auto v = read(key);
    long out = def;
    if (v && !parse_long(*v, out)) {
      err(key + ": expected an integer, got '" + *v + "'");
      out = def;
    }
    echo(key, std::to_string(out));
    return out;
  }

  std::uint64_t take_u64(const std::string& key, std::uint64_t def) {
    auto v = read(key);
    std::uint64_t out = def;
    if (v && !parse_u64(*v, out)) {
      err(key + ": expected an unsigned integer, got '" + *v + "'");
      out = def;
    }
    echo(key, std::to_string(out));
    return out;
  }

  Vec take_dlist(const std::string& key, const Vec& def) {
    auto v = read(key);
    if (!v) {
      if (!def.empty()) echo(key, join_dlist(def));
      return def;
    }
    Vec out;
    for (const std::string& tok : split(*v, ',')) {
      double d = 0.0;
      if (tok.empty() || !parse_double(tok, d)) {
        err(key + ": expected a comma-separated list of numbers, got '" + *v +
            "'");
        if (!def.empty()) echo(key, join_dlist(def));
        return def;
      }
      out.push_back(d);
    }
    echo(key, join_dlist(out));
    return out;
  }

  std::vector<std::uint64_t> take_u64list(const std::string& key,
                                          std::vector<std::uint64_t> def) {
    auto v = read(key);
    if (!v) {
      echo(key, join_u64list(def));
      return def;
    }
    std::vector<std::uint64_t> out;
    for (const std::string& tok : split(*v, ',')) {
      std::uint64_t u = 0;
      if (tok.empty() || !parse_u64(tok, u)) {
        err(key + ": expected a comma-separated list of unsigned integers, "
                  "got '" + *v + "'");
        echo(key, join_u64list(def));
        return def;
      }
      out.push_back(u);
    }
    echo(key, join_u64list(out));
    return out;
  }

  static std::string join_dlist(const Vec& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? "," : "") + canon_double(v[i]);
    return s;
  }

  static std::string join_u64list(const std::vector<std::uint64_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  }

  void inapplicable(const std::string& key, const std::string& why) {
    if (has(key)) {
      consumed.insert(key);
      err(key + " is not applicable: " + why);
    }
  }

  // ---- sections ----

  void build_problem() {
    cfg.problem_kind = take_enum("problem.kind", "quadratic",
                                 {"quadratic", "num", "beamforming"}, true);
    const std::string why =
        "problem.kind = " + cfg.problem_kind + " was selected";
    if (cfg.problem_kind != "quadratic")
      for (const char* k : {"problem.quadratic.a", "problem.quadratic.b",
                            "problem.quadratic.x_max",
                            "problem.quadratic.noise_amp"})
        inapplicable(k, why);
    if (cfg.problem_kind != "num")
      for (const char* k : {"problem.num.K", "problem.num.w",
                            "problem.num.r_min", "problem.num.r_max",
                            "problem.num.p_max", "problem.num.P_max",
                            "problem.num.h_max"})
        inapplicable(k, why);
    if (cfg.problem_kind != "beamforming")
      for (const char* k :
           {"problem.beamforming.B", "problem.beamforming.N",
            "problem.beamforming.users_per_cell", "problem.beamforming.sigma2",
            "problem.beamforming.gamma_db", "problem.beamforming.gamma_linear",
            "problem.beamforming.rho", "problem.beamforming.clip",
            "problem.beamforming.pg_iters", "problem.beamforming.pg_tol",
            "problem.beamforming.baseline"})
        inapplicable(k, why);

    if (cfg.problem_kind == "quadratic") {
      QuadraticSpec& q = cfg.quadratic;
      q.a = take_dlist("problem.quadratic.a", {1.0, 2.0, 3.0});
      q.K = int(q.a.size());
      q.b = take_double("problem.quadratic.b", 3.0);
      q.x_max = take_double("problem.quadratic.x_max", 5.0);
      q.noise_amp = take_double("problem.quadratic.noise_amp", 0.1);
      if (q.a.empty()) err("problem.quadratic.a must list at least one node");
      if (q.b <= 0.0) err("problem.quadratic.b must be > 0");
      if (q.x_max <= 0.0) err("problem.quadratic.x_max must be > 0");
      if (q.noise_amp < 0.0) err("problem.quadratic.noise_amp must be >= 0");
    } else if (cfg.problem_kind == "num") {
      NumSpec& n = cfg.num;
      n.K = int(take_long("problem.num.K", 5));
      n.w = take_dlist("problem.num.w", {});
      n.r_min = take_double("problem.num.r_min", 0.1);
      n.r_max = take_double("problem.num.r_max", 2.0);
      n.p_max = take_double("problem.num.p_max", 5.0);
      n.P_max = take_double("problem.num.P_max", 5.0);
      n.h_max = take_double("problem.num.h_max", 10.0);
      bool shape_ok = true;
      if (n.K < 1) {
        err("problem.num.K must be >= 1");
        shape_ok = false;
      }
      if (!n.w.empty() && int(n.w.size()) != n.K) {
        err("problem.num.w must have K entries or be omitted");
        shape_ok = false;
      }
      if (!(n.r_min > 0.0 && n.r_max > n.r_min)) {
        err("problem.num: need 0 < r_min < r_max");
        shape_ok = false;
      }
      if (n.p_max <= 0.0 || n.P_max <= 0.0 || n.h_max <= 0.0) {
        err("problem.num: p_max, P_max and h_max must be > 0");
        shape_ok = false;
      }
      for (double wi : n.w)
        if (wi <= 0.0) {
          err("problem.num.w entries must be > 0");
          shape_ok = false;
          break;
        }
      if (shape_ok) {
        double margin = num_slater_margin(n, 2000, 1);
        if (!(margin > 0.0))
          err("problem.num: Slater check failed (margin = " +
              canon_double(margin) +
              " over 2000 samples); no strictly feasible flat-power point "
              "exists, so the multipliers may be unbounded. Lower r_min or "
              "raise p_max/P_max.");
      }
    } else {
      BeamSpec& b = cfg.beam;
      b.B = int(take_long("problem.beamforming.B", 3));
      b.N = int(take_long("problem.beamforming.N", 2));
      b.users_per_cell = int(take_long("problem.beamforming.users_per_cell", 1));
      b.sigma2 = take_double("problem.beamforming.sigma2", 1.0);
      cfg.beam_gamma_db = take_double("problem.beamforming.gamma_db", 10.0);
      b.gamma = std::pow(10.0, cfg.beam_gamma_db / 10.0);
      if (has("problem.beamforming.gamma_linear")) {
        double supplied = take_double("problem.beamforming.gamma_linear", b.gamma);
        double rel = std::abs(supplied - b.gamma) / std::max(1.0, b.gamma);
        if (rel > 1e-9)
          err("problem.beamforming.gamma_linear (" + canon_double(supplied) +
              ") disagrees with gamma_db = " + canon_double(cfg.beam_gamma_db) +
              " (linear " + canon_double(b.gamma) +
              "); drop it or fix the dB value");
      }
      echo("problem.beamforming.gamma_linear", canon_double(b.gamma));
      b.rho = take_double("problem.beamforming.rho", 1.65);
      b.clip = take_double("problem.beamforming.clip", 5.0);
      b.pg_iters = int(take_long("problem.beamforming.pg_iters", 500));
      b.pg_tol = take_double("problem.beamforming.pg_tol", 1e-6);
      std::string base = take_enum("problem.beamforming.baseline", "none",
                                   {"none", "uncoordinated"}, false);
      cfg.beam_baseline = base == "uncoordinated" ? BeamBaseline::kUncoordinated
                                                  : BeamBaseline::kNone;
      try {
        b.validate();
      } catch (const std::invalid_argument& e) {
        err(std::string("problem.beamforming: ") + e.what());
      }
    }
  }

  void build_engine() {
    cfg.engine_kind = take_enum("engine.kind", "synchronous",
                                {"synchronous", "async_fc", "aisdd"}, false);
    cfg.T = take_long("engine.T", 1000);
    if (cfg.T < 1) err("engine.T must be >= 1");
    cfg.seeds = take_u64list("engine.seeds", {1});
    if (cfg.seeds.empty()) err("engine.seeds must list at least one seed");
    std::set<std::uint64_t> uniq(cfg.seeds.begin(), cfg.seeds.end());
    if (uniq.size() != cfg.seeds.size())
      err("engine.seeds must be distinct (each seed owns one run directory)");

    std::string skind = take_enum("engine.step.kind", "constant",
                                  {"constant", "power_decay"}, false);
    double eps = take_double("engine.step.eps", 0.1);
    if (eps <= 0.0) err("engine.step.eps must be > 0");
    if (skind == "constant") {
      inapplicable("engine.step.alpha",
                   "engine.step.kind = constant has no decay exponent");
      cfg.step = StepSchedule();
      cfg.step.kind = StepSchedule::Kind::kConstant;
      cfg.step.eps = eps > 0.0 ? eps : 0.1;
    } else {
      double alpha = take_double("engine.step.alpha", 0.6);
      if (!(alpha > 0.5 && alpha < 1.0))
        err("engine.step.alpha must lie in (1/2, 1) so the step sequence is "
            "square-summable but not summable; got " +
            canon_double(alpha));
      cfg.step = StepSchedule();
      cfg.step.kind = StepSchedule::Kind::kPowerDecay;
      cfg.step.eps = eps > 0.0 ? eps : 0.1;
      cfg.step.alpha = (alpha > 0.5 && alpha < 1.0) ? alpha : 0.6;
    }
  }

  void build_delay(int K, bool K_known) {
    static const char* kDelayKeys[] = {"delay.c",           "delay.m",
                                       "delay.tau_max",     "delay.seed",
                                       "delay.min_updates", "delay.max_updates"};
    std::string dkind = take_enum(
        "delay.kind", "none",
        {"none", "constant", "subset_fc", "budget_incremental"}, false);

    auto swallow_rest = [&] {  // kind itself is wrong; skip per-key noise
      for (const char* k : kDelayKeys) consumed.insert(k);
    };

    if (cfg.engine_kind == "synchronous") {
      if (dkind != "none")
        err("delay.kind = " + dkind +
            " is not applicable: the synchronous engine has no delay model "
            "(drop the delay section or choose an asynchronous engine)");
      for (const char* k : kDelayKeys)
        inapplicable(k, "the synchronous engine has no delay model");
      cfg.has_delay = false;
      return;
    }

    if (cfg.engine_kind == "async_fc") {
      if (dkind == "none") {
        err("engine.kind = async_fc requires a delay model: set delay.kind "
            "to constant or subset_fc");
        swallow_rest();
        return;
      }
      if (dkind == "budget_incremental") {
        err("delay.kind = budget_incremental is only valid with engine.kind "
            "= aisdd (it schedules ring token updates, not fusion-center "
            "exchanges)");
        swallow_rest();
        return;
      }
      inapplicable("delay.min_updates",
                   "update budgets belong to the budget_incremental schedule");
      inapplicable("delay.max_updates",
                   "update budgets belong to the budget_incremental schedule");
      if (dkind == "constant") {
        long c = take_long("delay.c", 0);
        if (c < 0) err("delay.c must be >= 0");
        inapplicable("delay.tau_max",
                     "the constant schedule implies tau_max = delay.c");
        inapplicable("delay.m", "delay.m belongs to the subset_fc schedule");
        inapplicable("delay.seed", "the constant schedule draws nothing");
        if (errors.empty()) {
          cfg.delay = constant_delay(int(c));
          cfg.has_delay = true;
        }
        return;
      }
      // subset_fc
      inapplicable("delay.c", "delay.c belongs to the constant schedule");
      bool have_tau = has("delay.tau_max");
      long m = take_long("delay.m", K_known ? long(K) : 1);
      long tau = take_long("delay.tau_max", 0);
      std::uint64_t dseed = take_u64("delay.seed", 1);
      if (!have_tau)
        err("delay.tau_max is required for asynchronous schedules: the "
            "engine enforces the bounded-staleness contract and must know "
            "the bound");
      if (K_known && (m < 1 || m > K))
        err("delay.m must lie in [1, K] = [1, " + std::to_string(K) + "]");
      if (tau < 0) err("delay.tau_max must be >= 0");
      if (have_tau && tau == 0 && K_known && m != K)
        err("delay.tau_max = 0 requires delay.m = K (every node must "
            "exchange every slot)");
      if (errors.empty() && K_known) {
        cfg.delay = subset_fc_delay(int(m), K, int(tau), dseed);
        cfg.has_delay = true;
      }
      return;
    }

    // aisdd
    if (dkind != "budget_incremental") {
      err("engine.kind = aisdd runs the incremental ring engine and requires "
          "delay.kind = budget_incremental; got delay.kind = " + dkind);
      swallow_rest();
      return;
    }
    inapplicable("delay.c", "delay.c belongs to a fusion-center schedule");
    inapplicable("delay.m", "delay.m belongs to a fusion-center schedule");
    bool have_min = has("delay.min_updates");
    bool have_max = has("delay.max_updates");
    bool have_tau = has("delay.tau_max");
    long lo = take_long("delay.min_updates", 1);
    long hi = take_long("delay.max_updates", K_known ? long(K) : 1);
    long tau = take_long("delay.tau_max", 0);
    std::uint64_t dseed = take_u64("delay.seed", 1);
    if (!have_min || !have_max)
      err("delay.min_updates and delay.max_updates are required for the "
          "budget_incremental schedule");
    if (!have_tau)
      err("delay.tau_max is required for asynchronous schedules: the engine "
          "enforces the bounded-staleness contract and must know the bound");
    if (lo < 1 || hi < lo)
      err("delay budget must satisfy 1 <= min_updates <= max_updates");
    if (tau < 0) err("delay.tau_max must be >= 0");
    if (have_tau && tau == 0 && K_known && (lo != K || hi != K))
      err("delay.tau_max = 0 (zero staleness) requires the full budget "
          "{K, K} = {" + std::to_string(K) + ", " + std::to_string(K) + "}");
    if (errors.empty() && K_known) {
      UpdateBudget budget;
      budget.min_updates = int(lo);
      budget.max_updates = int(hi);
      cfg.delay = budget_incremental_schedule(budget, K, int(tau), dseed);
      cfg.has_delay = true;
    }
  }

  void build_analysis() {
    cfg.cadence = take_long("analysis.cadence", 1);
    if (cfg.cadence < 1) err("analysis.cadence must be >= 1");
    cfg.mc_samples = take_long("analysis.mc_samples", 2000);
    if (cfg.mc_samples < 2) err("analysis.mc_samples must be >= 2");
    cfg.dstar_mode =
        take_enum("analysis.dstar_mode", "none", {"none", "fixed"}, false);
    if (cfg.dstar_mode == "fixed") {
      if (!has("analysis.dstar_value"))
        err("analysis.dstar_value is required when analysis.dstar_mode = "
            "fixed");
      cfg.dstar_value = take_double("analysis.dstar_value", 0.0);
    } else {
      inapplicable("analysis.dstar_value",
                   "analysis.dstar_mode = none has no reference value");
    }
  }

  void build_output() {
    auto v = read("output.dir");
    cfg.out_dir = v ? *v : "out";
    if (cfg.out_dir.empty() || cfg.out_dir.front() == '/' ||
        cfg.out_dir.find("..") != std::string::npos)
      err("output.dir must be a non-empty relative path without '..'");
    echo("output.dir", cfg.out_dir);

    auto f = read("output.formats");
    std::string fval = f ? *f : "csv,jsonl";
    cfg.want_csv = false;
    cfg.want_jsonl = false;
    std::set<std::string> seen;
    bool ok = true;
    for (const std::string& tok : split(fval, ',')) {
      if (tok == "csv") {
        cfg.want_csv = true;
      } else if (tok == "jsonl") {
        cfg.want_jsonl = true;
      } else {
        err("output.formats: expected a subset of {csv, jsonl}, got '" + tok +
            "'");
        ok = false;
        continue;
      }
      if (!seen.insert(tok).second) {
        err("output.formats lists '" + tok + "' twice");
        ok = false;
      }
    }
    if (ok && !cfg.want_csv && !cfg.want_jsonl)
      err("output.formats must enable at least one format");
    std::string canon;
    if (cfg.want_csv) canon += "csv";
    if (cfg.want_jsonl) canon += std::string(canon.empty() ? "" : ",") + "jsonl";
    echo("output.formats", canon.empty() ? "csv,jsonl" : canon);
  }

  void build_cases_and_asserts() {
    for (const auto& [key, value] : raw) {
      if (key.rfind("case.", 0) == 0) {
        consumed.insert(key);
        std::string name = key.substr(5);
        if (!valid_name(name)) {
          err(key + ": case names must match [A-Za-z0-9_]+");
          continue;
        }
        CaseOverride co;
        co.name = name;
        bool ok = true;
        for (const std::string& pair : split(value, ';')) {
          if (pair.empty()) continue;
          std::size_t eq = pair.find('=');
          if (eq == std::string::npos) {
            err(key + ": expected 'key=value' pairs separated by ';', got '" +
                pair + "'");
            ok = false;
            break;
          }
          std::string ok_key = trim(pair.substr(0, eq));
          std::string ok_val = trim(pair.substr(eq + 1));
          if (!key_registry().count(ok_key)) {
            err(key + ": override target '" + ok_key +
                "' is not a config key (cases may not define cases or "
                "asserts)");
            ok = false;
            break;
          }
          co.overrides[ok_key] = ok_val;
        }
        if (!ok) continue;
        if (co.overrides.empty()) {
          err(key + ": a case must override at least one key");
          continue;
        }
        cfg.cases.push_back(std::move(co));
        // canonical form: sorted "k=v; k=v"
        std::string canon;
        for (const auto& [k, v2] : cfg.cases.back().overrides)
          canon += (canon.empty() ? "" : "; ") + k + "=" + v2;
        echo(key, canon);
      } else if (key.rfind("assert.", 0) == 0) {
        consumed.insert(key);
        std::string name = key.substr(7);
        if (!assert_names().count(name)) {
          std::string opts;
          for (const auto& a : assert_names())
            opts += (opts.empty() ? "" : ", ") + a;
          err(key + ": unknown assertion (known: " + opts + ")");
          continue;
        }
        double v = 0.0;
        if (!parse_double(raw.at(key), v)) {
          err(key + ": expected a finite number, got '" + raw.at(key) + "'");
          continue;
        }
        cfg.assertions[name] = v;
        echo(key, canon_double(v));
      }
    }
    std::sort(cfg.cases.begin(), cfg.cases.end(),
              [](const CaseOverride& a, const CaseOverride& b) {
                return a.name < b.name;
              });
  }

  void check_unconsumed() {
    for (const auto& [key, value] : raw) {
      (void)value;
      if (consumed.count(key)) continue;
      if (key_registry().count(key))
        err("key '" + key + "' is not applicable to this configuration");
      else
        err("unknown key '" + key + "' (strict mode; see the documented key "
            "list)");
    }
  }

  void run() {
    build_problem();
    bool K_known = true;
    int K = 0;
    if (cfg.problem_kind == "quadratic") {
      K = int(cfg.quadratic.a.size());
      K_known = K >= 1;
    } else if (cfg.problem_kind == "num") {
      K = cfg.num.K;
      K_known = K >= 1;
    } else {
      K = cfg.beam.B;
      K_known = K >= 1;
    }
    build_engine();
    build_delay(K, K_known);
    build_analysis();
    build_output();
    build_cases_and_asserts();
    check_unconsumed();
  }
};

}  // namespace

int RunConfig::problem_K() const {
  if (problem_kind == "quadratic") return int(quadratic.a.size());
  if (problem_kind == "num") return num.K;
  return beam.B;
}

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error([&errors] {
        std::string m = "config invalid:";
        for (const auto& e : errors) m += "\n  - " + e;
        return m;
      }()),
      errors_(std::move(errors)) {}

ConfigParse parse_config_text(const std::string& text) {
  ConfigParse out;
  RawDoc doc = tokenize(text);
  out.errors = doc.errors;

  Builder b;
  b.raw = std::move(doc.kv);
  b.run();
  out.errors.insert(out.errors.end(), b.errors.begin(), b.errors.end());
  out.config = std::move(b.cfg);

  // Validate every case expansion so a broken variant fails at parse time.
  if (out.errors.empty()) {
    for (const CaseOverride& co : out.config.cases) {
      ConfigParse expanded =
          apply_overrides(out.config, co.overrides, "case '" + co.name + "'");
      out.errors.insert(out.errors.end(), expanded.errors.begin(),
                        expanded.errors.end());
    }
  }
  return out;
}

ConfigParse parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ConfigParse out;
    out.errors.push_back("cannot open config file: " + path);
    return out;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

RunConfig parse_config(const std::string& path) {
  ConfigParse p = parse_config_file(path);
  if (!p.ok()) throw ConfigError(p.errors);
  return p.config;
}

std::string emit_config(const RunConfig& c) {
  std::string out;
  for (const auto& [key, value] : c.kv) out += key + " = " + value + "\n";
  return out;
}

std::string config_hash(const RunConfig& c) {
  std::string doc = emit_config(c);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : doc) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

ConfigParse apply_overrides(const RunConfig& base,
                            const std::map<std::string, std::string>& overrides,
                            const std::string& label) {
  std::map<std::string, std::string> kv = base.kv;
  // Derived echo keys are recomputed from their sources, never inherited,
  // so an override of the source cannot conflict with a stale echo.
  kv.erase("problem.beamforming.gamma_linear");
  for (auto it = kv.begin(); it != kv.end();) {
    if (it->first.rfind("case.", 0) == 0)
      it = kv.erase(it);
    else
      ++it;
  }
  for (const auto& [k, v] : overrides) {
    if (v.empty())
      kv.erase(k);
    else
      kv[k] = v;
  }
  std::string doc;
  for (const auto& [k, v] : kv) doc += k + " = " + v + "\n";
  ConfigParse p = parse_config_text(doc);
  if (!p.ok() && !label.empty())
    for (auto& e : p.errors) e = label + ": " + e;
  return p;
}

std::vector<std::pair<std::string, RunConfig>> expand_cases(
    const RunConfig& c) {
  std::vector<std::pair<std::string, RunConfig>> out;
  if (c.cases.empty()) {
    ConfigParse p = apply_overrides(c, {}, "");
    if (!p.ok()) throw ConfigError(p.errors);
    out.emplace_back("run", std::move(p.config));
    return out;
  }
  for (const CaseOverride& co : c.cases) {
    ConfigParse p = apply_overrides(c, co.overrides, "case '" + co.name + "'");
    if (!p.ok()) throw ConfigError(p.errors);
    out.emplace_back(co.name, std::move(p.config));
  }
  return out;
}

std::vector<std::string> config_notes(const RunConfig& c) {
  std::vector<std::string> notes;
  if (c.problem_kind == "beamforming")
    notes.push_back("problem.beamforming.gamma_db = " +
                    canon_double(c.beam_gamma_db) + " -> linear gamma = " +
                    canon_double(c.beam.gamma) + " (echoed as gamma_linear)");
  notes.push_back("config hash " + config_hash(c));
  notes.push_back(std::to_string(std::max<std::size_t>(c.cases.size(), 1)) +
                  " case(s) x " + std::to_string(c.seeds.size()) +
                  " seed(s), T = " + std::to_string(c.T));
  return notes;
}

}  // namespace dualsim
