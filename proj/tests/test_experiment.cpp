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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dualsim/config.hpp"
#include "dualsim/experiment.hpp"
#include "json.hpp"

using namespace dualsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig parse_ok(const std::string& text) {
  ConfigParse p = parse_config_text(text);
  std::string msg;
  for (const auto& e : p.errors) msg += e + "\n";
  REQUIRE_MESSAGE(p.ok(), msg);
  return p.config;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), ("missing file: " + path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

fs::path fresh_dir(const std::string& leaf) {
  fs::path dir = fs::path("tmp_test_experiment") / leaf;
  fs::remove_all(dir);
  return dir;
}

const char* kQuadDoc =
    "problem.kind = quadratic\n"
    "engine.T = 200\n"
    "engine.seeds = 1,2\n"
    "engine.step.eps = 0.1\n"
    "analysis.cadence = 10\n"
    "analysis.mc_samples = 200\n"
    "analysis.dstar_mode = fixed\n"
    "analysis.dstar_value = -3\n"
    "output.dir = quad_small\n";

}  // namespace

TEST_CASE("a small run writes the documented artifact tree") {
  RunConfig cfg = parse_ok(kQuadDoc);
  ExperimentOptions opts;
  fs::path dir = fresh_dir("tree");
  opts.out_override = dir.string();

  ExperimentResult res = run_experiment(cfg, opts);
  CHECK(res.out_dir == dir.string());
  CHECK(res.ok);  // no assertions configured
  CHECK(res.asserts.empty());

  for (const char* leaf :
       {"config_echo.conf", "report.json", "run/plot_lambda_norm.csv",
        "run/plot_primal_objective.csv", "run/plot_feasibility_gap.csv",
        "run/seed_1/trace.jsonl", "run/seed_1/metrics.json",
        "run/seed_2/trace.jsonl", "run/seed_2/metrics.json"}) {
    CAPTURE(leaf);
    CHECK(fs::exists(dir / leaf));
  }

  // The echoed config parses back to the exact same canonical document.
  ConfigParse echo = parse_config_text(slurp(dir / "config_echo.conf"));
  REQUIRE(echo.ok());
  CHECK(echo.config == cfg);
  CHECK(config_hash(echo.config) == config_hash(cfg));

  // Per-run metrics are self-describing.
  json m = json::parse(slurp(dir / "run/seed_1/metrics.json"));
  CHECK(m.at("case") == "run");
  CHECK(m.at("seed") == 1);
  CHECK(m.at("config_hash") == config_hash(cfg));
  CHECK(m.at("problem") == "quadratic");
  CHECK(m.at("T") == 200);
  CHECK(m.at("final_lambda").size() == 1);
  CHECK(m.at("feasibility_gap").size() == 1);
  CHECK(m.contains("primal_objective"));
  CHECK(m.contains("lambda_ratio"));
  CHECK(m.contains("dual_mc_mean"));
  CHECK(m.contains("dual_mc_se"));
  CHECK(m.contains("dstar_gap"));
  // This instance optimizes to -3; even a short noisy run lands nearby.
  CHECK(m.at("dual_mc_mean").get<double>() ==
        doctest::Approx(-3.0).epsilon(0.2));

  // Plot table: self-describing header, one row per cadence tick, and the
  // mean column really is the mean of the run columns.
  std::vector<std::string> pl =
      lines_of(slurp(dir / "run/plot_lambda_norm.csv"));
  REQUIRE(pl.size() >= 4);
  CHECK(pl[0] == "# config_hash=" + config_hash(cfg));
  CHECK(pl[1] == "# metric=lambda_norm");
  CHECK(pl[2].rfind("# runs: run_1=seed 1", 0) == 0);
  CHECK(pl[3] == "t,run_1,run_2,mean,ci95");
  CHECK(pl.size() == 4 + 200 / 10);
  std::vector<std::string> row = split_csv(pl[4]);
  REQUIRE(row.size() == 5);
  CHECK(row[0] == "10");
  double r1 = std::stod(row[1]), r2 = std::stod(row[2]);
  CHECK(std::stod(row[3]) == doctest::Approx((r1 + r2) / 2).epsilon(1e-12));
  CHECK(std::stod(row[4]) >= 0.0);

  // Report: aggregates per case plus the (empty) assertion table.
  json rep = json::parse(slurp(dir / "report.json"));
  CHECK(rep.at("config_hash") == config_hash(cfg));
  REQUIRE(rep.at("cases").contains("run"));
  CHECK(rep.at("cases").at("run").at("runs").size() == 2);
  CHECK(rep.at("cases").at("run").at("runs")[0].at("seed") == 1);
  CHECK(rep.at("cases").at("run").at("runs")[1].at("seed") == 2);
  CHECK(rep.at("cases").at("run").contains("aggregate"));
  CHECK(rep.at("asserts").empty());
  CHECK(rep.at("ok") == true);
}

TEST_CASE("outputs are bit-identical across reruns and thread counts") {
  RunConfig cfg = parse_ok(
      "problem.kind = quadratic\n"
      "engine.kind = async_fc\n"
      "delay.kind = constant\n"
      "delay.c = 2\n"
      "engine.T = 150\n"
      "engine.seeds = 1,2\n"
      "analysis.cadence = 25\n"
      "case.fast = engine.step.eps=0.2\n"
      "case.slow = engine.step.eps=0.05\n");

  fs::path d1 = fresh_dir("det1");
  fs::path d2 = fresh_dir("det2");
  ExperimentOptions o1;
  o1.out_override = d1.string();
  o1.threads = 1;
  ExperimentOptions o2;
  o2.out_override = d2.string();
  o2.threads = 4;
  run_experiment(cfg, o1);
  run_experiment(cfg, o2);

  for (const char* leaf :
       {"report.json", "config_echo.conf", "plot_lambda_norm_by_case.csv",
        "fast/plot_lambda_norm.csv", "fast/plot_primal_objective.csv",
        "fast/plot_feasibility_gap.csv", "fast/seed_1/trace.jsonl",
        "fast/seed_1/metrics.json", "slow/seed_2/trace.jsonl",
        "slow/seed_2/metrics.json"}) {
    CAPTURE(leaf);
    CHECK(slurp(d1 / leaf) == slurp(d2 / leaf));
  }
}

TEST_CASE("trace files carry one chronological record per event") {
  RunConfig cfg = parse_ok(
      "problem.kind = quadratic\n"
      "engine.T = 30\n"
      "engine.seeds = 7\n"
      "output.dir = quad_tiny\n");
  fs::path dir = fresh_dir("jsonl");
  ExperimentOptions opts;
  opts.out_override = dir.string();
  run_experiment(cfg, opts);

  std::vector<std::string> ls = lines_of(slurp(dir / "run/seed_7/trace.jsonl"));
  REQUIRE(ls.size() >= 3);

  json hdr = json::parse(ls[0]);
  CHECK(hdr.at("kind") == "header");
  CHECK(hdr.at("engine") == "synchronous");
  CHECK(hdr.at("problem") == "quadratic");
  CHECK(hdr.at("K") == 3);
  CHECK(hdr.at("d") == 1);
  CHECK(hdr.at("x_dim") == 1);
  CHECK(hdr.at("T") == 30);
  CHECK(hdr.at("seed") == 7);
  CHECK(hdr.at("tau_max") == -1);  // no delay schedule on this run

  // Slot 1: three allocation records (one per node), then the update rows.
  long n_alloc = 0, n_update = 0;
  long last_t = 0;
  bool alloc_fields_ok = true, update_fields_ok = true;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    json rec = json::parse(ls[i]);
    long t = rec.at("t").get<long>();
    CHECK(t >= last_t);  // chronological
    last_t = t;
    if (rec.at("kind") == "alloc") {
      ++n_alloc;
      alloc_fields_ok = alloc_fields_ok && rec.at("delta").is_null() &&
                        rec.at("tau").is_null() && rec.at("pi").is_number() &&
                        rec.at("g").is_array() && rec.at("x").is_array() &&
                        rec.at("p").is_array() &&
                        rec.at("lambda_snapshot").is_array() &&
                        rec.at("node").is_number() &&
                        rec.at("flagged").is_boolean();
    } else {
      REQUIRE(rec.at("kind") == "update");
      ++n_update;
      update_fields_ok = update_fields_ok && rec.at("pi").is_null() &&
                         rec.at("delta").is_number() &&
                         rec.at("tau").is_number() &&
                         rec.at("eps").is_number() && rec.at("x").is_null() &&
                         rec.at("p").is_null() &&
                         rec.at("lambda_snapshot").is_null() &&
                         rec.at("g").is_array();
    }
  }
  CHECK(alloc_fields_ok);
  CHECK(update_fields_ok);
  CHECK(n_alloc == 30 * 3);
  CHECK(n_update == 30 * 3);

  // Synchronous allocations see the slot's broadcast multiplier exactly.
  json first = json::parse(ls[1]);
  REQUIRE(first.at("kind") == "alloc");
  CHECK(first.at("t") == 1);
  CHECK(first.at("lambda_snapshot")[0].get<double>() == 0.0);
}

TEST_CASE("dry run validates and plans without writing") {
  RunConfig cfg = parse_ok(kQuadDoc);
  fs::path dir = fresh_dir("dry");
  ExperimentOptions opts;
  opts.out_override = dir.string();
  opts.dry_run = true;
  ExperimentResult res = run_experiment(cfg, opts);
  CHECK(res.ok);
  CHECK_FALSE(fs::exists(dir));
  bool planned = false;
  for (const auto& n : res.notes)
    if (n.find("dry run") != std::string::npos &&
        n.find("2 job(s)") != std::string::npos)
      planned = true;
  CHECK(planned);
}

TEST_CASE("the output root comes from the override, the prefix, or the dir") {
  RunConfig cfg = parse_ok(kQuadDoc);
  ExperimentOptions opts;
  opts.dry_run = true;

  ExperimentResult r1 = run_experiment(cfg, opts);
  CHECK(r1.out_dir == "quad_small");

  opts.out_root = "some/root";
  ExperimentResult r2 = run_experiment(cfg, opts);
  CHECK(r2.out_dir == "some/root/quad_small");

  opts.out_override = "exact/dir";
  ExperimentResult r3 = run_experiment(cfg, opts);
  CHECK(r3.out_dir == "exact/dir");
}

TEST_CASE("beamforming runs produce power plots and metrics") {
  RunConfig cfg = parse_ok(
      "problem.kind = beamforming\n"
      "problem.beamforming.B = 2\n"
      "problem.beamforming.N = 2\n"
      "engine.T = 60\n"
      "engine.seeds = 1\n"
      "analysis.cadence = 10\n"
      "output.formats = csv\n"
      "output.dir = beam_tiny\n");
  fs::path dir = fresh_dir("beam");
  ExperimentOptions opts;
  opts.out_override = dir.string();
  ExperimentResult res = run_experiment(cfg, opts);
  CHECK(res.ok);

  CHECK(fs::exists(dir / "run/plot_power.csv"));
  CHECK(fs::exists(dir / "run/plot_power_avg.csv"));
  CHECK(fs::exists(dir / "run/plot_lambda_norm.csv"));
  CHECK_FALSE(fs::exists(dir / "run/seed_1/trace.jsonl"));  // jsonl disabled

  json m = json::parse(slurp(dir / "run/seed_1/metrics.json"));
  CHECK(m.at("problem") == "beamforming");
  CHECK(m.at("power_avg").get<double>() > 0.0);
  CHECK(m.contains("flagged_frac"));
  CHECK_FALSE(m.contains("primal_objective"));

  // power_avg at the last sampled slot equals the running mean of power.
  std::vector<std::string> pw = lines_of(slurp(dir / "run/plot_power.csv"));
  std::vector<std::string> pa =
      lines_of(slurp(dir / "run/plot_power_avg.csv"));
  REQUIRE(pw.size() == pa.size());
  std::vector<std::string> last = split_csv(pa.back());
  CHECK(std::stod(last[1]) == doctest::Approx(m.at("power_avg").get<double>())
                                  .epsilon(1e-12));
}

TEST_CASE("plot emission rejects unusable trace sets") {
  RunConfig a = parse_ok("problem.kind = quadratic\nengine.T = 40\n");
  RunConfig b = parse_ok("problem.kind = quadratic\nengine.T = 50\n");
  RunTrace ta = run_configured(a, 1);
  RunTrace tb = run_configured(b, 1);

  std::ostringstream sink;
  CHECK_THROWS_AS(emit_plot_data({}, "lambda_norm", 1, "h", sink),
                  std::invalid_argument);
  CHECK_THROWS_AS(emit_plot_data({&ta, &tb}, "lambda_norm", 1, "h", sink),
                  std::invalid_argument);
  CHECK_THROWS_AS(emit_plot_data({&ta}, "lambda_norm", 0, "h", sink),
                  std::invalid_argument);
  try {
    emit_plot_data({&ta}, "no_such_metric", 1, "h", sink);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("not available") != std::string::npos);
  }

  // Vector metrics get one column group per component.
  RunConfig n = parse_ok(
      "problem.kind = num\n"
      "problem.num.K = 2\n"
      "engine.T = 40\n");
  RunTrace tn = run_configured(n, 3);
  std::ostringstream out;
  emit_plot_data({&tn}, "feasibility_gap", 20, "h", out);
  std::vector<std::string> ls = lines_of(out.str());
  REQUIRE(ls.size() == 4 + 2);
  CHECK(ls[3] == "t,run_1_c0,run_1_c1,mean_c0,mean_c1,ci95_c0,ci95_c1");
}

TEST_CASE("analyze rebuilds the report byte-for-byte from stored metrics") {
  RunConfig cfg = parse_ok(
      "problem.kind = quadratic\n"
      "engine.T = 80\n"
      "engine.seeds = 4,9\n"
      "assert.feasibility_gap_min = -1.5\n"
      "case.a = engine.step.eps=0.1\n"
      "case.b = engine.step.eps=0.2\n");
  fs::path dir = fresh_dir("analyze");
  ExperimentOptions opts;
  opts.out_override = dir.string();
  ExperimentResult res = run_experiment(cfg, opts);
  CHECK(res.ok);
  REQUIRE(res.asserts.size() == 2);  // one outcome per case

  std::string before = slurp(dir / "report.json");
  std::string rebuilt = analyze_dir(dir.string());
  CHECK(rebuilt == before);
  CHECK(slurp(dir / "report.json") == before);

  CHECK_THROWS_AS((void)analyze_dir("no/such/dir"), std::runtime_error);
}

TEST_CASE("configured assertions decide the experiment outcome") {
  std::string doc =
      "problem.kind = quadratic\n"
      "engine.T = 300\n"
      "engine.seeds = 1,2,3\n"
      "engine.step.eps = 0.1\n"
      "assert.primal_objective_min = 999\n";
  RunConfig cfg = parse_ok(doc);
  fs::path dir = fresh_dir("asserts");
  ExperimentOptions opts;
  opts.out_override = dir.string();
  ExperimentResult res = run_experiment(cfg, opts);
  CHECK_FALSE(res.ok);
  REQUIRE(res.asserts.size() == 1);
  CHECK(res.asserts[0].name == "primal_objective_min");
  CHECK_FALSE(res.asserts[0].pass);
  CHECK(res.asserts[0].actual < 0.0);  // the optimum here is -3

  json rep = json::parse(slurp(dir / "report.json"));
  CHECK(rep.at("ok") == false);
  CHECK(rep.at("asserts")[0].at("pass") == false);

  // The same instance passes a threshold it actually clears.
  RunConfig cfg2 = parse_ok(
      "problem.kind = quadratic\n"
      "engine.T = 300\n"
      "engine.seeds = 1,2,3\n"
      "engine.step.eps = 0.1\n"
      "assert.primal_objective_min = -4\n"
      "assert.lambda_ratio_max = 2\n");
  fs::path dir2 = fresh_dir("asserts2");
  opts.out_override = dir2.string();
  ExperimentResult res2 = run_experiment(cfg2, opts);
  CHECK(res2.ok);
  REQUIRE(res2.asserts.size() == 2);
  for (const auto& a : res2.asserts) {
    CAPTURE(a.name);
    CHECK(a.pass);
  }
}

TEST_CASE("attached series cover the whole horizon") {
  RunConfig cfg = parse_ok(
      "problem.kind = quadratic\n"
      "engine.kind = aisdd\n"
      "delay.kind = budget_incremental\n"
      "delay.min_updates = 1\n"
      "delay.max_updates = 3\n"
      "delay.tau_max = 6\n"
      "engine.T = 120\n");
  RunTrace tr = run_configured(cfg, 11);
  REQUIRE(tr.aux.count("lambda_norm") == 1);
  REQUIRE(tr.aux.count("primal_objective") == 1);
  REQUIRE(tr.aux.count("feasibility_gap_c0") == 1);
  CHECK(tr.aux.at("lambda_norm").size() == 120);
  CHECK(tr.aux.at("primal_objective").size() == 120);
  CHECK(tr.aux.at("feasibility_gap_c0").size() == 120);
  for (double v : tr.aux.at("lambda_norm")) CHECK(v >= 0.0);
}
