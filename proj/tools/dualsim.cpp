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

#include <cctype>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualsim/config.hpp"
#include "dualsim/experiment.hpp"

namespace {

using dualsim::ConfigParse;
using dualsim::RunConfig;

void print_errors(const std::vector<std::string>& errors) {
  for (const auto& e : errors) std::cerr << "error: " << e << "\n";
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

struct VarySpec {
  std::string key;
  std::vector<std::string> values;  // ';' inside a value stands for ','
};

bool parse_vary(const std::string& arg, VarySpec& out) {
  std::size_t eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) return false;
  out.key = arg.substr(0, eq);
  out.values.clear();
  std::string rest = arg.substr(eq + 1);
  std::string cur;
  for (char c : rest) {
    if (c == ',') {
      out.values.push_back(cur);
      cur.clear();
    } else {
      cur += c == ';' ? ',' : c;
    }
  }
  out.values.push_back(cur);
  for (const auto& v : out.values)
    if (v.empty()) return false;
  return true;
}

// Rewrites the config document so every (existing case x vary combination)
// becomes one named case, then revalidates the whole document.
ConfigParse sweep_config(const RunConfig& base,
                         const std::vector<VarySpec>& vary) {
  std::vector<std::pair<std::string, std::map<std::string, std::string>>>
      combos = {{"", {}}};
  for (const VarySpec& vs : vary) {
    decltype(combos) next;
    for (const auto& [name, ov] : combos)
      for (const std::string& v : vs.values) {
        auto ov2 = ov;
        ov2[vs.key] = v;
        std::string part = sanitize(vs.key) + "_" + sanitize(v);
        next.emplace_back(name.empty() ? part : name + "__" + part, ov2);
      }
    combos = std::move(next);
  }

  std::vector<dualsim::CaseOverride> seeds_cases = base.cases;
  if (seeds_cases.empty()) seeds_cases.push_back({});  // one anonymous case

  std::string doc;
  for (const auto& [k, v] : base.kv)
    if (k.rfind("case.", 0) != 0) doc += k + " = " + v + "\n";
  for (const dualsim::CaseOverride& co : seeds_cases)
    for (const auto& [combo_name, combo_ov] : combos) {
      std::string name = co.name.empty()
                             ? combo_name
                             : (combo_name.empty()
                                    ? co.name
                                    : co.name + "__" + combo_name);
      auto merged = co.overrides;
      for (const auto& [k, v] : combo_ov) merged[k] = v;
      std::string pairs;
      for (const auto& [k, v] : merged)
        pairs += (pairs.empty() ? "" : "; ") + k + "=" + v;
      doc += "case." + name + " = " + pairs + "\n";
    }
  return dualsim::parse_config_text(doc);
}

int execute(const RunConfig& cfg, const std::string& out_flag, int threads,
            bool dry_run) {
  dualsim::ExperimentOptions eo;
  eo.out_override = out_flag;
  if (const char* env = std::getenv("DUALSIM_OUT")) eo.out_root = env;
  eo.threads = threads;
  eo.dry_run = dry_run;
  try {
    dualsim::ExperimentResult res = dualsim::run_experiment(cfg, eo);
    for (const auto& n : res.notes) std::cout << n << "\n";
    for (const auto& a : res.asserts)
      std::cout << "assert " << a.case_name << "/" << a.name << ": actual "
                << a.actual << (a.pass ? " satisfies " : " violates ")
                << a.threshold << (a.pass ? "  [pass]" : "  [FAIL]") << "\n";
    if (!res.ok) {
      std::cerr << "one or more configured assertions failed\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dualsim: config-driven runner for synchronous and asynchronous "
      "dual-descent resource allocation experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_flag;
  std::string analyze_path;
  bool dry_run = false;
  int threads = 1;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  std::vector<std::string> vary_args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "config file")->required();
    sub->add_option("--out", out_flag,
                    "output directory (overrides output.dir; the DUALSIM_OUT "
                    "env var prefixes output.dir instead)");
    sub->add_flag("--dry-run", dry_run, "validate and plan only");
    sub->add_option("--threads", threads, "worker threads over (case x seed)")
        ->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& s) {
          seed_flag = s;
          seed_given = true;
        },
        "run a single seed instead of engine.seeds");
  };

  CLI::App* run = app.add_subcommand("run", "run every (case x seed) job");
  add_common(run);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "cross existing cases with --vary key=v1,v2,... variants");
  add_common(sweep);
  sweep
      ->add_option("--vary", vary_args,
                   "key=v1,v2,... (repeatable; use ';' inside a value for "
                   "list entries)")
      ->required();

  CLI::App* analyze =
      app.add_subcommand("analyze", "rebuild report.json from stored metrics");
  analyze->add_option("dir", analyze_path, "experiment output directory")
      ->required();

  CLI::App* validate =
      app.add_subcommand("validate", "parse a config and echo canonical form");
  validate->add_option("config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  if (*validate) {
    ConfigParse p = dualsim::parse_config_file(config_path);
    if (!p.ok()) {
      print_errors(p.errors);
      return 2;
    }
    for (const auto& n : dualsim::config_notes(p.config))
      std::cout << "# " << n << "\n";
    std::cout << dualsim::emit_config(p.config);
    return 0;
  }

  if (*analyze) {
    try {
      std::cout << dualsim::analyze_dir(analyze_path);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }

  ConfigParse p = dualsim::parse_config_file(config_path);
  if (!p.ok()) {
    print_errors(p.errors);
    return 2;
  }
  RunConfig cfg = p.config;

  if (*sweep) {
    std::vector<VarySpec> specs;
    for (const std::string& arg : vary_args) {
      VarySpec vs;
      if (!parse_vary(arg, vs)) {
        std::cerr << "error: --vary expects key=v1,v2,..., got '" << arg
                  << "'\n";
        return 2;
      }
      specs.push_back(std::move(vs));
    }
    ConfigParse swept = sweep_config(cfg, specs);
    if (!swept.ok()) {
      print_errors(swept.errors);
      return 2;
    }
    cfg = swept.config;
  }

  if (seed_given) {
    // apply_overrides strips case.* keys (it builds per-case variants), so
    // rewrite the document directly to keep the cases.
    std::string doc;
    for (const auto& [k, v] : cfg.kv)
      if (k != "engine.seeds") doc += k + " = " + v + "\n";
    doc += "engine.seeds = " + std::to_string(seed_flag) + "\n";
    ConfigParse p2 = dualsim::parse_config_text(doc);
    if (!p2.ok()) {
      print_errors(p2.errors);
      return 2;
    }
    cfg = p2.config;
  }

  return execute(cfg, out_flag, threads, dry_run);
}
