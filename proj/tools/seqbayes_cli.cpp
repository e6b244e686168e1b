#include "seqbayes/config.hpp"
#include "seqbayes/experiments.hpp"
#include "seqbayes/selftest.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace seqbayes::cli;

namespace {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<double> tolerance;
  std::vector<std::string> params;
  std::string params_json;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--seed", f.seed, "RNG seed (required by stochastic operations)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--tolerance", f.tolerance, "override the operation's default tolerance");
  cmd->add_option("--param", f.params, "key=value parameter; the value is read as JSON when it parses");
  cmd->add_option("--params", f.params_json, "parameters as one JSON object");
}

json param_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  return v.is_discarded() ? json(text) : v;
}

ExperimentConfig build_config(const std::string& family, const std::string& operation, const CommonFlags& f,
                              json params = json::object()) {
  if (!f.params_json.empty()) {
    json extra;
    try {
      extra = json::parse(f.params_json);
    } catch (const json::parse_error& e) {
      throw ConfigParseError(std::string("--params: ") + e.what());
    }
    if (!extra.is_object()) throw ConfigParseError("--params: expected a JSON object");
    params.update(extra);
  }
  for (const auto& kv : f.params) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigParseError("--param '" + kv + "': expected key=value");
    params[kv.substr(0, eq)] = param_value(kv.substr(eq + 1));
  }
  json doc{{"family", family}, {"operation", operation}, {"output", f.out}, {"params", params}};
  if (f.seed) doc["seed"] = *f.seed;
  if (f.tolerance) doc["tolerance"] = *f.tolerance;
  return config_from_json(doc, "command line");
}

int run_and_print(const ExperimentConfig& c) {
  auto rep = run_experiment(c);
  for (const auto& ch : rep.checks)
    std::cout << "check " << ch.name << "  " << (ch.passed ? "PASS" : "FAIL") << "  value " << ch.value
              << "  tolerance " << ch.tolerance << '\n';
  for (const auto& ch : rep.timing_checks)
    std::cout << "timing " << ch.name << "  " << (ch.passed ? "PASS" : "FAIL") << "  value " << ch.value << '\n';
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "wrote " << output_path(c.output, "report.json") << '\n';
  return exit_code(rep);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact and numerical sequential Bayesian inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment config (JSON)");
  run->add_option("config", config_path, "config file")->required();

  SelftestOptions st;
  bool no_repeat = false, skip_timing = false;
  auto* self = app.add_subcommand("selftest", "run the acceptance criteria");
  self->add_option("--seed", st.seed, "RNG seed");
  self->add_option("--out", st.out, "output directory");
  self->add_flag("--no-repeat", no_repeat, "skip the in-process reproducibility rerun");
  self->add_flag("--skip-timing", skip_timing, "skip the benchmark and runtime limits");
  self->add_option("--ddp-replications", st.ddp_replications, "DDP replications")->check(CLI::Range(1000, 10000000));
  self->add_option("--bench-n", st.bench_n, "benchmark stream length")->check(CLI::Range(1, 5000));

  std::string model, scalar = "exact-rational", method = "both";
  std::vector<std::string> train, test;
  CommonFlags pf;
  auto* predict = app.add_subcommand("predict", "finite posterior predictive from a model file");
  predict->add_option("--model", model, "model JSON")->required();
  predict->add_option("--train", train, "training pair input=label (repeatable)");
  predict->add_option("--test", test, "test input (repeatable)")->required();
  predict->add_option("--scalar", scalar, "exact-rational or float64");
  predict->add_option("--method", method, "batch, recursive or both");
  add_common(predict, pf);

  std::string kernel, prior, outcome;
  CommonFlags inf;
  auto* invert = app.add_subcommand("invert", "Bayesian inversion of a finite kernel");
  invert->add_option("--kernel", kernel, "kernel JSON")->required();
  invert->add_option("--prior", prior, "prior JSON")->required();
  invert->add_option("--outcome", outcome, "report only this outcome");
  invert->add_option("--scalar", scalar, "exact-rational or float64");
  add_common(invert, inf);

  std::map<std::string, std::pair<std::string, CommonFlags>> family_args;
  for (const char* fam : {"finite", "gp", "dp", "ddp"}) {
    auto& [op, flags] = family_args[fam];
    auto* cmd = app.add_subcommand(fam, std::string("run a ") + fam + " operation");
    cmd->add_option("operation", op, "operation name")->required();
    add_common(cmd, flags);
  }

  std::size_t n_max = 500, m = 10;
  int reps = 3;
  CommonFlags bf;
  auto* bench = app.add_subcommand("bench", "streaming vs batch GP timing");
  bench->add_option("--n-max", n_max, "stream length");
  bench->add_option("--m", m, "test points");
  bench->add_option("--reps", reps, "repetitions per size");
  add_common(bench, bf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (*run) return run_and_print(load_config(config_path));
    if (*self) {
      st.repeat = !no_repeat;
      st.run_timing = !skip_timing;
      auto res = run_selftest(st);
      print_summary(std::cout, res);
      return res.passed() ? kExitOk : kExitCheckFailed;
    }
    if (*predict) {
      json tr = json::array();
      for (const auto& t : train) {
        auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigParseError("--train '" + t + "': expected input=label");
        tr.push_back({t.substr(0, eq), t.substr(eq + 1)});
      }
      json p{{"model", model}, {"train", tr}, {"test", test}, {"scalar", scalar}, {"method", method}};
      return run_and_print(build_config("finite", "predict", pf, p));
    }
    if (*invert) {
      json p{{"kernel", kernel}, {"prior", prior}, {"scalar", scalar}};
      if (!outcome.empty()) p["outcome"] = outcome;
      return run_and_print(build_config("finite", "invert", inf, p));
    }
    if (*bench) {
      json p{{"n_max", n_max}, {"m", m}, {"repetitions", reps}};
      if (!bf.seed) bf.seed = kDefaultSelftestSeed;
      return run_and_print(build_config("gp", "bench", bf, p));
    }
    for (auto& [fam, args] : family_args)
      if (*app.get_subcommand(fam)) return run_and_print(build_config(fam, args.first, args.second));
  } catch (...) {
    return report_exception(std::cerr);
  }
  return kExitParse;
}
