#include "seqbayes/selftest.hpp"

#include "seqbayes/rng.hpp"
#include "seqbayes/scalar.hpp"
#include "seqbayes/studies.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace seqbayes::cli {

namespace fs = std::filesystem;

namespace {

struct Criterion {
  int id;
  std::string title;
  double limit_seconds;
  std::function<void(RunReport&, const std::string&)> run;
};

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

std::string summarize(const RunReport& rep) {
  std::string s;
  for (const auto& c : rep.checks) {
    if (!s.empty()) s += "; ";
    s += c.name + " " + format_value(c.value) + (c.passed ? "" : " FAILED") + " (tol " + format_value(c.tolerance) + ")";
  }
  for (const auto& c : rep.timing_checks) {
    if (!s.empty()) s += "; ";
    s += c.name + " " + format_value(c.value) + (c.passed ? "" : " FAILED");
  }
  return s;
}

std::vector<Criterion> criteria(const SelftestOptions& opt, bool with_timing) {
  const std::uint64_t seed = opt.seed;
  FiniteStudy finite;
  GpStudy gp;
  DirichletStudy dir;
  DdpStudy ddp;
  ddp.replications = opt.ddp_replications;
  BenchStudy bench;
  bench.n_max = opt.bench_n;
  bench.repetitions = opt.bench_repetitions;

  std::vector<Criterion> out;
  out.push_back({1, "batch = online inversion", 30.0,
                 [=](RunReport& r, const std::string& d) { study_batch_online(r, d, seed, finite); }});
  out.push_back({2, "operator-equation verification", 0.0,
                 [=](RunReport& r, const std::string& d) { study_operator_equation(r, d, seed, finite); }});
  out.push_back({3, "recursive = batch posterior predictive", 60.0,
                 [=](RunReport& r, const std::string& d) { study_finite_predictive(r, d, seed, finite); }});
  out.push_back({4, "consistency marginalization", 0.0, [=](RunReport& r, const std::string& d) {
                   study_finite_consistency(r, d, seed, finite);
                   study_gp_consistency(r, d, seed, gp);
                 }});
  out.push_back({5, "GP batch = recursive", 120.0,
                 [=](RunReport& r, const std::string& d) { study_gp_compare(r, d, seed, gp); }});
  if (with_timing)
    out.push_back({6, "GP streaming performance", 0.0,
                   [=](RunReport& r, const std::string& d) { study_gp_benchmark(r, d, seed, bench); }});
  out.push_back({7, "Dirichlet conjugacy", 0.0,
                 [=](RunReport& r, const std::string& d) { study_dp_conjugacy(r, d, seed, dir); }});
  out.push_back({8, "projective commutativity", 0.0,
                 [=](RunReport& r, const std::string& d) { study_dp_projective(r, d, seed, dir); }});
  out.push_back({9, "DDP marginals and mean measure", 300.0,
                 [=](RunReport& r, const std::string& d) { study_ddp_mean_measure(r, d, seed, ddp); }});
  out.push_back({10, "DDP single-site degeneration", 0.0,
                 [=](RunReport& r, const std::string& d) { study_ddp_single_site(r, d, seed, ddp); }});
  return out;
}

json options_json(const SelftestOptions& opt) {
  return {{"ddp_replications", opt.ddp_replications},
          {"bench_n", opt.bench_n},
          {"bench_repetitions", opt.bench_repetitions}};
}

std::vector<CriterionResult> run_pass(const SelftestOptions& opt, const std::string& dir, bool with_timing) {
  std::vector<CriterionResult> results;
  for (auto& c : criteria(opt, with_timing)) {
    CriterionResult r;
    r.id = c.id;
    r.title = c.title;
    r.limit_seconds = with_timing ? c.limit_seconds : 0.0;
    r.report.command = "selftest";
    r.report.seed = opt.seed;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(r.report, dir);
    } catch (const std::exception& e) {
      r.report.add_check("completed", false, 1.0, 0.0, e.what());
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.report.timing["seconds"] = r.seconds;
    if (r.limit_seconds > 0.0)
      r.report.add_timing_check("runtime_seconds", r.seconds < r.limit_seconds, r.seconds, r.limit_seconds,
                                "wall-clock seconds");
    r.passed = r.report.passed();
    r.summary = summarize(r.report);
    if (r.limit_seconds > 0.0)
      r.summary += "; " + format_value(r.seconds) + " s of " + format_value(r.limit_seconds) + " s";
    results.push_back(std::move(r));
  }
  return results;
}

void write_reports(const SelftestOptions& opt, const std::string& dir, const std::vector<CriterionResult>& results) {
  json crit = json::array();
  json timing = json::array();
  bool all = true;
  for (const auto& r : results) {
    if (r.skipped) continue;
    json rj = r.report.to_json();
    if (!r.report.checks.empty()) crit.push_back({{"id", r.id},
                    {"title", r.title},
                    {"checks", rj["checks"]},
                    {"checks_passed", rj["checks_passed"]},
                    {"metrics", rj["metrics"]},
                    {"outputs", rj["outputs"]}});
    all = all && r.report.checks_passed();
    json tc = json::array();
    for (const auto& c : r.report.timing_checks)
      tc.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance},
                    {"detail", c.detail}});
    timing.push_back({{"id", r.id}, {"timing", r.report.timing}, {"timing_checks", tc}});
  }
  json report{{"tool", "seqbayes"},
              {"version", kVersion},
              {"platform", platform_string()},
              {"rng", std::string(kRngName)},
              {"command", "selftest"},
              {"seed", opt.seed},
              {"config", options_json(opt)},
              {"criteria", crit},
              {"checks_passed", all}};
  {
    std::ofstream out(output_path(dir, "report.json"));
    if (!out) throw std::runtime_error("cannot write report.json in '" + dir + "'");
    out << report.dump(2) << '\n';
  }
  std::ofstream out(output_path(dir, "timing.json"));
  if (!out) throw std::runtime_error("cannot write timing.json in '" + dir + "'");
  out << json{{"command", "selftest"}, {"criteria", timing}}.dump(2) << '\n';
}

bool timing_file(const std::string& name) { return name == "timing.json" || name == "gp_bench.csv"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

bool SelftestResult::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.passed || c.skipped; });
}

SelftestResult run_selftest(const SelftestOptions& opt) {
  SelftestResult res;
  res.criteria = run_pass(opt, opt.out, opt.run_timing);
  if (!opt.run_timing) {
    CriterionResult c6;
    c6.id = 6;
    c6.title = "GP streaming performance";
    c6.skipped = true;
    c6.summary = "timing disabled";
    res.criteria.insert(res.criteria.begin() + 5, std::move(c6));
  }

  CriterionResult c11;
  c11.id = 11;
  c11.title = "reproducibility";
  if (opt.repeat) {
    const std::string again = (fs::path(opt.out) / "repeat").string();
    write_reports(opt, again, run_pass(opt, again, false));
    write_reports(opt, opt.out, res.criteria);
    auto cmp = compare_outputs(opt.out, again);
    c11.passed = cmp.identical;
    c11.report.add_check("byte_identical_outputs", cmp.identical, static_cast<double>(cmp.differences.size()), 0.0,
                         std::to_string(cmp.files) + " files compared");
    c11.summary = std::to_string(cmp.files) + " files compared, " + std::to_string(cmp.differences.size()) +
                  " differ";
    for (const auto& d : cmp.differences) c11.summary += "; " + d;
  } else {
    c11.skipped = true;
    c11.summary = "repeat disabled";
  }
  if (!opt.repeat) write_reports(opt, opt.out, res.criteria);
  res.criteria.push_back(std::move(c11));
  return res;
}

std::vector<std::string> deterministic_files(const std::string& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (!timing_file(name)) out.push_back(name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

OutputComparison compare_outputs(const std::string& a, const std::string& b) {
  OutputComparison r;
  auto fa = deterministic_files(a);
  auto fb = deterministic_files(b);
  for (const auto& f : fa)
    if (!std::binary_search(fb.begin(), fb.end(), f)) r.differences.push_back(f + ": missing in " + b);
  for (const auto& f : fb)
    if (!std::binary_search(fa.begin(), fa.end(), f)) r.differences.push_back(f + ": missing in " + a);
  for (const auto& f : fa) {
    if (!std::binary_search(fb.begin(), fb.end(), f)) continue;
    ++r.files;
    if (slurp(fs::path(a) / f) != slurp(fs::path(b) / f)) r.differences.push_back(f + ": contents differ");
  }
  r.identical = r.differences.empty() && r.files > 0;
  return r;
}

void print_summary(std::ostream& os, const SelftestResult& r) {
  for (const auto& c : r.criteria) {
    const char* status = c.skipped ? "SKIP" : c.passed ? "PASS" : "FAIL";
    os << "criterion " << std::setw(2) << c.id << "  " << status << "  " << c.title;
    if (!c.summary.empty()) os << "  (" << c.summary << ")";
    os << '\n';
  }
  os << (r.passed() ? "selftest passed" : "selftest FAILED") << '\n';
}

}  // namespace seqbayes::cli
