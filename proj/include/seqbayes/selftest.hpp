#pragma once

// Acceptance self-test: runs criteria 1-11 and writes one report per run.
//
//   <out>/report.json   deterministic per seed (criteria, checks, metrics)
//   <out>/timing.json   wall-clock figures and timing checks
//   <out>/*.csv         per-study data
//   <out>/repeat/       second deterministic pass (criterion 11)

#include "seqbayes/report.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace seqbayes::cli {

inline constexpr std::uint64_t kDefaultSelftestSeed = 20260417;

struct SelftestOptions {
  std::uint64_t seed = kDefaultSelftestSeed;
  std::string out = "selftest_out";
  bool repeat = true;       // criterion 11 in-process
  bool run_timing = true;   // criterion 6 benchmark and runtime limits
  std::size_t ddp_replications = 100000;
  std::size_t bench_n = 500;
  int bench_repetitions = 3;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  bool skipped = false;
  double seconds = 0.0;
  double limit_seconds = 0.0;  // 0: no runtime limit
  std::string summary;
  RunReport report;
};

struct SelftestResult {
  std::vector<CriterionResult> criteria;
  bool passed() const;
};

SelftestResult run_selftest(const SelftestOptions& opt);

/// Files under `dir` that must be identical across runs with one seed (relative paths, sorted).
std::vector<std::string> deterministic_files(const std::string& dir);

struct OutputComparison {
  bool identical = true;
  std::size_t files = 0;
  std::vector<std::string> differences;
};

OutputComparison compare_outputs(const std::string& a, const std::string& b);

/// One line per criterion: "criterion  N  PASS|FAIL|SKIP  title  (summary)".
void print_summary(std::ostream& os, const SelftestResult& r);

}  // namespace seqbayes::cli
