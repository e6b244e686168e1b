#pragma once

// Config-driven experiments. Operations per family:
//
//   finite  batch-online | predictive | predict | invert
//   gp      compare | consistency | predict | bench
//   dp      posterior | project | sample | check
//   ddp     sample | project | mean-check | single-site | predict
//
// Each run writes report.json, timing.json and its data files into the
// config's output directory.

#include "seqbayes/config.hpp"
#include "seqbayes/report.hpp"

#include <iosfwd>

namespace seqbayes::cli {

/// Runs the configured operation and writes its outputs. Throws
/// ConfigParseError / ConfigValidationError on unusable configs.
RunReport run_experiment(const ExperimentConfig& config);

/// kExitOk if every check passed, kExitCheckFailed otherwise.
int exit_code(const RunReport& report);

/// Maps an in-flight exception to an exit code and prints it to `err`.
int report_exception(std::ostream& err);

}  // namespace seqbayes::cli
