#pragma once

// Randomized verification studies. Each one adds checks and metrics to a
// RunReport and writes its data files into an output directory. The
// acceptance suite and the `run` subcommand share them.

#include "seqbayes/ddp.hpp"
#include "seqbayes/gp.hpp"
#include "seqbayes/random_finite.hpp"
#include "seqbayes/report.hpp"

#include <string>

namespace seqbayes::cli {

struct FiniteStudy {
  std::size_t models = 100;
  FiniteModelBounds bounds;
  std::size_t max_n = 5;
  std::size_t max_m = 3;
  double float_tolerance = 1e-12;
};

/// Sequential vs batch posteriors, rational and float, on the same random models.
void study_batch_online(RunReport& rep, const std::string& dir, std::uint64_t seed, const FiniteStudy& s);
/// verify_inversion on every inversion made by the batch and sequential paths.
void study_operator_equation(RunReport& rep, const std::string& dir, std::uint64_t seed, const FiniteStudy& s);
/// Recursive vs batch predictive and slicing of the full joint.
void study_finite_predictive(RunReport& rep, const std::string& dir, std::uint64_t seed, const FiniteStudy& s);
/// (m+1)-point predictive marginalized against the m-point predictive.
void study_finite_consistency(RunReport& rep, const std::string& dir, std::uint64_t seed, const FiniteStudy& s);

struct GpStudy {
  std::size_t instances = 50;
  std::size_t max_n = 200;
  std::size_t max_m = 10;
  gp::KernelFamily family = gp::KernelFamily::Rbf;
  double mean_tolerance = 1e-8;     // relative: max |diff| / max(1, max |batch mean|)
  double cov_tolerance = 1e-6;      // absolute, entrywise
  double kalman_tolerance = 1e-10;  // absolute
  double consistency_tolerance = 1e-10;
};

void study_gp_compare(RunReport& rep, const std::string& dir, std::uint64_t seed, const GpStudy& s);
void study_gp_consistency(RunReport& rep, const std::string& dir, std::uint64_t seed, const GpStudy& s);

struct BenchStudy {
  std::size_t n_max = 500;
  std::size_t m = 10;
  int repetitions = 3;
  std::vector<std::size_t> sizes;  // reported rows; empty: 1, 10, 20, ..., n_max
  gp::KernelFamily family = gp::KernelFamily::Rbf;
};

/// Writes gp_bench.csv; the crossover check is a timing check.
void study_gp_benchmark(RunReport& rep, const std::string& dir, std::uint64_t seed, const BenchStudy& s);

struct DirichletStudy {
  std::size_t cases = 100;
  std::size_t levels = 3;
  std::size_t observations = 5;
};

void study_dp_conjugacy(RunReport& rep, const std::string& dir, std::uint64_t seed, const DirichletStudy& s);
void study_dp_projective(RunReport& rep, const std::string& dir, std::uint64_t seed, const DirichletStudy& s);

struct DdpStudy {
  std::size_t specs = 4;
  std::size_t sites = 3;
  std::size_t replications = 100000;
  double truncation_bias = 1e-4;
  double z_limit = 3.0;
  double min_fraction = 0.95;
};

struct DdpCase {
  ddp::ParametricDdp params;
  std::vector<double> inputs;
  std::vector<double> cuts;
};

/// Random DDP specifications with inputs in [0, 2] and cuts at base quantiles.
std::vector<DdpCase> random_ddp_cases(std::uint64_t seed, const DdpStudy& s);

void study_ddp_mean_measure(RunReport& rep, const std::string& dir, std::uint64_t seed, const DdpStudy& s);
/// One input: DDP projections against the plain stick-breaking sampler (two-sample z-scores).
void study_ddp_single_site(RunReport& rep, const std::string& dir, std::uint64_t seed, const DdpStudy& s);

}  // namespace seqbayes::cli
