#pragma once

// Dependent Dirichlet processes over a real input space.
//
// Stick i at input x uses V_i(x) ~ Beta(1, alpha(x)) and atom theta_i(x) ~ G0_x.
// Across inputs both are coupled through Gaussian copulas: one correlated
// normal vector per stick for the V's and one for the atoms, mapped through
// the marginal quantile functions.

#include "seqbayes/dirichlet.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace seqbayes::ddp {

class NonPsdCorrelation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pivot tolerance for the correlation factorization.
inline constexpr double kCorrelationJitter = 1e-10;

struct CopulaSpec {
  std::string name;
  std::function<double(double, double)> corr;

  static CopulaSpec comonotone();
  static CopulaSpec independent();
  /// exp(-|x - x'| / length_scale)
  static CopulaSpec exponential(double length_scale);
};

struct DdpSpec {
  std::function<double(double)> alpha_fn;
  std::function<dp::BaseDistribution(double)> base_fn;
  CopulaSpec copula_v;
  CopulaSpec copula_theta;
  std::size_t truncation = 1;
};

/// Log-linear concentration and linearly drifting base, as used by the CLI and checks:
///   alpha(x) = exp(log_alpha + log_alpha_slope * x)
///   normal base:  N(base_a + base_slope * x, base_b)
///   uniform base: U(base_a + base_slope * x, base_b + base_slope * x)
struct ParametricDdp {
  double log_alpha = 0.0;
  double log_alpha_slope = 0.0;
  std::string base_kind = "normal";
  double base_a = 0.0;
  double base_b = 1.0;
  double base_slope = 0.0;
  std::string copula_v = "exponential";  // exponential | comonotone | independent
  double copula_v_length = 1.0;
  std::string copula_theta = "exponential";
  double copula_theta_length = 1.0;
  std::size_t truncation = 0;            // 0: choose from truncation_bias
  double truncation_bias = 1e-4;

  DdpSpec to_spec(std::span<const double> inputs) const;
};

CopulaSpec parse_copula(const std::string& kind, double length_scale);

/// Smallest N with (a / (1 + a))^N < bound.
std::size_t truncation_for_bias(double alpha, double bound);

/// Factor F with F F^T equal to the correlation matrix over `xs` (pivoted LDL^T,
/// so perfectly correlated inputs produce identical normal scores).
class CorrelationFactor {
 public:
  CorrelationFactor(const CopulaSpec& copula, std::span<const double> xs);
  std::vector<double> apply(std::span<const double> z) const;
  const Eigen::MatrixXd& matrix() const { return factor_; }

 private:
  Eigen::MatrixXd factor_;
};

/// One sampled path restricted to finitely many inputs; indices are [input][stick].
struct DdpPath {
  std::vector<double> inputs;
  std::vector<std::vector<double>> atoms;
  std::vector<std::vector<double>> weights;

  dp::DiscreteMeasure at(std::size_t site) const;
};

DdpPath sample_path(const DdpSpec& spec, std::span<const double> xs, Engine& rng);
DdpPath sample_path(const DdpSpec& spec, std::span<const double> xs, std::uint64_t seed);

struct CellMoments {
  double mean = 0.0;
  double variance = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;
};

/// R paths projected onto a partition at every input.
struct ProjectionSample {
  std::vector<double> inputs;
  std::size_t cells = 0;
  std::size_t replications = 0;
  std::vector<double> values;           // [r][site][cell], row-major
  std::vector<CellMoments> moments;     // [site][cell]

  double value(std::size_t r, std::size_t site, std::size_t cell) const {
    return values[(r * inputs.size() + site) * cells + cell];
  }
  const CellMoments& moment(std::size_t site, std::size_t cell) const { return moments[site * cells + cell]; }
};

/// Replicate r is drawn from substream (seed, r).
ProjectionSample finite_projection(const DdpSpec& spec, std::span<const double> xs, const dp::Partition& part,
                                   std::uint64_t seed, std::size_t replications);

struct MeanCheckEntry {
  double input;
  std::size_t cell;
  double target_mean;
  double mean;
  double z_mean;
  double target_variance;
  double variance;
  double z_variance;
};

struct MeanCheckReport {
  std::vector<MeanCheckEntry> entries;
  bool passed = false;           // every |z_mean| <= 3
  double truncation_bias = 0.0;  // max over inputs of (alpha / (1 + alpha))^N
  std::size_t replications = 0;
  double fraction_within = 0.0;  // share of all mean and variance z-scores <= 3
};

MeanCheckReport mean_measure_check(const DdpSpec& spec, std::span<const double> xs, const dp::Partition& part,
                                   std::uint64_t seed, std::size_t replications);

struct LabeledPoint {
  double x;
  double y;
};

/// Self-normalized importance estimate of the cellwise posterior predictive at the
/// test inputs: paths are weighted by the probability they give the observed cells.
struct DdpPredictive {
  std::vector<double> test;
  std::size_t cells = 0;
  std::vector<double> joint;         // over cells^m, row-major in test order
  std::vector<double> marginals;     // [test][cell]
  std::vector<double> marginal_se;   // [test][cell]
  double effective_sample_size = 0.0;
  bool low_ess = false;
  std::size_t replications = 0;
};

inline constexpr double kMinEffectiveSampleSize = 100.0;

DdpPredictive ddp_predictive_mc(const DdpSpec& spec, std::span<const LabeledPoint> train,
                                std::span<const double> test, const dp::Partition& part, std::uint64_t seed,
                                std::size_t replications);

}  // namespace seqbayes::ddp
