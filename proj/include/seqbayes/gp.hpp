#pragma once

// Gaussian-process regression with noisy training measurements y = f(x) + e(x).
//
// Two routes to the predictive law of f at test inputs:
//   batch      one symmetric (n x n) solve against K_xx + noise
//   recursive  build the joint Gaussian over tests and noisy training values
//              once, then condition on one training value at a time
// plus a streaming predictor that accepts observations one by one without
// knowing them in advance.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqbayes::gp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A deterministic observation that contradicts the belief's point mass.
class InconsistentObservation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDegenerateVariance = 1e-12;
inline constexpr double kConsistencyTolerance = 1e-6;
inline constexpr double kJitterScale = 1e-10;

enum class KernelFamily { Rbf, Matern32, Constant };

KernelFamily parse_kernel_family(const std::string& name);
std::string kernel_family_name(KernelFamily family);

struct GpPrior {
  std::function<double(double)> mean;
  std::function<double(double, double)> cov;
  std::function<double(double)> noise_var;
};

/// Stationary prior with zero mean and constant noise variance.
GpPrior make_prior(KernelFamily family, double length_scale, double signal_var, double noise_var);

enum class Coord { Test, Train };

struct GaussianBelief {
  Vector mean;
  Matrix cov;
  std::vector<Coord> tags;
  std::vector<double> inputs;  // input location of each coordinate

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
  /// Throws unless cov is symmetric within 1e-10 and PSD within -1e-8 * trace.
  void validate() const;
};

struct Observation {
  double x;
  double y;
};

GaussianBelief build_joint(const GpPrior& prior, std::span<const double> test, std::span<const double> train);

/// Conditions on the training coordinate `coord` taking value y, then removes it.
GaussianBelief condition_one(const GaussianBelief& belief, std::size_t coord, double y);
void condition_one_in_place(GaussianBelief& belief, std::size_t coord, double y);

GaussianBelief batch_predictive(const GpPrior& prior, std::span<const double> test,
                                std::span<const Observation> train);

GaussianBelief recursive_predictive(const GpPrior& prior, std::span<const double> test,
                                    std::span<const Observation> train);

/// Online predictor over a fixed set of test inputs.
///
/// Each new observation is appended as a noisy coordinate whose posterior mean and
/// cross-covariances with the tests are computed from a growing Cholesky factor of
/// the consumed training block, then conditioned away with condition_one.
/// Cost per observation is O(n^2 + n m + m^2).
class StreamingPredictor {
 public:
  StreamingPredictor(GpPrior prior, std::vector<double> test);

  void observe(double x, double y);
  const GaussianBelief& belief() const { return belief_; }
  std::size_t consumed() const { return n_; }

 private:
  GpPrior prior_;
  std::vector<double> test_;
  GaussianBelief belief_;
  std::vector<double> xs_;
  Matrix chol_;   // lower factor of K_xx + noise, top-left n x n block used
  Matrix w_;      // chol^{-1} K_{x,test}, top n rows used
  Vector z_;      // chol^{-1} (y - m(x)), top n entries used
  std::size_t n_ = 0;

  void reserve(std::size_t n);
};

struct RandomInstance {
  GpPrior prior;
  std::vector<double> test;
  std::vector<Observation> train;
  double length_scale;
  double noise_var;
};

/// Random regression instance: inputs uniform on [0, 10], y = sin(x) + noise.
RandomInstance random_instance(std::uint64_t seed, KernelFamily family, std::size_t n, std::size_t m);

struct BenchRow {
  std::size_t n;
  std::string method;
  double median_s;
  int reps;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<double> batch_step;      // median refit time at each n = 1..n_max
  std::vector<double> streaming_step;  // median streaming update time at each n
  std::size_t crossover;               // smallest n after which cumulative streaming < batch; 0 if none
};

/// Times (a) a full batch refit at each arriving observation and (b) one streaming update.
/// Rows are emitted for every n in `sizes` (strictly ascending, <= stream length).
BenchResult benchmark(const GpPrior& prior, std::span<const double> test, std::span<const Observation> stream,
                      std::span<const std::size_t> sizes, int repetitions);

std::size_t cumulative_crossover(std::span<const double> batch_step, std::span<const double> streaming_step);

}  // namespace seqbayes::gp
