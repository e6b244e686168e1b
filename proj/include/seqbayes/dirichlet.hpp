#pragma once

// Dirichlet processes on the real line or on a finite label set, their
// projections onto finite partitions, and truncated stick-breaking draws.

#include "seqbayes/rng.hpp"
#include "seqbayes/scalar.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace seqbayes::dp {

/// A point of the label space: a symbolic label or a real number.
using Location = std::variant<std::string, double>;

std::string location_string(const Location& loc);

/// Real coincidences are resolved within this distance.
inline constexpr double kLocationTolerance = 1e-12;

class UnsupportedBase : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class PartitionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double normal_cdf(double z);
/// Upper tail 1 - Phi(z), accurate for large z.
double normal_sf(double z);

/// Continuous base distribution with closed-form cell probabilities.
struct BaseDistribution {
  enum class Kind { Uniform, Normal };
  Kind kind = Kind::Normal;
  double a = 0.0;  // uniform: lower bound; normal: mean
  double b = 1.0;  // uniform: upper bound; normal: standard deviation

  static BaseDistribution uniform(double lo, double hi);
  static BaseDistribution normal(double mean, double sd);
  static BaseDistribution standard_normal() { return normal(0.0, 1.0); }
  /// "uniform" or "normal"; anything else throws UnsupportedBase.
  static BaseDistribution parse(const std::string& kind, double a, double b);

  std::string name() const;
  double cdf(double x) const;
  /// CDF as an exact rational; exact for the uniform family, the rational value
  /// of the double CDF for the normal family. Infinite arguments map to 0 / 1.
  Rational cdf_rational(double x) const;
  double quantile(double u) const;
  /// Quantile of Phi(z), computed without the round trip through u where possible.
  double from_normal_score(double z) const;
};

struct Atom {
  Location location;
  Rational weight;
};

struct DiffusePart {
  BaseDistribution base;
  Rational mass;
};

/// Finite base measure alpha = sum_i w_i delta_{a_i} + c * G0.
class DirichletMeasure {
 public:
  DirichletMeasure(std::vector<Atom> atoms, std::optional<DiffusePart> diffuse = std::nullopt);

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::optional<DiffusePart>& diffuse() const { return diffuse_; }
  Rational total_mass() const;

 private:
  std::vector<Atom> atoms_;
  std::optional<DiffusePart> diffuse_;
};

/// Finite measurable partition of the label space.
/// Interval partitions: cuts c_1 < ... < c_k give cells (-inf, c_1), [c_1, c_2), ..., [c_k, inf).
/// Label partitions: disjoint label cells covering a finite universe.
class Partition {
 public:
  static Partition intervals(std::vector<double> cuts);
  static Partition labels(std::vector<std::string> universe, std::vector<std::vector<std::string>> cells);

  std::size_t size() const;
  bool is_interval() const { return interval_; }
  const std::vector<double>& cuts() const { return cuts_; }

  std::size_t cell_of(const Location& loc) const;
  /// Probability of a cell under a continuous base.
  Rational base_mass(const BaseDistribution& base, std::size_t cell) const;
  /// Cell map onto `coarser`; throws PartitionError unless this partition refines it.
  std::vector<std::size_t> coarsening_map(const Partition& coarser) const;

  std::string describe() const;

 private:
  bool interval_ = true;
  std::vector<double> cuts_;
  std::vector<std::string> universe_;
  std::vector<std::vector<std::string>> cells_;
  std::vector<std::size_t> label_cell_;  // universe index -> cell
};

/// Dirichlet distribution parameters over partition cells.
struct DirichletFinite {
  std::vector<Rational> params;

  DirichletFinite() = default;
  explicit DirichletFinite(std::vector<Rational> p);
  std::size_t size() const { return params.size(); }
  Rational total() const;
  std::vector<double> mean() const;
  std::vector<double> variance() const;
  friend bool operator==(const DirichletFinite&, const DirichletFinite&) = default;
};

DirichletMeasure dp_posterior(const DirichletMeasure& alpha, std::span<const Location> observations);
DirichletFinite project(const DirichletMeasure& alpha, const Partition& part);
DirichletFinite coarsen(const DirichletFinite& d, std::span<const std::size_t> mapping, std::size_t coarse_size);
/// Conjugate finite update: one more observation in `cell`.
DirichletFinite count_update(const DirichletFinite& d, std::size_t cell);

/// Draw from a random discrete measure: atoms with weights summing to one.
struct DiscreteMeasure {
  std::vector<Location> atoms;
  std::vector<double> weights;
};

/// Beta(1, concentration) variate as the quantile of Phi(z).
double beta1_from_normal_score(double z, double concentration);

/// Stick weights V_i prod_{j<i}(1 - V_j); the last stick takes all remaining mass.
std::vector<double> stick_weights(std::span<const double> v);

/// Draw from alpha / |alpha| driven by a standard normal score.
Location draw_from_base(const DirichletMeasure& alpha, double z);

/// E[residual stick mass] after N sticks: (M / (1 + M))^N.
double truncation_bias_bound(double mass, std::size_t truncation);

/// Truncated stick-breaking draw. Per stick, one standard normal drives the Beta(1, M)
/// variate and a second one drives the atom.
DiscreteMeasure stick_breaking_sample(const DirichletMeasure& alpha, std::size_t truncation, Engine& rng);
DiscreteMeasure stick_breaking_sample(const DirichletMeasure& alpha, std::size_t truncation, std::uint64_t seed);

/// Cell masses of a discrete measure.
std::vector<double> project_sample(const DiscreteMeasure& g, const Partition& part);

struct ProjectiveReport {
  bool passed = true;
  double max_deviation = 0.0;
  std::size_t pairs_checked = 0;
  std::vector<std::string> failures;
};

/// For a coarse-to-fine chain of partitions, checks on every adjacent pair that
/// projecting the posterior commutes with coarsening, and that the finite
/// conjugate update commutes with coarsening. Also checks projection against the
/// finite count update on every level.
ProjectiveReport check_projective(const DirichletMeasure& alpha, std::span<const Partition> chain,
                                  std::span<const Location> observations);

/// Random alpha on [0, 1] (rational atoms plus a uniform or normal diffuse part),
/// a coarse-to-fine chain of interval partitions and observations, for property checks.
struct RandomProjectiveCase {
  DirichletMeasure alpha;
  std::vector<Partition> chain;
  std::vector<Location> observations;
};
RandomProjectiveCase random_projective_case(std::uint64_t seed, std::size_t levels, std::size_t n_obs);

}  // namespace seqbayes::dp
