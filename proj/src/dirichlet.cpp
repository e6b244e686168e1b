#include "seqbayes/dirichlet.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

namespace seqbayes::dp {

std::string location_string(const Location& loc) {
  if (const auto* s = std::get_if<std::string>(&loc)) return *s;
  return format_double(std::get<double>(loc));
}

namespace {

bool same_location(const Location& a, const Location& b) {
  if (a.index() != b.index()) return false;
  if (const auto* s = std::get_if<std::string>(&a)) return *s == std::get<std::string>(b);
  return std::abs(std::get<double>(a) - std::get<double>(b)) <= kLocationTolerance;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------
// BaseDistribution

BaseDistribution BaseDistribution::uniform(double lo, double hi) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) throw UnsupportedBase("uniform base needs lo < hi");
  return {Kind::Uniform, lo, hi};
}

BaseDistribution BaseDistribution::normal(double mean, double sd) {
  if (!(std::isfinite(mean) && std::isfinite(sd) && sd > 0.0)) throw UnsupportedBase("normal base needs sd > 0");
  return {Kind::Normal, mean, sd};
}

BaseDistribution BaseDistribution::parse(const std::string& kind, double a, double b) {
  if (kind == "uniform") return uniform(a, b);
  if (kind == "normal") return normal(a, b);
  throw UnsupportedBase("unsupported base distribution '" + kind + "' (only uniform and normal have analytic cell masses)");
}

std::string BaseDistribution::name() const {
  return (kind == Kind::Uniform ? "uniform(" : "normal(") + format_double(a) + "," + format_double(b) + ")";
}

double BaseDistribution::cdf(double x) const {
  if (kind == Kind::Uniform) {
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    return (x - a) / (b - a);
  }
  return normal_cdf((x - a) / b);
}

Rational BaseDistribution::cdf_rational(double x) const {
  if (std::isinf(x)) return x < 0 ? Rational(0) : Rational(1);
  if (kind == Kind::Uniform) {
    if (x <= a) return Rational(0);
    if (x >= b) return Rational(1);
    return (Rational(x) - Rational(a)) / (Rational(b) - Rational(a));
  }
  return Rational(cdf(x));
}

double BaseDistribution::quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("quantile: probability outside [0, 1]");
  if (kind == Kind::Uniform) return a + (b - a) * u;
  if (u <= 0.0) return -std::numeric_limits<double>::infinity();
  if (u >= 1.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal_distribution<double>(a, b), u);
}

double BaseDistribution::from_normal_score(double z) const {
  if (kind == Kind::Normal) return a + b * z;
  return a + (b - a) * normal_cdf(z);
}

// ---------------------------------------------------------------------------
// DirichletMeasure

DirichletMeasure::DirichletMeasure(std::vector<Atom> atoms, std::optional<DiffusePart> diffuse)
    : atoms_(std::move(atoms)), diffuse_(std::move(diffuse)) {
  for (const auto& a : atoms_)
    if (a.weight <= 0) throw std::invalid_argument("atom weights must be positive");
  if (diffuse_ && diffuse_->mass < 0) throw std::invalid_argument("diffuse mass must be nonnegative");
  if (total_mass() <= 0) throw std::invalid_argument("Dirichlet base measure needs positive total mass");
}

Rational DirichletMeasure::total_mass() const {
  Rational m(0);
  for (const auto& a : atoms_) m += a.weight;
  if (diffuse_) m += diffuse_->mass;
  return m;
}

// ---------------------------------------------------------------------------
// Partition

Partition Partition::intervals(std::vector<double> cuts) {
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (!std::isfinite(cuts[i])) throw PartitionError("interval cuts must be finite");
    if (i > 0 && !(cuts[i - 1] < cuts[i])) throw PartitionError("interval cuts must be strictly increasing");
  }
  Partition p;
  p.interval_ = true;
  p.cuts_ = std::move(cuts);
  return p;
}

Partition Partition::labels(std::vector<std::string> universe, std::vector<std::vector<std::string>> cells) {
  if (cells.empty()) throw PartitionError("partition needs at least one cell");
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < universe.size(); ++i)
    if (!where.emplace(universe[i], i).second) throw PartitionError("duplicate label '" + universe[i] + "'");
  Partition p;
  p.interval_ = false;
  p.label_cell_.assign(universe.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].empty()) throw PartitionError("empty partition cell");
    for (const auto& l : cells[c]) {
      auto it = where.find(l);
      if (it == where.end()) throw PartitionError("cell label '" + l + "' is not in the universe");
      if (p.label_cell_[it->second] != std::numeric_limits<std::size_t>::max())
        throw PartitionError("cells overlap at '" + l + "'");
      p.label_cell_[it->second] = c;
    }
  }
  for (std::size_t i = 0; i < universe.size(); ++i)
    if (p.label_cell_[i] == std::numeric_limits<std::size_t>::max())
      throw PartitionError("cells do not cover '" + universe[i] + "'");
  p.universe_ = std::move(universe);
  p.cells_ = std::move(cells);
  return p;
}

std::size_t Partition::size() const { return interval_ ? cuts_.size() + 1 : cells_.size(); }

std::size_t Partition::cell_of(const Location& loc) const {
  if (interval_) {
    const auto* x = std::get_if<double>(&loc);
    if (!x) throw PartitionError("label location '" + location_string(loc) + "' on an interval partition");
    return static_cast<std::size_t>(std::upper_bound(cuts_.begin(), cuts_.end(), *x) - cuts_.begin());
  }
  const auto* s = std::get_if<std::string>(&loc);
  if (!s) throw PartitionError("real location on a label partition");
  auto it = std::find(universe_.begin(), universe_.end(), *s);
  if (it == universe_.end()) throw PartitionError("label '" + *s + "' is not in the universe");
  return label_cell_[static_cast<std::size_t>(it - universe_.begin())];
}

Rational Partition::base_mass(const BaseDistribution& base, std::size_t cell) const {
  if (!interval_) throw UnsupportedBase("continuous base measure on a finite label partition");
  if (cell >= size()) throw PartitionError("cell index out of range");
  constexpr double inf = std::numeric_limits<double>::infinity();
  double lo = cell == 0 ? -inf : cuts_[cell - 1];
  double hi = cell == cuts_.size() ? inf : cuts_[cell];
  return base.cdf_rational(hi) - base.cdf_rational(lo);
}

std::vector<std::size_t> Partition::coarsening_map(const Partition& coarser) const {
  if (interval_ != coarser.interval_) throw PartitionError("partitions of different kinds");
  std::vector<std::size_t> map(size());
  if (interval_) {
    for (double c : coarser.cuts_)
      if (!std::binary_search(cuts_.begin(), cuts_.end(), c))
        throw PartitionError("coarse cut " + format_double(c) + " is missing from the finer partition");
    map[0] = 0;
    for (std::size_t i = 1; i < size(); ++i) map[i] = coarser.cell_of(cuts_[i - 1]);
    return map;
  }
  if (universe_ != coarser.universe_) throw PartitionError("label partitions over different universes");
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    std::size_t target = coarser.cell_of(cells_[c].front());
    for (const auto& l : cells_[c])
      if (coarser.cell_of(l) != target) throw PartitionError("cell is split by the coarser partition");
    map[c] = target;
  }
  return map;
}

std::string Partition::describe() const {
  std::string s;
  if (interval_) {
    s = "cuts:";
    for (double c : cuts_) s += " " + format_double(c);
    return s;
  }
  for (const auto& cell : cells_) {
    s += "{";
    for (std::size_t i = 0; i < cell.size(); ++i) s += (i ? "," : "") + cell[i];
    s += "}";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Finite Dirichlet parameters

DirichletFinite::DirichletFinite(std::vector<Rational> p) : params(std::move(p)) {
  if (params.empty()) throw std::invalid_argument("Dirichlet parameter vector is empty");
  for (const auto& v : params)
    if (v < 0) throw std::invalid_argument("Dirichlet parameters must be nonnegative");
  if (total() <= 0) throw std::invalid_argument("Dirichlet parameters must have positive total");
}

Rational DirichletFinite::total() const {
  Rational t(0);
  for (const auto& v : params) t += v;
  return t;
}

std::vector<double> DirichletFinite::mean() const {
  const Rational t = total();
  std::vector<double> out;
  for (const auto& v : params) out.push_back(Rational(v / t).convert_to<double>());
  return out;
}

std::vector<double> DirichletFinite::variance() const {
  const Rational t = total();
  std::vector<double> out;
  for (const auto& v : params) out.push_back(Rational(v * (t - v) / (t * t * (t + 1))).convert_to<double>());
  return out;
}

DirichletMeasure dp_posterior(const DirichletMeasure& alpha, std::span<const Location> observations) {
  std::vector<Atom> atoms = alpha.atoms();
  for (const auto& y : observations) {
    auto it = std::find_if(atoms.begin(), atoms.end(), [&](const Atom& a) { return same_location(a.location, y); });
    if (it != atoms.end()) {
      it->weight += 1;
    } else {
      atoms.push_back({y, Rational(1)});
    }
  }
  return DirichletMeasure(std::move(atoms), alpha.diffuse());
}

DirichletFinite project(const DirichletMeasure& alpha, const Partition& part) {
  std::vector<Rational> params(part.size(), Rational(0));
  for (const auto& a : alpha.atoms()) params[part.cell_of(a.location)] += a.weight;
  if (const auto& d = alpha.diffuse(); d && d->mass > 0) {
    for (std::size_t c = 0; c < part.size(); ++c) params[c] += d->mass * part.base_mass(d->base, c);
  }
  return DirichletFinite(std::move(params));
}

DirichletFinite coarsen(const DirichletFinite& d, std::span<const std::size_t> mapping, std::size_t coarse_size) {
  if (mapping.size() != d.size()) throw PartitionError("coarsen: mapping size does not match parameters");
  std::vector<Rational> out(coarse_size, Rational(0));
  std::vector<bool> hit(coarse_size, false);
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    if (mapping[i] >= coarse_size) throw PartitionError("coarsen: mapping value out of range");
    out[mapping[i]] += d.params[i];
    hit[mapping[i]] = true;
  }
  if (std::find(hit.begin(), hit.end(), false) != hit.end()) throw PartitionError("coarsen: mapping is not surjective");
  return DirichletFinite(std::move(out));
}

DirichletFinite count_update(const DirichletFinite& d, std::size_t cell) {
  if (cell >= d.size()) throw PartitionError("count_update: cell out of range");
  DirichletFinite out = d;
  out.params[cell] += 1;
  return out;
}

// ---------------------------------------------------------------------------
// Stick breaking

double beta1_from_normal_score(double z, double concentration) {
  if (!(concentration > 0.0)) throw std::domain_error("concentration must be positive");
  // Beta(1, a) has CDF 1 - (1 - v)^a, so v = 1 - (1 - u)^(1/a) with 1 - u = Phi(-z).
  return -std::expm1(std::log(normal_sf(z)) / concentration);
}

std::vector<double> stick_weights(std::span<const double> v) {
  std::vector<double> w(v.size());
  double rest = 1.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    w[i] = v[i] * rest;
    rest *= 1.0 - v[i];
  }
  if (!w.empty()) w.back() = rest;
  return w;
}

Location draw_from_base(const DirichletMeasure& alpha, double z) {
  const auto& d = alpha.diffuse();
  if (alpha.atoms().empty()) return d->base.from_normal_score(z);
  const double total = alpha.total_mass().convert_to<double>();
  const double u = normal_cdf(z);
  double acc = 0.0;
  for (const auto& a : alpha.atoms()) {
    acc += a.weight.convert_to<double>() / total;
    if (u < acc) return a.location;
  }
  if (!d || d->mass <= 0) return alpha.atoms().back().location;
  const double atom_frac = acc;
  return d->base.quantile(std::clamp((u - atom_frac) / (1.0 - atom_frac), 0.0, 1.0));
}

double truncation_bias_bound(double mass, std::size_t truncation) {
  return std::pow(mass / (1.0 + mass), static_cast<double>(truncation));
}

DiscreteMeasure stick_breaking_sample(const DirichletMeasure& alpha, std::size_t truncation, Engine& rng) {
  if (truncation < 1) throw std::invalid_argument("truncation must be >= 1");
  const double mass = alpha.total_mass().convert_to<double>();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(truncation);
  DiscreteMeasure g;
  g.atoms.reserve(truncation);
  for (std::size_t i = 0; i < truncation; ++i) {
    double zv = normal(rng);
    double zt = normal(rng);
    v[i] = beta1_from_normal_score(zv, mass);
    g.atoms.push_back(draw_from_base(alpha, zt));
  }
  g.weights = stick_weights(v);
  return g;
}

DiscreteMeasure stick_breaking_sample(const DirichletMeasure& alpha, std::size_t truncation, std::uint64_t seed) {
  Engine rng = make_stream(seed, 0);
  return stick_breaking_sample(alpha, truncation, rng);
}

std::vector<double> project_sample(const DiscreteMeasure& g, const Partition& part) {
  std::vector<double> out(part.size(), 0.0);
  for (std::size_t i = 0; i < g.atoms.size(); ++i) out[part.cell_of(g.atoms[i])] += g.weights[i];
  return out;
}

// ---------------------------------------------------------------------------
// Projective checks

namespace {

double max_deviation(const DirichletFinite& a, const DirichletFinite& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  Rational best(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    Rational d = a.params[i] - b.params[i];
    if (d < 0) d = -d;
    if (d > best) best = d;
  }
  return best.convert_to<double>();
}

}  // namespace

ProjectiveReport check_projective(const DirichletMeasure& alpha, std::span<const Partition> chain,
                                  std::span<const Location> observations) {
  if (chain.empty()) throw PartitionError("check_projective: empty partition chain");
  std::vector<std::vector<std::size_t>> maps;
  for (std::size_t k = 1; k < chain.size(); ++k) maps.push_back(chain[k].coarsening_map(chain[k - 1]));

  ProjectiveReport rep;
  auto record = [&](double dev, const std::string& what) {
    rep.max_deviation = std::max(rep.max_deviation, dev);
    if (dev != 0.0) {
      rep.passed = false;
      rep.failures.push_back(what + ": deviation " + format_double(dev));
    }
  };

  const DirichletMeasure posterior = dp_posterior(alpha, observations);
  std::vector<DirichletFinite> prior_proj, post_proj, counted;
  for (const auto& part : chain) {
    prior_proj.push_back(project(alpha, part));
    post_proj.push_back(project(posterior, part));
    DirichletFinite c = prior_proj.back();
    for (const auto& y : observations) c = count_update(c, part.cell_of(y));
    counted.push_back(std::move(c));
  }
  for (std::size_t k = 0; k < chain.size(); ++k)
    record(max_deviation(post_proj[k], counted[k]), "level " + std::to_string(k) + " conjugacy");

  for (std::size_t k = 1; k < chain.size(); ++k) {
    const auto& map = maps[k - 1];
    const std::size_t coarse = chain[k - 1].size();
    record(max_deviation(coarsen(prior_proj[k], map, coarse), prior_proj[k - 1]),
           "levels " + std::to_string(k - 1) + "/" + std::to_string(k) + " prior aggregation");
    // posterior then coarsen vs coarsen then posterior
    DirichletFinite coarse_then_update = coarsen(prior_proj[k], map, coarse);
    for (const auto& y : observations) coarse_then_update = count_update(coarse_then_update, chain[k - 1].cell_of(y));
    record(max_deviation(coarsen(post_proj[k], map, coarse), coarse_then_update),
           "levels " + std::to_string(k - 1) + "/" + std::to_string(k) + " posterior aggregation");
    ++rep.pairs_checked;
  }
  return rep;
}

RandomProjectiveCase random_projective_case(std::uint64_t seed, std::size_t levels, std::size_t n_obs) {
  Engine rng = make_stream(seed);
  auto small_rational = [&](long max_num) {
    return Rational(1 + static_cast<long>(uniform_index(rng, static_cast<std::size_t>(max_num))),
                    1 + static_cast<long>(uniform_index(rng, 8)));
  };
  auto grid_point = [&] { return static_cast<double>(1 + uniform_index(rng, 63)) / 64.0; };

  std::vector<Atom> atoms;
  const std::size_t n_atoms = uniform_index(rng, 4);
  for (std::size_t i = 0; i < n_atoms; ++i) atoms.push_back({grid_point(), small_rational(5)});
  std::optional<DiffusePart> diffuse;
  if (atoms.empty() || uniform_index(rng, 4) != 0) {
    BaseDistribution base = uniform_index(rng, 2) == 0 ? BaseDistribution::uniform(0.0, 1.0)
                                                       : BaseDistribution::normal(0.5, 0.25);
    diffuse = DiffusePart{base, small_rational(9)};
  }

  // nested cut sets: each level adds fresh cuts from the 1/64 grid
  std::set<double> cuts;
  std::vector<Partition> chain;
  for (std::size_t l = 0; l < levels; ++l) {
    const std::size_t add = 1 + uniform_index(rng, 3);
    for (std::size_t i = 0; i < add; ++i) cuts.insert(grid_point());
    chain.push_back(Partition::intervals(std::vector<double>(cuts.begin(), cuts.end())));
  }

  std::vector<Location> obs;
  for (std::size_t i = 0; i < n_obs; ++i) {
    if (!atoms.empty() && uniform_index(rng, 3) == 0) {
      obs.push_back(atoms[uniform_index(rng, atoms.size())].location);
    } else {
      obs.push_back(uniform01(rng));
    }
  }
  return {DirichletMeasure(std::move(atoms), diffuse), std::move(chain), std::move(obs)};
}

}  // namespace seqbayes::dp
