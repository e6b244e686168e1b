#include "seqbayes/experiments.hpp"

#include "seqbayes/ddp.hpp"
#include "seqbayes/gp.hpp"
#include "seqbayes/inversion.hpp"
#include "seqbayes/measure_io.hpp"
#include "seqbayes/model_io.hpp"
#include "seqbayes/studies.hpp"
#include "seqbayes/supervised.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace seqbayes::cli {

namespace {

using Q = Rational;

// ---------------------------------------------------------------------------
// parameter readers

Rational rational_value(const json& j, const std::string& path) {
  if (j.is_string()) {
    try {
      return parse_scalar<Rational>(j.get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigParseError(path + ": " + e.what());
    }
  }
  if (j.is_number()) {
    const double v = j.get<double>();
    require(std::isfinite(v), path, "must be finite");
    return from_double<Rational>(v);
  }
  throw ConfigParseError(path + ": expected a number or a rational string, got " + std::string(j.type_name()));
}

dp::Location location_value(const json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) {
    const double v = j.get<double>();
    require(std::isfinite(v), path, "must be finite");
    return v;
  }
  throw ConfigParseError(path + ": expected a string or a number, got " + std::string(j.type_name()));
}

std::vector<dp::Location> locations(Fields& p, const std::string& key) {
  std::vector<dp::Location> out;
  if (!p.has(key)) return out;
  const json& a = p.raw(key);
  if (!a.is_array()) throw ConfigParseError(p.path_of(key) + ": expected an array");
  for (std::size_t i = 0; i < a.size(); ++i)
    out.push_back(location_value(a[i], p.path_of(key) + "[" + std::to_string(i) + "]"));
  return out;
}

template <class T>
std::vector<std::pair<T, T>> pairs(Fields& p, const std::string& key) {
  std::vector<std::pair<T, T>> out;
  if (!p.has(key)) return out;
  const json& a = p.raw(key);
  const std::string path = p.path_of(key);
  if (!a.is_array()) throw ConfigParseError(path + ": expected an array of [x, y] pairs");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    const json& e = a[i];
    if (!e.is_array() || e.size() != 2) throw ConfigParseError(at + ": expected an [x, y] pair");
    for (const auto& v : e) {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigParseError(at + ": expected numbers");
      } else {
        if (!v.is_string()) throw ConfigParseError(at + ": expected strings");
      }
    }
    out.emplace_back(e[0].get<T>(), e[1].get<T>());
  }
  return out;
}

dp::BaseDistribution base_value(Fields b) {
  const std::string kind = b.str("kind", "normal");
  const double a = b.num("a", 0.0);
  const double bb = b.num("b", 1.0);
  b.finish();
  try {
    return dp::BaseDistribution::parse(kind, a, bb);
  } catch (const std::invalid_argument& e) {
    throw ConfigValidationError(b.path() + ": " + e.what());
  }
}

dp::DirichletMeasure dirichlet_value(Fields& p) {
  std::vector<dp::Atom> atoms;
  if (p.has("atoms")) {
    const json& a = p.raw("atoms");
    if (!a.is_array()) throw ConfigParseError(p.path_of("atoms") + ": expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      Fields f(a[i], p.path_of("atoms") + "[" + std::to_string(i) + "]");
      auto loc = location_value(f.raw("location"), f.path_of("location"));
      auto w = rational_value(f.raw("weight"), f.path_of("weight"));
      f.finish();
      require(w > 0, f.path_of("weight"), "must be > 0");
      atoms.push_back({loc, w});
    }
  }
  std::optional<dp::DiffusePart> diffuse;
  if (p.has("base")) {
    auto base = base_value(p.object("base"));
    Rational mass = p.has("mass") ? rational_value(p.raw("mass"), p.path_of("mass")) : Rational(1);
    require(mass > 0, p.path_of("mass"), "must be > 0");
    diffuse = dp::DiffusePart{base, mass};
  } else {
    require(!p.has("mass"), p.path_of("mass"), "needs a base distribution");
  }
  require(!atoms.empty() || diffuse, p.path(), "needs atoms or a base distribution");
  try {
    return dp::DirichletMeasure(std::move(atoms), diffuse);
  } catch (const std::invalid_argument& e) {
    throw ConfigValidationError(p.path() + ": " + e.what());
  }
}

dp::Partition partition_value(Fields& p) {
  try {
    if (p.has("cells")) {
      const json& c = p.raw("cells");
      if (!c.is_array()) throw ConfigParseError(p.path_of("cells") + ": expected an array of label arrays");
      std::vector<std::vector<std::string>> cells;
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (!c[i].is_array()) throw ConfigParseError(p.path_of("cells") + "[" + std::to_string(i) + "]: expected an array");
        std::vector<std::string> cell;
        for (const auto& l : c[i]) {
          if (!l.is_string()) throw ConfigParseError(p.path_of("cells") + ": labels must be strings");
          cell.push_back(l.get<std::string>());
        }
        cells.push_back(std::move(cell));
      }
      std::vector<std::string> universe;
      for (const auto& cell : cells) universe.insert(universe.end(), cell.begin(), cell.end());
      return dp::Partition::labels(p.strs("universe", universe), cells);
    }
    return dp::Partition::intervals(p.nums("cuts", std::vector<double>{0.0}));
  } catch (const std::invalid_argument& e) {
    throw ConfigValidationError(p.path() + ": " + e.what());
  }
}

ddp::ParametricDdp ddp_value(Fields& p) {
  ddp::ParametricDdp d;
  const double alpha = p.num("alpha", 1.0);
  require(alpha > 0.0 && std::isfinite(alpha), p.path_of("alpha"), "must be > 0");
  d.log_alpha = std::log(alpha);
  d.log_alpha_slope = p.num("alpha_log_slope", 0.0);
  {
    Fields b = p.object_or_empty("base");
    d.base_kind = b.str("kind", "normal");
    d.base_a = b.num("a", 0.0);
    d.base_b = b.num("b", 1.0);
    d.base_slope = b.num("slope", 0.0);
    b.finish();
    require(d.base_kind == "normal" || d.base_kind == "uniform", b.path_of("kind"), "expected normal or uniform");
  }
  for (auto [key, kind, length] : {std::tuple{"copula_v", &d.copula_v, &d.copula_v_length},
                                   std::tuple{"copula_theta", &d.copula_theta, &d.copula_theta_length}}) {
    Fields c = p.object_or_empty(key);
    *kind = c.str("kind", "exponential");
    *length = c.num("length_scale", 1.0);
    c.finish();
    require(*kind == "exponential" || *kind == "comonotone" || *kind == "independent", c.path_of("kind"),
            "expected exponential, comonotone or independent");
    require(*length > 0.0 && std::isfinite(*length), c.path_of("length_scale"), "must be > 0");
  }
  d.truncation = p.count("truncation", 0);
  d.truncation_bias = p.num("truncation_bias", 1e-4);
  require(d.truncation_bias > 0.0 && d.truncation_bias < 1.0, p.path_of("truncation_bias"), "must be in (0, 1)");
  return d;
}

std::vector<double> inputs_value(Fields& p, const std::string& key) {
  auto xs = p.nums(key);
  require(!xs.empty(), p.path_of(key), "must not be empty");
  for (double x : xs) require(std::isfinite(x), p.path_of(key), "must be finite");
  return xs;
}

ddp::DdpSpec spec_value(const ddp::ParametricDdp& d, std::span<const double> xs) {
  try {
    return d.to_spec(xs);
  } catch (const std::invalid_argument& e) {
    throw ConfigValidationError(std::string("params: ") + e.what());
  }
}

gp::KernelFamily kernel_value(Fields& p) {
  const std::string name = p.str("kernel", "rbf");
  try {
    return gp::parse_kernel_family(name);
  } catch (const std::exception& e) {
    throw ConfigValidationError(p.path_of("kernel") + ": " + e.what());
  }
}

FiniteStudy finite_study(Fields& p, const ExperimentConfig& c) {
  FiniteStudy s;
  s.models = p.count("models", s.models);
  s.bounds.max_theta = p.count("max_theta", s.bounds.max_theta);
  s.bounds.max_inputs = p.count("max_inputs", s.bounds.max_inputs);
  s.bounds.max_labels = p.count("max_labels", s.bounds.max_labels);
  s.max_n = p.count("max_n", s.max_n);
  s.max_m = p.count("max_m", s.max_m);
  s.float_tolerance = c.tolerance_or(s.float_tolerance);
  require(s.models >= 1, p.path_of("models"), "must be >= 1");
  require(s.bounds.max_theta >= 1, p.path_of("max_theta"), "must be >= 1");
  require(s.bounds.max_inputs >= 1, p.path_of("max_inputs"), "must be >= 1");
  require(s.bounds.max_labels >= 2, p.path_of("max_labels"), "must be >= 2");
  require(s.max_m >= 1 && s.max_m <= 6, p.path_of("max_m"), "must be in [1, 6]");
  require(s.max_n <= 50, p.path_of("max_n"), "must be <= 50");
  return s;
}

GpStudy gp_study(Fields& p, const ExperimentConfig& c) {
  GpStudy s;
  s.instances = p.count("instances", s.instances);
  s.max_n = p.count("max_n", s.max_n);
  s.max_m = p.count("max_m", s.max_m);
  s.family = kernel_value(p);
  s.mean_tolerance = c.tolerance_or(s.mean_tolerance);
  s.cov_tolerance = p.num("cov_tolerance", s.cov_tolerance);
  s.kalman_tolerance = p.num("kalman_tolerance", s.kalman_tolerance);
  s.consistency_tolerance = c.tolerance_or(s.consistency_tolerance);
  require(s.instances >= 1, p.path_of("instances"), "must be >= 1");
  require(s.max_n >= 1 && s.max_n <= 5000, p.path_of("max_n"), "must be in [1, 5000]");
  require(s.max_m >= 2 && s.max_m <= 500, p.path_of("max_m"), "must be in [2, 500]");
  return s;
}

DdpStudy ddp_study(Fields& p) {
  DdpStudy s;
  s.specs = p.count("specs", s.specs);
  s.sites = p.count("sites", s.sites);
  s.replications = p.count("replications", s.replications);
  s.truncation_bias = p.num("truncation_bias", s.truncation_bias);
  s.z_limit = p.num("z_limit", s.z_limit);
  s.min_fraction = p.num("min_fraction", s.min_fraction);
  require(s.specs >= 1, p.path_of("specs"), "must be >= 1");
  require(s.sites >= 1 && s.sites <= 50, p.path_of("sites"), "must be in [1, 50]");
  require(s.replications >= 1000, p.path_of("replications"), "must be >= 1000");
  require(s.truncation_bias > 0.0 && s.truncation_bias < 1.0, p.path_of("truncation_bias"), "must be in (0, 1)");
  require(s.z_limit > 0.0, p.path_of("z_limit"), "must be > 0");
  require(s.min_fraction >= 0.0 && s.min_fraction <= 1.0, p.path_of("min_fraction"), "must be in [0, 1]");
  return s;
}

// ---------------------------------------------------------------------------
// finite

template <ProbabilityScalar S>
void finite_predict(RunReport& rep, const ExperimentConfig& c, Fields& p, const std::string& model_path) {
  SupervisedModel<S> model = io::model_from_json<S>(io::read_json_file(model_path));
  TrainingSample train;
  for (auto& [x, y] : pairs<std::string>(p, "train")) {
    require(model.inputs().contains(x), p.path_of("train"), "unknown input '" + x + "'");
    require(model.labels().contains(y), p.path_of("train"), "unknown label '" + y + "'");
    train.pairs.emplace_back(x, y);
  }
  TestInputs test{p.strs("test")};
  require(!test.points.empty() && test.points.size() <= 8, p.path_of("test"), "needs 1 to 8 inputs");
  for (const auto& x : test.points) require(model.inputs().contains(x), p.path_of("test"), "unknown input '" + x + "'");
  const std::string method = p.str("method", "both");
  require(method == "batch" || method == "recursive" || method == "both", p.path_of("method"),
          "expected batch, recursive or both");
  p.finish();

  Dist<S> pred = method == "recursive" ? posterior_predictive_recursive(model, train, test)
                                       : posterior_predictive_batch(model, train, test);
  if (method == "both") {
    auto rec = posterior_predictive_recursive(model, train, test);
    const double dev = to_double(max_abs_deviation<S>(pred.weights(), rec.weights()));
    const double tol = c.tolerance_or(to_double(ScalarTraits<S>::tolerance()));
    rep.add_check("recursive_equals_batch", dev <= tol, dev, tol, "max elementwise deviation");
  }
  std::vector<std::string> header;
  for (std::size_t k = 0; k < test.points.size(); ++k) header.push_back("y" + std::to_string(k + 1));
  header.push_back("probability");
  CsvWriter csv(header);
  const std::size_t ny = model.labels().size(), m = test.points.size();
  for (std::size_t a = 0; a < pred.weights().size(); ++a) {
    std::vector<std::string> ys(m);
    std::size_t rem = a;
    for (std::size_t k = m; k-- > 0;) {
      ys[k] = model.labels().label(rem % ny);
      rem /= ny;
    }
    for (const auto& y : ys) csv.cell(y);
    csv.cell(format_scalar(pred.weights()[a]));
    csv.end_row();
  }
  csv.save(output_path(c.output, "predictive.csv"));
  rep.outputs.push_back("predictive.csv");
  io::write_json_file(output_path(c.output, "predictive.json"), io::to_json(pred));
  rep.outputs.push_back("predictive.json");
  rep.metrics["scalar"] = std::string(ScalarTraits<S>::name);
  rep.metrics["train_size"] = train.size();
  rep.metrics["test_inputs"] = test.points;
}

template <ProbabilityScalar S>
void finite_invert(RunReport& rep, const ExperimentConfig& c, Fields& p) {
  auto kernel = io::kernel_from_json<S>(io::read_json_file(p.str("kernel")));
  auto prior = io::dist_from_json<S>(io::read_json_file(p.str("prior")));
  std::optional<std::string> outcome;
  if (p.has("outcome")) outcome = p.str("outcome");
  p.finish();
  require(prior.space() == kernel.source(), "params.prior", "space does not match the kernel source");
  if (outcome) require(kernel.target().contains(*outcome), "params.outcome", "not an outcome of the kernel");

  auto inv = brute_force_invert(kernel, prior);
  auto chk = verify_inversion(inv.kernel, kernel, prior);
  const double tol = c.tolerance_or(to_double(ScalarTraits<S>::tolerance()));
  rep.add_check("operator_equation", to_double(chk.deviation) <= tol, to_double(chk.deviation), tol,
                "max deviation of the two joint pushforwards");
  io::write_json_file(output_path(c.output, "inversion.json"), io::to_json(inv.kernel));
  rep.outputs.push_back("inversion.json");

  CsvWriter csv({"outcome", "theta", "probability"});
  for (std::size_t x = 0; x < kernel.target().size(); ++x) {
    if (outcome && kernel.target().label(x) != *outcome) continue;
    for (std::size_t t = 0; t < kernel.source().size(); ++t) {
      csv.cell(kernel.target().label(x)).cell(kernel.source().label(t)).cell(format_scalar(inv.kernel(x, t)));
      csv.end_row();
    }
  }
  csv.save(output_path(c.output, "posterior.csv"));
  rep.outputs.push_back("posterior.csv");
  json nulls = json::array();
  for (auto x : inv.null_outcomes) nulls.push_back(kernel.target().label(x));
  rep.metrics["zero_evidence_outcomes"] = nulls;
  rep.metrics["scalar"] = std::string(ScalarTraits<S>::name);
  if (!nulls.empty()) rep.warnings.push_back("outcomes with zero evidence use the prior as posterior");
}

void run_finite(RunReport& rep, const ExperimentConfig& c, Fields& p) {
  const std::string& op = c.operation;
  if (op == "batch-online" || op == "predictive") {
    auto s = finite_study(p, c);
    p.finish();
    const auto seed = c.require_seed();
    if (op == "batch-online") {
      study_batch_online(rep, c.output, seed, s);
      study_operator_equation(rep, c.output, seed, s);
    } else {
      study_finite_predictive(rep, c.output, seed, s);
      study_finite_consistency(rep, c.output, seed, s);
    }
    return;
  }
  if (op == "predict" || op == "invert") {
    const std::string scalar = p.str("scalar", "exact-rational");
    require(scalar == "exact-rational" || scalar == "float64", p.path_of("scalar"),
            "expected exact-rational or float64");
    if (op == "predict") {
      const std::string model = p.str("model");
      if (scalar == "float64")
        finite_predict<double>(rep, c, p, model);
      else
        finite_predict<Q>(rep, c, p, model);
    } else {
      if (scalar == "float64")
        finite_invert<double>(rep, c, p);
      else
        finite_invert<Q>(rep, c, p);
    }
    return;
  }
  throw ConfigValidationError("operation: unknown finite operation '" + op +
                              "' (expected batch-online, predictive, predict or invert)");
}

// ---------------------------------------------------------------------------
// gp

void run_gp(RunReport& rep, const ExperimentConfig& c, Fields& p) {
  const std::string& op = c.operation;
  if (op == "compare" || op == "consistency") {
    auto s = gp_study(p, c);
    p.finish();
    const auto seed = c.require_seed();
    if (op == "compare")
      study_gp_compare(rep, c.output, seed, s);
    else
      study_gp_consistency(rep, c.output, seed, s);
    return;
  }
  if (op == "bench") {
    BenchStudy s;
    s.n_max = p.count("n_max", s.n_max);
    s.m = p.count("m", s.m);
    s.repetitions = static_cast<int>(p.count("repetitions", 3));
    s.family = kernel_value(p);
    if (p.has("sizes")) {
      for (double v : p.nums("sizes")) {
        require(v >= 1 && v == std::floor(v), p.path_of("sizes"), "must be positive integers");
        s.sizes.push_back(static_cast<std::size_t>(v));
      }
      require(std::is_sorted(s.sizes.begin(), s.sizes.end()) &&
                  std::adjacent_find(s.sizes.begin(), s.sizes.end()) == s.sizes.end() && s.sizes.back() <= s.n_max,
              p.path_of("sizes"), "must be strictly ascending and <= n_max");
    }
    p.finish();
    require(s.n_max >= 1 && s.n_max <= 5000, "params.n_max", "must be in [1, 5000]");
    require(s.m >= 1 && s.m <= 500, "params.m", "must be in [1, 500]");
    require(s.repetitions >= 1 && s.repetitions <= 100, "params.repetitions", "must be in [1, 100]");
    study_gp_benchmark(rep, c.output, c.require_seed(), s);
    return;
  }
  if (op == "predict") {
    auto family = kernel_value(p);
    const double ls = p.num("length_scale", 1.0), sv = p.num("signal_var", 1.0), nv = p.num("noise_var", 0.01);
    require(ls > 0.0 && std::isfinite(ls), p.path_of("length_scale"), "must be > 0");
    require(sv > 0.0 && std::isfinite(sv), p.path_of("signal_var"), "must be > 0");
    require(nv >= 0.0 && std::isfinite(nv), p.path_of("noise_var"), "must be >= 0");
    std::vector<gp::Observation> train;
    for (auto [x, y] : pairs<double>(p, "train")) {
      require(std::isfinite(x) && std::isfinite(y), p.path_of("train"), "must be finite");
      train.push_back({x, y});
    }
    auto test = inputs_value(p, "test");
    const std::string method = p.str("method", "both");
    require(method == "batch" || method == "recursive" || method == "both", p.path_of("method"),
            "expected batch, recursive or both");
    p.finish();
    auto prior = gp::make_prior(family, ls, sv, nv);
    auto pred = method == "recursive" ? gp::recursive_predictive(prior, test, train)
                                      : gp::batch_predictive(prior, test, train);
    if (method == "both") {
      auto rec = gp::recursive_predictive(prior, test, train);
      const double dm = (rec.mean - pred.mean).cwiseAbs().maxCoeff() / std::max(1.0, pred.mean.cwiseAbs().maxCoeff());
      const double dc = (rec.cov - pred.cov).cwiseAbs().maxCoeff();
      const double tm = c.tolerance_or(1e-8);
      rep.add_check("gp_mean_batch_vs_recursive", dm <= tm, dm, tm, "relative to max(1, max |batch mean|)");
      rep.add_check("gp_cov_batch_vs_recursive", dc <= 1e-6, dc, 1e-6, "absolute, entrywise");
    }
    CsvWriter csv({"x", "mean", "variance"});
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      csv.cell(test[i]).cell(pred.mean(k)).cell(pred.cov(k, k));
      csv.end_row();
    }
    csv.save(output_path(c.output, "gp_predictive.csv"));
    rep.outputs.push_back("gp_predictive.csv");
    json cov = json::array();
    for (Eigen::Index i = 0; i < pred.cov.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < pred.cov.cols(); ++j) row.push_back(pred.cov(i, j));
      cov.push_back(row);
    }
    rep.metrics["covariance"] = cov;
    rep.metrics["train_size"] = train.size();
    return;
  }
  throw ConfigValidationError("operation: unknown gp operation '" + op +
                              "' (expected compare, consistency, predict or bench)");
}

// ---------------------------------------------------------------------------
// dp

void run_dp(RunReport& rep, const ExperimentConfig& c, Fields& p) {
  const std::string& op = c.operation;
  if (op == "posterior" || op == "project") {
    auto alpha = dirichlet_value(p);
    auto obs = op == "posterior" ? locations(p, "observations") : std::vector<dp::Location>{};
    auto part = partition_value(p);
    p.finish();
    dp::DirichletFinite d;
    try {
      d = dp::project(obs.empty() ? alpha : dp::dp_posterior(alpha, obs), part);
    } catch (const std::invalid_argument& e) {
      throw ConfigValidationError(std::string("params: ") + e.what());
    }
    auto mean = d.mean();
    auto var = d.variance();
    CsvWriter csv({"cell", "parameter", "mean", "variance"});
    for (std::size_t k = 0; k < d.params.size(); ++k) {
      csv.cell(k).cell(format_scalar(d.params[k])).cell(mean[k]).cell(var[k]);
      csv.end_row();
    }
    csv.save(output_path(c.output, "dp_projection.csv"));
    rep.outputs.push_back("dp_projection.csv");
    rep.metrics["partition"] = part.describe();
    rep.metrics["total_mass"] = format_scalar(d.total());
    rep.metrics["observations"] = obs.size();
    if (!obs.empty()) {
      auto rhs = dp::project(alpha, part);
      for (const auto& o : obs) rhs = dp::count_update(rhs, part.cell_of(o));
      const bool eq = rhs == d;
      rep.add_check("conjugate_count_update", eq, eq ? 0.0 : 1.0, 0.0, "projection of the posterior vs counts");
    }
    return;
  }
  if (op == "sample") {
    auto alpha = dirichlet_value(p);
    const std::size_t n = p.count("truncation", 0);
    const double bias = p.num("truncation_bias", 1e-4);
    p.finish();
    require(bias > 0.0 && bias < 1.0, "params.truncation_bias", "must be in (0, 1)");
    const std::size_t trunc = n ? n : ddp::truncation_for_bias(to_double(alpha.total_mass()), bias);
    require(trunc <= 1000000, "params.truncation", "must be <= 1000000");
    auto g = dp::stick_breaking_sample(alpha, trunc, c.require_seed());
    CsvWriter csv({"atom", "weight"});
    for (std::size_t i = 0; i < g.atoms.size(); ++i) {
      csv.cell(dp::location_string(g.atoms[i])).cell(g.weights[i]);
      csv.end_row();
    }
    csv.save(output_path(c.output, "dp_sample.csv"));
    rep.outputs.push_back("dp_sample.csv");
    rep.metrics["truncation"] = trunc;
    rep.metrics["truncation_bias"] = dp::truncation_bias_bound(to_double(alpha.total_mass()), trunc);
    return;
  }
  if (op == "check") {
    DirichletStudy s;
    s.cases = p.count("cases", s.cases);
    s.levels = p.count("levels", s.levels);
    s.observations = p.count("observations", s.observations);
    p.finish();
    require(s.cases >= 1, "params.cases", "must be >= 1");
    require(s.levels >= 1 && s.levels <= 8, "params.levels", "must be in [1, 8]");
    require(s.observations <= 1000, "params.observations", "must be <= 1000");
    const auto seed = c.require_seed();
    study_dp_conjugacy(rep, c.output, seed, s);
    study_dp_projective(rep, c.output, seed, s);
    return;
  }
  throw ConfigValidationError("operation: unknown dp operation '" + op +
                              "' (expected posterior, project, sample or check)");
}

// ---------------------------------------------------------------------------
// ddp

void run_ddp(RunReport& rep, const ExperimentConfig& c, Fields& p) {
  const std::string& op = c.operation;
  if (op == "mean-check" || op == "single-site") {
    auto s = ddp_study(p);
    p.finish();
    if (op == "mean-check")
      study_ddp_mean_measure(rep, c.output, c.require_seed(), s);
    else
      study_ddp_single_site(rep, c.output, c.require_seed(), s);
    return;
  }
  if (op == "sample" || op == "project" || op == "predict") {
    auto params = ddp_value(p);
    if (op == "sample") {
      auto xs = inputs_value(p, "inputs");
      p.finish();
      auto spec = spec_value(params, xs);
      auto path = ddp::sample_path(spec, xs, c.require_seed());
      CsvWriter csv({"input", "atom", "weight"});
      for (std::size_t s = 0; s < xs.size(); ++s)
        for (std::size_t i = 0; i < path.atoms[s].size(); ++i) {
          csv.cell(xs[s]).cell(path.atoms[s][i]).cell(path.weights[s][i]);
          csv.end_row();
        }
      csv.save(output_path(c.output, "ddp_sample.csv"));
      rep.outputs.push_back("ddp_sample.csv");
      rep.metrics["truncation"] = spec.truncation;
      return;
    }
    auto part = partition_value(p);
    const std::size_t reps = p.count("replications", 10000);
    require(reps >= 100 && reps <= 10000000, p.path_of("replications"), "must be in [100, 10000000]");
    if (op == "project") {
      auto xs = inputs_value(p, "inputs");
      p.finish();
      auto spec = spec_value(params, xs);
      auto sample = ddp::finite_projection(spec, xs, part, c.require_seed(), reps);
      CsvWriter csv({"input", "cell", "mean", "variance", "se_mean", "se_variance"});
      for (std::size_t s = 0; s < xs.size(); ++s)
        for (std::size_t k = 0; k < part.size(); ++k) {
          const auto& m = sample.moment(s, k);
          csv.cell(xs[s]).cell(k).cell(m.mean).cell(m.variance).cell(m.se_mean).cell(m.se_variance);
          csv.end_row();
        }
      csv.save(output_path(c.output, "ddp_projection.csv"));
      rep.outputs.push_back("ddp_projection.csv");
      rep.metrics["truncation"] = spec.truncation;
      rep.metrics["replications"] = reps;
      return;
    }
    std::vector<ddp::LabeledPoint> train;
    for (auto [x, y] : pairs<double>(p, "train")) {
      require(std::isfinite(x) && std::isfinite(y), p.path_of("train"), "must be finite");
      train.push_back({x, y});
    }
    auto test = inputs_value(p, "test");
    p.finish();
    require(test.size() <= 6, "params.test", "at most 6 test inputs");
    std::vector<double> sites(test);
    for (const auto& t : train) sites.push_back(t.x);
    auto spec = spec_value(params, sites);
    ddp::DdpPredictive pred;
    try {
      pred = ddp::ddp_predictive_mc(spec, train, test, part, c.require_seed(), reps);
    } catch (const std::invalid_argument& e) {
      throw ConfigValidationError(std::string("params: ") + e.what());
    }
    CsvWriter csv({"input", "cell", "probability", "se"});
    for (std::size_t s = 0; s < test.size(); ++s)
      for (std::size_t k = 0; k < pred.cells; ++k) {
        csv.cell(test[s]).cell(k).cell(pred.marginals[s * pred.cells + k]).cell(pred.marginal_se[s * pred.cells + k]);
        csv.end_row();
      }
    csv.save(output_path(c.output, "ddp_predictive.csv"));
    rep.outputs.push_back("ddp_predictive.csv");
    rep.metrics["joint"] = pred.joint;
    rep.metrics["method"] = "self-normalized importance sampling (approximate)";
    rep.metrics["effective_sample_size"] = pred.effective_sample_size;
    rep.metrics["replications"] = reps;
    if (pred.low_ess)
      rep.warnings.push_back("effective sample size " + format_double(pred.effective_sample_size) +
                             " is below 100; the estimate is unreliable");
    return;
  }
  throw ConfigValidationError("operation: unknown ddp operation '" + op +
                              "' (expected sample, project, mean-check, single-site or predict)");
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& c) {
  RunReport rep;
  rep.command = c.family + " " + c.operation;
  rep.config = c.to_json();
  rep.seed = c.seed;
  Fields p(c.params, "params");
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (c.family == "finite")
      run_finite(rep, c, p);
    else if (c.family == "gp")
      run_gp(rep, c, p);
    else if (c.family == "dp")
      run_dp(rep, c, p);
    else if (c.family == "ddp")
      run_ddp(rep, c, p);
    else
      throw ConfigValidationError("family: unknown family '" + c.family + "'");
  } catch (const ShapeError& e) {
    throw ConfigValidationError(e.what());
  } catch (const dp::PartitionError& e) {
    throw ConfigValidationError(e.what());
  } catch (const dp::UnsupportedBase& e) {
    throw ConfigValidationError(e.what());
  } catch (const ddp::NonPsdCorrelation& e) {
    throw ConfigValidationError(e.what());
  }
  rep.timing["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.write(c.output);
  return rep;
}

int exit_code(const RunReport& report) { return report.passed() ? kExitOk : kExitCheckFailed; }

int report_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed document: " << e.what() << '\n';
    return kExitParse;
  } catch (const ConfigValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (...) {
    err << "error: unknown failure\n";
    return kExitValidation;
  }
}

}  // namespace seqbayes::cli
