#include "seqbayes/ddp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace seqbayes::ddp {

CopulaSpec CopulaSpec::comonotone() {
  return {"comonotone", [](double, double) { return 1.0; }};
}

CopulaSpec CopulaSpec::independent() {
  return {"independent", [](double a, double b) { return a == b ? 1.0 : 0.0; }};
}

CopulaSpec CopulaSpec::exponential(double length_scale) {
  if (!(length_scale > 0.0)) throw std::invalid_argument("copula length scale must be positive");
  return {"exponential(" + format_double(length_scale) + ")",
          [length_scale](double a, double b) { return std::exp(-std::abs(a - b) / length_scale); }};
}

CopulaSpec parse_copula(const std::string& kind, double length_scale) {
  if (kind == "comonotone") return CopulaSpec::comonotone();
  if (kind == "independent") return CopulaSpec::independent();
  if (kind == "exponential") return CopulaSpec::exponential(length_scale);
  throw std::invalid_argument("unknown copula '" + kind + "' (expected exponential, comonotone or independent)");
}

std::size_t truncation_for_bias(double alpha, double bound) {
  if (!(alpha > 0.0) || !(bound > 0.0 && bound < 1.0)) throw std::invalid_argument("truncation_for_bias: bad arguments");
  const double r = alpha / (1.0 + alpha);
  auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(std::log(bound) / std::log(r))));
  while (std::pow(r, static_cast<double>(n)) >= bound) ++n;
  return n;
}

DdpSpec ParametricDdp::to_spec(std::span<const double> inputs) const {
  DdpSpec spec;
  const double la = log_alpha, ls = log_alpha_slope;
  spec.alpha_fn = [la, ls](double x) { return std::exp(la + ls * x); };
  // validate once so a bad kind fails here rather than mid-sampling
  dp::BaseDistribution::parse(base_kind, base_a, base_b);
  const std::string kind = base_kind;
  const double a = base_a, b = base_b, s = base_slope;
  if (kind == "normal") {
    spec.base_fn = [a, b, s](double x) { return dp::BaseDistribution::normal(a + s * x, b); };
  } else {
    spec.base_fn = [a, b, s](double x) { return dp::BaseDistribution::uniform(a + s * x, b + s * x); };
  }
  spec.copula_v = parse_copula(copula_v, copula_v_length);
  spec.copula_theta = parse_copula(copula_theta, copula_theta_length);
  if (truncation > 0) {
    spec.truncation = truncation;
  } else {
    double amax = spec.alpha_fn(0.0);
    if (!inputs.empty()) {
      amax = 0.0;
      for (double x : inputs) amax = std::max(amax, spec.alpha_fn(x));
    }
    spec.truncation = truncation_for_bias(amax, truncation_bias);
  }
  return spec;
}

// ---------------------------------------------------------------------------

CorrelationFactor::CorrelationFactor(const CopulaSpec& copula, std::span<const double> xs) {
  const auto m = static_cast<Eigen::Index>(xs.size());
  if (m == 0) throw std::invalid_argument("correlation over an empty input set");
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = copula.corr(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)]);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(c(i, i) - 1.0) > 1e-12) throw NonPsdCorrelation("copula correlation must be 1 on the diagonal");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(c(i, j) - c(j, i)) > 1e-12) throw NonPsdCorrelation("copula correlation is not symmetric");
      if (std::abs(c(i, j)) > 1.0) throw NonPsdCorrelation("copula correlation outside [-1, 1]");
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
  Eigen::VectorXd d = ldlt.vectorD();
  if (d.minCoeff() < -kCorrelationJitter) throw NonPsdCorrelation("copula correlation matrix is not positive semidefinite");
  Eigen::VectorXd root = d.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd l = ldlt.matrixL();
  Eigen::MatrixXd scaled = l * root.asDiagonal();
  factor_ = ldlt.transpositionsP().transpose() * scaled;
  if ((factor_ * factor_.transpose() - c).cwiseAbs().maxCoeff() > 1e-8)
    throw NonPsdCorrelation("copula correlation matrix is not positive semidefinite");
}

std::vector<double> CorrelationFactor::apply(std::span<const double> z) const {
  const auto m = factor_.rows();
  std::vector<double> out(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) s += factor_(i, j) * z[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

dp::DiscreteMeasure DdpPath::at(std::size_t site) const {
  dp::DiscreteMeasure g;
  g.atoms.assign(atoms[site].begin(), atoms[site].end());
  g.weights = weights[site];
  return g;
}

namespace {

struct Prepared {
  std::vector<double> xs;
  std::vector<double> alphas;
  std::vector<dp::BaseDistribution> bases;
  CorrelationFactor fv;
  CorrelationFactor ft;
  std::size_t truncation;

  Prepared(const DdpSpec& spec, std::span<const double> inputs)
      : xs(inputs.begin(), inputs.end()),
        fv(spec.copula_v, inputs),
        ft(spec.copula_theta, inputs),
        truncation(spec.truncation) {
    if (truncation < 1) throw std::invalid_argument("DDP truncation must be >= 1");
    for (double x : xs) {
      double a = spec.alpha_fn(x);
      if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("DDP concentration must be positive and finite");
      alphas.push_back(a);
      bases.push_back(spec.base_fn(x));
    }
  }
};

DdpPath draw(const Prepared& p, Engine& rng) {
  const std::size_t m = p.xs.size(), n = p.truncation;
  std::normal_distribution<double> normal(0.0, 1.0);
  DdpPath path;
  path.inputs = p.xs;
  path.atoms.assign(m, std::vector<double>(n));
  std::vector<std::vector<double>> v(m, std::vector<double>(n));
  std::vector<double> zv(m), zt(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& z : zv) z = normal(rng);
    for (auto& z : zt) z = normal(rng);
    auto cv = p.fv.apply(zv);
    auto ct = p.ft.apply(zt);
    for (std::size_t s = 0; s < m; ++s) {
      v[s][i] = dp::beta1_from_normal_score(cv[s], p.alphas[s]);
      path.atoms[s][i] = p.bases[s].from_normal_score(ct[s]);
    }
  }
  for (std::size_t s = 0; s < m; ++s) path.weights.push_back(dp::stick_weights(v[s]));
  return path;
}

std::vector<double> cell_masses(const DdpPath& path, std::size_t site, const dp::Partition& part) {
  std::vector<double> out(part.size(), 0.0);
  for (std::size_t i = 0; i < path.atoms[site].size(); ++i) out[part.cell_of(path.atoms[site][i])] += path.weights[site][i];
  return out;
}

}  // namespace

DdpPath sample_path(const DdpSpec& spec, std::span<const double> xs, Engine& rng) {
  Prepared p(spec, xs);
  return draw(p, rng);
}

DdpPath sample_path(const DdpSpec& spec, std::span<const double> xs, std::uint64_t seed) {
  Engine rng = make_stream(seed, 0);
  return sample_path(spec, xs, rng);
}

ProjectionSample finite_projection(const DdpSpec& spec, std::span<const double> xs, const dp::Partition& part,
                                   std::uint64_t seed, std::size_t replications) {
  if (replications < 1) throw std::invalid_argument("finite_projection: need at least one replication");
  Prepared prep(spec, xs);
  ProjectionSample out;
  out.inputs = prep.xs;
  out.cells = part.size();
  out.replications = replications;
  const std::size_t m = xs.size(), k = part.size();
  out.values.resize(replications * m * k);
  for (std::size_t r = 0; r < replications; ++r) {
    Engine rng = make_stream(seed, r);
    DdpPath path = draw(prep, rng);
    for (std::size_t s = 0; s < m; ++s) {
      auto masses = cell_masses(path, s, part);
      std::copy(masses.begin(), masses.end(), out.values.begin() + static_cast<std::ptrdiff_t>((r * m + s) * k));
    }
  }
  const double rr = static_cast<double>(replications);
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t c = 0; c < k; ++c) {
      double sum = 0.0;
      for (std::size_t r = 0; r < replications; ++r) sum += out.value(r, s, c);
      const double mean = sum / rr;
      double m2 = 0.0, m4 = 0.0;
      for (std::size_t r = 0; r < replications; ++r) {
        double d = out.value(r, s, c) - mean;
        m2 += d * d;
        m4 += d * d * d * d;
      }
      CellMoments cm;
      cm.mean = mean;
      cm.variance = replications > 1 ? m2 / (rr - 1.0) : 0.0;
      cm.se_mean = std::sqrt(cm.variance / rr);
      const double pop_var = m2 / rr;
      cm.se_variance = std::sqrt(std::max(0.0, m4 / rr - pop_var * pop_var) / rr);
      out.moments.push_back(cm);
    }
  }
  return out;
}

namespace {

double z_score(double observed, double target, double se) {
  const double diff = std::abs(observed - target);
  if (se > 0.0) return diff / se;
  return diff <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

MeanCheckReport mean_measure_check(const DdpSpec& spec, std::span<const double> xs, const dp::Partition& part,
                                   std::uint64_t seed, std::size_t replications) {
  if (replications < 1000) throw std::invalid_argument("mean_measure_check: needs at least 1000 replications");
  ProjectionSample sample = finite_projection(spec, xs, part, seed, replications);
  MeanCheckReport rep;
  rep.replications = replications;
  rep.passed = true;
  std::size_t within = 0, total = 0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const double alpha = spec.alpha_fn(xs[s]);
    rep.truncation_bias = std::max(rep.truncation_bias, dp::truncation_bias_bound(alpha, spec.truncation));
    const auto base = spec.base_fn(xs[s]);
    for (std::size_t c = 0; c < part.size(); ++c) {
      const double p = part.base_mass(base, c).convert_to<double>();
      const auto& cm = sample.moment(s, c);
      MeanCheckEntry e;
      e.input = xs[s];
      e.cell = c;
      e.target_mean = p;
      e.mean = cm.mean;
      e.z_mean = z_score(cm.mean, p, cm.se_mean);
      e.target_variance = p * (1.0 - p) / (1.0 + alpha);
      e.variance = cm.variance;
      e.z_variance = z_score(cm.variance, e.target_variance, cm.se_variance);
      if (e.z_mean > 3.0) rep.passed = false;
      within += (e.z_mean <= 3.0) + (e.z_variance <= 3.0);
      total += 2;
      rep.entries.push_back(e);
    }
  }
  rep.fraction_within = total ? static_cast<double>(within) / static_cast<double>(total) : 1.0;
  return rep;
}

DdpPredictive ddp_predictive_mc(const DdpSpec& spec, std::span<const LabeledPoint> train,
                                std::span<const double> test, const dp::Partition& part, std::uint64_t seed,
                                std::size_t replications) {
  if (replications < 1) throw std::invalid_argument("ddp_predictive_mc: need at least one replication");
  if (test.empty()) throw std::invalid_argument("ddp_predictive_mc: no test inputs");
  if (test.size() > 6) throw std::invalid_argument("ddp_predictive_mc: at most 6 test inputs (joint over cells^m)");

  std::vector<double> sites;
  for (const auto& p : train) sites.push_back(p.x);
  sites.insert(sites.end(), test.begin(), test.end());
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  auto site_of = [&](double x) {
    return static_cast<std::size_t>(std::lower_bound(sites.begin(), sites.end(), x) - sites.begin());
  };
  std::vector<std::pair<std::size_t, std::size_t>> obs;
  for (const auto& p : train) obs.emplace_back(site_of(p.x), part.cell_of(p.y));
  std::vector<std::size_t> test_sites;
  for (double t : test) test_sites.push_back(site_of(t));

  Prepared prep(spec, sites);
  const std::size_t k = part.size(), m = test.size();
  std::size_t joint_size = 1;
  for (std::size_t j = 0; j < m; ++j) joint_size *= k;

  DdpPredictive out;
  out.test.assign(test.begin(), test.end());
  out.cells = k;
  out.replications = replications;
  out.joint.assign(joint_size, 0.0);
  out.marginals.assign(m * k, 0.0);

  std::vector<double> weights(replications);
  std::vector<double> test_masses(replications * m * k);
  std::vector<std::vector<double>> masses(sites.size());
  double wsum = 0.0, wsq = 0.0;
  for (std::size_t r = 0; r < replications; ++r) {
    Engine rng = make_stream(seed, r);
    DdpPath path = draw(prep, rng);
    for (std::size_t s = 0; s < sites.size(); ++s) masses[s] = cell_masses(path, s, part);
    double w = 1.0;
    for (const auto& [s, c] : obs) w *= masses[s][c];
    weights[r] = w;
    wsum += w;
    wsq += w * w;
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < k; ++c) test_masses[(r * m + j) * k + c] = masses[test_sites[j]][c];
    if (w == 0.0) continue;
    for (std::size_t flat = 0; flat < joint_size; ++flat) {
      double f = w;
      std::size_t rem = flat;
      for (std::size_t j = m; j-- > 0;) {
        f *= masses[test_sites[j]][rem % k];
        rem /= k;
      }
      out.joint[flat] += f;
    }
  }
  out.effective_sample_size = wsq > 0.0 ? wsum * wsum / wsq : 0.0;
  out.low_ess = out.effective_sample_size < kMinEffectiveSampleSize;
  if (wsum <= 0.0) {
    out.marginal_se.assign(m * k, std::numeric_limits<double>::infinity());
    return out;
  }
  for (auto& v : out.joint) v /= wsum;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < replications; ++r) acc += weights[r] * test_masses[(r * m + j) * k + c];
      out.marginals[j * k + c] = acc / wsum;
    }
  out.marginal_se.assign(m * k, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t c = 0; c < k; ++c) {
      const double est = out.marginals[j * k + c];
      double acc = 0.0;
      for (std::size_t r = 0; r < replications; ++r) {
        double d = test_masses[(r * m + j) * k + c] - est;
        acc += weights[r] * weights[r] * d * d;
      }
      out.marginal_se[j * k + c] = std::sqrt(acc) / wsum;
    }
  return out;
}

}  // namespace seqbayes::ddp
