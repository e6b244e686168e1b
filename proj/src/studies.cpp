#include "seqbayes/studies.hpp"

#include "seqbayes/inversion.hpp"
#include "seqbayes/supervised.hpp"

#include <algorithm>
#include <cmath>

namespace seqbayes::cli {

using Q = Rational;

namespace {

struct FiniteCase {
  SupervisedModel<Q> model;
  TrainingSample sample;
};

FiniteCase draw_case(Engine& rng, const FiniteStudy& s) {
  auto model = random_model<Q>(rng, s.bounds);
  std::size_t n = uniform_index(rng, s.max_n + 1);
  auto sample = sample_training(rng, model, n);
  return {std::move(model), std::move(sample)};
}

SupervisedModel<double> to_float_model(const SupervisedModel<Q>& m) {
  std::vector<Dist<double>> table;
  for (const auto& d : m.sampling_table()) table.push_back(to_float(d));
  return SupervisedModel<double>(m.theta(), to_float(m.prior()), m.inputs(), m.labels(), std::move(table));
}

// Predictive by slicing the prior joint over Y^{m+n} (test coordinates first)
// at the observed training labels, enumerating only the surviving slice.
std::vector<Q> joint_slice(const SupervisedModel<Q>& model, const TrainingSample& train, const TestInputs& test) {
  const std::size_t m = test.points.size(), n = train.size(), ny = model.labels().size();
  std::vector<std::size_t> xs, ys;
  for (const auto& x : test.points) xs.push_back(model.inputs().index_of(x));
  for (const auto& [x, y] : train.pairs) {
    xs.push_back(model.inputs().index_of(x));
    ys.push_back(model.labels().index_of(y));
  }
  std::size_t outcomes = 1;
  for (std::size_t i = 0; i < m; ++i) outcomes *= ny;
  std::vector<Q> out(outcomes, Q(0));
  Q mass(0);
  std::vector<std::size_t> labels(m + n);
  for (std::size_t a = 0; a < outcomes; ++a) {
    std::size_t rem = a;
    for (std::size_t k = m; k-- > 0;) {
      labels[k] = rem % ny;
      rem /= ny;
    }
    for (std::size_t k = 0; k < n; ++k) labels[m + k] = ys[k];
    Q w(0);
    for (std::size_t t = 0; t < model.theta().size(); ++t) {
      Q v = model.prior()[t];
      for (std::size_t k = 0; k < m + n && v != 0; ++k) v *= model.sampling_row(t, xs[k])[labels[k]];
      w += v;
    }
    out[a] = w;
    mass += w;
  }
  if (mass == 0) return out;
  for (auto& v : out) v /= mass;
  return out;
}

bool same_weights(std::span<const Q> a, std::span<const Q> b) { return std::equal(a.begin(), a.end(), b.begin(), b.end()); }

// Textbook Kalman measurement update for a scalar observation y = H f + e, e ~ N(0, r):
//   K = P H^T (H P H^T + r)^{-1},  f' = f + K (y - H f),  P' = (I - K H) P
void kalman_update(gp::Vector& f, gp::Matrix& p, Eigen::Index j, double y, double r) {
  const Eigen::Index k = f.size();
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(k);
  h(j) = 1.0;
  const double innovation_var = (h * p * h.transpose())(0, 0) + r;
  gp::Vector gain = p * h.transpose() / innovation_var;
  f += gain * (y - (h * f)(0));
  p = (gp::Matrix::Identity(k, k) - gain * h) * p;
}

struct SampleMoments {
  double mean = 0.0, variance = 0.0, se_mean = 0.0, se_variance = 0.0;
};

SampleMoments sample_moments(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  SampleMoments m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - m.mean) * (x - m.mean);
    m2 += d;
    m4 += d * d;
  }
  m.variance = m2 / (n - 1.0);
  m.se_mean = std::sqrt(m.variance / n);
  const double pop = m2 / n;
  m.se_variance = std::sqrt(std::max(0.0, m4 / n - pop * pop) / n);
  return m;
}

double two_sample_z(double a, double se_a, double b, double se_b) {
  const double se = std::sqrt(se_a * se_a + se_b * se_b);
  const double d = std::abs(a - b);
  if (se > 0.0) return d / se;
  return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

// ---------------------------------------------------------------------------
// finite

void study_batch_online(RunReport& rep, const std::string& dir, std::uint64_t seed, const FiniteStudy& s) {
  Engine rng = make_stream(seed, 1);
  CsvWriter csv({"model", "theta", "inputs", "labels", "n", "rational_equal", "float_max_deviation"});
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < s.models; ++i) {
    auto c = draw_case(rng, s);
    const bool equal = batch_invert(c.model, c.sample) == sequential_invert(c.model, c.sample);
    mismatches += !equal;
    auto fm = to_float_model(c.model);
    auto fb = batch_invert(fm, c.sample);
    auto fs = sequential_invert(fm, c.sample);
    const double dev = max_abs_deviation<double>(fb.weights(), fs.weights());
    worst = std::max(worst, dev);
    csv.cell(i).cell(c.model.theta().size()).cell(c.model.inputs().size()).cell(c.model.labels().size());
    csv.cell(c.sample.size()).cell(equal).cell(dev);
    csv.end_row();
  }
  csv.save(output_path(dir, "finite_batch_online.csv"));
  rep.outputs.push_back("finite_batch_online.csv");
  rep.add_check("sequential_equals_batch_rational", mismatches == 0, static_cast<double>(mismatches), 0.0,
                "models whose sequential and batch posteriors differ");
  rep.add_check("sequential_equals_batch_float", worst <= s.float_tolerance, worst, s.float_tolerance,
                "max elementwise deviation");
  rep.metrics["batch_online_models"] = s.models;
}

void study_operator_equation(RunReport& rep, const std::string& dir, std::uint64_t seed, const FiniteStudy& s) {
  Engine rng = make_stream(seed, 1);  // same models as study_batch_online
  CsvWriter csv({"model", "n", "inversions", "max_deviation"});
  std::size_t inversions = 0, failures = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < s.models; ++i) {
    auto c = draw_case(rng, s);
    std::size_t here = 0;
    Q model_worst(0);
    auto verify = [&](const FiniteKernel<Q>& p, const Dist<Q>& prior) {
      auto inv = brute_force_invert(p, prior);
      auto chk = verify_inversion(inv.kernel, p, prior);
      ++here;
      failures += !chk.holds;
      if (chk.deviation > model_worst) model_worst = chk.deviation;
      return inv;
    };
    if (c.sample.size() > 0) {
      auto xs = c.sample.inputs();
      verify(sampling_operator(c.model, std::span<const std::string>(xs)), c.model.prior());
    }
    Dist<Q> posterior = c.model.prior();
    for (const auto& [x, y] : c.sample.pairs) {
      auto inv = verify(c.model.evaluated(c.model.inputs().index_of(x)), posterior);
      posterior = inv.kernel.row_dist(c.model.labels().index_of(y));
    }
    inversions += here;
    worst = std::max(worst, to_double(model_worst));
    csv.cell(i).cell(c.sample.size()).cell(here).cell(format_scalar(model_worst));
    csv.end_row();
  }
  csv.save(output_path(dir, "operator_equation.csv"));
  rep.outputs.push_back("operator_equation.csv");
  rep.add_check("operator_equation_rational", failures == 0 && worst == 0.0, worst, 0.0,
                std::to_string(inversions) + " inversions verified");
  rep.metrics["inversions_verified"] = inversions;
}

void study_finite_predictive(RunReport& rep, const std::string& dir, std::uint64_t seed, const FiniteStudy& s) {
  Engine rng = make_stream(seed, 3);
  CsvWriter csv({"model", "theta", "labels", "n", "m", "recursive_equal", "joint_slice_equal"});
  std::size_t rec_mismatch = 0, slice_mismatch = 0;
  for (std::size_t i = 0; i < s.models; ++i) {
    auto c = draw_case(rng, s);
    auto test = random_test_inputs(rng, c.model.inputs(), 1 + uniform_index(rng, s.max_m));
    auto batch = posterior_predictive_batch(c.model, c.sample, test);
    auto rec = posterior_predictive_recursive(c.model, c.sample, test);
    auto slice = joint_slice(c.model, c.sample, test);
    const bool req = batch == rec;
    const bool seq = same_weights(batch.weights(), slice);
    rec_mismatch += !req;
    slice_mismatch += !seq;
    csv.cell(i).cell(c.model.theta().size()).cell(c.model.labels().size()).cell(c.sample.size());
    csv.cell(test.points.size()).cell(req).cell(seq);
    csv.end_row();
  }
  csv.save(output_path(dir, "finite_predictive.csv"));
  rep.outputs.push_back("finite_predictive.csv");
  rep.add_check("recursive_equals_batch_predictive", rec_mismatch == 0, static_cast<double>(rec_mismatch), 0.0,
                "models with differing predictives");
  rep.add_check("predictive_equals_joint_slice", slice_mismatch == 0, static_cast<double>(slice_mismatch), 0.0,
                "models where the predictive differs from the sliced joint");
}

void study_finite_consistency(RunReport& rep, const std::string& dir, std::uint64_t seed, const FiniteStudy& s) {
  Engine rng = make_stream(seed, 4);
  CsvWriter csv({"model", "n", "m", "equal"});
  std::size_t mismatches = 0;
  const std::size_t max_m = std::max<std::size_t>(s.max_m, 2) - 1;
  for (std::size_t i = 0; i < s.models; ++i) {
    auto c = draw_case(rng, s);
    std::size_t m = 1 + uniform_index(rng, max_m);
    auto longer = random_test_inputs(rng, c.model.inputs(), m + 1);
    TestInputs shorter{{longer.points.begin(), longer.points.end() - 1}};
    auto big = JointDist<Q>::from_dist(posterior_predictive_batch(c.model, c.sample, longer));
    std::vector<std::size_t> keep(m);
    for (std::size_t k = 0; k < m; ++k) keep[k] = k;
    auto marg = marginalize(big, keep);
    auto small = posterior_predictive_recursive(c.model, c.sample, shorter);
    const bool eq = same_weights(marg.weights(), small.weights());
    mismatches += !eq;
    csv.cell(i).cell(c.sample.size()).cell(m).cell(eq);
    csv.end_row();
  }
  csv.save(output_path(dir, "finite_consistency.csv"));
  rep.outputs.push_back("finite_consistency.csv");
  rep.add_check("finite_predictive_consistency", mismatches == 0, static_cast<double>(mismatches), 0.0,
                "models where the marginalized predictive differs");
}

// ---------------------------------------------------------------------------
// gp

void study_gp_compare(RunReport& rep, const std::string& dir, std::uint64_t seed, const GpStudy& s) {
  Engine rng = make_stream(seed, 5);
  CsvWriter csv({"instance", "seed", "n", "m", "length_scale", "noise_var", "mean_rel_dev", "cov_abs_dev",
                 "kalman_abs_dev"});
  double worst_mean = 0.0, worst_cov = 0.0, worst_kalman = 0.0;
  for (std::size_t i = 0; i < s.instances; ++i) {
    const std::uint64_t inst_seed = rng();
    const std::size_t n = i == 0 ? s.max_n : 1 + uniform_index(rng, s.max_n);
    const std::size_t m = i == 0 ? s.max_m : 1 + uniform_index(rng, s.max_m);
    auto inst = gp::random_instance(inst_seed, s.family, n, m);
    auto b = gp::batch_predictive(inst.prior, inst.test, inst.train);
    auto r = gp::recursive_predictive(inst.prior, inst.test, inst.train);
    const double mean_dev = (r.mean - b.mean).cwiseAbs().maxCoeff() / std::max(1.0, b.mean.cwiseAbs().maxCoeff());
    const double cov_dev = (r.cov - b.cov).cwiseAbs().maxCoeff();

    // one conditioning step against the textbook gain on the latent values
    std::vector<double> xs;
    for (const auto& o : inst.train) xs.push_back(o.x);
    auto belief = gp::build_joint(inst.prior, inst.test, xs);
    const std::size_t j = uniform_index(rng, n);
    const auto o = static_cast<Eigen::Index>(m + j);
    auto stepped = gp::condition_one(belief, m + j, inst.train[j].y);
    gp::Vector f = belief.mean;
    gp::Matrix p = belief.cov;
    for (std::size_t k = 0; k < n; ++k) p(static_cast<Eigen::Index>(m + k), static_cast<Eigen::Index>(m + k)) -= inst.noise_var;
    kalman_update(f, p, o, inst.train[j].y, inst.noise_var);
    double kalman_dev = 0.0;
    for (Eigen::Index a = 0, ra = 0; a < f.size(); ++a) {
      if (a == o) continue;
      kalman_dev = std::max(kalman_dev, std::abs(stepped.mean(ra) - f(a)));
      for (Eigen::Index c = 0, rc = 0; c < f.size(); ++c) {
        if (c == o) continue;
        const double noise = (a == c && a >= static_cast<Eigen::Index>(m)) ? inst.noise_var : 0.0;
        kalman_dev = std::max(kalman_dev, std::abs(stepped.cov(ra, rc) - (p(a, c) + noise)));
        ++rc;
      }
      ++ra;
    }

    worst_mean = std::max(worst_mean, mean_dev);
    worst_cov = std::max(worst_cov, cov_dev);
    worst_kalman = std::max(worst_kalman, kalman_dev);
    csv.cell(i).cell(inst_seed).cell(n).cell(m).cell(inst.length_scale).cell(inst.noise_var);
    csv.cell(mean_dev).cell(cov_dev).cell(kalman_dev);
    csv.end_row();
  }
  csv.save(output_path(dir, "gp_compare.csv"));
  rep.outputs.push_back("gp_compare.csv");
  rep.add_check("gp_mean_batch_vs_recursive", worst_mean <= s.mean_tolerance, worst_mean, s.mean_tolerance,
                "max |diff| / max(1, max |batch mean|)");
  rep.add_check("gp_cov_batch_vs_recursive", worst_cov <= s.cov_tolerance, worst_cov, s.cov_tolerance,
                "max entrywise |diff|");
  rep.add_check("gp_kalman_gain_form", worst_kalman <= s.kalman_tolerance, worst_kalman, s.kalman_tolerance,
                "single step vs textbook Kalman update");
  rep.metrics["gp_instances"] = s.instances;
  rep.metrics["gp_kernel"] = gp::kernel_family_name(s.family);
}

void study_gp_consistency(RunReport& rep, const std::string& dir, std::uint64_t seed, const GpStudy& s) {
  Engine rng = make_stream(seed, 6);
  CsvWriter csv({"instance", "n", "m", "batch_abs_dev", "recursive_abs_dev"});
  double worst = 0.0;
  const std::size_t max_m = std::max<std::size_t>(s.max_m, 2) - 1;
  for (std::size_t i = 0; i < s.instances; ++i) {
    const std::uint64_t inst_seed = rng();
    const std::size_t n = 1 + uniform_index(rng, s.max_n);
    const std::size_t m = 1 + uniform_index(rng, max_m);
    auto inst = gp::random_instance(inst_seed, s.family, n, m + 1);
    std::vector<double> shorter(inst.test.begin(), inst.test.end() - 1);
    const auto mm = static_cast<Eigen::Index>(m);
    auto dev = [&](const gp::GaussianBelief& big, const gp::GaussianBelief& small) {
      return std::max((big.mean.head(mm) - small.mean).cwiseAbs().maxCoeff(),
                      (big.cov.topLeftCorner(mm, mm) - small.cov).cwiseAbs().maxCoeff());
    };
    const double db = dev(gp::batch_predictive(inst.prior, inst.test, inst.train),
                          gp::batch_predictive(inst.prior, shorter, inst.train));
    const double dr = dev(gp::recursive_predictive(inst.prior, inst.test, inst.train),
                          gp::recursive_predictive(inst.prior, shorter, inst.train));
    worst = std::max({worst, db, dr});
    csv.cell(i).cell(n).cell(m).cell(db).cell(dr);
    csv.end_row();
  }
  csv.save(output_path(dir, "gp_consistency.csv"));
  rep.outputs.push_back("gp_consistency.csv");
  rep.add_check("gp_predictive_consistency", worst <= s.consistency_tolerance, worst, s.consistency_tolerance,
                "(m+1)-point predictive restricted to m points vs m-point predictive");
}

void study_gp_benchmark(RunReport& rep, const std::string& dir, std::uint64_t seed, const BenchStudy& s) {
  Engine rng = make_stream(seed, 7);
  auto inst = gp::random_instance(rng(), s.family, s.n_max, s.m);
  std::vector<std::size_t> sizes = s.sizes;
  if (sizes.empty()) {
    sizes.push_back(1);
    for (std::size_t n = 10; n < s.n_max; n += 10) sizes.push_back(n);
    if (sizes.back() != s.n_max) sizes.push_back(s.n_max);
  }
  auto res = gp::benchmark(inst.prior, inst.test, inst.train, sizes, s.repetitions);
  CsvWriter csv({"n", "method", "median_s", "reps"});
  for (const auto& row : res.rows) {
    csv.cell(row.n).cell(row.method).cell(row.median_s).cell(row.reps);
    csv.end_row();
  }
  csv.save(output_path(dir, "gp_bench.csv"));
  double cb = 0.0, cs = 0.0;
  for (double v : res.batch_step) cb += v;
  for (double v : res.streaming_step) cs += v;
  rep.timing["bench_file"] = "gp_bench.csv";
  rep.timing["bench_crossover_n"] = res.crossover;
  rep.timing["bench_cumulative_batch_s"] = cb;
  rep.timing["bench_cumulative_streaming_s"] = cs;
  rep.timing["bench_n_max"] = s.n_max;
  rep.timing["bench_repetitions"] = s.repetitions;
  rep.add_timing_check("streaming_cumulative_below_batch_after_crossover", res.crossover > 0,
                       static_cast<double>(res.crossover), static_cast<double>(s.n_max),
                       "crossover n (0 means none); cumulative streaming time stays below repeated refits from there on");
  rep.timing["bench_sizes"] = sizes;
}

// ---------------------------------------------------------------------------
// dirichlet

void study_dp_conjugacy(RunReport& rep, const std::string& dir, std::uint64_t seed, const DirichletStudy& s) {
  using namespace dp;
  DirichletMeasure alpha({{std::string("1"), Q(1)}, {std::string("2"), Q(1)}, {std::string("3"), Q(1)}});
  auto part = Partition::labels({"1", "2", "3"}, {{"1"}, {"2"}, {"3"}});
  std::vector<Location> y{std::string("2")};
  auto post = project(dp_posterior(alpha, y), part);
  const bool example = post == DirichletFinite({Q(1), Q(2), Q(1)}) && post == count_update(project(alpha, part), 1);
  rep.add_check("dirichlet_example_1_2_1", example, example ? 0.0 : 1.0, 0.0, "alpha = (1,1,1), y = 2");

  Engine rng = make_stream(seed, 8);
  CsvWriter csv({"case", "level", "cells", "observations", "equal"});
  std::size_t mismatches = 0, checked = 0;
  for (std::size_t i = 0; i < s.cases; ++i) {
    auto c = random_projective_case(rng(), s.levels, s.observations);
    auto posterior = dp_posterior(c.alpha, c.observations);
    for (std::size_t l = 0; l < c.chain.size(); ++l) {
      auto lhs = project(posterior, c.chain[l]);
      auto rhs = project(c.alpha, c.chain[l]);
      for (const auto& o : c.observations) rhs = count_update(rhs, c.chain[l].cell_of(o));
      const bool eq = lhs == rhs;
      mismatches += !eq;
      ++checked;
      csv.cell(i).cell(l).cell(c.chain[l].size()).cell(c.observations.size()).cell(eq);
      csv.end_row();
    }
  }
  csv.save(output_path(dir, "dp_conjugacy.csv"));
  rep.outputs.push_back("dp_conjugacy.csv");
  rep.add_check("dirichlet_conjugacy", mismatches == 0, static_cast<double>(mismatches), 0.0,
                std::to_string(checked) + " (case, partition) pairs");
}

void study_dp_projective(RunReport& rep, const std::string& dir, std::uint64_t seed, const DirichletStudy& s) {
  Engine rng = make_stream(seed, 9);
  CsvWriter csv({"case", "levels", "pairs", "max_deviation", "passed"});
  std::size_t failures = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < s.cases; ++i) {
    auto c = dp::random_projective_case(rng(), s.levels, s.observations);
    auto r = dp::check_projective(c.alpha, c.chain, c.observations);
    failures += !r.passed;
    worst = std::max(worst, r.max_deviation);
    csv.cell(i).cell(c.chain.size()).cell(r.pairs_checked).cell(r.max_deviation).cell(r.passed);
    csv.end_row();
  }
  csv.save(output_path(dir, "dp_projective.csv"));
  rep.outputs.push_back("dp_projective.csv");
  rep.add_check("projective_commutativity", failures == 0 && worst == 0.0, worst, 0.0,
                std::to_string(failures) + " failing chains of " + std::to_string(s.cases));
}

// ---------------------------------------------------------------------------
// ddp

std::vector<DdpCase> random_ddp_cases(std::uint64_t seed, const DdpStudy& s) {
  Engine rng = make_stream(seed, 10);
  std::vector<DdpCase> out;
  for (std::size_t k = 0; k < s.specs; ++k) {
    DdpCase c;
    auto& p = c.params;
    p.log_alpha = std::log(0.5 + 2.5 * uniform01(rng));
    p.log_alpha_slope = 0.4 * uniform01(rng) - 0.2;
    if (k % 2 == 0) {
      p.base_kind = "normal";
      p.base_a = 2.0 * uniform01(rng) - 1.0;
      p.base_b = 0.5 + uniform01(rng);
    } else {
      p.base_kind = "uniform";
      p.base_a = uniform01(rng) - 0.5;
      p.base_b = p.base_a + 1.0 + uniform01(rng);
    }
    p.base_slope = 0.5 * uniform01(rng) - 0.25;
    p.copula_v = k % 4 == 3 ? "comonotone" : "exponential";
    p.copula_v_length = 0.5 + 2.0 * uniform01(rng);
    p.copula_theta = k % 4 == 2 ? "independent" : "exponential";
    p.copula_theta_length = 0.5 + 2.0 * uniform01(rng);
    p.truncation = 0;
    p.truncation_bias = s.truncation_bias;
    for (std::size_t i = 0; i < s.sites; ++i) c.inputs.push_back(2.0 * uniform01(rng));
    std::sort(c.inputs.begin(), c.inputs.end());
    auto base = dp::BaseDistribution::parse(p.base_kind, p.base_a + p.base_slope * c.inputs.front(),
                                            p.base_b + (p.base_kind == "uniform" ? p.base_slope * c.inputs.front() : 0.0));
    for (double u : {0.2, 0.5, 0.8}) c.cuts.push_back(base.quantile(u));
    out.push_back(std::move(c));
  }
  return out;
}

void study_ddp_mean_measure(RunReport& rep, const std::string& dir, std::uint64_t seed, const DdpStudy& s) {
  auto cases = random_ddp_cases(seed, s);
  Engine rng = make_stream(seed, 11);
  CsvWriter csv({"case", "input", "cell", "target_mean", "mean", "z_mean", "target_variance", "variance",
                 "z_variance"});
  std::size_t within = 0, total = 0, means_within = 0, means_total = 0;
  double worst_bias = 0.0;
  json specs = json::array();
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& c = cases[k];
    auto spec = c.params.to_spec(c.inputs);
    auto part = dp::Partition::intervals(c.cuts);
    auto r = ddp::mean_measure_check(spec, c.inputs, part, rng(), s.replications);
    worst_bias = std::max(worst_bias, r.truncation_bias);
    for (const auto& e : r.entries) {
      within += (e.z_mean <= s.z_limit) + (e.z_variance <= s.z_limit);
      total += 2;
      means_within += e.z_mean <= s.z_limit;
      ++means_total;
      csv.cell(k).cell(e.input).cell(e.cell).cell(e.target_mean).cell(e.mean).cell(e.z_mean);
      csv.cell(e.target_variance).cell(e.variance).cell(e.z_variance);
      csv.end_row();
    }
    specs.push_back({{"base", c.params.base_kind},
                     {"log_alpha", c.params.log_alpha},
                     {"log_alpha_slope", c.params.log_alpha_slope},
                     {"copula_v", c.params.copula_v},
                     {"copula_theta", c.params.copula_theta},
                     {"truncation", spec.truncation},
                     {"truncation_bias", r.truncation_bias}});
  }
  csv.save(output_path(dir, "ddp_mean_check.csv"));
  rep.outputs.push_back("ddp_mean_check.csv");
  const double fraction = total ? static_cast<double>(within) / static_cast<double>(total) : 0.0;
  rep.add_check("ddp_z_scores_within_limit", fraction >= s.min_fraction, fraction, s.min_fraction,
                "share of mean and variance z-scores <= " + format_double(s.z_limit) + "; passes when >= tolerance");
  rep.add_check("ddp_truncation_bias", worst_bias < s.truncation_bias, worst_bias, s.truncation_bias,
                "max (alpha / (1 + alpha))^N over sites");
  rep.metrics["ddp_replications"] = s.replications;
  rep.metrics["ddp_mean_z_within"] = means_within;
  rep.metrics["ddp_mean_z_total"] = means_total;
  rep.metrics["ddp_specs"] = specs;
}

void study_ddp_single_site(RunReport& rep, const std::string& dir, std::uint64_t seed, const DdpStudy& s) {
  DdpStudy one = s;
  one.specs = 1;
  auto c = random_ddp_cases(seed ^ 0x5151u, one).front();
  std::vector<double> x{c.inputs.front()};
  auto spec = c.params.to_spec(x);
  auto part = dp::Partition::intervals(c.cuts);
  Engine rng = make_stream(seed, 12);
  auto sample = ddp::finite_projection(spec, x, part, rng(), s.replications);

  dp::DirichletMeasure alpha({}, dp::DiffusePart{spec.base_fn(x[0]), from_double<Rational>(spec.alpha_fn(x[0]))});
  const std::uint64_t dp_seed = rng();
  std::vector<std::vector<double>> cells(part.size(), std::vector<double>(s.replications));
  for (std::size_t r = 0; r < s.replications; ++r) {
    Engine sub = make_stream(dp_seed, r);
    auto masses = dp::project_sample(dp::stick_breaking_sample(alpha, spec.truncation, sub), part);
    for (std::size_t k = 0; k < masses.size(); ++k) cells[k][r] = masses[k];
  }

  CsvWriter csv({"cell", "ddp_mean", "dp_mean", "z_mean", "ddp_variance", "dp_variance", "z_variance"});
  double worst = 0.0;
  for (std::size_t k = 0; k < part.size(); ++k) {
    const auto& a = sample.moment(0, k);
    auto b = sample_moments(cells[k]);
    const double zm = two_sample_z(a.mean, a.se_mean, b.mean, b.se_mean);
    const double zv = two_sample_z(a.variance, a.se_variance, b.variance, b.se_variance);
    worst = std::max({worst, zm, zv});
    csv.cell(k).cell(a.mean).cell(b.mean).cell(zm).cell(a.variance).cell(b.variance).cell(zv);
    csv.end_row();
  }
  csv.save(output_path(dir, "ddp_single_site.csv"));
  rep.outputs.push_back("ddp_single_site.csv");
  rep.add_check("ddp_single_site_matches_dp", worst <= s.z_limit, worst, s.z_limit,
                "max two-sample z-score over cell means and variances");
  rep.metrics["single_site_input"] = x[0];
  rep.metrics["single_site_truncation"] = spec.truncation;
}

}  // namespace seqbayes::cli
