#include "seqbayes/gp.hpp"

#include "seqbayes/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace seqbayes::gp {

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "rbf") return KernelFamily::Rbf;
  if (name == "matern32") return KernelFamily::Matern32;
  if (name == "constant") return KernelFamily::Constant;
  throw std::invalid_argument("unknown kernel family '" + name + "' (expected rbf, matern32 or constant)");
}

std::string kernel_family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::Rbf: return "rbf";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Constant: return "constant";
  }
  return "?";
}

GpPrior make_prior(KernelFamily family, double length_scale, double signal_var, double noise_var) {
  if (!(length_scale > 0.0)) throw std::invalid_argument("length scale must be positive");
  if (!(signal_var >= 0.0)) throw std::invalid_argument("signal variance must be nonnegative");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("noise variance must be nonnegative");
  GpPrior p;
  p.mean = [](double) { return 0.0; };
  p.noise_var = [noise_var](double) { return noise_var; };
  switch (family) {
    case KernelFamily::Rbf:
      p.cov = [=](double a, double b) {
        double d = (a - b) / length_scale;
        return signal_var * std::exp(-0.5 * d * d);
      };
      break;
    case KernelFamily::Matern32:
      p.cov = [=](double a, double b) {
        double r = std::sqrt(3.0) * std::abs(a - b) / length_scale;
        return signal_var * (1.0 + r) * std::exp(-r);
      };
      break;
    case KernelFamily::Constant:
      p.cov = [=](double, double) { return signal_var; };
      break;
  }
  return p;
}

void GaussianBelief::validate() const {
  const auto k = static_cast<Eigen::Index>(size());
  if (cov.rows() != k || cov.cols() != k) throw std::logic_error("belief covariance has wrong shape");
  if (tags.size() != size() || inputs.size() != size()) throw std::logic_error("belief tags do not match size");
  if (k == 0) return;
  double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::logic_error("belief covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
  double floor = -1e-8 * std::max(cov.trace(), std::numeric_limits<double>::min());
  if (eig.eigenvalues().minCoeff() < floor) throw std::logic_error("belief covariance is not positive semidefinite");
}

GaussianBelief build_joint(const GpPrior& prior, std::span<const double> test, std::span<const double> train) {
  const std::size_t m = test.size(), n = train.size(), k = m + n;
  if (k == 0) throw std::invalid_argument("build_joint: no coordinates");
  GaussianBelief b;
  b.mean.resize(static_cast<Eigen::Index>(k));
  b.cov.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  b.inputs.assign(test.begin(), test.end());
  b.inputs.insert(b.inputs.end(), train.begin(), train.end());
  b.tags.assign(m, Coord::Test);
  b.tags.insert(b.tags.end(), n, Coord::Train);
  for (std::size_t i = 0; i < k; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    b.mean(ii) = prior.mean(b.inputs[i]);
    for (std::size_t j = 0; j <= i; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      double v = prior.cov(b.inputs[i], b.inputs[j]);
      b.cov(ii, jj) = v;
      b.cov(jj, ii) = v;
    }
    if (b.tags[i] == Coord::Train) b.cov(ii, ii) += prior.noise_var(b.inputs[i]);
  }
  if (!b.mean.allFinite() || !b.cov.allFinite()) throw std::domain_error("build_joint: non-finite kernel value");
  return b;
}

namespace {

// Rank-one conditioning of the leading `k` coordinates on coordinate `o`.
void update_block(Matrix& cov, Vector& mean, Eigen::Index k, Eigen::Index o, double y) {
  const double s = cov(o, o);
  const double resid = y - mean(o);
  if (s <= kDegenerateVariance) {
    if (std::abs(resid) > kConsistencyTolerance)
      throw InconsistentObservation("deterministic coordinate observed at " + std::to_string(y) +
                                    " but belief mean is " + std::to_string(mean(o)));
    return;
  }
  Vector v = cov.col(o).head(k);
  const double step = resid / s;
  for (Eigen::Index i = 0; i < k; ++i) mean(i) += v(i) * step;
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < k; ++i) cov(i, j) -= v(i) * v(j) / s;
}

void remove_coordinate(GaussianBelief& b, Eigen::Index o) {
  const Eigen::Index k = b.mean.size();
  for (Eigen::Index i = o; i + 1 < k; ++i) b.mean(i) = b.mean(i + 1);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = o; i + 1 < k; ++i) b.cov(i, j) = b.cov(i + 1, j);
  for (Eigen::Index j = o; j + 1 < k; ++j) b.cov.col(j) = b.cov.col(j + 1);
  b.mean.conservativeResize(k - 1);
  b.cov.conservativeResize(k - 1, k - 1);
  b.tags.erase(b.tags.begin() + o);
  b.inputs.erase(b.inputs.begin() + o);
}

}  // namespace

void condition_one_in_place(GaussianBelief& belief, std::size_t coord, double y) {
  if (coord >= belief.size()) throw std::out_of_range("condition_one: coordinate out of range");
  if (belief.tags[coord] != Coord::Train) throw std::invalid_argument("condition_one: coordinate is not a training value");
  const auto o = static_cast<Eigen::Index>(coord);
  update_block(belief.cov, belief.mean, belief.mean.size(), o, y);
  remove_coordinate(belief, o);
}

GaussianBelief condition_one(const GaussianBelief& belief, std::size_t coord, double y) {
  GaussianBelief out = belief;
  condition_one_in_place(out, coord, y);
  return out;
}

GaussianBelief batch_predictive(const GpPrior& prior, std::span<const double> test,
                                std::span<const Observation> train) {
  if (train.empty()) return build_joint(prior, test, {});
  const auto m = static_cast<Eigen::Index>(test.size()), n = static_cast<Eigen::Index>(train.size());
  Matrix a(n, n), ktx(m, n);
  Vector resid(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = train[static_cast<std::size_t>(i)].x;
    resid(i) = train[static_cast<std::size_t>(i)].y - prior.mean(xi);
    for (Eigen::Index j = 0; j <= i; ++j) {
      double v = prior.cov(xi, train[static_cast<std::size_t>(j)].x);
      a(i, j) = v;
      a(j, i) = v;
    }
    a(i, i) += prior.noise_var(xi);
    for (Eigen::Index t = 0; t < m; ++t) ktx(t, i) = prior.cov(test[static_cast<std::size_t>(t)], xi);
  }
  if (!a.allFinite() || !ktx.allFinite()) throw std::domain_error("batch_predictive: non-finite kernel value");

  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    Matrix jittered = a;
    jittered.diagonal().array() += kJitterScale * a.trace() / static_cast<double>(n);
    llt.compute(jittered);
    if (llt.info() != Eigen::Success)
      throw ConditioningError("batch_predictive: training covariance is numerically singular");
  }

  GaussianBelief out = build_joint(prior, test, {});
  if (m == 0) return out;
  Matrix v = llt.matrixL().solve(ktx.transpose());  // n x m
  Vector z = llt.matrixL().solve(resid);
  out.mean += v.transpose() * z;
  Matrix reduction = v.transpose() * v;
  out.cov -= 0.5 * (reduction + reduction.transpose());
  return out;
}

GaussianBelief recursive_predictive(const GpPrior& prior, std::span<const double> test,
                                    std::span<const Observation> train) {
  // training values are laid out in reverse stream order so the next one to
  // consume is always the last active coordinate
  std::vector<double> xs;
  xs.reserve(train.size());
  for (auto it = train.rbegin(); it != train.rend(); ++it) xs.push_back(it->x);
  GaussianBelief b = build_joint(prior, test, xs);
  Eigen::Index k = static_cast<Eigen::Index>(b.size());
  for (const auto& obs : train) {
    update_block(b.cov, b.mean, k, k - 1, obs.y);
    --k;
  }
  b.mean.conservativeResize(k);
  b.cov.conservativeResize(k, k);
  b.tags.resize(static_cast<std::size_t>(k));
  b.inputs.resize(static_cast<std::size_t>(k));
  return b;
}

StreamingPredictor::StreamingPredictor(GpPrior prior, std::vector<double> test)
    : prior_(std::move(prior)), test_(std::move(test)) {
  if (test_.empty()) throw std::invalid_argument("StreamingPredictor: no test inputs");
  belief_ = build_joint(prior_, test_, {});
  reserve(64);
}

void StreamingPredictor::reserve(std::size_t n) {
  const auto cap = static_cast<Eigen::Index>(n);
  if (chol_.rows() >= cap) return;
  const auto m = static_cast<Eigen::Index>(test_.size());
  const auto used = static_cast<Eigen::Index>(n_);
  Matrix chol = Matrix::Zero(cap, cap);
  Matrix w = Matrix::Zero(cap, m);
  Vector z = Vector::Zero(cap);
  if (used > 0) {
    chol.topLeftCorner(used, used) = chol_.topLeftCorner(used, used);
    w.topRows(used) = w_.topRows(used);
    z.head(used) = z_.head(used);
  }
  chol_ = std::move(chol);
  w_ = std::move(w);
  z_ = std::move(z);
}

void StreamingPredictor::observe(double x, double y) {
  const auto m = static_cast<Eigen::Index>(test_.size());
  const auto n = static_cast<Eigen::Index>(n_);

  Vector kx(n);
  for (Eigen::Index i = 0; i < n; ++i) kx(i) = prior_.cov(xs_[static_cast<std::size_t>(i)], x);
  Vector v = n > 0 ? Vector(chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(kx)) : Vector(0);

  Vector cross(m);
  for (Eigen::Index t = 0; t < m; ++t) cross(t) = prior_.cov(test_[static_cast<std::size_t>(t)], x);
  double var = prior_.cov(x, x) + prior_.noise_var(x);
  double mean = prior_.mean(x);
  if (n > 0) {
    cross.noalias() -= w_.topRows(n).transpose() * v;
    var -= v.squaredNorm();
    mean += v.dot(z_.head(n));
  }

  if (var <= kDegenerateVariance && std::abs(y - mean) > kConsistencyTolerance)
    throw InconsistentObservation("deterministic coordinate observed at " + std::to_string(y) +
                                  " but belief mean is " + std::to_string(mean));

  // extend the belief with the new noisy coordinate, then condition it away
  belief_.mean.conservativeResize(m + 1);
  belief_.mean(m) = mean;
  belief_.cov.conservativeResize(m + 1, m + 1);
  belief_.cov.col(m).head(m) = cross;
  belief_.cov.row(m).head(m) = cross.transpose();
  belief_.cov(m, m) = var;
  belief_.tags.push_back(Coord::Train);
  belief_.inputs.push_back(x);
  condition_one_in_place(belief_, static_cast<std::size_t>(m), y);

  if (var <= kDegenerateVariance) return;  // value was already determined; nothing new to remember
  reserve(n_ + 1 > static_cast<std::size_t>(chol_.rows()) ? 2 * (n_ + 1) : n_ + 1);
  const double d = std::sqrt(var);
  if (n > 0) chol_.row(n).head(n) = v.transpose();
  chol_(n, n) = d;
  w_.row(n) = cross.transpose() / d;
  z_(n) = (y - mean) / d;
  xs_.push_back(x);
  ++n_;
}

RandomInstance random_instance(std::uint64_t seed, KernelFamily family, std::size_t n, std::size_t m) {
  Engine rng = make_stream(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RandomInstance inst;
  inst.length_scale = 0.5 + 1.5 * uniform01(rng);
  inst.noise_var = 0.01 + 0.49 * uniform01(rng);
  inst.prior = make_prior(family, inst.length_scale, 1.0, inst.noise_var);
  for (std::size_t i = 0; i < n; ++i) {
    double x = 10.0 * uniform01(rng);
    inst.train.push_back({x, std::sin(x) + std::sqrt(inst.noise_var) * normal(rng)});
  }
  for (std::size_t j = 0; j < m; ++j) inst.test.push_back(10.0 * uniform01(rng));
  return inst;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

volatile double g_sink = 0.0;

}  // namespace

std::size_t cumulative_crossover(std::span<const double> batch_step, std::span<const double> streaming_step) {
  if (batch_step.size() != streaming_step.size()) throw std::invalid_argument("crossover: length mismatch");
  double cb = 0.0, cs = 0.0;
  std::size_t crossover = 0;
  for (std::size_t i = 0; i < batch_step.size(); ++i) {
    cb += batch_step[i];
    cs += streaming_step[i];
    if (cs < cb) {
      if (crossover == 0) crossover = i + 1;
    } else {
      crossover = 0;
    }
  }
  return crossover;
}

BenchResult benchmark(const GpPrior& prior, std::span<const double> test, std::span<const Observation> stream,
                      std::span<const std::size_t> sizes, int repetitions) {
  using clock = std::chrono::steady_clock;
  if (repetitions < 1) throw std::invalid_argument("benchmark: repetitions must be >= 1");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0 || sizes[i] > stream.size()) throw std::invalid_argument("benchmark: size out of range");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw std::invalid_argument("benchmark: sizes must be strictly ascending");
  }
  const std::size_t n_max = sizes.empty() ? 0 : sizes.back();
  std::vector<std::vector<double>> batch(n_max), streaming(n_max);

  for (int rep = 0; rep < repetitions; ++rep) {
    for (std::size_t n = 1; n <= n_max; ++n) {
      auto t0 = clock::now();
      auto b = batch_predictive(prior, test, stream.first(n));
      auto t1 = clock::now();
      g_sink = g_sink + b.mean(0);
      batch[n - 1].push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    StreamingPredictor sp(prior, std::vector<double>(test.begin(), test.end()));
    for (std::size_t n = 1; n <= n_max; ++n) {
      auto t0 = clock::now();
      sp.observe(stream[n - 1].x, stream[n - 1].y);
      auto t1 = clock::now();
      streaming[n - 1].push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    g_sink = g_sink + sp.belief().mean(0);
  }

  BenchResult res;
  for (std::size_t n = 0; n < n_max; ++n) {
    res.batch_step.push_back(median(batch[n]));
    res.streaming_step.push_back(median(streaming[n]));
  }
  res.crossover = cumulative_crossover(res.batch_step, res.streaming_step);
  std::vector<double> cb(n_max), cs(n_max);
  double ab = 0.0, as = 0.0;
  for (std::size_t n = 0; n < n_max; ++n) {
    cb[n] = ab += res.batch_step[n];
    cs[n] = as += res.streaming_step[n];
  }
  for (auto n : sizes) {
    res.rows.push_back({n, "batch_refit", res.batch_step[n - 1], repetitions});
    res.rows.push_back({n, "streaming", res.streaming_step[n - 1], repetitions});
    res.rows.push_back({n, "batch_refit_cumulative", cb[n - 1], repetitions});
    res.rows.push_back({n, "streaming_cumulative", cs[n - 1], repetitions});
  }
  return res;
}

}  // namespace seqbayes::gp
