#include "seqbayes/gp.hpp"
#include "seqbayes/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace seqbayes;
using namespace seqbayes::gp;

namespace {

GpPrior constant_prior(double k, double noise) {
  GpPrior p;
  p.mean = [](double) { return 0.0; };
  p.cov = [k](double, double) { return k; };
  p.noise_var = [noise](double) { return noise; };
  return p;
}

double mean_rel_error(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

double cov_abs_error(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Textbook Kalman measurement update on the latent values f at all coordinates:
// y_j = f_j + e with variance r, gain K = P H^T (H P H^T + r)^{-1}.
struct KalmanOracle {
  Vector mean;
  Matrix cov;

  void update(Eigen::Index j, double y, double r) {
    Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(mean.size());
    h(j) = 1.0;
    double s = (h * cov * h.transpose())(0, 0) + r;
    Vector gain = cov * h.transpose() / s;
    mean = mean + gain * (y - (h * mean)(0));
    Matrix ikh = Matrix::Identity(mean.size(), mean.size()) - gain * h;
    cov = ikh * cov;
  }
};

}  // namespace

TEST_CASE("build_joint layout") {
  auto p = make_prior(KernelFamily::Rbf, 1.5, 2.0, 0.3);
  std::vector<double> t{0.5}, none;
  auto b = build_joint(p, t, none);
  CHECK(b.size() == 1);
  CHECK(b.mean(0) == 0.0);
  CHECK(b.cov(0, 0) == 2.0);

  std::vector<double> tt{0.0, 1.0}, tr{2.0, 3.0};
  auto z = build_joint(constant_prior(0.0, 1.0), tt, tr);
  Matrix expect = Matrix::Zero(4, 4);
  expect(2, 2) = expect(3, 3) = 1.0;
  CHECK(z.cov == expect);
  CHECK(z.tags == std::vector<Coord>{Coord::Test, Coord::Test, Coord::Train, Coord::Train});

  // Gram matrix by direct evaluation of sigma^2 exp(-(a-b)^2 / (2 l^2))
  std::vector<double> xs{0.0, 0.7, 2.0};
  auto g = build_joint(p, xs, none);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double d = xs[i] - xs[j];
      CHECK(g.cov(i, j) == doctest::Approx(2.0 * std::exp(-d * d / (2.0 * 1.5 * 1.5))).epsilon(1e-15));
    }
  CHECK_THROWS_AS(build_joint(p, none, none), std::invalid_argument);

  GpPrior bad = p;
  bad.cov = [](double, double) { return std::nan(""); };
  CHECK_THROWS_AS(build_joint(bad, xs, none), std::domain_error);
  CHECK_THROWS_AS(make_prior(KernelFamily::Rbf, 0.0, 1.0, 0.1), std::invalid_argument);
  CHECK(parse_kernel_family("matern32") == KernelFamily::Matern32);
  CHECK(kernel_family_name(parse_kernel_family("rbf")) == "rbf");
  CHECK_THROWS(parse_kernel_family("linear"));
}

TEST_CASE("one training point, one test point") {
  auto p = constant_prior(1.0, 1.0);
  std::vector<double> test{0.0};
  std::vector<Observation> train{{1.0, 2.0}};
  auto joint = build_joint(p, test, std::vector<double>{1.0});
  auto c = condition_one(joint, 1, 2.0);
  REQUIRE(c.size() == 1);
  CHECK(c.mean(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  auto b = batch_predictive(p, test, train);
  CHECK(b.mean(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  auto r = recursive_predictive(p, test, train);
  CHECK(r.mean(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  auto prior_block = batch_predictive(p, test, std::vector<Observation>{});
  CHECK(prior_block.cov(0, 0) == 1.0);
  CHECK(prior_block.mean(0) == 0.0);
}

TEST_CASE("conditioning on an independent coordinate changes nothing") {
  GaussianBelief b;
  b.mean = Vector(3);
  b.mean << 1.0, -2.0, 0.5;
  b.cov = Matrix(3, 3);
  b.cov << 2.0, 0.3, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, 4.0;
  b.tags = {Coord::Test, Coord::Test, Coord::Train};
  b.inputs = {0.0, 1.0, 2.0};
  auto c = condition_one(b, 2, 10.0);
  CHECK(c.mean == b.mean.head(2));
  CHECK(c.cov == b.cov.topLeftCorner(2, 2));
  CHECK_THROWS_AS(condition_one(b, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(condition_one(b, 3, 1.0), std::out_of_range);
}

TEST_CASE("deterministic observations") {
  // noiseless constant kernel: after one value every other is determined
  auto p = constant_prior(1.0, 0.0);
  std::vector<double> test{0.0};
  std::vector<Observation> same{{1.0, 0.7}, {2.0, 0.7}};
  auto r = recursive_predictive(p, test, same);
  CHECK(r.mean(0) == doctest::Approx(0.7));
  CHECK(std::abs(r.cov(0, 0)) <= 1e-12);

  std::vector<Observation> clash{{1.0, 0.7}, {2.0, 1.7}};
  CHECK_THROWS_AS(recursive_predictive(p, test, clash), InconsistentObservation);

  StreamingPredictor sp(p, test);
  sp.observe(1.0, 0.7);
  sp.observe(2.0, 0.7 + 1e-9);
  CHECK(sp.consumed() == 1);
  CHECK(sp.belief().mean(0) == doctest::Approx(0.7));
  CHECK_THROWS_AS(sp.observe(3.0, 5.0), InconsistentObservation);
}

TEST_CASE("Kalman update matches condition_one") {
  auto rng = make_stream(404, 0);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = random_instance(1000 + trial, trial % 2 ? KernelFamily::Matern32 : KernelFamily::Rbf, 6, 3);
    std::vector<double> xs;
    for (const auto& o : inst.train) xs.push_back(o.x);
    auto belief = build_joint(inst.prior, inst.test, xs);
    // latent oracle: no noise on the train diagonal
    KalmanOracle k{belief.mean, belief.cov};
    for (Eigen::Index i = 3; i < 9; ++i) k.cov(i, i) -= inst.noise_var;

    std::size_t j = 3 + uniform_index(rng, 6);
    double y = inst.train[j - 3].y;
    auto c = condition_one(belief, j, y);
    k.update(static_cast<Eigen::Index>(j), y, inst.noise_var);

    // gain on the test block equals Sigma_{r,o} / Sigma_{oo}
    for (Eigen::Index t = 0; t < 3; ++t) {
      double gain = belief.cov(t, static_cast<Eigen::Index>(j)) / belief.cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
      CHECK(c.mean(t) == doctest::Approx(belief.mean(t) + gain * (y - belief.mean(static_cast<Eigen::Index>(j)))).epsilon(1e-12));
    }
    // drop the observed coordinate from the oracle and restore noise on remaining train values
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < 9; ++i)
      if (i != static_cast<Eigen::Index>(j)) keep.push_back(i);
    for (std::size_t a = 0; a < keep.size(); ++a) {
      CHECK(c.mean(static_cast<Eigen::Index>(a)) == doctest::Approx(k.mean(keep[a])).epsilon(1e-10));
      for (std::size_t b = 0; b < keep.size(); ++b) {
        double expect = k.cov(keep[a], keep[b]) + (a == b && keep[a] >= 3 ? inst.noise_var : 0.0);
        CHECK(std::abs(c.cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) - expect) <= 1e-10);
      }
    }
  }
}

TEST_CASE("batch equals recursive on random instances") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto family = seed % 2 ? KernelFamily::Matern32 : KernelFamily::Rbf;
    std::size_t n = seed < 10 ? 200 : 10 + 4 * seed;
    auto inst = random_instance(seed, family, n, 10);
    auto b = batch_predictive(inst.prior, inst.test, inst.train);
    auto r = recursive_predictive(inst.prior, inst.test, inst.train);
    CHECK(mean_rel_error(r.mean, b.mean) <= 1e-8);
    CHECK(cov_abs_error(r.cov, b.cov) <= 1e-6);
    CHECK_NOTHROW(r.validate());
    CHECK_NOTHROW(b.validate());
    Vector prior_diag = build_joint(inst.prior, inst.test, {}).cov.diagonal();
    CHECK((r.cov.diagonal().array() <= prior_diag.array() + 1e-12).all());
  }
  auto big = random_instance(77, KernelFamily::Rbf, 50, 5);
  auto b = batch_predictive(big.prior, big.test, big.train);
  auto r = recursive_predictive(big.prior, big.test, big.train);
  CHECK(mean_rel_error(r.mean, b.mean) <= 1e-8);
}

TEST_CASE("recursive result does not depend on stream order") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto inst = random_instance(500 + seed, KernelFamily::Rbf, 60, 4);
    auto base = recursive_predictive(inst.prior, inst.test, inst.train);
    auto shuffled = inst.train;
    auto rng = make_stream(seed, 9);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto other = recursive_predictive(inst.prior, inst.test, shuffled);
    CHECK(mean_rel_error(other.mean, base.mean) <= 1e-8);
    CHECK(cov_abs_error(other.cov, base.cov) <= 1e-8);
  }
}

TEST_CASE("streaming predictor equals rebuilding from scratch") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto inst = random_instance(900 + seed, seed % 2 ? KernelFamily::Matern32 : KernelFamily::Rbf, 120, 5);
    StreamingPredictor sp(inst.prior, inst.test);
    for (std::size_t i = 0; i < inst.train.size(); ++i) {
      sp.observe(inst.train[i].x, inst.train[i].y);
      if ((i + 1) % 20 == 0 || i < 3) {
        auto first = std::span<const Observation>(inst.train).first(i + 1);
        auto rebuilt = recursive_predictive(inst.prior, inst.test, first);
        CHECK(mean_rel_error(sp.belief().mean, rebuilt.mean) <= 1e-8);
        CHECK(cov_abs_error(sp.belief().cov, rebuilt.cov) <= 1e-8);
      }
    }
    CHECK(sp.consumed() == inst.train.size());
  }
  CHECK_THROWS_AS(StreamingPredictor(make_prior(KernelFamily::Rbf, 1.0, 1.0, 0.1), {}), std::invalid_argument);
}

TEST_CASE("singular training covariance is jittered or rejected") {
  auto p = constant_prior(1.0, 0.0);
  std::vector<double> test{0.0};
  std::vector<Observation> dup{{1.0, 0.5}, {2.0, 0.5}};
  auto b = batch_predictive(p, test, dup);
  CHECK(b.mean(0) == doctest::Approx(0.5).epsilon(1e-6));

  GpPrior broken = p;
  broken.cov = [](double a, double b) { return a == b ? 1.0 : 2.0; };
  CHECK_THROWS_AS(batch_predictive(broken, test, dup), ConditioningError);
}

TEST_CASE("benchmark schema and validation") {
  auto inst = random_instance(3, KernelFamily::Rbf, 40, 4);
  std::vector<std::size_t> sizes{1, 10, 40};
  auto res = benchmark(inst.prior, inst.test, inst.train, sizes, 2);
  CHECK(res.rows.size() == 12);
  CHECK(res.batch_step.size() == 40);
  for (const auto& row : res.rows) {
    CHECK(row.reps == 2);
    CHECK(row.median_s >= 0.0);
    CHECK(std::find(sizes.begin(), sizes.end(), row.n) != sizes.end());
  }
  CHECK(res.rows[0].method == "batch_refit");
  CHECK(res.rows[1].method == "streaming");
  CHECK(res.rows[2].method == "batch_refit_cumulative");
  CHECK(res.rows[3].method == "streaming_cumulative");

  std::vector<std::size_t> descending{10, 5};
  CHECK_THROWS_AS(benchmark(inst.prior, inst.test, inst.train, descending, 1), std::invalid_argument);
  std::vector<std::size_t> too_big{41};
  CHECK_THROWS_AS(benchmark(inst.prior, inst.test, inst.train, too_big, 1), std::invalid_argument);
  CHECK_THROWS_AS(benchmark(inst.prior, inst.test, inst.train, sizes, 0), std::invalid_argument);

  std::vector<double> batch{1, 1, 1, 1}, stream{3, 0.1, 0.1, 0.1};
  // cumulative: batch 1,2,3,4 vs streaming 3,3.1,3.2,3.3
  CHECK(cumulative_crossover(batch, stream) == 4);
  std::vector<double> slow{2, 2, 2, 2};
  CHECK(cumulative_crossover(batch, slow) == 0);
}
