#include "seqbayes/inversion.hpp"
#include "seqbayes/random_finite.hpp"

#include <doctest.h>

#include <algorithm>

using namespace seqbayes;
using Q = Rational;

namespace {

Q q(long n, long d) { return Q(n, d); }

FiniteSpace two_theta() { return FiniteSpace({"t1", "t2"}); }
FiniteSpace two_x() { return FiniteSpace({"x1", "x2"}); }

FiniteKernel<Q> example_kernel() {
  return FiniteKernel<Q>::from_rows(two_theta(), two_x(), {{q(1, 5), q(4, 5)}, {q(3, 5), q(2, 5)}});
}

// Posterior by multiplying likelihoods directly, no kernels involved.
template <ProbabilityScalar S>
std::vector<S> likelihood_posterior(const SupervisedModel<S>& model, const TrainingSample& sample) {
  std::vector<S> w(model.theta().size());
  S z(0);
  for (std::size_t t = 0; t < w.size(); ++t) {
    S v = model.prior()[t];
    for (const auto& [x, y] : sample.pairs)
      v *= model.sampling_row(t, model.inputs().index_of(x))[model.labels().index_of(y)];
    w[t] = v;
    z += v;
  }
  for (auto& v : w) v /= z;
  return w;
}

}  // namespace

TEST_CASE("brute-force inversion on the two-point example") {
  auto p = example_kernel();
  auto prior = Dist<Q>::uniform(two_theta());
  auto inv = brute_force_invert(p, prior);
  CHECK(inv.kernel.row_dist(0).weights()[0] == q(1, 4));
  CHECK(inv.kernel.row_dist(0).weights()[1] == q(3, 4));
  CHECK(inv.evidence == pushforward(p, prior));
  CHECK(inv.null_outcomes.empty());

  auto chk = verify_inversion(inv.kernel, p, prior);
  CHECK(chk.holds);
  CHECK(chk.deviation == Q(0));

  CHECK_THROWS_AS(brute_force_invert(p, Dist<Q>::uniform(two_x())), ShapeError);
}

TEST_CASE("bijective deterministic kernel inverts to the preimage") {
  FiniteSpace t({"a", "b", "c"}), x({"u", "v", "w"});
  std::vector<std::size_t> f{2, 0, 1};
  auto p = deterministic_kernel<Q>(t, x, f);
  auto prior = Dist<Q>(t, {q(1, 2), q(1, 3), q(1, 6)});
  auto inv = brute_force_invert(p, prior);
  for (std::size_t i = 0; i < 3; ++i) CHECK(inv.kernel.row_dist(f[i]) == Dist<Q>::dirac(t, i));
}

TEST_CASE("zero-evidence outcomes get the prior") {
  FiniteSpace x({"x1", "x2", "x3"});
  auto p = FiniteKernel<Q>::from_rows(two_theta(), x, {{q(1, 2), q(1, 2), Q(0)}, {q(1, 3), q(2, 3), Q(0)}});
  auto prior = Dist<Q>(two_theta(), {q(1, 4), q(3, 4)});
  auto inv = brute_force_invert(p, prior);
  REQUIRE(inv.null_outcomes.size() == 1);
  CHECK(inv.null_outcomes[0] == 2);
  CHECK(inv.kernel.row_dist(2) == prior);
  CHECK(verify_inversion(inv.kernel, p, prior).holds);
}

TEST_CASE("verify_inversion rejects the constant-prior kernel") {
  auto p = example_kernel();
  auto prior = Dist<Q>::uniform(two_theta());
  auto q_bad = constant_kernel(two_x(), prior);
  auto chk = verify_inversion(q_bad, p, prior);
  CHECK_FALSE(chk.holds);

  // both sides by enumeration: lhs(t,x) = prior(t) ev(x), rhs(t,x) = prior(t) p(x|t)
  Q ev[2] = {Q(0), Q(0)};
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t x = 0; x < 2; ++x) ev[x] += prior[t] * p(t, x);
  Q dev(0);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t x = 0; x < 2; ++x) {
      Q d = abs(prior[t] * ev[x] - prior[t] * p(t, x));
      if (d > dev) dev = d;
    }
  CHECK(dev == q(1, 10));
  CHECK(chk.deviation == dev);

  CHECK_THROWS_AS(verify_inversion(p, p, prior), ShapeError);
}

TEST_CASE("uninformative kernel inverts to the prior") {
  auto prior = Dist<Q>(two_theta(), {q(2, 7), q(5, 7)});
  auto p = constant_kernel(two_theta(), Dist<Q>(two_x(), {q(1, 3), q(2, 3)}));
  CHECK(verify_inversion(constant_kernel(two_x(), prior), p, prior).holds);
  auto inv = brute_force_invert(p, prior);
  CHECK(inv.kernel.row_dist(0) == prior);
  CHECK(inv.kernel.row_dist(1) == prior);
}

TEST_CASE("condition_joint slices and renormalizes") {
  JointDist<Q> j({two_theta(), two_x()}, {q(1, 10), q(4, 10), q(3, 10), q(2, 10)});
  auto c = condition_joint(j, "x2");
  CHECK(c.weights()[0] == q(2, 3));
  CHECK(c.weights()[1] == q(1, 3));
  CHECK_THROWS_AS(condition_joint(j, 5), UnknownLabel);
  CHECK_THROWS_AS(condition_joint(j, "nope"), UnknownLabel);

  // independent joint conditions back to the first factor
  auto mu = Dist<Q>(two_theta(), {q(1, 3), q(2, 3)});
  auto nu = Dist<Q>(two_x(), {q(1, 5), q(4, 5)});
  auto prod = graph_joint(constant_kernel(two_theta(), nu), mu);
  CHECK(condition_joint(prod, 0) == mu);
  CHECK(condition_joint(prod, 1) == mu);

  JointDist<Q> dirac({two_theta(), two_x()}, {Q(0), Q(0), Q(1), Q(0)});
  CHECK(condition_joint(dirac, 0) == Dist<Q>::dirac(two_theta(), 1));
  // zero slice falls back to the marginal
  CHECK(condition_joint(dirac, 1) == Dist<Q>::dirac(two_theta(), 1));

  JointDist<Q> three({two_theta(), two_x(), two_x()}, std::vector<Q>(8, q(1, 8)));
  CHECK_THROWS_AS(condition_joint(three, 0), ShapeError);
}

TEST_CASE("batch and sequential inversion: base cases") {
  FiniteSpace inputs({"a", "b"});
  auto prior = Dist<Q>(two_theta(), {q(1, 3), q(2, 3)});
  std::vector<Dist<Q>> table{Dist<Q>(two_x(), {q(1, 5), q(4, 5)}), Dist<Q>(two_x(), {q(1, 2), q(1, 2)}),
                             Dist<Q>(two_x(), {q(3, 5), q(2, 5)}), Dist<Q>(two_x(), {q(1, 4), q(3, 4)})};
  SupervisedModel<Q> model(two_theta(), prior, inputs, two_x(), table);

  CHECK(batch_invert(model, TrainingSample{}) == prior);
  CHECK(sequential_invert(model, TrainingSample{}) == prior);

  TrainingSample one{{{"b", "x2"}}};
  auto single = brute_force_invert(model.evaluated(1), prior).kernel.row_dist(1);
  CHECK(batch_invert(model, one) == single);
  CHECK(sequential_invert(model, one) == single);

  TrainingSample bad{{{"c", "x1"}}};
  CHECK_THROWS_AS(batch_invert(model, bad), UnknownLabel);
  CHECK_THROWS_AS(sequential_invert(model, bad), UnknownLabel);
}

TEST_CASE("identical observations commute") {
  FiniteSpace inputs({"a"});
  auto prior = Dist<Q>(two_theta(), {q(1, 3), q(2, 3)});
  std::vector<Dist<Q>> table{Dist<Q>(two_x(), {q(1, 5), q(4, 5)}), Dist<Q>(two_x(), {q(4, 5), q(1, 5)})};
  SupervisedModel<Q> model(two_theta(), prior, inputs, two_x(), table);
  TrainingSample s1{{{"a", "x1"}, {"a", "x2"}, {"a", "x1"}}};
  TrainingSample s2{{{"a", "x2"}, {"a", "x1"}, {"a", "x1"}}};
  CHECK(sequential_invert(model, s1) == sequential_invert(model, s2));
}

TEST_CASE("batch equals sequential on random models (rational)") {
  auto rng = make_stream(20260417, 1);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto model = random_model<Q>(rng);
    std::size_t n = uniform_index(rng, 6);
    auto sample = sample_training(rng, model, n);
    auto batch = batch_invert(model, sample);
    auto seq = sequential_invert(model, sample);
    CHECK(batch == seq);
    CHECK(batch.weights().size() == model.theta().size());
    auto oracle = likelihood_posterior(model, sample);
    CHECK(std::equal(oracle.begin(), oracle.end(), batch.weights().begin()));
    if (n > 0) {
      auto xs = sample.inputs();
      auto p = sampling_operator(model, std::span<const std::string>(xs));
      auto inv = brute_force_invert(p, model.prior());
      CHECK(verify_inversion(inv.kernel, p, model.prior()).holds);
    }
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("batch equals sequential on random models (float)") {
  auto rng = make_stream(20260417, 2);
  for (int trial = 0; trial < 100; ++trial) {
    auto model = random_model<double>(rng);
    auto sample = sample_training(rng, model, uniform_index(rng, 6));
    auto batch = batch_invert(model, sample);
    auto seq = sequential_invert(model, sample);
    CHECK(max_abs_deviation<double>(batch.weights(), seq.weights()) <= 1e-12);
  }
}

TEST_CASE("evidence of n observations marginalizes to evidence of n-1") {
  auto rng = make_stream(20260417, 3);
  for (int trial = 0; trial < 50; ++trial) {
    auto model = random_model<Q>(rng);
    std::size_t n = 2 + uniform_index(rng, 4);
    auto xs = sample_training(rng, model, n).inputs();
    auto full = pushforward(sampling_operator(model, std::span<const std::string>(xs)), model.prior());
    auto shorter = pushforward(sampling_operator(model, std::span<const std::string>(xs).first(n - 1)),
                               model.prior());
    std::vector<std::size_t> keep(n - 1);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    auto m = marginalize(JointDist<Q>::from_dist(full), keep);
    CHECK(std::equal(m.weights().begin(), m.weights().end(), shorter.weights().begin(), shorter.weights().end()));
  }
}

TEST_CASE("permuting observations at one input leaves the posterior unchanged") {
  auto rng = make_stream(20260417, 4);
  for (int trial = 0; trial < 50; ++trial) {
    FiniteModelBounds b;
    b.max_inputs = 1;
    auto model = random_model<Q>(rng, b);
    auto sample = sample_training(rng, model, 2 + uniform_index(rng, 4));
    auto base = sequential_invert(model, sample);
    auto shuffled = sample;
    std::shuffle(shuffled.pairs.begin(), shuffled.pairs.end(), rng);
    CHECK(sequential_invert(model, shuffled) == base);
    std::reverse(shuffled.pairs.begin(), shuffled.pairs.end());
    CHECK(sequential_invert(model, shuffled) == base);
  }
}
