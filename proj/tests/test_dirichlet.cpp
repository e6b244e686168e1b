#include "seqbayes/dirichlet.hpp"

#include <doctest.h>

#include <cmath>

using namespace seqbayes;
using namespace seqbayes::dp;

namespace {

Rational q(long n, long d) { return Rational(n, d); }

DirichletMeasure three_labels() {
  return DirichletMeasure({{std::string("1"), Rational(1)}, {std::string("2"), Rational(1)}, {std::string("3"), Rational(1)}});
}

Partition singletons() { return Partition::labels({"1", "2", "3"}, {{"1"}, {"2"}, {"3"}}); }

struct Moments {
  double mean, var, se_mean, se_var;
};

Moments moments(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  double var = m2 / (n - 1.0);
  m4 /= n;
  return {m, var, std::sqrt(var / n), std::sqrt(std::max(0.0, m4 - var * var) / n)};
}

}  // namespace

TEST_CASE("posterior on a finite label space") {
  auto alpha = three_labels();
  std::vector<Location> none;
  auto same = dp_posterior(alpha, none);
  CHECK(project(same, singletons()) == project(alpha, singletons()));

  std::vector<Location> y{std::string("2")};
  auto post = project(dp_posterior(alpha, y), singletons());
  CHECK(post == DirichletFinite({Rational(1), Rational(2), Rational(1)}));
  CHECK(post == count_update(project(alpha, singletons()), 1));

  std::vector<Location> many(5, Location(std::string("3")));
  auto post5 = dp_posterior(alpha, many);
  CHECK(post5.atoms().size() == 3);
  CHECK(post5.total_mass() == Rational(8));
  CHECK(project(post5, singletons()).params[2] == Rational(6));
}

TEST_CASE("real atoms merge within tolerance") {
  DirichletMeasure alpha({{0.25, Rational(1)}}, DiffusePart{BaseDistribution::standard_normal(), Rational(2)});
  std::vector<Location> y{0.25 + 1e-14, 0.5, 0.5};
  auto post = dp_posterior(alpha, y);
  REQUIRE(post.atoms().size() == 2);
  CHECK(post.atoms()[0].weight == Rational(2));
  CHECK(post.atoms()[1].weight == Rational(2));
  CHECK(post.total_mass() == Rational(6));
}

TEST_CASE("projection onto interval partitions") {
  DirichletMeasure uni({}, DiffusePart{BaseDistribution::uniform(0.0, 1.0), Rational(3)});
  auto halves = Partition::intervals({0.5});
  CHECK(project(uni, halves) == DirichletFinite({q(3, 2), q(3, 2)}));
  CHECK(project(uni, Partition::intervals({})) == DirichletFinite({Rational(3)}));

  DirichletMeasure with_atom({{0.7, Rational(2)}}, DiffusePart{BaseDistribution::uniform(0.0, 1.0), Rational(3)});
  CHECK(project(with_atom, halves) == DirichletFinite({q(3, 2), q(7, 2)}));

  // cells are [c_k, c_{k+1}): a point on a cut belongs to the right cell
  CHECK(halves.cell_of(0.5) == 1);
  CHECK(halves.cell_of(0.4999) == 0);

  DirichletMeasure normal({}, DiffusePart{BaseDistribution::standard_normal(), Rational(2)});
  auto p = project(normal, halves);
  CHECK(p.total() == Rational(2));
  CHECK(to_double(p.params[0]) == doctest::Approx(2.0 * normal_cdf(0.5)).epsilon(1e-15));

  CHECK_THROWS_AS(project(normal, singletons()), UnsupportedBase);
  CHECK_THROWS_AS(BaseDistribution::parse("cauchy", 0.0, 1.0), UnsupportedBase);
  CHECK_THROWS_AS(BaseDistribution::uniform(1.0, 1.0), UnsupportedBase);
  CHECK_THROWS_AS(Partition::intervals({1.0, 0.5}), PartitionError);
  CHECK_THROWS_AS(Partition::labels({"a", "b"}, {{"a"}}), PartitionError);
  CHECK_THROWS_AS(Partition::labels({"a", "b"}, {{"a", "b"}, {"b"}}), PartitionError);
}

TEST_CASE("coarsening Dirichlet parameters") {
  DirichletFinite d({Rational(1), Rational(2), Rational(1)});
  std::vector<std::size_t> id{0, 1, 2}, merge{0, 0, 1}, gap{0, 0, 2};
  CHECK(coarsen(d, id, 3) == d);
  CHECK(coarsen(d, merge, 2) == DirichletFinite({Rational(3), Rational(1)}));
  CHECK_THROWS_AS(coarsen(d, gap, 3), PartitionError);
  CHECK_THROWS_AS(coarsen(d, merge, 1), PartitionError);

  for (std::size_t cell = 0; cell < 3; ++cell)
    CHECK(coarsen(count_update(d, cell), merge, 2) == count_update(coarsen(d, merge, 2), merge[cell]));

  auto fine = Partition::intervals({0.25, 0.5, 0.75});
  auto coarse = Partition::intervals({0.5});
  CHECK(fine.coarsening_map(coarse) == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK_THROWS_AS(coarse.coarsening_map(fine), PartitionError);
}

TEST_CASE("finite Dirichlet moments") {
  DirichletFinite d({Rational(1), Rational(2), Rational(1)});
  auto m = d.mean();
  auto v = d.variance();
  CHECK(m[1] == doctest::Approx(0.5));
  // a_i (A - a_i) / (A^2 (A + 1))
  CHECK(v[0] == doctest::Approx(1.0 * 3.0 / (16.0 * 5.0)));
  CHECK(v[1] == doctest::Approx(2.0 * 2.0 / (16.0 * 5.0)));
  CHECK_THROWS(DirichletFinite({Rational(0), Rational(0)}));
  CHECK_THROWS(DirichletFinite({Rational(-1), Rational(2)}));
}

TEST_CASE("stick-breaking draws") {
  auto alpha = three_labels();
  auto one = stick_breaking_sample(alpha, 1, 5);
  REQUIRE(one.weights.size() == 1);
  CHECK(one.weights[0] == 1.0);
  CHECK_THROWS_AS(stick_breaking_sample(alpha, 0, 5), std::invalid_argument);

  auto g = stick_breaking_sample(alpha, 40, 6);
  double s = 0.0;
  for (double w : g.weights) s += w;
  CHECK(std::abs(s - 1.0) <= 1e-12);
  auto a = stick_breaking_sample(alpha, 40, 6);
  CHECK(a.weights == g.weights);

  CHECK(truncation_bias_bound(3.0, 2) == doctest::Approx(0.5625));
  std::vector<double> v{0.5, 0.5, 0.5};
  CHECK(stick_weights(v) == std::vector<double>{0.5, 0.25, 0.25});
  // Beta(1, a) has CDF 1 - (1 - v)^a, so the median is 1 - 2^{-1/a}
  CHECK(beta1_from_normal_score(0.0, 3.0) == doctest::Approx(1.0 - std::pow(2.0, -1.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("expected stick weights") {
  const double mass = 2.0;
  DirichletMeasure alpha({}, DiffusePart{BaseDistribution::standard_normal(), Rational(2)});
  const std::size_t reps = 20000, sticks = 6;
  std::vector<std::vector<double>> w(sticks);
  Engine rng = make_stream(31, 0);
  for (std::size_t r = 0; r < reps; ++r) {
    auto g = stick_breaking_sample(alpha, 30, rng);
    for (std::size_t i = 0; i < sticks; ++i) w[i].push_back(g.weights[i]);
  }
  for (std::size_t i = 0; i < sticks; ++i) {
    double expect = (1.0 / (1.0 + mass)) * std::pow(mass / (1.0 + mass), static_cast<double>(i));
    auto m = moments(w[i]);
    CHECK(std::abs(m.mean - expect) <= 3.0 * m.se_mean);
  }
}

TEST_CASE("projected draws have Dirichlet moments") {
  DirichletMeasure alpha({{0.3, Rational(1)}}, DiffusePart{BaseDistribution::uniform(0.0, 1.0), Rational(2)});
  auto part = Partition::intervals({0.25, 0.5});
  auto target = project(alpha, part);
  auto mean = target.mean();
  auto var = target.variance();
  const std::size_t reps = 20000;
  std::vector<std::vector<double>> cells(part.size());
  Engine rng = make_stream(32, 0);
  std::size_t n = 1;
  while (truncation_bias_bound(3.0, n) >= 1e-6) ++n;
  for (std::size_t r = 0; r < reps; ++r) {
    auto c = project_sample(stick_breaking_sample(alpha, n, rng), part);
    for (std::size_t k = 0; k < c.size(); ++k) cells[k].push_back(c[k]);
  }
  for (std::size_t k = 0; k < part.size(); ++k) {
    auto m = moments(cells[k]);
    CHECK(std::abs(m.mean - mean[k]) <= 3.0 * m.se_mean);
    CHECK(std::abs(m.var - var[k]) <= 3.0 * m.se_var);
  }
}

TEST_CASE("projective commutativity") {
  auto alpha = three_labels();
  std::vector<Partition> single{singletons()};
  std::vector<Location> y{std::string("1"), std::string("3")};
  CHECK(check_projective(alpha, single, y).passed);

  DirichletMeasure real({{0.7, Rational(2)}, {0.1, q(1, 3)}}, DiffusePart{BaseDistribution::uniform(0.0, 1.0), Rational(3)});
  std::vector<Partition> chain{Partition::intervals({0.5}), Partition::intervals({0.25, 0.5}),
                               Partition::intervals({0.25, 0.5, 0.75})};
  std::vector<Location> obs{0.1, 0.3, 0.6, 0.7, 0.95};
  auto rep = check_projective(real, chain, obs);
  CHECK(rep.passed);
  CHECK(rep.max_deviation == 0.0);
  CHECK(rep.pairs_checked == 2);

  std::vector<Partition> broken{Partition::intervals({0.25}), Partition::intervals({0.5})};
  CHECK_THROWS_AS(check_projective(real, broken, obs), PartitionError);

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto c = random_projective_case(seed, 3, 5);
    auto r = check_projective(c.alpha, c.chain, c.observations);
    CHECK(r.passed);
    CHECK(r.max_deviation == 0.0);
  }
}
