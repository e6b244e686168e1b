#include "seqbayes/measure.hpp"
#include "seqbayes/measure_io.hpp"
#include "seqbayes/random_finite.hpp"

#include <doctest.h>

using namespace seqbayes;
using Q = Rational;

namespace {

Q q(long n, long d) { return Q(n, d); }

FiniteSpace two_theta() { return FiniteSpace({"t1", "t2"}); }
FiniteSpace two_x() { return FiniteSpace({"x1", "x2"}); }

FiniteKernel<Q> example_kernel() {
  return FiniteKernel<Q>::from_rows(two_theta(), two_x(), {{q(1, 5), q(4, 5)}, {q(3, 5), q(2, 5)}});
}

// dense matrix product written independently of compose()
std::vector<Q> matmul(std::span<const Q> a, std::span<const Q> b, std::size_t r, std::size_t k, std::size_t c) {
  std::vector<Q> out(r * c, Q(0));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      Q s(0);
      for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * c + j];
      out[i * c + j] = s;
    }
  return out;
}

}  // namespace

TEST_CASE("finite space labels and product indexing") {
  FiniteSpace a({"a", "b"}), b({"u", "v", "w"});
  CHECK_THROWS_AS(FiniteSpace({"a", "a"}), ShapeError);
  CHECK_THROWS_AS(FiniteSpace(std::vector<std::string>{}), ShapeError);
  auto ab = FiniteSpace::product({a, b});
  CHECK(ab.size() == 6);
  // row-major: last factor fastest
  CHECK(ab.label(1) == "(a,v)");
  CHECK(ab.label(3) == "(b,u)");
  for (std::size_t i = 0; i < ab.size(); ++i) {
    CHECK(ab.flatten(ab.unflatten(i)) == i);
    CHECK(ab.index_of(ab.label(i)) == i);
  }
  CHECK(FiniteSpace::product({a}) == a);
  CHECK_THROWS_AS(a.index_of("zz"), UnknownLabel);
}

TEST_CASE("distribution validation") {
  FiniteSpace s({"a", "b"});
  CHECK_THROWS_AS(Dist<Q>(s, {q(1, 2), q(1, 3)}), InvalidDistribution);
  CHECK_THROWS_AS(Dist<Q>(s, {q(3, 2), q(-1, 2)}), InvalidDistribution);
  CHECK_THROWS_AS(Dist<Q>(s, {Q(1)}), ShapeError);
  CHECK_NOTHROW(Dist<double>(s, {0.1 + 0.2, 0.7}));
  CHECK_THROWS_AS(Dist<double>(s, {0.5, 0.5 + 1e-9}), InvalidDistribution);
}

TEST_CASE("compose_kernels") {
  SUBCASE("identity after K is K") {
    auto k = example_kernel();
    CHECK(compose(identity_kernel<Q>(k.target()), k) == k);
    CHECK(compose(k, identity_kernel<Q>(k.source())) == k);
  }
  SUBCASE("deterministic kernels compose to the composite map") {
    FiniteSpace ab({"a", "b"}), bits({"0", "1"}), uv({"u", "v"});
    std::vector<std::size_t> f{1, 0}, g{1, 1}, gf{1, 1};
    auto kf = deterministic_kernel<Q>(ab, bits, f);
    auto kg = deterministic_kernel<Q>(bits, uv, g);
    CHECK(compose(kg, kf) == deterministic_kernel<Q>(ab, uv, gf));
  }
  SUBCASE("random 2x3 then 3x2 equals the dense matrix product") {
    Engine rng = make_stream(11);
    FiniteSpace x = FiniteSpace::enumerated(2, "x"), y = FiniteSpace::enumerated(3, "y"),
                z = FiniteSpace::enumerated(2, "z");
    for (int rep = 0; rep < 10; ++rep) {
      auto k1 = random_kernel<Q>(rng, x, y);
      auto k2 = random_kernel<Q>(rng, y, z);
      auto expect = matmul(k1.flat(), k2.flat(), 2, 3, 2);
      auto got = compose(k2, k1);
      CHECK(std::vector<Q>(got.flat().begin(), got.flat().end()) == expect);
    }
  }
  SUBCASE("shape mismatch") {
    auto k = example_kernel();
    CHECK_THROWS_AS(compose(k, k), ShapeError);
  }
}

TEST_CASE("pushforward") {
  auto k = example_kernel();
  CHECK(pushforward(k, Dist<Q>::dirac(two_theta(), 1)) == k.row_dist(1));
  auto pushed = pushforward(k, Dist<Q>::uniform(two_theta()));
  CHECK(pushed[0] == q(2, 5));
  CHECK(pushed[1] == q(3, 5));
  auto mu = Dist<Q>(two_theta(), {q(1, 7), q(6, 7)});
  CHECK(pushforward(identity_kernel<Q>(two_theta()), mu) == mu);
  CHECK_THROWS_AS(pushforward(k, Dist<Q>::uniform(two_x())), ShapeError);
}

TEST_CASE("product_kernel") {
  FiniteSpace theta({"t"}), coin({"h", "t"});
  const Q p = q(2, 7);
  auto k = FiniteKernel<Q>::from_rows(theta, coin, {{p, Q(1 - p)}});
  SUBCASE("single kernel") { CHECK(product_kernel<Q>({k}) == k); }
  SUBCASE("independent copies give the outer product") {
    auto kk = product_kernel<Q>({k, k});
    std::vector<Q> expect{p * p, p * (1 - p), (1 - p) * p, (1 - p) * (1 - p)};
    CHECK(std::vector<Q>(kk.flat().begin(), kk.flat().end()) == expect);
  }
  SUBCASE("three random rows match a nested-loop tensor") {
    Engine rng = make_stream(5);
    FiniteSpace src = FiniteSpace::enumerated(3, "s");
    FiniteSpace a = FiniteSpace::enumerated(2, "a"), b = FiniteSpace::enumerated(3, "b"),
                c = FiniteSpace::enumerated(2, "c");
    auto ka = random_kernel<Q>(rng, src, a), kb = random_kernel<Q>(rng, src, b), kc = random_kernel<Q>(rng, src, c);
    auto prod = product_kernel<Q>({ka, kb, kc});
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
          for (std::size_t l = 0; l < 2; ++l)
            CHECK(prod(t, (i * 3 + j) * 2 + l) == ka(t, i) * kb(t, j) * kc(t, l));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(product_kernel<Q>(std::span<const FiniteKernel<Q>>{}), ShapeError);
    CHECK_THROWS_AS(product_kernel<Q>({k, example_kernel()}), ShapeError);
  }
}

TEST_CASE("graph_joint") {
  auto k = example_kernel();
  SUBCASE("Dirac prior") {
    auto j = graph_joint(k, Dist<Q>::dirac(two_theta(), 0));
    CHECK(j.at({0, 0}) == q(1, 5));
    CHECK(j.at({0, 1}) == q(4, 5));
    CHECK(j.at({1, 0}) == Q(0));
    CHECK(j.at({1, 1}) == Q(0));
  }
  SUBCASE("uniform prior gives the elementwise product") {
    auto j = graph_joint(k, Dist<Q>::uniform(two_theta()));
    std::vector<Q> expect{q(1, 10), q(4, 10), q(3, 10), q(2, 10)};
    CHECK(std::vector<Q>(j.weights().begin(), j.weights().end()) == expect);
    CHECK(marginal(j, 0) == Dist<Q>::uniform(two_theta()));
    CHECK(marginal(j, 1) == pushforward(k, Dist<Q>::uniform(two_theta())));
  }
  SUBCASE("deterministic kernel is supported on the graph of the map") {
    FiniteSpace src = FiniteSpace::enumerated(4, "s"), tgt = FiniteSpace::enumerated(3, "y");
    std::vector<std::size_t> f{2, 0, 2, 1};
    auto j = graph_joint(deterministic_kernel<Q>(src, tgt, f), Dist<Q>::uniform(src));
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t y = 0; y < 3; ++y) CHECK((j.at({s, y}) != 0) == (f[s] == y));
  }
}

TEST_CASE("swap_joint") {
  JointDist<Q> j({two_theta(), two_x()}, {q(1, 10), q(4, 10), q(3, 10), q(2, 10)});
  auto s = swap_joint(j);
  std::vector<Q> expect{q(1, 10), q(3, 10), q(4, 10), q(2, 10)};
  CHECK(std::vector<Q>(s.weights().begin(), s.weights().end()) == expect);
  CHECK(s.factors()[0] == two_x());
  CHECK(swap_joint(s) == j);
  JointDist<Q> sym({two_x(), two_x()}, {q(1, 8), q(3, 8), q(3, 8), q(1, 8)});
  CHECK(swap_joint(sym) == sym);
  JointDist<Q> three({two_x(), two_x(), two_x()}, std::vector<Q>(8, q(1, 8)));
  CHECK_THROWS_AS(swap_joint(three), ShapeError);
}

TEST_CASE("marginalize") {
  Engine rng = make_stream(3);
  FiniteSpace a = FiniteSpace::enumerated(2, "a"), b = FiniteSpace::enumerated(3, "b"),
              c = FiniteSpace::enumerated(4, "c");
  auto d = random_dist<Q>(rng, FiniteSpace::product({a, b, c}));
  JointDist<Q> j = JointDist<Q>::from_dist(d);
  CHECK(marginalize(j, {0, 1, 2}) == j);
  SUBCASE("axis sum by brute force") {
    auto m = marginalize(j, {1});
    for (std::size_t jb = 0; jb < 3; ++jb) {
      Q s(0);
      for (std::size_t ia = 0; ia < 2; ++ia)
        for (std::size_t ic = 0; ic < 4; ++ic) s += j.at({ia, jb, ic});
      CHECK(m.weights()[jb] == s);
    }
    auto m02 = marginalize(j, {2, 0});
    CHECK(m02.factors()[0] == a);
    CHECK(m02.mass() == Q(1));
  }
  SUBCASE("graph then outcome axis is the pushforward") {
    auto k = random_kernel<Q>(rng, a, b);
    auto mu = random_dist<Q>(rng, a, 9, false);
    CHECK(marginal(graph_joint(k, mu), 1) == pushforward(k, mu));
  }
  CHECK_THROWS_AS(marginalize(j, {}), ShapeError);
  CHECK_THROWS_AS(marginalize(j, {3}), ShapeError);
}

TEST_CASE("kernel algebra properties over random kernels") {
  Engine rng = make_stream(2024);
  for (int rep = 0; rep < 60; ++rep) {
    std::vector<FiniteSpace> sp;
    for (int i = 0; i < 4; ++i) sp.push_back(FiniteSpace::enumerated(1 + uniform_index(rng, 6), "s"));
    auto k1 = random_kernel<Q>(rng, sp[0], sp[1]);
    auto k2 = random_kernel<Q>(rng, sp[1], sp[2]);
    auto k3 = random_kernel<Q>(rng, sp[2], sp[3]);
    auto mu = random_dist<Q>(rng, sp[0]);

    // associativity, exact
    CHECK(compose(k3, compose(k2, k1)) == compose(compose(k3, k2), k1));
    // functoriality of pushforward
    CHECK(pushforward(compose(k2, k1), mu) == pushforward(k2, pushforward(k1, mu)));
    // graph of a composition: chain (x, y, z) then drop y
    auto chained = marginalize(extend_joint(graph_joint(k1, mu), 1, k2), {0, 2});
    CHECK(chained == graph_joint(compose(k2, k1), mu));
    // graph kernel decomposes as projection after graph
    auto proj = marginal(JointDist<Q>::from_dist(pushforward(graph_kernel(k1), mu)), 1);
    CHECK(proj == pushforward(k1, mu));
    // mass conservation
    CHECK(pushforward(k3, pushforward(k2, pushforward(k1, mu))).mass() == Q(1));
    CHECK(swap_joint(graph_joint(k1, mu)).mass() == Q(1));

    // float mode within 1e-12
    std::vector<double> a1, a2, a3;
    for (auto& v : k1.flat()) a1.push_back(to_double(v));
    for (auto& v : k2.flat()) a2.push_back(to_double(v));
    for (auto& v : k3.flat()) a3.push_back(to_double(v));
    FiniteKernel<double> d1(detail::Trusted{}, sp[0], sp[1], a1), d2(detail::Trusted{}, sp[1], sp[2], a2),
        d3(detail::Trusted{}, sp[2], sp[3], a3);
    auto left = compose(d3, compose(d2, d1)), right = compose(compose(d3, d2), d1);
    CHECK(max_abs_deviation<double>(left.flat(), right.flat()) <= 1e-12);
  }
}

TEST_CASE("json documents round-trip") {
  Engine rng = make_stream(99);
  for (int rep = 0; rep < 20; ++rep) {
    FiniteSpace a = FiniteSpace::enumerated(1 + uniform_index(rng, 4), "a"),
                b = FiniteSpace::enumerated(1 + uniform_index(rng, 4), "b");
    auto k = random_kernel<Q>(rng, a, b);
    auto mu = random_dist<Q>(rng, a);
    auto j = graph_joint(k, mu);
    CHECK(io::kernel_from_json<Q>(io::to_json(k)) == k);
    CHECK(io::dist_from_json<Q>(io::to_json(mu)) == mu);
    CHECK(io::joint_from_json<Q>(nlohmann::json::parse(io::to_json(j).dump())) == j);
    // product spaces keep their factor structure
    auto pk = product_kernel<Q>({k, k});
    CHECK(io::kernel_from_json<Q>(io::to_json(pk)) == pk);

    auto fmu = to_float(mu);
    auto back = io::dist_from_json<double>(nlohmann::json::parse(io::to_json(fmu).dump()));
    CHECK(back == fmu);  // 17 significant digits round-trip exactly
  }
  CHECK_THROWS_AS(io::dist_from_json<Q>(nlohmann::json{{"kind", "kernel"}}), FormatError);
  CHECK(parse_scalar<Q>("0.25") == q(1, 4));
  CHECK(parse_scalar<Q>("2.5e-1") == q(1, 4));
  CHECK(parse_scalar<Q>("3/9") == q(1, 3));
  CHECK_THROWS(parse_scalar<Q>("1.2.3"));
}
