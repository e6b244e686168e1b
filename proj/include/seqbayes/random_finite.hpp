#pragma once

// Random finite models and data for property checks.

#include "seqbayes/rng.hpp"
#include "seqbayes/supervised.hpp"

namespace seqbayes {

struct FiniteModelBounds {
  std::size_t max_theta = 6;
  std::size_t max_inputs = 4;
  std::size_t max_labels = 5;
};

/// Random distribution with small integer numerators (zeros allowed, at least one positive).
template <ProbabilityScalar S>
Dist<S> random_dist(Engine& rng, const FiniteSpace& space, int max_count = 9, bool allow_zero = true) {
  std::vector<long> counts(space.size());
  long total = 0;
  for (auto& c : counts) {
    c = static_cast<long>(uniform_index(rng, static_cast<std::size_t>(max_count) + (allow_zero ? 1 : 0))) +
        (allow_zero ? 0 : 1);
    total += c;
  }
  if (total == 0) {
    counts[uniform_index(rng, counts.size())] = 1;
    total = 1;
  }
  std::vector<S> w;
  for (auto c : counts) w.push_back(from_ratio<S>(c, total));
  return Dist<S>(space, std::move(w));
}

template <ProbabilityScalar S>
FiniteKernel<S> random_kernel(Engine& rng, const FiniteSpace& source, const FiniteSpace& target) {
  std::vector<S> rows;
  for (std::size_t i = 0; i < source.size(); ++i) {
    auto d = random_dist<S>(rng, target);
    rows.insert(rows.end(), d.weights().begin(), d.weights().end());
  }
  return FiniteKernel<S>(source, target, std::move(rows));
}

template <ProbabilityScalar S>
SupervisedModel<S> random_model(Engine& rng, const FiniteModelBounds& b = {}) {
  auto nt = 1 + uniform_index(rng, b.max_theta);
  auto nx = 1 + uniform_index(rng, b.max_inputs);
  auto ny = 2 + uniform_index(rng, b.max_labels - 1);
  FiniteSpace theta = FiniteSpace::enumerated(nt, "t");
  FiniteSpace inputs = FiniteSpace::enumerated(nx, "x");
  FiniteSpace labels = FiniteSpace::enumerated(ny, "y");
  auto prior = random_dist<S>(rng, theta, 9, false);
  std::vector<Dist<S>> table;
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t x = 0; x < nx; ++x) table.push_back(random_dist<S>(rng, labels));
  return SupervisedModel<S>(std::move(theta), std::move(prior), std::move(inputs), std::move(labels),
                            std::move(table));
}

namespace detail {
template <ProbabilityScalar S>
std::size_t draw_index(Engine& rng, std::span<const S> w) {
  double u = uniform01(rng), acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double p = to_double(w[i]);
    if (p <= 0.0) continue;
    last = i;
    acc += p;
    if (u < acc) return i;
  }
  return last;
}
}  // namespace detail

/// Draws theta from the prior, then labels at random inputs from the model.
/// Every drawn sample has positive evidence.
template <ProbabilityScalar S>
TrainingSample sample_training(Engine& rng, const SupervisedModel<S>& model, std::size_t n) {
  std::size_t t = detail::draw_index<S>(rng, model.prior().weights());
  TrainingSample s;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t x = uniform_index(rng, model.inputs().size());
    std::size_t y = detail::draw_index<S>(rng, model.sampling_row(t, x));
    s.pairs.emplace_back(model.inputs().label(x), model.labels().label(y));
  }
  return s;
}

inline TestInputs random_test_inputs(Engine& rng, const FiniteSpace& inputs, std::size_t m) {
  TestInputs t;
  for (std::size_t i = 0; i < m; ++i) t.points.push_back(inputs.label(uniform_index(rng, inputs.size())));
  return t;
}

}  // namespace seqbayes
