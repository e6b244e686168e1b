#pragma once

// Bayesian inversion on finite spaces.
//
// Outcomes with zero evidence get the prior as their posterior. Inversions are
// only unique up to evidence-null sets, so any choice there satisfies the
// defining equation; the prior keeps the result deterministic.

#include "seqbayes/model.hpp"

#include <vector>

namespace seqbayes {

template <ProbabilityScalar S>
struct InversionResult {
  FiniteKernel<S> kernel;                   // outcome -> P(theta)
  Dist<S> evidence;                         // prior marginal on outcomes
  std::vector<std::size_t> null_outcomes;   // outcomes with zero evidence
};

template <ProbabilityScalar S>
InversionResult<S> brute_force_invert(const FiniteKernel<S>& p, const Dist<S>& prior) {
  if (!(prior.space() == p.source())) throw ShapeError("brute_force_invert: prior space does not match kernel source");
  const std::size_t nt = p.source().size(), nx = p.target().size();
  Dist<S> evidence = pushforward(p, prior);
  std::vector<S> rows(nx * nt, S(0));
  std::vector<std::size_t> nulls;
  for (std::size_t x = 0; x < nx; ++x) {
    const S& ev = evidence[x];
    if (ev == S(0)) {
      nulls.push_back(x);
      for (std::size_t t = 0; t < nt; ++t) rows[x * nt + t] = prior[t];
      continue;
    }
    for (std::size_t t = 0; t < nt; ++t) rows[x * nt + t] = p(t, x) * prior[t] / ev;
  }
  return {FiniteKernel<S>(detail::Trusted{}, p.target(), p.source(), std::move(rows)), std::move(evidence),
          std::move(nulls)};
}

template <ProbabilityScalar S>
struct InversionCheck {
  bool holds;
  S deviation;
};

/// Compares swap(Gamma_q pushed from the evidence) with Gamma_p pushed from the prior.
template <ProbabilityScalar S>
InversionCheck<S> verify_inversion(const FiniteKernel<S>& q, const FiniteKernel<S>& p, const Dist<S>& prior) {
  if (!(q.source() == p.target()) || !(q.target() == p.source()))
    throw ShapeError("verify_inversion: q must map p's outcomes back to p's parameters");
  auto lhs = swap_joint(graph_joint(q, pushforward(p, prior)));
  auto rhs = graph_joint(p, prior);
  S dev = max_abs_deviation<S>(lhs.weights(), rhs.weights());
  return {dev <= ScalarTraits<S>::tolerance(), dev};
}

/// Slice a two-factor joint at B = b and renormalize; zero slices return the A-marginal.
template <ProbabilityScalar S>
Dist<S> condition_joint(const JointDist<S>& j, std::size_t b) {
  if (j.arity() != 2) throw ShapeError("condition_joint: expected two factors");
  const std::size_t na = j.factors()[0].size(), nb = j.factors()[1].size();
  if (b >= nb) throw UnknownLabel("condition_joint: observed label out of range");
  std::vector<S> slice(na);
  S mass(0);
  for (std::size_t a = 0; a < na; ++a) {
    slice[a] = j.weights()[a * nb + b];
    mass += slice[a];
  }
  if (mass == S(0)) return marginal(j, 0);
  for (auto& v : slice) v /= mass;
  return Dist<S>(detail::Trusted{}, j.factors()[0], std::move(slice));
}

template <ProbabilityScalar S>
Dist<S> condition_joint(const JointDist<S>& j, std::string_view b) {
  if (j.arity() != 2) throw ShapeError("condition_joint: expected two factors");
  return condition_joint(j, j.factors()[1].index_of(b));
}

/// Posterior after all observations at once: invert the product sampling kernel on Y^n.
template <ProbabilityScalar S>
Dist<S> batch_invert(const SupervisedModel<S>& model, const TrainingSample& sample) {
  if (sample.size() == 0) return model.prior();
  auto xs = sample.inputs();
  auto p = sampling_operator(model, std::span<const std::string>(xs));
  std::vector<std::size_t> ys;
  for (const auto& pr : sample.pairs) ys.push_back(model.labels().index_of(pr.second));
  std::size_t outcome = ys.size() == 1 ? ys.front() : p.target().flatten(ys);
  auto inv = brute_force_invert(p, model.prior());
  return inv.kernel.row_dist(outcome);
}

/// Posterior by folding observations left to right; each posterior is the next prior.
template <ProbabilityScalar S>
Dist<S> sequential_invert(const SupervisedModel<S>& model, const TrainingSample& sample) {
  Dist<S> posterior = model.prior();
  for (const auto& [x, y] : sample.pairs) {
    auto p = model.evaluated(model.inputs().index_of(x));
    auto inv = brute_force_invert(p, posterior);
    posterior = inv.kernel.row_dist(model.labels().index_of(y));
  }
  return posterior;
}

}  // namespace seqbayes
