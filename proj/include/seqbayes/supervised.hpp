#pragma once

// Posterior predictive distributions for finite supervised models.

#include "seqbayes/inversion.hpp"

#include <algorithm>
#include <set>

namespace seqbayes {

namespace detail {

inline std::vector<std::string> concat(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

template <ProbabilityScalar S>
FiniteSpace label_power(const SupervisedModel<S>& model, std::size_t m) {
  return FiniteSpace::product(std::vector<FiniteSpace>(m, model.labels()));
}

}  // namespace detail

/// Slice the last factor at `b` and renormalize. Zero slices keep the marginal of the other factors.
template <ProbabilityScalar S>
JointDist<S> condition_last(const JointDist<S>& j, std::size_t b) {
  if (j.arity() < 2) throw ShapeError("condition_last: need at least two factors");
  const std::size_t nb = j.factors().back().size();
  if (b >= nb) throw UnknownLabel("condition_last: observed label out of range");
  auto w = j.weights();
  const std::size_t na = w.size() / nb;
  std::vector<S> slice(na);
  S mass(0);
  for (std::size_t a = 0; a < na; ++a) {
    slice[a] = w[a * nb + b];
    mass += slice[a];
  }
  std::vector<FiniteSpace> rest(j.factors().begin(), j.factors().end() - 1);
  if (mass == S(0)) {
    std::vector<std::size_t> keep(rest.size());
    std::iota(keep.begin(), keep.end(), 0);
    return marginalize(j, keep);
  }
  for (auto& v : slice) v /= mass;
  return JointDist<S>(detail::Trusted{}, std::move(rest), std::move(slice));
}

/// Predictive at T_m: the batch posterior pushed through the sampling operator at T_m.
template <ProbabilityScalar S>
Dist<S> posterior_predictive_batch(const SupervisedModel<S>& model, const TrainingSample& train,
                                   const TestInputs& test) {
  return pushforward(sampling_operator(model, test), batch_invert(model, train));
}

/// Predictive by building the joint over Y^{m+n} from the prior once, then conditioning
/// on y_n, y_{n-1}, ..., y_1 in turn.
template <ProbabilityScalar S>
Dist<S> posterior_predictive_recursive(const SupervisedModel<S>& model, const TrainingSample& train,
                                       const TestInputs& test) {
  if (test.points.empty()) throw ShapeError("posterior_predictive_recursive: no test inputs");
  const std::size_t m = test.points.size(), n = train.size();
  auto xs = detail::concat(test.points, train.inputs());
  auto p = sampling_operator(model, std::span<const std::string>(xs));
  auto prior_joint = pushforward(p, model.prior());
  JointDist<S> joint(detail::Trusted{}, std::vector<FiniteSpace>(m + n, model.labels()),
                     std::vector<S>(prior_joint.weights().begin(), prior_joint.weights().end()));
  for (std::size_t i = n; i-- > 0;) joint = condition_last(joint, model.labels().index_of(train.pairs[i].second));
  return Dist<S>(detail::Trusted{}, detail::label_power(model, m),
                 std::vector<S>(joint.weights().begin(), joint.weights().end()));
}

/// Keeps only the inputs in `keep` (listed in the model's input order).
template <ProbabilityScalar S>
SupervisedModel<S> restrict_model(const SupervisedModel<S>& model, const std::vector<std::string>& keep) {
  if (keep.empty()) throw ShapeError("restrict_model: empty input subset");
  std::set<std::size_t> idx;
  for (const auto& x : keep) idx.insert(model.inputs().index_of(x));
  std::vector<std::string> labels;
  for (auto i : idx) labels.push_back(model.inputs().label(i));
  std::vector<Dist<S>> table;
  for (std::size_t t = 0; t < model.theta().size(); ++t)
    for (auto x : idx) {
      auto r = model.sampling_row(t, x);
      table.emplace_back(detail::Trusted{}, model.labels(), std::vector<S>(r.begin(), r.end()));
    }
  return SupervisedModel<S>(model.theta(), model.prior(), FiniteSpace(std::move(labels)), model.labels(),
                            std::move(table));
}

/// Finite stand-in for the universal model: theta ranges over every tuple (one per input)
/// of label distributions whose weights are multiples of 1/resolution; uniform prior;
/// sampling is the identity (theta evaluated at x).
template <ProbabilityScalar S>
SupervisedModel<S> universal_grid_model(const FiniteSpace& inputs, const FiniteSpace& labels, int resolution) {
  if (resolution < 1) throw ShapeError("universal_grid_model: resolution must be >= 1");
  // all compositions of `resolution` into |labels| nonnegative parts
  std::vector<std::vector<int>> simplex;
  std::vector<int> cur(labels.size(), 0);
  auto rec = [&](auto& self, std::size_t pos, int left) -> void {
    if (pos + 1 == cur.size()) {
      cur[pos] = left;
      simplex.push_back(cur);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      cur[pos] = c;
      self(self, pos + 1, left - c);
    }
  };
  rec(rec, 0, resolution);

  const std::size_t nx = inputs.size(), ns = simplex.size();
  std::size_t ntheta = 1;
  for (std::size_t i = 0; i < nx; ++i) ntheta *= ns;

  auto point_label = [&](const std::vector<int>& pt) {
    std::string s = "[";
    for (std::size_t k = 0; k < pt.size(); ++k) {
      if (k) s += ' ';
      s += std::to_string(pt[k]) + "/" + std::to_string(resolution);
    }
    return s + "]";
  };

  std::vector<std::string> theta_labels;
  std::vector<Dist<S>> table;
  theta_labels.reserve(ntheta);
  table.reserve(ntheta * nx);
  std::vector<std::size_t> digits(nx, 0);
  for (std::size_t t = 0; t < ntheta; ++t) {
    std::size_t rem = t;
    for (std::size_t x = nx; x-- > 0;) {
      digits[x] = rem % ns;
      rem /= ns;
    }
    std::string lbl;
    for (std::size_t x = 0; x < nx; ++x) {
      if (x) lbl += ';';
      lbl += inputs.label(x) + ":" + point_label(simplex[digits[x]]);
      std::vector<S> w;
      for (int c : simplex[digits[x]]) w.push_back(from_ratio<S>(c, resolution));
      table.emplace_back(detail::Trusted{}, labels, std::move(w));
    }
    theta_labels.push_back(std::move(lbl));
  }
  FiniteSpace theta(std::move(theta_labels));
  auto prior = Dist<S>::uniform(theta);
  return SupervisedModel<S>(std::move(theta), std::move(prior), inputs, labels, std::move(table));
}

}  // namespace seqbayes
