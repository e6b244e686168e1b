#pragma once

#include "seqbayes/measure.hpp"

#include <string>
#include <utility>
#include <vector>

namespace seqbayes {

/// Finite supervised Bayesian model: parameter space with a prior, and for every
/// parameter and input a distribution over labels.
template <ProbabilityScalar S>
class SupervisedModel {
 public:
  /// `sampling` is theta-major: entry (t, x) at index t * |inputs| + x.
  SupervisedModel(FiniteSpace theta, Dist<S> prior, FiniteSpace inputs, FiniteSpace labels,
                  std::vector<Dist<S>> sampling)
      : theta_(std::move(theta)), prior_(std::move(prior)), inputs_(std::move(inputs)), labels_(std::move(labels)) {
    if (!(prior_.space() == theta_)) throw ShapeError("model prior is not a distribution on theta");
    if (sampling.size() != theta_.size() * inputs_.size())
      throw ShapeError("model needs one label distribution per (theta, input)");
    table_.reserve(sampling.size() * labels_.size());
    for (const auto& d : sampling) {
      if (!(d.space() == labels_)) throw ShapeError("sampling distribution is not on the label space");
      table_.insert(table_.end(), d.weights().begin(), d.weights().end());
    }
  }

  const FiniteSpace& theta() const { return theta_; }
  const Dist<S>& prior() const { return prior_; }
  const FiniteSpace& inputs() const { return inputs_; }
  const FiniteSpace& labels() const { return labels_; }

  std::span<const S> sampling_row(std::size_t t, std::size_t x) const {
    return std::span<const S>(table_).subspan((t * inputs_.size() + x) * labels_.size(), labels_.size());
  }

  /// The kernel theta -> P(labels) obtained by evaluating the model at one input.
  FiniteKernel<S> evaluated(std::size_t x) const {
    if (x >= inputs_.size()) throw UnknownLabel("input index out of range");
    std::vector<S> rows;
    rows.reserve(theta_.size() * labels_.size());
    for (std::size_t t = 0; t < theta_.size(); ++t) {
      auto r = sampling_row(t, x);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    return FiniteKernel<S>(detail::Trusted{}, theta_, labels_, std::move(rows));
  }

  std::vector<Dist<S>> sampling_table() const {
    std::vector<Dist<S>> out;
    for (std::size_t t = 0; t < theta_.size(); ++t)
      for (std::size_t x = 0; x < inputs_.size(); ++x) {
        auto r = sampling_row(t, x);
        out.emplace_back(detail::Trusted{}, labels_, std::vector<S>(r.begin(), r.end()));
      }
    return out;
  }

 private:
  FiniteSpace theta_;
  Dist<S> prior_;
  FiniteSpace inputs_;
  FiniteSpace labels_;
  std::vector<S> table_;
};

/// Ordered (input label, output label) pairs.
struct TrainingSample {
  std::vector<std::pair<std::string, std::string>> pairs;

  std::size_t size() const { return pairs.size(); }
  std::vector<std::string> inputs() const {
    std::vector<std::string> out;
    for (const auto& p : pairs) out.push_back(p.first);
    return out;
  }
};

/// Ordered test inputs; repetitions allowed.
struct TestInputs {
  std::vector<std::string> points;
};

/// Joint sampling law of labels at the given inputs: row(t) = (x)_i sampling(t)(x_i).
template <ProbabilityScalar S>
FiniteKernel<S> sampling_operator(const SupervisedModel<S>& model, std::span<const std::string> inputs) {
  if (inputs.empty()) throw ShapeError("sampling_operator: no inputs");
  std::vector<FiniteKernel<S>> ks;
  ks.reserve(inputs.size());
  for (const auto& x : inputs) ks.push_back(model.evaluated(model.inputs().index_of(x)));
  return product_kernel<S>(std::span<const FiniteKernel<S>>(ks));
}

template <ProbabilityScalar S>
FiniteKernel<S> sampling_operator(const SupervisedModel<S>& model, const TestInputs& t) {
  return sampling_operator(model, std::span<const std::string>(t.points));
}

}  // namespace seqbayes
