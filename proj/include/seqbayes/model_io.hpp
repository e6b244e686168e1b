#pragma once

// Model documents:
//   {"kind": "model", "scalar": ..., "theta": space, "prior": [w...],
//    "inputs": space, "labels": space, "sampling": [[row per input] per theta]}

#include "seqbayes/measure_io.hpp"
#include "seqbayes/model.hpp"

namespace seqbayes::io {

template <ProbabilityScalar S>
json to_json(const SupervisedModel<S>& m) {
  json sampling = json::array();
  for (std::size_t t = 0; t < m.theta().size(); ++t) {
    json per_input = json::array();
    for (std::size_t x = 0; x < m.inputs().size(); ++x) per_input.push_back(weights_to_json<S>(m.sampling_row(t, x)));
    sampling.push_back(std::move(per_input));
  }
  return json{{"kind", "model"},
              {"scalar", ScalarTraits<S>::name},
              {"theta", space_to_json(m.theta())},
              {"prior", weights_to_json<S>(m.prior().weights())},
              {"inputs", space_to_json(m.inputs())},
              {"labels", space_to_json(m.labels())},
              {"sampling", sampling}};
}

template <ProbabilityScalar S>
SupervisedModel<S> model_from_json(const json& j) {
  expect_kind<S>(j, "model");
  for (const char* key : {"theta", "prior", "inputs", "labels", "sampling"})
    if (!j.contains(key)) throw FormatError(std::string("model document is missing '") + key + "'");
  auto theta = space_from_json(j.at("theta"));
  auto inputs = space_from_json(j.at("inputs"));
  auto labels = space_from_json(j.at("labels"));
  Dist<S> prior(theta, weights_from_json<S>(j.at("prior")));
  const auto& sampling = j.at("sampling");
  if (!sampling.is_array() || sampling.size() != theta.size())
    throw FormatError("model.sampling needs one entry per theta");
  std::vector<Dist<S>> table;
  for (const auto& per_input : sampling) {
    if (!per_input.is_array() || per_input.size() != inputs.size())
      throw FormatError("model.sampling rows need one distribution per input");
    for (const auto& row : per_input) table.emplace_back(labels, weights_from_json<S>(row));
  }
  return SupervisedModel<S>(std::move(theta), std::move(prior), std::move(inputs), std::move(labels),
                            std::move(table));
}

}  // namespace seqbayes::io
