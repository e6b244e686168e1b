#pragma once

// JSON documents for finite spaces, distributions, kernels and joints.
//
//   space:  {"labels": ["a", "b"]}  or  {"factors": [space, space, ...]}
//   dist:   {"kind": "dist", "scalar": "exact-rational", "space": space, "weights": ["1/3", ...]}
//   kernel: {"kind": "kernel", "scalar": ..., "source": space, "target": space, "rows": [[...], ...]}
//   joint:  {"kind": "joint", "scalar": ..., "factors": [space, ...], "weights": [...]}
//
// Weights are written as strings: "p/q" in rational mode, 17 significant
// digits in float mode. Readers also accept JSON numbers.

#include "seqbayes/measure.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace seqbayes {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

using nlohmann::json;

inline json space_to_json(const FiniteSpace& s) {
  if (s.is_product()) {
    json fs = json::array();
    for (const auto& f : s.factors()) fs.push_back(space_to_json(f));
    return json{{"factors", fs}};
  }
  return json{{"labels", s.labels()}};
}

inline FiniteSpace space_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("space must be an object");
  if (j.contains("labels")) {
    if (!j.at("labels").is_array()) throw FormatError("space.labels must be an array");
    return FiniteSpace(j.at("labels").get<std::vector<std::string>>());
  }
  if (j.contains("factors")) {
    std::vector<FiniteSpace> fs;
    for (const auto& f : j.at("factors")) fs.push_back(space_from_json(f));
    return FiniteSpace::product(std::move(fs));
  }
  throw FormatError("space needs 'labels' or 'factors'");
}

template <ProbabilityScalar S>
json weights_to_json(std::span<const S> w) {
  json arr = json::array();
  for (const auto& v : w) arr.push_back(format_scalar(v));
  return arr;
}

template <ProbabilityScalar S>
std::vector<S> weights_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("weights must be an array");
  std::vector<S> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (v.is_string()) {
      out.push_back(parse_scalar<S>(v.get<std::string>()));
    } else if (v.is_number()) {
      out.push_back(from_double<S>(v.get<double>()));
    } else {
      throw FormatError("weight must be a string or number");
    }
  }
  return out;
}

template <ProbabilityScalar S>
void expect_kind(const json& j, std::string_view kind) {
  if (!j.is_object() || !j.contains("kind") || j.at("kind") != kind)
    throw FormatError("expected a document of kind '" + std::string(kind) + "'");
  if (j.contains("scalar") && j.at("scalar") != ScalarTraits<S>::name) {
    // rational documents may be read as floats, not the other way around
    if (ScalarTraits<S>::exact) throw FormatError("float document cannot be read in exact-rational mode");
  }
}

template <ProbabilityScalar S>
json to_json(const Dist<S>& d) {
  return json{{"kind", "dist"},
              {"scalar", ScalarTraits<S>::name},
              {"space", space_to_json(d.space())},
              {"weights", weights_to_json<S>(d.weights())}};
}

template <ProbabilityScalar S>
Dist<S> dist_from_json(const json& j) {
  expect_kind<S>(j, "dist");
  return Dist<S>(space_from_json(j.at("space")), weights_from_json<S>(j.at("weights")));
}

template <ProbabilityScalar S>
json to_json(const FiniteKernel<S>& k) {
  json rows = json::array();
  for (std::size_t i = 0; i < k.source().size(); ++i) rows.push_back(weights_to_json<S>(k.row(i)));
  return json{{"kind", "kernel"},
              {"scalar", ScalarTraits<S>::name},
              {"source", space_to_json(k.source())},
              {"target", space_to_json(k.target())},
              {"rows", rows}};
}

template <ProbabilityScalar S>
FiniteKernel<S> kernel_from_json(const json& j) {
  expect_kind<S>(j, "kernel");
  std::vector<S> flat;
  for (const auto& r : j.at("rows")) {
    auto w = weights_from_json<S>(r);
    flat.insert(flat.end(), w.begin(), w.end());
  }
  return FiniteKernel<S>(space_from_json(j.at("source")), space_from_json(j.at("target")), std::move(flat));
}

template <ProbabilityScalar S>
json to_json(const JointDist<S>& d) {
  json fs = json::array();
  for (const auto& f : d.factors()) fs.push_back(space_to_json(f));
  return json{{"kind", "joint"},
              {"scalar", ScalarTraits<S>::name},
              {"factors", fs},
              {"weights", weights_to_json<S>(d.weights())}};
}

template <ProbabilityScalar S>
JointDist<S> joint_from_json(const json& j) {
  expect_kind<S>(j, "joint");
  std::vector<FiniteSpace> fs;
  for (const auto& f : j.at("factors")) fs.push_back(space_from_json(f));
  return JointDist<S>(std::move(fs), weights_from_json<S>(j.at("weights")));
}

/// Parses a JSON file, reporting the line and column of syntax errors.
inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw FormatError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace io
}  // namespace seqbayes
