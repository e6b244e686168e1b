#pragma once

// Experiment configuration documents (JSON).
//
//   {
//     "family": "finite" | "gp" | "dp" | "ddp",
//     "operation": "...",
//     "seed": 42,                 required by stochastic operations
//     "output": "out/dir",        optional, default "."
//     "tolerance": 1e-8,          optional override of the operation's default
//     "params": { ... }           operation-specific, unknown keys rejected
//   }
//
// Syntax errors, unknown keys and wrongly typed fields are parse errors
// (exit 2); well-formed documents with unusable values are validation
// errors (exit 3).

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqbayes::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitValidation = 3;

class ConfigParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string family;
  std::string operation;
  std::optional<std::uint64_t> seed;
  std::string output = ".";
  std::optional<double> tolerance;
  json params = json::object();

  json to_json() const;
  std::uint64_t require_seed() const;
  double tolerance_or(double fallback) const { return tolerance.value_or(fallback); }
};

/// Parses and structurally checks a config document; `source` names it in diagnostics.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const json& doc, const std::string& source = "<config>");

/// Strict reader over one JSON object: every key must be consumed or finish() throws.
class Fields {
 public:
  Fields(const json& obj, std::string path);

  bool has(const std::string& key) const;
  const json& raw(const std::string& key);

  std::string str(const std::string& key, const std::optional<std::string>& fallback = std::nullopt);
  double num(const std::string& key, const std::optional<double>& fallback = std::nullopt);
  std::int64_t integer(const std::string& key, const std::optional<std::int64_t>& fallback = std::nullopt);
  std::size_t count(const std::string& key, const std::optional<std::size_t>& fallback = std::nullopt);
  bool flag(const std::string& key, const std::optional<bool>& fallback = std::nullopt);
  std::vector<double> nums(const std::string& key, const std::optional<std::vector<double>>& fallback = std::nullopt);
  std::vector<std::string> strs(const std::string& key,
                                const std::optional<std::vector<std::string>>& fallback = std::nullopt);
  Fields object(const std::string& key);
  /// Empty object when absent.
  Fields object_or_empty(const std::string& key);

  std::string path_of(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& path() const { return path_; }
  void finish() const;

 private:
  const json* find(const std::string& key, bool required);

  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
  static const json& empty_object();
};

/// Throws ConfigValidationError unless `ok`.
void require(bool ok, const std::string& field, const std::string& message);

}  // namespace seqbayes::cli
