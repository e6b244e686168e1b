#pragma once

// Run reports and CSV output.
//
// A run writes report.json (deterministic for a fixed config and seed) and
// timing.json (wall-clock figures) into its output directory, next to its
// data files.

#include <json.hpp>

#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace seqbayes::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

std::string platform_string();

struct Check {
  std::string name;
  bool passed;
  double value;      // observed deviation or statistic
  double tolerance;  // pass threshold on value
  std::string detail;
};

struct RunReport {
  std::string command;
  json config = json::object();
  std::optional<std::uint64_t> seed;
  std::vector<Check> checks;
  std::vector<Check> timing_checks;  // depend on wall-clock measurements; kept out of report.json
  json metrics = json::object();
  json timing = json::object();
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;

  void add_check(std::string name, bool passed, double value, double tolerance, std::string detail = {});
  void add_timing_check(std::string name, bool passed, double value, double tolerance, std::string detail = {});
  bool checks_passed() const;
  bool passed() const;   // checks and timing checks
  json to_json() const;  // without timing
  /// Writes report.json and timing.json into `dir`.
  void write(const std::string& dir);
};

/// RFC 4180 CSV with a mandatory header; doubles use 17 significant digits.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& cell(const std::string& v);
  CsvWriter& cell(double v);
  template <std::integral T>
    requires(!std::same_as<T, bool>)
  CsvWriter& cell(T v) {
    return cell(std::to_string(v));
  }
  CsvWriter& cell(const char* v) { return cell(std::string(v)); }
  CsvWriter& cell(bool v) { return cell(std::string(v ? "true" : "false")); }
  void end_row();

  std::string str() const;
  void save(const std::string& path) const;
  std::size_t rows() const { return rows_; }

 private:
  std::size_t width_;
  std::size_t pending_ = 0;
  std::size_t rows_ = 0;
  std::string text_;
};

std::string csv_escape(const std::string& field);

/// Creates `dir` (and parents) if needed; returns dir + "/" + name.
std::string output_path(const std::string& dir, const std::string& name);

}  // namespace seqbayes::cli
