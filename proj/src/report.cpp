#include "seqbayes/report.hpp"

#include "seqbayes/rng.hpp"
#include "seqbayes/scalar.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace seqbayes::cli {

std::string platform_string() {
  std::string os =
#if defined(__linux__)
      "linux";
#elif defined(__APPLE__)
      "darwin";
#elif defined(_WIN32)
      "windows";
#else
      "unknown-os";
#endif
  std::string arch =
#if defined(__x86_64__) || defined(_M_X64)
      "x86_64";
#elif defined(__aarch64__)
      "aarch64";
#else
      "unknown-arch";
#endif
  std::string compiler =
#if defined(__clang__)
      "clang-" + std::to_string(__clang_major__) + "." + std::to_string(__clang_minor__);
#elif defined(__GNUC__)
      "gcc-" + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#else
      "unknown-compiler";
#endif
  return os + "-" + arch + "/" + compiler;
}

void RunReport::add_check(std::string name, bool ok, double value, double tol, std::string detail) {
  checks.push_back({std::move(name), ok, value, tol, std::move(detail)});
}

void RunReport::add_timing_check(std::string name, bool ok, double value, double tol, std::string detail) {
  timing_checks.push_back({std::move(name), ok, value, tol, std::move(detail)});
}

bool RunReport::checks_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

bool RunReport::passed() const {
  if (!checks_passed()) return false;
  for (const auto& c : timing_checks)
    if (!c.passed) return false;
  return true;
}

namespace {

json checks_json(const std::vector<Check>& checks) {
  json cs = json::array();
  for (const auto& c : checks) {
    json e{{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance}};
    if (!c.detail.empty()) e["detail"] = c.detail;
    cs.push_back(std::move(e));
  }
  return cs;
}

}  // namespace

json RunReport::to_json() const {
  json j{{"tool", "seqbayes"},
         {"version", kVersion},
         {"platform", platform_string()},
         {"rng", std::string(kRngName)},
         {"command", command},
         {"config", config},
         {"checks", checks_json(checks)},
         {"checks_passed", checks_passed()},
         {"metrics", metrics},
         {"outputs", outputs}};
  j["seed"] = seed ? json(*seed) : json(nullptr);
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

void RunReport::write(const std::string& dir) {
  {
    std::ofstream out(output_path(dir, "report.json"));
    if (!out) throw std::runtime_error("cannot write report.json in '" + dir + "'");
    out << to_json().dump(2) << '\n';
  }
  std::ofstream out(output_path(dir, "timing.json"));
  if (!out) throw std::runtime_error("cannot write timing.json in '" + dir + "'");
  out << json{{"command", command}, {"timing", timing}, {"timing_checks", checks_json(timing_checks)}}.dump(2)
      << '\n';
}

// ---------------------------------------------------------------------------

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  if (header.empty()) throw std::invalid_argument("CSV header must not be empty");
  for (const auto& h : header) cell(h);
  end_row();
  rows_ = 0;
}

CsvWriter& CsvWriter::cell(const std::string& v) {
  if (pending_ == width_) throw std::logic_error("CSV row has more cells than the header");
  if (pending_ > 0) text_ += ',';
  text_ += csv_escape(v);
  ++pending_;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }

void CsvWriter::end_row() {
  if (pending_ != width_) throw std::logic_error("CSV row has fewer cells than the header");
  text_ += "\r\n";
  pending_ = 0;
  ++rows_;
}

std::string CsvWriter::str() const { return text_; }

void CsvWriter::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text_;
}

std::string output_path(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir.empty() ? "." : dir);
  return (std::filesystem::path(dir.empty() ? "." : dir) / name).string();
}

}  // namespace seqbayes::cli
