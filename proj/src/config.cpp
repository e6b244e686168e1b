#include "seqbayes/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace seqbayes::cli {

namespace {

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string type_name(const json& j) { return j.type_name(); }

}  // namespace

json ExperimentConfig::to_json() const {
  json j{{"family", family}, {"operation", operation}, {"output", output}, {"params", params}};
  if (seed) j["seed"] = *seed;
  if (tolerance) j["tolerance"] = *tolerance;
  return j;
}

std::uint64_t ExperimentConfig::require_seed() const {
  if (!seed) throw ConfigValidationError("seed: required for the stochastic operation '" + family + "/" + operation + "'");
  return *seed;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte);
    throw ConfigParseError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
  return config_from_json(doc, source);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

ExperimentConfig config_from_json(const json& doc, const std::string& source) {
  if (!doc.is_object()) throw ConfigParseError(source + ": config must be a JSON object");
  try {
    Fields f(doc, "");
    ExperimentConfig c;
    c.family = f.str("family");
    c.operation = f.str("operation");
    if (f.has("seed")) {
      const json& s = f.raw("seed");
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
        throw ConfigParseError("seed: expected a nonnegative integer");
      c.seed = s.get<std::uint64_t>();
    }
    c.output = f.str("output", ".");
    if (f.has("tolerance")) c.tolerance = f.num("tolerance");
    if (f.has("params")) {
      const json& p = f.raw("params");
      if (!p.is_object()) throw ConfigParseError("params: expected an object, got " + type_name(p));
      c.params = p;
    }
    f.finish();
    const std::set<std::string> families{"finite", "gp", "dp", "ddp"};
    if (!families.count(c.family))
      throw ConfigValidationError("family: unknown family '" + c.family + "' (expected finite, gp, dp or ddp)");
    if (c.tolerance) require(*c.tolerance >= 0.0 && std::isfinite(*c.tolerance), "tolerance", "must be >= 0");
    return c;
  } catch (const ConfigParseError& e) {
    throw ConfigParseError(source + ": " + e.what());
  } catch (const ConfigValidationError& e) {
    throw ConfigValidationError(source + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

Fields::Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
  if (!obj_.is_object())
    throw ConfigParseError((path_.empty() ? std::string("config") : path_) + ": expected an object, got " +
                           type_name(obj_));
}

const json& Fields::empty_object() {
  static const json e = json::object();
  return e;
}

bool Fields::has(const std::string& key) const { return obj_.contains(key); }

const json* Fields::find(const std::string& key, bool required) {
  auto it = obj_.find(key);
  if (it == obj_.end()) {
    if (required) throw ConfigParseError(path_of(key) + ": missing required field");
    return nullptr;
  }
  used_.insert(key);
  return &*it;
}

const json& Fields::raw(const std::string& key) { return *find(key, true); }

std::string Fields::str(const std::string& key, const std::optional<std::string>& fallback) {
  const json* j = find(key, !fallback);
  if (!j) return *fallback;
  if (!j->is_string()) throw ConfigParseError(path_of(key) + ": expected a string, got " + type_name(*j));
  return j->get<std::string>();
}

double Fields::num(const std::string& key, const std::optional<double>& fallback) {
  const json* j = find(key, !fallback);
  if (!j) return *fallback;
  if (!j->is_number()) throw ConfigParseError(path_of(key) + ": expected a number, got " + type_name(*j));
  return j->get<double>();
}

std::int64_t Fields::integer(const std::string& key, const std::optional<std::int64_t>& fallback) {
  const json* j = find(key, !fallback);
  if (!j) return *fallback;
  if (!j->is_number_integer()) throw ConfigParseError(path_of(key) + ": expected an integer, got " + type_name(*j));
  return j->get<std::int64_t>();
}

std::size_t Fields::count(const std::string& key, const std::optional<std::size_t>& fallback) {
  auto v = integer(key, fallback ? std::optional<std::int64_t>(static_cast<std::int64_t>(*fallback)) : std::nullopt);
  require(v >= 0, path_of(key), "must be >= 0");
  return static_cast<std::size_t>(v);
}

bool Fields::flag(const std::string& key, const std::optional<bool>& fallback) {
  const json* j = find(key, !fallback);
  if (!j) return *fallback;
  if (!j->is_boolean()) throw ConfigParseError(path_of(key) + ": expected a boolean, got " + type_name(*j));
  return j->get<bool>();
}

std::vector<double> Fields::nums(const std::string& key, const std::optional<std::vector<double>>& fallback) {
  const json* j = find(key, !fallback);
  if (!j) return *fallback;
  if (!j->is_array()) throw ConfigParseError(path_of(key) + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j->size(); ++i) {
    if (!(*j)[i].is_number())
      throw ConfigParseError(path_of(key) + "[" + std::to_string(i) + "]: expected a number, got " +
                             type_name((*j)[i]));
    out.push_back((*j)[i].get<double>());
  }
  return out;
}

std::vector<std::string> Fields::strs(const std::string& key, const std::optional<std::vector<std::string>>& fallback) {
  const json* j = find(key, !fallback);
  if (!j) return *fallback;
  if (!j->is_array()) throw ConfigParseError(path_of(key) + ": expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j->size(); ++i) {
    if (!(*j)[i].is_string())
      throw ConfigParseError(path_of(key) + "[" + std::to_string(i) + "]: expected a string, got " +
                             type_name((*j)[i]));
    out.push_back((*j)[i].get<std::string>());
  }
  return out;
}

Fields Fields::object(const std::string& key) { return Fields(*find(key, true), path_of(key)); }

Fields Fields::object_or_empty(const std::string& key) {
  const json* j = find(key, false);
  return Fields(j ? *j : empty_object(), path_of(key));
}

void Fields::finish() const {
  for (auto it = obj_.begin(); it != obj_.end(); ++it)
    if (!used_.count(it.key())) throw ConfigParseError(path_of(it.key()) + ": unknown key");
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigValidationError(field + ": " + message);
}

}  // namespace seqbayes::cli
