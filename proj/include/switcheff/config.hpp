#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "switcheff/dataset.hpp"
#include "switcheff/errors.hpp"

namespace switcheff {

namespace detail {

inline std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
}

inline nlohmann::json toml_scalar(const std::string& tok, int line_no) {
  if (tok.size() >= 2 && ((tok.front() == '"' && tok.back() == '"') ||
                          (tok.front() == '\'' && tok.back() == '\''))) {
    return tok.substr(1, tok.size() - 2);
  }
  if (tok == "true") return true;
  if (tok == "false") return false;
  try {
    std::size_t used = 0;
    if (tok.find_first_of(".eE") == std::string::npos) {
      const long long v = std::stoll(tok, &used);
      if (used == tok.size()) return v;
    } else {
      const double v = std::stod(tok, &used);
      if (used == tok.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("config line " + std::to_string(line_no) + ": cannot parse value '" + tok + "'");
}

inline std::vector<std::string> split_toml_array(const std::string& body, int line_no) {
  std::vector<std::string> items;
  std::string cur;
  char quote = 0;
  for (char c : body) {
    if (quote != 0) {
      cur += c;
      if (c == quote) quote = 0;
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
      cur += c;
    } else if (c == ',') {
      items.push_back(trim_copy(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string last = trim_copy(cur);
  if (!last.empty()) items.push_back(last);
  if (quote != 0) throw ConfigError("config line " + std::to_string(line_no) + ": unterminated string");
  return items;
}

}  // namespace detail

// Flat TOML subset: `key = value` lines with string/number/boolean scalars,
// single-line arrays, and # comments. Covers the schema, grid, and run
// configs this tool defines; no nested tables.
inline nlohmann::json parse_flat_toml(std::istream& in) {
  nlohmann::json obj = nlohmann::json::object();
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    // strip comments outside quotes
    std::string line;
    char quote = 0;
    for (char c : raw) {
      if (quote != 0) {
        line += c;
        if (c == quote) quote = 0;
        continue;
      }
      if (c == '#') break;
      if (c == '"' || c == '\'') quote = c;
      line += c;
    }
    line = detail::trim_copy(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim_copy(line.substr(0, eq));
    const std::string val = detail::trim_copy(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": arrays must be single-line");
      }
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& item : detail::split_toml_array(val.substr(1, val.size() - 2), line_no)) {
        arr.push_back(detail::toml_scalar(item, line_no));
      }
      obj[key] = arr;
    } else {
      obj[key] = detail::toml_scalar(val, line_no);
    }
  }
  return obj;
}

// Structured config file: .json parsed as JSON, .toml as the flat subset.
inline nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  const auto dot = path.rfind('.');
  const std::string ext = (dot == std::string::npos) ? "" : path.substr(dot);
  if (ext == ".json") {
    try {
      nlohmann::json j;
      in >> j;
      if (!j.is_object()) throw ConfigError("'" + path + "': top-level JSON must be an object");
      return j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("'" + path + "': " + e.what());
    }
  }
  if (ext == ".toml") return parse_flat_toml(in);
  throw ConfigError("'" + path + "': config files must end in .json or .toml");
}

inline ColumnSchema schema_from_config(const nlohmann::json& j, const std::string& path) {
  ColumnSchema s;
  const auto str = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string()) {
      throw ConfigError("'" + path + "': schema needs a string key '" + std::string(key) + "'");
    }
    return j[key].get<std::string>();
  };
  s.id_col = str("id_col");
  s.trial_col = str("trial_col");
  s.arm_col = str("arm_col");
  s.switch_col = str("switch_col");
  s.outcome_col = str("outcome_col");
  if (!j.contains("covariate_cols") || !j["covariate_cols"].is_array() ||
      j["covariate_cols"].empty()) {
    throw ConfigError("'" + path + "': schema needs a non-empty array 'covariate_cols'");
  }
  for (const auto& c : j["covariate_cols"]) {
    if (!c.is_string()) throw ConfigError("'" + path + "': covariate_cols must hold strings");
    s.covariate_cols.push_back(c.get<std::string>());
  }
  return s;
}

inline ColumnSchema load_schema(const std::string& path) {
  return schema_from_config(load_config_file(path), path);
}

// Sensitivity grid: the cross product of the outcome-model and
// selection-model spec lists.
struct SpecGrid {
  std::vector<std::string> m_specs;
  std::vector<std::string> sel_specs;
};

inline SpecGrid load_grid(const std::string& path) {
  const nlohmann::json j = load_config_file(path);
  SpecGrid g;
  const auto list = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].empty()) {
      throw ConfigError("'" + path + "': grid needs a non-empty array '" + std::string(key) + "'");
    }
    std::vector<std::string> out;
    for (const auto& v : j[key]) {
      if (!v.is_string()) throw ConfigError("'" + path + "': grid entries must be strings");
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  g.m_specs = list("m_specs");
  g.sel_specs = list("sel_specs");
  return g;
}

}  // namespace switcheff
