#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "switcheff/errors.hpp"

namespace switcheff {

// Randomized treatment codes: placebo, fixed high, fixed low, flexible.
enum class Arm : char {
  placebo = 'p',
  fixed_high = 'h',
  fixed_low = 'l',
  flexible = 'f',
};

inline char arm_code(Arm a) { return static_cast<char>(a); }

inline Arm parse_arm(std::string_view tok) {
  if (tok.size() == 1) {
    switch (tok[0]) {
      case 'p': return Arm::placebo;
      case 'h': return Arm::fixed_high;
      case 'l': return Arm::fixed_low;
      case 'f': return Arm::flexible;
      default: break;
    }
  }
  throw DataError("invalid arm code '" + std::string(tok) + "' (expected one of p/h/l/f)");
}

// One row of the two-trial layout. `switched` is present exactly for
// flexible-arm subjects of the flexible dosing trial.
struct Subject {
  std::string id;
  int trial = 0;  // T: 1 flexible dosing trial, 0 fixed dosing trial
  Arm arm = Arm::placebo;
  std::optional<int> switched;  // S
  double outcome = 0.0;         // Y
  std::vector<double> covariates;
};

namespace detail {

inline void validate_subject(const Subject& s, std::size_t row, std::size_t n_cov) {
  if (s.trial != 0 && s.trial != 1) {
    throw DataError("row " + std::to_string(row) + ": trial indicator must be 0 or 1");
  }
  if (s.trial == 1 && !(s.arm == Arm::placebo || s.arm == Arm::flexible)) {
    throw DataError("row " + std::to_string(row) +
                    ": flexible-trial subjects must be on arm p or f, got '" +
                    std::string(1, arm_code(s.arm)) + "'");
  }
  if (s.trial == 0 && s.arm == Arm::flexible) {
    throw DataError("row " + std::to_string(row) +
                    ": fixed-trial subjects cannot be on the flexible arm (T=0, R=f)");
  }
  const bool needs_switch = (s.trial == 1 && s.arm == Arm::flexible);
  if (needs_switch && !s.switched.has_value()) {
    throw DataError("row " + std::to_string(row) +
                    ": switch indicator S is required for T=1, R=f subjects");
  }
  if (!needs_switch && s.switched.has_value()) {
    throw DataError("row " + std::to_string(row) +
                    ": switch indicator S must be absent unless T=1 and R=f");
  }
  if (s.switched && *s.switched != 0 && *s.switched != 1) {
    throw DataError("row " + std::to_string(row) + ": S must be 0 or 1");
  }
  if (s.covariates.size() != n_cov) {
    throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(n_cov) +
                    " covariates, got " + std::to_string(s.covariates.size()));
  }
}

}  // namespace detail

// Immutable after construction; row order is significant and preserved.
class TrialDataset {
 public:
  TrialDataset() = default;

  TrialDataset(std::vector<Subject> subjects, std::vector<std::string> covariate_names)
      : subjects_(std::move(subjects)), covariate_names_(std::move(covariate_names)) {
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
      detail::validate_subject(subjects_[i], i + 1, covariate_names_.size());
    }
  }

  const std::vector<Subject>& subjects() const { return subjects_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  std::size_t size() const { return subjects_.size(); }

  std::size_t covariate_index(const std::string& name) const {
    for (std::size_t j = 0; j < covariate_names_.size(); ++j) {
      if (covariate_names_[j] == name) return j;
    }
    throw SpecError("unknown covariate '" + name + "'");
  }

  bool has_covariate(const std::string& name) const {
    for (const auto& n : covariate_names_) {
      if (n == name) return true;
    }
    return false;
  }

 private:
  std::vector<Subject> subjects_;
  std::vector<std::string> covariate_names_;
};

// Column mapping for CSV ingestion. Arm column uses literal tokens p/h/l/f,
// the switch column uses empty or "NA" for rows where S is undefined.
struct ColumnSchema {
  std::string id_col = "id";
  std::string trial_col = "T";
  std::string arm_col = "R";
  std::string switch_col = "S";
  std::string outcome_col = "Y";
  std::vector<std::string> covariate_cols;

  static ColumnSchema canonical(std::vector<std::string> covariate_names) {
    ColumnSchema s;
    s.covariate_cols = std::move(covariate_names);
    return s;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& tok : out) {
    const auto b = tok.find_first_not_of(" \t");
    const auto e = tok.find_last_not_of(" \t");
    tok = (b == std::string::npos) ? std::string() : tok.substr(b, e - b + 1);
  }
  return out;
}

// decimal-point notation only, whole token must parse
inline double parse_number(const std::string& tok, const std::string& col, std::size_t row) {
  double value = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || tok.empty()) {
    throw DataError("row " + std::to_string(row) + ", column '" + col +
                    "': cannot parse numeric value '" + tok + "'");
  }
  return value;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Loads and validates a dataset. Row order from the file is preserved.
inline TrialDataset load_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty (header row required)");
  const auto header = detail::split_csv_line(line);

  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < header.size(); ++j) col_of.emplace(header[j], j);
  const auto require = [&](const std::string& name) {
    auto it = col_of.find(name);
    if (it == col_of.end()) throw DataError("'" + path + "': missing column '" + name + "'");
    return it->second;
  };

  const std::size_t c_id = require(schema.id_col);
  const std::size_t c_t = require(schema.trial_col);
  const std::size_t c_r = require(schema.arm_col);
  const std::size_t c_s = require(schema.switch_col);
  const std::size_t c_y = require(schema.outcome_col);
  std::vector<std::size_t> c_cov;
  c_cov.reserve(schema.covariate_cols.size());
  for (const auto& name : schema.covariate_cols) c_cov.push_back(require(name));

  std::vector<Subject> subjects;
  std::unordered_set<std::string> seen_ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto tok = detail::split_csv_line(line);
    if (tok.size() != header.size()) {
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(tok.size()));
    }
    Subject s;
    s.id = tok[c_id];
    if (!seen_ids.insert(s.id).second) {
      throw DataError("row " + std::to_string(row) + ": duplicate subject id '" + s.id + "'");
    }
    const double t = detail::parse_number(tok[c_t], schema.trial_col, row);
    if (t != 0.0 && t != 1.0) {
      throw DataError("row " + std::to_string(row) + ": trial indicator must be 0 or 1");
    }
    s.trial = static_cast<int>(t);
    s.arm = parse_arm(tok[c_r]);
    const std::string& sv = tok[c_s];
    if (!sv.empty() && sv != "NA") {
      const double val = detail::parse_number(sv, schema.switch_col, row);
      if (val != 0.0 && val != 1.0) {
        throw DataError("row " + std::to_string(row) + ": S must be 0, 1, empty, or NA");
      }
      s.switched = static_cast<int>(val);
    }
    s.outcome = detail::parse_number(tok[c_y], schema.outcome_col, row);
    s.covariates.reserve(c_cov.size());
    for (std::size_t k = 0; k < c_cov.size(); ++k) {
      s.covariates.push_back(detail::parse_number(tok[c_cov[k]], schema.covariate_cols[k], row));
    }
    detail::validate_subject(s, row, schema.covariate_cols.size());
    subjects.push_back(std::move(s));
  }

  TrialDataset data(std::move(subjects), schema.covariate_cols);
  bool any_flex = false, any_low = false;
  for (const auto& s : data.subjects()) {
    any_flex |= (s.trial == 1 && s.arm == Arm::flexible);
    any_low |= (s.trial == 0 && s.arm == Arm::fixed_low);
  }
  if (!any_flex) throw DataError("'" + path + "': no subjects with T=1, R=f");
  if (!any_low) throw DataError("'" + path + "': no subjects with T=0, R=l");
  return data;
}

// Writes a dataset loadable by load_csv with the same schema. Doubles are
// emitted with 17 significant digits so the round trip is exact.
inline void write_csv(const TrialDataset& data, const std::string& path,
                      const ColumnSchema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << schema.id_col << ',' << schema.trial_col << ',' << schema.arm_col << ','
      << schema.switch_col << ',' << schema.outcome_col;
  for (const auto& name : schema.covariate_cols) out << ',' << name;
  out << '\n';
  for (const auto& s : data.subjects()) {
    out << s.id << ',' << s.trial << ',' << arm_code(s.arm) << ',';
    if (s.switched) out << *s.switched;
    out << ',' << detail::format_double(s.outcome);
    for (double v : s.covariates) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

inline void write_csv(const TrialDataset& data, const std::string& path) {
  write_csv(data, path, ColumnSchema::canonical(data.covariate_names()));
}

// Keeps subjects satisfying pred(trial, arm, switched), order preserved.
template <class Pred>
TrialDataset subset(const TrialDataset& data, Pred&& pred) {
  std::vector<Subject> kept;
  for (const auto& s : data.subjects()) {
    if (pred(s.trial, s.arm, s.switched)) kept.push_back(s);
  }
  return TrialDataset(std::move(kept), data.covariate_names());
}

}  // namespace switcheff
