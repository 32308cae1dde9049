#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "switcheff/inference.hpp"
#include "switcheff/simulation.hpp"
#include "switcheff/switcher_effect.hpp"

namespace switcheff {

using json = nlohmann::json;

namespace detail {

inline std::string csv_double(double v) { return format_double(v); }

template <class T>
std::string csv_opt(const std::optional<T>& v) {
  return v ? csv_double(static_cast<double>(*v)) : std::string();
}

}  // namespace detail

inline json to_json(const EstimateReport& r) {
  json j;
  j["estimator_kind"] = std::string(kind_name(r.kind));
  j["theta"] = r.theta;
  j["theta1"] = r.theta1;
  j["theta2"] = r.theta2;
  j["pi_S"] = r.pi_S;
  if (r.se) {
    j["se"] = *r.se;
    j["ci_low"] = *r.ci_low;
    j["ci_high"] = *r.ci_high;
    j["p_value"] = *r.p_value;
  }
  if (r.weight_p5) {
    j["weight_p5"] = *r.weight_p5;
    j["weight_p95"] = *r.weight_p95;
    j["n_weights_above_cap"] = r.n_weights_above_cap;
    j["weight_cap"] = r.weight_cap;
  }
  j["n_flexible_arm"] = r.n_flexible_arm;
  j["n_fixed_low_arm"] = r.n_fixed_low_arm;
  j["n_switchers"] = r.n_switchers;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline std::string estimate_report_csv_header() {
  return "estimator_kind,theta,theta1,theta2,pi_S,se,ci_low,ci_high,p_value,"
         "weight_p5,weight_p95,n_weights_above_cap,n_flexible_arm,n_fixed_low_arm,"
         "n_switchers,note";
}

inline std::string estimate_report_csv_row(const EstimateReport& r) {
  std::ostringstream out;
  out << kind_name(r.kind) << ',' << detail::csv_double(r.theta) << ','
      << detail::csv_double(r.theta1) << ',' << detail::csv_double(r.theta2) << ','
      << detail::csv_double(r.pi_S) << ',' << detail::csv_opt(r.se) << ','
      << detail::csv_opt(r.ci_low) << ',' << detail::csv_opt(r.ci_high) << ','
      << detail::csv_opt(r.p_value) << ',' << detail::csv_opt(r.weight_p5) << ','
      << detail::csv_opt(r.weight_p95) << ','
      << (r.weight_p5 ? std::to_string(r.n_weights_above_cap) : std::string()) << ','
      << r.n_flexible_arm << ',' << r.n_fixed_low_arm << ',' << r.n_switchers << ',' << r.note;
  return out.str();
}

inline json to_json(const SimulationResult& r) {
  json j;
  j["true_effect"] = r.true_effect;
  j["replicates_total"] = r.replicates_total;
  j["replicates_failed"] = r.replicates_failed;
  if (r.weight_p5_median) {
    j["weight_p5_median"] = *r.weight_p5_median;
    j["weight_p95_median"] = *r.weight_p95_median;
  }
  json kinds = json::array();
  for (const auto& k : r.kinds) {
    json kj;
    kj["kind"] = std::string(kind_name(k.kind));
    kj["bias"] = k.bias;
    kj["se"] = k.se;
    kj["mse"] = k.mse;
    if (k.se_mean) kj["se_mean"] = *k.se_mean;
    if (k.coverage) kj["ci_coverage"] = *k.coverage;
    kinds.push_back(kj);
  }
  j["estimators"] = kinds;
  return j;
}

// One result row shaped like the simulation-study summary tables: weight
// percentiles, then bias/SE/MSE per estimator column group.
inline std::string simulation_csv_header() {
  return "setting,phi,mu,n_per_arm,misspec,replicates,failed,true_effect,"
         "weight_p5,weight_p95,"
         "dr_bias,dr_se,dr_mse,eff_bias,eff_se,eff_mse,reg_bias,reg_se,reg_mse";
}

inline std::string simulation_csv_row(const std::string& setting_label, const DGPSetting& set,
                                      const std::string& misspec_label,
                                      const SimulationResult& r) {
  std::string dr[3], eff[3], reg[3];
  for (const auto& k : r.kinds) {
    std::string* slot = nullptr;
    switch (k.kind) {
      case EstimatorKind::dr_nonparametric: slot = dr; break;
      case EstimatorKind::efficient_semiparametric: slot = eff; break;
      case EstimatorKind::regression: slot = reg; break;
    }
    slot[0] = detail::csv_double(k.bias);
    slot[1] = detail::csv_double(k.se);
    slot[2] = detail::csv_double(k.mse);
  }
  std::ostringstream out;
  out << setting_label << ',' << detail::csv_double(set.phi) << ',' << detail::csv_double(set.mu)
      << ',' << set.n_per_arm << ',' << misspec_label << ',' << r.replicates_total << ','
      << r.replicates_failed << ',' << detail::csv_double(r.true_effect) << ','
      << detail::csv_opt(r.weight_p5_median) << ',' << detail::csv_opt(r.weight_p95_median);
  for (const auto* grp : {dr, eff, reg}) {
    out << ',' << grp[0] << ',' << grp[1] << ',' << grp[2];
  }
  return out.str();
}

// Per-subject influence dump for diagnostics.
inline void write_influence_csv(const TrialDataset& data, const InfluenceBreakdown& inf,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "id,phi,beta_correction,piS_correction,total\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::Index k = static_cast<Eigen::Index>(i);
    out << data.subjects()[i].id << ',' << detail::csv_double(inf.phi(k)) << ','
        << detail::csv_double(inf.beta_correction(k)) << ','
        << detail::csv_double(inf.piS_correction(k)) << ','
        << detail::csv_double(inf.total(k)) << '\n';
  }
}

}  // namespace switcheff
