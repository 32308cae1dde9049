#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "switcheff/config.hpp"
#include "switcheff/serialize.hpp"
#include "switcheff/version.hpp"

namespace switcheff {

// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical
// failure.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

// Effective run configuration: config-file values first, command-line
// flags win.
struct RunConfig {
  std::string command;

  // estimate / sensitivity
  std::string data_path;
  std::string schema_path;
  std::string h_spec;
  std::string m_spec;
  std::string sel_spec;
  std::string kind = "dr_nonparametric";
  std::string dump_influence_path;
  double weight_cap = 100.0;

  // simulate
  std::string setting = "1";  // 1..5, comma list, "all", or "custom"
  double phi = 0.6;
  double mu = 0.5;
  int n_per_arm = 100;
  int replicates = 1000;
  std::uint64_t seed = 1;
  std::string misspec = "none";
  std::string kinds = "dr_nonparametric,efficient_semiparametric,regression";
  int workers = 0;
  std::optional<double> truth;
  std::uint64_t oracle_draws = 2000000;

  // sensitivity
  std::string grid_path;

  // output
  std::string out_path;
  std::string format;  // "csv", "json", or inferred from the out extension
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline json config_as_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["data"] = c.data_path;
  j["schema"] = c.schema_path;
  j["h_spec"] = c.h_spec;
  j["m_spec"] = c.m_spec;
  j["sel_spec"] = c.sel_spec;
  j["kind"] = c.kind;
  j["dump_influence"] = c.dump_influence_path;
  j["weight_cap"] = c.weight_cap;
  j["setting"] = c.setting;
  j["phi"] = c.phi;
  j["mu"] = c.mu;
  j["n_per_arm"] = c.n_per_arm;
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["misspec"] = c.misspec;
  j["kinds"] = c.kinds;
  j["workers"] = c.workers;
  if (c.truth) j["truth"] = *c.truth;
  j["oracle_draws"] = c.oracle_draws;
  j["grid"] = c.grid_path;
  j["out"] = c.out_path;
  j["format"] = c.format;
  return j;
}

inline std::string config_hash(const RunConfig& c) {
  return hex64(fnv1a64(config_as_json(c).dump()));
}

inline std::string output_format(const RunConfig& c) {
  if (!c.format.empty()) {
    if (c.format != "csv" && c.format != "json") {
      throw ConfigError("format must be 'csv' or 'json', got '" + c.format + "'");
    }
    return c.format;
  }
  if (c.out_path.size() >= 4 && c.out_path.substr(c.out_path.size() - 4) == ".csv") return "csv";
  return "json";
}

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim_copy(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim_copy(cur));
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

inline void apply_config_file(RunConfig& c, const nlohmann::json& j) {
  const auto str = [&](const char* key, std::string& slot) {
    if (j.contains(key)) slot = j.at(key).get<std::string>();
  };
  const auto num = [&](const char* key, auto& slot) {
    using T = std::decay_t<decltype(slot)>;
    if (j.contains(key)) slot = j.at(key).get<T>();
  };
  try {
    str("data", c.data_path);
    str("schema", c.schema_path);
    str("h_spec", c.h_spec);
    str("m_spec", c.m_spec);
    str("sel_spec", c.sel_spec);
    str("kind", c.kind);
    str("dump_influence", c.dump_influence_path);
    num("weight_cap", c.weight_cap);
    str("setting", c.setting);
    num("phi", c.phi);
    num("mu", c.mu);
    num("n_per_arm", c.n_per_arm);
    num("replicates", c.replicates);
    num("seed", c.seed);
    str("misspec", c.misspec);
    str("kinds", c.kinds);
    num("workers", c.workers);
    if (j.contains("truth")) c.truth = j.at("truth").get<double>();
    num("oracle_draws", c.oracle_draws);
    str("grid", c.grid_path);
    str("out", c.out_path);
    str("format", c.format);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

struct MisspecMode {
  bool outcome = false;
  bool selection = false;
  ViolationSpec violation{};
};

inline MisspecMode parse_misspec(const std::string& s) {
  MisspecMode m;
  if (s == "none") return m;
  if (s == "outcome") { m.outcome = true; return m; }
  if (s == "selection") { m.selection = true; return m; }
  if (s == "both") { m.outcome = m.selection = true; return m; }
  if (s == "omit_x7") {
    m.violation.kind = ViolationSpec::Kind::omit_x7;
    return m;
  }
  if (s.rfind("proxy_x11:", 0) == 0) {
    m.violation.kind = ViolationSpec::Kind::proxy_x11;
    try {
      m.violation.correlation = std::stod(s.substr(10));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse proxy_x11 correlation in '" + s + "'");
    }
    return m;
  }
  throw ConfigError("misspec must be none|outcome|selection|both|omit_x7|proxy_x11:<rho>, got '" +
                    s + "'");
}

}  // namespace detail

// --- estimate ---------------------------------------------------------

inline EstimateReport run_estimate(const RunConfig& cfg) {
  if (cfg.data_path.empty()) throw ConfigError("estimate needs --data");
  if (cfg.schema_path.empty()) throw ConfigError("estimate needs --schema");
  if (cfg.h_spec.empty() || cfg.m_spec.empty()) {
    throw ConfigError("estimate needs --h-spec and --m-spec");
  }
  if (cfg.out_path.empty()) throw ConfigError("estimate needs --out");
  const EstimatorKind kind = parse_kind(cfg.kind);
  if (kind != EstimatorKind::regression && cfg.sel_spec.empty()) {
    throw ConfigError(std::string(kind_name(kind)) + " requires --sel-spec");
  }
  if (!cfg.dump_influence_path.empty() && kind != EstimatorKind::dr_nonparametric) {
    throw ConfigError("--dump-influence is only available for dr_nonparametric");
  }

  const ColumnSchema schema = load_schema(cfg.schema_path);
  const TrialDataset data = load_csv(cfg.data_path, schema);
  const ModelSpec h = parse_model_spec(cfg.h_spec, Link::identity);
  const ModelSpec m = parse_model_spec(cfg.m_spec, Link::identity);
  std::optional<ModelSpec> sel;
  if (!cfg.sel_spec.empty()) sel = parse_model_spec(cfg.sel_spec, Link::logit);

  const EstimateReport rep =
      estimate_switcher_effect(data, h, m, sel, kind, cfg.weight_cap);

  if (!cfg.dump_influence_path.empty()) {
    const NuisanceFits fits = fit_nuisances(data, h, m, *sel);
    const InfluenceBreakdown inf = influence_values(data, fits, rep.theta);
    write_influence_csv(data, inf, cfg.dump_influence_path);
  }

  const std::string hash = detail::config_hash(cfg);
  if (detail::output_format(cfg) == "csv") {
    std::ostringstream out;
    out << estimate_report_csv_header() << ",artifact_version,config_hash,seed\n"
        << estimate_report_csv_row(rep) << ',' << kVersion << ',' << hash << ',' << cfg.seed
        << '\n';
    detail::write_text_file(cfg.out_path, out.str());
  } else {
    json j = to_json(rep);
    j["artifact_version"] = std::string(kVersion);
    j["config_hash"] = hash;
    j["seed"] = cfg.seed;
    detail::write_text_file(cfg.out_path, j.dump(2) + "\n");
  }
  return rep;
}

// --- sensitivity ------------------------------------------------------

// Grid of (m_spec, sel_spec) cells with a fixed flexible-arm outcome model;
// failed cells carry an error marker instead of aborting the run.
inline std::string run_sensitivity(const RunConfig& cfg) {
  if (cfg.data_path.empty()) throw ConfigError("sensitivity needs --data");
  if (cfg.schema_path.empty()) throw ConfigError("sensitivity needs --schema");
  if (cfg.h_spec.empty()) throw ConfigError("sensitivity needs --h-spec");
  if (cfg.grid_path.empty()) throw ConfigError("sensitivity needs --grid");
  if (cfg.out_path.empty()) throw ConfigError("sensitivity needs --out");

  const ColumnSchema schema = load_schema(cfg.schema_path);
  const TrialDataset data = load_csv(cfg.data_path, schema);
  const ModelSpec h = parse_model_spec(cfg.h_spec, Link::identity);
  const SpecGrid grid = load_grid(cfg.grid_path);

  std::ostringstream out;
  out << "m_spec,sel_spec,theta,se,ci_low,ci_high,p_value,error,"
         "artifact_version,config_hash,seed\n";
  const std::string hash = detail::config_hash(cfg);
  for (const auto& m_text : grid.m_specs) {
    for (const auto& sel_text : grid.sel_specs) {
      out << m_text << ',' << sel_text << ',';
      try {
        const ModelSpec m = parse_model_spec(m_text, Link::identity);
        const ModelSpec sel = parse_model_spec(sel_text, Link::logit);
        const EstimateReport rep = estimate_switcher_effect(
            data, h, m, sel, EstimatorKind::dr_nonparametric, cfg.weight_cap);
        out << detail::csv_double(rep.theta) << ',' << detail::csv_opt(rep.se) << ','
            << detail::csv_opt(rep.ci_low) << ',' << detail::csv_opt(rep.ci_high) << ','
            << detail::csv_opt(rep.p_value) << ',';
      } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg) {
          if (c == ',' || c == '\n') c = ';';
        }
        out << ",,,,," << "FAILED: " << msg;
      }
      out << ',' << kVersion << ',' << hash << ',' << cfg.seed << '\n';
    }
  }
  const std::string text = out.str();
  detail::write_text_file(cfg.out_path, text);
  return text;
}

// --- simulate ---------------------------------------------------------

inline std::vector<std::pair<std::string, DGPSetting>> settings_from_config(const RunConfig& cfg) {
  std::vector<std::pair<std::string, DGPSetting>> out;
  const detail::MisspecMode mode = detail::parse_misspec(cfg.misspec);
  const auto with_common = [&](DGPSetting s) {
    s.n_per_arm = cfg.n_per_arm;
    s.violation = mode.violation;
    return s;
  };
  if (cfg.setting == "custom") {
    DGPSetting s;
    s.phi = cfg.phi;
    s.mu = cfg.mu;
    out.emplace_back("custom", with_common(s));
    return out;
  }
  const std::vector<std::string> items =
      (cfg.setting == "all") ? std::vector<std::string>{"1", "2", "3", "4", "5"}
                             : detail::split_list(cfg.setting, ',');
  for (const auto& item : items) {
    int idx = 0;
    try {
      idx = std::stoi(item);
    } catch (const std::exception&) {
      throw ConfigError("setting must be 1..5, a comma list, 'all', or 'custom'; got '" + item + "'");
    }
    out.emplace_back(item, with_common(DGPSetting::numbered(idx)));
  }
  return out;
}

inline ScenarioSpec scenario_from_config(const RunConfig& cfg, const DGPSetting& setting) {
  const detail::MisspecMode mode = detail::parse_misspec(cfg.misspec);
  ScenarioSpec sc;
  sc.setting = setting;
  sc.h_spec = parse_model_spec(outcome_regressors(mode.outcome, mode.violation), Link::identity);
  sc.m_spec = sc.h_spec;
  sc.sel_spec = parse_model_spec(selection_regressors(mode.selection, mode.violation), Link::logit);
  sc.kinds.clear();
  for (const auto& k : detail::split_list(cfg.kinds, ',')) {
    if (!k.empty()) sc.kinds.push_back(parse_kind(k));
  }
  if (sc.kinds.empty()) throw ConfigError("no estimator kinds requested");
  sc.replicates = cfg.replicates;
  sc.seed = cfg.seed;
  sc.true_effect = cfg.truth;
  sc.oracle_draws = cfg.oracle_draws;
  sc.workers = cfg.workers;
  sc.weight_cap = cfg.weight_cap;
  return sc;
}

inline std::vector<SimulationResult> run_simulate(const RunConfig& cfg) {
  if (cfg.out_path.empty()) throw ConfigError("simulate needs --out");
  if (cfg.replicates < 1) throw ConfigError("replicates must be at least 1");
  const auto settings = settings_from_config(cfg);

  std::vector<SimulationResult> results;
  results.reserve(settings.size());
  for (const auto& [label, setting] : settings) {
    results.push_back(run_monte_carlo(scenario_from_config(cfg, setting)));
  }

  const std::string hash = detail::config_hash(cfg);
  if (detail::output_format(cfg) == "csv") {
    std::ostringstream out;
    out << simulation_csv_header() << ",artifact_version,config_hash,seed\n";
    for (std::size_t i = 0; i < settings.size(); ++i) {
      out << simulation_csv_row(settings[i].first, settings[i].second, cfg.misspec, results[i])
          << ',' << kVersion << ',' << hash << ',' << cfg.seed << '\n';
    }
    detail::write_text_file(cfg.out_path, out.str());
  } else {
    json arr = json::array();
    for (std::size_t i = 0; i < settings.size(); ++i) {
      json j = to_json(results[i]);
      j["setting"] = settings[i].first;
      j["phi"] = settings[i].second.phi;
      j["mu"] = settings[i].second.mu;
      j["n_per_arm"] = settings[i].second.n_per_arm;
      j["misspec"] = cfg.misspec;
      arr.push_back(j);
    }
    json top;
    top["artifact_version"] = std::string(kVersion);
    top["config_hash"] = hash;
    top["seed"] = cfg.seed;
    top["results"] = arr;
    detail::write_text_file(cfg.out_path, top.dump(2) + "\n");
  }
  return results;
}

// --- entry point ------------------------------------------------------

inline int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;

  // config file first, flags override
  try {
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        detail::apply_config_file(cfg, load_config_file(args[i + 1]));
      } else if (args[i].rfind("--config=", 0) == 0) {
        detail::apply_config_file(cfg, load_config_file(args[i].substr(9)));
      }
    }
  } catch (const ConfigError& e) {
    err << json{{"error", {{"category", "config"}, {"message", e.what()}}}}.dump() << "\n";
    return kExitUsage;
  }

  CLI::App app{"switcher-effect estimation by transporting a fixed-low-dose arm"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON or TOML run config (flags override it)");

  CLI::App* est = app.add_subcommand("estimate", "estimate the switcher effect from a CSV dataset");
  est->add_option("--config", config_path, "JSON or TOML run config (flags override it)");
  est->add_option("--data", cfg.data_path, "subject-level CSV");
  est->add_option("--schema", cfg.schema_path, "column-mapping config (.json/.toml)");
  est->add_option("--h-spec", cfg.h_spec, "flexible-arm outcome model");
  est->add_option("--m-spec", cfg.m_spec, "fixed-low outcome model");
  est->add_option("--sel-spec", cfg.sel_spec, "trial-membership model");
  est->add_option("--kind", cfg.kind, "dr_nonparametric|efficient_semiparametric|regression");
  est->add_option("--dump-influence", cfg.dump_influence_path, "write per-subject influence CSV");
  est->add_option("--weight-cap", cfg.weight_cap, "diagnostic transport-weight cap");
  est->add_option("--out", cfg.out_path, "output report path");
  est->add_option("--format", cfg.format, "csv or json (default: from --out extension)");
  est->add_option("--seed", cfg.seed, "seed recorded for provenance");

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study of the estimators");
  sim->add_option("--config", config_path, "JSON or TOML run config (flags override it)");
  sim->add_option("--setting", cfg.setting, "1..5, comma list, 'all', or 'custom'");
  sim->add_option("--phi", cfg.phi, "fixed-trial Bernoulli mean (custom setting)");
  sim->add_option("--mu", cfg.mu, "fixed-trial normal mean (custom setting)");
  sim->add_option("--n-per-arm", cfg.n_per_arm, "subjects per arm");
  sim->add_option("--replicates", cfg.replicates, "Monte Carlo replicates");
  sim->add_option("--seed", cfg.seed, "master seed");
  sim->add_option("--misspec", cfg.misspec, "none|outcome|selection|both|omit_x7|proxy_x11:<rho>");
  sim->add_option("--kinds", cfg.kinds, "comma list of estimator kinds");
  sim->add_option("--workers", cfg.workers, "worker threads (0 = hardware)");
  sim->add_option("--truth", [&cfg](const std::vector<std::string>& v) {
    cfg.truth = std::stod(v.at(0));
    return true;
  }, "true effect override (skips the oracle)");
  sim->add_option("--oracle-draws", cfg.oracle_draws, "draws for the truth oracle");
  sim->add_option("--out", cfg.out_path, "output path");
  sim->add_option("--format", cfg.format, "csv or json (default: from --out extension)");

  CLI::App* sens = app.add_subcommand("sensitivity", "estimate over a grid of model specs");
  sens->add_option("--config", config_path, "JSON or TOML run config (flags override it)");
  sens->add_option("--data", cfg.data_path, "subject-level CSV");
  sens->add_option("--schema", cfg.schema_path, "column-mapping config");
  sens->add_option("--h-spec", cfg.h_spec, "fixed flexible-arm outcome model");
  sens->add_option("--grid", cfg.grid_path, "grid config with m_specs and sel_specs arrays");
  sens->add_option("--weight-cap", cfg.weight_cap, "diagnostic transport-weight cap");
  sens->add_option("--out", cfg.out_path, "output CSV path");
  sens->add_option("--seed", cfg.seed, "seed recorded for provenance");

  std::vector<char*> argv;
  std::vector<std::string> storage = std::move(args);
  storage.insert(storage.begin(), "switcheff");
  argv.reserve(storage.size());
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", {{"category", "usage"}, {"message", e.what()}}}}.dump() << "\n";
    return kExitUsage;
  }

  const auto fail = [&err](const char* category, const std::exception& e, int code) {
    err << json{{"error", {{"category", category}, {"message", e.what()}}}}.dump() << "\n";
    return code;
  };

  try {
    if (est->parsed()) {
      cfg.command = "estimate";
      const EstimateReport rep = run_estimate(cfg);
      out << "theta = " << rep.theta;
      if (rep.se) out << "  se = " << *rep.se << "  95% CI [" << *rep.ci_low << ", "
                      << *rep.ci_high << "]  p = " << *rep.p_value;
      out << "\n";
      if (rep.n_weights_above_cap > 0) {
        err << rep.n_weights_above_cap << " transport weights exceed the diagnostic cap of "
            << rep.weight_cap << "\n";
      }
      out << "report written to " << cfg.out_path << "\n";
    } else if (sim->parsed()) {
      cfg.command = "simulate";
      const auto results = run_simulate(cfg);
      out << results.size() << " scenario row(s) written to " << cfg.out_path << "\n";
      for (const auto& r : results) {
        if (r.replicates_failed > 0) {
          err << r.replicates_failed << "/" << r.replicates_total << " replicates failed\n";
        }
      }
    } else if (sens->parsed()) {
      cfg.command = "sensitivity";
      run_sensitivity(cfg);
      out << "sensitivity table written to " << cfg.out_path << "\n";
    }
  } catch (const ConfigError& e) {
    return fail("config", e, kExitUsage);
  } catch (const SpecError& e) {
    return fail("spec", e, kExitUsage);
  } catch (const DataError& e) {
    return fail("data", e, kExitData);
  } catch (const NumericError& e) {
    return fail("numeric", e, kExitNumeric);
  } catch (const std::exception& e) {
    return fail("internal", e, kExitNumeric);
  }
  return kExitOk;
}

}  // namespace switcheff
