#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "switcheff/dataset.hpp"
#include "switcheff/errors.hpp"
#include "switcheff/rng.hpp"
#include "switcheff/switcher_effect.hpp"

namespace switcheff {

// Exchangeability-violation modes: drop the shared cause X7 from the
// recorded covariates, or record a proxy X11 correlated with X7.
struct ViolationSpec {
  enum class Kind { none, omit_x7, proxy_x11 };
  Kind kind = Kind::none;
  double correlation = 0.0;  // proxy_x11 only
};

// Data-generating process controls. (phi, mu) shift the fixed-trial
// covariate laws of X9/X10 and X7/X8; the flexible-trial laws are fixed at
// Ber(0.6) and N(0.5, 1).
struct DGPSetting {
  double phi = 0.6;
  double mu = 0.5;
  int n_per_arm = 100;
  ViolationSpec violation{};

  static DGPSetting numbered(int setting) {
    DGPSetting s;
    switch (setting) {
      case 1: s.phi = 0.6; s.mu = 0.5; break;
      case 2: s.phi = 0.5; s.mu = 0.25; break;
      case 3: s.phi = 0.4; s.mu = 0.0; break;
      case 4: s.phi = 0.2; s.mu = -0.5; break;
      case 5: s.phi = 0.1; s.mu = -1.0; break;
      default: throw ConfigError("setting must be 1..5, got " + std::to_string(setting));
    }
    return s;
  }
};

namespace dgp {

struct Covs {
  double x1, x2, x3, x4, x5, x6, x7, x8, x9, x10;
  double x11 = std::numeric_limits<double>::quiet_NaN();
};

inline double potential_mean_placebo(const Covs& c) {
  return c.x3 + c.x6 + c.x8 + c.x10 + c.x3 * c.x6 + c.x7 * c.x9;
}

inline double potential_mean_low(const Covs& c) {
  return c.x1 + c.x2 + c.x3 + c.x4 + c.x5 + c.x6 + c.x7 + c.x8 + c.x9 + c.x10 +
         c.x3 * c.x6 + c.x7 * c.x9;
}

inline double potential_mean_combo(const Covs& c) {
  return -c.x1 - 0.5 * c.x2 + c.x3 - c.x4 - 0.5 * c.x5 + c.x6 - 0.5 * c.x7 + c.x8 -
         0.5 * c.x9 + c.x10 + c.x3 * c.x6 + c.x7 * c.x9;
}

inline double switch_probability(const Covs& c) {
  return expit(c.x3 + c.x6 + c.x7 + c.x8 + c.x9 + c.x10);
}

// Fixed draw order: X1..X6, X7 (with X11 under the proxy violation), X8,
// X9, X10. Trial membership selects the X7/X8 mean and the X9/X10 rate.
inline Covs draw_covariates(Rng& rng, bool flexible_trial, const DGPSetting& set) {
  Covs c{};
  c.x1 = rng.normal();
  c.x2 = rng.normal();
  c.x3 = rng.normal();
  c.x4 = rng.bernoulli(0.5);
  c.x5 = rng.bernoulli(0.5);
  c.x6 = rng.bernoulli(0.5);
  const double mean7 = flexible_trial ? 0.5 : set.mu;
  if (set.violation.kind == ViolationSpec::Kind::proxy_x11) {
    const auto [x7, x11] = rng.bivariate_normal(mean7, set.violation.correlation);
    c.x7 = x7;
    c.x11 = x11;
  } else {
    c.x7 = rng.normal(mean7, 1.0);
  }
  c.x8 = rng.normal(mean7, 1.0);
  const double p9 = flexible_trial ? 0.6 : set.phi;
  c.x9 = rng.bernoulli(p9);
  c.x10 = rng.bernoulli(p9);
  return c;
}

inline std::vector<std::string> covariate_names(const ViolationSpec& v) {
  switch (v.kind) {
    case ViolationSpec::Kind::omit_x7:
      return {"X1", "X2", "X3", "X4", "X5", "X6", "X8", "X9", "X10"};
    case ViolationSpec::Kind::proxy_x11:
      return {"X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "X9", "X10", "X11"};
    case ViolationSpec::Kind::none:
    default:
      return {"X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "X9", "X10"};
  }
}

inline std::vector<double> emit_covariates(const Covs& c, const ViolationSpec& v) {
  switch (v.kind) {
    case ViolationSpec::Kind::omit_x7:
      return {c.x1, c.x2, c.x3, c.x4, c.x5, c.x6, c.x8, c.x9, c.x10};
    case ViolationSpec::Kind::proxy_x11:
      return {c.x1, c.x2, c.x3, c.x4, c.x5, c.x6, c.x7, c.x8, c.x9, c.x10, c.x11};
    case ViolationSpec::Kind::none:
    default:
      return {c.x1, c.x2, c.x3, c.x4, c.x5, c.x6, c.x7, c.x8, c.x9, c.x10};
  }
}

}  // namespace dgp

// Two-trial synthetic dataset: n_per_arm subjects in each of the flexible
// trial's p/f arms and the fixed trial's p/h/l arms, in that order. The
// flexible arm draws S first, then the realized outcome; placebo arms get
// the placebo outcome; the fixed-high arm gets a placeholder outcome (no
// estimator reads it). Outcome noise is N(0,1) throughout.
inline TrialDataset generate_trial_data(const DGPSetting& setting, std::uint64_t seed) {
  if (setting.n_per_arm < 1) throw ConfigError("n_per_arm must be at least 1");
  if (setting.violation.kind == ViolationSpec::Kind::proxy_x11 &&
      !(setting.violation.correlation > 0.0 && setting.violation.correlation < 1.0)) {
    throw ConfigError("proxy_x11 correlation must be in (0,1)");
  }
  Rng rng(seed);
  const int n = setting.n_per_arm;
  std::vector<Subject> subjects;
  subjects.reserve(static_cast<std::size_t>(5 * n));

  struct ArmPlan { int trial; Arm arm; const char* prefix; };
  const ArmPlan plan[] = {
      {1, Arm::placebo, "T1p-"}, {1, Arm::flexible, "T1f-"},
      {0, Arm::placebo, "T0p-"}, {0, Arm::fixed_high, "T0h-"}, {0, Arm::fixed_low, "T0l-"},
  };
  for (const auto& ap : plan) {
    for (int i = 0; i < n; ++i) {
      const dgp::Covs c = dgp::draw_covariates(rng, ap.trial == 1, setting);
      Subject s;
      s.id = ap.prefix + std::to_string(i + 1);
      s.trial = ap.trial;
      s.arm = ap.arm;
      switch (ap.arm) {
        case Arm::placebo:
          s.outcome = rng.normal(dgp::potential_mean_placebo(c), 1.0);
          break;
        case Arm::flexible: {
          const int sw = rng.bernoulli(dgp::switch_probability(c));
          s.switched = sw;
          s.outcome = rng.normal(sw ? dgp::potential_mean_combo(c) : dgp::potential_mean_low(c), 1.0);
          break;
        }
        case Arm::fixed_low:
          s.outcome = rng.normal(dgp::potential_mean_low(c), 1.0);
          break;
        case Arm::fixed_high:
          s.outcome = rng.normal(dgp::potential_mean_low(c), 1.0);
          break;
      }
      s.covariates = dgp::emit_covariates(c, setting.violation);
      subjects.push_back(std::move(s));
    }
  }
  return TrialDataset(std::move(subjects), dgp::covariate_names(setting.violation));
}

inline constexpr std::uint64_t kTruthOracleSeed = 0x73776974636845ULL;

// Brute-force oracle for E[diff(X) | S=1] under the flexible-trial
// covariate law.
template <class DiffFn>
double switcher_conditional_mean(const DGPSetting& setting, std::size_t draws,
                                 std::uint64_t seed, DiffFn&& diff) {
  Rng rng(seed);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const dgp::Covs c = dgp::draw_covariates(rng, true, setting);
    if (rng.bernoulli(dgp::switch_probability(c))) {
      sum += diff(c);
      ++count;
    }
  }
  if (count == 0) throw NumericError("oracle produced no switcher draws");
  return sum / static_cast<double>(count);
}

// Monte Carlo oracle for the true switcher effect E[Y^c - Y^l | S=1] in
// the flexible-trial population; around -3.59 for every (phi, mu).
inline double true_switcher_effect(const DGPSetting& setting, std::size_t oracle_draws,
                                   std::uint64_t seed = kTruthOracleSeed) {
  if (oracle_draws < 1000000) {
    throw ConfigError("the truth oracle needs at least 1e6 draws");
  }
  return switcher_conditional_mean(setting, oracle_draws, seed, [](const dgp::Covs& c) {
    return dgp::potential_mean_combo(c) - dgp::potential_mean_low(c);
  });
}

// Regressor vectors of the simulation study, as model-spec strings.
inline std::string outcome_regressors(bool misspecified, const ViolationSpec& v = {}) {
  switch (v.kind) {
    case ViolationSpec::Kind::omit_x7:
      return "1 + X1 + X2 + X3 + X4 + X5 + X6 + X8 + X9 + X10 + X3:X6";
    case ViolationSpec::Kind::proxy_x11:
      return "1 + X1 + X2 + X3 + X4 + X5 + X6 + X8 + X9 + X10 + X11 + X3:X6 + X11:X9";
    case ViolationSpec::Kind::none:
    default:
      break;
  }
  if (misspecified) {
    return "1 + log_abs(X1) + log_abs(X2) + log_abs(X3) + X4 + X5 + X6 + log_abs(X7) + "
           "log_abs(X8) + X9 + X10";
  }
  return "1 + X1 + X2 + X3 + X4 + X5 + X6 + X7 + X8 + X9 + X10 + X3:X6 + X7:X9";
}

inline std::string selection_regressors(bool misspecified, const ViolationSpec& v = {}) {
  switch (v.kind) {
    case ViolationSpec::Kind::omit_x7:
      return "1 + X8 + X9 + X10";
    case ViolationSpec::Kind::proxy_x11:
      return "1 + X11 + X8 + X9 + X10";
    case ViolationSpec::Kind::none:
    default:
      break;
  }
  if (misspecified) return "1 + log_abs(X7) + log_abs(X8) + X9 + X10";
  return "1 + X7 + X8 + X9 + X10";
}

// One Monte Carlo experiment: scenario parameters, the working models, the
// estimators to run, and the master seed. Replicate r draws its stream
// from derive_stream_seed(seed, r).
struct ScenarioSpec {
  DGPSetting setting;
  ModelSpec h_spec;
  ModelSpec m_spec;
  std::optional<ModelSpec> sel_spec;
  std::vector<EstimatorKind> kinds{EstimatorKind::dr_nonparametric,
                                   EstimatorKind::efficient_semiparametric,
                                   EstimatorKind::regression};
  int replicates = 5000;
  std::uint64_t seed = 1;
  std::optional<double> true_effect;        // computed by the oracle when absent
  std::optional<double> coverage_target;    // defaults to the true effect
  std::size_t oracle_draws = 2000000;
  int workers = 0;                          // 0 = hardware concurrency
  double weight_cap = 100.0;
};

struct KindSummary {
  EstimatorKind kind = EstimatorKind::dr_nonparametric;
  double bias = 0.0;
  double se = 0.0;   // Monte Carlo standard deviation of theta-hat
  double mse = 0.0;  // mean squared error about the true effect
  std::optional<double> se_mean;   // mean reported influence-function SE
  std::optional<double> coverage;  // 95% CI coverage of the target
};

struct SimulationResult {
  std::vector<KindSummary> kinds;
  std::optional<double> weight_p5_median;
  std::optional<double> weight_p95_median;
  int replicates_total = 0;
  int replicates_failed = 0;
  double true_effect = 0.0;
};

namespace detail {

struct ReplicateRecord {
  bool failed = false;
  std::vector<double> theta;
  double se = std::numeric_limits<double>::quiet_NaN();
  double ci_low = 0.0, ci_high = 0.0;
  bool has_se = false;
  std::optional<double> w5, w95;
};

inline void run_replicate(const ScenarioSpec& spec, std::size_t r, ReplicateRecord& rec) {
  rec.theta.assign(spec.kinds.size(), std::numeric_limits<double>::quiet_NaN());
  try {
    const TrialDataset data = generate_trial_data(spec.setting, derive_stream_seed(spec.seed, r));
    for (std::size_t j = 0; j < spec.kinds.size(); ++j) {
      const EstimateReport rep = estimate_switcher_effect(data, spec.h_spec, spec.m_spec,
                                                          spec.sel_spec, spec.kinds[j],
                                                          spec.weight_cap);
      rec.theta[j] = rep.theta;
      if (spec.kinds[j] == EstimatorKind::dr_nonparametric && rep.se) {
        rec.se = *rep.se;
        rec.ci_low = *rep.ci_low;
        rec.ci_high = *rep.ci_high;
        rec.has_se = true;
      }
      if (!rec.w5 && rep.weight_p5) {
        rec.w5 = rep.weight_p5;
        rec.w95 = rep.weight_p95;
      }
    }
  } catch (const std::exception&) {
    rec.failed = true;
  }
}

}  // namespace detail

// Runs the scenario's replicates (concurrently when workers allow),
// excludes failed replicates from the aggregates, and reports bias,
// Monte Carlo SD, and MSE per estimator. Results are bit-identical for a
// given spec regardless of the worker count.
inline SimulationResult run_monte_carlo(const ScenarioSpec& spec) {
  if (spec.replicates < 1) throw ConfigError("replicates must be at least 1");
  if (spec.kinds.empty()) throw ConfigError("no estimator kinds requested");
  for (EstimatorKind k : spec.kinds) {
    if (k != EstimatorKind::regression && !spec.sel_spec.has_value()) {
      throw ConfigError(std::string(kind_name(k)) + " requires a selection model spec");
    }
  }

  const double truth = spec.true_effect.has_value()
                           ? *spec.true_effect
                           : true_switcher_effect(spec.setting, spec.oracle_draws,
                                                  derive_stream_seed(spec.seed, 0xFFFFFFFFFFFF0001ULL));

  const std::size_t reps = static_cast<std::size_t>(spec.replicates);
  std::vector<detail::ReplicateRecord> records(reps);
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const std::size_t n_workers =
      std::min<std::size_t>(reps, spec.workers > 0 ? static_cast<std::size_t>(spec.workers) : hw);

  if (n_workers <= 1) {
    for (std::size_t r = 0; r < reps; ++r) detail::run_replicate(spec, r, records[r]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) {
      pool.emplace_back([&]() {
        for (std::size_t r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
          detail::run_replicate(spec, r, records[r]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  SimulationResult result;
  result.replicates_total = spec.replicates;
  result.true_effect = truth;
  for (const auto& rec : records) {
    if (rec.failed) ++result.replicates_failed;
  }
  if (result.replicates_failed == spec.replicates) {
    throw NumericError("all " + std::to_string(spec.replicates) + " replicates failed");
  }

  const double target = spec.coverage_target.value_or(truth);
  for (std::size_t j = 0; j < spec.kinds.size(); ++j) {
    KindSummary ks;
    ks.kind = spec.kinds[j];
    double sum = 0.0, sum_sq_err = 0.0, sum_se = 0.0, covered = 0.0;
    std::size_t used = 0, with_se = 0;
    for (const auto& rec : records) {
      if (rec.failed) continue;
      const double th = rec.theta[j];
      sum += th;
      sum_sq_err += (th - truth) * (th - truth);
      ++used;
      if (ks.kind == EstimatorKind::dr_nonparametric && rec.has_se) {
        sum_se += rec.se;
        if (rec.ci_low <= target && target <= rec.ci_high) covered += 1.0;
        ++with_se;
      }
    }
    const double dn = static_cast<double>(used);
    const double mean = sum / dn;
    ks.bias = mean - truth;
    double ss = 0.0;
    for (const auto& rec : records) {
      if (rec.failed) continue;
      const double d = rec.theta[j] - mean;
      ss += d * d;
    }
    ks.se = std::sqrt(ss / dn);
    ks.mse = sum_sq_err / dn;
    if (with_se > 0) {
      ks.se_mean = sum_se / static_cast<double>(with_se);
      ks.coverage = covered / static_cast<double>(with_se);
    }
    result.kinds.push_back(ks);
  }

  std::vector<double> w5s, w95s;
  for (const auto& rec : records) {
    if (!rec.failed && rec.w5) {
      w5s.push_back(*rec.w5);
      w95s.push_back(*rec.w95);
    }
  }
  if (!w5s.empty()) {
    result.weight_p5_median = detail::quantile(w5s, 0.5);
    result.weight_p95_median = detail::quantile(w95s, 0.5);
  }
  return result;
}

}  // namespace switcheff
