#pragma once

#include <optional>

#include "switcheff/estimators.hpp"
#include "switcheff/inference.hpp"

namespace switcheff {

namespace detail {

inline void fill_counts(EstimateReport& rep, const ArmIndex& ix) {
  rep.n_flexible_arm = ix.flex_arm.size();
  rep.n_fixed_low_arm = ix.fixed_low.size();
  rep.n_switchers = ix.n_switchers;
}

inline void fill_weights(EstimateReport& rep, const TrialDataset& data, const NuisanceFits& fits,
                         double cap) {
  const WeightDiagnostics d = weight_diagnostics(data, fits, cap);
  rep.weight_p5 = d.p5;
  rep.weight_p95 = d.p95;
  rep.n_weights_above_cap = d.n_above_cap;
  rep.weight_cap = cap;
}

}  // namespace detail

// Semiparametric efficient variant: theta_k averages pi(Z_i) times the
// model prediction over all n subjects, divided by the flexible-trial
// proportion. Equivalent to the doubly robust estimator whenever the
// logistic selection design spans the outcome designs; not doubly robust
// otherwise. No influence-function variance is derived for it.
inline EstimateReport estimate_effect_efficient(const TrialDataset& data, const ModelSpec& h_spec,
                                                const ModelSpec& m_spec, const ModelSpec& sel_spec,
                                                double weight_cap = 100.0) {
  const NuisanceFits fits = fit_nuisances(data, h_spec, m_spec, sel_spec);
  detail::require_intercept(h_spec, "flexible-arm outcome");
  detail::require_intercept(m_spec, "fixed-low outcome");
  const auto ix = detail::index_arms(data);
  const double n = static_cast<double>(ix.n);

  std::vector<std::size_t> all(ix.n);
  for (std::size_t i = 0; i < ix.n; ++i) all[i] = i;
  const Eigen::VectorXd eta = selection_eta(fits, data, all);
  const Eigen::VectorXd h = predict(fits.h_fit, build_design_rows(h_spec, data, all));
  const Eigen::VectorXd m = predict(fits.m_fit, build_design_rows(m_spec, data, all));

  double pi_h = 0.0, pi_m = 0.0, aug1 = 0.0, aug2 = 0.0;
  for (std::size_t i = 0; i < ix.n; ++i) {
    const Subject& s = data.subjects()[i];
    const Eigen::Index k = static_cast<Eigen::Index>(i);
    const double pi_i = expit(eta(k));
    pi_h += pi_i * h(k);
    pi_m += pi_i * m(k);
    aug1 += pi_i * h(k);
    aug2 += pi_i * m(k);
    if (s.trial == 1 && s.arm == Arm::flexible) {
      aug1 += (s.outcome - h(k)) / fits.pi_f;
    }
    if (s.trial == 0 && s.arm == Arm::fixed_low) {
      aug2 += std::exp(eta(k)) / fits.pi_l * (s.outcome - m(k));
    }
  }
  const double theta1 = pi_h / n / fits.pi_T;
  const double theta2 = pi_m / n / fits.pi_T;
  const double theta1_aug = aug1 / n / fits.pi_T;
  const double theta2_aug = aug2 / n / fits.pi_T;
  if (std::abs(theta1 - theta1_aug) > detail::kReductionTol ||
      std::abs(theta2 - theta2_aug) > detail::kReductionTol) {
    throw NumericError("efficient-estimator plug-in and augmented forms disagree; "
                       "score equations not solved");
  }

  EstimateReport rep;
  rep.kind = EstimatorKind::efficient_semiparametric;
  rep.theta1 = theta1;
  rep.theta2 = theta2;
  rep.pi_S = fits.pi_S;
  rep.theta = (theta1 - theta2) / fits.pi_S;
  rep.note = "no influence-function standard error is derived for the efficient estimator";
  detail::fill_counts(rep, ix);
  detail::fill_weights(rep, data, fits, weight_cap);
  return rep;
}

// Point estimate, components, and (for the doubly robust kind) the
// influence-function standard error with a 95% Wald interval and two-sided
// normal p-value.
inline EstimateReport estimate_switcher_effect(const TrialDataset& data, const ModelSpec& h_spec,
                                               const ModelSpec& m_spec,
                                               const std::optional<ModelSpec>& sel_spec,
                                               EstimatorKind kind, double weight_cap = 100.0) {
  if (kind != EstimatorKind::regression && !sel_spec.has_value()) {
    throw ConfigError(std::string(kind_name(kind)) + " requires a selection model spec");
  }
  if (kind == EstimatorKind::efficient_semiparametric) {
    return estimate_effect_efficient(data, h_spec, m_spec, *sel_spec, weight_cap);
  }

  EstimateReport rep;
  rep.kind = kind;
  const auto ix = detail::index_arms(data);
  detail::fill_counts(rep, ix);

  if (kind == EstimatorKind::dr_nonparametric) {
    const NuisanceFits fits = fit_nuisances(data, h_spec, m_spec, *sel_spec);
    rep.theta1 = estimate_theta1(data, fits);
    rep.theta2 = estimate_theta2_dr(data, fits);
    rep.pi_S = fits.pi_S;
    rep.theta = (rep.theta1 - rep.theta2) / rep.pi_S;
    const InfluenceBreakdown inf = influence_values(data, fits, rep.theta);
    rep.se = inf.se;
    const WaldInterval w = wald_inference(rep.theta, inf.se);
    rep.ci_low = w.ci_low;
    rep.ci_high = w.ci_high;
    rep.p_value = w.p_value;
    detail::fill_weights(rep, data, fits, weight_cap);
    return rep;
  }

  // regression estimator: no selection model involved
  if (ix.flex_arm.empty()) throw DataError("no subjects with T=1, R=f");
  const FittedGLM h_fit = detail::fit_spec_on_rows(
      h_spec, data, ix.flex_arm, detail::outcomes_at(data, ix.flex_arm),
      Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ix.flex_arm.size())));
  NuisanceFits partial;
  partial.h_fit = h_fit;
  partial.pi_f = static_cast<double>(ix.flex_arm.size()) / static_cast<double>(ix.trial1.size());
  rep.pi_S = estimate_pi_S(data);
  rep.theta1 = estimate_theta1(data, partial);
  rep.theta2 = estimate_theta2_regression(data, m_spec);
  rep.theta = (rep.theta1 - rep.theta2) / rep.pi_S;
  rep.note = "no influence-function standard error is derived for the regression estimator";
  return rep;
}

}  // namespace switcheff
