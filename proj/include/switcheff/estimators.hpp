#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "switcheff/dataset.hpp"
#include "switcheff/errors.hpp"
#include "switcheff/glm.hpp"
#include "switcheff/model_spec.hpp"

namespace switcheff {

enum class EstimatorKind { dr_nonparametric, efficient_semiparametric, regression };

inline std::string_view kind_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::dr_nonparametric: return "dr_nonparametric";
    case EstimatorKind::efficient_semiparametric: return "efficient_semiparametric";
    case EstimatorKind::regression: return "regression";
  }
  return "?";
}

inline EstimatorKind parse_kind(std::string_view s) {
  if (s == "dr_nonparametric") return EstimatorKind::dr_nonparametric;
  if (s == "efficient_semiparametric") return EstimatorKind::efficient_semiparametric;
  if (s == "regression") return EstimatorKind::regression;
  throw ConfigError("unknown estimator kind '" + std::string(s) + "'");
}

// Fitted working models plus the empirical design proportions. The
// proportions are always computed from the same dataset as the fits; the
// influence-function algebra depends on exactly these estimating equations.
struct NuisanceFits {
  FittedGLM h_fit;    // outcome model among T=1, R=f (identity link)
  FittedGLM m_fit;    // outcome model among T=0, R=l, transport-weighted
  FittedGLM sel_fit;  // trial-membership model P(T=1|Z) (logit link)
  double pi_f = 0.0;  // P(R=f | T=1)
  double pi_l = 0.0;  // P(R=l | T=0)
  double pi_T = 0.0;  // P(T=1)
  double pi_S = 0.0;  // P(S=1 | T=1, R=f)
};

struct EstimateReport {
  double theta = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double pi_S = 0.0;
  std::optional<double> se;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> p_value;
  EstimatorKind kind = EstimatorKind::dr_nonparametric;
  std::optional<double> weight_p5;
  std::optional<double> weight_p95;
  std::size_t n_flexible_arm = 0;
  std::size_t n_fixed_low_arm = 0;
  std::size_t n_switchers = 0;
  std::size_t n_weights_above_cap = 0;
  double weight_cap = 100.0;
  std::string note;
};

namespace detail {

struct ArmIndex {
  std::vector<std::size_t> trial1;      // all T=1 rows
  std::vector<std::size_t> flex_arm;    // T=1, R=f
  std::vector<std::size_t> fixed_low;   // T=0, R=l
  std::size_t n = 0;
  std::size_t n_trial0 = 0;
  std::size_t n_switchers = 0;
};

inline ArmIndex index_arms(const TrialDataset& data) {
  ArmIndex ix;
  ix.n = data.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Subject& s = data.subjects()[i];
    if (s.trial == 1) {
      ix.trial1.push_back(i);
      if (s.arm == Arm::flexible) {
        ix.flex_arm.push_back(i);
        if (s.switched.value_or(0) == 1) ++ix.n_switchers;
      }
    } else {
      ++ix.n_trial0;
      if (s.arm == Arm::fixed_low) ix.fixed_low.push_back(i);
    }
  }
  return ix;
}

// R's default (type 7) quantile: linear interpolation of order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw NumericError("quantile of empty vector");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

inline FittedGLM fit_spec_on_rows(const ModelSpec& spec, const TrialDataset& data,
                                  const std::vector<std::size_t>& rows,
                                  const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd X = build_design_rows(spec, data, rows);
  const auto labels = spec.term_labels();
  FittedGLM fit = fit_weighted_glm(X, y, w, spec.link, &labels);
  fit.spec = spec;
  return fit;
}

inline Eigen::VectorXd outcomes_at(const TrialDataset& data, const std::vector<std::size_t>& rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = data.subjects()[rows[i]].outcome;
  return y;
}

}  // namespace detail

// Observed proportion of switchers in the flexible dosing arm.
inline double estimate_pi_S(const TrialDataset& data) {
  std::size_t n_flex = 0, n_switch = 0;
  for (const auto& s : data.subjects()) {
    if (s.trial == 1 && s.arm == Arm::flexible) {
      ++n_flex;
      if (s.switched.value_or(0) == 1) ++n_switch;
    }
  }
  if (n_flex == 0) throw DataError("no subjects with T=1, R=f; cannot estimate P(S=1|T=1,R=f)");
  if (n_switch == 0) {
    throw NoSwitchersError("no switchers in the flexible dosing arm; the estimand is undefined");
  }
  return static_cast<double>(n_switch) / static_cast<double>(n_flex);
}

// Linear predictor of the fitted selection model on the given rows.
inline Eigen::VectorXd selection_eta(const NuisanceFits& fits, const TrialDataset& data,
                                     const std::vector<std::size_t>& rows) {
  const Eigen::MatrixXd S = build_design_rows(fits.sel_fit.spec, data, rows);
  return S * fits.sel_fit.coefficients;
}

// Fits the selection model on everyone, the flexible-arm outcome model with
// unit weights, and the fixed-low outcome model with transport weights
// pi/(1-pi) = exp(gamma'z). Fails hard when a fitted selection probability
// reaches 1.0 on a fixed-low row (infinite weight).
inline NuisanceFits fit_nuisances(const TrialDataset& data, const ModelSpec& h_spec,
                                  const ModelSpec& m_spec, const ModelSpec& sel_spec) {
  if (h_spec.link != Link::identity || m_spec.link != Link::identity) {
    throw SpecError("outcome models must use the identity link");
  }
  if (sel_spec.link != Link::logit) {
    throw SpecError("the selection model must use the logit link");
  }
  const auto ix = detail::index_arms(data);
  if (ix.flex_arm.empty()) throw DataError("no subjects with T=1, R=f");
  if (ix.fixed_low.empty()) throw DataError("no subjects with T=0, R=l");
  if (ix.n_trial0 == 0) throw DataError("no fixed-trial subjects");

  NuisanceFits fits;
  fits.pi_f = static_cast<double>(ix.flex_arm.size()) / static_cast<double>(ix.trial1.size());
  fits.pi_l = static_cast<double>(ix.fixed_low.size()) / static_cast<double>(ix.n_trial0);
  fits.pi_T = static_cast<double>(ix.trial1.size()) / static_cast<double>(ix.n);
  fits.pi_S = estimate_pi_S(data);

  // selection: T on Z over the full sample
  {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    Eigen::VectorXd t(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) t(static_cast<Eigen::Index>(i)) = data.subjects()[i].trial;
    fits.sel_fit = detail::fit_spec_on_rows(sel_spec, data, all, t,
                                            Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.size())));
    if (!fits.sel_fit.converged) {
      throw NumericError("selection model did not converge after " +
                         std::to_string(fits.sel_fit.iterations) +
                         " IRLS iterations (possible separation)");
    }
  }

  fits.h_fit = detail::fit_spec_on_rows(h_spec, data, ix.flex_arm,
                                        detail::outcomes_at(data, ix.flex_arm),
                                        Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ix.flex_arm.size())));

  // transport weights on the fixed-low rows
  const Eigen::VectorXd eta = selection_eta(fits, data, ix.fixed_low);
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (expit(eta(i)) == 1.0) {
      throw NumericError("fitted selection probability is 1.0 at row " +
                         std::to_string(ix.fixed_low[static_cast<std::size_t>(i)] + 1) +
                         " (infinite transport weight)");
    }
    w(i) = std::exp(eta(i));
  }
  fits.m_fit = detail::fit_spec_on_rows(m_spec, data, ix.fixed_low,
                                        detail::outcomes_at(data, ix.fixed_low), w);
  return fits;
}

namespace detail {

constexpr double kReductionTol = 1e-8;

inline void require_intercept(const ModelSpec& spec, const char* which) {
  if (!spec.has_intercept()) {
    throw SpecError(std::string(which) +
                    " model needs an intercept term (the plug-in reduction requires it)");
  }
}

}  // namespace detail

// Mean of the flexible-arm outcome-model predictions over every
// flexible-trial subject. Also evaluates the augmented one-step form and
// insists the two agree; they coincide whenever the fit solved its score
// equations and carries an intercept.
inline double estimate_theta1(const TrialDataset& data, const NuisanceFits& fits) {
  detail::require_intercept(fits.h_fit.spec, "flexible-arm outcome");
  const auto ix = detail::index_arms(data);
  if (ix.trial1.empty()) throw DataError("no flexible-trial subjects");
  const Eigen::MatrixXd X1 = build_design_rows(fits.h_fit.spec, data, ix.trial1);
  const Eigen::VectorXd h = predict(fits.h_fit, X1);
  const double plug = h.mean();

  double aug = 0.0;
  for (std::size_t k = 0; k < ix.trial1.size(); ++k) {
    const Subject& s = data.subjects()[ix.trial1[k]];
    double v = h(static_cast<Eigen::Index>(k));
    if (s.arm == Arm::flexible) v += (s.outcome - h(static_cast<Eigen::Index>(k))) / fits.pi_f;
    aug += v;
  }
  aug /= static_cast<double>(ix.trial1.size());

  if (std::abs(plug - aug) > detail::kReductionTol) {
    throw NumericError("theta1 plug-in and augmented forms disagree by " +
                       std::to_string(std::abs(plug - aug)) +
                       "; the outcome fit did not solve its score equations");
  }
  return plug;
}

// Transported mean: average of the weighted fixed-low outcome-model
// predictions over the flexible-trial subjects, checked against the full
// augmented expression.
inline double estimate_theta2_dr(const TrialDataset& data, const NuisanceFits& fits) {
  detail::require_intercept(fits.m_fit.spec, "fixed-low outcome");
  const auto ix = detail::index_arms(data);
  if (ix.trial1.empty()) throw DataError("no flexible-trial subjects");
  const Eigen::MatrixXd X1 = build_design_rows(fits.m_fit.spec, data, ix.trial1);
  const Eigen::VectorXd m1 = predict(fits.m_fit, X1);
  const double plug = m1.mean();

  const Eigen::MatrixXd X0 = build_design_rows(fits.m_fit.spec, data, ix.fixed_low);
  const Eigen::VectorXd m0 = predict(fits.m_fit, X0);
  const Eigen::VectorXd eta0 = selection_eta(fits, data, ix.fixed_low);
  double aug = 0.0;
  for (std::size_t k = 0; k < ix.fixed_low.size(); ++k) {
    const Subject& s = data.subjects()[ix.fixed_low[k]];
    aug += std::exp(eta0(static_cast<Eigen::Index>(k))) / fits.pi_l *
           (s.outcome - m0(static_cast<Eigen::Index>(k)));
  }
  aug = (aug + m1.sum()) / static_cast<double>(ix.trial1.size());

  if (std::abs(plug - aug) > detail::kReductionTol) {
    throw NumericError("theta2 plug-in and augmented forms disagree by " +
                       std::to_string(std::abs(plug - aug)) +
                       "; the weighted outcome fit did not solve its score equations");
  }
  return plug;
}

// Regression (g-computation) transport: unweighted fixed-low fit, averaged
// over the flexible-trial subjects.
inline double estimate_theta2_regression(const TrialDataset& data, const ModelSpec& m_spec) {
  if (m_spec.link != Link::identity) throw SpecError("outcome models must use the identity link");
  detail::require_intercept(m_spec, "fixed-low outcome");
  const auto ix = detail::index_arms(data);
  if (ix.fixed_low.empty()) throw DataError("no subjects with T=0, R=l");
  if (ix.trial1.empty()) throw DataError("no flexible-trial subjects");

  const FittedGLM fit = detail::fit_spec_on_rows(
      m_spec, data, ix.fixed_low, detail::outcomes_at(data, ix.fixed_low),
      Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ix.fixed_low.size())));

  const Eigen::MatrixXd X0 = build_design_rows(m_spec, data, ix.fixed_low);
  const Eigen::VectorXd m0 = predict(fit, X0);
  double resid_mean = 0.0;
  for (std::size_t k = 0; k < ix.fixed_low.size(); ++k) {
    resid_mean += data.subjects()[ix.fixed_low[k]].outcome - m0(static_cast<Eigen::Index>(k));
  }
  resid_mean /= static_cast<double>(ix.fixed_low.size());
  if (std::abs(resid_mean) > detail::kReductionTol) {
    throw NumericError("unweighted outcome fit left a nonzero mean residual");
  }

  const Eigen::MatrixXd X1 = build_design_rows(m_spec, data, ix.trial1);
  return predict(fit, X1).mean();
}

// 5%/95% percentiles of the realized transport weights
// exp(gamma'z)/pi_l on the fixed-low rows (the weight each low-dose
// residual carries in the augmented estimator), plus the count above the
// diagnostic cap.
struct WeightDiagnostics {
  double p5 = 0.0;
  double p95 = 0.0;
  std::size_t n_above_cap = 0;
};

inline WeightDiagnostics weight_diagnostics(const TrialDataset& data, const NuisanceFits& fits,
                                            double cap = 100.0) {
  const auto ix = detail::index_arms(data);
  const Eigen::VectorXd eta = selection_eta(fits, data, ix.fixed_low);
  std::vector<double> w(static_cast<std::size_t>(eta.size()));
  WeightDiagnostics d;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    w[static_cast<std::size_t>(i)] = std::exp(eta(i)) / fits.pi_l;
    if (w[static_cast<std::size_t>(i)] > cap) ++d.n_above_cap;
  }
  d.p5 = detail::quantile(w, 0.05);
  d.p95 = detail::quantile(w, 0.95);
  return d;
}

}  // namespace switcheff
