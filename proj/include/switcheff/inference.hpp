#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "switcheff/estimators.hpp"

namespace switcheff {

// Phi(x) via erfc; absolute error well below 1e-12.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// 97.5% standard-normal quantile used for every 95% interval.
inline constexpr double kZ95 = 1.959964;

struct WaldInterval {
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
};

inline WaldInterval wald_inference(double theta_hat, double se) {
  if (se < 0.0) throw NumericError("negative standard error");
  WaldInterval w;
  w.ci_low = theta_hat - kZ95 * se;
  w.ci_high = theta_hat + kZ95 * se;
  if (se == 0.0) {
    w.p_value = (theta_hat == 0.0) ? 1.0 : 0.0;
  } else {
    const double z = std::abs(theta_hat) / se;
    w.p_value = std::erfc(z / std::sqrt(2.0));  // = 2 * (1 - Phi(z))
  }
  return w;
}

// Estimated influence function of the doubly robust switcher-effect
// estimator, decomposed into the raw term and the two correction terms
// that survive at the estimating equations (the outcome-weighting
// coefficients and the switcher proportion). All expectations are
// empirical means over the full sample at the plug-in estimates.
struct InfluenceBreakdown {
  Eigen::VectorXd phi;
  Eigen::VectorXd beta_correction;
  Eigen::VectorXd piS_correction;
  Eigen::VectorXd total;
  double se = 0.0;
};

inline InfluenceBreakdown influence_values(const TrialDataset& data, const NuisanceFits& fits,
                                           double theta_hat) {
  if (fits.sel_fit.link != Link::logit) {
    throw SpecError("influence-function variance requires a logistic selection model");
  }
  const auto ix = detail::index_arms(data);
  const std::size_t n = ix.n;
  const Eigen::Index p = fits.m_fit.coefficients.size();

  const auto h_cols = resolve_spec_columns(fits.h_fit.spec, data);
  const auto m_cols = resolve_spec_columns(fits.m_fit.spec, data);
  const auto s_cols = resolve_spec_columns(fits.sel_fit.spec, data);
  const Eigen::Index ph = static_cast<Eigen::Index>(fits.h_fit.spec.terms.size());
  const Eigen::Index ps = static_cast<Eigen::Index>(fits.sel_fit.spec.terms.size());

  InfluenceBreakdown out;
  out.phi.setZero(static_cast<Eigen::Index>(n));
  out.beta_correction.setZero(static_cast<Eigen::Index>(n));
  out.piS_correction.setZero(static_cast<Eigen::Index>(n));

  Eigen::RowVectorXd dphi_dbeta = Eigen::RowVectorXd::Zero(p);
  Eigen::MatrixXd dU_dbeta = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd u_beta(static_cast<Eigen::Index>(n), p);
  u_beta.setZero();
  Eigen::VectorXd u_piS = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  double bracket_mean = 0.0;
  double n_flex_arm = 0.0;

  Eigen::RowVectorXd xh(ph), xm(p), xs(ps);
  const double inv_pT = 1.0 / fits.pi_T;
  const double inv_pS = 1.0 / fits.pi_S;

  for (std::size_t i = 0; i < n; ++i) {
    const Subject& s = data.subjects()[i];
    const bool is_t1 = (s.trial == 1);
    const bool is_low = (s.trial == 0 && s.arm == Arm::fixed_low);
    double bracket = 0.0;
    double m_i = 0.0;
    if (is_t1 || is_low) {
      fill_design_row(fits.m_fit.spec, m_cols, s, i + 1, xm);
      m_i = xm.dot(fits.m_fit.coefficients);
    }
    if (is_t1) {
      fill_design_row(fits.h_fit.spec, h_cols, s, i + 1, xh);
      const double h_i = xh.dot(fits.h_fit.coefficients);
      double v = h_i;
      if (s.arm == Arm::flexible) v += (s.outcome - h_i) / fits.pi_f;
      bracket = v - m_i;
      dphi_dbeta -= xm;  // T_i contribution
      if (s.arm == Arm::flexible) {
        n_flex_arm += 1.0;
        u_piS(static_cast<Eigen::Index>(i)) = static_cast<double>(*s.switched) - fits.pi_S;
      }
    } else if (is_low) {
      fill_design_row(fits.sel_fit.spec, s_cols, s, i + 1, xs);
      const double wgt = std::exp(xs.dot(fits.sel_fit.coefficients)) / fits.pi_l;
      bracket = -wgt * (s.outcome - m_i);
      dphi_dbeta += wgt * xm;
      dU_dbeta -= (wgt * inv_pT) * (xm.transpose() * xm);
      u_beta.row(static_cast<Eigen::Index>(i)) = (wgt * inv_pT * (s.outcome - m_i)) * xm;
    }
    bracket_mean += bracket;
    out.phi(static_cast<Eigen::Index>(i)) =
        bracket * inv_pT * inv_pS - (is_t1 ? inv_pT * theta_hat : 0.0);
  }

  const double dn = static_cast<double>(n);
  bracket_mean /= dn;
  dphi_dbeta *= inv_pS * inv_pT / dn;  // includes the leading minus via accumulation signs
  dU_dbeta /= dn;

  // beta correction: E[dphi/dbeta'] E^{-1}[dU_beta/dbeta'] U_beta,i
  Eigen::FullPivLU<Eigen::MatrixXd> lu(dU_dbeta);
  if (!lu.isInvertible()) {
    throw NumericError("singular E[dU_beta/dbeta']: the weighted fixed-low design is degenerate");
  }
  const Eigen::VectorXd a = lu.solve(dphi_dbeta.transpose());
  out.beta_correction = u_beta * a;

  // pi^S correction
  const double dphi_dpiS = -inv_pS * inv_pS * inv_pT * bracket_mean;
  const double dU_dpiS = -n_flex_arm / dn;
  const double b = dphi_dpiS / dU_dpiS;
  out.piS_correction = b * u_piS;

  out.total = out.phi - out.beta_correction - out.piS_correction;

  const double mean_total = out.total.mean();
  if (std::abs(mean_total) > 1e-6) {
    throw NumericError("influence values do not average to zero (mean " +
                       std::to_string(mean_total) + "); estimating equations not solved");
  }
  double ss = 0.0;
  for (Eigen::Index i = 0; i < out.total.size(); ++i) {
    const double d = out.total(i) - mean_total;
    ss += d * d;
  }
  const double var = (n > 1) ? ss / (dn - 1.0) : 0.0;
  out.se = std::sqrt(var / dn);
  return out;
}

}  // namespace switcheff
