#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "switcheff/errors.hpp"
#include "switcheff/model_spec.hpp"

namespace switcheff {

inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Weighted canonical GLM fit. `spec` is filled by spec-aware callers and
// empty when fit from raw matrices.
struct FittedGLM {
  ModelSpec spec;
  Eigen::VectorXd coefficients;
  Link link = Link::identity;
  Eigen::VectorXd prior_weights;
  bool converged = false;
  int iterations = 0;
  double max_score_norm = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

constexpr double kIrlsScoreTol = 1e-10;
constexpr double kIrlsStepTol = 1e-12;
constexpr int kIrlsMaxIter = 100;
constexpr double kProbFloor = 1e-12;
constexpr double kDivergenceNorm = 1e8;

inline std::string column_list(const std::vector<Eigen::Index>& cols,
                               const std::vector<std::string>* labels) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i > 0) out += ", ";
    if (labels && static_cast<std::size_t>(cols[i]) < labels->size()) {
      out += (*labels)[static_cast<std::size_t>(cols[i])];
    } else {
      out += "column " + std::to_string(cols[i]);
    }
  }
  return out;
}

// One weighted least-squares solve by column-pivoted QR, with a single
// refinement pass. Throws NumericError naming the dependent columns when
// the weighted design is rank deficient.
inline Eigen::VectorXd weighted_ls_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& w,
                                         const std::vector<std::string>* labels) {
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd A = sw.asDiagonal() * X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < X.cols()) {
    std::vector<Eigen::Index> dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < X.cols(); ++k) dependent.push_back(perm(k));
    throw NumericError("rank-deficient design: dependent columns {" +
                       column_list(dependent, labels) + "}");
  }
  Eigen::VectorXd beta = qr.solve(sw.cwiseProduct(y));
  beta += qr.solve(sw.cwiseProduct(y - X * beta));
  return beta;
}

}  // namespace detail

// Solves the weighted score equations sum_i w_i x_i (y_i - g^{-1}(x_i'b)) = 0.
// Identity link: a single least-squares solve. Logit link: IRLS, stopping
// when the infinity norm of the weighted score is <= 1e-10 or the relative
// coefficient change is <= 1e-12, at most 100 iterations. Zero-weight rows
// stay in the matrix but contribute nothing.
inline FittedGLM fit_weighted_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& w, Link link,
                                  const std::vector<std::string>* column_labels = nullptr) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n < 1 || p < 1) throw NumericError("empty design matrix");
  if (y.size() != n || w.size() != n) throw NumericError("dimension mismatch in GLM inputs");
  Eigen::Index n_active = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w(i) < 0.0) throw NumericError("negative weight at row " + std::to_string(i + 1));
    if (w(i) > 0.0) ++n_active;
  }
  if (n_active < p) {
    throw NumericError("only " + std::to_string(n_active) + " rows with positive weight for " +
                       std::to_string(p) + " coefficients");
  }

  FittedGLM fit;
  fit.link = link;
  fit.prior_weights = w;

  if (link == Link::identity) {
    fit.coefficients = detail::weighted_ls_solve(X, y, w, column_labels);
    const Eigen::VectorXd score = X.transpose() * w.cwiseProduct(y - X * fit.coefficients);
    fit.max_score_norm = score.lpNorm<Eigen::Infinity>();
    fit.iterations = 1;
    fit.converged = true;
    return fit;
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    if (w(i) > 0.0 && y(i) != 0.0 && y(i) != 1.0) {
      throw NumericError("logit link requires y in {0,1}; row " + std::to_string(i + 1) +
                         " has y=" + std::to_string(y(i)));
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd prob(n), work_w(n), working(n);
  bool converged = false;
  int iter = 0;
  while (iter < detail::kIrlsMaxIter) {
    const Eigen::VectorXd eta = X * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = std::min(1.0 - detail::kProbFloor, std::max(detail::kProbFloor, expit(eta(i))));
    }
    const Eigen::VectorXd score = X.transpose() * w.cwiseProduct(y - prob);
    if (score.lpNorm<Eigen::Infinity>() <= detail::kIrlsScoreTol) {
      converged = true;
      break;
    }
    ++iter;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = prob(i) * (1.0 - prob(i));
      work_w(i) = w(i) * v;
      working(i) = eta(i) + (y(i) - prob(i)) / v;
    }
    const Eigen::VectorXd beta_new = detail::weighted_ls_solve(X, working, work_w, column_labels);
    const double step = (beta_new - beta).lpNorm<Eigen::Infinity>();
    const double scale = std::max(1.0, beta.lpNorm<Eigen::Infinity>());
    beta = beta_new;
    if (step <= detail::kIrlsStepTol * scale) {
      converged = true;
      break;
    }
    if (beta.lpNorm<Eigen::Infinity>() > detail::kDivergenceNorm) break;
  }

  fit.coefficients = beta;
  fit.iterations = iter;
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd resid(n);
  bool perfect_fit = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    resid(i) = y(i) - expit(eta(i));
    if (w(i) > 0.0 && std::abs(resid(i)) > 1e-9) perfect_fit = false;
  }
  fit.max_score_norm = (X.transpose() * w.cwiseProduct(resid)).lpNorm<Eigen::Infinity>();
  // a perfect fit of 0/1 outcomes means the likelihood has no interior
  // maximum (complete separation): the coefficient norm diverges
  fit.converged = converged && !perfect_fit && fit.max_score_norm <= 1e-8;
  return fit;
}

inline Eigen::VectorXd predict(const FittedGLM& fit, const Eigen::MatrixXd& X) {
  if (X.cols() != fit.coefficients.size()) {
    throw NumericError("predict: design has " + std::to_string(X.cols()) + " columns, fit has " +
                       std::to_string(fit.coefficients.size()) + " coefficients");
  }
  Eigen::VectorXd eta = X * fit.coefficients;
  if (fit.link == Link::logit) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = expit(eta(i));
  }
  return eta;
}

}  // namespace switcheff
