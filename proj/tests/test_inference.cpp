#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "test_support.hpp"

using namespace switcheff;
using testsupport::random_two_trial_dataset;

TEST_CASE("normal_cdf matches high-precision references") {
  CHECK(std::abs(normal_cdf(0.0) - 0.5) < 1e-15);
  CHECK(std::abs(normal_cdf(1.0) - 0.841344746068542949) < 1e-12);
  CHECK(std::abs(normal_cdf(-1.0) - 0.158655253931457051) < 1e-12);
  CHECK(std::abs(normal_cdf(1.96) - 0.975002104851779566) < 1e-12);
  CHECK(std::abs(normal_cdf(-2.5) - 0.00620966532577613517) < 1e-12);
  CHECK(std::abs(normal_cdf(3.5) - 0.999767370920964475) < 1e-12);
}

TEST_CASE("wald_inference") {
  SECTION("zero estimate, unit SE") {
    const auto w = wald_inference(0.0, 1.0);
    CHECK(w.ci_low == Catch::Approx(-1.959964).margin(1e-12));
    CHECK(w.ci_high == Catch::Approx(1.959964).margin(1e-12));
    CHECK(w.p_value == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("reproduces the published interval from its back-solved SE") {
    const auto w = wald_inference(-4.311, 2.5985);
    CHECK(std::abs(w.ci_low - (-9.404)) < 0.002);
    CHECK(std::abs(w.ci_high - 0.782) < 0.002);
    CHECK(std::abs(w.p_value - 0.096) < 0.002);
  }
  SECTION("borderline z") {
    const auto w = wald_inference(1.96, 1.0);
    CHECK(std::abs(w.p_value - 0.05) < 1e-4);
  }
  SECTION("degenerate SE") {
    CHECK(wald_inference(1.0, 0.0).p_value == 0.0);
    CHECK(wald_inference(0.0, 0.0).p_value == 1.0);
    CHECK_THROWS_AS(wald_inference(1.0, -0.1), NumericError);
  }
}

namespace {

TrialDataset constant_outcome_dataset() {
  std::vector<Subject> subs;
  Rng rng(11);
  int id = 0;
  const auto add = [&](int trial, Arm arm, int count) {
    for (int i = 0; i < count; ++i) {
      Subject s;
      s.id = "c" + std::to_string(++id);
      s.trial = trial;
      s.arm = arm;
      if (trial == 1 && arm == Arm::flexible) s.switched = rng.bernoulli(0.5);
      s.outcome = 7.5;
      s.covariates = {rng.normal()};
      subs.push_back(std::move(s));
    }
  };
  add(1, Arm::flexible, 20);
  add(1, Arm::placebo, 20);
  add(0, Arm::fixed_low, 20);
  add(0, Arm::placebo, 20);
  return TrialDataset(std::move(subs), {"Z"});
}

}  // namespace

TEST_CASE("constant outcomes give identically zero influence and zero SE") {
  const auto data = constant_outcome_dataset();
  const auto int_id = parse_model_spec("1", Link::identity);
  const auto int_logit = parse_model_spec("1", Link::logit);
  const auto fits = fit_nuisances(data, int_id, int_id, int_logit);
  const double theta = (estimate_theta1(data, fits) - estimate_theta2_dr(data, fits)) / fits.pi_S;
  const auto inf = influence_values(data, fits, theta);
  CHECK(inf.total.lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK(inf.se < 1e-9);
}

TEST_CASE("influence values average to zero on assorted datasets") {
  const auto spec = parse_model_spec("1 + Z1 + Z2", Link::identity);
  const auto sel = parse_model_spec("1 + Z1 + Z2", Link::logit);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    const auto data = random_two_trial_dataset(seed, 50, 1.5);
    const auto fits = fit_nuisances(data, spec, spec, sel);
    const double theta =
        (estimate_theta1(data, fits) - estimate_theta2_dr(data, fits)) / fits.pi_S;
    const auto inf = influence_values(data, fits, theta);
    CHECK(std::abs(inf.total.mean()) < 1e-6);
    CHECK(inf.total.size() == static_cast<Eigen::Index>(data.size()));
    // decomposition is consistent
    CHECK((inf.total - (inf.phi - inf.beta_correction - inf.piS_correction))
              .lpNorm<Eigen::Infinity>() < 1e-12);
  }

  for (int setting : {1, 3, 5}) {
    const auto h = parse_model_spec(outcome_regressors(false), Link::identity);
    const auto s = parse_model_spec(selection_regressors(false), Link::logit);
    const auto data = generate_trial_data(DGPSetting::numbered(setting), 42 + setting);
    const auto fits = fit_nuisances(data, h, h, s);
    const double theta =
        (estimate_theta1(data, fits) - estimate_theta2_dr(data, fits)) / fits.pi_S;
    const auto inf = influence_values(data, fits, theta);
    CHECK(std::abs(inf.total.mean()) < 1e-6);
  }
}

TEST_CASE("sandwich SE is invariant to row permutation") {
  const auto data = generate_trial_data(DGPSetting::numbered(3), 777);
  const auto h = parse_model_spec(outcome_regressors(false), Link::identity);
  const auto sel = parse_model_spec(selection_regressors(false), Link::logit);

  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937 g(17);
  std::shuffle(perm.begin(), perm.end(), g);
  std::vector<Subject> shuffled;
  for (std::size_t i : perm) shuffled.push_back(data.subjects()[i]);
  const TrialDataset permuted(std::move(shuffled), data.covariate_names());

  const auto a = estimate_switcher_effect(data, h, h, sel, EstimatorKind::dr_nonparametric);
  const auto b = estimate_switcher_effect(permuted, h, h, sel, EstimatorKind::dr_nonparametric);
  CHECK(std::abs(*a.se - *b.se) < 1e-10);
}

TEST_CASE("influence SE requires a logistic selection fit") {
  const auto data = random_two_trial_dataset(9, 40);
  const auto spec = parse_model_spec("1 + Z1", Link::identity);
  const auto sel = parse_model_spec("1 + Z1", Link::logit);
  auto fits = fit_nuisances(data, spec, spec, sel);
  fits.sel_fit.link = Link::identity;  // simulate a non-logistic fit
  CHECK_THROWS_AS(influence_values(data, fits, 0.0), SpecError);
}
