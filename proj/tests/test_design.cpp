#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_support.hpp"

using namespace switcheff;

namespace {

// dataset of fixed-low subjects carrying the given covariate rows
TrialDataset covariate_rows(const std::vector<std::vector<double>>& rows,
                            std::vector<std::string> names) {
  std::vector<Subject> subs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Subject s;
    s.id = "r" + std::to_string(i + 1);
    s.trial = 0;
    s.arm = Arm::fixed_low;
    s.covariates = rows[i];
    subs.push_back(std::move(s));
  }
  return TrialDataset(std::move(subs), std::move(names));
}

}  // namespace

TEST_CASE("intercept and main effect columns") {
  const auto data = covariate_rows({{2.0}, {-3.0}}, {"X1"});
  const auto spec = parse_model_spec("1 + X1", Link::identity);
  const Eigen::MatrixXd X = build_design_matrix(spec, data);
  REQUIRE(X.rows() == 2);
  REQUIRE(X.cols() == 2);
  CHECK(X(0, 0) == 1.0);
  CHECK(X(1, 0) == 1.0);
  CHECK(X(0, 1) == 2.0);
  CHECK(X(1, 1) == -3.0);
}

TEST_CASE("interaction columns are elementwise products") {
  const auto data = covariate_rows({{1.0, 0.0}, {2.0, 5.0}}, {"X3", "X6"});
  const auto spec = parse_model_spec("1 + X3:X6", Link::identity);
  const Eigen::MatrixXd X = build_design_matrix(spec, data);
  CHECK(X(0, 1) == 0.0);
  CHECK(X(1, 1) == 10.0);
}

TEST_CASE("log_abs transform matches scalar evaluation") {
  const auto data = covariate_rows({{-M_E}, {M_E}}, {"X1"});
  const auto spec = parse_model_spec("1 + log_abs(X1)", Link::identity);
  const Eigen::MatrixXd X = build_design_matrix(spec, data);
  for (int i = 0; i < 2; ++i) {
    const double direct = std::log(std::abs(data.subjects()[i].covariates[0]));
    CHECK(X(i, 1) == Catch::Approx(direct).margin(1e-15));
    CHECK(X(i, 1) == Catch::Approx(1.0).margin(1e-15));
  }
}

TEST_CASE("design errors") {
  const auto data = covariate_rows({{1.0}, {0.0}}, {"X1"});
  SECTION("unknown covariate") {
    const auto spec = parse_model_spec("1 + X9", Link::identity);
    CHECK_THROWS_AS(build_design_matrix(spec, data), SpecError);
  }
  SECTION("log_abs of exact zero reports row and term") {
    const auto spec = parse_model_spec("1 + log_abs(X1)", Link::identity);
    CHECK_THROWS_WITH(build_design_matrix(spec, data),
                      Catch::Matchers::ContainsSubstring("log_abs(X1)") &&
                          Catch::Matchers::ContainsSubstring("row 2"));
  }
}

TEST_CASE("model spec grammar") {
  SECTION("terms keep their order and labels") {
    const auto spec = parse_model_spec("1 + X1 + X3:X6 + log_abs(X7)", Link::identity);
    REQUIRE(spec.terms.size() == 4);
    const auto labels = spec.term_labels();
    CHECK(labels[0] == "1");
    CHECK(labels[1] == "X1");
    CHECK(labels[2] == "X3:X6");
    CHECK(labels[3] == "log_abs(X7)");
    CHECK(spec.text() == "1 + X1 + X3:X6 + log_abs(X7)");
  }
  SECTION("three-way products parse; deeper nesting does not") {
    const auto spec = parse_model_spec("1 + A:B:C", Link::identity);
    CHECK(spec.terms[1].atoms.size() == 3);
    CHECK_THROWS_AS(parse_model_spec("1 + A:B:C:D", Link::identity), SpecError);
  }
  SECTION("intercept cannot be interacted or duplicated") {
    CHECK_THROWS_AS(parse_model_spec("1 + 1", Link::identity), SpecError);
    CHECK_THROWS_AS(parse_model_spec("X1:1", Link::identity), SpecError);
  }
  SECTION("empty or malformed terms") {
    CHECK_THROWS_AS(parse_model_spec("", Link::identity), SpecError);
    CHECK_THROWS_AS(parse_model_spec("X1 + + X2", Link::identity), SpecError);
    CHECK_THROWS_AS(parse_model_spec("log_abs()", Link::identity), SpecError);
    CHECK_THROWS_AS(parse_model_spec("log_abs(X1", Link::identity), SpecError);
  }
  SECTION("transforms may appear inside interactions") {
    const auto spec = parse_model_spec("log_abs(X7):X9", Link::identity);
    REQUIRE(spec.terms.size() == 1);
    CHECK(spec.terms[0].atoms[0].fn == Transform::log_abs);
    CHECK(spec.terms[0].atoms[1].fn == Transform::none);
  }
}

TEST_CASE("row permutation permutes design rows identically") {
  const TrialDataset data = generate_trial_data(DGPSetting::numbered(3), 11);
  const auto spec = parse_model_spec(outcome_regressors(false), Link::identity);
  const Eigen::MatrixXd X = build_design_matrix(spec, data);

  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937 g(7);
  std::shuffle(perm.begin(), perm.end(), g);

  std::vector<Subject> shuffled;
  for (std::size_t i : perm) shuffled.push_back(data.subjects()[i]);
  const TrialDataset permuted(std::move(shuffled), data.covariate_names());
  const Eigen::MatrixXd Xp = build_design_matrix(spec, permuted);

  REQUIRE(Xp.rows() == X.rows());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    CHECK((Xp.row(static_cast<Eigen::Index>(i)) -
           X.row(static_cast<Eigen::Index>(perm[i]))).lpNorm<Eigen::Infinity>() == 0.0);
  }
}
