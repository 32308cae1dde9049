#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "switcheff/switcheff.hpp"

namespace testsupport {

// Independent weighted-least-squares oracle: solves the normal equations
// (X'WX) b = X'Wy by full-pivot LU. Deliberately a different route than
// the library's QR path.
inline Eigen::VectorXd normal_equation_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& w) {
  const Eigen::MatrixXd xtwx = X.transpose() * w.asDiagonal() * X;
  const Eigen::VectorXd xtwy = X.transpose() * w.cwiseProduct(y);
  return Eigen::FullPivLU<Eigen::MatrixXd>(xtwx).solve(xtwy);
}

inline std::filesystem::path temp_dir() {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("switcheff_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  return path.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

// Small synthetic two-trial dataset with one continuous and one binary
// covariate and outcome means shared across trials given the covariates.
inline switcheff::TrialDataset random_two_trial_dataset(std::uint64_t seed, int n_per_group = 30,
                                                        double effect = 0.0) {
  switcheff::Rng rng(seed);
  std::vector<switcheff::Subject> subs;
  int id = 0;
  const auto add = [&](int trial, switcheff::Arm arm, int count) {
    for (int i = 0; i < count; ++i) {
      switcheff::Subject s;
      s.id = "s" + std::to_string(++id);
      s.trial = trial;
      s.arm = arm;
      const double z1 = rng.normal();
      const double z2 = rng.bernoulli(0.5);
      s.covariates = {z1, z2};
      double mean = 1.0 + 0.8 * z1 - 0.5 * z2;
      if (trial == 1 && arm == switcheff::Arm::flexible) {
        s.switched = rng.bernoulli(0.6);
        if (*s.switched) mean += effect;
      }
      s.outcome = rng.normal(mean, 1.0);
      subs.push_back(std::move(s));
    }
  };
  add(1, switcheff::Arm::placebo, n_per_group);
  add(1, switcheff::Arm::flexible, n_per_group);
  add(0, switcheff::Arm::placebo, n_per_group);
  add(0, switcheff::Arm::fixed_low, n_per_group);
  return switcheff::TrialDataset(std::move(subs), {"Z1", "Z2"});
}

}  // namespace testsupport
