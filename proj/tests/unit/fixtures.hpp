#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "mfgp/core/market_params.hpp"

namespace fixtures {

using mfgp::core::MarketParams;
using mfgp::core::Matrix;
using mfgp::core::Vector;

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Three-asset market used for the stylised-fact examples.
inline MarketParams three_asset(double gamma, double rho12 = 0.8,
                                double rho13 = 0.0, double rho23 = 0.0) {
  Matrix corr = Matrix::Identity(3, 3);
  corr(0, 1) = corr(1, 0) = rho12;
  corr(0, 2) = corr(2, 0) = rho13;
  corr(1, 2) = corr(2, 1) = rho23;
  return MarketParams::make(vec({0.3, 1.0, 0.3}), corr, vec({2e6, 5e6, 5e6}),
                            vec({0.1, 0.1, 0.4}), vec({8e-4, 8e-4, 6e-4}),
                            Vector::Constant(3, 2.5), gamma, 1.0);
}

inline MarketParams scalar(double sigma, double V, double eta, double alpha,
                           double A, double gamma, double T = 1.0) {
  return MarketParams::make(vec({sigma}), Matrix::Identity(1, 1), vec({V}),
                            vec({eta}), vec({alpha}), vec({A}), gamma, T);
}

// Two-asset market with moderate impact, used for regression and calibration.
inline MarketParams two_asset(double gamma = 1e-5) {
  Matrix corr(2, 2);
  corr << 1.0, 0.4, 0.4, 1.0;
  return MarketParams::make(vec({1.5, 0.5}), corr, vec({2e6, 8e6}),
                            Vector::Ones(2), vec({1e-5, 5e-6}),
                            Vector::Constant(2, 10.0), gamma, 1.0);
}

inline std::filesystem::path scratch_dir(const std::string& tag) {
  std::random_device rd;
  auto p = std::filesystem::temp_directory_path() /
           ("mfgp_" + tag + "_" + std::to_string(rd()));
  std::filesystem::create_directories(p);
  return p;
}

inline double sup_diff(const Eigen::Ref<const Eigen::MatrixXd>& a,
                       const Eigen::Ref<const Eigen::MatrixXd>& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace fixtures
