#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace mfgp::calib {

struct NelderMeadOptions {
  std::size_t max_evals = 2000;
  // Converged when the simplex value spread <= ftol·(|f_best| + abs_floor)
  // and its largest vertex distance <= xtol.
  double ftol = 1e-10;
  double abs_floor = 1e-300;
  double xtol = 1e-7;
  double initial_step = 0.15;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  std::size_t evaluations = 0;
  std::size_t iterations = 0;
  bool converged = false;
  // Best value after each evaluation; non-increasing.
  std::vector<double> trace;
};

/// Nelder-Mead simplex search on the unit cube [0,1]^n. Trial points are
/// clamped into the cube, so the objective is only called inside it.
NelderMeadResult nelder_mead_unit_cube(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const NelderMeadOptions& options = {});

}  // namespace mfgp::calib
