#include "mfgp/calib/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mfgp/errors.hpp"

namespace mfgp::calib {

using Eigen::VectorXd;

NelderMeadResult nelder_mead_unit_cube(
    const std::function<double(const VectorXd&)>& f, const VectorXd& x0,
    const NelderMeadOptions& options) {
  const Eigen::Index n = x0.size();
  if (n == 0) throw InvalidArgument("nelder_mead: empty start point");
  if ((x0.array() < 0.0).any() || (x0.array() > 1.0).any())
    throw InvalidArgument("nelder_mead: start point outside the unit cube");

  NelderMeadResult res;
  double best = std::numeric_limits<double>::infinity();
  auto eval = [&](VectorXd x) {
    x = x.cwiseMax(0.0).cwiseMin(1.0);
    double v = f(x);
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    ++res.evaluations;
    best = std::min(best, v);
    res.trace.push_back(best);
    return std::make_pair(x, v);
  };

  std::vector<VectorXd> pts;
  std::vector<double> vals;
  {
    auto [x, v] = eval(x0);
    pts.push_back(x);
    vals.push_back(v);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorXd x = x0;
    // Step inward when the start sits near the upper face.
    x(i) += x0(i) + options.initial_step <= 1.0 ? options.initial_step
                                                : -options.initial_step;
    auto [xc, v] = eval(x);
    pts.push_back(xc);
    vals.push_back(v);
  }

  std::vector<std::size_t> order(pts.size());
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t lo = order.front(), hi = order.back(),
                      nh = order[order.size() - 2];

    double spread = 0.0;
    for (const auto& p : pts) spread = std::max(spread, (p - pts[lo]).cwiseAbs().maxCoeff());
    if (std::isfinite(vals[hi]) &&
        vals[hi] - vals[lo] <= options.ftol * (std::abs(vals[lo]) + options.abs_floor) &&
        spread <= options.xtol) {
      res.converged = true;
      break;
    }
    if (spread == 0.0) {
      // Collapsed onto a face of the cube; nothing left to explore.
      res.converged = true;
      break;
    }
    if (res.evaluations + 2 > options.max_evals) break;
    ++res.iterations;

    VectorXd centroid = VectorXd::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != hi) centroid += pts[i];
    centroid /= static_cast<double>(n);

    auto [xr, fr] = eval(centroid + (centroid - pts[hi]));
    if (fr < vals[lo]) {
      auto [xe, fe] = eval(centroid + 2.0 * (centroid - pts[hi]));
      if (fe < fr) {
        pts[hi] = xe;
        vals[hi] = fe;
      } else {
        pts[hi] = xr;
        vals[hi] = fr;
      }
      continue;
    }
    if (fr < vals[nh]) {
      pts[hi] = xr;
      vals[hi] = fr;
      continue;
    }
    const bool outside = fr < vals[hi];
    auto [xc, fc] = eval(outside ? VectorXd(centroid + 0.5 * (xr - centroid))
                                 : VectorXd(centroid + 0.5 * (pts[hi] - centroid)));
    if (fc < (outside ? fr : vals[hi])) {
      pts[hi] = xc;
      vals[hi] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == lo) continue;
      if (res.evaluations >= options.max_evals) break;
      auto [xs, fs] = eval(pts[lo] + 0.5 * (pts[i] - pts[lo]));
      pts[i] = xs;
      vals[i] = fs;
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.f = *it;
  return res;
}

}  // namespace mfgp::calib
