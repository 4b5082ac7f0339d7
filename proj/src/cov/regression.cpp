#include "mfgp/cov/regression.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <algorithm>
#include <cmath>

#include "mfgp/errors.hpp"

namespace mfgp::cov {

namespace {

double two_sided_p(double coef, double se, double dof) {
  if (se == 0.0) return coef == 0.0 ? 1.0 : 0.0;
  const double t = std::abs(coef / se);
  if (!std::isfinite(t)) return 0.0;
  const boost::math::students_t dist(dof);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)),
                    0.0, 1.0);
}

}  // namespace

RegressionFit fit_impact_regression(const std::vector<double>& C,
                                    const std::vector<double>& F,
                                    double dt_bin) {
  if (C.size() != F.size()) throw InvalidArgument("regression: series length mismatch");
  if (C.size() < 3) throw InvalidArgument("regression: need at least 3 bins");
  if (!(dt_bin > 0.0)) throw InvalidArgument("regression: bin length must be positive");
  const std::size_t n = C.size();
  const double m = static_cast<double>(n);
  double mc = 0.0, mf = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(C[k]) || !std::isfinite(F[k]))
      throw InvalidArgument("regression: non-finite input");
    mc += C[k];
    mf += F[k];
  }
  mc /= m;
  mf /= m;
  double sff = 0.0, scc = 0.0, sfc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sff += (F[k] - mf) * (F[k] - mf);
    scc += (C[k] - mc) * (C[k] - mc);
    sfc += (F[k] - mf) * (C[k] - mc);
  }
  if (!(sff > 0.0)) throw InvalidArgument("regression: F has zero variance; slope undefined");

  RegressionFit fit;
  fit.n = n;
  fit.alpha_sq = sfc / sff;
  fit.intercept = mc - fit.alpha_sq * mf;
  fit.alpha_hat = std::sqrt(std::max(fit.alpha_sq, 0.0));
  fit.sigma_hat = fit.intercept / dt_bin;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = C[k] - fit.intercept - fit.alpha_sq * F[k];
    fit.rss += r * r;
  }
  const double dof = m - 2.0;
  const double s2 = fit.rss / dof;
  fit.se_slope = std::sqrt(s2 / sff);
  fit.se_intercept = std::sqrt(s2 * (1.0 / m + mf * mf / sff));
  fit.p_slope = two_sided_p(fit.alpha_sq, fit.se_slope, dof);
  fit.p_intercept = two_sided_p(fit.intercept, fit.se_intercept, dof);
  fit.corr_cf = scc > 0.0 ? std::clamp(sfc / std::sqrt(sff * scc), -1.0, 1.0) : 0.0;
  const boost::math::students_t dist(dof);
  const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
  fit.ci_low = fit.alpha_sq - q * fit.se_slope;
  fit.ci_high = fit.alpha_sq + q * fit.se_slope;
  return fit;
}

RegressionFit fit_asset_regression(const CovarianceSeries& cov,
                                   const std::vector<Matrix>& flow_cov,
                                   std::size_t asset, double dt_bin) {
  if (cov.n_bins() != flow_cov.size())
    throw InvalidArgument("regression: covariance and flow bins differ");
  const auto i = static_cast<Eigen::Index>(asset);
  std::vector<double> C, F;
  for (std::size_t k = 0; k < cov.n_bins(); ++k) {
    if (i >= cov.C[k].rows()) throw InvalidArgument("regression: asset index");
    C.push_back(cov.C[k](i, i));
    F.push_back(flow_cov[k](i, i));
  }
  return fit_impact_regression(C, F, dt_bin);
}

}  // namespace mfgp::cov
