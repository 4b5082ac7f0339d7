#pragma once

#include <vector>

#include "mfgp/cov/covariance.hpp"

namespace mfgp::cov {

/// OLS fit of C_k = intercept + α² F_k over bins.
struct RegressionFit {
  double alpha_sq = 0.0;
  double alpha_hat = 0.0;  // sqrt(max(alpha_sq, 0))
  double intercept = 0.0;  // δt Σ̂
  double sigma_hat = 0.0;  // intercept / δt
  double se_slope = 0.0;
  double se_intercept = 0.0;
  double p_slope = 1.0;
  double p_intercept = 1.0;
  double corr_cf = 0.0;
  double ci_low = 0.0;  // 95% interval for α²
  double ci_high = 0.0;
  double rss = 0.0;
  std::size_t n = 0;
};

/// Standard errors and two-sided p-values under Gaussian errors (Student t
/// with n - 2 degrees of freedom). Needs n >= 3 and non-constant F.
RegressionFit fit_impact_regression(const std::vector<double>& C,
                                    const std::vector<double>& F,
                                    double dt_bin);

/// Diagonal series C_k^{ii} and F_k^{ii} of asset i, then the fit.
RegressionFit fit_asset_regression(const CovarianceSeries& cov,
                                   const std::vector<Matrix>& flow_cov,
                                   std::size_t asset, double dt_bin);

}  // namespace mfgp::cov
