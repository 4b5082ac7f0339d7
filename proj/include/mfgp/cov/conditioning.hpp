#pragma once

#include <vector>

#include "mfgp/cov/covariance.hpp"

namespace mfgp::cov {

/// w_{k,l}^i = ν_{k,l}^i / mean_l Σ_k |ν_{k,l}^i|.
struct TradeImbalances {
  std::size_t n_days = 0, n_bins = 0, d = 0;
  std::vector<double> w;  // (day, bin, asset); NaN for excluded assets
  std::vector<bool> excluded;  // asset never trades (zero denominator)
  Vector denominator;

  double at(std::size_t day, std::size_t bin, std::size_t i) const {
    return w[(day * n_bins + bin) * d + i];
  }
};

TradeImbalances trade_imbalances(const sim::MarketPanel& panel);

/// Covariance over days with |w^i| <= λ and |w^j| <= λ in that bin. Uses the
/// same kernel as estimate_covariance, so selecting every day reproduces it
/// exactly. Entries with fewer than two selected days are NaN.
struct ConditionedCovariance {
  double lambda = 1.0;
  std::vector<Matrix> C;
  std::vector<Matrix> se;
  std::vector<CountMatrix> counts;
};

ConditionedCovariance conditioned_covariance(const sim::MarketPanel& panel,
                                             const TradeImbalances& w,
                                             double lambda);
ConditionedCovariance conditioned_covariance(const sim::MarketPanel& panel,
                                             double lambda);

/// Median normalised patterns across assets (diag) and pairs (off).
/// Normaliser: mean over bins of the λ = 1 conditioned covariance.
struct ConditionedPattern {
  double lambda = 1.0;
  Vector diag;  // NaN where no asset is defined
  Vector off;   // NaN where no pair is defined (always for d = 1)
  Vector count_diag;
  Vector count_off;
  // Number of assets / pairs entering each median.
  std::vector<std::size_t> used_diag;
  std::vector<std::size_t> used_off;
};

std::vector<ConditionedPattern> median_patterns(
    const sim::MarketPanel& panel, const std::vector<double>& lambdas);

/// Median of the finite values; NaN when there are none.
double median_of(std::vector<double> values);

}  // namespace mfgp::cov
