#pragma once

#include <vector>

#include "mfgp/sim/market_sim.hpp"

namespace mfgp::cov {

using core::Matrix;
using core::Vector;
using CountMatrix = Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-bin realised covariance and correlation of price increments.
struct CovarianceSeries {
  std::vector<Matrix> C;
  // NaN where a diagonal variance is zero (correlation undefined).
  std::vector<Matrix> R;
  // Standard error of each C entry: sd of the per-day centred products / √n.
  std::vector<Matrix> se;
  std::vector<CountMatrix> counts;

  std::size_t n_bins() const { return C.size(); }
};

/// Sample covariance of (a_l, b_l) over days with mask_l set, with the
/// means taken over the selected days. NaN when fewer than two days.
struct PairEstimate {
  double cov = 0.0;
  double se = 0.0;
  Eigen::Index count = 0;
};
PairEstimate pair_covariance(const double* a, const double* b,
                             const unsigned char* mask, std::size_t n,
                             std::size_t stride);

/// R_ij = C_ij / sqrt(C_ii C_jj), NaN where a diagonal entry is not positive.
Matrix correlation_from_covariance(const Matrix& C);

/// C_k^{ij} = (N-1)⁻¹ Σ_l (δS^{i,k,l} - mean)(δS^{j,k,l} - mean).
/// Requires at least two days and a uniform bin grid.
CovarianceSeries estimate_covariance(const sim::MarketPanel& panel);

/// Across-day covariance of the net flows per bin (N-1 normalisation).
std::vector<Matrix> flow_covariance(const sim::MarketPanel& panel);

/// Checks that bin lengths agree to relative 1e-9; throws InvalidArgument.
void require_uniform_bins(const sim::MarketPanel& panel);

}  // namespace mfgp::cov
