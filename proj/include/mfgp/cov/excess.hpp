#pragma once

#include <vector>

#include "mfgp/core/mean_field.hpp"
#include "mfgp/sim/market_sim.hpp"

namespace mfgp::cov {

using core::Matrix;
using core::Vector;

/// Closed-form per-bin covariance of price increments under the
/// identical-preferences model with E0 ~ N(mean, Γ).
struct ExcessPrediction {
  std::vector<double> bin_times;
  std::vector<Matrix> fundamental;  // (bin length) Σ
  std::vector<Matrix> excess;
  std::vector<Matrix> total;
  std::vector<Matrix> R;  // correlation of `total`
  // R = ρ ∘ A + B, with the total covariance in the denominators.
  std::vector<Matrix> A;
  std::vector<Matrix> B;
  // Flow map of each bin: Φ_k(i, ℓ) = ∫_bin μ^i(t; e_ℓ) dt.
  std::vector<Matrix> flow_map;

  std::size_t n_bins() const { return total.size(); }
};

/// Bin integrals of μ for unit initial inventories, from one factorised
/// solve per basis vector.
std::vector<Matrix> bin_flow_maps(const core::MarketParams& params,
                                  const core::TimeGrid& grid,
                                  std::size_t n_bins);

/// excess_k = 𝔸 Φ_k Γ Φ_kᵀ 𝔸 and total_k = fundamental_k + excess_k.
ExcessPrediction theoretical_excess(const core::MarketParams& params,
                                    const sim::InventoryLaw& law,
                                    const core::TimeGrid& grid,
                                    std::size_t n_bins);

/// Split of the crowd flow into the feedback part ∫ℍE (π) and the
/// anticipation part ∫∫𝔾μ (θ), as E0-linear maps per bin.
struct PiThetaDecomposition {
  // P_k(n, m) = Σ_ℓ π_k^{n,ℓ}(e_m), Q_k(n, m) = Σ_ℓ θ_k^{n,ℓ}(e_m).
  std::vector<Matrix> P;
  std::vector<Matrix> Q;
  // Λ_k = (P_k + Q_k) Γ (P_k + Q_k)ᵀ, i.e. the four ⟨·,·⟩ sums.
  std::vector<Matrix> Lambda;
  // α_iα_j · c_ij · Λ_k with c_ij = V_iV_j/(4η_iη_j), which matches
  // the flow-based excess, and with the reciprocal prefactor for comparison.
  std::vector<Matrix> excess_dimensional;
  std::vector<Matrix> excess_reciprocal;
};

PiThetaDecomposition decompose_pi_theta(const core::MarketParams& params,
                                        const sim::InventoryLaw& law,
                                        const core::TimeGrid& grid,
                                        std::size_t n_bins);

}  // namespace mfgp::cov
