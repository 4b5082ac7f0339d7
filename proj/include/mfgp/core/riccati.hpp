#pragma once

#include <cstddef>
#include <vector>

#include "mfgp/core/market_params.hpp"
#include "mfgp/core/time_grid.hpp"

namespace mfgp::core {

/// Solution of dℍ/dt = -2ℍ𝕍ℍ + γΣ, ℍ(T) = -2A on a TimeGrid.
///
/// Besides the node values, the path keeps two per-step factors of the
/// linearised flow (ℍ = Y X⁻¹ with dX/dt = 2𝕍ℍX):
///   step_transition[k] = X(t_{k+1}) X(t_k)⁻¹
///   step_integral[k]   = ∫_{t_k}^{t_{k+1}} X(w) X(t_k)⁻¹ dw
/// They give the propagator and the linear coefficient ℋ without re-solving
/// a stiff ODE.
struct RiccatiPath {
  TimeGrid grid{1, 1.0};
  Vector liquidity;  // 𝕍 diagonal used for the solve
  std::vector<Matrix> H;
  std::vector<Matrix> step_transition;
  std::vector<Matrix> step_integral;
  std::size_t substeps_per_step = 1;

  std::size_t n_nodes() const { return H.size(); }
};

/// Solve the matrix Riccati equation backward from T for a single risk
/// aversion `gamma` and terminal penalty diagonal `A_term`.
///
/// Checks -2A - TγΣ ≤ ℍ(t) ≤ 0 at every node and throws SolverFailure when
/// the bound is broken beyond round-off.
RiccatiPath solve_riccati(const Vector& liquidity, const Matrix& Sigma,
                          double gamma, const Vector& A_term,
                          const TimeGrid& grid);

inline RiccatiPath solve_riccati(const MarketParams& params,
                                 const TimeGrid& grid) {
  return solve_riccati(params.liquidity(), params.Sigma(), params.gamma,
                       params.A_term, grid);
}

/// 𝔾(t_i, t_j) = Ψ(t_i, t_j) 𝔸, where ∂_w Ψ(t, w) = Ψ(t, w) 2ℍ(w)𝕍 and
/// Ψ(t, t) = I. Equal to exp{∫_t^w 2ℍ𝕍 ds} 𝔸 whenever the ℍ𝕍 family
/// commutes.
Matrix propagator_G(const RiccatiPath& riccati, const Vector& alpha,
                    std::size_t t_index, std::size_t w_index);

/// Relative size of [ℍ(t)𝕍, Σ_{s=t}^{w-1} ℍ(s)𝕍 δt]. Zero when the
/// commutation property holds.
double commutator_defect(const RiccatiPath& riccati, std::size_t t_index,
                         std::size_t w_index);

}  // namespace mfgp::core
