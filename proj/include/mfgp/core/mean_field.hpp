#pragma once

#include <memory>
#include <optional>

#include "mfgp/core/market_params.hpp"
#include "mfgp/core/riccati.hpp"
#include "mfgp/core/time_grid.hpp"

namespace mfgp::core {

// Node-major paths: row k holds the value at t_k.
using Path = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;

struct BvpSolution {
  Path x;  // inventory E(t_k)
  Path y;  // speed Ė(t_k)
};

/// How the permanent-impact term -2𝕍𝔸μ enters the discrete scheme.
enum class Coupling {
  // μ = Ė of the same population (identical preferences): implicit term.
  kSelf,
  // μ is an exogenous forcing supplied to solve().
  kExogenous,
};

/// Factorised implicit scheme for Ë = -2𝕍𝔸μ + 2γ𝕍ΣE,
/// E(0) = E0, Ė(T) + 4𝕍A E(T) = 0:
///
///   x_0 = E0
///   x_k - x_{k-1} - δt y_{k-1} = 0
///   y_k - y_{k-1} - δt (2γ𝕍Σ x_k - 2𝕍𝔸 μ_k) = 0
///   4𝕍A x_N + y_N = 0
///
/// The system is assembled once over all (x_k, y_k) and LU-factorised, so
/// repeated solves (basis vectors, fixed-point sweeps) only back-substitute.
class MeanFieldOperator {
 public:
  MeanFieldOperator(const Vector& liquidity, const Matrix& Sigma, double gamma,
                    const Vector& A_term, const Vector& alpha,
                    const TimeGrid& grid, Coupling coupling);

  static MeanFieldOperator identical(const MarketParams& params,
                                     const TimeGrid& grid) {
    return {params.liquidity(), params.Sigma(), params.gamma, params.A_term,
            params.alpha,       grid,           Coupling::kSelf};
  }

  /// `forcing` (n_nodes x d, row k = μ_k) is required for kExogenous and
  /// ignored for kSelf.
  BvpSolution solve(const Vector& E0,
                    const Path* forcing = nullptr) const;

  const TimeGrid& grid() const { return grid_; }
  Eigen::Index d() const { return liquidity_.size(); }
  Coupling coupling() const { return coupling_; }

 private:
  struct Factorization;

  Vector liquidity_;
  Vector alpha_;
  TimeGrid grid_;
  Coupling coupling_;
  std::shared_ptr<const Factorization> lu_;
};

/// Equilibrium of one population class on a grid.
struct MeanFieldSolution {
  TimeGrid grid{1, 1.0};
  Path E;
  Path Edot;
  Path mu;   // aggregate mean field seen by this class
  Path Hs;   // ℋ(t_k)
  Vector h;  // h(t_k)
  RiccatiPath riccati;

  std::size_t n_nodes() const { return static_cast<std::size_t>(E.rows()); }
};

/// Backward recursion for ℋ (ℋ̇ = -𝔸μ - 2ℍ𝕍ℋ, ℋ(T) = 0) using the Riccati
/// path's transition factors, with μ held at its left node over each step.
Path linear_coefficient(const RiccatiPath& riccati, const Vector& alpha,
                        const Path& mu);

/// h(t) = ∫_t^T 𝕍ℋ·ℋ ds by the trapezoid rule.
Vector value_constant(const RiccatiPath& riccati, const Path& Hs);

/// Identical-preferences equilibrium for initial mean inventory E0.
MeanFieldSolution solve_mean_field_identical(const MarketParams& params,
                                             const Vector& E0,
                                             const TimeGrid& grid);

/// Same as above, reusing an already factorised operator and Riccati path.
MeanFieldSolution solve_mean_field_identical(const MarketParams& params,
                                             const MeanFieldOperator& op,
                                             const RiccatiPath& riccati,
                                             const Vector& E0);

/// max_k |Ė(T) + 4𝕍A E(T)|, the discrete terminal condition residual.
double boundary_residual(const MarketParams& params,
                         const MeanFieldSolution& sol);

}  // namespace mfgp::core
