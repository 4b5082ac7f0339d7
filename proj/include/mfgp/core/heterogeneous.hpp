#pragma once

#include <vector>

#include "mfgp/core/mean_field.hpp"

namespace mfgp::core {

/// One population class of investors sharing preferences.
struct AgentClass {
  double weight = 1.0;
  double gamma = 0.0;
  Vector A_term;
  Vector E0;
};

struct FixedPointOptions {
  double damping = 1.0;
  std::size_t max_iter = 200;
  // Stop when sup|μ_new - μ| <= tol * (1 + sup|μ_new|).
  double tol = 1e-12;
};

struct HeterogeneousSolution {
  std::vector<MeanFieldSolution> classes;
  Path mu;
  // Sup-norm update per iteration, in iteration order.
  std::vector<double> residuals;
  std::size_t iterations = 0;
  double final_damping = 1.0;
};

/// Damped Picard iteration on the aggregate speed μ. Each sweep solves every
/// class BVP with μ as exogenous forcing and sets μ ← μ + θ(Σ_a w_a Ė^a - μ).
/// θ halves whenever the update grows; three growths in a row raise
/// DivergenceError with the residual history.
HeterogeneousSolution solve_mean_field_heterogeneous(
    const MarketParams& params, const std::vector<AgentClass>& classes,
    const TimeGrid& grid, const FixedPointOptions& options = {});

}  // namespace mfgp::core
