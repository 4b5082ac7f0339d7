#pragma once

#include "mfgp/core/mean_field.hpp"

namespace mfgp::core {

/// Optimal speed at a node and its split v* = v1 + v2, where v1 = 2𝕍ℍq is
/// the Almgren-Chriss part and v2 the mean-field correction.
struct SpeedParts {
  Vector total;
  Vector v1;
  Vector v2;
};

/// v*(t_k, q) = Ė(t_k) + 2𝕍ℍ(t_k)(q - E(t_k)).
SpeedParts optimal_speed(const MeanFieldSolution& solution, std::size_t t_index,
                         const Vector& q);

/// 2𝕍ℍ(t_k)q + 2𝕍ℋ(t_k), the feedback written with the linear coefficient.
Vector feedback_speed(const MeanFieldSolution& solution, std::size_t t_index,
                      const Vector& q);

struct AgentTrajectory {
  Path q;
  Path v;
  Path v1;
  Path v2;
  Vector cash;
  Path price;
  double reward_terminal = 0.0;
};

constexpr double kDefaultInitialPrice = 100.0;

/// Trade from q0 along the optimal feedback. The deviation q - E is carried
/// by the Riccati step transition, so q0 = E(0) reproduces E exactly.
/// Each step pays Δq·S_k + Σ_i η_i Δq_i²/(V_i δt). Without `price_path`
/// (n_nodes x d) the expected impacted path S0 + 𝔸(E(t) - E(0)) is used.
AgentTrajectory simulate_agent(const Vector& q0,
                               const MeanFieldSolution& solution,
                               const MarketParams& params,
                               const Path* price_path = nullptr);

}  // namespace mfgp::core
