#include "mfgp/core/agent.hpp"

#include "mfgp/errors.hpp"

namespace mfgp::core {

namespace {

void check_node(const MeanFieldSolution& s, std::size_t k, const Vector& q) {
  if (k >= s.n_nodes()) throw InvalidArgument("optimal_speed: node out of range");
  if (q.size() != s.E.cols()) throw InvalidArgument("optimal_speed: q size");
}

}  // namespace

SpeedParts optimal_speed(const MeanFieldSolution& solution, std::size_t t_index,
                         const Vector& q) {
  check_node(solution, t_index, q);
  const auto k = static_cast<Eigen::Index>(t_index);
  const Matrix gain = 2.0 * solution.riccati.liquidity.asDiagonal() *
                      solution.riccati.H[t_index];
  SpeedParts out;
  out.total = solution.Edot.row(k).transpose() +
              gain * (q - solution.E.row(k).transpose());
  out.v1 = gain * q;
  out.v2 = out.total - out.v1;
  return out;
}

Vector feedback_speed(const MeanFieldSolution& solution, std::size_t t_index,
                      const Vector& q) {
  check_node(solution, t_index, q);
  const Vector& lv = solution.riccati.liquidity;
  return 2.0 * lv.asDiagonal() * (solution.riccati.H[t_index] * q) +
         2.0 * lv.cwiseProduct(
                   solution.Hs.row(static_cast<Eigen::Index>(t_index)).transpose());
}

AgentTrajectory simulate_agent(const Vector& q0,
                               const MeanFieldSolution& solution,
                               const MarketParams& params,
                               const Path* price_path) {
  const Eigen::Index d = params.d();
  const auto n = static_cast<Eigen::Index>(solution.n_nodes());
  if (q0.size() != d) throw InvalidArgument("simulate_agent: q0 size");
  if (!q0.allFinite()) throw InvalidArgument("simulate_agent: q0 not finite");
  if (solution.E.cols() != d)
    throw InvalidArgument("simulate_agent: solution dimension mismatch");
  if (price_path && (price_path->rows() != n || price_path->cols() != d))
    throw InvalidArgument("simulate_agent: price path does not match the grid");

  AgentTrajectory tr;
  if (price_path) {
    tr.price = *price_path;
  } else {
    tr.price.resize(n, d);
    for (Eigen::Index k = 0; k < n; ++k)
      tr.price.row(k) =
          (kDefaultInitialPrice +
           params.alpha.array() *
               (solution.E.row(k) - solution.E.row(0)).transpose().array())
              .transpose();
  }

  const double dt = solution.grid.dt();
  const Vector cost = params.eta.cwiseQuotient(params.V);
  const Matrix Sigma = params.Sigma();
  tr.q.resize(n, d);
  tr.v.resize(n, d);
  tr.v1.resize(n, d);
  tr.v2.resize(n, d);
  tr.cash = Vector::Zero(n);

  Vector q = q0;
  double risk = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const SpeedParts s = optimal_speed(solution, static_cast<std::size_t>(k), q);
    tr.q.row(k) = q.transpose();
    tr.v.row(k) = s.total.transpose();
    tr.v1.row(k) = s.v1.transpose();
    tr.v2.row(k) = s.v2.transpose();
    if (k + 1 < n) {
      const Vector S = tr.price.row(k).transpose();
      // Deviation from E follows the exact linear flow over the step; the
      // explicit Euler rule blows up once 2δt𝕍|ℍ| > 2.
      const Vector Ek = solution.E.row(k).transpose();
      const Vector En = solution.E.row(k + 1).transpose();
      const Vector next =
          En + solution.riccati.step_transition[static_cast<std::size_t>(k)] *
                   (q - Ek);
      const Vector dq = next - q;
      tr.cash(k + 1) =
          tr.cash(k) - (dq.dot(S) + cost.dot(dq.cwiseAbs2()) / dt);
      risk += q.dot(Sigma * q) * dt;
      q = next;
    }
  }
  const Vector qT = tr.q.row(n - 1).transpose();
  const Vector ST = tr.price.row(n - 1).transpose();
  tr.reward_terminal = tr.cash(n - 1) +
                       qT.dot(ST - params.A_term.cwiseProduct(qT)) -
                       0.5 * params.gamma * risk;
  return tr;
}

}  // namespace mfgp::core
