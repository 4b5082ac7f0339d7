#include "mfgp/core/heterogeneous.hpp"

#include <cmath>
#include <sstream>

#include "mfgp/errors.hpp"

namespace mfgp::core {

namespace {

void validate_classes(const std::vector<AgentClass>& classes, Eigen::Index d) {
  if (classes.empty()) throw InvalidArgument("heterogeneous: no classes");
  double total = 0.0;
  for (const auto& c : classes) {
    if (!(c.weight >= 0.0)) throw InvalidArgument("heterogeneous: negative weight");
    if (!(c.gamma >= 0.0)) throw InvalidArgument("heterogeneous: gamma < 0");
    if (c.A_term.size() != d || c.E0.size() != d)
      throw InvalidArgument("heterogeneous: class dimension mismatch");
    if ((c.A_term.array() <= 0.0).any())
      throw InvalidArgument("heterogeneous: class terminal penalty must be positive");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidArgument("heterogeneous: class weights must sum to 1");
}

}  // namespace

HeterogeneousSolution solve_mean_field_heterogeneous(
    const MarketParams& params, const std::vector<AgentClass>& classes,
    const TimeGrid& grid, const FixedPointOptions& options) {
  params.validate();
  const Eigen::Index d = params.d();
  validate_classes(classes, d);
  if (!(options.damping > 0.0 && options.damping <= 1.0))
    throw InvalidArgument("heterogeneous: damping must lie in (0, 1]");
  if (options.max_iter == 0) throw InvalidArgument("heterogeneous: max_iter = 0");

  const Vector liquidity = params.liquidity();
  const Matrix Sigma = params.Sigma();
  std::vector<MeanFieldOperator> ops;
  ops.reserve(classes.size());
  for (const auto& c : classes)
    ops.emplace_back(liquidity, Sigma, c.gamma, c.A_term, params.alpha, grid,
                     Coupling::kExogenous);

  const auto rows = static_cast<Eigen::Index>(grid.n_nodes());
  auto sweep = [&](const Path& mu, std::vector<BvpSolution>* keep) {
    Path next = Path::Zero(rows, d);
    for (std::size_t a = 0; a < classes.size(); ++a) {
      BvpSolution s = ops[a].solve(classes[a].E0, &mu);
      next += classes[a].weight * s.y;
      if (keep) keep->push_back(std::move(s));
    }
    return next;
  };

  HeterogeneousSolution out;
  Path mu = Path::Zero(rows, d);
  double theta = options.damping;
  int growth = 0;
  bool converged = false;
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    const Path target = sweep(mu, nullptr);
    const double update = (target - mu).cwiseAbs().maxCoeff();
    const double scale = 1.0 + target.cwiseAbs().maxCoeff();
    out.residuals.push_back(update);
    out.iterations = it + 1;
    if (!std::isfinite(update))
      throw DivergenceError("heterogeneous: non-finite iterate",
                            params.alpha.cwiseAbs().maxCoeff(), out.residuals);
    if (update <= options.tol * scale) {
      mu = target;
      converged = true;
      break;
    }
    if (out.residuals.size() >= 2 &&
        update > out.residuals[out.residuals.size() - 2]) {
      if (++growth >= 3) {
        std::ostringstream os;
        os << "heterogeneous: fixed point not contracting (|A| = "
           << params.alpha.cwiseAbs().maxCoeff() << ", last update " << update
           << ")";
        throw DivergenceError(os.str(), params.alpha.cwiseAbs().maxCoeff(),
                              out.residuals);
      }
      theta *= 0.5;
    } else {
      growth = 0;
    }
    mu += theta * (target - mu);
  }
  if (!converged) {
    std::ostringstream os;
    os << "heterogeneous: no convergence in " << options.max_iter
       << " iterations (last update " << out.residuals.back() << ")";
    throw DivergenceError(os.str(), params.alpha.cwiseAbs().maxCoeff(),
                          out.residuals);
  }
  out.final_damping = theta;

  std::vector<BvpSolution> finals;
  sweep(mu, &finals);
  out.mu = mu;
  out.classes.reserve(classes.size());
  for (std::size_t a = 0; a < classes.size(); ++a) {
    MeanFieldSolution s;
    s.grid = grid;
    s.E = std::move(finals[a].x);
    s.Edot = std::move(finals[a].y);
    s.mu = mu;
    s.riccati = solve_riccati(liquidity, Sigma, classes[a].gamma,
                              classes[a].A_term, grid);
    s.Hs = linear_coefficient(s.riccati, params.alpha, mu);
    s.h = value_constant(s.riccati, s.Hs);
    out.classes.push_back(std::move(s));
  }
  return out;
}

}  // namespace mfgp::core
