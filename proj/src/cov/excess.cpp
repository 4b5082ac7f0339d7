#include "mfgp/cov/excess.hpp"

#include "mfgp/core/riccati.hpp"
#include "mfgp/cov/covariance.hpp"
#include "mfgp/errors.hpp"

namespace mfgp::cov {

namespace {

std::size_t steps_per_bin(const core::TimeGrid& grid, std::size_t n_bins) {
  if (n_bins == 0 || grid.n_steps() % n_bins != 0)
    throw InvalidArgument("prediction: bins must be a sub-grid of the solver grid");
  return grid.n_steps() / n_bins;
}

void check_law(const sim::InventoryLaw& law, Eigen::Index d) {
  if (law.Gamma.rows() != d || law.Gamma.cols() != d)
    throw InvalidArgument("prediction: inventory covariance dimension");
  sim::inventory_factor(law.Gamma);  // validates PSD
}

}  // namespace

std::vector<Matrix> bin_flow_maps(const core::MarketParams& params,
                                  const core::TimeGrid& grid,
                                  std::size_t n_bins) {
  params.validate();
  const std::size_t spb = steps_per_bin(grid, n_bins);
  const Eigen::Index d = params.d();
  const auto op = core::MeanFieldOperator::identical(params, grid);
  std::vector<Matrix> maps(n_bins, Matrix(d, d));
  for (Eigen::Index l = 0; l < d; ++l) {
    const core::Path x = op.solve(Vector::Unit(d, l)).x;
    for (std::size_t k = 0; k < n_bins; ++k)
      maps[k].col(l) = (x.row(static_cast<Eigen::Index>((k + 1) * spb)) -
                        x.row(static_cast<Eigen::Index>(k * spb)))
                           .transpose();
  }
  return maps;
}

ExcessPrediction theoretical_excess(const core::MarketParams& params,
                                    const sim::InventoryLaw& law,
                                    const core::TimeGrid& grid,
                                    std::size_t n_bins) {
  check_law(law, params.d());
  ExcessPrediction out;
  out.flow_map = bin_flow_maps(params, grid, n_bins);
  out.bin_times = sim::uniform_bin_times(n_bins, grid.horizon());
  const Matrix Sigma = params.Sigma();
  const Matrix Am = params.impact_matrix();
  const Eigen::Index d = params.d();
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double len = out.bin_times[k + 1] - out.bin_times[k];
    const Matrix fund = len * Sigma;
    const Matrix& Phi = out.flow_map[k];
    Matrix ex = Am * Phi * law.Gamma * Phi.transpose() * Am;
    ex = 0.5 * (ex + ex.transpose());
    const Matrix total = fund + ex;
    Matrix A(d, d), B(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        const double den = std::sqrt(total(i, i) * total(j, j));
        A(i, j) = std::sqrt(len * len * Sigma(i, i) * Sigma(j, j)) / den;
        B(i, j) = ex(i, j) / den;
      }
    out.fundamental.push_back(fund);
    out.excess.push_back(ex);
    out.R.push_back(correlation_from_covariance(total));
    out.total.push_back(total);
    out.A.push_back(std::move(A));
    out.B.push_back(std::move(B));
  }
  return out;
}

PiThetaDecomposition decompose_pi_theta(const core::MarketParams& params,
                                        const sim::InventoryLaw& law,
                                        const core::TimeGrid& grid,
                                        std::size_t n_bins) {
  params.validate();
  check_law(law, params.d());
  const std::size_t spb = steps_per_bin(grid, n_bins);
  const Eigen::Index d = params.d();
  const double dt = grid.dt();
  const auto op = core::MeanFieldOperator::identical(params, grid);
  const auto riccati = core::solve_riccati(params, grid);

  PiThetaDecomposition out;
  out.P.assign(n_bins, Matrix::Zero(d, d));
  out.Q.assign(n_bins, Matrix::Zero(d, d));
  for (Eigen::Index m = 0; m < d; ++m) {
    const auto sol =
        core::solve_mean_field_identical(params, op, riccati, Vector::Unit(d, m));
    for (std::size_t k = 0; k < n_bins; ++k)
      for (std::size_t s = k * spb; s < (k + 1) * spb; ++s) {
        const auto r = static_cast<Eigen::Index>(s);
        // Left-point rule, as for the scheme's own bin integrals.
        out.P[k].col(m) += dt * riccati.H[s] * sol.E.row(r).transpose();
        out.Q[k].col(m) += dt * sol.Hs.row(r).transpose();
      }
  }
  const Vector V = params.V, eta = params.eta, alpha = params.alpha;
  for (std::size_t k = 0; k < n_bins; ++k) {
    const Matrix S = out.P[k] + out.Q[k];
    Matrix L = S * law.Gamma * S.transpose();
    L = 0.5 * (L + L.transpose());
    Matrix dim(d, d), rec(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        const double aa = alpha(i) * alpha(j) * L(i, j);
        dim(i, j) = aa * V(i) * V(j) / (4.0 * eta(i) * eta(j));
        rec(i, j) = aa * eta(i) * eta(j) / (4.0 * V(i) * V(j));
      }
    out.Lambda.push_back(std::move(L));
    out.excess_dimensional.push_back(std::move(dim));
    out.excess_reciprocal.push_back(std::move(rec));
  }
  return out;
}

}  // namespace mfgp::cov
