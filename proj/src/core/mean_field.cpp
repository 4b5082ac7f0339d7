#include "mfgp/core/mean_field.hpp"

#include <Eigen/SparseLU>
#include <vector>

#include "mfgp/errors.hpp"

namespace mfgp::core {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

struct MeanFieldOperator::Factorization {
  SparseMatrix A;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  // Row offsets of the μ-forcing equations, used to place the exogenous term.
  Matrix forcing_gain;  // 2 δt 𝕍𝔸 (d x d)
};

namespace {

// Unknown layout: node k occupies [2dk, 2dk + d) for x_k and
// [2dk + d, 2dk + 2d) for y_k.
struct Layout {
  Eigen::Index d;
  Eigen::Index x(std::size_t k, Eigen::Index i) const {
    return 2 * d * static_cast<Eigen::Index>(k) + i;
  }
  Eigen::Index y(std::size_t k, Eigen::Index i) const {
    return 2 * d * static_cast<Eigen::Index>(k) + d + i;
  }
};

void add_block(std::vector<Eigen::Triplet<double>>& t, Eigen::Index row0,
               Eigen::Index col0, const Matrix& block) {
  for (Eigen::Index i = 0; i < block.rows(); ++i)
    for (Eigen::Index j = 0; j < block.cols(); ++j)
      if (block(i, j) != 0.0) t.emplace_back(row0 + i, col0 + j, block(i, j));
}

}  // namespace

MeanFieldOperator::MeanFieldOperator(const Vector& liquidity,
                                     const Matrix& Sigma, double gamma,
                                     const Vector& A_term, const Vector& alpha,
                                     const TimeGrid& grid, Coupling coupling)
    : liquidity_(liquidity), alpha_(alpha), grid_(grid), coupling_(coupling) {
  const Eigen::Index d = liquidity.size();
  if (d == 0 || Sigma.rows() != d || Sigma.cols() != d ||
      A_term.size() != d || alpha.size() != d)
    throw InvalidArgument("MeanFieldOperator: dimension mismatch");

  const std::size_t N = grid.n_steps();
  const double dt = grid.dt();
  const Layout L{d};
  const Matrix I = Matrix::Identity(d, d);
  const Matrix Vm = liquidity.asDiagonal();
  const Matrix gain = 2.0 * dt * Vm * Matrix(alpha.asDiagonal());
  const Matrix risk = -2.0 * dt * gamma * Vm * Sigma;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(d * d) * (5 * N + 4));
  Eigen::Index row = 0;
  add_block(trip, row, L.x(0, 0), I);
  row += d;
  for (std::size_t k = 1; k <= N; ++k) {
    add_block(trip, row, L.x(k, 0), I);
    add_block(trip, row, L.x(k - 1, 0), -I);
    add_block(trip, row, L.y(k - 1, 0), -dt * I);
    row += d;
    add_block(trip, row, L.y(k, 0),
              coupling == Coupling::kSelf ? Matrix(I + gain) : I);
    add_block(trip, row, L.y(k - 1, 0), -I);
    add_block(trip, row, L.x(k, 0), risk);
    row += d;
  }
  add_block(trip, row, L.x(N, 0), 4.0 * Vm * Matrix(A_term.asDiagonal()));
  add_block(trip, row, L.y(N, 0), I);
  row += d;

  auto fac = std::make_shared<Factorization>();
  fac->A.resize(row, row);
  fac->A.setFromTriplets(trip.begin(), trip.end());
  fac->A.makeCompressed();
  fac->lu.analyzePattern(fac->A);
  fac->lu.factorize(fac->A);
  if (fac->lu.info() != Eigen::Success)
    throw SolverFailure("MeanFieldOperator: singular scheme matrix (" +
                        fac->lu.lastErrorMessage() + ")");
  fac->forcing_gain = gain;
  lu_ = std::move(fac);
}

BvpSolution MeanFieldOperator::solve(const Vector& E0,
                                     const Path* forcing) const {
  const Eigen::Index d = this->d();
  const std::size_t N = grid_.n_steps();
  if (E0.size() != d) throw InvalidArgument("MeanFieldOperator: E0 size");
  if (!E0.allFinite()) throw InvalidArgument("MeanFieldOperator: E0 not finite");

  Vector rhs = Vector::Zero(lu_->A.rows());
  rhs.head(d) = E0;
  if (coupling_ == Coupling::kExogenous) {
    if (forcing == nullptr || forcing->rows() != static_cast<Eigen::Index>(N + 1) ||
        forcing->cols() != d)
      throw InvalidArgument("MeanFieldOperator: exogenous forcing required");
    // Speed equation of step k sits at rows d + 2d(k-1) + d.
    for (std::size_t k = 1; k <= N; ++k) {
      const Eigen::Index r = d + 2 * d * static_cast<Eigen::Index>(k - 1) + d;
      rhs.segment(r, d) = -lu_->forcing_gain * forcing->row(k).transpose();
    }
  }

  Vector z = lu_->lu.solve(rhs);
  // One step of iterative refinement tightens the terminal condition.
  const Vector r = rhs - lu_->A * z;
  z += lu_->lu.solve(r);
  if (!z.allFinite()) throw SolverFailure("MeanFieldOperator: non-finite solve");

  BvpSolution out;
  out.x.resize(static_cast<Eigen::Index>(N + 1), d);
  out.y.resize(static_cast<Eigen::Index>(N + 1), d);
  const Layout L{d};
  for (std::size_t k = 0; k <= N; ++k) {
    out.x.row(static_cast<Eigen::Index>(k)) = z.segment(L.x(k, 0), d);
    out.y.row(static_cast<Eigen::Index>(k)) = z.segment(L.y(k, 0), d);
  }
  return out;
}

Path linear_coefficient(const RiccatiPath& riccati, const Vector& alpha,
                        const Path& mu) {
  const std::size_t N = riccati.grid.n_steps();
  const Eigen::Index d = riccati.liquidity.size();
  Path Hs = Path::Zero(static_cast<Eigen::Index>(N + 1), d);
  Vector next = Vector::Zero(d);
  for (std::size_t k = N; k-- > 0;) {
    const Vector forcing =
        alpha.cwiseProduct(mu.row(static_cast<Eigen::Index>(k)).transpose());
    const Vector cur = riccati.step_transition[k].transpose() * next +
                       riccati.step_integral[k].transpose() * forcing;
    Hs.row(static_cast<Eigen::Index>(k)) = cur.transpose();
    next = cur;
  }
  return Hs;
}

Vector value_constant(const RiccatiPath& riccati, const Path& Hs) {
  const std::size_t N = riccati.grid.n_steps();
  const double dt = riccati.grid.dt();
  Vector h = Vector::Zero(static_cast<Eigen::Index>(N + 1));
  auto density = [&](std::size_t k) {
    const auto row = Hs.row(static_cast<Eigen::Index>(k));
    return (row.array().square() * riccati.liquidity.transpose().array()).sum();
  };
  for (std::size_t k = N; k-- > 0;)
    h(static_cast<Eigen::Index>(k)) =
        h(static_cast<Eigen::Index>(k + 1)) +
        0.5 * dt * (density(k) + density(k + 1));
  return h;
}

MeanFieldSolution solve_mean_field_identical(const MarketParams& params,
                                             const MeanFieldOperator& op,
                                             const RiccatiPath& riccati,
                                             const Vector& E0) {
  if (op.coupling() != Coupling::kSelf)
    throw InvalidArgument("solve_mean_field_identical: needs a kSelf operator");
  BvpSolution bvp = op.solve(E0);
  MeanFieldSolution sol;
  sol.grid = op.grid();
  sol.E = std::move(bvp.x);
  sol.Edot = bvp.y;
  sol.mu = std::move(bvp.y);
  sol.riccati = riccati;
  sol.Hs = linear_coefficient(riccati, params.alpha, sol.mu);
  sol.h = value_constant(riccati, sol.Hs);
  return sol;
}

MeanFieldSolution solve_mean_field_identical(const MarketParams& params,
                                             const Vector& E0,
                                             const TimeGrid& grid) {
  params.validate();
  if (E0.size() != params.d())
    throw InvalidArgument("solve_mean_field_identical: E0 size");
  const auto op = MeanFieldOperator::identical(params, grid);
  const auto riccati = solve_riccati(params, grid);
  return solve_mean_field_identical(params, op, riccati, E0);
}

double boundary_residual(const MarketParams& params,
                         const MeanFieldSolution& sol) {
  const Eigen::Index N = sol.E.rows() - 1;
  const Vector ET = sol.E.row(N).transpose();
  const Vector res = sol.Edot.row(N).transpose() +
                     4.0 * params.liquidity().cwiseProduct(
                               params.A_term.cwiseProduct(ET));
  return res.cwiseAbs().maxCoeff();
}

}  // namespace mfgp::core
