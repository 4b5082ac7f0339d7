#include "mfgp/core/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "mfgp/errors.hpp"

namespace mfgp::core {

namespace {

// Largest h·sqrt(ρ(2γ𝕍Σ)) allowed per substep; keeps exp(-Mh) well scaled.
constexpr double kMaxStiffnessPerSubstep = 1.0;

void check_bound(const Matrix& H, const Matrix& lower, double tol,
                 std::size_t node) {
  if (!H.allFinite()) {
    std::ostringstream os;
    os << "solve_riccati: non-finite value at node " << node;
    throw SolverFailure(os.str());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> upper_es(H, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> lower_es(H - lower,
                                                 Eigen::EigenvaluesOnly);
  const double top = upper_es.eigenvalues().maxCoeff();
  const double bottom = lower_es.eigenvalues().minCoeff();
  if (top > tol || bottom < -tol) {
    std::ostringstream os;
    os << "solve_riccati: bound -2A - TγΣ <= H <= 0 violated at node " << node
       << " (max eig " << top << ", min eig of H - lower " << bottom << ")";
    throw SolverFailure(os.str());
  }
}

}  // namespace

RiccatiPath solve_riccati(const Vector& liquidity, const Matrix& Sigma,
                          double gamma, const Vector& A_term,
                          const TimeGrid& grid) {
  const Eigen::Index d = liquidity.size();
  if (d == 0 || Sigma.rows() != d || Sigma.cols() != d || A_term.size() != d)
    throw InvalidArgument("solve_riccati: dimension mismatch");
  if (gamma < 0.0) throw InvalidArgument("solve_riccati: gamma < 0");
  if ((A_term.array() <= 0.0).any())
    throw InvalidArgument("solve_riccati: terminal penalty must be positive");

  const Matrix Vm = liquidity.asDiagonal();
  const Matrix I = Matrix::Identity(d, d);

  // Rate of the linear flow d/dt [X; Y] = M [X; Y].
  const Vector sqrtV = liquidity.cwiseSqrt();
  const Matrix scaled = sqrtV.asDiagonal() * Sigma * sqrtV.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (scaled + scaled.transpose()),
                                           Eigen::EigenvaluesOnly);
  const double rate =
      std::sqrt(std::max(0.0, 2.0 * gamma * es.eigenvalues().maxCoeff()));
  const double stiffness = rate * grid.dt();
  if (stiffness > 1e7)
    throw SolverFailure("solve_riccati: step too stiff for the grid");
  const auto substeps = static_cast<std::size_t>(
      std::max(1.0, std::ceil(stiffness / kMaxStiffnessPerSubstep)));
  const double h = grid.dt() / static_cast<double>(substeps);

  Matrix M = Matrix::Zero(2 * d, 2 * d);
  M.topRightCorner(d, d) = 2.0 * Vm;
  M.bottomLeftCorner(d, d) = gamma * Sigma;

  // Backward transition exp(-Mh) and its integral ∫_0^h exp(-Ms) ds, read
  // off one augmented exponential.
  Matrix aug = Matrix::Zero(4 * d, 4 * d);
  aug.topLeftCorner(2 * d, 2 * d) = -M * h;
  aug.topRightCorner(2 * d, 2 * d) = Matrix::Identity(2 * d, 2 * d) * h;
  const Matrix aug_exp = aug.exp();
  const Matrix Phi = aug_exp.topLeftCorner(2 * d, 2 * d);
  const Matrix W = aug_exp.topRightCorner(2 * d, 2 * d);
  const Matrix P11 = Phi.topLeftCorner(d, d), P12 = Phi.topRightCorner(d, d);
  const Matrix P21 = Phi.bottomLeftCorner(d, d),
               P22 = Phi.bottomRightCorner(d, d);
  const Matrix W11 = W.topLeftCorner(d, d), W12 = W.topRightCorner(d, d);

  const std::size_t N = grid.n_steps();
  RiccatiPath path;
  path.grid = grid;
  path.liquidity = liquidity;
  path.substeps_per_step = substeps;
  path.H.assign(N + 1, Matrix());
  path.step_transition.assign(N, Matrix());
  path.step_integral.assign(N, Matrix());

  const Matrix lower = -2.0 * Matrix(A_term.asDiagonal()) -
                       grid.horizon() * gamma * Sigma;
  const double tol =
      1e-9 * (2.0 * A_term.maxCoeff() + grid.horizon() * gamma *
                                            Sigma.cwiseAbs().maxCoeff()) +
      1e-300;

  Matrix H = -2.0 * Matrix(A_term.asDiagonal());
  path.H[N] = H;
  for (std::size_t k = N; k-- > 0;) {
    Matrix transition = I;
    Matrix integral = Matrix::Zero(d, d);
    for (std::size_t j = 0; j < substeps; ++j) {
      const Matrix f = P11 + P12 * H;
      const Eigen::PartialPivLU<Matrix> lu(f);
      const Matrix finv = lu.inverse();
      const Matrix q = (W11 + W12 * H) * finv;
      Matrix Hn = (P21 + P22 * H) * finv;
      H = 0.5 * (Hn + Hn.transpose());
      integral = q + integral * finv;
      transition = transition * finv;
    }
    check_bound(H, lower, tol, k);
    path.H[k] = H;
    path.step_transition[k] = transition;
    path.step_integral[k] = integral;
  }
  return path;
}

Matrix propagator_G(const RiccatiPath& riccati, const Vector& alpha,
                    std::size_t t_index, std::size_t w_index) {
  if (t_index > w_index || w_index >= riccati.n_nodes())
    throw InvalidArgument("propagator_G: need t_index <= w_index < n_nodes");
  const Eigen::Index d = riccati.liquidity.size();
  if (alpha.size() != d) throw InvalidArgument("propagator_G: alpha size");
  // X(w) X(t)⁻¹ = T_{w-1} ··· T_t
  Matrix forward = Matrix::Identity(d, d);
  for (std::size_t k = t_index; k < w_index; ++k)
    forward = riccati.step_transition[k] * forward;
  return forward.transpose() * alpha.asDiagonal();
}

double commutator_defect(const RiccatiPath& riccati, std::size_t t_index,
                         std::size_t w_index) {
  if (t_index >= w_index || w_index >= riccati.n_nodes())
    throw InvalidArgument("commutator_defect: need t_index < w_index");
  const Matrix Vm = riccati.liquidity.asDiagonal();
  const double dt = riccati.grid.dt();
  Matrix integral = Matrix::Zero(Vm.rows(), Vm.cols());
  for (std::size_t s = t_index; s < w_index; ++s)
    integral += riccati.H[s] * Vm * dt;
  const Matrix a = riccati.H[t_index] * Vm;
  const double scale = a.norm() * integral.norm();
  if (scale == 0.0) return 0.0;
  return (a * integral - integral * a).norm() / scale;
}

}  // namespace mfgp::core
