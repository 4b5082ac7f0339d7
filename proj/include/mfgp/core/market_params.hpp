#pragma once

#include <Eigen/Dense>

namespace mfgp::core {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Assemble Σ_ij = σ_i σ_j ρ_ij.
///
/// Throws InvalidArgument when `corr` is not a symmetric unit-diagonal
/// positive definite matrix; the message names the first non-positive leading
/// principal minor.
Matrix build_sigma(const Vector& sigma, const Matrix& corr);

/// Per-asset microstructure and risk parameters of the market.
///
/// Units: sigma in $/sqrt(day)/share, V in share/day, eta and alpha in
/// $/share, A_term in $/day/share, gamma in 1/$, T in days.
struct MarketParams {
  Vector sigma;
  Matrix corr;
  Vector V;
  Vector eta;
  Vector alpha;
  Vector A_term;
  double gamma = 0.0;
  double T = 1.0;

  static MarketParams make(Vector sigma, Matrix corr, Vector V, Vector eta,
                           Vector alpha, Vector A_term, double gamma,
                           double T);

  Eigen::Index d() const { return sigma.size(); }

  /// Throws InvalidArgument on any violated invariant.
  void validate() const;

  // Σ, recomputed from sigma and corr.
  Matrix Sigma() const;
  // 𝕍 = diag(V_i / (4 η_i)).
  Vector liquidity() const;
  Matrix liquidity_matrix() const { return liquidity().asDiagonal(); }
  Matrix impact_matrix() const { return alpha.asDiagonal(); }
  Matrix terminal_matrix() const { return A_term.asDiagonal(); }
};

}  // namespace mfgp::core
