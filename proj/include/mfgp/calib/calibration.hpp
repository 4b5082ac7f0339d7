#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mfgp/calib/nelder_mead.hpp"
#include "mfgp/cov/covariance.hpp"

namespace mfgp::calib {

using core::Matrix;
using core::Vector;

/// Sample correlation across days of the per-day total net flow Σ_k ν_{k,l}.
/// Rows/columns of an asset with zero variance are NaN off the diagonal.
Matrix e0_correlation_proxy(const sim::MarketPanel& panel);

/// Fundamental level δtΣ̂ and upward shift δ per pair.
struct FundamentalEstimate {
  Matrix dt_sigma;
  Matrix shift;
};

/// δtΣ̂ = fraction · mean_k C_k, δ = shift_fraction · mean_k C_k.
FundamentalEstimate fundamental_from_patterns(const std::vector<Matrix>& curves,
                                              double fraction = 0.2,
                                              double shift_fraction = 0.3);

/// δtΣ̂_ij = mean_k (C_k^{ij} - α̂_iα̂_j F_k^{ij}) and δ = 0: the regression
/// intercept extended to pairs.
FundamentalEstimate fundamental_flow_adjusted(const std::vector<Matrix>& curves,
                                              const std::vector<Matrix>& flow_cov,
                                              const Vector& alpha_hat);

enum class FundamentalSource { kPatternFraction, kFlowAdjusted };

struct CalibrationBounds {
  double k_lo = 1e5, k_hi = 1e10;
  double gamma_lo = 1e-6, gamma_hi = 1.0;
  double Gamma_lo = 0.0, Gamma_hi = 1e12;

  void validate() const;
};

struct CalibrationConfig {
  double A_term = 10.0;
  double fundamental_fraction = 0.2;
  double shift_fraction = 0.3;
  FundamentalSource source = FundamentalSource::kPatternFraction;
  CalibrationBounds bounds;
  std::size_t restarts = 5;
  NelderMeadOptions search{4000, 1e-10, 1e-300, 1e-7, 0.15};
  std::uint64_t seed = 0;
  unsigned threads = 1;

  // Observed inputs.
  std::vector<Matrix> observed;  // C_k^{ij}(1), one matrix per bin
  std::vector<Matrix> flow_cov;  // F_k^{ij}; needed for kFlowAdjusted
  Vector alpha_hat;
  Vector sigma_hat;  // regression estimate, reported only
  Matrix e0_corr;
  double T = 1.0;
  std::size_t steps_per_bin = 1;

  void validate() const;
};

/// Observed curves, flow covariances, α̂, σ̂ and the E0 correlation proxy of
/// a panel, filled into `config`.
void fill_calibration_inputs(const sim::MarketPanel& panel,
                             CalibrationConfig& config);

/// The L2 matching problem for fixed estimated inputs. Free parameters are
/// (k_1..k_d, γ, Γ_11..Γ_dd); the model uses V = k, η = 1.
class CalibrationProblem {
 public:
  explicit CalibrationProblem(const CalibrationConfig& config);

  std::size_t dimension() const { return 2 * d_ + 1; }
  std::size_t d() const { return d_; }

  /// Σ_{i<=j, k} (total_k^{ij} + δ^{ij} - observed_k^{ij})².
  double objective(const Vector& k, double gamma, const Vector& Gamma_diag) const;
  double objective_unit(const Vector& u) const;

  /// Unit-cube coordinates: log10 for k and γ, square-root scale for Γ_ii.
  void decode(const Vector& u, Vector& k, double& gamma, Vector& Gamma_diag) const;
  Vector encode(const Vector& k, double gamma, const Vector& Gamma_diag) const;

  const FundamentalEstimate& fundamental() const { return fundamental_; }
  const Matrix& Sigma_hat() const { return Sigma_; }

 private:
  CalibrationConfig config_;
  std::size_t d_ = 0;
  std::size_t n_bins_ = 0;
  FundamentalEstimate fundamental_;
  Matrix Sigma_;
  Vector sigma_;
  Matrix corr_;
  Matrix e0_corr_;
};

struct CalibrationResult {
  Vector k;
  double gamma = 0.0;
  Vector Gamma_diag;
  double objective = 0.0;
  double residual_l2 = 0.0;  // sqrt(objective)
  Matrix Sigma_hat;
  Matrix shift;
  Vector alpha;
  Matrix e0_corr;
  std::map<std::string, std::string> provenance;
  std::vector<std::vector<double>> traces;  // one per restart
  std::vector<double> restart_objectives;
  std::size_t best_restart = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string warning;
};

/// Bounded simplex search from `restarts` seeded start points, merged by
/// lowest objective (ties go to the lowest restart index).
CalibrationResult calibrate(const CalibrationConfig& config);

}  // namespace mfgp::calib
