#include "mfgp/calib/calibration.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "mfgp/cov/conditioning.hpp"
#include "mfgp/cov/excess.hpp"
#include "mfgp/cov/regression.hpp"
#include "mfgp/errors.hpp"
#include "mfgp/sim/seeding.hpp"

namespace mfgp::calib {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix mean_curve(const std::vector<Matrix>& curves) {
  if (curves.empty()) throw InvalidArgument("fundamental: no curves");
  Matrix m = Matrix::Zero(curves[0].rows(), curves[0].cols());
  for (const auto& c : curves) {
    if (c.rows() != m.rows() || c.cols() != m.cols())
      throw InvalidArgument("fundamental: curve shapes differ");
    m += c;
  }
  return m / static_cast<double>(curves.size());
}

double lerp_log(double lo, double hi, double u) {
  return std::pow(10.0, std::log10(lo) + u * (std::log10(hi) - std::log10(lo)));
}

double unlerp_log(double lo, double hi, double x) {
  return (std::log10(x) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
}

}  // namespace

Matrix e0_correlation_proxy(const sim::MarketPanel& panel) {
  if (!panel.has_flows()) throw InvalidArgument("E0 proxy: panel has no flows");
  if (panel.n_days() < 2) throw InvalidArgument("E0 proxy: need at least 2 days");
  const std::size_t d = panel.d(), N = panel.n_days();
  std::vector<double> totals(N * d, 0.0);
  for (std::size_t l = 0; l < N; ++l)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < panel.n_bins(); ++k)
        totals[l * d + i] += panel.flow(l, k, i);
  Matrix C(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j)
      C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          C(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
              cov::pair_covariance(&totals[i], &totals[j], nullptr, N, d).cov;
  Matrix R = cov::correlation_from_covariance(C);
  for (Eigen::Index i = 0; i < R.rows(); ++i)
    if (!(C(i, i) > 0.0)) R(i, i) = kNaN;
  return R;
}

FundamentalEstimate fundamental_from_patterns(const std::vector<Matrix>& curves,
                                              double fraction,
                                              double shift_fraction) {
  if (!(fraction > 0.0 && fraction < 1.0 && shift_fraction > 0.0 && shift_fraction < 1.0))
    throw InvalidArgument("fundamental: fractions must lie in (0, 1)");
  const Matrix m = mean_curve(curves);
  return {fraction * m, shift_fraction * m};
}

FundamentalEstimate fundamental_flow_adjusted(const std::vector<Matrix>& curves,
                                              const std::vector<Matrix>& flow_cov,
                                              const Vector& alpha_hat) {
  if (flow_cov.size() != curves.size())
    throw InvalidArgument("fundamental: flow covariance bins differ");
  std::vector<Matrix> adjusted;
  adjusted.reserve(curves.size());
  const Matrix Am = alpha_hat.asDiagonal();
  for (std::size_t k = 0; k < curves.size(); ++k)
    adjusted.push_back(curves[k] - Am * flow_cov[k] * Am);
  const Matrix m = mean_curve(adjusted);
  return {m, Matrix::Zero(m.rows(), m.cols())};
}

void CalibrationBounds::validate() const {
  if (!(k_lo > 0.0 && k_hi > k_lo)) throw InvalidArgument("calibration: infeasible k bounds");
  if (!(gamma_lo > 0.0 && gamma_hi > gamma_lo))
    throw InvalidArgument("calibration: infeasible gamma bounds (log scale needs gamma_lo > 0)");
  if (!(Gamma_lo >= 0.0 && Gamma_hi > Gamma_lo))
    throw InvalidArgument("calibration: infeasible Gamma bounds");
}

void CalibrationConfig::validate() const {
  bounds.validate();
  if (!(A_term > 0.0)) throw InvalidArgument("calibration: A must be positive");
  if (!(fundamental_fraction > 0.0 && fundamental_fraction < 1.0 &&
        shift_fraction > 0.0 && shift_fraction < 1.0))
    throw InvalidArgument("calibration: fractions must lie in (0, 1)");
  if (restarts == 0) throw InvalidArgument("calibration: need at least one restart");
  if (observed.empty()) throw InvalidArgument("calibration: no observed curves");
  const Eigen::Index d = observed[0].rows();
  if (alpha_hat.size() != d) throw InvalidArgument("calibration: alpha estimate size");
  if (e0_corr.rows() != d || e0_corr.cols() != d)
    throw InvalidArgument("calibration: E0 correlation size");
  if (source == FundamentalSource::kFlowAdjusted && flow_cov.size() != observed.size())
    throw InvalidArgument("calibration: flow-adjusted fundamental needs flow covariances");
  if (!(T > 0.0) || steps_per_bin == 0) throw InvalidArgument("calibration: grid");
}

void fill_calibration_inputs(const sim::MarketPanel& panel,
                             CalibrationConfig& config) {
  const auto cs = cov::estimate_covariance(panel);
  const auto F = cov::flow_covariance(panel);
  const double dt_bin = panel.bin_length(0);
  const auto d = static_cast<Eigen::Index>(panel.d());
  config.observed = cs.C;
  config.flow_cov = F;
  config.alpha_hat.resize(d);
  config.sigma_hat.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto fit = cov::fit_asset_regression(cs, F, static_cast<std::size_t>(i), dt_bin);
    config.alpha_hat(i) = fit.alpha_hat;
    config.sigma_hat(i) = std::sqrt(std::max(fit.sigma_hat, 0.0));
  }
  config.e0_corr = e0_correlation_proxy(panel);
  config.T = panel.bin_times().back() - panel.bin_times().front();
}

CalibrationProblem::CalibrationProblem(const CalibrationConfig& config)
    : config_(config) {
  config_.validate();
  d_ = static_cast<std::size_t>(config_.observed[0].rows());
  n_bins_ = config_.observed.size();
  fundamental_ = config_.source == FundamentalSource::kFlowAdjusted
                     ? fundamental_flow_adjusted(config_.observed, config_.flow_cov,
                                                 config_.alpha_hat)
                     : fundamental_from_patterns(config_.observed,
                                                 config_.fundamental_fraction,
                                                 config_.shift_fraction);
  const double bin_len = config_.T / static_cast<double>(n_bins_);
  Sigma_ = fundamental_.dt_sigma / bin_len;
  sigma_ = Sigma_.diagonal().cwiseMax(0.0).cwiseSqrt();
  if ((sigma_.array() <= 0.0).any())
    throw InvalidArgument("calibration: estimated fundamental variance is not positive");
  corr_ = sigma_.cwiseInverse().asDiagonal() * Sigma_ * sigma_.cwiseInverse().asDiagonal();
  corr_.diagonal().setOnes();
  core::build_sigma(sigma_, corr_);  // rejects a non-PD estimate
  e0_corr_ = config_.e0_corr;
  for (Eigen::Index i = 0; i < e0_corr_.rows(); ++i)
    for (Eigen::Index j = 0; j < e0_corr_.cols(); ++j)
      if (!std::isfinite(e0_corr_(i, j))) e0_corr_(i, j) = i == j ? 1.0 : 0.0;
}

void CalibrationProblem::decode(const Vector& u, Vector& k, double& gamma,
                                Vector& Gamma_diag) const {
  const auto& b = config_.bounds;
  const auto d = static_cast<Eigen::Index>(d_);
  k.resize(d);
  Gamma_diag.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) k(i) = lerp_log(b.k_lo, b.k_hi, u(i));
  gamma = lerp_log(b.gamma_lo, b.gamma_hi, u(d));
  const double lo = std::sqrt(b.Gamma_lo), hi = std::sqrt(b.Gamma_hi);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double s = lo + u(d + 1 + i) * (hi - lo);
    Gamma_diag(i) = s * s;
  }
}

Vector CalibrationProblem::encode(const Vector& k, double gamma,
                                  const Vector& Gamma_diag) const {
  const auto& b = config_.bounds;
  const auto d = static_cast<Eigen::Index>(d_);
  Vector u(2 * d + 1);
  for (Eigen::Index i = 0; i < d; ++i) u(i) = unlerp_log(b.k_lo, b.k_hi, k(i));
  u(d) = unlerp_log(b.gamma_lo, b.gamma_hi, gamma);
  const double lo = std::sqrt(b.Gamma_lo), hi = std::sqrt(b.Gamma_hi);
  for (Eigen::Index i = 0; i < d; ++i)
    u(d + 1 + i) = (std::sqrt(Gamma_diag(i)) - lo) / (hi - lo);
  return u;
}

double CalibrationProblem::objective(const Vector& k, double gamma,
                                     const Vector& Gamma_diag) const {
  const auto d = static_cast<Eigen::Index>(d_);
  const auto params = core::MarketParams::make(
      sigma_, corr_, k, Vector::Ones(d), config_.alpha_hat.cwiseMax(0.0),
      Vector::Constant(d, config_.A_term), gamma, config_.T);
  const core::TimeGrid grid(n_bins_ * config_.steps_per_bin, config_.T);
  const auto maps = cov::bin_flow_maps(params, grid, n_bins_);
  const Vector sd = Gamma_diag.cwiseMax(0.0).cwiseSqrt();
  const Matrix Gamma = sd.asDiagonal() * e0_corr_ * sd.asDiagonal();
  const Matrix Am = params.impact_matrix();
  double sum = 0.0;
  for (std::size_t b = 0; b < n_bins_; ++b) {
    const Matrix total =
        fundamental_.dt_sigma + Am * maps[b] * Gamma * maps[b].transpose() * Am;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i; j < d; ++j) {
        const double r = total(i, j) + fundamental_.shift(i, j) - config_.observed[b](i, j);
        sum += r * r;
      }
  }
  return sum;
}

double CalibrationProblem::objective_unit(const Vector& u) const {
  Vector k, Gd;
  double g = 0.0;
  decode(u, k, g, Gd);
  try {
    return objective(k, g, Gd);
  } catch (const SolverFailure&) {
    return std::numeric_limits<double>::infinity();
  }
}

CalibrationResult calibrate(const CalibrationConfig& config) {
  const CalibrationProblem problem(config);
  const auto n = static_cast<Eigen::Index>(problem.dimension());
  const std::size_t R = config.restarts;

  std::vector<NelderMeadResult> runs(R);
  std::vector<std::exception_ptr> errors(R);
  auto run = [&](std::size_t r) {
    try {
      std::mt19937_64 rng(sim::derive_seed(config.seed, r, sim::Stream::kCalibration));
      std::uniform_real_distribution<double> U(0.05, 0.95);
      Vector x0(n);
      for (Eigen::Index i = 0; i < n; ++i) x0(i) = U(rng);
      runs[r] = nelder_mead_unit_cube(
          [&](const Vector& u) { return problem.objective_unit(u); }, x0, config.search);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(config.threads ? config.threads : 1, R));
  if (workers == 1) {
    for (std::size_t r = 0; r < R; ++r) run(r);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < R; r += workers) run(r);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  CalibrationResult out;
  std::size_t best = 0;
  for (std::size_t r = 0; r < R; ++r) {
    out.traces.push_back(runs[r].trace);
    out.restart_objectives.push_back(runs[r].f);
    out.evaluations += runs[r].evaluations;
    if (runs[r].f < runs[best].f) best = r;
  }
  out.best_restart = best;
  problem.decode(runs[best].x, out.k, out.gamma, out.Gamma_diag);
  out.objective = runs[best].f;
  out.residual_l2 = std::sqrt(out.objective);
  out.converged = runs[best].converged;
  if (!out.converged) out.warning = "evaluation budget exhausted; returning best point found";
  if (!std::isfinite(out.objective)) throw SolverFailure("calibration: no finite objective value");
  out.Sigma_hat = problem.Sigma_hat();
  out.shift = problem.fundamental().shift;
  out.alpha = config.alpha_hat;
  out.e0_corr = config.e0_corr;
  const bool flow = config.source == FundamentalSource::kFlowAdjusted;
  out.provenance = {
      {"alpha", "estimated: impact regression"},
      {"A_term", "fixed: configuration"},
      {"Sigma", flow ? "estimated: flow-adjusted mean covariance"
                     : "estimated: fraction of mean observed covariance"},
      {"shift", flow ? "fixed: zero" : "estimated: fraction of mean observed covariance"},
      {"e0_correlation", "estimated: correlation of daily net flows"},
      {"eta", "fixed: 1 (only k = V/eta is identified)"},
      {"k", "fitted"},
      {"gamma", "fitted"},
      {"Gamma_diag", "fitted"},
  };
  return out;
}

}  // namespace mfgp::calib
