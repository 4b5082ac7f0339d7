#include "mfgp/cov/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfgp/errors.hpp"

namespace mfgp::cov {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Day-major copy of one bin's values: out[i * n_days + l].
std::vector<double> gather_increments(const sim::MarketPanel& p, std::size_t k) {
  std::vector<double> out(p.d() * p.n_days());
  for (std::size_t i = 0; i < p.d(); ++i)
    for (std::size_t l = 0; l < p.n_days(); ++l)
      out[i * p.n_days() + l] = p.increment(l, k, i);
  return out;
}

std::vector<double> gather_flows(const sim::MarketPanel& p, std::size_t k) {
  std::vector<double> out(p.d() * p.n_days());
  for (std::size_t i = 0; i < p.d(); ++i)
    for (std::size_t l = 0; l < p.n_days(); ++l)
      out[i * p.n_days() + l] = p.flow(l, k, i);
  return out;
}

}  // namespace

PairEstimate pair_covariance(const double* a, const double* b,
                             const unsigned char* mask, std::size_t n,
                             std::size_t stride) {
  PairEstimate out;
  double sa = 0.0, sb = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    if (mask && !mask[l]) continue;
    sa += a[l * stride];
    sb += b[l * stride];
    ++out.count;
  }
  if (out.count < 2) {
    out.cov = out.se = kNaN;
    return out;
  }
  const double m = static_cast<double>(out.count);
  const double ma = sa / m, mb = sb / m;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    if (mask && !mask[l]) continue;
    const double prod = (a[l * stride] - ma) * (b[l * stride] - mb);
    sum += prod;
    sum_sq += prod * prod;
  }
  out.cov = sum / (m - 1.0);
  const double mean_prod = sum / m;
  const double var_prod = std::max(0.0, (sum_sq - m * mean_prod * mean_prod) / (m - 1.0));
  out.se = std::sqrt(var_prod / m);
  return out;
}

Matrix correlation_from_covariance(const Matrix& C) {
  Matrix R(C.rows(), C.cols());
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      const double den = C(i, i) * C(j, j);
      R(i, j) = (C(i, i) > 0.0 && C(j, j) > 0.0) ? C(i, j) / std::sqrt(den)
                                                  : kNaN;
    }
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    if (C(i, i) > 0.0) R(i, i) = 1.0;
  return R;
}

void require_uniform_bins(const sim::MarketPanel& panel) {
  const double ref = panel.bin_length(0);
  for (std::size_t k = 0; k < panel.n_bins(); ++k)
    if (std::abs(panel.bin_length(k) - ref) > 1e-9 * std::abs(ref))
      throw InvalidArgument("covariance: bin grid is not uniform");
}

CovarianceSeries estimate_covariance(const sim::MarketPanel& panel) {
  if (panel.n_days() < 2) throw InvalidArgument("covariance: need at least 2 days");
  require_uniform_bins(panel);
  const std::size_t d = panel.d(), N = panel.n_days();
  const auto dd = static_cast<Eigen::Index>(d);
  CovarianceSeries out;
  for (std::size_t k = 0; k < panel.n_bins(); ++k) {
    const auto inc = gather_increments(panel, k);
    Matrix C(dd, dd), se(dd, dd);
    CountMatrix cnt(dd, dd);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        const auto e =
            pair_covariance(&inc[i * N], &inc[j * N], nullptr, N, 1);
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
        C(a, b) = C(b, a) = e.cov;
        se(a, b) = se(b, a) = e.se;
        cnt(a, b) = cnt(b, a) = e.count;
      }
    out.R.push_back(correlation_from_covariance(C));
    out.C.push_back(std::move(C));
    out.se.push_back(std::move(se));
    out.counts.push_back(std::move(cnt));
  }
  return out;
}

std::vector<Matrix> flow_covariance(const sim::MarketPanel& panel) {
  if (!panel.has_flows()) throw InvalidArgument("flow covariance: panel has no flows");
  if (panel.n_days() < 2) throw InvalidArgument("flow covariance: need at least 2 days");
  const std::size_t d = panel.d(), N = panel.n_days();
  const auto dd = static_cast<Eigen::Index>(d);
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < panel.n_bins(); ++k) {
    const auto f = gather_flows(panel, k);
    Matrix F(dd, dd);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j)
        F(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            F(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                pair_covariance(&f[i * N], &f[j * N], nullptr, N, 1).cov;
    out.push_back(std::move(F));
  }
  return out;
}

}  // namespace mfgp::cov
