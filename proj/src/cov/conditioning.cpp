#include "mfgp/cov/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfgp/errors.hpp"

namespace mfgp::cov {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double median_of(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return !std::isfinite(v); }),
               values.end());
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TradeImbalances trade_imbalances(const sim::MarketPanel& panel) {
  if (!panel.has_flows()) throw InvalidArgument("imbalances: panel has no flows");
  if (panel.n_days() == 0) throw InvalidArgument("imbalances: empty panel");
  TradeImbalances out;
  out.n_days = panel.n_days();
  out.n_bins = panel.n_bins();
  out.d = panel.d();
  out.w.assign(out.n_days * out.n_bins * out.d, kNaN);
  out.excluded.assign(out.d, false);
  out.denominator = Vector::Zero(static_cast<Eigen::Index>(out.d));
  for (std::size_t i = 0; i < out.d; ++i) {
    double total = 0.0;
    for (std::size_t l = 0; l < out.n_days; ++l) {
      double day = 0.0;
      for (std::size_t k = 0; k < out.n_bins; ++k) day += std::abs(panel.flow(l, k, i));
      total += day;
    }
    const double den = total / static_cast<double>(out.n_days);
    out.denominator(static_cast<Eigen::Index>(i)) = den;
    if (!(den > 0.0)) {
      out.excluded[i] = true;
      continue;
    }
    for (std::size_t l = 0; l < out.n_days; ++l)
      for (std::size_t k = 0; k < out.n_bins; ++k)
        out.w[(l * out.n_bins + k) * out.d + i] = panel.flow(l, k, i) / den;
  }
  return out;
}

ConditionedCovariance conditioned_covariance(const sim::MarketPanel& panel,
                                             const TradeImbalances& w,
                                             double lambda) {
  if (!(lambda >= 0.0)) throw InvalidArgument("conditioning: lambda must be >= 0");
  if (w.n_days != panel.n_days() || w.n_bins != panel.n_bins() || w.d != panel.d())
    throw InvalidArgument("conditioning: imbalances do not match the panel");
  const std::size_t d = panel.d(), N = panel.n_days();
  const auto dd = static_cast<Eigen::Index>(d);
  ConditionedCovariance out;
  out.lambda = lambda;
  std::vector<double> inc(d * N);
  std::vector<unsigned char> sel(d * N), mask(N);
  for (std::size_t k = 0; k < panel.n_bins(); ++k) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t l = 0; l < N; ++l) {
        inc[i * N + l] = panel.increment(l, k, i);
        // NaN (excluded asset) compares false: never selected.
        sel[i * N + l] = std::abs(w.at(l, k, i)) <= lambda;
      }
    Matrix C(dd, dd), se(dd, dd);
    CountMatrix cnt(dd, dd);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        for (std::size_t l = 0; l < N; ++l) mask[l] = sel[i * N + l] && sel[j * N + l];
        const auto e = pair_covariance(&inc[i * N], &inc[j * N], mask.data(), N, 1);
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
        C(a, b) = C(b, a) = e.cov;
        se(a, b) = se(b, a) = e.se;
        cnt(a, b) = cnt(b, a) = e.count;
      }
    out.C.push_back(std::move(C));
    out.se.push_back(std::move(se));
    out.counts.push_back(std::move(cnt));
  }
  return out;
}

ConditionedCovariance conditioned_covariance(const sim::MarketPanel& panel,
                                             double lambda) {
  return conditioned_covariance(panel, trade_imbalances(panel), lambda);
}

std::vector<ConditionedPattern> median_patterns(
    const sim::MarketPanel& panel, const std::vector<double>& lambdas) {
  const auto w = trade_imbalances(panel);
  const auto ref = conditioned_covariance(panel, w, 1.0);
  const std::size_t d = panel.d(), M = panel.n_bins();

  // mean_k C_k^{ij}(1) over bins where it is defined.
  Matrix norm = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
      double s = 0.0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < M; ++k)
        if (std::isfinite(ref.C[k](a, b))) {
          s += ref.C[k](a, b);
          ++n;
        }
      norm(a, b) = norm(b, a) = n ? s / static_cast<double>(n) : kNaN;
    }

  std::vector<ConditionedPattern> out;
  for (double lambda : lambdas) {
    const auto cc = conditioned_covariance(panel, w, lambda);
    ConditionedPattern p;
    p.lambda = lambda;
    const auto m = static_cast<Eigen::Index>(M);
    p.diag = p.off = p.count_diag = p.count_off = Vector::Constant(m, kNaN);
    p.used_diag.assign(M, 0);
    p.used_off.assign(M, 0);
    for (std::size_t k = 0; k < M; ++k) {
      std::vector<double> dv, ov, dc, oc;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
          const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
          const double nrm = norm(a, b);
          const double v = (nrm != 0.0 && std::isfinite(nrm)) ? cc.C[k](a, b) / nrm : kNaN;
          auto& vals = i == j ? dv : ov;
          auto& cnts = i == j ? dc : oc;
          cnts.push_back(static_cast<double>(cc.counts[k](a, b)));
          if (std::isfinite(v)) vals.push_back(v);
        }
      const auto kk = static_cast<Eigen::Index>(k);
      p.used_diag[k] = dv.size();
      p.used_off[k] = ov.size();
      p.diag(kk) = median_of(dv);
      p.off(kk) = median_of(ov);
      p.count_diag(kk) = median_of(dc);
      p.count_off(kk) = median_of(oc);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mfgp::cov
