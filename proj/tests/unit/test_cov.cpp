#include <cmath>
#include <limits>

#include "doctest.h"
#include "fixtures.hpp"
#include "mfgp/cov/conditioning.hpp"
#include "mfgp/cov/excess.hpp"
#include "mfgp/cov/regression.hpp"
#include "mfgp/errors.hpp"

using namespace mfgp;
using namespace fixtures;
using core::TimeGrid;

namespace {

sim::MarketPanel blank(std::size_t days, std::size_t bins, std::size_t d, bool flows = true) {
  return sim::MarketPanel(days, bins, d, sim::uniform_bin_times(bins, 1.0), flows);
}

Matrix reference_gamma() {
  Matrix G(3, 3);
  G << 1, 0.2, -0.1, 0.2, 1, 0.3, -0.1, 0.3, 1;
  return 1e8 * G;
}

}  // namespace

TEST_CASE("covariance estimator identities") {
  SUBCASE("two days, one asset") {
    auto p = blank(2, 1, 1);
    p.price(0, 0, 0) = 10;
    p.price(0, 1, 0) = 10.7;
    p.price(1, 0, 0) = 3;
    p.price(1, 1, 0) = 2.5;
    const auto cs = cov::estimate_covariance(p);
    const double a = 0.7, b = -0.5;
    CHECK(cs.C[0](0, 0) == doctest::Approx((a - b) * (a - b) / 2));
    CHECK(cs.R[0](0, 0) == doctest::Approx(1.0));
    CHECK(cs.counts[0](0, 0) == 2);
  }
  SUBCASE("constant prices") {
    auto p = blank(5, 3, 2);
    for (std::size_t l = 0; l < 5; ++l)
      for (std::size_t k = 0; k <= 3; ++k)
        for (std::size_t i = 0; i < 2; ++i) p.price(l, k, i) = 50.0 + static_cast<double>(i);
    const auto cs = cov::estimate_covariance(p);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(cs.C[k].cwiseAbs().maxCoeff() == 0.0);
      CHECK(std::isnan(cs.R[k](0, 1)));
      CHECK(std::isnan(cs.R[k](0, 0)));
    }
  }
  SUBCASE("one day is rejected") {
    CHECK_THROWS_AS(cov::estimate_covariance(blank(1, 3, 2)), InvalidArgument);
  }
  SUBCASE("non-uniform bins are rejected") {
    sim::MarketPanel p(3, 2, 1, {0.0, 0.3, 1.0}, false);
    CHECK_THROWS_AS(cov::estimate_covariance(p), InvalidArgument);
  }
}

TEST_CASE("estimator symmetry and permutation equivariance") {
  sim::SimConfig cfg;
  cfg.seed = 8;
  cfg.n_days = 400;
  cfg.n_bins = 10;
  cfg.params = three_asset(5e-5, 0.6, 0.3, 0.05);
  cfg.law.Gamma = reference_gamma();
  const auto panel = sim::simulate_panel(cfg, 2);
  const auto cs = cov::estimate_covariance(panel);
  const std::size_t perm[3] = {2, 0, 1};
  auto q = blank(panel.n_days(), 10, 3);
  for (std::size_t l = 0; l < panel.n_days(); ++l)
    for (std::size_t k = 0; k <= 10; ++k)
      for (std::size_t i = 0; i < 3; ++i) {
        q.price(l, k, i) = panel.price(l, k, perm[i]);
        if (k < 10) q.flow(l, k, i) = panel.flow(l, k, perm[i]);
      }
  const auto cq = cov::estimate_covariance(q);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(cs.C[k] == cs.C[k].transpose());
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 3; ++j) {
        CHECK(cq.C[k](i, j) == cs.C[k](static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])));
        CHECK(std::abs(cs.R[k](i, j)) <= 1.0);
      }
  }
}

TEST_CASE("flow covariance identities") {
  auto p = blank(2, 2, 1);
  p.flow(0, 0, 0) = 4;
  p.flow(1, 0, 0) = -2;
  p.flow(0, 1, 0) = 7;
  p.flow(1, 1, 0) = 7;
  const auto F = cov::flow_covariance(p);
  CHECK(F[0](0, 0) == doctest::Approx(18.0));
  CHECK(F[1](0, 0) == 0.0);
  CHECK_THROWS_AS(cov::flow_covariance(blank(3, 2, 1, false)), InvalidArgument);
}

TEST_CASE("predictor limits and correlation identity") {
  const auto p = three_asset(5e-5, 0.6, 0.3, 0.05);
  const TimeGrid grid(100, 1.0);
  sim::InventoryLaw law{reference_gamma(), {}};
  const auto pred = cov::theoretical_excess(p, law, grid, 100);
  const Matrix corr = p.corr;
  for (std::size_t k = 0; k < 100; ++k) {
    const Matrix rebuilt = corr.cwiseProduct(pred.A[k]) + pred.B[k];
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 3; ++j)
        CHECK(std::abs(rebuilt(i, j) - pred.R[k](i, j)) <= 1e-10);
    CHECK(sup_diff(pred.fundamental[k], 0.01 * p.Sigma()) < 1e-15);
  }
  for (Eigen::Index i = 0; i < 3; ++i)
    CHECK(std::abs(pred.excess[99](i, i)) <= 0.01 * pred.fundamental[99](i, i));

  auto p0 = p;
  p0.alpha.setZero();
  const auto no_impact = cov::theoretical_excess(p0, law, grid, 100);
  const auto no_spread = cov::theoretical_excess(p, {Matrix::Zero(3, 3), {}}, grid, 100);
  for (std::size_t k = 0; k < 100; ++k) {
    CHECK(no_impact.excess[k].cwiseAbs().maxCoeff() == 0.0);
    CHECK(no_spread.excess[k].cwiseAbs().maxCoeff() == 0.0);
    CHECK(no_impact.total[k] == no_impact.fundamental[k]);
  }
}

TEST_CASE("flow maps integrate the mean field") {
  const auto p = three_asset(5e-5, 0.6, 0.3, 0.05);
  const TimeGrid grid(400, 1.0);
  const auto maps = cov::bin_flow_maps(p, grid, 40);
  const Vector e1 = vec({0, 1, 0});
  const auto s = core::solve_mean_field_identical(p, e1, grid);
  for (std::size_t k : {0u, 7u, 39u}) {
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double expect = s.E(static_cast<Eigen::Index>(10 * (k + 1)), i) -
                            s.E(static_cast<Eigen::Index>(10 * k), i);
      CHECK(maps[k](i, 1) == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("simulated flow covariance matches the linear map") {
  sim::SimConfig cfg;
  cfg.seed = 1234;
  cfg.n_days = 5000;
  cfg.n_bins = 20;
  cfg.params = three_asset(5e-5, 0.6, 0.3, 0.05);
  cfg.law.Gamma = 1e8 * Matrix::Identity(3, 3);
  const auto panel = sim::simulate_panel(cfg, 4);
  const auto F = cov::flow_covariance(panel);
  const auto maps = cov::bin_flow_maps(cfg.params, cfg.grid(), cfg.n_bins);
  int outside = 0;
  for (std::size_t k = 0; k < 20; ++k) {
    const Matrix expect = maps[k] * cfg.law.Gamma * maps[k].transpose();
    for (Eigen::Index i = 0; i < 3; ++i) {
      // Gaussian variance estimator: sd = σ² sqrt(2/(n-1))
      const double se = expect(i, i) * std::sqrt(2.0 / 4999.0);
      if (std::abs(F[k](i, i) - expect(i, i)) > 4 * se) ++outside;
    }
  }
  CHECK(outside == 0);
}

TEST_CASE("pi/theta decomposition prefactor") {
  // liquidity low enough that the feedback integrand is resolved on the grid
  auto p = three_asset(5e-5, 0.6, 0.3, 0.05);
  p.V = vec({2e3, 5e3, 5e3});
  const TimeGrid grid(5000, 1.0);
  sim::InventoryLaw law{reference_gamma(), {}};
  const auto pred = cov::theoretical_excess(p, law, grid, 50);
  const auto pt = cov::decompose_pi_theta(p, law, grid, 50);
  double dim = 0.0, rec = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < 50; ++k) {
    scale = std::max(scale, pred.excess[k].cwiseAbs().maxCoeff());
    dim = std::max(dim, sup_diff(pt.excess_dimensional[k], pred.excess[k]));
    rec = std::max(rec, sup_diff(pt.excess_reciprocal[k], pred.excess[k]));
    CHECK(sup_diff(pt.Lambda[k], pt.Lambda[k].transpose()) <= 1e-12 * pt.Lambda[k].norm());
  }
  // the dimensionally consistent prefactor reproduces the flow-based excess
  // up to the left-point quadrature of the feedback integral
  CHECK(dim <= 0.02 * scale);
  CHECK(rec >= 0.5 * scale);
}

TEST_CASE("impact regression") {
  SUBCASE("exact linear data") {
    std::vector<double> F, C;
    for (int k = 0; k < 30; ++k) {
      F.push_back(1.0 + 0.37 * k + 0.01 * k * k);
      C.push_back(0.5 + 2.0 * F.back());
    }
    const auto fit = cov::fit_impact_regression(C, F, 0.01);
    CHECK(std::abs(fit.alpha_sq - 2.0) <= 1e-10);
    CHECK(fit.alpha_hat == doctest::Approx(std::sqrt(2.0)));
    CHECK(fit.intercept == doctest::Approx(0.5));
    CHECK(fit.sigma_hat == doctest::Approx(50.0));
    CHECK(fit.rss < 1e-10);
    CHECK(fit.p_slope < 1e-10);
    CHECK(fit.corr_cf == doctest::Approx(1.0));
  }
  SUBCASE("noisy data stays in range") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    std::vector<double> F, C;
    for (int k = 0; k < 40; ++k) {
      F.push_back(k);
      C.push_back(1.0 + z(rng));
    }
    const auto fit = cov::fit_impact_regression(C, F, 0.01);
    CHECK(fit.p_slope >= 0.0);
    CHECK(fit.p_slope <= 1.0);
    CHECK(fit.p_intercept >= 0.0);
    CHECK(fit.p_intercept <= 1.0);
    CHECK(std::abs(fit.corr_cf) <= 1.0);
    CHECK(fit.ci_low <= fit.alpha_sq);
    CHECK(fit.alpha_sq <= fit.ci_high);
    if (fit.alpha_sq < 0) CHECK(fit.alpha_hat == 0.0);
  }
  SUBCASE("degenerate inputs") {
    CHECK_THROWS_AS(cov::fit_impact_regression({1, 2, 3}, {4, 4, 4}, 0.1), InvalidArgument);
    CHECK_THROWS_AS(cov::fit_impact_regression({1, 2}, {1, 2}, 0.1), InvalidArgument);
  }
}

TEST_CASE("trade imbalances") {
  SUBCASE("hand computation") {
    auto p = blank(1, 2, 1);
    p.flow(0, 0, 0) = 2;
    p.flow(0, 1, 0) = -2;
    const auto w = cov::trade_imbalances(p);
    CHECK(w.denominator(0) == 4.0);
    CHECK(w.at(0, 0, 0) == 0.5);
    CHECK(w.at(0, 1, 0) == -0.5);
  }
  SUBCASE("normalisation, scale invariance, exclusion") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    auto p = blank(30, 8, 3);
    for (std::size_t l = 0; l < 30; ++l)
      for (std::size_t k = 0; k < 8; ++k) {
        p.flow(l, k, 0) = 1e4 * z(rng);
        p.flow(l, k, 1) = 1e2 * z(rng);
        p.flow(l, k, 2) = 0.0;
      }
    auto q = p;
    for (std::size_t l = 0; l < 30; ++l)
      for (std::size_t k = 0; k < 8; ++k) q.flow(l, k, 1) *= 37.0;
    const auto w = cov::trade_imbalances(p);
    const auto wq = cov::trade_imbalances(q);
    for (std::size_t i = 0; i < 2; ++i) {
      double s = 0.0;
      for (std::size_t l = 0; l < 30; ++l)
        for (std::size_t k = 0; k < 8; ++k) s += std::abs(w.at(l, k, i));
      CHECK(s / 30.0 == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (std::size_t l = 0; l < 30; ++l)
      for (std::size_t k = 0; k < 8; ++k)
        CHECK(wq.at(l, k, 1) == doctest::Approx(w.at(l, k, 1)).epsilon(1e-14));
    CHECK(w.excluded[2]);
    CHECK_FALSE(w.excluded[0]);
    CHECK(std::isnan(w.at(0, 0, 2)));
  }
}

TEST_CASE("conditioned covariance") {
  sim::SimConfig cfg;
  cfg.seed = 606;
  cfg.n_days = 600;
  cfg.n_bins = 12;
  cfg.params = three_asset(5e-5, 0.6, 0.3, 0.05);
  cfg.params.V = vec({2e3, 5e3, 5e3});
  cfg.law.Gamma = reference_gamma();
  const auto panel = sim::simulate_panel(cfg, 2);
  const auto cs = cov::estimate_covariance(panel);
  const auto w = cov::trade_imbalances(panel);
  double mx = 0.0;
  for (double x : w.w) mx = std::max(mx, std::abs(x));

  const auto all = cov::conditioned_covariance(panel, w, mx);
  const auto one = cov::conditioned_covariance(panel, 1.0);
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(all.C[k] == cs.C[k]);
    CHECK(all.se[k] == cs.se[k]);
    CHECK(all.counts[k] == cs.counts[k]);
  }
  if (mx <= 1.0)
    for (std::size_t k = 0; k < 12; ++k) CHECK(one.C[k] == cs.C[k]);

  const auto none = cov::conditioned_covariance(panel, w, 0.0);
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(none.counts[k].maxCoeff() == 0);
    CHECK(none.C[k].array().isNaN().all());
  }

  const auto lo = cov::conditioned_covariance(panel, w, 0.02);
  const auto hi = cov::conditioned_covariance(panel, w, 0.05);
  for (std::size_t k = 0; k < 12; ++k)
    CHECK((lo.counts[k].array() <= hi.counts[k].array()).all());
}

TEST_CASE("median patterns") {
  SUBCASE("single asset normalises to mean one") {
    sim::SimConfig cfg;
    cfg.seed = 3;
    cfg.n_days = 200;
    cfg.n_bins = 15;
    cfg.params = scalar(0.5, 1e3, 0.1, 5e-4, 2.5, 5e-5);
    cfg.law.Gamma = Matrix::Constant(1, 1, 1e8);
    const auto panel = sim::simulate_panel(cfg, 1);
    const auto pats = cov::median_patterns(panel, {1.0, 0.05});
    CHECK(pats[0].diag.mean() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pats[0].off.array().isNaN().all());
    const auto cs = cov::estimate_covariance(panel);
    double norm = 0.0;
    for (const auto& c : cs.C) norm += c(0, 0);
    norm /= 15.0;
    for (Eigen::Index k = 0; k < 15; ++k) {
      CHECK(pats[0].diag(k) == doctest::Approx(cs.C[static_cast<std::size_t>(k)](0, 0) / norm));
      CHECK(pats[0].count_diag(k) == 200.0);
      CHECK(pats[1].count_diag(k) <= 200.0);
    }
  }
  SUBCASE("median helper") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(cov::median_of({3.0, nan, 1.0, 2.0}) == 2.0);
    CHECK(cov::median_of({4.0, 1.0}) == 2.5);
    CHECK(std::isnan(cov::median_of({nan})));
  }
}
