#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "mfgp/core/agent.hpp"
#include "mfgp/core/heterogeneous.hpp"
#include "mfgp/core/mean_field.hpp"
#include "mfgp/core/riccati.hpp"
#include "mfgp/errors.hpp"

using namespace mfgp;
using namespace fixtures;
using core::TimeGrid;

TEST_CASE("build_sigma") {
  SUBCASE("identity correlation") {
    const Matrix S = core::build_sigma(vec({0.3, 1.0, 0.3}), Matrix::Identity(3, 3));
    CHECK(S(0, 0) == doctest::Approx(0.09));
    CHECK(S(1, 1) == doctest::Approx(1.0));
    CHECK(S(2, 2) == doctest::Approx(0.09));
    CHECK(S(0, 1) == 0.0);
  }
  SUBCASE("correlated pair") {
    Matrix c(2, 2);
    c << 1, 0.8, 0.8, 1;
    const Matrix S = core::build_sigma(vec({0.3, 1.0}), c);
    CHECK(S(0, 1) == doctest::Approx(0.24));
    CHECK(S(1, 0) == S(0, 1));
  }
  SUBCASE("indefinite correlation is rejected") {
    // eigenvalues 1 - 2a and 1 + a (twice)
    Matrix c(3, 3);
    const double a = 0.505;
    c << 1, a, a, a, 1, -a, a, -a, 1;
    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    REQUIRE(es.eigenvalues().minCoeff() == doctest::Approx(-0.01));
    CHECK_THROWS_AS(core::build_sigma(vec({1, 1, 1}), c), InvalidArgument);
    try {
      core::build_sigma(vec({1, 1, 1}), c);
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("minor") != std::string::npos);
    }
  }
}

TEST_CASE("MarketParams validation") {
  auto p = three_asset(5e-5);
  CHECK_NOTHROW(p.validate());
  p.A_term(1) = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = three_asset(5e-5);
  p.gamma = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = three_asset(5e-5);
  CHECK(p.liquidity()(0) == doctest::Approx(2e6 / 0.4));
}

TEST_CASE("TimeGrid endpoints") {
  const TimeGrid g(7, 0.3);
  CHECK(g.node(0) == 0.0);
  CHECK(g.node(7) == 0.3);
  for (std::size_t k = 0; k < 7; ++k) CHECK(g.node(k) < g.node(k + 1));
  CHECK_THROWS_AS(TimeGrid(0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(TimeGrid(5, 0.0), InvalidArgument);
}

TEST_CASE("Riccati: scalar closed forms") {
  SUBCASE("gamma = 0") {
    const auto p = scalar(1.0, 2e6, 0.1, 0.0, 2.5, 0.0);
    const TimeGrid g(500, 1.0);
    const auto r = core::solve_riccati(p, g);
    const double v = 5e6;
    CHECK(r.H.back()(0, 0) == -5.0);
    CHECK(r.H[0](0, 0) == doctest::Approx(-5.0 / (5e7 + 1)).epsilon(1e-10));
    double err = 0.0;
    for (std::size_t k = 0; k <= 500; ++k)
      err = std::max(err, std::abs(r.H[k](0, 0) + 5.0 / (1 + 10 * v * (1 - g.node(k)))));
    CHECK(err < 1e-10);
  }
  SUBCASE("gamma > 0") {
    // H' = -2v(H² - c²), c² = γσ²/(2v): (H-c)/(H+c) grows like exp(4vc(T-t)).
    const double sigma = 0.7, V = 4e4, eta = 0.2, A = 1.5, gamma = 2e-3;
    const auto p = scalar(sigma, V, eta, 0.0, A, gamma);
    const double v = V / (4 * eta);
    const double c = std::sqrt(gamma * sigma * sigma / (2 * v));
    const TimeGrid g(300, 1.0);
    const auto r = core::solve_riccati(p, g);
    const double r0 = (-2 * A - c) / (-2 * A + c);
    double err = 0.0;
    for (std::size_t k = 0; k <= 300; ++k) {
      const double q = r0 * std::exp(4 * v * c * (1.0 - g.node(k)));
      const double H = c * (1 + q) / (1 - q);
      err = std::max(err, std::abs(r.H[k](0, 0) - H) / std::abs(H));
    }
    CHECK(err < 1e-9);
  }
}

TEST_CASE("Riccati: block decoupling, symmetry and bounds") {
  Matrix corr = Matrix::Identity(2, 2);
  const auto p2 = core::MarketParams::make(vec({0.4, 1.2}), corr, vec({3e5, 1e6}),
                                           vec({0.2, 0.1}), vec({1e-4, 2e-4}),
                                           vec({2.0, 4.0}), 1e-3, 1.0);
  const TimeGrid g(200, 1.0);
  const auto r2 = core::solve_riccati(p2, g);
  const auto ra = core::solve_riccati(scalar(0.4, 3e5, 0.2, 1e-4, 2.0, 1e-3), g);
  const auto rb = core::solve_riccati(scalar(1.2, 1e6, 0.1, 2e-4, 4.0, 1e-3), g);
  for (std::size_t k = 0; k <= 200; ++k) {
    CHECK(r2.H[k](0, 1) == 0.0);
    CHECK(r2.H[k](0, 0) == doctest::Approx(ra.H[k](0, 0)).epsilon(1e-12));
    CHECK(r2.H[k](1, 1) == doctest::Approx(rb.H[k](0, 0)).epsilon(1e-12));
  }

  const auto p = three_asset(5e-2);
  const auto r = core::solve_riccati(p, TimeGrid(100, 1.0));
  const Matrix lower = -2.0 * p.terminal_matrix() - p.T * p.gamma * p.Sigma();
  for (const Matrix& H : r.H) {
    CHECK((H - H.transpose()).norm() <= 1e-12 * H.norm());
    Eigen::SelfAdjointEigenSolver<Matrix> up(H), lo(H - lower);
    CHECK(up.eigenvalues().maxCoeff() <= 1e-12);
    CHECK(lo.eigenvalues().minCoeff() >= -1e-9);
  }
  CHECK(sup_diff(r.H.back(), -2.0 * p.terminal_matrix()) == 0.0);
}

TEST_CASE("propagator G") {
  const double A = 2.5, V = 2e6, eta = 0.1, alpha = 3e-4;
  const auto p = scalar(1.0, V, eta, alpha, A, 0.0);
  const TimeGrid g(400, 1.0);
  const auto r = core::solve_riccati(p, g);
  const double v = V / (4 * eta);
  CHECK(core::propagator_G(r, p.alpha, 37, 37)(0, 0) == doctest::Approx(alpha));
  CHECK(core::propagator_G(r, Vector::Zero(1), 3, 200)(0, 0) == 0.0);
  for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, 400}, {10, 20}, {100, 399}}) {
    const double expect =
        alpha * (1 + 4 * A * v * (1 - g.node(j))) / (1 + 4 * A * v * (1 - g.node(i)));
    CHECK(core::propagator_G(r, p.alpha, i, j)(0, 0) ==
          doctest::Approx(expect).epsilon(1e-9));
  }
  CHECK_THROWS_AS(core::propagator_G(r, p.alpha, 5, 4), InvalidArgument);
}

TEST_CASE("commutator defect") {
  Matrix corr = Matrix::Identity(2, 2);
  const auto diag = core::MarketParams::make(vec({1, 2}), corr, vec({1e4, 3e4}), vec({1, 1}),
                                             vec({0, 0}), vec({1, 3}), 1e-2, 1.0);
  const TimeGrid g(200, 1.0);
  CHECK(core::commutator_defect(core::solve_riccati(diag, g), 0, 150) == 0.0);

  const auto p = three_asset(5e-2);
  const auto r = core::solve_riccati(p, TimeGrid(2000, 1.0));
  CHECK(core::commutator_defect(r, 500, 501) == doctest::Approx(0.0));
  const double d20 = core::commutator_defect(r, 500, 520);
  const double d40 = core::commutator_defect(r, 500, 540);
  CHECK(d20 > 0.0);
  CHECK(d40 / d20 == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("mean field: analytic linear solution") {
  for (double A : {0.5, 2.5}) {
    for (double E0 : {1e5, -3e3}) {
      const double V = 2e6, eta = 0.1, v = V / (4 * eta);
      const auto p = scalar(1.0, V, eta, 0.0, A, 0.0);
      const TimeGrid g(1000, 1.0);
      const auto s = core::solve_mean_field_identical(p, vec({E0}), g);
      const double b = -4 * v * A * E0 / (1 + 4 * v * A);
      double err = 0.0;
      for (std::size_t k = 0; k <= 1000; ++k)
        err = std::max(err, std::abs(s.E(k, 0) - (E0 + b * g.node(k))));
      CHECK(err <= 1e-8 * std::abs(E0));
      CHECK(core::boundary_residual(p, s) <= 1e-8 * (1 + std::abs(E0)));
    }
  }
}

TEST_CASE("mean field: discrete scheme relations hold") {
  const auto p = three_asset(5e-2);
  const Vector E0 = vec({1e5, 5e4, -2.5e4});
  const TimeGrid g(100, 1.0);
  const auto s = core::solve_mean_field_identical(p, E0, g);
  const double dt = g.dt();
  const Matrix Vm = p.liquidity_matrix();
  const Matrix Al = p.impact_matrix();
  const Matrix S = p.Sigma();
  CHECK(sup_diff(s.E.row(0).transpose(), E0) == 0.0);
  double worst = 0.0, scale = E0.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 1; k <= 100; ++k) {
    const Vector x = s.E.row(k).transpose(), xp = s.E.row(k - 1).transpose();
    const Vector y = s.Edot.row(k).transpose(), yp = s.Edot.row(k - 1).transpose();
    worst = std::max(worst, (x - xp - dt * yp).cwiseAbs().maxCoeff());
    const Vector r2 = y - yp - dt * (2 * p.gamma * Vm * S * x - 2 * Vm * Al * y);
    worst = std::max(worst, r2.cwiseAbs().maxCoeff() / (Vm.maxCoeff() * dt));
  }
  CHECK(worst <= 1e-9 * scale);
  CHECK(core::boundary_residual(p, s) <= 1e-8 * (1 + E0.norm()));
  CHECK(sup_diff(s.mu, s.Edot) == 0.0);
  CHECK(s.Hs.row(100).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.h(100) == 0.0);
}

TEST_CASE("mean field: zero initial inventory") {
  const auto s = core::solve_mean_field_identical(three_asset(5e-5), Vector::Zero(3),
                                                  TimeGrid(50, 1.0));
  CHECK(s.E.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.mu.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.Hs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mean field: linearity in E0") {
  const auto p = three_asset(5e-3, 0.6, 0.3, 0.05);
  const TimeGrid g(200, 1.0);
  const Vector a = vec({1e5, -2e4, 3e4}), b = vec({-5e3, 7e4, 1e4});
  const auto sa = core::solve_mean_field_identical(p, a, g);
  const auto sb = core::solve_mean_field_identical(p, b, g);
  const auto sc = core::solve_mean_field_identical(p, 2.0 * a - 0.5 * b, g);
  const core::Path comb = 2.0 * sa.E - 0.5 * sb.E;
  CHECK(sup_diff(sc.E, comb) <= 1e-9 * comb.cwiseAbs().maxCoeff());
}

TEST_CASE("mean field: block decoupling") {
  Matrix corr = Matrix::Identity(2, 2);
  const auto p = core::MarketParams::make(vec({0.3, 1.0}), corr, vec({2e6, 5e5}),
                                          vec({0.1, 0.3}), vec({8e-4, 1e-4}),
                                          vec({2.5, 1.0}), 1e-3, 1.0);
  const TimeGrid g(300, 1.0);
  const auto s = core::solve_mean_field_identical(p, vec({1e5, -4e4}), g);
  const auto s1 = core::solve_mean_field_identical(scalar(0.3, 2e6, 0.1, 8e-4, 2.5, 1e-3),
                                                   vec({1e5}), g);
  const auto s2 = core::solve_mean_field_identical(scalar(1.0, 5e5, 0.3, 1e-4, 1.0, 1e-3),
                                                   vec({-4e4}), g);
  CHECK(sup_diff(s.E.col(0), s1.E.col(0)) <= 1e-9 * 1e5);
  CHECK(sup_diff(s.E.col(1), s2.E.col(0)) <= 1e-9 * 4e4);
  CHECK(sup_diff(s.Hs.col(1), s2.Hs.col(0)) <=
        1e-9 * (1 + s2.Hs.cwiseAbs().maxCoeff()));
}

namespace {

// Liquidity three orders below the reference market: 2𝕍α is O(10) per unit
// time, so grids of a few hundred steps are in the asymptotic regime.
core::MarketParams resolved_three_asset(double gamma) {
  auto p = three_asset(gamma);
  p.V = vec({2e3, 5e3, 5e3});
  return p;
}

}  // namespace

TEST_CASE("mean field: first-order convergence in the step") {
  const auto p = resolved_three_asset(5e-3);
  const Vector E0 = vec({1e5, 5e4, -2.5e4});
  const auto ref = core::solve_mean_field_identical(p, E0, TimeGrid(12800, 1.0));
  auto err = [&](std::size_t n) {
    const auto s = core::solve_mean_field_identical(p, E0, TimeGrid(n, 1.0));
    const std::size_t stride = 12800 / n;
    double e = 0.0;
    for (std::size_t k = 0; k <= n; ++k)
      e = std::max(e, (s.E.row(static_cast<Eigen::Index>(k)) -
                       ref.E.row(static_cast<Eigen::Index>(k * stride)))
                          .cwiseAbs()
                          .maxCoeff());
    return e;
  };
  const double e1 = err(200), e2 = err(400), e3 = err(800);
  CHECK(std::log2(e1 / e2) >= 0.9);
  CHECK(std::log2(e2 / e3) >= 0.9);
}

TEST_CASE("linear coefficient and value constant") {
  SUBCASE("alpha = 0 gives no linear term") {
    auto p = three_asset(5e-3);
    p.alpha.setZero();
    const auto s = core::solve_mean_field_identical(p, vec({1e5, 5e4, -2.5e4}),
                                                    TimeGrid(100, 1.0));
    CHECK(s.Hs.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.h.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("scalar backward recursion matches a fine quadrature") {
    // ℋ(t) = ∫_t^T exp(∫_t^w 2vH) α μ(w) dw with μ held piecewise constant.
    const double V = 4e3, eta = 0.5, A = 1.0, alpha = 2e-3;
    const auto p = scalar(0.5, V, eta, alpha, A, 0.0);
    const TimeGrid g(50, 1.0);
    const auto r = core::solve_riccati(p, g);
    const double v = V / (4 * eta);
    core::Path mu(51, 1);
    for (Eigen::Index k = 0; k <= 50; ++k) mu(k, 0) = std::cos(3.0 * g.node(k)) * 1e3;
    const core::Path Hs = core::linear_coefficient(r, p.alpha, mu);
    auto X = [&](double t) { return 1 + 4 * A * v * (1 - t); };  // up to a constant
    for (std::size_t k : {0u, 17u, 49u}) {
      double acc = 0.0;
      for (std::size_t j = k; j < 50; ++j) {
        const int m = 2000;
        const double a = g.node(j), h = g.dt() / m;
        double part = 0.0;
        for (int q = 0; q <= m; ++q) {
          const double w = a + q * h;
          part += (q == 0 || q == m ? 0.5 : 1.0) * X(w) / X(g.node(k));
        }
        acc += part * h * alpha * mu(static_cast<Eigen::Index>(j), 0);
      }
      CHECK(Hs(static_cast<Eigen::Index>(k), 0) == doctest::Approx(acc).epsilon(1e-6));
    }
    const Vector h = core::value_constant(r, Hs);
    double trap = 0.0;
    for (std::size_t k = 50; k-- > 0;)
      trap += 0.5 * g.dt() * v * (Hs(k, 0) * Hs(k, 0) + Hs(k + 1, 0) * Hs(k + 1, 0));
    CHECK(h(0) == doctest::Approx(trap).epsilon(1e-12));
  }
}

TEST_CASE("optimal speed") {
  const auto p = three_asset(5e-3);
  const TimeGrid g(2000, 1.0);
  const auto s = core::solve_mean_field_identical(p, vec({1e5, 5e4, -2.5e4}), g);
  const Vector q = vec({3e4, -1e4, 2e3});
  SUBCASE("q = E follows the mean field") {
    for (std::size_t k : {0u, 500u, 2000u}) {
      const auto sp = core::optimal_speed(s, k, s.E.row(static_cast<Eigen::Index>(k)).transpose());
      CHECK(sup_diff(sp.total, s.Edot.row(static_cast<Eigen::Index>(k)).transpose()) == 0.0);
      CHECK(sup_diff(sp.v1 + sp.v2, sp.total) <= 1e-9 * sp.total.cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("terminal node") {
    const auto sp = core::optimal_speed(s, 2000, q);
    const Vector expect = -4.0 * p.liquidity().cwiseProduct(p.A_term.cwiseProduct(q));
    CHECK(sup_diff(core::feedback_speed(s, 2000, q), expect) <=
          1e-12 * expect.cwiseAbs().maxCoeff());
    CHECK(sup_diff(sp.v1, expect) <= 1e-12 * expect.cwiseAbs().maxCoeff());
  }
  SUBCASE("feedback and mean-field forms agree along q = E") {
    // both are first-order discretisations of the same continuum speed
    const auto pr = resolved_three_asset(5e-3);
    auto gap = [&](std::size_t n) {
      const auto sr = core::solve_mean_field_identical(pr, vec({1e5, 5e4, -2.5e4}), TimeGrid(n, 1.0));
      double worst = 0.0;
      for (std::size_t k = 0; k <= n; ++k) {
        const Vector E = sr.E.row(static_cast<Eigen::Index>(k)).transpose();
        worst = std::max(worst, sup_diff(core::feedback_speed(sr, k, E),
                                         core::optimal_speed(sr, k, E).total));
      }
      return worst / sr.Edot.cwiseAbs().maxCoeff();
    };
    const double g1 = gap(2000), g2 = gap(4000);
    CHECK(g2 <= 1e-2);
    CHECK(std::log2(g1 / g2) >= 0.9);
  }
  SUBCASE("no impact reduces to the Almgren-Chriss speed") {
    const auto pr = resolved_three_asset(5e-3);
    auto p0 = pr;
    p0.alpha.setZero();
    auto gap = [&](std::size_t n) {
      const auto s0 = core::solve_mean_field_identical(p0, vec({1e5, 5e4, -2.5e4}), TimeGrid(n, 1.0));
      double worst = 0.0, scale = 0.0;
      for (std::size_t k = 0; k <= n; ++k) {
        const Vector ac = 2.0 * p0.liquidity().asDiagonal() * (s0.riccati.H[k] * q);
        worst = std::max(worst, sup_diff(core::optimal_speed(s0, k, q).total, ac));
        scale = std::max(scale, ac.cwiseAbs().maxCoeff());
        // the feedback form has no mean-field term at all
        CHECK(sup_diff(core::feedback_speed(s0, k, q), ac) == 0.0);
      }
      return worst / scale;
    };
    const double g1 = gap(1000), g2 = gap(2000);
    CHECK(g2 <= 1e-4);
    CHECK(std::log2(g1 / g2) >= 0.9);
  }
}

TEST_CASE("agent trajectories") {
  const auto p = three_asset(5e-5);
  const TimeGrid g(1000, 1.0);
  const Vector E0 = vec({1e5, 5e4, -2.5e4});
  const auto s = core::solve_mean_field_identical(p, E0, g);
  SUBCASE("starting at the mean field tracks it") {
    const auto tr = core::simulate_agent(E0, s, p);
    CHECK(sup_diff(tr.q, s.E) <= 1e-9 * E0.cwiseAbs().maxCoeff());
    CHECK(sup_diff(tr.v, s.Edot) <= 1e-9 * s.Edot.cwiseAbs().maxCoeff());
  }
  SUBCASE("nothing to trade") {
    // The integrator follows E exactly, so without impact a flat agent only
    // picks up the scheme's own O(δt) speed defect Ė - 2𝕍ℍE.
    const auto pr = resolved_three_asset(5e-5);
    auto p0 = pr;
    p0.alpha.setZero();
    auto run = [&](std::size_t n) {
      const auto s0 = core::solve_mean_field_identical(p0, E0, TimeGrid(n, 1.0));
      return core::simulate_agent(Vector::Zero(3), s0, p0);
    };
    const auto t1 = run(1000), t2 = run(2000);
    CHECK(t1.q.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(t1.q.cwiseAbs().maxCoeff() <= 1e-5 * E0.cwiseAbs().maxCoeff());
    CHECK(std::log2(t1.q.cwiseAbs().maxCoeff() / t2.q.cwiseAbs().maxCoeff()) >= 0.9);
    CHECK(std::log2(t1.v.cwiseAbs().maxCoeff() / t2.v.cwiseAbs().maxCoeff()) >= 0.9);
    CHECK(std::log2(t1.cash.cwiseAbs().maxCoeff() / t2.cash.cwiseAbs().maxCoeff()) >= 0.9);
  }
  SUBCASE("speeds are the feedback rule at the visited positions") {
    const Vector q0 = vec({-2e4, 3e4, 0});
    const auto tr = core::simulate_agent(q0, s, p);
    for (std::size_t k : {0u, 10u, 999u}) {
      const Vector qk = tr.q.row(static_cast<Eigen::Index>(k)).transpose();
      CHECK(sup_diff(tr.v.row(static_cast<Eigen::Index>(k)).transpose(),
                           core::optimal_speed(s, k, qk).total) == 0.0);
    }
    // cash pays the executed quantity at the pre-trade price plus the
    // quadratic execution cost
    const auto k = 5;
    const Vector dq = (tr.q.row(k + 1) - tr.q.row(k)).transpose();
    const double cost = (p.eta.cwiseQuotient(p.V).array() * dq.array().square()).sum() / g.dt();
    CHECK(tr.cash(k + 1) - tr.cash(k) ==
          doctest::Approx(-(dq.dot(tr.price.row(k).transpose()) + cost)).epsilon(1e-12));
    CHECK(tr.q.row(1000).cwiseAbs().maxCoeff() < 1e-3 * q0.cwiseAbs().maxCoeff());
  }
  SUBCASE("liquidity arbitrage on untouched assets") {
    const auto tr = core::simulate_agent(vec({1e5, 0, 0}), s, p);
    CHECK(tr.q.col(1).minCoeff() < -1e3);
    CHECK(tr.q.col(2).maxCoeff() > 1e3);
    CHECK(std::abs(tr.q(1000, 1)) < 1.0);
    CHECK(std::abs(tr.q(1000, 2)) < 1.0);
  }
  SUBCASE("stable on a stiff grid") {
    const auto ps = three_asset(5e-2);
    const auto ss = core::solve_mean_field_identical(ps, E0, TimeGrid(100, 1.0));
    const auto tr = core::simulate_agent(vec({1e5, 0, 0}), ss, ps);
    CHECK(tr.q.allFinite());
    CHECK(tr.q.cwiseAbs().maxCoeff() <= 1e5 * (1 + 1e-9));
  }
  SUBCASE("mismatched price path is rejected") {
    core::Path bad(10, 3);
    bad.setZero();
    CHECK_THROWS_AS(core::simulate_agent(E0, s, p, &bad), InvalidArgument);
  }
}

namespace {

// Dense joint solve of the two-class scheme for d = 1, coupled through
// μ_k = Σ_a w_a y^a_k.
std::vector<Vector> joint_two_class(double V, double eta, double alpha, double sigma,
                                    const std::vector<core::AgentClass>& cls,
                                    const TimeGrid& g) {
  const std::size_t N = g.n_steps();
  const double dt = g.dt(), v = V / (4 * eta);
  const Eigen::Index n = static_cast<Eigen::Index>(2 * (N + 1));
  const Eigen::Index tot = 2 * n;
  Matrix M = Matrix::Zero(tot, tot);
  Vector rhs = Vector::Zero(tot);
  auto X = [&](int a, std::size_t k) { return a * n + static_cast<Eigen::Index>(k); };
  auto Y = [&](int a, std::size_t k) { return a * n + static_cast<Eigen::Index>(N + 1 + k); };
  Eigen::Index row = 0;
  for (int a = 0; a < 2; ++a) {
    const auto& c = cls[static_cast<std::size_t>(a)];
    M(row, X(a, 0)) = 1.0;
    rhs(row++) = c.E0(0);
    for (std::size_t k = 1; k <= N; ++k) {
      M(row, X(a, k)) = 1.0;
      M(row, X(a, k - 1)) = -1.0;
      M(row++, Y(a, k - 1)) = -dt;
      M(row, Y(a, k)) += 1.0;
      M(row, Y(a, k - 1)) -= 1.0;
      M(row, X(a, k)) -= dt * 2 * c.gamma * v * sigma * sigma;
      for (int b = 0; b < 2; ++b)
        M(row, Y(b, k)) += dt * 2 * v * alpha * cls[static_cast<std::size_t>(b)].weight;
      ++row;
    }
    M(row, X(a, N)) = 4 * v * c.A_term(0);
    M(row++, Y(a, N)) = 1.0;
  }
  const Vector z = M.fullPivLu().solve(rhs);
  return {z.segment(0, static_cast<Eigen::Index>(N + 1)),
          z.segment(n, static_cast<Eigen::Index>(N + 1))};
}

}  // namespace

TEST_CASE("heterogeneous fixed point") {
  SUBCASE("one class equals the identical-preferences solver") {
    const auto p = three_asset(5e-5);
    const TimeGrid g(200, 1.0);
    const Vector E0 = vec({1e5, 5e4, -2.5e4});
    core::AgentClass c{1.0, p.gamma, p.A_term, E0};
    // low liquidity keeps the sweep contracting
    auto ps = p;
    ps.V = vec({200, 500, 500});
    const auto id = core::solve_mean_field_identical(ps, E0, g);
    const auto het = core::solve_mean_field_heterogeneous(ps, {c}, g);
    CHECK(sup_diff(het.classes[0].E, id.E) <= 1e-10 * E0.cwiseAbs().maxCoeff());
    CHECK(sup_diff(het.mu, id.mu) <= 1e-10 * (1 + id.mu.cwiseAbs().maxCoeff()));
  }
  SUBCASE("no impact decouples the classes") {
    auto p = three_asset(5e-5);
    p.alpha.setZero();
    const TimeGrid g(100, 1.0);
    std::vector<core::AgentClass> cls{{0.3, 1e-4, Vector::Constant(3, 2.5), vec({1e5, 0, 0})},
                                      {0.7, 1e-6, Vector::Constant(3, 1.0), vec({0, 2e4, -1e4})}};
    const auto het = core::solve_mean_field_heterogeneous(p, cls, g);
    CHECK(het.iterations <= 2);
    for (std::size_t a = 0; a < 2; ++a) {
      auto pa = p;
      pa.gamma = cls[a].gamma;
      pa.A_term = cls[a].A_term;
      const auto s = core::solve_mean_field_identical(pa, cls[a].E0, g);
      CHECK(sup_diff(het.classes[a].E, s.E) <= 1e-9 * 1e5);
    }
  }
  SUBCASE("matches a direct joint solve") {
    const double V = 100, eta = 0.1, alpha = 8e-4, sigma = 0.5;
    const auto p = scalar(sigma, V, eta, alpha, 2.5, 0.0);
    const TimeGrid g(60, 1.0);
    std::vector<core::AgentClass> cls{{0.4, 1e-2, vec({2.5}), vec({1e4})},
                                      {0.6, 1e-4, vec({0.5}), vec({-3e3})}};
    const auto het = core::solve_mean_field_heterogeneous(p, cls, g);
    const auto joint = joint_two_class(V, eta, alpha, sigma, cls, g);
    CHECK(sup_diff(het.classes[0].E.col(0), joint[0]) <= 1e-8 * 1e4);
    // residual sequence contracts geometrically
    for (std::size_t i = 1; i < het.residuals.size(); ++i)
      CHECK(het.residuals[i] < het.residuals[i - 1]);
  }
  SUBCASE("strong impact at high liquidity diverges") {
    const auto p = three_asset(5e-5);
    std::vector<core::AgentClass> cls{{0.5, 5e-5, p.A_term, vec({1e5, 5e4, -2.5e4})},
                                      {0.5, 5e-2, p.A_term, vec({-1e4, 0, 1e4})}};
    try {
      core::solve_mean_field_heterogeneous(p, cls, TimeGrid(100, 1.0));
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.impact_norm() == doctest::Approx(8e-4));
      CHECK(e.residuals().size() >= 3);
    }
  }
  SUBCASE("weights must sum to one") {
    const auto p = three_asset(5e-5);
    std::vector<core::AgentClass> cls{{0.5, 5e-5, p.A_term, Vector::Zero(3)}};
    CHECK_THROWS_AS(core::solve_mean_field_heterogeneous(p, cls, TimeGrid(10, 1.0)),
                    InvalidArgument);
  }
}
