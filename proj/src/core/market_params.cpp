#include "mfgp/core/market_params.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "mfgp/errors.hpp"

namespace mfgp::core {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

Matrix build_sigma(const Vector& sigma, const Matrix& corr) {
  const Eigen::Index d = sigma.size();
  require(d > 0, "build_sigma: empty volatility vector");
  require(corr.rows() == d && corr.cols() == d,
          "build_sigma: correlation must be d x d");
  require(all_finite(sigma) && all_finite(corr),
          "build_sigma: non-finite input");
  for (Eigen::Index i = 0; i < d; ++i) {
    require(sigma(i) > 0.0, "build_sigma: sigma_" + std::to_string(i) +
                                " must be positive");
    require(std::abs(corr(i, i) - 1.0) <= 1e-12,
            "build_sigma: correlation diagonal must be 1");
  }
  require((corr - corr.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          "build_sigma: correlation must be symmetric");

  // Sylvester's criterion; report the first failing leading minor.
  for (Eigen::Index k = 1; k <= d; ++k) {
    const double minor = corr.topLeftCorner(k, k).determinant();
    if (!(minor > 1e-14)) {
      std::ostringstream os;
      os << "build_sigma: correlation is not positive definite (leading minor "
         << k << " = " << minor << ")";
      throw InvalidArgument(os.str());
    }
  }
  Matrix sig = sigma.asDiagonal() * corr * sigma.asDiagonal();
  return 0.5 * (sig + sig.transpose());
}

MarketParams MarketParams::make(Vector sigma, Matrix corr, Vector V,
                                Vector eta, Vector alpha, Vector A_term,
                                double gamma, double T) {
  MarketParams p{std::move(sigma), std::move(corr), std::move(V),
                 std::move(eta),   std::move(alpha), std::move(A_term),
                 gamma,            T};
  p.validate();
  return p;
}

void MarketParams::validate() const {
  const Eigen::Index n = d();
  require(n > 0, "MarketParams: at least one asset required");
  require(V.size() == n && eta.size() == n && alpha.size() == n &&
              A_term.size() == n,
          "MarketParams: per-asset vectors must all have length d");
  require(all_finite(V) && all_finite(eta) && all_finite(alpha) &&
              all_finite(A_term) && std::isfinite(gamma) && std::isfinite(T),
          "MarketParams: non-finite parameter");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = std::to_string(i);
    require(V(i) > 0.0, "MarketParams: V_" + idx + " must be positive");
    require(eta(i) > 0.0, "MarketParams: eta_" + idx + " must be positive");
    require(A_term(i) > 0.0, "MarketParams: A_" + idx + " must be positive");
    require(alpha(i) >= 0.0,
            "MarketParams: alpha_" + idx + " must be non-negative");
  }
  require(gamma >= 0.0, "MarketParams: gamma must be non-negative");
  require(T > 0.0, "MarketParams: horizon T must be positive");
  (void)build_sigma(sigma, corr);
}

Matrix MarketParams::Sigma() const { return build_sigma(sigma, corr); }

Vector MarketParams::liquidity() const {
  return (V.array() / (4.0 * eta.array())).matrix();
}

}  // namespace mfgp::core
