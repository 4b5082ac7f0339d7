#include "mfgp/sim/market_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "mfgp/errors.hpp"
#include "mfgp/sim/seeding.hpp"

namespace mfgp::sim {

namespace {

Vector gaussian(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> z(0.0, 1.0);
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = z(rng);
  return out;
}

Vector draw_inventory(const Matrix& factor, const Vector& mean,
                      std::uint64_t seed, std::size_t day) {
  std::mt19937_64 rng(derive_seed(seed, day, Stream::kInventory));
  return mean + factor * gaussian(rng, factor.cols());
}

}  // namespace

Matrix inventory_factor(const Matrix& Gamma) {
  if (Gamma.rows() != Gamma.cols() || Gamma.rows() == 0)
    throw InvalidArgument("inventory law: Gamma must be square");
  if (!Gamma.allFinite()) throw InvalidArgument("inventory law: Gamma not finite");
  const double scale = Gamma.cwiseAbs().maxCoeff();
  if (scale == 0.0) return Matrix::Zero(Gamma.rows(), Gamma.cols());
  if ((Gamma - Gamma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("inventory law: Gamma not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(Gamma);
  Vector ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-10 * scale)
    throw InvalidArgument("inventory law: Gamma not positive semidefinite");
  ev = ev.cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

std::vector<Vector> sample_inventories(const InventoryLaw& law,
                                       std::uint64_t seed, std::size_t n_days) {
  const Matrix factor = inventory_factor(law.Gamma);
  const Vector mean = law.mean_or_zero();
  if (mean.size() != law.Gamma.rows())
    throw InvalidArgument("inventory law: mean size");
  std::vector<Vector> out;
  out.reserve(n_days);
  for (std::size_t l = 0; l < n_days; ++l)
    out.push_back(draw_inventory(factor, mean, seed, l));
  return out;
}

MarketPanel::MarketPanel(std::size_t n_days, std::size_t n_bins, std::size_t d,
                         std::vector<double> bin_times, bool has_flows)
    : n_days_(n_days),
      n_bins_(n_bins),
      d_(d),
      has_flows_(has_flows),
      bin_times_(std::move(bin_times)),
      prices_(n_days * (n_bins + 1) * d, 0.0),
      flows_(has_flows ? n_days * n_bins * d : 0, 0.0) {
  if (n_bins == 0 || d == 0) throw InvalidArgument("MarketPanel: empty shape");
  if (bin_times_.size() != n_bins + 1)
    throw InvalidArgument("MarketPanel: need n_bins + 1 bin boundaries");
  asset_names_.reserve(d);
  for (std::size_t i = 0; i < d; ++i)
    asset_names_.push_back("A" + std::to_string(i));
}

void MarketPanel::validate() const {
  for (std::size_t k = 0; k + 1 < bin_times_.size(); ++k)
    if (!(bin_times_[k + 1] > bin_times_[k]))
      throw DataError("panel: bin times not strictly increasing");
  for (double p : prices_)
    if (!std::isfinite(p)) throw DataError("panel: non-finite price");
  for (double f : flows_)
    if (!std::isfinite(f)) throw DataError("panel: non-finite flow");
  if (asset_names_.size() != d_) throw DataError("panel: asset name count");
}

void SimConfig::validate() const {
  params.validate();
  if (n_days == 0) throw InvalidArgument("simulation: n_days must be positive");
  if (n_bins == 0 || steps_per_bin == 0)
    throw InvalidArgument("simulation: bins and steps per bin must be positive");
  if (law.Gamma.rows() != params.d() || law.Gamma.cols() != params.d())
    throw InvalidArgument("simulation: inventory covariance dimension");
  if (!(flow_noise_sd >= 0.0))
    throw InvalidArgument("simulation: flow noise sd must be >= 0");
}

std::vector<double> uniform_bin_times(std::size_t n_bins, double T) {
  const core::TimeGrid g(n_bins, T);
  std::vector<double> t(n_bins + 1);
  for (std::size_t k = 0; k <= n_bins; ++k) t[k] = g.node(k);
  return t;
}

DaySimulator::DaySimulator(const core::MarketParams& params,
                           const core::TimeGrid& grid, std::size_t n_bins,
                           double initial_price, double flow_noise_sd)
    : params_(params),
      grid_(grid),
      n_bins_(n_bins),
      steps_per_bin_(0),
      initial_price_(initial_price),
      flow_noise_sd_(flow_noise_sd) {
  params_.validate();
  if (n_bins == 0 || grid.n_steps() % n_bins != 0)
    throw InvalidArgument("simulation: bin grid must be a sub-grid of the solver grid");
  steps_per_bin_ = grid.n_steps() / n_bins;
  const auto op = core::MeanFieldOperator::identical(params_, grid_);
  const Eigen::Index d = params_.d();
  for (Eigen::Index l = 0; l < d; ++l)
    unit_x_.push_back(op.solve(Vector::Unit(d, l)).x);
  const Matrix Sigma = params_.Sigma();
  Eigen::LLT<Matrix> llt(Sigma);
  if (llt.info() != Eigen::Success)
    throw InvalidArgument("simulation: Sigma not positive definite");
  noise_factor_ = llt.matrixL();
}

core::Path DaySimulator::inventory_path(const Vector& E0) const {
  if (E0.size() != static_cast<Eigen::Index>(unit_x_.size()))
    throw InvalidArgument("simulation: E0 size");
  core::Path x = core::Path::Zero(unit_x_[0].rows(), unit_x_[0].cols());
  for (std::size_t l = 0; l < unit_x_.size(); ++l)
    x += E0(static_cast<Eigen::Index>(l)) * unit_x_[l];
  return x;
}

void DaySimulator::run(const Vector& E0, std::uint64_t noise_seed,
                       std::uint64_t flow_noise_seed, MarketPanel& panel,
                       std::size_t day) const {
  const core::Path x = inventory_path(E0);
  const Eigen::Index d = params_.d();
  const double sqdt = std::sqrt(grid_.dt());
  std::mt19937_64 noise(noise_seed);
  std::mt19937_64 flow_noise(flow_noise_seed);
  std::normal_distribution<double> z(0.0, 1.0);

  Vector S = Vector::Constant(d, initial_price_);
  for (Eigen::Index i = 0; i < d; ++i)
    panel.price(day, 0, static_cast<std::size_t>(i)) = S(i);
  for (std::size_t b = 0; b < n_bins_; ++b) {
    const std::size_t k0 = b * steps_per_bin_;
    for (std::size_t s = 0; s < steps_per_bin_; ++s) {
      const auto k = static_cast<Eigen::Index>(k0 + s);
      const Vector drift =
          params_.alpha.cwiseProduct((x.row(k + 1) - x.row(k)).transpose());
      S += drift + noise_factor_ * gaussian(noise, d) * sqdt;
    }
    const auto k1 = static_cast<Eigen::Index>(k0 + steps_per_bin_);
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      panel.price(day, b + 1, ii) = S(i);
      if (panel.has_flows()) {
        double nu = x(k1, i) - x(static_cast<Eigen::Index>(k0), i);
        if (flow_noise_sd_ > 0.0) nu += flow_noise_sd_ * z(flow_noise);
        panel.flow(day, b, ii) = nu;
      }
    }
  }
}

MarketPanel simulate_day(const core::MarketParams& params, const Vector& E0,
                         const core::TimeGrid& grid, std::size_t n_bins,
                         std::uint64_t seed, double initial_price) {
  const DaySimulator sim(params, grid, n_bins, initial_price);
  MarketPanel panel(1, n_bins, static_cast<std::size_t>(params.d()),
                    uniform_bin_times(n_bins, grid.horizon()), true);
  sim.run(E0, derive_seed(seed, 0, Stream::kPriceNoise),
          derive_seed(seed, 0, Stream::kFlowNoise), panel, 0);
  return panel;
}

MarketPanel simulate_panel(const SimConfig& config, unsigned threads) {
  config.validate();
  const DaySimulator sim(config.params, config.grid(), config.n_bins,
                         config.initial_price, config.flow_noise_sd);
  const Matrix factor = inventory_factor(config.law.Gamma);
  const Vector mean = config.law.mean_or_zero();
  if (mean.size() != config.params.d())
    throw InvalidArgument("simulation: inventory mean size");

  MarketPanel panel(config.n_days, config.n_bins,
                    static_cast<std::size_t>(config.params.d()),
                    uniform_bin_times(config.n_bins, config.params.T), true);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t l = begin; l < end; ++l)
      sim.run(draw_inventory(factor, mean, config.seed, l),
              derive_seed(config.seed, l, Stream::kPriceNoise),
              derive_seed(config.seed, l, Stream::kFlowNoise), panel, l);
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n = config.n_days;
  const std::size_t workers = std::min<std::size_t>(threads, n);
  if (workers <= 1) {
    work(0, n);
    return panel;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(n, b + chunk);
    pool.emplace_back([&, w, b, e] {
      try {
        work(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return panel;
}

}  // namespace mfgp::sim
