#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfgp/core/mean_field.hpp"

namespace mfgp::sim {

using core::Matrix;
using core::Vector;

/// Gaussian law of the initial aggregate inventory E0.
struct InventoryLaw {
  Matrix Gamma;
  Vector mean;  // empty means zero

  Vector mean_or_zero() const {
    return mean.size() ? mean : Vector::Zero(Gamma.rows());
  }
};

/// Square-root factor L with L Lᵀ = Γ from the eigen-decomposition. Tiny
/// negative eigenvalues from round-off are clamped to zero; clearly negative
/// ones raise InvalidArgument.
Matrix inventory_factor(const Matrix& Gamma);

/// Draw for day l uses its own seed, so draws do not depend on n_days.
std::vector<Vector> sample_inventories(const InventoryLaw& law,
                                       std::uint64_t seed, std::size_t n_days);

/// Day x bin x asset table. Prices hold M+1 snapshots per day (bin
/// boundaries); flows hold the M signed bin volumes.
class MarketPanel {
 public:
  MarketPanel() = default;
  MarketPanel(std::size_t n_days, std::size_t n_bins, std::size_t d,
              std::vector<double> bin_times, bool has_flows);

  std::size_t n_days() const { return n_days_; }
  std::size_t n_bins() const { return n_bins_; }
  std::size_t d() const { return d_; }
  bool has_flows() const { return has_flows_; }
  const std::vector<double>& bin_times() const { return bin_times_; }
  std::vector<std::string>& asset_names() { return asset_names_; }
  const std::vector<std::string>& asset_names() const { return asset_names_; }

  double& price(std::size_t day, std::size_t snap, std::size_t i) {
    return prices_[(day * (n_bins_ + 1) + snap) * d_ + i];
  }
  double price(std::size_t day, std::size_t snap, std::size_t i) const {
    return prices_[(day * (n_bins_ + 1) + snap) * d_ + i];
  }
  double& flow(std::size_t day, std::size_t bin, std::size_t i) {
    return flows_[(day * n_bins_ + bin) * d_ + i];
  }
  double flow(std::size_t day, std::size_t bin, std::size_t i) const {
    return flows_[(day * n_bins_ + bin) * d_ + i];
  }
  // δS over bin k of day l.
  double increment(std::size_t day, std::size_t bin, std::size_t i) const {
    return price(day, bin + 1, i) - price(day, bin, i);
  }
  double bin_length(std::size_t bin) const {
    return bin_times_[bin + 1] - bin_times_[bin];
  }

  const std::vector<double>& prices() const { return prices_; }
  const std::vector<double>& flows() const { return flows_; }

  /// Throws DataError on non-monotone times or non-finite entries.
  void validate() const;

  bool operator==(const MarketPanel& o) const = default;

 private:
  std::size_t n_days_ = 0, n_bins_ = 0, d_ = 0;
  bool has_flows_ = false;
  std::vector<double> bin_times_;
  std::vector<std::string> asset_names_;
  std::vector<double> prices_;
  std::vector<double> flows_;
};

struct SimConfig {
  std::uint64_t seed = 0;
  std::size_t n_days = 1;
  std::size_t n_bins = 100;
  std::size_t steps_per_bin = 1;
  core::MarketParams params;
  InventoryLaw law;
  double initial_price = 100.0;
  // Extension: additive Gaussian noise on ν mimicking unmodelled traders.
  double flow_noise_sd = 0.0;

  core::TimeGrid grid() const {
    return core::TimeGrid(n_bins * steps_per_bin, params.T);
  }
  void validate() const;
};

/// Shared per-configuration state: the factorised mean-field scheme, its
/// responses to the unit initial inventories and the noise factor.
class DaySimulator {
 public:
  DaySimulator(const core::MarketParams& params, const core::TimeGrid& grid,
               std::size_t n_bins, double initial_price = 100.0,
               double flow_noise_sd = 0.0);

  /// Mean-field inventory path for E0 (linear combination of unit responses).
  core::Path inventory_path(const Vector& E0) const;

  /// Writes day `day` of `panel` for initial inventory E0.
  void run(const Vector& E0, std::uint64_t noise_seed,
           std::uint64_t flow_noise_seed, MarketPanel& panel,
           std::size_t day) const;

  std::size_t n_bins() const { return n_bins_; }
  std::size_t steps_per_bin() const { return steps_per_bin_; }
  const core::TimeGrid& grid() const { return grid_; }

 private:
  core::MarketParams params_;
  core::TimeGrid grid_;
  std::size_t n_bins_;
  std::size_t steps_per_bin_;
  double initial_price_;
  double flow_noise_sd_;
  std::vector<core::Path> unit_x_;  // E(t; e_ℓ)
  Matrix noise_factor_;             // chol(Σ)
};

std::vector<double> uniform_bin_times(std::size_t n_bins, double T);

/// One day as a single-day panel.
MarketPanel simulate_day(const core::MarketParams& params, const Vector& E0,
                         const core::TimeGrid& grid, std::size_t n_bins,
                         std::uint64_t seed, double initial_price = 100.0);

/// n_days independent days. Day l takes E0 from sample_inventories and
/// noise from derive_seed(seed, l, kPriceNoise). `threads` only affects
/// speed; 0 picks the hardware concurrency.
MarketPanel simulate_panel(const SimConfig& config, unsigned threads = 1);

}  // namespace mfgp::sim
