#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfgp/calib/calibration.hpp"
#include "mfgp/errors.hpp"
#include "mfgp/sim/market_sim.hpp"

namespace mfgp::io {

/// Process exit codes of the command-line tool.
enum class ErrorCode : int {
  kOk = 0,
  kUsage = 2,
  kSchema = 3,
  kUnits = 4,
  kMissingInput = 5,
  kData = 6,
  kSolver = 7,
  kIo = 8,
  kInternal = 9,
};

const char* error_kind(ErrorCode code);

class ScenarioError : public Error {
 public:
  ScenarioError(ErrorCode code, const std::string& what) : Error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct SimulationSection {
  std::size_t n_days = 0;
  std::size_t n_bins = 0;
  std::size_t steps_per_bin = 1;
  core::Matrix inventory_covariance;
  core::Vector inventory_mean;
  double initial_price = 100.0;
  double flow_noise_sd = 0.0;
};

struct CalibrationSection {
  double A_term = 10.0;
  calib::FundamentalSource source = calib::FundamentalSource::kPatternFraction;
  double fundamental_fraction = 0.2;
  double shift_fraction = 0.3;
  std::size_t restarts = 5;
  std::size_t max_evaluations = 4000;
  calib::CalibrationBounds bounds;
};

/// Parsed scenario file. Field names carry their units, e.g.
/// `sigma_usd_per_sqrt_day_per_share`.
struct Scenario {
  std::string canonical;  // sorted-key JSON dump the hash is taken over
  std::string hash;       // FNV-1a 64, hex
  std::uint64_t seed = 0;
  core::MarketParams params;
  std::size_t n_steps = 1000;
  std::optional<core::Vector> initial_inventory;
  std::optional<core::Vector> agent_position;
  std::optional<SimulationSection> simulation;
  std::vector<double> lambdas{1.0, 0.5, 0.25, 0.1};
  CalibrationSection calibration;

  sim::SimConfig sim_config() const;  // needs `simulation`
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace mfgp::io
