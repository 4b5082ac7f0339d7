#include "mfgp/io/scenario.hpp"

#include <cstdio>
#include <set>

#include "json.hpp"
#include "mfgp/io/panel_io.hpp"

namespace mfgp::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(ErrorCode c, const std::string& msg) { throw ScenarioError(c, msg); }

struct Field {
  std::string base;
  std::string unit;  // empty for dimensionless
  std::string name() const { return unit.empty() ? base : base + "_" + unit; }
};

// Rejects unknown keys. A key sharing a known base but with another unit
// suffix is reported as a unit mismatch.
void check_keys(const json& obj, const std::string& section,
                const std::vector<Field>& fields) {
  if (!obj.is_object()) fail(ErrorCode::kSchema, section + ": expected an object");
  std::set<std::string> names;
  for (const auto& f : fields) names.insert(f.name());
  for (const auto& [key, _] : obj.items()) {
    if (names.count(key)) continue;
    for (const auto& f : fields)
      if (key.rfind(f.base + "_", 0) == 0 || key == f.base)
        fail(ErrorCode::kUnits, section + "." + key + ": unit mismatch, expected field '" +
                                    f.name() + "'");
    fail(ErrorCode::kSchema, section + ": unknown field '" + key + "'");
  }
}

const json& need(const json& obj, const std::string& section, const Field& f) {
  const auto it = obj.find(f.name());
  if (it == obj.end()) fail(ErrorCode::kSchema, section + ": missing field '" + f.name() + "'");
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(ErrorCode::kSchema, where + ": expected a number");
  return v.get<double>();
}

std::size_t as_count(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) fail(ErrorCode::kSchema, where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

core::Vector as_vector(const json& v, const std::string& where, Eigen::Index d) {
  if (d > 0 && v.is_number()) return core::Vector::Constant(d, v.get<double>());
  if (!v.is_array()) fail(ErrorCode::kSchema, where + ": expected an array");
  core::Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = as_number(v[i], where);
  if (d > 0 && out.size() != d)
    fail(ErrorCode::kSchema, where + ": expected " + std::to_string(d) + " entries");
  return out;
}

core::Matrix as_matrix(const json& v, const std::string& where, Eigen::Index d) {
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != d)
    fail(ErrorCode::kSchema, where + ": expected a " + std::to_string(d) + "x" + std::to_string(d) + " array");
  core::Matrix out(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto row = as_vector(v[static_cast<std::size_t>(i)], where, 0);
    if (row.size() != d) fail(ErrorCode::kSchema, where + ": ragged matrix row");
    out.row(i) = row.transpose();
  }
  return out;
}

const Field kSigma{"sigma", "usd_per_sqrt_day_per_share"}, kCorr{"correlation", ""},
    kVolume{"volume", "shares_per_day"}, kEta{"eta", "usd_per_share"},
    kAlpha{"alpha", "usd_per_share"}, kPenalty{"terminal_penalty", "usd_per_day_per_share"},
    kGamma{"gamma", "per_usd"}, kHorizon{"horizon", "days"};

}  // namespace

const char* error_kind(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kUnits: return "units";
    case ErrorCode::kMissingInput: return "missing_input";
    case ErrorCode::kData: return "data";
    case ErrorCode::kSolver: return "solver";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInternal: return "internal";
  }
  return "internal";
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

sim::SimConfig Scenario::sim_config() const {
  if (!simulation) fail(ErrorCode::kMissingInput, "scenario has no 'simulation' section");
  sim::SimConfig c;
  c.seed = seed;
  c.n_days = simulation->n_days;
  c.n_bins = simulation->n_bins;
  c.steps_per_bin = simulation->steps_per_bin;
  c.params = params;
  c.law.Gamma = simulation->inventory_covariance;
  c.law.mean = simulation->inventory_mean;
  c.initial_price = simulation->initial_price;
  c.flow_noise_sd = simulation->flow_noise_sd;
  return c;
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kSchema, std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::kSchema, "scenario: top level must be an object");
  check_keys(doc, "scenario",
             {{"name", ""}, {"description", ""}, {"seed", ""}, {"market", ""}, {"grid", ""},
              {"mean_field", ""}, {"agent", ""}, {"simulation", ""}, {"analysis", ""},
              {"calibration", ""}});

  Scenario sc;
  sc.canonical = doc.dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(sc.canonical)));
  sc.hash = buf;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) fail(ErrorCode::kSchema, "seed: expected a non-negative integer");
    sc.seed = doc["seed"].get<std::uint64_t>();
  }

  if (!doc.contains("market")) fail(ErrorCode::kSchema, "scenario: missing section 'market'");
  const json& m = doc["market"];
  check_keys(m, "market", {kSigma, kCorr, kVolume, kEta, kAlpha, kPenalty, kGamma, kHorizon});
  const core::Vector sigma = as_vector(need(m, "market", kSigma), "market.sigma", 0);
  const Eigen::Index d = sigma.size();
  if (d == 0) fail(ErrorCode::kSchema, "market.sigma: empty");
  const core::Matrix corr = m.contains("correlation")
                                ? as_matrix(m["correlation"], "market.correlation", d)
                                : core::Matrix::Identity(d, d);
  try {
    sc.params = core::MarketParams::make(
        sigma, corr, as_vector(need(m, "market", kVolume), "market.volume", d),
        as_vector(need(m, "market", kEta), "market.eta", d),
        as_vector(need(m, "market", kAlpha), "market.alpha", d),
        as_vector(need(m, "market", kPenalty), "market.terminal_penalty", d),
        as_number(need(m, "market", kGamma), "market.gamma"),
        m.contains(kHorizon.name()) ? as_number(m[kHorizon.name()], "market.horizon") : 1.0);
  } catch (const InvalidArgument& e) {
    fail(ErrorCode::kSchema, std::string("market: ") + e.what());
  }

  if (doc.contains("grid")) {
    check_keys(doc["grid"], "grid", {{"n_steps", ""}});
    if (doc["grid"].contains("n_steps")) sc.n_steps = as_count(doc["grid"]["n_steps"], "grid.n_steps");
    if (sc.n_steps == 0) fail(ErrorCode::kSchema, "grid.n_steps must be positive");
  }
  if (doc.contains("mean_field")) {
    const Field f{"initial_inventory", "shares"};
    check_keys(doc["mean_field"], "mean_field", {f});
    if (doc["mean_field"].contains(f.name()))
      sc.initial_inventory = as_vector(doc["mean_field"][f.name()], "mean_field.initial_inventory", d);
  }
  if (doc.contains("agent")) {
    const Field f{"initial_position", "shares"};
    check_keys(doc["agent"], "agent", {f});
    if (doc["agent"].contains(f.name()))
      sc.agent_position = as_vector(doc["agent"][f.name()], "agent.initial_position", d);
  }
  if (doc.contains("simulation")) {
    const json& s = doc["simulation"];
    const Field days{"n_days", ""}, bins{"n_bins", ""}, spb{"steps_per_bin", ""},
        cov{"inventory_covariance", "shares2"}, scale{"inventory_scale", "shares"},
        icorr{"inventory_correlation", ""}, mean{"inventory_mean", "shares"},
        s0{"initial_price", "usd_per_share"}, noise{"flow_noise_sd", "shares"};
    check_keys(s, "simulation", {days, bins, spb, cov, scale, icorr, mean, s0, noise});
    SimulationSection sim;
    sim.n_days = as_count(need(s, "simulation", days), "simulation.n_days");
    sim.n_bins = as_count(need(s, "simulation", bins), "simulation.n_bins");
    if (s.contains("steps_per_bin")) sim.steps_per_bin = as_count(s["steps_per_bin"], "simulation.steps_per_bin");
    if (s.contains(cov.name())) {
      sim.inventory_covariance = as_matrix(s[cov.name()], "simulation.inventory_covariance", d);
    } else if (s.contains(scale.name())) {
      const double lam = as_number(s[scale.name()], "simulation.inventory_scale");
      const core::Matrix c = s.contains("inventory_correlation")
                                 ? as_matrix(s["inventory_correlation"], "simulation.inventory_correlation", d)
                                 : core::Matrix::Identity(d, d);
      sim.inventory_covariance = lam * lam * c;
    } else {
      fail(ErrorCode::kSchema, "simulation: need '" + cov.name() + "' or '" + scale.name() + "'");
    }
    if (s.contains(mean.name())) sim.inventory_mean = as_vector(s[mean.name()], "simulation.inventory_mean", d);
    if (s.contains(s0.name())) sim.initial_price = as_number(s[s0.name()], "simulation.initial_price");
    if (s.contains(noise.name())) sim.flow_noise_sd = as_number(s[noise.name()], "simulation.flow_noise_sd");
    if (sim.n_days == 0 || sim.n_bins == 0 || sim.steps_per_bin == 0)
      fail(ErrorCode::kSchema, "simulation: counts must be positive");
    try {
      sim::inventory_factor(sim.inventory_covariance);
    } catch (const InvalidArgument& e) {
      fail(ErrorCode::kSchema, std::string("simulation: ") + e.what());
    }
    sc.simulation = sim;
  }
  if (doc.contains("analysis")) {
    check_keys(doc["analysis"], "analysis", {{"lambdas", ""}});
    if (doc["analysis"].contains("lambdas")) {
      const auto v = as_vector(doc["analysis"]["lambdas"], "analysis.lambdas", 0);
      sc.lambdas.assign(v.data(), v.data() + v.size());
      for (double l : sc.lambdas)
        if (!(l >= 0.0)) fail(ErrorCode::kSchema, "analysis.lambdas must be >= 0");
    }
  }
  if (doc.contains("calibration")) {
    const json& c = doc["calibration"];
    const Field pen{"terminal_penalty", "usd_per_day_per_share"}, src{"fundamental", ""},
        frac{"fundamental_fraction", ""}, shift{"shift_fraction", ""}, rs{"restarts", ""},
        ev{"max_evaluations", ""}, kb{"k_bounds", "shares2_per_usd_per_day"},
        gb{"gamma_bounds", "per_usd"}, Gb{"inventory_variance_bounds", "shares2"};
    check_keys(c, "calibration", {pen, src, frac, shift, rs, ev, kb, gb, Gb});
    auto& cal = sc.calibration;
    if (c.contains(pen.name())) cal.A_term = as_number(c[pen.name()], "calibration.terminal_penalty");
    if (c.contains("fundamental")) {
      const auto s = c["fundamental"].is_string() ? c["fundamental"].get<std::string>() : "";
      if (s == "pattern_fraction") cal.source = calib::FundamentalSource::kPatternFraction;
      else if (s == "flow_adjusted") cal.source = calib::FundamentalSource::kFlowAdjusted;
      else fail(ErrorCode::kSchema, "calibration.fundamental: expected 'pattern_fraction' or 'flow_adjusted'");
    }
    if (c.contains("fundamental_fraction")) cal.fundamental_fraction = as_number(c["fundamental_fraction"], "calibration.fundamental_fraction");
    if (c.contains("shift_fraction")) cal.shift_fraction = as_number(c["shift_fraction"], "calibration.shift_fraction");
    if (c.contains("restarts")) cal.restarts = as_count(c["restarts"], "calibration.restarts");
    if (c.contains("max_evaluations")) cal.max_evaluations = as_count(c["max_evaluations"], "calibration.max_evaluations");
    auto pair = [&](const Field& f, double& lo, double& hi) {
      if (!c.contains(f.name())) return;
      const auto v = as_vector(c[f.name()], "calibration." + f.base, 0);
      if (v.size() != 2) fail(ErrorCode::kSchema, "calibration." + f.base + ": expected [low, high]");
      lo = v(0);
      hi = v(1);
    };
    pair(kb, cal.bounds.k_lo, cal.bounds.k_hi);
    pair(gb, cal.bounds.gamma_lo, cal.bounds.gamma_hi);
    pair(Gb, cal.bounds.Gamma_lo, cal.bounds.Gamma_hi);
    try {
      cal.bounds.validate();
    } catch (const InvalidArgument& e) {
      fail(ErrorCode::kSchema, e.what());
    }
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    fail(ErrorCode::kMissingInput, "cannot read scenario file " + path);
  }
  return parse_scenario(text);
}

}  // namespace mfgp::io
