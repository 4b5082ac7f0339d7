#include "mfgp/io/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mfgp/calib/calibration.hpp"
#include "mfgp/core/agent.hpp"
#include "mfgp/cov/conditioning.hpp"
#include "mfgp/cov/excess.hpp"
#include "mfgp/cov/regression.hpp"
#include "mfgp/io/panel_io.hpp"
#include "mfgp/io/scenario.hpp"

namespace mfgp::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string command;
  std::string scenario;
  std::string out = ".";
  std::string panel;
  std::string meta;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
};

struct Context {
  Options opt;
  Scenario sc;

  std::string path(const std::string& name) const { return (fs::path(opt.out) / name).string(); }
  std::string header() const {
    return "# scenario_hash=" + sc.hash + " seed=" + std::to_string(sc.seed) + "\n";
  }
  std::string panel_csv() const { return opt.panel.empty() ? path("panel.csv") : opt.panel; }
  std::string panel_meta() const {
    if (!opt.meta.empty()) return opt.meta;
    fs::path p(panel_csv());
    return p.replace_extension(".json").string();
  }
  sim::MarketPanel load_panel() const {
    if (!fs::exists(panel_csv()))
      throw ScenarioError(ErrorCode::kMissingInput, "panel file not found: " + panel_csv());
    if (!fs::exists(panel_meta()))
      throw ScenarioError(ErrorCode::kMissingInput, "panel metadata not found: " + panel_meta());
    return read_panel(panel_csv(), panel_meta());
  }
};

std::string f(double x) { return format_double(x); }

std::string cols(const std::string& prefix, Eigen::Index d) {
  std::string s;
  for (Eigen::Index i = 0; i < d; ++i) s += "," + prefix + std::to_string(i);
  return s;
}

void put_row(std::string& s, const Eigen::Ref<const core::Vector>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) s += "," + f(v(i));
}

core::Vector need_inventory(const Scenario& sc) {
  if (!sc.initial_inventory)
    throw ScenarioError(ErrorCode::kMissingInput,
                        "scenario has no mean_field.initial_inventory_shares");
  return *sc.initial_inventory;
}

int cmd_solve(const Context& c, std::ostream& out) {
  const auto& p = c.sc.params;
  const core::TimeGrid grid(c.sc.n_steps, p.T);
  const auto sol = core::solve_mean_field_identical(p, need_inventory(c.sc), grid);
  const Eigen::Index d = p.d();
  std::string s = c.header() + "t" + cols("E", d) + cols("Edot", d) + cols("mu", d) +
                  cols("Hs", d) + ",h";
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) s += ",H" + std::to_string(i) + "_" + std::to_string(j);
  s += "\n";
  for (std::size_t k = 0; k < sol.n_nodes(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    s += f(grid.node(k));
    put_row(s, sol.E.row(r).transpose());
    put_row(s, sol.Edot.row(r).transpose());
    put_row(s, sol.mu.row(r).transpose());
    put_row(s, sol.Hs.row(r).transpose());
    s += "," + f(sol.h(r));
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i; j < d; ++j) s += "," + f(sol.riccati.H[k](i, j));
    s += "\n";
  }
  atomic_write(c.path("mean_field.csv"), s);
  const double res = core::boundary_residual(p, sol);
  json summary = {{"scenario_hash", c.sc.hash},
                  {"boundary_residual", res},
                  {"n_steps", c.sc.n_steps},
                  {"riccati_substeps_per_step", sol.riccati.substeps_per_step}};
  atomic_write(c.path("mean_field.json"), summary.dump(2) + "\n");
  out << "solve: wrote " << c.path("mean_field.csv") << " (boundary residual " << res << ")\n";
  return 0;
}

int cmd_agent(const Context& c, std::ostream& out) {
  const auto& p = c.sc.params;
  if (!c.sc.agent_position)
    throw ScenarioError(ErrorCode::kMissingInput, "scenario has no agent.initial_position_shares");
  const core::TimeGrid grid(c.sc.n_steps, p.T);
  const auto sol = core::solve_mean_field_identical(p, need_inventory(c.sc), grid);
  const auto tr = core::simulate_agent(*c.sc.agent_position, sol, p);
  const Eigen::Index d = p.d();
  std::string s = c.header() + "t" + cols("q", d) + cols("v", d) + cols("v1_", d) +
                  cols("v2_", d) + cols("S", d) + ",cash\n";
  for (std::size_t k = 0; k < sol.n_nodes(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    s += f(grid.node(k));
    put_row(s, tr.q.row(r).transpose());
    put_row(s, tr.v.row(r).transpose());
    put_row(s, tr.v1.row(r).transpose());
    put_row(s, tr.v2.row(r).transpose());
    put_row(s, tr.price.row(r).transpose());
    s += "," + f(tr.cash(r)) + "\n";
  }
  atomic_write(c.path("agent.csv"), s);
  json summary = {{"scenario_hash", c.sc.hash}, {"reward_terminal", tr.reward_terminal}};
  atomic_write(c.path("agent.json"), summary.dump(2) + "\n");
  out << "agent: wrote " << c.path("agent.csv") << " (terminal reward " << tr.reward_terminal << ")\n";
  return 0;
}

int cmd_simulate(const Context& c, std::ostream& out) {
  const auto cfg = c.sc.sim_config();
  const auto panel = sim::simulate_panel(cfg, c.opt.threads);
  write_panel(panel, c.panel_csv(), c.panel_meta(),
              {{"scenario_hash", c.sc.hash}, {"seed", std::to_string(c.sc.seed)}});
  out << "simulate: wrote " << panel.n_days() << " days to " << c.panel_csv() << "\n";
  return 0;
}

int cmd_estimate(const Context& c, std::ostream& out) {
  const auto panel = c.load_panel();
  const auto cs = cov::estimate_covariance(panel);
  std::string s = c.header() + "bin,i,j,C,R\n";
  std::string se = c.header() + "bin,i,j,se,count\n";
  const auto d = static_cast<Eigen::Index>(panel.d());
  for (std::size_t k = 0; k < cs.n_bins(); ++k)
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i; j < d; ++j) {
        const std::string key = std::to_string(k + 1) + "," + std::to_string(i) + "," + std::to_string(j);
        s += key + "," + f(cs.C[k](i, j)) + "," + f(cs.R[k](i, j)) + "\n";
        se += key + "," + f(cs.se[k](i, j)) + "," + std::to_string(cs.counts[k](i, j)) + "\n";
      }
  atomic_write(c.path("covariance.csv"), s);
  atomic_write(c.path("covariance_se.csv"), se);
  out << "estimate: wrote " << c.path("covariance.csv") << "\n";
  return 0;
}

int cmd_predict(const Context& c, std::ostream& out) {
  const auto cfg = c.sc.sim_config();
  const auto pred = cov::theoretical_excess(cfg.params, cfg.law, cfg.grid(), cfg.n_bins);
  std::string s = c.header() + "bin,i,j,fundamental,excess,total,R,A,B\n";
  const Eigen::Index d = cfg.params.d();
  for (std::size_t k = 0; k < pred.n_bins(); ++k)
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i; j < d; ++j)
        s += std::to_string(k + 1) + "," + std::to_string(i) + "," + std::to_string(j) + "," +
             f(pred.fundamental[k](i, j)) + "," + f(pred.excess[k](i, j)) + "," +
             f(pred.total[k](i, j)) + "," + f(pred.R[k](i, j)) + "," + f(pred.A[k](i, j)) + "," +
             f(pred.B[k](i, j)) + "\n";
  atomic_write(c.path("prediction.csv"), s);
  out << "predict: wrote " << c.path("prediction.csv") << "\n";
  return 0;
}

int cmd_patterns(const Context& c, std::ostream& out) {
  const auto panel = c.load_panel();
  const auto pats = cov::median_patterns(panel, c.sc.lambdas);
  std::string s = c.header() + "bin,lambda,diag,off,count_diag,count_off\n";
  for (const auto& p : pats)
    for (Eigen::Index k = 0; k < p.diag.size(); ++k)
      s += std::to_string(k + 1) + "," + f(p.lambda) + "," + f(p.diag(k)) + "," + f(p.off(k)) +
           "," + f(p.count_diag(k)) + "," + f(p.count_off(k)) + "\n";
  atomic_write(c.path("patterns.csv"), s);
  out << "patterns: wrote " << c.path("patterns.csv") << "\n";
  return 0;
}

int cmd_regress(const Context& c, std::ostream& out) {
  const auto panel = c.load_panel();
  if (!panel.has_flows())
    throw ScenarioError(ErrorCode::kMissingInput, "panel has no net volumes; regression needs flows");
  const auto cs = cov::estimate_covariance(panel);
  const auto F = cov::flow_covariance(panel);
  std::string s = c.header() + "asset,alpha_sq,alpha_hat,sigma_hat,se,pvalue,corr_cf\n";
  for (std::size_t i = 0; i < panel.d(); ++i) {
    const auto fit = cov::fit_asset_regression(cs, F, i, panel.bin_length(0));
    s += panel.asset_names()[i] + "," + f(fit.alpha_sq) + "," + f(fit.alpha_hat) + "," +
         f(fit.sigma_hat) + "," + f(fit.se_slope) + "," + f(fit.p_slope) + "," + f(fit.corr_cf) + "\n";
  }
  atomic_write(c.path("regression.csv"), s);
  out << "regress: wrote " << c.path("regression.csv") << "\n";
  return 0;
}

json to_json(const core::Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
json to_json(const core::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(core::Vector(m.row(i).transpose())));
  return rows;
}

int cmd_calibrate(const Context& c, std::ostream& out) {
  const auto panel = c.load_panel();
  if (!panel.has_flows())
    throw ScenarioError(ErrorCode::kMissingInput, "panel has no net volumes; calibration needs flows");
  const auto& cs = c.sc.calibration;
  calib::CalibrationConfig cfg;
  cfg.A_term = cs.A_term;
  cfg.source = cs.source;
  cfg.fundamental_fraction = cs.fundamental_fraction;
  cfg.shift_fraction = cs.shift_fraction;
  cfg.restarts = cs.restarts;
  cfg.search.max_evals = cs.max_evaluations;
  cfg.bounds = cs.bounds;
  cfg.seed = c.sc.seed;
  cfg.threads = c.opt.threads;
  cfg.steps_per_bin = c.sc.simulation ? c.sc.simulation->steps_per_bin : 1;
  calib::fill_calibration_inputs(panel, cfg);
  const auto r = calib::calibrate(cfg);

  json rep;
  rep["scenario_hash"] = c.sc.hash;
  rep["seed"] = c.sc.seed;
  rep["fitted"] = {{"k_shares2_per_usd_per_day", to_json(r.k)},
                   {"gamma_per_usd", r.gamma},
                   {"inventory_variance_shares2", to_json(r.Gamma_diag)}};
  rep["fixed"] = {{"terminal_penalty_usd_per_day_per_share", cfg.A_term},
                  {"alpha_usd_per_share", to_json(r.alpha)},
                  {"sigma_covariance_usd2_per_day_per_share2", to_json(r.Sigma_hat)},
                  {"shift_usd2_per_share2", to_json(r.shift)},
                  {"e0_correlation", to_json(r.e0_corr)},
                  {"fundamental", cfg.source == calib::FundamentalSource::kFlowAdjusted
                                      ? "flow_adjusted" : "pattern_fraction"}};
  rep["provenance"] = r.provenance;
  rep["objective"] = r.objective;
  rep["residual_l2"] = r.residual_l2;
  rep["evaluations"] = r.evaluations;
  rep["restart_objectives"] = r.restart_objectives;
  rep["best_restart"] = r.best_restart;
  rep["converged"] = r.converged;
  if (!r.warning.empty()) rep["warning"] = r.warning;
  rep["bounds"] = {{"k_shares2_per_usd_per_day", {cfg.bounds.k_lo, cfg.bounds.k_hi}},
                   {"gamma_per_usd", {cfg.bounds.gamma_lo, cfg.bounds.gamma_hi}},
                   {"inventory_variance_shares2", {cfg.bounds.Gamma_lo, cfg.bounds.Gamma_hi}}};
  atomic_write(c.path("calibration.json"), rep.dump(2) + "\n");
  out << "calibrate: wrote " << c.path("calibration.json") << " (residual " << r.residual_l2 << ")\n";
  return 0;
}

void emit_error(std::ostream& err, ErrorCode code, const std::string& msg) {
  json rec = {{"error", {{"code", static_cast<int>(code)}, {"kind", error_kind(code)}, {"message", msg}}}};
  err << rec.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Mean-field portfolio trading and intraday covariance toolkit", "mfgp"};
  app.require_subcommand(1, 1);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"solve", "mean-field curves E, mu, H, Hs"},
      {"agent", "optimal trajectory of one investor"},
      {"simulate", "synthetic multi-day panel"},
      {"estimate", "realised covariance and correlation per bin"},
      {"predict", "closed-form covariance prediction per bin"},
      {"patterns", "median conditioned intraday patterns"},
      {"regress", "market-impact regression per asset"},
      {"calibrate", "toy calibration report"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", opt.scenario, "scenario JSON file")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "overrides the scenario seed");
    sub->add_option("--threads", opt.threads, "worker threads (results do not depend on it)");
    sub->add_option("--panel", opt.panel, "panel CSV (default <out>/panel.csv)");
    sub->add_option("--meta", opt.meta, "panel metadata JSON (default: panel path with .json)");
    sub->callback([&opt, name = name] { opt.command = name; });
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    emit_error(err, ErrorCode::kUsage, e.what());
    return static_cast<int>(ErrorCode::kUsage);
  }
  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed")) opt.seed_set = true;

  try {
    Context c{opt, load_scenario(opt.scenario)};
    if (opt.seed_set) c.sc.seed = opt.seed;
    if (c.opt.command == "solve") return cmd_solve(c, out);
    if (c.opt.command == "agent") return cmd_agent(c, out);
    if (c.opt.command == "simulate") return cmd_simulate(c, out);
    if (c.opt.command == "estimate") return cmd_estimate(c, out);
    if (c.opt.command == "predict") return cmd_predict(c, out);
    if (c.opt.command == "patterns") return cmd_patterns(c, out);
    if (c.opt.command == "regress") return cmd_regress(c, out);
    if (c.opt.command == "calibrate") return cmd_calibrate(c, out);
    emit_error(err, ErrorCode::kUsage, "unknown command");
    return static_cast<int>(ErrorCode::kUsage);
  } catch (const ScenarioError& e) {
    emit_error(err, e.code(), e.what());
    return static_cast<int>(e.code());
  } catch (const DataError& e) {
    emit_error(err, ErrorCode::kData, e.what());
    return static_cast<int>(ErrorCode::kData);
  } catch (const InvalidArgument& e) {
    emit_error(err, ErrorCode::kSchema, e.what());
    return static_cast<int>(ErrorCode::kSchema);
  } catch (const SolverFailure& e) {
    emit_error(err, ErrorCode::kSolver, e.what());
    return static_cast<int>(ErrorCode::kSolver);
  } catch (const Error& e) {
    emit_error(err, ErrorCode::kIo, e.what());
    return static_cast<int>(ErrorCode::kIo);
  } catch (const std::exception& e) {
    emit_error(err, ErrorCode::kInternal, e.what());
    return static_cast<int>(ErrorCode::kInternal);
  }
}

}  // namespace mfgp::io
