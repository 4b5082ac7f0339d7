#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mfgp/calib/calibration.hpp"
#include "mfgp/core/agent.hpp"
#include "mfgp/core/heterogeneous.hpp"
#include "mfgp/core/riccati.hpp"
#include "mfgp/cov/conditioning.hpp"
#include "mfgp/cov/excess.hpp"
#include "mfgp/cov/regression.hpp"
#include "mfgp/errors.hpp"
#include "mfgp/io/cli.hpp"
#include "mfgp/io/panel_io.hpp"

namespace py = pybind11;
using namespace mfgp;
using core::Matrix;
using core::Vector;

namespace {

py::array_t<double> cube(const std::vector<double>& data, std::size_t a, std::size_t b,
                         std::size_t c) {
  py::array_t<double> out({a, b, c});
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

// List of d×d matrices as an (n, d, d) array.
py::array_t<double> stack(const std::vector<Matrix>& ms) {
  const std::size_t n = ms.size();
  const std::size_t d = n ? static_cast<std::size_t>(ms[0].rows()) : 0;
  py::array_t<double> out({n, d, d});
  auto v = out.mutable_unchecked<3>();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        v(k, i, j) = ms[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

py::dict covariance_dict(const cov::CovarianceSeries& cs) {
  py::dict d;
  d["C"] = stack(cs.C);
  d["R"] = stack(cs.R);
  d["se"] = stack(cs.se);
  return d;
}

}  // namespace

PYBIND11_MODULE(_mfgp, m) {
  m.doc() = "Multi-asset mean-field trading: solvers, simulation and covariance analysis";
  m.attr("__version__") = "0.1.0";

  static py::exception<Error> base(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  static py::exception<SolverFailure> solver(m, "SolverFailure", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", solver.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());

  py::class_<core::MarketParams>(m, "MarketParams")
      .def(py::init([](Vector sigma, Matrix corr, Vector V, Vector eta, Vector alpha,
                       Vector A_term, double gamma, double T) {
             return core::MarketParams::make(std::move(sigma), std::move(corr), std::move(V),
                                             std::move(eta), std::move(alpha),
                                             std::move(A_term), gamma, T);
           }),
           py::arg("sigma"), py::arg("corr"), py::arg("V"), py::arg("eta"), py::arg("alpha"),
           py::arg("A_term"), py::arg("gamma"), py::arg("T") = 1.0)
      .def_readwrite("sigma", &core::MarketParams::sigma)
      .def_readwrite("corr", &core::MarketParams::corr)
      .def_readwrite("V", &core::MarketParams::V)
      .def_readwrite("eta", &core::MarketParams::eta)
      .def_readwrite("alpha", &core::MarketParams::alpha)
      .def_readwrite("A_term", &core::MarketParams::A_term)
      .def_readwrite("gamma", &core::MarketParams::gamma)
      .def_readwrite("T", &core::MarketParams::T)
      .def_property_readonly("Sigma", &core::MarketParams::Sigma)
      .def_property_readonly("liquidity", &core::MarketParams::liquidity)
      .def("validate", &core::MarketParams::validate);

  py::class_<core::TimeGrid>(m, "TimeGrid")
      .def(py::init<std::size_t, double>(), py::arg("n_steps"), py::arg("T") = 1.0)
      .def_property_readonly("n_steps", &core::TimeGrid::n_steps)
      .def_property_readonly("dt", &core::TimeGrid::dt)
      .def("node", &core::TimeGrid::node);

  m.def(
      "solve_riccati",
      [](const core::MarketParams& p, std::size_t n_steps) {
        const auto r = core::solve_riccati(p, core::TimeGrid(n_steps, p.T));
        return stack(r.H);
      },
      py::arg("params"), py::arg("n_steps"),
      "Riccati matrices H(t_k) stacked as (n_steps+1, d, d).");

  py::class_<core::MeanFieldSolution>(m, "MeanFieldSolution")
      .def_readonly("E", &core::MeanFieldSolution::E)
      .def_readonly("Edot", &core::MeanFieldSolution::Edot)
      .def_readonly("mu", &core::MeanFieldSolution::mu)
      .def_readonly("Hs", &core::MeanFieldSolution::Hs)
      .def_readonly("h", &core::MeanFieldSolution::h)
      .def_property_readonly("H", [](const core::MeanFieldSolution& s) { return stack(s.riccati.H); })
      .def_property_readonly("times", [](const core::MeanFieldSolution& s) {
        std::vector<double> t;
        for (std::size_t k = 0; k < s.n_nodes(); ++k) t.push_back(s.grid.node(k));
        return t;
      });

  m.def(
      "solve_mean_field",
      [](const core::MarketParams& p, const Vector& E0, std::size_t n_steps) {
        return core::solve_mean_field_identical(p, E0, core::TimeGrid(n_steps, p.T));
      },
      py::arg("params"), py::arg("E0"), py::arg("n_steps") = 1000);
  m.def("boundary_residual", &core::boundary_residual, py::arg("params"), py::arg("solution"));

  py::class_<core::AgentClass>(m, "AgentClass")
      .def(py::init([](double w, double g, Vector A, Vector E0) {
             return core::AgentClass{w, g, std::move(A), std::move(E0)};
           }),
           py::arg("weight"), py::arg("gamma"), py::arg("A_term"), py::arg("E0"));

  m.def(
      "solve_mean_field_heterogeneous",
      [](const core::MarketParams& p, const std::vector<core::AgentClass>& classes,
         std::size_t n_steps, double damping, std::size_t max_iter) {
        core::FixedPointOptions o;
        o.damping = damping;
        o.max_iter = max_iter;
        const auto s = core::solve_mean_field_heterogeneous(p, classes, core::TimeGrid(n_steps, p.T), o);
        py::dict d;
        py::list E;
        for (const auto& c : s.classes) E.append(c.E);
        d["E"] = E;
        d["mu"] = s.mu;
        d["residuals"] = s.residuals;
        d["iterations"] = s.iterations;
        d["final_damping"] = s.final_damping;
        return d;
      },
      py::arg("params"), py::arg("classes"), py::arg("n_steps") = 1000,
      py::arg("damping") = 1.0, py::arg("max_iter") = 200);

  m.def(
      "simulate_agent",
      [](const Vector& q0, const core::MeanFieldSolution& s, const core::MarketParams& p) {
        const auto tr = core::simulate_agent(q0, s, p);
        py::dict d;
        d["q"] = tr.q;
        d["v"] = tr.v;
        d["v1"] = tr.v1;
        d["v2"] = tr.v2;
        d["cash"] = tr.cash;
        d["price"] = tr.price;
        d["reward_terminal"] = tr.reward_terminal;
        return d;
      },
      py::arg("q0"), py::arg("solution"), py::arg("params"));

  py::class_<sim::MarketPanel>(m, "MarketPanel")
      .def_property_readonly("n_days", &sim::MarketPanel::n_days)
      .def_property_readonly("n_bins", &sim::MarketPanel::n_bins)
      .def_property_readonly("d", &sim::MarketPanel::d)
      .def_property_readonly("bin_times", &sim::MarketPanel::bin_times)
      .def_property_readonly("prices", [](const sim::MarketPanel& p) {
        return cube(p.prices(), p.n_days(), p.n_bins() + 1, p.d());
      })
      .def_property_readonly("flows", [](const sim::MarketPanel& p) {
        return cube(p.flows(), p.n_days(), p.n_bins(), p.d());
      })
      .def("__eq__", [](const sim::MarketPanel& a, const sim::MarketPanel& b) { return a == b; });

  m.def(
      "simulate_panel",
      [](const core::MarketParams& p, const Matrix& Gamma, std::size_t n_days,
         std::size_t n_bins, std::uint64_t seed, unsigned threads, std::size_t steps_per_bin) {
        sim::SimConfig c;
        c.params = p;
        c.law.Gamma = Gamma;
        c.n_days = n_days;
        c.n_bins = n_bins;
        c.seed = seed;
        c.steps_per_bin = steps_per_bin;
        py::gil_scoped_release release;
        return sim::simulate_panel(c, threads);
      },
      py::arg("params"), py::arg("Gamma"), py::arg("n_days"), py::arg("n_bins") = 100,
      py::arg("seed") = 0, py::arg("threads") = 1, py::arg("steps_per_bin") = 1);

  m.def("read_panel", &io::read_panel, py::arg("csv_path"), py::arg("meta_path"));
  m.def(
      "write_panel",
      [](const sim::MarketPanel& p, const std::string& csv, const std::string& meta) {
        io::write_panel(p, csv, meta);
      },
      py::arg("panel"), py::arg("csv_path"), py::arg("meta_path"));

  m.def(
      "estimate_covariance",
      [](const sim::MarketPanel& p) { return covariance_dict(cov::estimate_covariance(p)); },
      py::arg("panel"), "Per-bin covariance C, correlation R and standard errors se.");
  m.def(
      "flow_covariance", [](const sim::MarketPanel& p) { return stack(cov::flow_covariance(p)); },
      py::arg("panel"));

  m.def(
      "theoretical_excess",
      [](const core::MarketParams& p, const Matrix& Gamma, std::size_t n_bins,
         std::size_t steps_per_bin) {
        const auto e = cov::theoretical_excess(p, sim::InventoryLaw{Gamma, {}},
                                               core::TimeGrid(n_bins * steps_per_bin, p.T), n_bins);
        py::dict d;
        d["bin_times"] = e.bin_times;
        d["fundamental"] = stack(e.fundamental);
        d["excess"] = stack(e.excess);
        d["total"] = stack(e.total);
        d["R"] = stack(e.R);
        d["flow_map"] = stack(e.flow_map);
        return d;
      },
      py::arg("params"), py::arg("Gamma"), py::arg("n_bins") = 100, py::arg("steps_per_bin") = 1);

  py::class_<cov::RegressionFit>(m, "RegressionFit")
      .def_readonly("alpha_sq", &cov::RegressionFit::alpha_sq)
      .def_readonly("alpha_hat", &cov::RegressionFit::alpha_hat)
      .def_readonly("intercept", &cov::RegressionFit::intercept)
      .def_readonly("sigma_hat", &cov::RegressionFit::sigma_hat)
      .def_readonly("se_slope", &cov::RegressionFit::se_slope)
      .def_readonly("p_slope", &cov::RegressionFit::p_slope)
      .def_readonly("corr_cf", &cov::RegressionFit::corr_cf)
      .def_readonly("ci_low", &cov::RegressionFit::ci_low)
      .def_readonly("ci_high", &cov::RegressionFit::ci_high)
      .def_readonly("n", &cov::RegressionFit::n);
  m.def("fit_impact_regression", &cov::fit_impact_regression, py::arg("C"), py::arg("F"),
        py::arg("dt_bin"));

  m.def(
      "median_patterns",
      [](const sim::MarketPanel& p, const std::vector<double>& lambdas) {
        py::list out;
        for (const auto& pat : cov::median_patterns(p, lambdas)) {
          py::dict d;
          d["lambda"] = pat.lambda;
          d["diag"] = pat.diag;
          d["off"] = pat.off;
          out.append(d);
        }
        return out;
      },
      py::arg("panel"), py::arg("lambdas"));

  m.def(
      "calibrate",
      [](const sim::MarketPanel& panel, bool flow_adjusted, std::size_t restarts,
         std::uint64_t seed, unsigned threads) {
        calib::CalibrationConfig c;
        c.source = flow_adjusted ? calib::FundamentalSource::kFlowAdjusted
                                 : calib::FundamentalSource::kPatternFraction;
        c.restarts = restarts;
        c.seed = seed;
        c.threads = threads;
        calib::fill_calibration_inputs(panel, c);
        calib::CalibrationResult r;
        {
          py::gil_scoped_release release;
          r = calib::calibrate(c);
        }
        py::dict d;
        d["k"] = r.k;
        d["gamma"] = r.gamma;
        d["Gamma_diag"] = r.Gamma_diag;
        d["objective"] = r.objective;
        d["Sigma_hat"] = r.Sigma_hat;
        d["alpha"] = r.alpha;
        d["restart_objectives"] = r.restart_objectives;
        d["converged"] = r.converged;
        d["warning"] = r.warning;
        return d;
      },
      py::arg("panel"), py::arg("flow_adjusted") = true, py::arg("restarts") = 5,
      py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = io::run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a command-line subcommand; returns (exit code, stdout, stderr).");
}
