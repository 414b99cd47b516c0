#include <algorithm>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gffpin/environment.hpp"
#include "gffpin/error.hpp"
#include "gffpin/estimators.hpp"
#include "gffpin/experiments.hpp"
#include "gffpin/lattice.hpp"
#include "gffpin/oracle.hpp"
#include "gffpin/parallel.hpp"
#include "gffpin/run_config.hpp"

namespace py = pybind11;
using namespace gffpin;

namespace {

py::dict estimate_dict(const FreeEnergyEstimate& e) {
  py::dict out;
  out["value"] = e.value;
  out["std_error"] = e.std_error;
  out["method"] = to_string(e.method);
  out["sweeps"] = e.diagnostics.sweeps;
  out["samples"] = e.diagnostics.samples;
  out["effective_sample_size"] = e.diagnostics.effective_sample_size;
  out["max_tau"] = e.diagnostics.max_tau;
  return out;
}

// nlohmann::json -> Python through its text form; the values are small records
py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::vector<double> as_rewards(const py::array_t<double, py::array::c_style | py::array::forcecast>& w,
                               const Box& box) {
  if (w.ndim() != 1 || static_cast<std::size_t>(w.size()) != box.volume())
    throw ConfigError("rewards must be a flat array of n^d = " + std::to_string(box.volume()) + " values");
  return {w.data(), w.data() + w.size()};
}

GapRegime parse_regime(const std::string& regime) {
  if (regime == "d3plus" || regime == "d>=3") return GapRegime::d3plus;
  if (regime == "d2") return GapRegime::d2;
  throw ConfigError("regime must be d3plus or d2 (got " + regime + ")");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Discrete Gaussian free field with disordered square-well pinning";
  m.attr("__version__") = version_string();

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<AssumptionViolation>(m, "AssumptionViolation", numerical.ptr());
  py::register_exception<StatisticsGuardError>(m, "StatisticsGuardError", PyExc_RuntimeError);

  m.def(
      "annealed_strength",
      [](const std::string& law, double a, double b, double h, double p) {
        return annealed_strength(DisorderLaw::from_name(law, p), {a, b, h}).ell;
      },
      py::arg("law"), py::arg("a") = 1.0, py::arg("b") = 0.0, py::arg("h") = 0.0, py::arg("p") = 0.5,
      "log E exp(b e + h) for the named law.");

  m.def(
      "sample_environment",
      [](const std::string& law, int d, int n, double a, double b, double h, std::uint64_t seed, double p) {
        const auto env = sample_environment(DisorderLaw::from_name(law, p), {a, b, h}, Box(d, n), seed);
        return py::array_t<double>(static_cast<py::ssize_t>(env.rewards.size()), env.rewards.data());
      },
      py::arg("law"), py::arg("d"), py::arg("n"), py::arg("a") = 1.0, py::arg("b") = 0.0, py::arg("h") = 0.0,
      py::arg("seed") = 1, py::arg("p") = 0.5, "Site-ordered rewards b e_x + h of one disorder draw.");

  m.def(
      "green_function",
      [](int d, int n) { return GreenFunction(Box(d, n)).matrix(); }, py::arg("d"), py::arg("n"),
      "Dense free-field covariance on the box interior.");

  m.def(
      "rectangle_probability",
      [](const Eigen::MatrixXd& cov, double a) {
        std::vector<SiteIndex> all(static_cast<std::size_t>(cov.rows()));
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<SiteIndex>(i);
        const auto r = rectangle_probability(cov, all, a);
        return py::make_tuple(r.value, r.error);
      },
      py::arg("covariance"), py::arg("a"), "(P(|X_i| <= a for all i), error) for X ~ N(0, covariance).");

  m.def(
      "free_energy_expansion",
      [](int d, int n, py::array_t<double, py::array::c_style | py::array::forcecast> rewards, double a) {
        const Box box(d, n);
        const auto w = as_rewards(rewards, box);
        FreeEnergyEstimate e;
        {
          py::gil_scoped_release release;
          e = free_energy_expansion(box, w, a);
        }
        return estimate_dict(e);
      },
      py::arg("d"), py::arg("n"), py::arg("rewards"), py::arg("a") = 1.0);

  m.def(
      "free_energy_thermo",
      [](int d, int n, py::array_t<double, py::array::c_style | py::array::forcecast> rewards, double a, int nodes,
         std::uint64_t sweeps, std::uint64_t max_sweeps, std::uint64_t seed, int overrelax, unsigned workers) {
        auto box = std::make_shared<const Box>(d, n);
        const Model model(box, as_rewards(rewards, *box), a);
        ThermoOptions opt;
        opt.nodes = nodes;
        opt.sweeps = sweeps;
        opt.max_sweeps = std::max(max_sweeps, sweeps);
        opt.seed = seed;
        opt.overrelax = overrelax;
        ThermoResult r;
        {
          py::gil_scoped_release release;
          WorkerPool pool(workers);
          r = free_energy_thermo(model, opt, &pool);
        }
        py::dict out = estimate_dict(r.estimate);
        py::list ts, integrands, errors;
        for (const auto& node : r.nodes) {
          ts.append(node.t);
          integrands.append(node.integrand.mean);
          errors.append(node.integrand.error);
        }
        out["t_nodes"] = ts;
        out["integrand"] = integrands;
        out["integrand_error"] = errors;
        return out;
      },
      py::arg("d"), py::arg("n"), py::arg("rewards"), py::arg("a") = 1.0, py::arg("nodes") = 16,
      py::arg("sweeps") = 4000, py::arg("max_sweeps") = 64000, py::arg("seed") = 1, py::arg("overrelax") = 0,
      py::arg("workers") = 1);

  m.def(
      "free_energy_importance",
      [](int d, int n, py::array_t<double, py::array::c_style | py::array::forcecast> rewards, double a,
         std::uint64_t samples, std::uint64_t seed, unsigned workers) {
        auto box = std::make_shared<const Box>(d, n);
        const Model model(box, as_rewards(rewards, *box), a);
        ImportanceOptions opt;
        opt.samples = samples;
        opt.seed = seed;
        FreeEnergyEstimate e;
        {
          py::gil_scoped_release release;
          WorkerPool pool(workers);
          e = free_energy_importance(model, opt, &pool);
        }
        return estimate_dict(e);
      },
      py::arg("d"), py::arg("n"), py::arg("rewards"), py::arg("a") = 1.0, py::arg("samples") = 1'000'000,
      py::arg("seed") = 1, py::arg("workers") = 1);

  m.def(
      "gap_bound",
      [](const std::string& law, double a, double b, double h, const std::string& regime, double c1, double p) {
        const GapBoundSpec spec{DisorderLaw::from_name(law, p), {a, b, h}, parse_regime(regime), c1};
        return py::make_tuple(evaluate_gap_bound(spec), gap_lambda(spec));
      },
      py::arg("law"), py::arg("a") = 1.0, py::arg("b") = 1.0, py::arg("h") = 0.0, py::arg("regime") = "d3plus",
      py::arg("c1") = 1.0, py::arg("p") = 0.5, "(bound, lambda) of the quenched-annealed gap bound.");

  m.def(
      "gap_expectation",
      [](const std::string& law, double a, double b, double h, double lambda, double p) {
        return gap_expectation(DisorderLaw::from_name(law, p), {a, b, h}, lambda);
      },
      py::arg("law"), py::arg("a"), py::arg("b"), py::arg("h"), py::arg("lambda_"), py::arg("p") = 0.5,
      "E log(lambda gamma + 1 - lambda).");

  m.def(
      "config_keys", [] { return config_keys(); }, "Accepted configuration keys as section.key.");

  m.def(
      "run",
      [](const std::string& command, const std::string& config_text, const std::map<std::string, std::string>& flags) {
        const RunConfig cfg = parse_config(config_text, flags, command);
        std::ostringstream log;
        RunOutcome outcome;
        {
          py::gil_scoped_release release;
          outcome = execute(cfg, log);
        }
        py::dict out;
        out["exit_code"] = outcome.exit_code;
        out["run_dir"] = outcome.run_dir;
        out["result"] = to_python(outcome.result);
        out["log"] = log.str();
        return out;
      },
      py::arg("command"), py::arg("config_text") = "", py::arg("flags") = std::map<std::string, std::string>{},
      "Runs a CLI command in-process. Failures come back as a nonzero exit_code with the error record.");
}
