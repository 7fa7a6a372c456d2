#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pairorbit/compactify.hpp"
#include "pairorbit/error.hpp"
#include "pairorbit/experiments.hpp"
#include "pairorbit/io.hpp"
#include "pairorbit/simulate.hpp"
#include "pairorbit/variational.hpp"

#ifndef PAIRORBIT_VERSION
#define PAIRORBIT_VERSION "unknown"
#endif

namespace py = pybind11;
using namespace pairorbit;
using io::json;

// Structured results cross the boundary as JSON text; the package wrapper decodes them.
namespace {

AtomicMeasure measure_from_arrays(py::array_t<double, py::array::c_style | py::array::forcecast> coords,
                                  py::array_t<double, py::array::c_style | py::array::forcecast> weights) {
  require(coords.ndim() == 2, ErrorKind::invalid_argument, "coords must be an (n, d) array");
  require(weights.ndim() == 1 && weights.shape(0) == coords.shape(0), ErrorKind::invalid_argument,
          "weights must have one entry per row of coords");
  const auto d = static_cast<int>(coords.shape(1));
  std::vector<double> c(coords.data(), coords.data() + coords.size());
  std::vector<double> w(weights.data(), weights.data() + weights.size());
  return AtomicMeasure(d, std::move(c), std::move(w));
}

std::string solve(const std::string& name, int p, double mass, std::size_t grid_n, double grid_h, double tol,
                  double phi_eps, double amplitude) {
  const FunctionalKind kind = functional_kind_from_string(name);
  SolverConfig cfg = SolverConfig::defaults(kind);
  cfg.mass = mass;
  if (grid_n) cfg.n = grid_n;
  if (grid_h > 0) cfg.h = grid_h;
  if (tol > 0) cfg.residual_tol = tol;
  const Functional f = kind == FunctionalKind::chi     ? Functional::chi()
                       : kind == FunctionalKind::pekar ? Functional::pekar()
                                                       : Functional::pam(p, experiments::pam_kernel(phi_eps, amplitude));
  py::gil_scoped_release release;
  return io::to_json(maximize(f, cfg)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pair-orbit compactification, Gibbs path models and radial variational solvers";
  m.attr("__version__") = PAIRORBIT_VERSION;

  static py::exception<Error> error(m, "PairorbitError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error((std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def(
      "dv_rate_1d",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> values, double spacing, double origin) {
        GridDescriptor g;
        g.dim = 1;
        g.spacing = spacing;
        g.origin = {origin};
        g.shape = {static_cast<std::size_t>(values.size())};
        return dv_rate(GridDensity(g, std::vector<double>(values.data(), values.data() + values.size())));
      },
      py::arg("values"), py::arg("spacing"), py::arg("origin") = 0.0);

  m.def(
      "decompose",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> coords,
         py::array_t<double, py::array::c_style | py::array::forcecast> weights, double window_radius,
         double mass_floor, double separation_factor) {
        const auto mu = measure_from_arrays(coords, weights);
        py::gil_scoped_release release;
        return io::to_json(decompose(mu, {window_radius, mass_floor, separation_factor})).dump();
      },
      py::arg("coords"), py::arg("weights"), py::arg("window_radius") = 0.0, py::arg("mass_floor") = 0.05,
      py::arg("separation_factor") = 4.0);

  m.def("solve", &solve, py::arg("functional"), py::arg("p") = 1, py::arg("mass") = 1.0, py::arg("grid_n") = 0,
        py::arg("grid_h") = 0.0, py::arg("tol") = 0.0, py::arg("phi_eps") = 1.0, py::arg("amplitude") = 1.0);

  m.def(
      "chi_scaling_exact",
      [](double m1, double m2, double A, double B) {
        const auto v = chi_scaling_exact(m1, m2, A, B);
        return json{{"e1", v.e1}, {"e2", v.e2}, {"e12", v.e12}, {"superadditive", v.superadditive}}.dump();
      },
      py::arg("m1"), py::arg("m2"), py::arg("A"), py::arg("B"));

  m.def(
      "pam_moment",
      [](int p, double eps, std::size_t samples, std::uint64_t seed, double dt, unsigned threads) {
        PamMomentConfig cfg;
        cfg.p = p;
        cfg.epsilon = eps;
        cfg.dt = dt;
        py::gil_scoped_release release;
        return io::to_json(estimate_pam_moment(cfg, {samples, seed, threads})).dump();
      },
      py::arg("p"), py::arg("eps"), py::arg("samples") = 1000, py::arg("seed") = 1, py::arg("dt") = 0.0,
      py::arg("threads") = 1);

  m.def("experiment_names", [] { return experiments::names(); });

  m.def(
      "run_experiment",
      [](const std::string& name, const std::string& params, std::uint64_t seed, unsigned threads) {
        const json overrides = params.empty() ? json::object() : json::parse(params);
        py::gil_scoped_release release;
        return io::dump(experiments::run(name, overrides, {seed, threads}));
      },
      py::arg("name"), py::arg("params") = "", py::arg("seed") = 1, py::arg("threads") = 1);
}
