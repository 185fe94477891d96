#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "minsoc/analysis.hpp"
#include "minsoc/io.hpp"
#include "minsoc/scenario.hpp"

namespace py = pybind11;
using namespace minsoc;

namespace {

py::array_t<double> column(const HybridTrace& tr, double (*get)(const TraceSample&)) {
  py::array_t<double> out(static_cast<py::ssize_t>(tr.size()));
  auto v = out.mutable_unchecked<1>();
  for (std::size_t k = 0; k < tr.size(); ++k) v(static_cast<py::ssize_t>(k)) = get(tr.sample(k));
  return out;
}

py::array_t<double> plant_matrix(const HybridTrace& tr, bool soc) {
  py::array_t<double> out({static_cast<py::ssize_t>(tr.size()), static_cast<py::ssize_t>(tr.n_cells())});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto row = soc ? tr.soc(k) : tr.u_rc(k);
    for (std::size_t i = 0; i < row.size(); ++i) v(static_cast<py::ssize_t>(k), static_cast<py::ssize_t>(i)) = row[i];
  }
  return out;
}

py::dict report_dict(const BoundReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["pass"] = r.pass;
  d["max_violation"] = r.max_violation;
  d["argmax_t"] = r.argmax_t;
  d["diagnosis"] = r.diagnosis;
  return d;
}

}  // namespace

PYBIND11_MODULE(_minsoc, m) {
  m.doc() = "Hybrid min/max-SOC estimator for series battery packs";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<OcvCurveError>(m, "OcvCurveError", PyExc_ValueError);
  py::register_exception<ZenoError>(m, "ZenoError", PyExc_RuntimeError);
  py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);
  py::register_exception<io::IoError>(m, "IoError", PyExc_OSError);

  py::enum_<Mode>(m, "Mode").value("min", Mode::min).value("max", Mode::max);
  py::enum_<JumpPolicy>(m, "JumpPolicy").value("priority", JumpPolicy::priority).value("boundary", JumpPolicy::boundary);

  py::class_<OcvCurve>(m, "OcvCurve")
      .def(py::init<const std::vector<std::pair<double, double>>&>(), py::arg("knots"))
      .def_static("default", &OcvCurve::default_curve, py::return_value_policy::copy)
      .def("eval", &OcvCurve::eval, py::arg("soc"))
      .def("slope", &OcvCurve::slope, py::arg("soc"))
      .def("inverse", &OcvCurve::inverse, py::arg("volts"))
      .def_property_readonly("a1", &OcvCurve::a1)
      .def_property_readonly("a2", &OcvCurve::a2)
      .def("knots", [](const OcvCurve& c) {
        std::vector<std::pair<double, double>> out;
        for (const auto& k : c.knots()) out.emplace_back(k.soc, k.volts);
        return out;
      })
      .def("mirrored", &OcvCurve::mirrored, py::arg("offset"));

  py::class_<CellParams>(m, "CellParams")
      .def(py::init([](std::optional<double> tau_d, double r_d, std::optional<double> c_d, double r_int, double q_ah) {
             return CellParams::make(tau_d, r_d, c_d, r_int, q_ah);
           }),
           py::arg("tau_d") = py::none(), py::arg("r_d"), py::arg("c_d") = py::none(), py::arg("r_int"),
           py::arg("q_ah"))
      .def_readonly("tau_d", &CellParams::tau_d)
      .def_readonly("r_d", &CellParams::r_d)
      .def_readonly("c_d", &CellParams::c_d)
      .def_readonly("r_int", &CellParams::r_int)
      .def_readonly("q_ah", &CellParams::q_ah);

  py::class_<PackConfig>(m, "PackConfig")
      .def(py::init([](std::vector<CellParams> cells, std::optional<OcvCurve> ocv) {
             PackConfig cfg;
             cfg.cells = std::move(cells);
             if (ocv) cfg.ocv = *ocv;
             cfg.validate();
             return cfg;
           }),
           py::arg("cells"), py::arg("ocv") = py::none())
      .def_readonly("cells", &PackConfig::cells)
      .def_readonly("ocv", &PackConfig::ocv)
      .def("__len__", &PackConfig::size);

  py::class_<PlantState>(m, "PlantState")
      .def(py::init([](std::vector<double> u_rc, std::vector<double> soc) { return PlantState{std::move(u_rc), std::move(soc)}; }),
           py::arg("u_rc"), py::arg("soc"))
      .def_readwrite("u_rc", &PlantState::u_rc)
      .def_readwrite("soc", &PlantState::soc);

  py::class_<EstimatorParams>(m, "EstimatorParams")
      .def(py::init([](double ell, double tau_d, double epsilon, double mu, Mode mode, JumpPolicy policy) {
             EstimatorParams p{ell, tau_d, epsilon, mu, mode, policy};
             p.validate();
             return p;
           }),
           py::arg("ell") = 2.0, py::arg("tau_d") = 12.0, py::arg("epsilon") = 1e-3, py::arg("mu") = 0.95,
           py::arg("mode") = Mode::min, py::arg("policy") = JumpPolicy::priority)
      .def_readonly("ell", &EstimatorParams::ell)
      .def_readonly("tau_d", &EstimatorParams::tau_d)
      .def_readonly("epsilon", &EstimatorParams::epsilon)
      .def_readonly("mu", &EstimatorParams::mu)
      .def_readonly("mode", &EstimatorParams::mode);

  py::class_<CurrentProfile>(m, "CurrentProfile")
      .def(py::init([](const std::vector<std::pair<double, double>>& pts) {
             std::vector<CurrentProfile::Breakpoint> b;
             for (const auto& [t, a] : pts) b.push_back({t, a});
             return CurrentProfile(std::move(b));
           }),
           py::arg("breakpoints"))
      .def_static("constant", &CurrentProfile::constant, py::arg("amps"))
      .def("at", &CurrentProfile::at, py::arg("t"));

  py::class_<BoundConstants>(m, "BoundConstants")
      .def_readonly("d", &BoundConstants::d)
      .def_readonly("a1", &BoundConstants::a1)
      .def_readonly("a2", &BoundConstants::a2)
      .def_readonly("lam", &BoundConstants::lambda)
      .def_readonly("a", &BoundConstants::a)
      .def_readonly("c1", &BoundConstants::c1)
      .def_readonly("c2", &BoundConstants::c2)
      .def_readonly("c3", &BoundConstants::c3)
      .def_readonly("c4", &BoundConstants::c4)
      .def_readonly("b", &BoundConstants::b)
      .def("steady_thm1", &BoundConstants::steady_thm1, py::arg("n"), py::arg("u_rc_sup"));

  py::class_<HybridTrace>(m, "HybridTrace")
      .def("__len__", &HybridTrace::size)
      .def_property_readonly("n_cells", &HybridTrace::n_cells)
      .def_property_readonly("t", [](const HybridTrace& tr) { return column(tr, [](const TraceSample& s) { return s.t; }); })
      .def_property_readonly("j", [](const HybridTrace& tr) { return column(tr, [](const TraceSample& s) { return static_cast<double>(s.j); }); })
      .def_property_readonly("sigma", [](const HybridTrace& tr) { return column(tr, [](const TraceSample& s) { return static_cast<double>(s.est.sigma); }); })
      .def_property_readonly("soc_hat", [](const HybridTrace& tr) { return column(tr, [](const TraceSample& s) { return s.est.soc_hat; }); })
      .def_property_readonly("u_bar_rc", [](const HybridTrace& tr) { return column(tr, [](const TraceSample& s) { return s.est.u_bar_rc; }); })
      .def_property_readonly("current", [](const HybridTrace& tr) { return column(tr, [](const TraceSample& s) { return s.u; }); })
      .def_property_readonly("soc", [](const HybridTrace& tr) { return plant_matrix(tr, true); })
      .def_property_readonly("u_rc", [](const HybridTrace& tr) { return plant_matrix(tr, false); })
      .def_property_readonly("jumps", [](const HybridTrace& tr) {
        py::list out;
        for (const auto& jr : tr.jumps)
          out.append(py::dict(py::arg("t") = jr.t, py::arg("j") = jr.j, py::arg("sigma_before") = jr.sigma_before,
                              py::arg("sigma_after") = jr.sigma_after, py::arg("soc_hat_before") = jr.soc_hat_before,
                              py::arg("soc_hat_after") = jr.soc_hat_after, py::arg("forced") = jr.forced));
        return out;
      });

  m.def("generate_pack",
        [](std::size_t n_cells, double dispersion, double soc0_center, double soc0_spread, std::uint64_t seed) {
          PackSpec spec;
          spec.n_cells = n_cells;
          spec.dispersion = dispersion;
          spec.soc0_center = soc0_center;
          spec.soc0_spread = soc0_spread;
          spec.seed = seed;
          auto p = generate_pack(spec);
          return py::make_tuple(p.cfg, p.x0);
        },
        py::arg("n_cells") = 200, py::arg("dispersion") = 0.1, py::arg("soc0_center") = 0.5,
        py::arg("soc0_spread") = 0.02, py::arg("seed") = 1, "Returns (PackConfig, PlantState).");

  m.def("pulse_train",
        [](double t_end, std::uint64_t seed) {
          PulseTrainSpec spec;
          spec.t_end = t_end;
          spec.seed = seed;
          return pulse_train(spec);
        },
        py::arg("t_end") = 600.0, py::arg("seed") = 1);

  m.def("select_tau_d", [](const PackConfig& cfg, const std::string& how) { return select_tau_d(cfg, TauChoice::parse(how)); },
        py::arg("cfg"), py::arg("strategy"));

  m.def("simulate",
        [](const PackConfig& cfg, const EstimatorParams& params, const PlantState& x0, const CurrentProfile& profile,
           std::size_t sigma0, double soc_hat0, double u_bar_rc0, double t_end, double h, std::uint64_t seed,
           bool auto_init, std::size_t record_stride) {
          SimOptions o;
          o.t_end = t_end;
          o.h = h;
          o.seed = seed;
          o.auto_init = auto_init;
          o.record_stride = record_stride;
          const HybridState q0{x0, {u_bar_rc0, soc_hat0, sigma0}};
          py::gil_scoped_release release;
          return run(cfg, params, q0, profile, o);
        },
        py::arg("cfg"), py::arg("params"), py::arg("x0"), py::arg("profile"), py::arg("sigma0") = 0,
        py::arg("soc_hat0") = 0.0, py::arg("u_bar_rc0") = 0.0, py::arg("t_end") = 600.0, py::arg("h") = 0.01,
        py::arg("seed") = 1, py::arg("auto_init") = false, py::arg("record_stride") = 1,
        "Runs the closed loop. sigma0 is 0-based.");

  m.def("compute_constants", &compute_constants, py::arg("cfg"), py::arg("params"));

  m.def("verify",
        [](const PackConfig& cfg, const HybridTrace& tr) {
          py::list out;
          for (const auto& r : verify_trace(cfg, tr)) out.append(report_dict(r));
          const auto d = dwell_time_stats(tr);
          py::dict dw;
          dw["name"] = "dwell_time";
          dw["pass"] = (d.jumps < 2 || d.tau_min > 0.0) && d.rate_bound_ok;
          dw["tau_min"] = d.tau_min;
          dw["jumps"] = d.jumps;
          dw["max_jumps_in_1s"] = d.max_jumps_in_1s;
          out.append(dw);
          return out;
        },
        py::arg("cfg"), py::arg("trace"), "Bound and Lyapunov checks, one dict per check.");

  m.def("observer_bank_min",
        [](const PackConfig& cfg, const CurrentProfile& profile, const PlantState& x0, double t_end, double h, double ell) {
          const auto r = observer_bank_oracle(cfg, profile, x0, t_end, h, ell);
          return py::make_tuple(r.t, r.soc_hat_extreme(Mode::min));
        },
        py::arg("cfg"), py::arg("profile"), py::arg("x0"), py::arg("t_end"), py::arg("h") = 0.01, py::arg("ell") = 2.0);

  m.def("write_run", &io::write_run, py::arg("dir"), py::arg("cfg"), py::arg("x0"), py::arg("profile"), py::arg("trace"));
  m.def("read_run", [](const std::filesystem::path& dir) {
    auto r = io::read_run(dir);
    return py::make_tuple(r.pack.cfg, r.pack.x0, std::move(r.trace));
  }, py::arg("dir"));
}
