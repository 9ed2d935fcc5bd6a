#include "kpo/dynamics.hpp"
#include "kpo/error.hpp"
#include "kpo/fock.hpp"
#include "kpo/liouvillian.hpp"
#include "kpo/phase_analysis.hpp"
#include "kpo/qfi.hpp"
#include "kpo/trajectories.hpp"
#include "kpo/transducer.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace kpo;

namespace {

py::dict to_dict(const SweepRecord& r) {
    py::dict d;
    d["time"] = r.times;
    d["delta"] = r.deltas;
    d["n_mean"] = r.n_mean;
    d["x"] = r.x;
    d["p"] = r.p;
    d["phi"] = r.phi;
    return d;
}

py::dict to_dict(const TrajectoryRecord& r) {
    py::dict d;
    d["time"] = r.times;
    d["delta"] = r.deltas;
    d["x_meas"] = r.x_meas;
    d["p_meas"] = r.p_meas;
    d["phi_meas"] = r.phi_meas;
    d["x_smooth"] = r.x_smooth;
    d["p_smooth"] = r.p_smooth;
    d["phi_smooth"] = r.phi_smooth;
    d["x"] = r.x;
    d["p"] = r.p;
    d["n_mean"] = r.n_mean;
    d["max_trace_drift"] = r.max_trace_drift;
    d["min_eigenvalue"] = r.min_eigenvalue;
    return d;
}

ThermalEnvironment make_env(double n_th) { return ThermalEnvironment::from_occupation(n_th); }

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Kerr parametric oscillator: master equation, trajectories and transducer protocol";

    // KpoError.args == (error_code_name, message)
    static py::exception<Error> error(m, "KpoError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetObject(error.ptr(), py::make_tuple(to_string(e.code()), e.what()).ptr());
        }
    });

    py::class_<SystemParams>(m, "SystemParams")
        .def(py::init([](double delta, double u, double f, double g_abs, double theta, double gamma, double eta,
                         double kappa) {
                 SystemParams p{delta, u, f, g_abs, theta, gamma, eta, kappa};
                 p.validate();
                 return p;
             }),
             py::arg("delta") = 0.0, py::arg("u") = 1.0, py::arg("f") = 0.0, py::arg("g_abs") = 0.0,
             py::arg("theta") = -std::numbers::pi / 2, py::arg("gamma") = 0.0, py::arg("eta") = 0.0,
             py::arg("kappa") = 0.0)
        .def_readwrite("delta", &SystemParams::delta)
        .def_readwrite("u", &SystemParams::u)
        .def_readwrite("f", &SystemParams::f)
        .def_readwrite("g_abs", &SystemParams::g_abs)
        .def_readwrite("theta", &SystemParams::theta)
        .def_readwrite("gamma", &SystemParams::gamma)
        .def_readwrite("eta", &SystemParams::eta)
        .def_readwrite("kappa", &SystemParams::kappa)
        .def("__repr__", [](const SystemParams& p) {
            return py::str("SystemParams(delta={}, u={}, f={}, g_abs={}, theta={}, gamma={}, eta={}, kappa={})")
                .format(p.delta, p.u, p.f, p.g_abs, p.theta, p.gamma, p.eta, p.kappa);
        });

    py::class_<Observables>(m, "Observables")
        .def_readonly("n_mean", &Observables::n_mean)
        .def_readonly("x", &Observables::x)
        .def_readonly("p", &Observables::p)
        .def_readonly("phi", &Observables::phi)
        .def_readonly("phase_defined", &Observables::phase_defined);

    m.def("bose_occupation", &bose_occupation, py::arg("omega_c"), py::arg("temperature"));

    m.def(
        "hamiltonian",
        [](const SystemParams& p, int dim) { return build_hamiltonian(p, FockSpace(dim)).matrix; },
        py::arg("params"), py::arg("dim"));

    m.def(
        "liouvillian",
        [](const SystemParams& p, int dim, double n_th, bool include_measurement) {
            return build_liouvillian(p, FockSpace(dim), make_env(n_th), include_measurement).dense();
        },
        py::arg("params"), py::arg("dim"), py::arg("n_th") = 0.0, py::arg("include_measurement") = false,
        "Dense column-stacking Liouvillian superoperator.");

    m.def(
        "steady_state",
        [](const SystemParams& p, int dim, double n_th, bool include_measurement) {
            return steady_state(build_liouvillian(p, FockSpace(dim), make_env(n_th), include_measurement)).matrix;
        },
        py::arg("params"), py::arg("dim"), py::arg("n_th") = 0.0, py::arg("include_measurement") = false);

    m.def(
        "liouvillian_gap",
        [](const SystemParams& p, int dim, double n_th) {
            return spectrum(build_liouvillian(p, FockSpace(dim), make_env(n_th)), 2).gap;
        },
        py::arg("params"), py::arg("dim"), py::arg("n_th") = 0.0);

    m.def("measure", &measure, py::arg("rho"));

    m.def(
        "sweep",
        [](const SystemParams& p, double delta_start, double delta_end, double sweep_time, int dim, int samples,
           bool include_measurement) {
            SweepOptions opts;
            opts.samples = samples;
            opts.include_measurement = include_measurement;
            const SweepResult r = integrate_sweep(p, SweepSchedule{delta_start, delta_end, sweep_time}, std::nullopt,
                                                  FockSpace(dim), {}, opts);
            return to_dict(r.record);
        },
        py::arg("params"), py::arg("delta_start"), py::arg("delta_end"), py::arg("sweep_time"), py::arg("dim"),
        py::arg("samples") = 500, py::arg("include_measurement") = false,
        "Deterministic detuning sweep started from the steady state at delta_start.");

    m.def(
        "trajectory",
        [](const SystemParams& p, double delta_start, double delta_end, double sweep_time, int dim,
           std::uint64_t seed, std::uint64_t index, double dt, int samples, int smoothing_window) {
            NoiseStream noise(seed, index);
            TrajectoryOptions opts;
            opts.dt = dt;
            opts.samples = samples;
            opts.smoothing_window = smoothing_window;
            return to_dict(
                integrate_heterodyne(p, SweepSchedule{delta_start, delta_end, sweep_time}, noise, FockSpace(dim), opts));
        },
        py::arg("params"), py::arg("delta_start"), py::arg("delta_end"), py::arg("sweep_time"), py::arg("dim"),
        py::arg("seed") = 0, py::arg("index") = 0, py::arg("dt") = 1e-3, py::arg("samples") = 500,
        py::arg("smoothing_window") = 50, "Heterodyne-conditioned trajectory; noise stream (seed, index).");

    m.def(
        "husimi_q",
        [](const Matrix& rho, double x_min, double x_max, double p_min, double p_max, int nx, int np) {
            HusimiGridSpec spec{x_min, x_max, p_min, p_max, nx, np};
            const HusimiGrid q = husimi_q(rho, spec);
            return q.values;
        },
        py::arg("rho"), py::arg("x_min") = -4.0, py::arg("x_max") = 4.0, py::arg("p_min") = -4.0,
        py::arg("p_max") = 4.0, py::arg("nx") = 201, py::arg("np") = 201,
        "Q(alpha) on a grid with alpha = x + i p; rows follow x, columns follow p.");

    m.def(
        "half_plane_probability", [](const Matrix& rho) { return half_plane_probability(rho); }, py::arg("rho"),
        "Husimi probability of the x < 0 half plane, from the exact projector.");

    py::class_<ArctanFit>(m, "ArctanFit")
        .def_readonly("delta_star", &ArctanFit::delta_star)
        .def_readonly("slope_a", &ArctanFit::slope_a)
        .def_readonly("offset_c", &ArctanFit::offset_c)
        .def_readonly("fit_rms", &ArctanFit::fit_rms)
        .def_readonly("iterations", &ArctanFit::iterations);

    m.def(
        "fit_arctan",
        [](const std::vector<double>& deltas, const std::vector<double>& phases,
           std::optional<std::pair<double, double>> window) { return fit_arctan(deltas, phases, window); },
        py::arg("deltas"), py::arg("phases"), py::arg("window") = std::nullopt);

    py::class_<LinearFit>(m, "LinearFit")
        .def_readonly("slope", &LinearFit::slope)
        .def_readonly("intercept", &LinearFit::intercept)
        .def_readonly("r_squared", &LinearFit::r_squared);

    py::class_<CalibrationCurve>(m, "CalibrationCurve")
        .def_readonly("f_grid", &CalibrationCurve::f_grid)
        .def_readonly("delta_star_grid", &CalibrationCurve::delta_star_grid)
        .def_readonly("linear_fit", &CalibrationCurve::linear_fit)
        .def_readonly("validity_window", &CalibrationCurve::validity_window);

    m.def(
        "calibrate",
        [](const SystemParams& p, const std::vector<double>& f_grid, double delta_start, double delta_end,
           double sweep_time, int dim) {
            return calibrate(p, f_grid, SweepSchedule{delta_start, delta_end, sweep_time}, FockSpace(dim), {}, {});
        },
        py::arg("params"), py::arg("f_grid"), py::arg("delta_start") = 15.0, py::arg("delta_end") = -10.0,
        py::arg("sweep_time") = 50.0, py::arg("dim") = 30);

    m.def("estimate_f", &estimate_f, py::arg("delta_star"), py::arg("calibration"));

    py::class_<QfiResult>(m, "QfiResult")
        .def_readonly("delta", &QfiResult::delta)
        .def_readonly("n_th", &QfiResult::n_th)
        .def_readonly("qfi", &QfiResult::qfi)
        .def_readonly("qfi_alternate", &QfiResult::qfi_alternate)
        .def_readonly("richardson_change", &QfiResult::richardson_change)
        .def_readonly("flagged", &QfiResult::flagged);

    m.def(
        "qfi",
        [](const SystemParams& p, int dim, double n_th) { return qfi_mixed(p, make_env(n_th), FockSpace(dim), {}); },
        py::arg("params"), py::arg("dim"), py::arg("n_th") = 0.0,
        "Steady-state quantum Fisher information with respect to F.");

    m.def("linear_oscillator_qfi", &linear_oscillator_qfi, py::arg("gamma"), py::arg("delta"));
}
