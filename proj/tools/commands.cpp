#include "commands.hpp"

#include "output.hpp"

#include "kpo/error.hpp"
#include "kpo/phase_analysis.hpp"
#include "kpo/qfi.hpp"
#include "kpo/transducer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

namespace kpo::cli {

namespace {

using json = nlohmann::ordered_json;

struct ParamDefaults {
    double f = 4.0;
    double g_abs = 6.0;
    double gamma = 0.5;
    double eta = 0.5;
    double kappa = 0.0;
};

SystemParams read_params(RunConfig& cfg, const ParamDefaults& d = {}) {
    SystemParams p;
    p.delta = cfg.number("delta", 0.0);
    p.u = cfg.number("u", 1.0);
    p.f = cfg.number("f", d.f);
    p.g_abs = cfg.number("g_abs", d.g_abs);
    p.theta = cfg.number("theta", -std::numbers::pi / 2);
    p.gamma = cfg.number("gamma", d.gamma);
    p.eta = cfg.number("eta", d.eta);
    p.kappa = cfg.number("kappa", d.kappa);
    p.validate();
    return p;
}

double omega_c(RunConfig& cfg) { return 2.0 * std::numbers::pi * cfg.number("omega_c_ghz", 7.5) * 1e9; }

ThermalEnvironment read_env(RunConfig& cfg) {
    if (cfg.has("n_th")) return ThermalEnvironment::from_occupation(cfg.number("n_th", 0.0));
    const double w = omega_c(cfg);
    return ThermalEnvironment::from_temperature(w, cfg.number("temperature_mk", 0.0) * 1e-3);
}

std::vector<double> read_grid(RunConfig& cfg, const std::string& name, double lo, double hi, int n) {
    if (cfg.has(name + "s")) return cfg.list(name + "s", {});
    const double a = cfg.number(name + "_min", lo);
    const double b = cfg.number(name + "_max", hi);
    const int count = cfg.integer(name + "_points", n);
    if (count < 0) throw Error(ErrorCode::invalid_config, name + "_points must be >= 0");
    return linspace(a, b, count);
}

void require_nonempty(const std::vector<double>& grid, const std::string& name) {
    if (grid.empty()) throw Error(ErrorCode::invalid_config, "the " + name + " grid is empty");
}

SweepSchedule read_schedule(RunConfig& cfg, double start, double end, double time) {
    SweepSchedule s{cfg.number("delta_start", start), cfg.number("delta_end", end), cfg.number("sweep_time", time)};
    s.validate();
    return s;
}

std::pair<double, double> read_fit_window(RunConfig& cfg) {
    return {cfg.number("fit_window_min", -10.0), cfg.number("fit_window_max", 10.0)};
}

json convergence(const std::string& observable, int dim, double value, double compared, double tolerance,
                 bool relative) {
    const double diff = std::abs(value - compared);
    const double measure = relative ? diff / std::max(std::abs(value), 1e-300) : diff;
    json j;
    j["observable"] = observable;
    j["fock_dim"] = dim;
    j["compared_dim"] = dim + 5;
    j["value"] = json_number(value);
    j["compared_value"] = json_number(compared);
    j["difference"] = json_number(measure);
    j["measure"] = relative ? "relative" : "absolute";
    j["tolerance"] = tolerance;
    j["passed"] = measure <= tolerance;
    if (!(measure <= tolerance)) {
        std::cerr << "warning: " << observable << " changes by " << measure << " between fock_dim " << dim << " and "
                  << dim + 5 << " (tolerance " << tolerance << ")\n";
    }
    return j;
}

void emit(const Context& ctx, CommandOutput& out, const std::string& name, const CsvTable& table) {
    write_atomic(ctx.out_dir / name, table.str());
    out.files.push_back(name);
}

Observables steady_observables(const SystemParams& p, int dim, const ThermalEnvironment& env) {
    return measure(steady_state(build_liouvillian(p, FockSpace(dim), env)).matrix);
}

double deterministic_switch(const SystemParams& p, const SweepSchedule& s, int dim, std::pair<double, double> window,
                            int samples) {
    SweepOptions o;
    o.include_measurement = true;
    o.samples = samples;
    return fit_arctan(integrate_sweep(p, s, std::nullopt, FockSpace(dim), {}, o).record, window).delta_star;
}

} // namespace

CommandOutput cmd_steady(Context& ctx) {
    RunConfig& cfg = ctx.config;
    const SystemParams base = read_params(cfg);
    const ThermalEnvironment env = read_env(cfg);
    const std::vector<double> deltas = read_grid(cfg, "delta", -10.0, 15.0, 101);
    const double tol = cfg.number("convergence_tolerance", 1e-3);
    cfg.reject_unused();
    require_nonempty(deltas, "delta");

    const auto obs = run_ensemble<Observables>(static_cast<int>(deltas.size()), ctx.threads, [&](int i) {
        SystemParams p = base;
        p.delta = deltas[static_cast<std::size_t>(i)];
        return steady_observables(p, ctx.fock_dim, env);
    });
    CsvTable table({"delta", "n_mean", "x", "p", "phi"});
    SweepRecord rec;
    std::size_t peak = 0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        table.add({deltas[i], obs[i].n_mean, obs[i].x, obs[i].p, obs[i].phi});
        rec.push(0.0, deltas[i], obs[i]);
        if (obs[i].n_mean > obs[peak].n_mean) peak = i;
    }
    CommandOutput out;
    emit(ctx, out, "steady.csv", table);
    out.results["points"] = deltas.size();
    out.results["max_n_mean"] = obs[peak].n_mean;
    out.results["delta_at_max_n_mean"] = deltas[peak];
    try {
        const SwitchPoint sw = extract_switch(rec);
        out.results["phase_switch"] = {{"delta", sw.delta_star}, {"jump", sw.jump_magnitude}};
    } catch (const Error&) {
        out.results["phase_switch"] = nullptr;
    }
    SystemParams p = base;
    p.delta = deltas[peak];
    out.dim_convergence = convergence("n_mean at delta_at_max_n_mean", ctx.fock_dim, obs[peak].n_mean,
                                      steady_observables(p, ctx.fock_dim + 5, env).n_mean, tol, true);
    return out;
}

CommandOutput cmd_gap(Context& ctx) {
    RunConfig& cfg = ctx.config;
    const SystemParams base = read_params(cfg);
    const ThermalEnvironment env = read_env(cfg);
    const std::vector<double> deltas = read_grid(cfg, "delta", -10.0, 15.0, 26);
    const std::vector<double> thetas = read_grid(cfg, "theta", -std::numbers::pi, std::numbers::pi, 5);
    const double tol = cfg.number("convergence_tolerance", 1e-2);
    cfg.reject_unused();
    require_nonempty(deltas, "delta");
    require_nonempty(thetas, "theta");

    const int nd = static_cast<int>(deltas.size());
    const auto gaps = run_ensemble<double>(nd * static_cast<int>(thetas.size()), ctx.threads, [&](int k) {
        SystemParams p = base;
        p.theta = thetas[static_cast<std::size_t>(k / nd)];
        p.delta = deltas[static_cast<std::size_t>(k % nd)];
        return spectrum(build_liouvillian(p, FockSpace(ctx.fock_dim), env), 2).gap;
    });
    CsvTable table({"theta", "delta", "gap", "gap_over_gamma"});
    json per_theta = json::array();
    std::size_t global = 0;
    for (std::size_t t = 0; t < thetas.size(); ++t) {
        std::size_t best = t * deltas.size();
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            const std::size_t k = t * deltas.size() + d;
            table.add({thetas[t], deltas[d], gaps[k], base.gamma > 0 ? gaps[k] / base.gamma : NAN});
            if (gaps[k] < gaps[best]) best = k;
        }
        if (gaps[best] < gaps[global]) global = best;
        per_theta.push_back({{"theta", thetas[t]}, {"min_gap", gaps[best]}, {"delta_at_min", deltas[best % deltas.size()]}});
    }
    CommandOutput out;
    emit(ctx, out, "gap.csv", table);
    out.results["min_gap_by_theta"] = per_theta;
    SystemParams p = base;
    p.theta = thetas[global / deltas.size()];
    p.delta = deltas[global % deltas.size()];
    out.dim_convergence = convergence("gap at the global minimum", ctx.fock_dim, gaps[global],
                                      spectrum(build_liouvillian(p, FockSpace(ctx.fock_dim + 5), env), 2).gap, tol,
                                      true);
    return out;
}

CommandOutput cmd_sweep(Context& ctx) {
    RunConfig& cfg = ctx.config;
    const SystemParams params = read_params(cfg);
    const ThermalEnvironment env = read_env(cfg);
    const double lo = cfg.number("delta_min", -10.0);
    const double hi = cfg.number("delta_max", 15.0);
    const double ts = cfg.number("sweep_time", 50.0);
    const std::string directions = cfg.text("directions", "both");
    SweepOptions opts;
    opts.samples = cfg.integer("samples", 500);
    opts.include_measurement = cfg.flag("include_measurement", false);
    const double tol = cfg.number("convergence_tolerance", 0.05);
    cfg.reject_unused();
    if (directions != "both" && directions != "up" && directions != "down") {
        throw Error(ErrorCode::invalid_config, "directions must be up, down or both");
    }

    std::vector<std::pair<std::string, SweepSchedule>> runs;
    if (directions != "down") runs.emplace_back("up", SweepSchedule::up(lo, hi, ts));
    if (directions != "up") runs.emplace_back("down", SweepSchedule::down(hi, lo, ts));
    const auto results = run_ensemble<SweepResult>(static_cast<int>(runs.size()), ctx.threads, [&](int i) {
        return integrate_sweep(params, runs[static_cast<std::size_t>(i)].second, std::nullopt,
                               FockSpace(ctx.fock_dim), env, opts);
    });

    CommandOutput out;
    CsvTable table({"direction", "time", "delta", "n_mean", "x", "p", "phi"});
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const SweepRecord& rec = results[r].record;
        for (std::size_t i = 0; i < rec.size(); ++i) {
            table.add({runs[r].first, rec.times[i], rec.deltas[i], rec.n_mean[i], rec.x[i], rec.p[i], rec.phi[i]});
        }
        json j;
        j["accepted_steps"] = results[r].accepted_steps;
        j["rejected_steps"] = results[r].rejected_steps;
        try {
            const SwitchPoint sw = extract_switch(rec);
            j["phase_switch"] = {{"delta", sw.delta_star}, {"jump", sw.jump_magnitude}};
        } catch (const Error&) {
            j["phase_switch"] = nullptr;
        }
        out.results[runs[r].first] = j;
    }
    if (runs.size() == 2) {
        // Same sample grid traversed in opposite directions.
        const SweepRecord& up = results[0].record;
        const SweepRecord& down = results[1].record;
        double worst = 0.0, at = NAN;
        for (std::size_t i = 0; i < up.size(); ++i) {
            const double d = std::abs(up.n_mean[i] - down.n_mean[down.size() - 1 - i]);
            if (d > worst) {
                worst = d;
                at = up.deltas[i];
            }
        }
        out.results["max_hysteresis_n_mean"] = worst;
        out.results["delta_at_max_hysteresis"] = json_number(at);
    }
    emit(ctx, out, "sweep.csv", table);

    const SweepResult& last = results.back();
    const auto rerun = integrate_sweep(params, runs.back().second, std::nullopt, FockSpace(ctx.fock_dim + 5), env, opts);
    try {
        out.dim_convergence = convergence(runs.back().first + "-sweep switch delta", ctx.fock_dim,
                                          extract_switch(last.record).delta_star,
                                          extract_switch(rerun.record).delta_star, tol, false);
    } catch (const Error&) {
        out.dim_convergence = convergence(runs.back().first + "-sweep final n_mean", ctx.fock_dim,
                                          last.record.n_mean.back(), rerun.record.n_mean.back(), tol, false);
    }
    return out;
}

CommandOutput cmd_trajectory(Context& ctx) {
    RunConfig& cfg = ctx.config;
    const SystemParams params = read_params(cfg, {.kappa = 1.0});
    const SweepSchedule schedule = read_schedule(cfg, 15.0, -10.0, 50.0);
    TrajectoryOptions opts;
    opts.dt = cfg.number("dt", opts.dt);
    opts.samples = cfg.integer("samples", opts.samples);
    opts.smoothing_window = cfg.integer("smoothing_window", opts.smoothing_window);
    const int shots = cfg.integer("shots", 1);
    const bool fit = cfg.flag("fit", true);
    const auto window = read_fit_window(cfg);
    const double tol = cfg.number("convergence_tolerance", 0.05);
    cfg.reject_unused();
    if (shots < 1) throw Error(ErrorCode::invalid_config, "shots must be >= 1");

    const auto records = run_ensemble<TrajectoryRecord>(shots, ctx.threads, [&](int i) {
        NoiseStream noise(ctx.seed, static_cast<std::uint64_t>(i));
        return integrate_heterodyne(params, schedule, noise, FockSpace(ctx.fock_dim), opts);
    });
    CsvTable table({"shot", "time", "delta", "x_meas", "p_meas", "phi_meas", "x_smooth", "p_smooth", "phi_smooth",
                    "x", "p", "n_mean"});
    json per_shot = json::array();
    for (int s = 0; s < shots; ++s) {
        const TrajectoryRecord& r = records[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < r.size(); ++i) {
            table.add({static_cast<long long>(s), r.times[i], r.deltas[i], r.x_meas[i], r.p_meas[i], r.phi_meas[i],
                       r.x_smooth[i], r.p_smooth[i], r.phi_smooth[i], r.x[i], r.p[i], r.n_mean[i]});
        }
        json j{{"shot", s}, {"max_trace_drift", r.max_trace_drift}, {"min_eigenvalue", r.min_eigenvalue}};
        if (fit) {
            try {
                const ArctanFit f = fit_arctan(r.measured_phase_record(), window);
                j["delta_star"] = f.delta_star;
                j["slope_a"] = f.slope_a;
                j["offset_c"] = f.offset_c;
                j["fit_rms"] = f.fit_rms;
            } catch (const Error& e) {
                j["delta_star"] = nullptr;
                j["failure"] = to_string(e.code());
            }
        }
        per_shot.push_back(j);
    }
    CommandOutput out;
    emit(ctx, out, "trajectory.csv", table);
    out.results["shots"] = per_shot;
    // Shot-by-shot records are not comparable across dimensions; the
    // deterministic gamma + kappa switch is the convergence proxy.
    out.dim_convergence =
        convergence("deterministic gamma+kappa switch delta", ctx.fock_dim,
                    deterministic_switch(params, schedule, ctx.fock_dim, window, opts.samples),
                    deterministic_switch(params, schedule, ctx.fock_dim + 5, window, opts.samples), tol, false);
    return out;
}

namespace {

CalibrationCurve run_calibration(Context& ctx, const SystemParams& params, const std::vector<double>& f_grid,
                                 const SweepSchedule& schedule, std::pair<double, double> window, int samples,
                                 CommandOutput& out) {
    CalibrationOptions copts;
    copts.fit_window = window;
    copts.threads = ctx.threads;
    copts.samples = samples;
    const CalibrationCurve curve = calibrate(params, f_grid, schedule, FockSpace(ctx.fock_dim), {}, copts);
    CsvTable table({"f", "delta_star", "in_window"});
    for (std::size_t i = 0; i < curve.f_grid.size(); ++i) {
        table.add({curve.f_grid[i], curve.delta_star_grid[i], static_cast<long long>(curve.in_window[i])});
    }
    emit(ctx, out, "calibration.csv", table);
    out.results["calibration"] = {{"slope", curve.linear_fit.slope},
                                  {"intercept", curve.linear_fit.intercept},
                                  {"r_squared", curve.linear_fit.r_squared},
                                  {"validity_window", {curve.validity_window.first, curve.validity_window.second}}};
    return curve;
}

} // namespace

CommandOutput cmd_calibrate(Context& ctx) {
    RunConfig& cfg = ctx.config;
    const SystemParams params = read_params(cfg, {.kappa = 1.0});
    const std::vector<double> f_grid = cfg.list("f_grid", {2, 3, 4, 5, 6, 7, 8});
    const SweepSchedule schedule = read_schedule(cfg, 15.0, -10.0, 50.0);
    const auto window = read_fit_window(cfg);
    const int samples = cfg.integer("samples", 500);
    const double tol = cfg.number("convergence_tolerance", 0.05);
    cfg.reject_unused();
    require_nonempty(f_grid, "f");

    CommandOutput out;
    const CalibrationCurve curve = run_calibration(ctx, params, f_grid, schedule, window, samples, out);
    const std::size_t mid = curve.f_grid.size() / 2;
    SystemParams p = params;
    p.f = curve.f_grid[mid];
    out.dim_convergence = convergence("calibration delta* at the middle node", ctx.fock_dim,
                                      curve.delta_star_grid[mid],
                                      deterministic_switch(p, schedule, ctx.fock_dim + 5, window, samples), tol, false);
    return out;
}

CommandOutput cmd_transduce(Context& ctx) {
    RunConfig& cfg = ctx.config;
    ProtocolConfig pc;
    pc.params = read_params(cfg, {.kappa = 1.0});
    const double true_f = cfg.number("true_f", pc.params.f);
    const int shots = cfg.integer("shots", 200);
    const std::vector<double> f_grid = cfg.list("f_grid", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    pc.schedule = read_schedule(cfg, 15.0, -10.0, 50.0);
    pc.trajectory.dt = cfg.number("dt", pc.trajectory.dt);
    pc.trajectory.samples = cfg.integer("samples", pc.trajectory.samples);
    pc.trajectory.smoothing_window = cfg.integer("smoothing_window", pc.trajectory.smoothing_window);
    pc.fit_window = read_fit_window(cfg);
    pc.noiseless = cfg.flag("noiseless", false);
    pc.histogram_bins = cfg.integer("histogram_bins", pc.histogram_bins);
    const bool with_pdf = cfg.flag("transition_pdf", true);
    const double tol = cfg.number("convergence_tolerance", 0.05);
    cfg.reject_unused();
    pc.fock_dim = ctx.fock_dim;
    pc.seed = ctx.seed;
    pc.threads = ctx.threads;

    CommandOutput out;
    const CalibrationCurve curve =
        run_calibration(ctx, pc.params, f_grid, pc.schedule, pc.fit_window, pc.trajectory.samples, out);
    const EstimateDistribution dist = run_protocol(true_f, shots, pc, curve);

    CsvTable shots_table({"shot", "ok", "delta_star", "f_meas", "fit_rms", "failure"});
    for (const ShotResult& s : dist.shots) {
        shots_table.add({static_cast<long long>(s.index), static_cast<long long>(s.ok), s.delta_star, s.f_meas,
                         s.fit_rms, s.failure});
    }
    emit(ctx, out, "shots.csv", shots_table);
    CsvTable hist({"bin_low", "bin_high", "count", "expected"});
    for (std::size_t i = 0; i < dist.histogram.counts.size(); ++i) {
        hist.add({dist.histogram.edges[i], dist.histogram.edges[i + 1],
                  static_cast<long long>(dist.histogram.counts[i]), dist.histogram.expected[i]});
    }
    emit(ctx, out, "histogram.csv", hist);

    const double loss = pc.params.kappa + pc.params.gamma;
    json j;
    j["true_f"] = true_f;
    j["true_f_over_kappa_plus_gamma"] = true_f / loss;
    j["shots"] = shots;
    j["successes"] = dist.samples.size();
    j["failures"] = dist.failures;
    j["f_meas_mean"] = json_number(dist.f_meas.mean);
    j["f_meas_std"] = json_number(dist.f_meas.std);
    j["f_meas_median"] = json_number(dist.f_meas.median);
    j["f_meas_mean_over_kappa_plus_gamma"] = json_number(dist.f_meas.mean / loss);
    j["f_meas_std_over_kappa_plus_gamma"] = json_number(dist.f_meas.std / loss);
    j["delta_star_mean"] = json_number(dist.delta_star.mean);
    j["delta_star_std"] = json_number(dist.delta_star.std);
    j["histogram_chi2_per_dof"] = dist.histogram.chi2_per_dof();
    out.results["protocol"] = j;

    if (with_pdf) {
        SystemParams p = pc.params;
        p.f = true_f;
        TransitionPdfOptions topts;
        topts.samples = pc.trajectory.samples;
        const SwitchPdf pdf = transition_pdf(p, pc.schedule, FockSpace(ctx.fock_dim), {}, topts);
        CsvTable t({"delta", "p_tr_raw", "p_tr", "pdf"});
        for (std::size_t i = 0; i < pdf.delta_grid.size(); ++i) {
            t.add({pdf.delta_grid[i], pdf.p_tr_raw[i], pdf.p_tr[i], pdf.pdf[i]});
        }
        emit(ctx, out, "transition_pdf.csv", t);
        out.results["transition_pdf"] = {{"mean", json_number(pdf.mean())},
                                         {"mode", json_number(pdf.mode())},
                                         {"total_probability", pdf.total_probability},
                                         {"clipped_mass", pdf.clipped_mass},
                                         {"model_violation", pdf.model_violation}};
        if (pdf.model_violation) {
            std::cerr << "warning: transition pdf clipped mass " << pdf.clipped_mass
                      << " exceeds 0.1; one-way switching assumption fails\n";
        }
    }
    SystemParams p = pc.params;
    p.f = true_f;
    out.dim_convergence = convergence(
        "deterministic gamma+kappa switch delta at true_f", ctx.fock_dim,
        deterministic_switch(p, pc.schedule, ctx.fock_dim, pc.fit_window, pc.trajectory.samples),
        deterministic_switch(p, pc.schedule, ctx.fock_dim + 5, pc.fit_window, pc.trajectory.samples), tol, false);
    return out;
}

CommandOutput cmd_qfi(Context& ctx) {
    RunConfig& cfg = ctx.config;
    const SystemParams params = read_params(cfg, {.f = 4.5, .g_abs = 3.0, .gamma = 3.0, .eta = 0.0});
    const std::vector<double> deltas = read_grid(cfg, "delta", -4.0, 14.0, 37);
    const std::vector<double> temps_mk = cfg.list("temperatures_mk", {0.0});
    const double w = omega_c(cfg);
    QfiOptions qopts;
    if (cfg.has("df")) qopts.step = cfg.number("df", 0.0);
    const double tol = cfg.number("convergence_tolerance", 1e-3);
    cfg.reject_unused();
    require_nonempty(deltas, "delta");
    require_nonempty(temps_mk, "temperature");

    std::vector<double> temps;
    for (double t : temps_mk) temps.push_back(t * 1e-3);
    const auto rows = temperature_scan(params, FockSpace(ctx.fock_dim), temps, deltas, w, ctx.threads, qopts);
    CsvTable table({"delta", "temperature_mk", "n_th", "qfi", "qfi_alternate", "qfi_linear", "richardson_change",
                    "flagged", "error"});
    json peaks = json::array();
    int failures = 0;
    for (std::size_t t = 0; t < temps.size(); ++t) {
        double best = -1.0, at = NAN;
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            const QfiResult& r = rows[t * deltas.size() + d];
            const bool ok = r.error.empty();
            if (!ok) ++failures;
            table.add({deltas[d], temps_mk[t], r.n_th, ok ? r.qfi : NAN, ok ? r.qfi_alternate : NAN,
                       linear_oscillator_qfi(params.gamma, deltas[d]), ok ? r.richardson_change : NAN,
                       static_cast<long long>(r.flagged), ok ? std::string() : std::string(r.error.substr(0, r.error.find(':')))});
            if (ok && r.qfi > best) {
                best = r.qfi;
                at = deltas[d];
            }
        }
        peaks.push_back({{"temperature_mk", temps_mk[t]}, {"peak_qfi", json_number(best)}, {"delta_at_peak", json_number(at)}});
    }
    CommandOutput out;
    emit(ctx, out, "qfi.csv", table);
    out.results["peaks"] = peaks;
    out.results["failed_points"] = failures;

    SystemParams p = params;
    p.delta = peaks[0]["delta_at_peak"].is_null() ? deltas.front() : peaks[0]["delta_at_peak"].get<double>();
    const ThermalEnvironment env = ThermalEnvironment::from_temperature(w, temps.front());
    qopts.richardson = false;
    out.dim_convergence = convergence("qfi at the first-temperature peak", ctx.fock_dim,
                                      qfi_mixed(p, env, FockSpace(ctx.fock_dim), qopts).qfi,
                                      qfi_mixed(p, env, FockSpace(ctx.fock_dim + 5), qopts).qfi, tol, true);
    return out;
}

CommandOutput cmd_husimi(Context& ctx) {
    RunConfig& cfg = ctx.config;
    const SystemParams base = read_params(cfg);
    const ThermalEnvironment env = read_env(cfg);
    const std::vector<double> deltas = cfg.list("deltas", {0.0, 5.0});
    const int points = cfg.integer("grid_points", 201);
    const double half_width = cfg.number("half_width", 0.0);
    const double tol = cfg.number("convergence_tolerance", 1e-3);
    cfg.reject_unused();
    require_nonempty(deltas, "delta");
    if (points < 2) throw Error(ErrorCode::invalid_config, "grid_points must be >= 2");

    CsvTable table({"delta", "x", "p", "q"});
    json per_delta = json::array();
    double first_p = NAN;
    for (double d : deltas) {
        SystemParams p = base;
        p.delta = d;
        const Matrix rho = steady_state(build_liouvillian(p, FockSpace(ctx.fock_dim), env)).matrix;
        HusimiGridSpec spec = HusimiGridSpec::enclosing(rho, points);
        if (half_width > 0.0) spec = {-half_width, half_width, -half_width, half_width, points, points};
        double mass = 0.0;
        const HusimiGrid q = husimi_q(rho, spec, &mass);
        for (int i = 0; i < spec.nx; ++i) {
            for (int j = 0; j < spec.np; ++j) table.add({d, q.x_at(i), q.p_at(j), q.values(i, j)});
        }
        if (std::abs(mass - 1.0) > 1e-3) {
            std::cerr << "warning: Husimi grid at delta " << d << " holds mass " << mass << "\n";
        }
        json j{{"delta", d}, {"mass", mass}, {"n_mean", measure(rho).n_mean}, {"half_width", spec.x_max}};
        j["p_minus_exact"] = half_plane_probability(rho);
        try {
            j["p_minus"] = half_plane_probability(q);
        } catch (const Error& e) {
            j["p_minus"] = nullptr;
            j["p_minus_error"] = e.what();
        }
        if (std::isnan(first_p)) first_p = j["p_minus_exact"].get<double>();
        per_delta.push_back(j);
    }
    CommandOutput out;
    emit(ctx, out, "husimi.csv", table);
    out.results["states"] = per_delta;
    SystemParams p = base;
    p.delta = deltas.front();
    const double compared =
        half_plane_probability(steady_state(build_liouvillian(p, FockSpace(ctx.fock_dim + 5), env)).matrix);
    out.dim_convergence = convergence("p_minus at the first delta", ctx.fock_dim, first_p, compared, tol, false);
    return out;
}

} // namespace kpo::cli
