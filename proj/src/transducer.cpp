#include "kpo/transducer.hpp"

#include "kpo/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace kpo {

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::invalid_config, "fit_line needs >= 2 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw Error(ErrorCode::invalid_config, "fit_line: x values are all equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return fit;
}

namespace {

double switch_from_sweep(const SystemParams& params, const SweepSchedule& schedule, FockSpace space,
                         const ThermalEnvironment& env, std::pair<double, double> window, int samples) {
    SweepOptions opts;
    opts.include_measurement = true;
    opts.samples = samples;
    const SweepResult r = integrate_sweep(params, schedule, std::nullopt, space, env, opts);
    return fit_arctan(r.record, window).delta_star;
}

} // namespace

CalibrationCurve calibrate(const SystemParams& params, std::span<const double> f_grid, const SweepSchedule& schedule,
                           FockSpace space, const ThermalEnvironment& env, const CalibrationOptions& options) {
    if (f_grid.size() < 2) throw Error(ErrorCode::invalid_config, "calibration needs at least two F values");
    if (schedule.direction() != SweepDirection::down) {
        throw Error(ErrorCode::invalid_config, "calibration requires a down-sweep");
    }
    CalibrationCurve curve;
    curve.f_grid.assign(f_grid.begin(), f_grid.end());
    std::sort(curve.f_grid.begin(), curve.f_grid.end());

    struct Node {
        double delta_star = 0.0;
        std::string error;
    };
    const auto nodes = run_ensemble<Node>(static_cast<int>(curve.f_grid.size()), options.threads, [&](int i) {
        SystemParams p = params;
        p.f = curve.f_grid[static_cast<std::size_t>(i)];
        try {
            return Node{switch_from_sweep(p, schedule, space, env, options.fit_window, options.samples), {}};
        } catch (const Error& e) {
            if (e.code() != ErrorCode::no_switch && e.code() != ErrorCode::fit_failed) throw;
            return Node{std::numeric_limits<double>::quiet_NaN(), e.what()};
        }
    });

    // "Departures from linearity occur when F becomes comparable to the loss
    // rates": keep F strictly above max(gamma, eta).
    const double loss = std::max(params.gamma, params.eta);
    std::vector<double> fx, dy;
    std::ostringstream missing;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        curve.delta_star_grid.push_back(nodes[i].delta_star);
        const bool inside = curve.f_grid[i] > loss;
        curve.in_window.push_back(inside ? 1 : 0);
        if (!inside) continue;
        if (!nodes[i].error.empty()) {
            missing << " F=" << curve.f_grid[i] << " (" << nodes[i].error << ")";
            continue;
        }
        fx.push_back(curve.f_grid[i]);
        dy.push_back(nodes[i].delta_star);
    }
    if (!missing.str().empty()) {
        throw Error(ErrorCode::calibration_failed, "no switch extracted at calibration nodes:" + missing.str());
    }
    if (fx.size() < 2) {
        throw Error(ErrorCode::calibration_failed, "fewer than two calibration nodes above the loss-rate scale");
    }
    curve.validity_window = {fx.front(), fx.back()};

    const double direction = dy.back() > dy.front() ? 1.0 : -1.0;
    std::ostringstream bad;
    for (std::size_t i = 1; i < dy.size(); ++i) {
        if (!(direction * (dy[i] - dy[i - 1]) > 0.0)) {
            bad << " (F=" << fx[i - 1] << ", delta*=" << dy[i - 1] << ") -> (F=" << fx[i] << ", delta*=" << dy[i]
                << ")";
        }
    }
    if (!bad.str().empty()) {
        throw Error(ErrorCode::calibration_failed, "delta*(F) is not strictly monotone:" + bad.str());
    }
    curve.linear_fit = fit_line(fx, dy);
    return curve;
}

double estimate_f(double delta_star, const CalibrationCurve& calibration) {
    std::vector<std::pair<double, double>> table;  // (delta*, F)
    for (std::size_t i = 0; i < calibration.f_grid.size(); ++i) {
        if (calibration.in_window[i]) table.emplace_back(calibration.delta_star_grid[i], calibration.f_grid[i]);
    }
    if (table.size() < 2) throw Error(ErrorCode::calibration_failed, "calibration table has fewer than two nodes");
    std::sort(table.begin(), table.end());
    if (!(delta_star >= table.front().first && delta_star <= table.back().first)) {
        std::ostringstream msg;
        msg << "delta* = " << delta_star << " outside the calibrated range [" << table.front().first << ", "
            << table.back().first << "]";
        throw Error(ErrorCode::extrapolation, msg.str());
    }
    const auto hi = std::lower_bound(table.begin(), table.end(), std::make_pair(delta_star, -1e300));
    if (hi->first == delta_star) return hi->second;
    const auto lo = hi - 1;
    const double w = (delta_star - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
}

SampleSummary summarize(std::span<const double> samples) {
    SampleSummary s;
    if (samples.empty()) {
        s.mean = s.std = s.median = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    const double n = static_cast<double>(samples.size());
    s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double v = 0.0;
    for (double x : samples) v += (x - s.mean) * (x - s.mean);
    s.std = samples.size() > 1 ? std::sqrt(v / (n - 1.0)) : 0.0;
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size() / 2;
    s.median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
    return s;
}

Histogram gaussian_histogram(std::span<const double> samples, int bins) {
    if (bins < 4) throw Error(ErrorCode::invalid_config, "histogram needs at least 4 bins");
    Histogram h;
    const SampleSummary s = summarize(samples);
    if (samples.size() < 2 || !(s.std > 0.0)) return h;
    const double lo = s.mean - 3.0 * s.std;
    const double width = 6.0 * s.std / bins;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + i * width);
    for (double x : samples) {
        const int k = static_cast<int>(std::floor((x - lo) / width));
        if (k >= 0 && k < bins) ++h.counts[static_cast<std::size_t>(k)];
    }
    auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - s.mean) / (s.std * std::sqrt(2.0))); };
    const double n = static_cast<double>(samples.size());
    int used = 0;
    for (int i = 0; i < bins; ++i) {
        const double e = n * (cdf(h.edges[static_cast<std::size_t>(i) + 1]) - cdf(h.edges[static_cast<std::size_t>(i)]));
        h.expected.push_back(e);
        // Sparse tail bins carry no chi^2 information.
        if (e < 1.0) continue;
        const double d = h.counts[static_cast<std::size_t>(i)] - e;
        h.chi2 += d * d / e;
        ++used;
    }
    h.dof = std::max(used - 3, 0);
    return h;
}

std::vector<ShotResult> measure_switches(const SystemParams& params, int n_shots, const ProtocolConfig& config) {
    if (n_shots < 1) throw Error(ErrorCode::invalid_config, "need at least one shot");
    params.validate();
    config.schedule.validate();
    if (config.schedule.direction() != SweepDirection::down) {
        throw Error(ErrorCode::invalid_config, "the protocol uses a down-sweep");
    }
    const FockSpace space(config.fock_dim);

    auto fail = [](int index, const Error& e) {
        ShotResult r;
        r.index = index;
        r.failure = to_string(e.code());
        r.message = e.what();
        return r;
    };

    if (config.noiseless) {
        SweepOptions opts;
        opts.include_measurement = true;
        opts.samples = config.trajectory.samples;
        const SweepResult sweep = integrate_sweep(params, config.schedule, std::nullopt, space, {}, opts);
        ShotResult one;
        try {
            const ArctanFit fit = fit_arctan(sweep.record, config.fit_window);
            one.ok = true;
            one.delta_star = fit.delta_star;
            one.fit_rms = fit.fit_rms;
        } catch (const Error& e) {
            one = fail(0, e);
        }
        std::vector<ShotResult> out(static_cast<std::size_t>(n_shots), one);
        for (int i = 0; i < n_shots; ++i) out[static_cast<std::size_t>(i)].index = i;
        return out;
    }

    SystemParams start = params;
    start.delta = config.schedule.delta_start;
    const DensityMatrix initial = steady_state(build_liouvillian(start, space, {}, true));

    return run_ensemble<ShotResult>(n_shots, config.threads, [&](int i) {
        NoiseStream noise(config.seed, static_cast<std::uint64_t>(i));
        try {
            const TrajectoryRecord rec =
                integrate_heterodyne(params, config.schedule, noise, space, config.trajectory, initial);
            const ArctanFit fit = fit_arctan(rec.measured_phase_record(), config.fit_window);
            ShotResult r;
            r.index = i;
            r.ok = true;
            r.delta_star = fit.delta_star;
            r.fit_rms = fit.fit_rms;
            return r;
        } catch (const Error& e) {
            return fail(i, e);
        }
    });
}

EstimateDistribution run_protocol(double true_f, int n_shots, const ProtocolConfig& config,
                                  const CalibrationCurve& calibration) {
    SystemParams params = config.params;
    params.f = true_f;
    EstimateDistribution dist;
    dist.true_f = true_f;
    dist.shots = measure_switches(params, n_shots, config);

    for (ShotResult& shot : dist.shots) {
        if (shot.ok) {
            try {
                shot.f_meas = estimate_f(shot.delta_star, calibration);
                dist.samples.push_back(shot.f_meas);
                dist.delta_stars.push_back(shot.delta_star);
            } catch (const Error& e) {
                shot.ok = false;
                shot.failure = to_string(e.code());
                shot.message = e.what();
            }
        }
        if (!shot.ok) ++dist.failures[shot.failure];
    }
    const int failed = n_shots - static_cast<int>(dist.samples.size());
    if (failed > config.max_failure_fraction * n_shots) {
        std::ostringstream msg;
        msg << failed << " of " << n_shots << " shots failed:";
        for (const auto& [name, count] : dist.failures) msg << ' ' << name << '=' << count;
        throw Error(ErrorCode::protocol_degraded, msg.str());
    }
    dist.f_meas = summarize(dist.samples);
    dist.delta_star = summarize(dist.delta_stars);
    dist.histogram = gaussian_histogram(dist.samples, config.histogram_bins);
    return dist;
}

std::vector<KappaGammaRow> kappa_gamma_scan(double kappa_plus_gamma, std::span<const double> ratios, int n_shots,
                                            const ProtocolConfig& config) {
    if (!(kappa_plus_gamma > 0.0)) throw Error(ErrorCode::invalid_config, "kappa + gamma must be positive");
    std::vector<KappaGammaRow> rows;
    for (double ratio : ratios) {
        if (!(ratio > 0.0)) throw Error(ErrorCode::invalid_config, "kappa/gamma ratios must be positive");
        KappaGammaRow row;
        row.ratio = ratio;
        row.kappa = std::isinf(ratio) ? kappa_plus_gamma : kappa_plus_gamma * ratio / (1.0 + ratio);
        row.gamma = kappa_plus_gamma - row.kappa;
        SystemParams p = config.params;
        p.kappa = row.kappa;
        p.gamma = row.gamma;
        std::vector<double> stars;
        for (const ShotResult& s : measure_switches(p, n_shots, config)) {
            if (s.ok) stars.push_back(s.delta_star);
        }
        row.successes = static_cast<int>(stars.size());
        row.failures = n_shots - row.successes;
        row.delta_star = summarize(stars);
        rows.push_back(row);
    }
    return rows;
}

SweepTimeFit fit_power_law(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) throw Error(ErrorCode::invalid_config, "power-law fit needs >= 3 points");
    for (double v : x) {
        if (!(v > 0.0)) throw Error(ErrorCode::invalid_config, "power-law fit needs positive x");
    }
    // For fixed a the model is linear in (b, c).
    auto solve = [&](double a) {
        std::vector<double> u(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) u[i] = std::pow(x[i], -a);
        const LinearFit lf = fit_line(u, y);
        SweepTimeFit f{a, lf.slope, lf.intercept, 0.0};
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - (f.b * u[i] + f.c);
            s += r * r;
        }
        f.rms = std::sqrt(s / static_cast<double>(x.size()));
        return f;
    };
    SweepTimeFit best = solve(0.01);
    for (double a = 0.01; a <= 3.0 + 1e-12; a += 0.01) {
        const SweepTimeFit f = solve(a);
        if (f.rms < best.rms) best = f;
    }
    // Golden-section refinement around the best grid point.
    double lo = std::max(1e-4, best.a - 0.01), hi = best.a + 0.01;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60; ++it) {
        const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        if (solve(m1).rms < solve(m2).rms) hi = m2;
        else lo = m1;
    }
    const SweepTimeFit refined = solve(0.5 * (lo + hi));
    return refined.rms <= best.rms ? refined : best;
}

} // namespace kpo
