#include "kpo/dynamics.hpp"

#include "kpo/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kpo {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepStats {
    long accepted = 0;
    long rejected = 0;
};

class DormandPrince {
public:
    DormandPrince(const MasterEquation& eq, std::function<double(double)> delta_of_t, double rtol, double atol)
        : eq_(eq), delta_of_t_(std::move(delta_of_t)), rtol_(rtol), atol_(atol) {}

    // Advances rho from t to t_end exactly.
    void advance(Matrix& rho, double& t, double t_end, StepStats& stats) {
        if (h_ <= 0.0) h_ = std::min(1e-2, std::max(1e-6, 0.01 * (t_end - t)));
        if (!fsal_valid_) {
            eq_.derivative(rho, delta_of_t_(t), k1_);
            fsal_valid_ = true;
        }
        while (t < t_end) {
            const double remaining = t_end - t;
            const bool last = h_ >= remaining;
            const double h = last ? remaining : h_;
            if (h < 1e-14 * std::max(1.0, std::abs(t))) {
                std::ostringstream msg;
                msg << "integrator step size underflow; last accepted time t = " << t;
                throw Error(ErrorCode::numerical_failure, msg.str());
            }
            stage(rho, t, h);
            const double err = error_norm(rho);
            if (!std::isfinite(err)) {
                std::ostringstream msg;
                msg << "integrator produced non-finite state; last accepted time t = " << t;
                throw Error(ErrorCode::numerical_failure, msg.str());
            }
            if (err <= 1.0) {
                rho.swap(y_new_);
                k1_.swap(k7_);
                t = last ? t_end : t + h;
                ++stats.accepted;
                const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
                if (!last || factor < 1.0) h_ = h * factor;
            } else {
                ++stats.rejected;
                h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
            }
        }
    }

private:
    void stage(const Matrix& y, double t, double h) {
        tmp_ = y + h * a21 * k1_;
        eq_.derivative(tmp_, delta_of_t_(t + c2 * h), k2_);
        tmp_ = y + h * (a31 * k1_ + a32 * k2_);
        eq_.derivative(tmp_, delta_of_t_(t + c3 * h), k3_);
        tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        eq_.derivative(tmp_, delta_of_t_(t + c4 * h), k4_);
        tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        eq_.derivative(tmp_, delta_of_t_(t + c5 * h), k5_);
        tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        eq_.derivative(tmp_, delta_of_t_(t + h), k6_);
        y_new_ = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
        eq_.derivative(y_new_, delta_of_t_(t + h), k7_);
        err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    }

    double error_norm(const Matrix& y) const {
        const Eigen::ArrayXXd scale =
            atol_ + rtol_ * y.array().abs().max(y_new_.array().abs());
        return std::sqrt((err_.array().abs() / scale).square().mean());
    }

    const MasterEquation& eq_;
    std::function<double(double)> delta_of_t_;
    double rtol_;
    double atol_;
    double h_ = 0.0;
    bool fsal_valid_ = false;
    Matrix k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y_new_, err_;
};

void hermitize(Matrix& rho) {
    rho = 0.5 * (rho + rho.adjoint()).eval();
}

} // namespace

void SweepSchedule::validate() const {
    if (!std::isfinite(delta_start) || !std::isfinite(delta_end) || !std::isfinite(sweep_time) ||
        !(sweep_time > 0.0)) {
        throw Error(ErrorCode::invalid_config, "sweep schedule requires finite endpoints and sweep_time > 0");
    }
}

void SweepRecord::push(double t, double delta, const Observables& o) {
    times.push_back(t);
    deltas.push_back(delta);
    n_mean.push_back(o.n_mean);
    x.push_back(o.x);
    p.push_back(o.p);
    phi.push_back(o.phi);
    phase_defined.push_back(o.phase_defined ? 1 : 0);
}

SweepResult integrate_sweep(const SystemParams& params, const SweepSchedule& schedule,
                            const std::optional<DensityMatrix>& initial, FockSpace space,
                            const ThermalEnvironment& env, const SweepOptions& options) {
    params.validate();
    schedule.validate();
    if (options.samples < 2) throw Error(ErrorCode::invalid_config, "sweep needs at least 2 output samples");

    Matrix rho;
    if (initial) {
        if (!(initial->space == space)) throw Error(ErrorCode::invalid_space, "initial state dimension mismatch");
        require_physical(initial->matrix, options.tolerances, "initial state");
        rho = initial->matrix;
    } else {
        SystemParams start = params;
        start.delta = schedule.delta_start;
        rho = steady_state(build_liouvillian(start, space, env, options.include_measurement)).matrix;
    }

    const MasterEquation eq(params, space, env, options.include_measurement);
    DormandPrince stepper(eq, [&](double t) { return schedule.delta_at(t); }, options.rtol, options.atol);

    SweepResult result{{}, {space, Matrix()}, 0, 0};
    StepStats stats;
    double t = 0.0;
    const int n = options.samples;
    for (int k = 0; k < n; ++k) {
        const double t_k = k == n - 1 ? schedule.sweep_time : schedule.sweep_time * k / (n - 1);
        stepper.advance(rho, t, t_k, stats);
        const double drift = std::abs(rho.trace() - 1.0);
        if (drift > options.max_trace_drift) {
            std::ostringstream msg;
            msg << "trace drift " << drift << " at t = " << t;
            throw Error(ErrorCode::trace_drift, msg.str());
        }
        const double delta = schedule.delta_at(t_k);
        result.record.push(t_k, delta, measure(rho));
        if (options.observer) options.observer(static_cast<std::size_t>(k), t_k, delta, rho);
    }
    hermitize(rho);
    require_physical(rho, options.tolerances, "final swept state");
    result.final_state.matrix = std::move(rho);
    result.accepted_steps = stats.accepted;
    result.rejected_steps = stats.rejected;
    return result;
}

DensityMatrix evolve_fixed(const SystemParams& params, const DensityMatrix& initial, double duration,
                           const ThermalEnvironment& env, bool include_measurement, double rtol, double atol) {
    params.validate();
    if (!(duration >= 0.0)) throw Error(ErrorCode::invalid_config, "duration must be >= 0");
    const MasterEquation eq(params, initial.space, env, include_measurement);
    const double delta = params.delta;
    DormandPrince stepper(eq, [delta](double) { return delta; }, rtol, atol);
    Matrix rho = initial.matrix;
    double t = 0.0;
    StepStats stats;
    stepper.advance(rho, t, duration, stats);
    hermitize(rho);
    return {initial.space, std::move(rho)};
}

std::vector<double> unwrap_phase(std::span<const double> phi) {
    std::vector<double> out(phi.begin(), phi.end());
    double offset = 0.0;
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (double& v : out) {
        if (std::isnan(v)) continue;
        double raw = v + offset;
        if (!std::isnan(previous)) {
            const double jump = raw - previous;
            const double k = std::round(jump / (2.0 * std::numbers::pi));
            offset -= k * 2.0 * std::numbers::pi;
            raw -= k * 2.0 * std::numbers::pi;
        }
        v = raw;
        previous = raw;
    }
    return out;
}

SwitchPoint extract_switch(const SweepRecord& record, std::optional<std::pair<double, double>> window,
                           std::optional<double> half_width) {
    std::vector<double> deltas;
    std::vector<double> phases;
    for (std::size_t i = 0; i < record.size(); ++i) {
        const double d = record.deltas[i];
        if (window && (d < std::min(window->first, window->second) || d > std::max(window->first, window->second))) {
            continue;
        }
        if (!record.phase_defined.empty() && !record.phase_defined[i]) continue;
        if (std::isnan(record.phi[i])) continue;
        deltas.push_back(d);
        phases.push_back(record.phi[i]);
    }
    if (deltas.size() < 3) throw Error(ErrorCode::no_switch, "too few phase samples to locate a switch");
    const std::vector<double> unwrapped = unwrap_phase(phases);

    const std::size_t m = deltas.size() - 1;
    std::vector<double> slope(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double dd = deltas[i + 1] - deltas[i];
        slope[i] = dd == 0.0 ? 0.0 : std::abs((unwrapped[i + 1] - unwrapped[i]) / dd);
    }
    const std::size_t k = static_cast<std::size_t>(std::max_element(slope.begin(), slope.end()) - slope.begin());
    double delta_star = 0.5 * (deltas[k] + deltas[k + 1]);
    if (k > 0 && k + 1 < m) {
        const double s0 = slope[k - 1], s1 = slope[k], s2 = slope[k + 1];
        const double denom = s0 - 2.0 * s1 + s2;
        if (denom < 0.0) {
            const double offset = std::clamp(0.5 * (s0 - s2) / denom, -0.5, 0.5);
            delta_star += offset * (deltas[k + 1] - deltas[k]);
        }
    }

    const double span = std::abs(deltas.back() - deltas.front());
    const double hw = half_width.value_or(0.05 * span);
    // Phase at the samples nearest delta_star -+ hw, clamped to the record.
    auto phase_near = [&](double target) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < deltas.size(); ++i) {
            if (std::abs(deltas[i] - target) < std::abs(deltas[best] - target)) best = i;
        }
        return unwrapped[best];
    };
    const double jump = std::abs(phase_near(delta_star + hw) - phase_near(delta_star - hw));
    if (!(jump > std::numbers::pi / 2)) {
        std::ostringstream msg;
        msg << "no phase jump above pi/2 (largest " << jump << " rad near delta " << delta_star << ")";
        throw Error(ErrorCode::no_switch, msg.str());
    }
    return {delta_star, jump};
}

} // namespace kpo
