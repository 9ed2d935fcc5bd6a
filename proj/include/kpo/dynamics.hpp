#pragma once

// Deterministic Lindblad evolution under linear detuning sweeps.

#include "kpo/liouvillian.hpp"

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace kpo {

enum class SweepDirection { up, down };

struct SweepSchedule {
    double delta_start = 0.0;
    double delta_end = 0.0;
    double sweep_time = 1.0;  // t_s, units of 1/U

    SweepDirection direction() const {
        return delta_end < delta_start ? SweepDirection::down : SweepDirection::up;
    }
    double delta_at(double t) const {
        return delta_start + (delta_end - delta_start) * t / sweep_time;
    }
    /// Throws ErrorCode::invalid_config unless sweep_time > 0 and all finite.
    void validate() const;

    static SweepSchedule down(double from, double to, double sweep_time) { return {from, to, sweep_time}; }
    static SweepSchedule up(double from, double to, double sweep_time) { return {from, to, sweep_time}; }
};

struct SweepRecord {
    std::vector<double> times;
    std::vector<double> deltas;
    std::vector<double> n_mean;
    std::vector<double> x;
    std::vector<double> p;
    std::vector<double> phi;  // NaN where the phase is undefined
    std::vector<char> phase_defined;

    std::size_t size() const { return times.size(); }
    void push(double t, double delta, const Observables& o);
};

using SampleObserver = std::function<void(std::size_t index, double t, double delta, const Matrix& rho)>;

struct SweepOptions {
    int samples = 500;
    double rtol = 1e-8;
    double atol = 1e-10;
    /// Use gamma + kappa (unconditional dynamics of the monitored cavity).
    bool include_measurement = false;
    double max_trace_drift = 1e-6;
    StateTolerances tolerances{1e-9, 1e-6, 1e-7};
    /// Called at every output sample with the current state.
    SampleObserver observer;
};

struct SweepResult {
    SweepRecord record;
    DensityMatrix final_state;
    long accepted_steps = 0;
    long rejected_steps = 0;
};

/// Integrates d rho/dt = L(delta(t)) rho with an adaptive Dormand-Prince 5(4)
/// scheme. Without `initial`, starts from the steady state at delta_start.
SweepResult integrate_sweep(const SystemParams& params, const SweepSchedule& schedule,
                            const std::optional<DensityMatrix>& initial, FockSpace space,
                            const ThermalEnvironment& env = {}, const SweepOptions& options = {});

/// Fixed-delta evolution from `initial` for `duration` (used as an
/// independent check of the steady-state solver).
DensityMatrix evolve_fixed(const SystemParams& params, const DensityMatrix& initial, double duration,
                           const ThermalEnvironment& env = {}, bool include_measurement = false,
                           double rtol = 1e-9, double atol = 1e-12);

struct SwitchPoint {
    double delta_star = 0.0;
    double jump_magnitude = 0.0;
};

/// Unwraps a phase series modulo 2 pi. NaN entries are carried through and
/// skipped when computing the offsets.
std::vector<double> unwrap_phase(std::span<const double> phi);

/// Delta at the steepest change of the unwrapped phase. The jump magnitude is
/// the phase change across +-`half_width` (in delta units) of that point,
/// defaulting to 5% of the swept range. Throws ErrorCode::no_switch if no jump
/// exceeds pi/2.
SwitchPoint extract_switch(const SweepRecord& record,
                           std::optional<std::pair<double, double>> window = std::nullopt,
                           std::optional<double> half_width = std::nullopt);

} // namespace kpo
