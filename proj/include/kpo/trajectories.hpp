#pragma once

// Heterodyne-monitored stochastic master equation (Ito form):
//
//   d rho = L_{gamma+kappa} rho dt + sqrt(kappa/2) (dW_x H[a] + dW_p H[-i a]) rho
//   H[c] rho = c rho + rho c^dag - tr(c rho + rho c^dag) rho
//
// with measured currents x_meas = x + sqrt(2/kappa) dW_x/dt (same for p).

#include "kpo/dynamics.hpp"

#include <cstdint>
#include <limits>
#include <random>

namespace kpo {

/// Independent Gaussian increment stream for one trajectory. The engine is
/// seeded from (seed, trajectory_index) through std::seed_seq, so streams are
/// reproducible and need no coordination between workers.
class NoiseStream {
public:
    NoiseStream(std::uint64_t seed, std::uint64_t trajectory_index);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t trajectory_index() const { return index_; }

    /// Standard normal sample.
    double normal() { return dist_(engine_); }
    /// Wiener increment ~ N(0, dt).
    double increment(double dt) { return std::sqrt(dt) * normal(); }

private:
    std::uint64_t seed_;
    std::uint64_t index_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

struct TrajectoryOptions {
    double dt = 1e-3;
    int samples = 500;
    /// Boxcar length (in integration steps) for the smoothed currents.
    int smoothing_window = 50;
    /// Per-step trace drift tolerated before renormalization is considered a failure.
    double max_trace_drift = 1e-6;
    /// Most negative eigenvalue tolerated at output samples.
    double negativity_tolerance = 1e-3;
    bool check_positivity = true;
};

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<double> deltas;
    // Single-step measured currents and phase.
    std::vector<double> x_meas;
    std::vector<double> p_meas;
    std::vector<double> phi_meas;
    // Boxcar-averaged currents and the phase built from them.
    std::vector<double> x_smooth;
    std::vector<double> p_smooth;
    std::vector<double> phi_smooth;
    // Conditional-state observables.
    std::vector<double> x;
    std::vector<double> p;
    std::vector<double> n_mean;

    double max_trace_drift = 0.0;
    // Smallest eigenvalue seen; +inf when positivity is not checked.
    double min_eigenvalue = std::numeric_limits<double>::infinity();

    std::size_t size() const { return times.size(); }

    /// View as a sweep record carrying the smoothed measured phase, for the
    /// switch-extraction and fitting routines.
    SweepRecord measured_phase_record() const;
};

/// Throws ErrorCode::invalid_config for kappa <= 0 or a bad step/sampling
/// setup, ErrorCode::trace_drift / numerical_failure on integration trouble.
/// Without `initial`, starts from the unconditional steady state (gamma+kappa)
/// at delta_start.
TrajectoryRecord integrate_heterodyne(const SystemParams& params, const SweepSchedule& schedule,
                                      NoiseStream& noise, FockSpace space,
                                      const TrajectoryOptions& options = {},
                                      const std::optional<DensityMatrix>& initial = std::nullopt,
                                      const SampleObserver& observer = {});

struct WienerStatistics {
    double final_time = 0.0;
    double mean = 0.0;      // sample mean of W(t) over the checked paths
    double variance = 0.0;  // sample variance of W(t)
    double increment_mean = 0.0;
    double increment_variance_ratio = 0.0;  // var(dW)/dt
    int paths = 0;
    int steps = 0;
};

/// Builds `paths` Wiener paths of `steps` increments from consecutive
/// streams (seed, index + k) and reports W(steps*dt) statistics.
WienerStatistics wiener_selfcheck(std::uint64_t seed, std::uint64_t first_index, int steps, double dt,
                                  int paths = 1000);

/// Pearson correlation of the first `steps` increments of two streams.
double increment_cross_correlation(NoiseStream a, NoiseStream b, int steps);

/// Runs `count` independent tasks on up to `threads` workers; results are
/// stored by index so the output is independent of scheduling.
template <class Result, class Fn>
std::vector<Result> run_ensemble(int count, int threads, Fn&& fn);

} // namespace kpo

#include "kpo/detail/ensemble.hpp"
