#pragma once

// The sensing protocol: calibrate the quasi-linear map delta*(F) with
// deterministic sweeps, invert it for single-shot heterodyne estimates of F,
// and summarize the resulting distribution.

#include "kpo/phase_analysis.hpp"
#include "kpo/trajectories.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kpo {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y = slope x + intercept.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct CalibrationCurve {
    std::vector<double> f_grid;
    std::vector<double> delta_star_grid;
    /// Per node: inside the validity window (F above the loss-rate scale).
    std::vector<char> in_window;
    LinearFit linear_fit;
    std::pair<double, double> validity_window{0.0, 0.0};
};

struct CalibrationOptions {
    /// Detuning interval handed to the arctan fit.
    std::pair<double, double> fit_window{-10.0, 10.0};
    int threads = 1;
    int samples = 500;
};

/// Delta*(F) from deterministic down-sweeps of the monitored cavity
/// (gamma -> gamma + kappa). Nodes with F <= max(gamma, eta) fall outside
/// the validity window. Throws ErrorCode::calibration_failed if delta* is not
/// strictly monotone over the window or a node shows no switch.
CalibrationCurve calibrate(const SystemParams& params, std::span<const double> f_grid, const SweepSchedule& schedule,
                           FockSpace space, const ThermalEnvironment& env = {}, const CalibrationOptions& options = {});

/// Piecewise-linear inversion of the calibration table over its validity
/// window. Throws ErrorCode::extrapolation outside the calibrated range.
double estimate_f(double delta_star, const CalibrationCurve& calibration);

struct ProtocolConfig {
    /// Physical parameters; `f` is replaced by the true drive of each run.
    SystemParams params;
    SweepSchedule schedule{15.0, -10.0, 50.0};
    int fock_dim = 30;
    TrajectoryOptions trajectory = default_trajectory();
    std::pair<double, double> fit_window{-10.0, 10.0};
    std::uint64_t seed = 0;
    int threads = 1;
    /// Replace each trajectory by the deterministic gamma + kappa record.
    bool noiseless = false;
    int histogram_bins = 12;
    double max_failure_fraction = 0.2;

    /// Trajectory defaults with the protocol's smoothing window of 500 steps
    /// (0.5/U at dt = 1e-3).
    static TrajectoryOptions default_trajectory() {
        TrajectoryOptions o;
        o.smoothing_window = 500;
        return o;
    }
};

struct ShotResult {
    int index = 0;
    bool ok = false;
    // NaN until the stage that produces them succeeds; a shot that fails
    // only at inversion keeps its fitted delta_star.
    double delta_star = std::numeric_limits<double>::quiet_NaN();
    double f_meas = std::numeric_limits<double>::quiet_NaN();
    double fit_rms = std::numeric_limits<double>::quiet_NaN();
    std::string failure;  // error code name when !ok
    std::string message;
};

struct Histogram {
    std::vector<double> edges;
    std::vector<int> counts;
    std::vector<double> expected;  // Gaussian expectation from sample mean/std
    double chi2 = 0.0;
    int dof = 0;
    double chi2_per_dof() const { return dof > 0 ? chi2 / dof : 0.0; }
};

/// Equal-width histogram over mean +- 3 std with the Gaussian chi^2 diagnostic.
Histogram gaussian_histogram(std::span<const double> samples, int bins);

struct SampleSummary {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
    double median = 0.0;
};

SampleSummary summarize(std::span<const double> samples);

struct EstimateDistribution {
    double true_f = 0.0;
    std::vector<ShotResult> shots;
    std::vector<double> samples;      // F_meas of successful shots, shot order
    std::vector<double> delta_stars;  // matching delta*
    SampleSummary f_meas;
    SampleSummary delta_star;
    Histogram histogram;
    std::map<std::string, int> failures;
};

/// Runs `n_shots` single-shot protocols (trajectory -> arctan fit ->
/// inversion). Shot i uses noise stream (seed, i), so the result does not
/// depend on the thread count. Throws ErrorCode::protocol_degraded when more
/// than max_failure_fraction of the shots fail.
EstimateDistribution run_protocol(double true_f, int n_shots, const ProtocolConfig& config,
                                  const CalibrationCurve& calibration);

/// Only the delta* stage of the protocol (no inversion).
std::vector<ShotResult> measure_switches(const SystemParams& params, int n_shots, const ProtocolConfig& config);

struct KappaGammaRow {
    double ratio = 0.0;
    double kappa = 0.0;
    double gamma = 0.0;
    SampleSummary delta_star;
    int successes = 0;
    int failures = 0;
};

/// Ensemble std of delta* for each kappa/gamma at fixed kappa + gamma. A ratio
/// of +inf means gamma = 0.
std::vector<KappaGammaRow> kappa_gamma_scan(double kappa_plus_gamma, std::span<const double> ratios, int n_shots,
                                            const ProtocolConfig& config);

struct SweepTimeFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double rms = 0.0;
};

/// Least squares y = b / x^a + c (exponent by bounded 1-D search, b and c
/// linear for each a).
SweepTimeFit fit_power_law(std::span<const double> x, std::span<const double> y);

} // namespace kpo
