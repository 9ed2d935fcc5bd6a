#pragma once

// Phase-space diagnostics of the cavity state and extraction of the
// switching detuning from (noisy) phase records.

#include "kpo/dynamics.hpp"

#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace kpo {

struct HusimiGridSpec {
    double x_min = -4.0;
    double x_max = 4.0;
    double p_min = -4.0;
    double p_max = 4.0;
    int nx = 201;
    int np = 201;

    /// Square grid of half-width max(4, 2 sqrt(<n>) + 3).
    static HusimiGridSpec enclosing(const Matrix& rho, int points = 201);
};

/// Q(x, p) = <alpha|rho|alpha> / pi at alpha = x + i p, sampled at cell
/// centres (midpoint rule). values(ix, ip).
struct HusimiGrid {
    HusimiGridSpec spec;
    Eigen::MatrixXd values;

    double dx() const { return (spec.x_max - spec.x_min) / spec.nx; }
    double dp() const { return (spec.p_max - spec.p_min) / spec.np; }
    double x_at(int i) const { return spec.x_min + (i + 0.5) * dx(); }
    double p_at(int j) const { return spec.p_min + (j + 0.5) * dp(); }
    double mass() const { return values.sum() * dx() * dp(); }
};

/// Computes Q on the grid. `coverage` (if given) receives the integrated mass;
/// a value far below 1 means the grid does not enclose the state.
HusimiGrid husimi_q(const Matrix& rho, const HusimiGridSpec& spec, double* coverage = nullptr);
inline HusimiGrid husimi_q(const Matrix& rho) { return husimi_q(rho, HusimiGridSpec::enclosing(rho)); }

/// Integral of Q over x < 0 by midpoint quadrature. Throws
/// ErrorCode::unnormalized_grid if the grid mass is off by more than 1e-2.
double half_plane_probability(const HusimiGrid& q);

/// Same quantity evaluated exactly as tr(rho K) with the analytic
/// half-plane projector K_mn = (1/pi) int_{x<0} <alpha|m><n|alpha> d^2 alpha.
double half_plane_probability(const Matrix& rho);
Matrix half_plane_projector(int dim);

struct SwitchPdf {
    std::vector<double> delta_grid;  // midpoint detuning of each step, sweep order
    std::vector<double> p_left;      // P_{Phi-} at every sample
    std::vector<double> p_tr_raw;    // P^i - P^{i+1}
    std::vector<double> p_tr;        // clipped at 0
    std::vector<double> pdf;         // p_tr normalized to unit area over |delta|
    double clipped_mass = 0.0;       // sum of |negative raw increments| inside the switch window
    double total_probability = 0.0;  // sum of p_tr inside the switch window
    std::size_t window_begin = 0;    // first step counted (argmax of P_{Phi-})
    std::size_t window_end = 0;      // one past the last step counted (subsequent argmin)
    bool model_violation = false;    // clipped_mass > 0.1

    double mean() const;
    double mode() const;
};

struct TransitionPdfOptions {
    int samples = 500;
    /// Model the monitored cavity (gamma -> gamma + kappa).
    bool include_measurement = true;
    /// Restrict the analysis to this detuning interval (default: from the
    /// maximum of P_{Phi-} to its subsequent minimum).
    std::optional<std::pair<double, double>> window;
};

SwitchPdf transition_pdf(const SystemParams& params, const SweepSchedule& schedule, FockSpace space,
                         const ThermalEnvironment& env = {}, const TransitionPdfOptions& options = {});

/// Builds the transition PDF from a precomputed P_{Phi-} series.
SwitchPdf transition_pdf_from_probabilities(std::span<const double> deltas, std::span<const double> p_left,
                                            std::optional<std::pair<double, double>> window = std::nullopt);

struct ArctanFit {
    double delta_star = 0.0;
    double slope_a = 0.0;
    double offset_c = 0.0;
    double fit_rms = 0.0;
    /// Rotation subtracted from the phase before fitting (branch choice).
    double phase_rotation = 0.0;
    int iterations = 0;
};

struct ArctanFitOptions {
    int max_iterations = 200;
    /// Minimum model phase change across the window for a genuine switch.
    double min_phase_change = std::numbers::pi / 2;
    /// Fraction of the window used at each end to estimate the plateaus.
    double plateau_fraction = 0.2;
    /// Skip the branch rotation (data already on a single branch).
    bool rotate_branch = true;
};

/// Least-squares fit of phi(delta) = atan(A (delta - delta*)) + C over the
/// window. Throws ErrorCode::fit_failed (non-convergence / delta* outside the
/// window) or ErrorCode::no_switch (|A| too small).
ArctanFit fit_arctan(std::span<const double> deltas, std::span<const double> phases,
                     std::optional<std::pair<double, double>> window = std::nullopt,
                     const ArctanFitOptions& options = {});

ArctanFit fit_arctan(const SweepRecord& record, std::optional<std::pair<double, double>> window = std::nullopt,
                     const ArctanFitOptions& options = {});

} // namespace kpo
