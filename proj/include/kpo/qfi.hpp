#pragma once

// Quantum Fisher information of steady states with respect to the
// single-photon drive amplitude F.

#include "kpo/liouvillian.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kpo {

struct QfiResult {
    double delta = 0.0;
    double temperature = 0.0;  // K
    double n_th = 0.0;
    double qfi = 0.0;
    /// Spectral (eigen-derivative) form evaluated from the same steady states.
    double qfi_alternate = 0.0;
    double spectral_floor = 1e-10;
    /// Step actually used (the default is refined near eigenvalue crossings).
    double finite_difference_step = 0.0;
    /// |I(dF) - I(dF/2)| / I(dF).
    double richardson_change = 0.0;
    /// Richardson change above 1e-3.
    bool flagged = false;
    /// Raw value was slightly negative and was clamped to 0.
    bool clamped = false;
    /// Non-empty when the point failed (scans continue past failures).
    std::string error;
};

struct QfiOptions {
    /// Default 1e-3 max(F, 1).
    std::optional<double> step;
    double spectral_floor = 1e-10;
    /// Relative disagreement between the two formulas that raises
    /// ErrorCode::conditioning.
    double formula_tolerance = 1e-6;
    bool richardson = true;
};

/// 2 sum_{ij, l_i + l_j > floor} |<i| drho |j>|^2 / (l_i + l_j) in the eigenbasis of rho.
double qfi_from_derivative(const Matrix& rho, const Matrix& drho, double spectral_floor = 1e-10);

/// sum_i (dp_i)^2 / p_i + 2 sum_{i != j} (p_i - p_j)^2 / (p_i + p_j) |<psi_i|d psi_j>|^2
/// from eigenvalues p, their derivatives, eigenvectors (columns) and their
/// derivatives. Pairs with p_i + p_j <= floor are skipped.
double qfi_spectral(const Eigen::VectorXd& p, const Eigen::VectorXd& dp, const Matrix& psi, const Matrix& dpsi,
                    double spectral_floor = 1e-10);

/// Steady-state QFI by central differences of steady states at F +- dF,
/// cross-checked against the spectral form.
QfiResult qfi_mixed(const SystemParams& params, const ThermalEnvironment& env, FockSpace space,
                    const QfiOptions& options = {});

/// 4 (<d psi|d psi> - |<psi|d psi>|^2) with d psi from psi(F +- dF), each
/// phase-aligned to psi(F).
double qfi_pure(const std::function<Vector(double)>& psi, double f, double df);

/// Pure-state QFI of the steady state (its dominant eigenvector). Throws
/// ErrorCode::purity_violation if tr rho^2 < 1 - 1e-6.
double qfi_pure(const SystemParams& params, FockSpace space, std::optional<double> step = std::nullopt);

/// Linear (U = G = eta = 0) oscillator: 4 / (gamma^2/4 + delta^2).
double linear_oscillator_qfi(double gamma, double delta);

/// QFI over temperatures (K) x detunings, row-major in temperature. n_th is
/// derived from omega_c (rad/s). Per-point failures are recorded in
/// QfiResult::error.
std::vector<QfiResult> temperature_scan(const SystemParams& params, FockSpace space,
                                        std::span<const double> temperatures, std::span<const double> delta_grid,
                                        double omega_c, int threads = 1, const QfiOptions& options = {});

} // namespace kpo
