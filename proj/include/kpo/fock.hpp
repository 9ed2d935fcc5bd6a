#pragma once

// Truncated Fock-space operators and the Kerr parametric oscillator
// Hamiltonian in the frame rotating at the single-photon drive frequency.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <complex>
#include <numbers>

namespace kpo {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;

inline constexpr Complex kI{0.0, 1.0};

/// Fock basis |0>, ..., |dim-1>. Throws ErrorCode::invalid_space for dim < 2.
class FockSpace {
public:
    explicit FockSpace(int dim);

    int dim() const noexcept { return dim_; }
    bool operator==(const FockSpace&) const = default;

private:
    int dim_;
};

struct FockOperator {
    FockSpace space;
    Matrix matrix;
};

struct LadderOperators {
    FockOperator a;
    FockOperator a_dag;
    FockOperator n;
};

/// Physical parameters, all in units of the Kerr nonlinearity U.
///
/// G = g_abs * exp(i theta). kappa is the emission rate into the heterodyne
/// detector; it only enters through `with_measurement_loss()` and the
/// stochastic master equation.
struct SystemParams {
    double delta = 0.0;
    double u = 1.0;
    double f = 0.0;
    double g_abs = 0.0;
    double theta = -std::numbers::pi / 2;
    double gamma = 0.0;
    double eta = 0.0;
    double kappa = 0.0;

    Complex g() const { return std::polar(g_abs, theta); }

    /// Copy with gamma -> gamma + kappa (monitored, unconditional dynamics).
    SystemParams with_measurement_loss() const;

    /// Throws ErrorCode::invalid_config on negative rates/amplitudes,
    /// non-finite entries or u < 0.
    void validate() const;
};

LadderOperators make_ladder_operators(FockSpace space);

/// H = -delta n + u/2 n(n-1) - (f a + G*/2 a^2 + h.c.)
FockOperator build_hamiltonian(const SystemParams& params, FockSpace space);

/// Sparse building blocks shared by the Liouvillian and the integrators.
SparseMatrix sparse_annihilation(int dim);
SparseMatrix sparse_hamiltonian(const SystemParams& params, int dim);

struct CoherentState {
    Complex alpha;
    FockSpace space;
    Vector amplitudes;
    /// 1 - sum |c_k|^2 before renormalization.
    double truncation_error = 0.0;

    static constexpr double kConvergedTolerance = 1e-8;
    bool converged() const { return truncation_error < kConvergedTolerance; }
};

/// Unit-norm truncated coherent state. Never throws on poor truncation;
/// check `converged()`.
CoherentState coherent_state(Complex alpha, FockSpace space);

} // namespace kpo
