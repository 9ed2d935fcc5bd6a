#pragma once

// Lindblad generator of the Kerr parametric oscillator:
//
//   d rho/dt = -i[H, rho] + g(1+n_th) D[a] rho + g n_th D[a^dag] rho + eta D[a^2] rho
//
// with D[O] rho = O rho O^dag - {O^dag O, rho}/2. Superoperators use
// column-stacking vectorization, vec(A X B) = (B^T kron A) vec(X).

#include "kpo/banded.hpp"
#include "kpo/fock.hpp"

#include <utility>
#include <vector>

namespace kpo {

struct ThermalEnvironment {
    double n_th = 0.0;
    /// Bare cavity angular frequency (rad/s); only used to derive n_th.
    double omega_c = 0.0;
    /// Kelvin.
    double temperature = 0.0;

    static ThermalEnvironment zero() { return {}; }
    static ThermalEnvironment from_occupation(double n_th);
    static ThermalEnvironment from_temperature(double omega_c, double temperature);
};

/// Bose-Einstein occupation 1/(exp(hbar w / k_B T) - 1); zero at T = 0.
double bose_occupation(double omega_c, double temperature);

struct DensityMatrix {
    FockSpace space;
    Matrix matrix;

    static DensityMatrix pure(FockSpace space, const Vector& psi);
    static DensityMatrix vacuum(FockSpace space);
};

struct StateDiagnostics {
    double hermiticity = 0.0;   // max |rho - rho^dag|
    double trace_error = 0.0;   // |tr rho - 1|
    double min_eigenvalue = 0.0;
};

StateDiagnostics diagnose_state(const Matrix& rho);

struct StateTolerances {
    double hermiticity = 1e-9;
    double trace = 1e-9;
    double negativity = 1e-8;
};

/// Throws ErrorCode::numerical_failure naming the violated invariant.
void require_physical(const Matrix& rho, const StateTolerances& tol = {}, const char* context = "state");

struct Observables {
    double n_mean = 0.0;
    double x = 0.0;  // <a + a^dag>
    double p = 0.0;  // <-i(a - a^dag)>
    double phi = 0.0;
    bool phase_defined = false;
};

/// Phase is flagged undefined (phi = NaN) when |x| + |p| < 1e-6.
Observables measure(const Matrix& rho);

/// Maps atan2 output into (-pi, pi].
double principal_phase(double phi);

struct SuperOperator {
    FockSpace space;
    SparseMatrix matrix;

    Matrix dense() const { return Matrix(matrix); }
    Matrix apply(const Matrix& rho) const;
};

struct JumpTerm {
    double rate;
    SparseMatrix op;
    SparseMatrix op_dag;
};

/// Collapse operators with their rates for the given parameters.
/// If include_measurement is set, gamma is replaced by gamma + kappa.
std::vector<JumpTerm> jump_terms(const SystemParams& params, int dim,
                                 const ThermalEnvironment& env, bool include_measurement);

SuperOperator build_liouvillian(const SystemParams& params, FockSpace space,
                                const ThermalEnvironment& env = {},
                                bool include_measurement = false);

/// Matrix-form right-hand side of the master equation with the detuning
/// split off: L(delta) = L0 + delta * L_delta. Used by the time integrators.
class MasterEquation {
public:
    MasterEquation(const SystemParams& params, FockSpace space,
                   const ThermalEnvironment& env = {}, bool include_measurement = false);

    FockSpace space() const { return space_; }

    /// out = L(delta) rho; params.delta is ignored.
    void derivative(const Matrix& rho, double delta, Matrix& out) const;

    /// Non-Hermitian H_eff(delta) = H - (i/2) sum r L^dag L.
    SparseMatrix effective_hamiltonian(double delta) const;
    const std::vector<JumpTerm>& jumps() const { return jumps_; }
    const Eigen::VectorXd& number_diagonal() const { return number_; }

private:
    FockSpace space_;
    SparseMatrix heff0_;
    BandedOperator heff0_banded_;
    std::vector<Band> jump_bands_;
    Eigen::VectorXd number_;
    std::vector<JumpTerm> jumps_;
};

struct SteadyStateDiagnostics {
    double residual = 0.0;            // ||L vec(rho)||
    double hermitization_shift = 0.0; // max |rho - (rho + rho^dag)/2| before the fix
};

/// Null vector of L via a sparse LU solve with the trace constraint replacing
/// one equation. Throws ErrorCode::ambiguous_steady_state when the zero
/// eigenvalue is not simple.
DensityMatrix steady_state(const SuperOperator& liouvillian,
                           SteadyStateDiagnostics* diagnostics = nullptr);

struct LiouvillianSpectrum {
    std::vector<Complex> eigenvalues;  // ascending |Re lambda|
    double gap = 0.0;                  // |Re lambda_1|
};

/// Dense diagonalization; `count` <= dim^2 eigenvalues kept (0 = all).
LiouvillianSpectrum spectrum(const SuperOperator& liouvillian, int count = 0);

} // namespace kpo
