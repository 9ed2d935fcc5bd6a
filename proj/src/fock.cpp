#include "kpo/fock.hpp"

#include "kpo/error.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace kpo {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_space: return "invalid_space";
    case ErrorCode::invalid_config: return "invalid_config";
    case ErrorCode::ambiguous_steady_state: return "ambiguous_steady_state";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::trace_drift: return "trace_drift";
    case ErrorCode::no_switch: return "no_switch";
    case ErrorCode::fit_failed: return "fit_failed";
    case ErrorCode::unnormalized_grid: return "unnormalized_grid";
    case ErrorCode::calibration_failed: return "calibration_failed";
    case ErrorCode::extrapolation: return "extrapolation";
    case ErrorCode::protocol_degraded: return "protocol_degraded";
    case ErrorCode::purity_violation: return "purity_violation";
    case ErrorCode::conditioning: return "conditioning";
    }
    return "unknown";
}

bool is_config_error(ErrorCode code) {
    return code == ErrorCode::invalid_space || code == ErrorCode::invalid_config ||
           code == ErrorCode::extrapolation;
}

FockSpace::FockSpace(int dim) : dim_(dim) {
    if (dim < 2) {
        throw Error(ErrorCode::invalid_space,
                    "Fock space dimension must be >= 2, got " + std::to_string(dim));
    }
}

SystemParams SystemParams::with_measurement_loss() const {
    SystemParams out = *this;
    out.gamma = gamma + kappa;
    return out;
}

void SystemParams::validate() const {
    auto check = [](bool ok, const char* msg) {
        if (!ok) throw Error(ErrorCode::invalid_config, msg);
    };
    for (double v : {delta, u, f, g_abs, theta, gamma, eta, kappa}) {
        check(std::isfinite(v), "system parameters must be finite");
    }
    check(u >= 0.0, "Kerr nonlinearity u must be >= 0");
    check(f >= 0.0, "single-photon drive f must be >= 0");
    check(g_abs >= 0.0, "two-photon drive |G| must be >= 0");
    check(gamma >= 0.0, "gamma must be >= 0");
    check(eta >= 0.0, "eta must be >= 0");
    check(kappa >= 0.0, "kappa must be >= 0");
}

SparseMatrix sparse_annihilation(int dim) {
    SparseMatrix a(dim, dim);
    a.reserve(Eigen::VectorXi::Constant(dim, 1));
    for (int k = 1; k < dim; ++k) a.insert(k - 1, k) = std::sqrt(static_cast<double>(k));
    a.makeCompressed();
    return a;
}

SparseMatrix sparse_hamiltonian(const SystemParams& params, int dim) {
    const Complex g = params.g();
    std::vector<Eigen::Triplet<Complex>> entries;
    entries.reserve(5 * static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
        const double n = k;
        const double diag = -params.delta * n + 0.5 * params.u * n * (n - 1.0);
        if (diag != 0.0) entries.emplace_back(k, k, diag);
        if (k + 1 < dim && params.f != 0.0) {
            // -F a : <k|a|k+1> = sqrt(k+1); -F a^dag is the transpose
            const double s = std::sqrt(n + 1.0);
            entries.emplace_back(k, k + 1, -params.f * s);
            entries.emplace_back(k + 1, k, -params.f * s);
        }
        if (k + 2 < dim && params.g_abs != 0.0) {
            // -(G*/2) a^2 : <k|a^2|k+2> = sqrt((k+1)(k+2))
            const double s = std::sqrt((n + 1.0) * (n + 2.0));
            entries.emplace_back(k, k + 2, -0.5 * std::conj(g) * s);
            entries.emplace_back(k + 2, k, -0.5 * g * s);
        }
    }
    SparseMatrix h(dim, dim);
    h.setFromTriplets(entries.begin(), entries.end());
    return h;
}

LadderOperators make_ladder_operators(FockSpace space) {
    const int dim = space.dim();
    Matrix a = Matrix(sparse_annihilation(dim));
    Matrix a_dag = a.adjoint();
    Matrix n = a_dag * a;
    return {{space, std::move(a)}, {space, std::move(a_dag)}, {space, std::move(n)}};
}

FockOperator build_hamiltonian(const SystemParams& params, FockSpace space) {
    params.validate();
    return {space, Matrix(sparse_hamiltonian(params, space.dim()))};
}

CoherentState coherent_state(Complex alpha, FockSpace space) {
    const int dim = space.dim();
    Vector c(dim);
    c(0) = std::exp(-0.5 * std::norm(alpha));
    for (int k = 1; k < dim; ++k) c(k) = c(k - 1) * alpha / std::sqrt(static_cast<double>(k));
    const double norm2 = c.squaredNorm();
    CoherentState out{alpha, space, c / std::sqrt(norm2), std::max(0.0, 1.0 - norm2)};
    return out;
}

} // namespace kpo
