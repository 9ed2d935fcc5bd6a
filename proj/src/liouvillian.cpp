#include "kpo/liouvillian.hpp"

#include "kpo/banded.hpp"
#include "kpo/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kpo {

namespace {

constexpr double kHbar = 1.054571817e-34;
constexpr double kBoltzmann = 1.380649e-23;

using Triplet = Eigen::Triplet<Complex>;

SparseMatrix sparse_identity(int dim) {
    SparseMatrix id(dim, dim);
    id.setIdentity();
    return id;
}

// Appends scale * (A kron B) to `out`.
void kron_into(const SparseMatrix& a, const SparseMatrix& b, Complex scale, std::vector<Triplet>& out) {
    const int rb = static_cast<int>(b.rows());
    const int cb = static_cast<int>(b.cols());
    for (int ka = 0; ka < a.outerSize(); ++ka) {
        for (SparseMatrix::InnerIterator ia(a, ka); ia; ++ia) {
            for (int kb = 0; kb < b.outerSize(); ++kb) {
                for (SparseMatrix::InnerIterator ib(b, kb); ib; ++ib) {
                    out.emplace_back(static_cast<int>(ia.row()) * rb + static_cast<int>(ib.row()),
                                     static_cast<int>(ia.col()) * cb + static_cast<int>(ib.col()),
                                     scale * ia.value() * ib.value());
                }
            }
        }
    }
}

} // namespace

double bose_occupation(double omega_c, double temperature) {
    if (temperature <= 0.0) return 0.0;
    const double x = kHbar * omega_c / (kBoltzmann * temperature);
    return 1.0 / std::expm1(x);
}

ThermalEnvironment ThermalEnvironment::from_occupation(double n_th) {
    if (!(n_th >= 0.0)) throw Error(ErrorCode::invalid_config, "thermal occupation must be >= 0");
    ThermalEnvironment env;
    env.n_th = n_th;
    return env;
}

ThermalEnvironment ThermalEnvironment::from_temperature(double omega_c, double temperature) {
    if (!(temperature >= 0.0) || !(omega_c > 0.0)) {
        throw Error(ErrorCode::invalid_config, "temperature must be >= 0 and omega_c > 0");
    }
    return {bose_occupation(omega_c, temperature), omega_c, temperature};
}

DensityMatrix DensityMatrix::pure(FockSpace space, const Vector& psi) {
    const Vector v = psi / psi.norm();
    return {space, v * v.adjoint()};
}

DensityMatrix DensityMatrix::vacuum(FockSpace space) {
    Matrix rho = Matrix::Zero(space.dim(), space.dim());
    rho(0, 0) = 1.0;
    return {space, std::move(rho)};
}

StateDiagnostics diagnose_state(const Matrix& rho) {
    StateDiagnostics d;
    d.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    d.trace_error = std::abs(rho.trace() - 1.0);
    const Matrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    return d;
}

void require_physical(const Matrix& rho, const StateTolerances& tol, const char* context) {
    const StateDiagnostics d = diagnose_state(rho);
    std::ostringstream msg;
    if (!(d.hermiticity < tol.hermiticity)) {
        msg << context << ": density matrix not Hermitian (max deviation " << d.hermiticity << ")";
    } else if (!(d.trace_error < tol.trace)) {
        msg << context << ": trace deviates from 1 by " << d.trace_error;
    } else if (!(d.min_eigenvalue > -tol.negativity)) {
        msg << context << ": negative eigenvalue " << d.min_eigenvalue;
    } else {
        return;
    }
    throw Error(ErrorCode::numerical_failure, msg.str());
}

double principal_phase(double phi) {
    double out = std::remainder(phi, 2.0 * std::numbers::pi);
    if (out <= -std::numbers::pi) out += 2.0 * std::numbers::pi;
    return out;
}

Observables measure(const Matrix& rho) {
    const int dim = static_cast<int>(rho.rows());
    Complex a_mean = 0.0;
    double n_mean = 0.0;
    for (int k = 1; k < dim; ++k) {
        a_mean += std::sqrt(static_cast<double>(k)) * rho(k, k - 1);
        n_mean += k * rho(k, k).real();
    }
    Observables o;
    o.n_mean = n_mean;
    o.x = 2.0 * a_mean.real();
    o.p = 2.0 * a_mean.imag();
    o.phase_defined = std::abs(o.x) + std::abs(o.p) >= 1e-6;
    o.phi = o.phase_defined ? principal_phase(std::atan2(o.p, o.x))
                            : std::numeric_limits<double>::quiet_NaN();
    return o;
}

Matrix SuperOperator::apply(const Matrix& rho) const {
    const int dim = space.dim();
    Eigen::Map<const Vector> v(rho.data(), static_cast<Eigen::Index>(dim) * dim);
    Vector out = matrix * v;
    return Eigen::Map<Matrix>(out.data(), dim, dim);
}

std::vector<JumpTerm> jump_terms(const SystemParams& params, int dim,
                                 const ThermalEnvironment& env, bool include_measurement) {
    const double gamma = include_measurement ? params.gamma + params.kappa : params.gamma;
    const SparseMatrix a = sparse_annihilation(dim);
    const SparseMatrix a_dag = a.adjoint();
    std::vector<JumpTerm> out;
    if (gamma * (1.0 + env.n_th) > 0.0) out.push_back({gamma * (1.0 + env.n_th), a, a_dag});
    if (gamma * env.n_th > 0.0) out.push_back({gamma * env.n_th, a_dag, a});
    if (params.eta > 0.0) {
        SparseMatrix a2 = a * a;
        SparseMatrix a2_dag = a2.adjoint();
        out.push_back({params.eta, std::move(a2), std::move(a2_dag)});
    }
    return out;
}

SuperOperator build_liouvillian(const SystemParams& params, FockSpace space,
                                const ThermalEnvironment& env, bool include_measurement) {
    params.validate();
    const int dim = space.dim();
    const SparseMatrix id = sparse_identity(dim);
    const SparseMatrix h = sparse_hamiltonian(params, dim);
    const SparseMatrix h_t = h.transpose();

    std::vector<Triplet> entries;
    kron_into(id, h, -kI, entries);
    kron_into(h_t, id, kI, entries);
    for (const JumpTerm& j : jump_terms(params, dim, env, include_measurement)) {
        const SparseMatrix conj_op = j.op.conjugate();
        const SparseMatrix lhs = j.op_dag * j.op;
        const SparseMatrix lhs_t = lhs.transpose();
        kron_into(conj_op, j.op, j.rate, entries);
        kron_into(id, lhs, -0.5 * j.rate, entries);
        kron_into(lhs_t, id, -0.5 * j.rate, entries);
    }
    const int n2 = dim * dim;
    SparseMatrix l(n2, n2);
    l.setFromTriplets(entries.begin(), entries.end());
    l.prune(Complex(0.0));
    return {space, std::move(l)};
}

MasterEquation::MasterEquation(const SystemParams& params, FockSpace space,
                               const ThermalEnvironment& env, bool include_measurement)
    : space_(space) {
    params.validate();
    const int dim = space.dim();
    SystemParams p0 = params;
    p0.delta = 0.0;
    jumps_ = jump_terms(params, dim, env, include_measurement);
    heff0_ = sparse_hamiltonian(p0, dim);
    for (const JumpTerm& j : jumps_) {
        SparseMatrix ldl = j.op_dag * j.op;
        heff0_ -= (0.5 * j.rate * kI) * ldl;
    }
    heff0_.makeCompressed();
    heff0_banded_ = BandedOperator::from_sparse(heff0_);
    for (const JumpTerm& j : jumps_) jump_bands_.push_back(BandedOperator::from_sparse(j.op).bands().front());
    number_.resize(dim);
    for (int k = 0; k < dim; ++k) number_(k) = k;
}

SparseMatrix MasterEquation::effective_hamiltonian(double delta) const {
    SparseMatrix h = heff0_;
    for (int k = 1; k < space_.dim(); ++k) h.coeffRef(k, k) -= delta * number_(k);
    return h;
}

void MasterEquation::derivative(const Matrix& rho, double delta, Matrix& out) const {
    // -i(H_eff rho - rho H_eff^dag) + i delta [n, rho] + sum r L rho L^dag
    const int dim = space_.dim();
    out.resize(dim, dim);
    for (int j = 0; j < dim; ++j) {
        for (int i = 0; i < dim; ++i) out(i, j) = Complex(0.0, delta * (i - j)) * rho(i, j);
    }
    heff0_banded_.add_left(rho, -kI, out);
    heff0_banded_.add_right_adjoint(rho, kI, out);
    for (std::size_t k = 0; k < jumps_.size(); ++k) {
        add_sandwich(jump_bands_[k], dim, rho, jumps_[k].rate, out);
    }
}

namespace {

std::string describe_leading(const SuperOperator& l) {
    std::ostringstream msg;
    try {
        const LiouvillianSpectrum s = spectrum(l, 2);
        msg << "candidate eigenvalues " << s.eigenvalues.at(0) << " and " << s.eigenvalues.at(1);
    } catch (const Error& e) {
        msg << "spectrum unavailable: " << e.what();
    }
    return msg.str();
}

} // namespace

DensityMatrix steady_state(const SuperOperator& liouvillian, SteadyStateDiagnostics* diagnostics) {
    const int dim = liouvillian.space.dim();
    const int n2 = dim * dim;

    // Replace the first equation (d rho_00 / dt) by tr(rho) = 1.
    std::vector<Triplet> entries;
    entries.reserve(static_cast<std::size_t>(liouvillian.matrix.nonZeros()) + dim);
    for (int col = 0; col < liouvillian.matrix.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(liouvillian.matrix, col); it; ++it) {
            if (it.row() != 0) entries.emplace_back(static_cast<int>(it.row()), col, it.value());
        }
    }
    for (int k = 0; k < dim; ++k) entries.emplace_back(0, k * (dim + 1), 1.0);
    SparseMatrix augmented(n2, n2);
    augmented.setFromTriplets(entries.begin(), entries.end());
    augmented.makeCompressed();

    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> solver;
    solver.analyzePattern(augmented);
    solver.factorize(augmented);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::ambiguous_steady_state,
                    "steady state not unique (singular constrained Liouvillian); " +
                        describe_leading(liouvillian));
    }
    Vector rhs = Vector::Zero(n2);
    rhs(0) = 1.0;
    Vector x = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !x.allFinite()) {
        throw Error(ErrorCode::ambiguous_steady_state,
                    "steady-state solve failed; " + describe_leading(liouvillian));
    }

    Matrix rho = Eigen::Map<Matrix>(x.data(), dim, dim);
    const Matrix herm = 0.5 * (rho + rho.adjoint());
    const double shift = (rho - herm).cwiseAbs().maxCoeff();
    rho = herm / herm.trace().real();

    Eigen::Map<const Vector> v(rho.data(), n2);
    const double residual = (liouvillian.matrix * v).norm();
    if (diagnostics) *diagnostics = {residual, shift};

    double scale = 1.0;
    for (int k = 0; k < liouvillian.matrix.nonZeros(); ++k) {
        scale = std::max(scale, std::abs(liouvillian.matrix.valuePtr()[k]));
    }
    const StateDiagnostics d = diagnose_state(rho);
    if (!(residual < 1e-8 * scale) || !(d.min_eigenvalue > -1e-8)) {
        std::ostringstream msg;
        msg << "steady state rejected (residual " << residual << ", min eigenvalue " << d.min_eigenvalue
            << "); " << describe_leading(liouvillian);
        throw Error(ErrorCode::ambiguous_steady_state, msg.str());
    }
    return {liouvillian.space, std::move(rho)};
}

LiouvillianSpectrum spectrum(const SuperOperator& liouvillian, int count) {
    const int n2 = static_cast<int>(liouvillian.matrix.rows());
    if (count < 0 || count > n2) {
        throw Error(ErrorCode::invalid_config, "spectrum: count must lie in [0, dim^2]");
    }
    Matrix dense = liouvillian.dense();
    std::vector<Complex> ev(static_cast<std::size_t>(n2));
    const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n2,
                                          reinterpret_cast<lapack_complex_double*>(dense.data()), n2,
                                          reinterpret_cast<lapack_complex_double*>(ev.data()),
                                          nullptr, 1, nullptr, 1);
    if (info != 0) {
        throw Error(ErrorCode::numerical_failure,
                    "Liouvillian eigensolver (zgeev) failed with info=" + std::to_string(info) +
                        " for size " + std::to_string(n2));
    }
    std::stable_sort(ev.begin(), ev.end(), [](Complex a, Complex b) {
        return std::abs(a.real()) < std::abs(b.real());
    });
    LiouvillianSpectrum out;
    out.gap = ev.size() > 1 ? std::abs(ev[1].real()) : 0.0;
    const double scale = std::max(1.0, std::abs(ev.back()));
    for (const Complex& l : ev) {
        if (l.real() > 1e-9 * scale) {
            std::ostringstream msg;
            msg << "Liouvillian eigenvalue with positive real part " << l;
            throw Error(ErrorCode::numerical_failure, msg.str());
        }
    }
    if (count > 0) ev.resize(static_cast<std::size_t>(count));
    out.eigenvalues = std::move(ev);
    return out;
}

} // namespace kpo
