#include "kpo/qfi.hpp"

#include "kpo/detail/ensemble.hpp"
#include "kpo/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kpo {

namespace {

using Eigen::SelfAdjointEigenSolver;

SelfAdjointEigenSolver<Matrix> eigen(const Matrix& rho) {
    SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()));
    if (es.info() != Eigen::Success) throw Error(ErrorCode::numerical_failure, "density-matrix eigendecomposition failed");
    return es;
}

Matrix steady(const SystemParams& params, double f, FockSpace space, const ThermalEnvironment& env) {
    SystemParams p = params;
    p.f = f;
    return steady_state(build_liouvillian(p, space, env)).matrix;
}

// Groups of (ascending) eigenvalues closer than `tol` to their neighbour.
std::vector<std::pair<int, int>> clusters(const Eigen::VectorXd& p, double tol) {
    std::vector<std::pair<int, int>> out;
    int start = 0;
    for (int i = 1; i <= p.size(); ++i) {
        if (i == p.size() || p(i) - p(i - 1) > tol) {
            out.emplace_back(start, i);
            start = i;
        }
    }
    return out;
}

// Rotates each cluster of `v` onto the matching columns of `v0` (orthogonal
// Procrustes; a phase alignment for single eigenvectors).
Matrix align(const Matrix& v, const Matrix& v0, const std::vector<std::pair<int, int>>& groups) {
    Matrix out = v;
    for (const auto& [b, e] : groups) {
        const int k = e - b;
        const Matrix m = v.middleCols(b, k).adjoint() * v0.middleCols(b, k);
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        out.middleCols(b, k) = v.middleCols(b, k) * (svd.matrixU() * svd.matrixV().adjoint());
    }
    return out;
}

} // namespace

double qfi_from_derivative(const Matrix& rho, const Matrix& drho, double spectral_floor) {
    const auto es = eigen(rho);
    const Eigen::VectorXd& l = es.eigenvalues();
    const Matrix d = es.eigenvectors().adjoint() * drho * es.eigenvectors();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            const double s = l(i) + l(j);
            if (s > spectral_floor) sum += std::norm(d(i, j)) / s;
        }
    }
    return 2.0 * sum;
}

double qfi_spectral(const Eigen::VectorXd& p, const Eigen::VectorXd& dp, const Matrix& psi, const Matrix& dpsi,
                    double spectral_floor) {
    const Matrix overlap = psi.adjoint() * dpsi;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (2.0 * p(i) > spectral_floor) sum += dp(i) * dp(i) / p(i);
        for (Eigen::Index j = 0; j < p.size(); ++j) {
            if (i == j || !(p(i) + p(j) > spectral_floor)) continue;
            const double diff = p(i) - p(j);
            sum += 2.0 * diff * diff / (p(i) + p(j)) * std::norm(overlap(i, j));
        }
    }
    return sum;
}

QfiResult qfi_mixed(const SystemParams& params, const ThermalEnvironment& env, FockSpace space,
                    const QfiOptions& options) {
    params.validate();
    QfiResult r;
    r.delta = params.delta;
    r.temperature = env.temperature;
    r.n_th = env.n_th;
    r.spectral_floor = options.spectral_floor;
    const double h = options.step.value_or(1e-3 * std::max(params.f, 1.0));
    if (!(h > 0.0)) throw Error(ErrorCode::invalid_config, "finite-difference step must be positive");

    // Both formulas at dF and dF/2; their Richardson extrapolations remove the
    // O(dF^2) difference-quotient error, so the comparison tests the formulas
    // rather than the step.
    const Matrix rho0 = steady(params, params.f, space, env);
    const auto e0 = eigen(rho0);
    const auto groups = clusters(e0.eigenvalues(), 1e-8);
    auto both = [&](double step) {
        const Matrix plus = steady(params, params.f + step, space, env);
        const Matrix minus = steady(params, params.f - step, space, env);
        const double eq6 = qfi_from_derivative(rho0, (plus - minus) / (2.0 * step), options.spectral_floor);
        const auto ep = eigen(plus);
        const auto em = eigen(minus);
        const Matrix vp = align(ep.eigenvectors(), e0.eigenvectors(), groups);
        const Matrix vm = align(em.eigenvectors(), e0.eigenvectors(), groups);
        const Eigen::VectorXd dp = (ep.eigenvalues() - em.eigenvalues()) / (2.0 * step);
        const Matrix dv = (vp - vm) / (2.0 * step);
        return std::make_pair(
            eq6, qfi_spectral(e0.eigenvalues(), dp, e0.eigenvectors(), dv, options.spectral_floor));
    };
    // Near crossings of rho's eigenvalues the difference quotients of the
    // eigenvectors converge slowly; the step is refined (at most twice)
    // before the disagreement is reported.
    double raw = 0.0;
    for (int attempt = 0;; ++attempt) {
        const double step = h / std::pow(8.0, attempt);
        const auto [raw_h, alt_h] = both(step);
        raw = raw_h;
        r.qfi_alternate = alt_h;
        r.finite_difference_step = step;
        if (!options.richardson) break;
        const auto [raw_half, alt_half] = both(0.5 * step);
        r.richardson_change = std::abs(raw_h - raw_half) / std::max(std::abs(raw_h), 1e-300);
        r.flagged = r.richardson_change > 1e-3;
        const double eq6_x = (4.0 * raw_half - raw_h) / 3.0;
        const double alt_x = (4.0 * alt_half - alt_h) / 3.0;
        const double scale = std::max({std::abs(eq6_x), std::abs(alt_x), 1e-12});
        const double disagreement = std::abs(eq6_x - alt_x) / scale;
        if (disagreement <= options.formula_tolerance) break;
        if (attempt == 2) {
            std::ostringstream msg;
            msg << "QFI formulas disagree at delta = " << params.delta << ": eigenbasis form " << eq6_x
                << ", spectral form " << alt_x << " (relative " << disagreement << ")";
            throw Error(ErrorCode::conditioning, msg.str());
        }
    }
    if (raw < 0.0) {
        if (raw < -1e-10) {
            std::ostringstream msg;
            msg << "QFI evaluated to " << raw << " at delta = " << params.delta;
            throw Error(ErrorCode::numerical_failure, msg.str());
        }
        raw = 0.0;
        r.clamped = true;
    }
    r.qfi = raw;
    return r;
}

double qfi_pure(const std::function<Vector(double)>& psi, double f, double df) {
    if (!(df > 0.0)) throw Error(ErrorCode::invalid_config, "finite-difference step must be positive");
    const Vector p0 = psi(f).normalized();
    auto aligned = [&](double x) {
        Vector v = psi(x).normalized();
        const Complex o = p0.dot(v);
        if (std::abs(o) > 0.0) v *= std::conj(o) / std::abs(o);
        return v;
    };
    const Vector d = (aligned(f + df) - aligned(f - df)) / (2.0 * df);
    return std::max(0.0, 4.0 * (d.squaredNorm() - std::norm(p0.dot(d))));
}

double qfi_pure(const SystemParams& params, FockSpace space, std::optional<double> step) {
    auto dominant = [&](double f) {
        const Matrix rho = steady(params, f, space, {});
        const double purity = (rho * rho).trace().real();
        if (purity < 1.0 - 1e-6) {
            std::ostringstream msg;
            msg << "steady state is mixed (purity " << purity << "); use qfi_mixed";
            throw Error(ErrorCode::purity_violation, msg.str());
        }
        const auto es = eigen(rho);
        return Vector(es.eigenvectors().col(es.eigenvectors().cols() - 1));
    };
    return qfi_pure(dominant, params.f, step.value_or(1e-3 * std::max(params.f, 1.0)));
}

double linear_oscillator_qfi(double gamma, double delta) { return 4.0 / (0.25 * gamma * gamma + delta * delta); }

std::vector<QfiResult> temperature_scan(const SystemParams& params, FockSpace space,
                                        std::span<const double> temperatures, std::span<const double> delta_grid,
                                        double omega_c, int threads, const QfiOptions& options) {
    const int nd = static_cast<int>(delta_grid.size());
    const int count = static_cast<int>(temperatures.size()) * nd;
    return run_ensemble<QfiResult>(count, threads, [&](int k) {
        const double t = temperatures[static_cast<std::size_t>(k / nd)];
        SystemParams p = params;
        p.delta = delta_grid[static_cast<std::size_t>(k % nd)];
        QfiResult r;
        r.delta = p.delta;
        r.temperature = t;
        try {
            const ThermalEnvironment env = ThermalEnvironment::from_temperature(omega_c, t);
            r = qfi_mixed(p, env, space, options);
        } catch (const Error& e) {
            r.error = e.what();
        }
        return r;
    });
}

} // namespace kpo
