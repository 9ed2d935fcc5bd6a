#include "kpo/dynamics.hpp"
#include "kpo/error.hpp"
#include "kpo/liouvillian.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace kpo;

namespace {

SystemParams bistable(double delta = 0.0) {
    SystemParams p;
    p.delta = delta;
    p.f = 4.0;
    p.g_abs = 6.0;
    p.gamma = 0.5;
    p.eta = 0.5;
    return p;
}

double trace_row_norm(const SuperOperator& l) {
    const int d = l.space.dim();
    Eigen::RowVectorXcd tr = Eigen::RowVectorXcd::Zero(d * d);
    for (int k = 0; k < d; ++k) tr(k + k * d) = 1.0;
    return (tr * l.dense()).norm();
}

} // namespace

TEST_CASE("single-photon decay of |1><1|") {
    SystemParams p;
    p.u = 0.0;
    p.gamma = 1.0;
    const SuperOperator l = build_liouvillian(p, FockSpace(4));
    Matrix rho = Matrix::Zero(4, 4);
    rho(1, 1) = 1.0;
    const Matrix d = l.apply(rho);
    CHECK(d(0, 0).real() == doctest::Approx(1.0));
    CHECK(d(1, 1).real() == doctest::Approx(-1.0));
    CHECK(std::abs(d(2, 2)) < 1e-15);
}

TEST_CASE("trace preservation for assorted parameters") {
    SystemParams p = bistable(1.3);
    CHECK(trace_row_norm(build_liouvillian(p, FockSpace(12))) < 1e-9);
    CHECK(trace_row_norm(build_liouvillian(p, FockSpace(12), ThermalEnvironment::from_occupation(0.3))) < 1e-9);
    p.kappa = 1.0;
    CHECK(trace_row_norm(build_liouvillian(p, FockSpace(12), {}, true)) < 1e-9);
}

TEST_CASE("apply agrees with the dense superoperator") {
    const SuperOperator l = build_liouvillian(bistable(0.4), FockSpace(8), ThermalEnvironment::from_occupation(0.1));
    Matrix rho = Matrix::Random(8, 8);
    rho = rho * rho.adjoint();
    rho /= rho.trace();
    const Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho.data(), 64);
    const Eigen::VectorXcd lv = l.dense() * v;
    const Matrix applied = l.apply(rho);
    CHECK((Eigen::Map<const Eigen::VectorXcd>(applied.data(), 64) - lv).norm() < 1e-12);
}

TEST_CASE("master equation rhs matches the superoperator") {
    const SystemParams p = bistable(2.0);
    const MasterEquation me(p, FockSpace(10), ThermalEnvironment::from_occupation(0.2));
    const SuperOperator l = build_liouvillian(p, FockSpace(10), ThermalEnvironment::from_occupation(0.2));
    Matrix rho = Matrix::Random(10, 10);
    rho = rho * rho.adjoint();
    Matrix out;
    me.derivative(rho, 2.0, out);
    CHECK((out - l.apply(rho)).norm() < 1e-10 * rho.norm());
}

TEST_CASE("steady state at the bistable point is a fixed point") {
    const SuperOperator l = build_liouvillian(bistable(), FockSpace(30));
    SteadyStateDiagnostics diag;
    const DensityMatrix rho = steady_state(l, &diag);
    CHECK(l.apply(rho.matrix).norm() < 1e-8);
    const StateDiagnostics s = diagnose_state(rho.matrix);
    CHECK(s.hermiticity < 1e-9);
    CHECK(s.trace_error < 1e-9);
    CHECK(s.min_eigenvalue > -1e-8);
}

TEST_CASE("driven linear cavity relaxes to a coherent state") {
    SystemParams p;
    p.u = 0.0;
    p.f = 1.0;
    p.gamma = 2.0;
    const DensityMatrix rho = steady_state(build_liouvillian(p, FockSpace(20)));
    const Observables o = measure(rho.matrix);
    CHECK(o.n_mean == doctest::Approx(1.0).epsilon(1e-8));
    // alpha = iF/(gamma/2 - i delta) up to the sign convention of the drive
    CHECK(std::abs(o.x) < 1e-8);
    CHECK(std::abs(std::abs(o.p) - 2.0) < 1e-8);
    // pure: tr rho^2 = 1
    CHECK((rho.matrix * rho.matrix).trace().real() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("undriven damped cavity relaxes to vacuum") {
    SystemParams p;
    p.gamma = 0.7;
    p.eta = 0.3;
    const DensityMatrix rho = steady_state(build_liouvillian(p, FockSpace(10)));
    CHECK(std::abs(rho.matrix(0, 0) - 1.0) < 1e-10);
    CHECK(measure(rho.matrix).n_mean < 1e-10);
}

TEST_CASE("steady state agrees with long-time integration") {
    const SystemParams p = bistable();
    const FockSpace space(20);
    const SuperOperator l = build_liouvillian(p, space);
    const DensityMatrix rho = steady_state(l);
    // Slowest relaxation ~ exp(-gap t): 12/gap leaves a residual below 1e-5.
    const double gap = spectrum(l, 2).gap;
    REQUIRE(gap > 1e-3);
    const DensityMatrix late = evolve_fixed(p, DensityMatrix::vacuum(space), 12.0 / gap);
    CHECK(measure(late.matrix).n_mean == doctest::Approx(measure(rho.matrix).n_mean).epsilon(1e-4));
}

TEST_CASE("damped oscillator spectrum") {
    SystemParams p;
    p.u = 0.0;
    p.gamma = 1.0;
    const int dim = 10;
    const LiouvillianSpectrum s = spectrum(build_liouvillian(p, FockSpace(dim)));
    CHECK(s.gap == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(std::abs(s.eigenvalues.front()) < 1e-8);
    // lambda_nm = -gamma (n + m) / 2 with delta = 0: multiplicity n + m + 1.
    std::vector<double> re;
    for (const Complex& z : s.eigenvalues) {
        CHECK(z.real() <= 1e-9);
        re.push_back(-z.real());
    }
    std::vector<double> expected;
    for (int n = 0; n < dim; ++n)
        for (int m = 0; m < dim; ++m) expected.push_back(0.5 * (n + m));
    std::sort(re.begin(), re.end());
    std::sort(expected.begin(), expected.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < re.size(); ++i) worst = std::max(worst, std::abs(re[i] - expected[i]));
    CHECK(worst < 1e-9);
}

TEST_CASE("bose occupation") {
    CHECK(bose_occupation(1.0, 0.0) == 0.0);
    const double omega = 2 * std::numbers::pi * 7.5e9;
    const double t = 0.05;
    const double hbar = 1.054571817e-34, kb = 1.380649e-23;
    CHECK(bose_occupation(omega, t) == doctest::Approx(1.0 / (std::exp(hbar * omega / (kb * t)) - 1.0)));
    CHECK_THROWS_AS(ThermalEnvironment::from_occupation(-0.1), Error);
}

TEST_CASE("thermal bath without drive gives a Gibbs state") {
    SystemParams p;
    p.u = 0.0;
    p.gamma = 1.0;
    const double n_th = 0.4;
    const DensityMatrix rho = steady_state(build_liouvillian(p, FockSpace(30), ThermalEnvironment::from_occupation(n_th)));
    CHECK(measure(rho.matrix).n_mean == doctest::Approx(n_th).epsilon(1e-8));
    const double r = n_th / (1 + n_th);
    CHECK(rho.matrix(1, 1).real() / rho.matrix(0, 0).real() == doctest::Approx(r));
}
