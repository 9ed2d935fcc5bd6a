#include "kpo/trajectories.hpp"

#include "kpo/banded.hpp"
#include "kpo/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <deque>
#include <sstream>

namespace kpo {

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t trajectory_index)
    : seed_(seed), index_(trajectory_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trajectory_index),
                      static_cast<std::uint32_t>(trajectory_index >> 32), 0x6b706f5fu};
    engine_.seed(seq);
}

SweepRecord TrajectoryRecord::measured_phase_record() const {
    SweepRecord r;
    r.times = times;
    r.deltas = deltas;
    r.n_mean = n_mean;
    r.x = x_smooth;
    r.p = p_smooth;
    r.phi = phi_smooth;
    r.phase_defined.assign(size(), 1);
    return r;
}

namespace {

class Boxcar {
public:
    explicit Boxcar(int window) : window_(static_cast<std::size_t>(window)) {}

    void push(double v) {
        values_.push_back(v);
        sum_ += v;
        if (values_.size() > window_) {
            sum_ -= values_.front();
            values_.pop_front();
        }
    }
    double mean() const { return sum_ / static_cast<double>(values_.size()); }

private:
    std::size_t window_;
    std::deque<double> values_;
    double sum_ = 0.0;
};

} // namespace

TrajectoryRecord integrate_heterodyne(const SystemParams& params, const SweepSchedule& schedule,
                                      NoiseStream& noise, FockSpace space, const TrajectoryOptions& options,
                                      const std::optional<DensityMatrix>& initial,
                                      const SampleObserver& observer) {
    params.validate();
    schedule.validate();
    if (!(params.kappa > 0.0)) {
        throw Error(ErrorCode::invalid_config,
                    "heterodyne measurement requires kappa > 0 (record noise scales as 1/sqrt(kappa))");
    }
    if (!(options.dt > 0.0) || options.samples < 2 || options.smoothing_window < 1) {
        throw Error(ErrorCode::invalid_config, "trajectory options need dt > 0, samples >= 2, window >= 1");
    }
    const long steps = std::lround(schedule.sweep_time / options.dt);
    if (steps < options.samples) {
        throw Error(ErrorCode::invalid_config, "sweep_time/dt must be at least the number of output samples");
    }
    const double dt = schedule.sweep_time / static_cast<double>(steps);

    Matrix rho;
    if (initial) {
        if (!(initial->space == space)) throw Error(ErrorCode::invalid_space, "initial state dimension mismatch");
        rho = initial->matrix;
    } else {
        SystemParams start = params;
        start.delta = schedule.delta_start;
        rho = steady_state(build_liouvillian(start, space, {}, true)).matrix;
    }

    // Split Kraus update. The diagonal part D of H_eff (Kerr, detuning and the
    // number-diagonal decay) is applied exactly as P = exp(-i D dt/2) on both
    // sides of a first-order Kraus map:
    //   rho' ~ P [K rho_h K^dag + dt sum_unmonitored r L rho_h L^dag] P^dag,  rho_h = P rho P^dag
    //   K = 1 - i O dt + s a dY + (s^2/2) a^2 dY^2
    // with O the off-diagonal drive part of H_eff, s = sqrt(kappa/2),
    // dY = dy_x - i dy_p and dy = s <x> dt + dW. The map is first-order
    // equivalent to the Ito equation above and positivity preserving.
    const int dim = space.dim();
    const MasterEquation eq(params, space, {}, true);
    const Vector heff0_diag = eq.effective_hamiltonian(0.0).diagonal();
    const Vector number = eq.number_diagonal().cast<Complex>();
    SparseMatrix drive_sparse = eq.effective_hamiltonian(0.0);
    drive_sparse.prune([](Eigen::Index r, Eigen::Index c, const Complex&) { return r != c; });
    const BandedOperator drive = BandedOperator::from_sparse(drive_sparse);
    std::vector<std::pair<double, Band>> unmonitored;
    for (const JumpTerm& j : jump_terms(params, dim, {}, false)) {
        unmonitored.emplace_back(j.rate, BandedOperator::from_sparse(j.op).bands().front());
    }
    Vector sqrt_n(dim);
    Vector sqrt_nn(dim);
    for (int i = 0; i < dim; ++i) {
        sqrt_n(i) = std::sqrt(i + 1.0);
        sqrt_nn(i) = std::sqrt((i + 1.0) * (i + 2.0));
    }
    BandedOperator kraus(dim);
    for (int o : {-2, -1, 0, 1, 2}) kraus.band(o);
    const double coupling = std::sqrt(0.5 * params.kappa);
    const double readout = std::sqrt(2.0 / params.kappa);

    TrajectoryRecord rec;
    const auto n_samples = static_cast<std::size_t>(options.samples);
    for (auto* v : {&rec.times, &rec.deltas, &rec.x_meas, &rec.p_meas, &rec.phi_meas, &rec.x_smooth,
                    &rec.p_smooth, &rec.phi_smooth, &rec.x, &rec.p, &rec.n_mean}) {
        v->reserve(n_samples);
    }

    Boxcar box_x(options.smoothing_window);
    Boxcar box_p(options.smoothing_window);
    Matrix m_rho(dim, dim), out(dim, dim);
    std::size_t next_sample = 0;
    auto sample_step = [&](std::size_t j) {
        return static_cast<long>(std::llround(static_cast<double>(j) * static_cast<double>(steps - 1) /
                                              static_cast<double>(n_samples - 1)));
    };

    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double delta = schedule.delta_at(t);

        Complex a_mean = 0.0;
        for (int i = 1; i < dim; ++i) a_mean += std::sqrt(static_cast<double>(i)) * rho(i, i - 1);
        const double x = 2.0 * a_mean.real();
        const double p = 2.0 * a_mean.imag();
        const double dw_x = noise.increment(dt);
        const double dw_p = noise.increment(dt);
        const double x_meas = x + readout * dw_x / dt;
        const double p_meas = p + readout * dw_p / dt;
        box_x.push(x_meas);
        box_p.push(p_meas);

        if (next_sample < n_samples && k == sample_step(next_sample)) {
            Observables o = measure(rho);
            rec.times.push_back(t);
            rec.deltas.push_back(delta);
            rec.x_meas.push_back(x_meas);
            rec.p_meas.push_back(p_meas);
            rec.phi_meas.push_back(principal_phase(std::atan2(p_meas, x_meas)));
            rec.x_smooth.push_back(box_x.mean());
            rec.p_smooth.push_back(box_p.mean());
            rec.phi_smooth.push_back(principal_phase(std::atan2(box_p.mean(), box_x.mean())));
            rec.x.push_back(o.x);
            rec.p.push_back(o.p);
            rec.n_mean.push_back(o.n_mean);
            if (options.check_positivity) {
                Eigen::SelfAdjointEigenSolver<Matrix> es(rho, Eigen::EigenvaluesOnly);
                rec.min_eigenvalue = std::min(rec.min_eigenvalue, es.eigenvalues().minCoeff());
                if (rec.min_eigenvalue < -options.negativity_tolerance) {
                    std::ostringstream msg;
                    msg << "conditional state lost positivity (eigenvalue " << rec.min_eigenvalue << " at t = " << t
                        << "); reduce dt";
                    throw Error(ErrorCode::numerical_failure, msg.str());
                }
            }
            if (observer) observer(next_sample, t, delta, rho);
            ++next_sample;
        }

        const Complex dy = coupling * Complex(x, -p) * dt + Complex(dw_x, -dw_p);
        const Complex c1 = coupling * dy;
        const Complex c2 = 0.5 * coupling * coupling * dy * dy;
        const Vector half = (-0.5 * dt * kI * (heff0_diag - delta * number)).array().exp();
        const Matrix phase = half * half.adjoint();
        kraus.zero();
        kraus.band(0).coeff.setOnes();
        for (const Band& band : drive.bands()) kraus.band(band.offset).coeff += (-kI * dt) * band.coeff;
        kraus.band(1).coeff += c1 * sqrt_n;
        kraus.band(2).coeff += c2 * sqrt_nn;

        rho = rho.cwiseProduct(phase);
        m_rho.setZero();
        kraus.add_left(rho, 1.0, m_rho);
        out.setZero();
        kraus.add_right_adjoint(m_rho, 1.0, out);
        for (const auto& [rate, band] : unmonitored) add_sandwich(band, dim, rho, rate * dt, out);
        out = out.cwiseProduct(phase);
        rho = 0.5 * (out + out.adjoint());
        const double tr = rho.trace().real();
        if (!(tr > 0.0) || !std::isfinite(tr)) {
            std::ostringstream msg;
            msg << "conditional state collapsed (trace " << tr << ") at t = " << t << "; reduce dt";
            throw Error(ErrorCode::numerical_failure, msg.str());
        }
        rho /= tr;
        const double drift_tr = std::abs(rho.trace().real() - 1.0);
        rec.max_trace_drift = std::max(rec.max_trace_drift, drift_tr);
        if (!(drift_tr <= options.max_trace_drift)) {
            std::ostringstream msg;
            msg << "trace drift " << drift_tr << " after normalization at t = " << t;
            throw Error(ErrorCode::trace_drift, msg.str());
        }
    }
    return rec;
}

WienerStatistics wiener_selfcheck(std::uint64_t seed, std::uint64_t first_index, int steps, double dt, int paths) {
    if (steps < 1000 || !(dt > 0.0) || paths < 2) {
        throw Error(ErrorCode::invalid_config, "wiener_selfcheck needs steps >= 1000, dt > 0, paths >= 2");
    }
    WienerStatistics s;
    s.steps = steps;
    s.paths = paths;
    s.final_time = steps * dt;
    double sum_w = 0.0, sum_w2 = 0.0, sum_dw = 0.0, sum_dw2 = 0.0;
    for (int k = 0; k < paths; ++k) {
        NoiseStream stream(seed, first_index + static_cast<std::uint64_t>(k));
        double w = 0.0;
        for (int i = 0; i < steps; ++i) {
            const double dw = stream.increment(dt);
            w += dw;
            sum_dw += dw;
            sum_dw2 += dw * dw;
        }
        sum_w += w;
        sum_w2 += w * w;
    }
    const double n = paths;
    s.mean = sum_w / n;
    s.variance = (sum_w2 - n * s.mean * s.mean) / (n - 1.0);
    const double m = n * steps;
    s.increment_mean = sum_dw / m;
    s.increment_variance_ratio = (sum_dw2 / m - s.increment_mean * s.increment_mean) / dt;
    return s;
}

double increment_cross_correlation(NoiseStream a, NoiseStream b, int steps) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < steps; ++i) {
        const double x = a.normal();
        const double y = b.normal();
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    const double n = steps;
    const double cov = sab / n - (sa / n) * (sb / n);
    const double va = saa / n - (sa / n) * (sa / n);
    const double vb = sbb / n - (sb / n) * (sb / n);
    return cov / std::sqrt(va * vb);
}

} // namespace kpo
