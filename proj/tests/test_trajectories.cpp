#include "kpo/dynamics.hpp"
#include "kpo/error.hpp"
#include "kpo/trajectories.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace kpo;

namespace {

SystemParams monitored() {
    SystemParams p;
    p.f = 4.0;
    p.g_abs = 6.0;
    p.gamma = 0.5;
    p.eta = 0.5;
    p.kappa = 1.0;
    return p;
}

} // namespace

TEST_CASE("noise streams are reproducible and distinct") {
    NoiseStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        CHECK(x == b.normal());
        differs_c |= x != c.normal();
        differs_d |= x != d.normal();
    }
    CHECK(differs_c);
    CHECK(differs_d);
}

TEST_CASE("Wiener self-check") {
    const WienerStatistics s = wiener_selfcheck(7, 0, 10000, 1e-3);
    CHECK(s.final_time == doctest::Approx(10.0));
    CHECK(s.variance >= 9.0);
    CHECK(s.variance <= 11.0);
    CHECK(std::abs(s.mean) < 3.0 * std::sqrt(10.0 / s.paths));
    CHECK(s.increment_variance_ratio == doctest::Approx(1.0).epsilon(0.01));

    const WienerStatistics again = wiener_selfcheck(7, 0, 10000, 1e-3);
    CHECK(again.mean == s.mean);
    CHECK(again.variance == s.variance);
}

TEST_CASE("increments of different trajectories are uncorrelated") {
    CHECK(std::abs(increment_cross_correlation(NoiseStream(1, 0), NoiseStream(1, 1), 10000)) < 0.05);
    CHECK(increment_cross_correlation(NoiseStream(1, 0), NoiseStream(1, 0), 1000) == doctest::Approx(1.0));
}

TEST_CASE("heterodyne needs a measurement rate") {
    SystemParams p = monitored();
    p.kappa = 0.0;
    NoiseStream noise(0, 0);
    CHECK_THROWS_AS(integrate_heterodyne(p, SweepSchedule{1.0, 0.0, 1.0}, noise, FockSpace(8)), Error);
}

TEST_CASE("vacuum record is white noise around zero") {
    SystemParams p;
    p.u = 0.0;
    p.kappa = 20.0;
    const FockSpace space(6);
    TrajectoryOptions opts;
    opts.dt = 1e-3;
    opts.samples = 10000;
    NoiseStream noise(11, 0);
    const TrajectoryRecord r =
        integrate_heterodyne(p, SweepSchedule{0.0, 0.0, 10.0}, noise, space, opts, DensityMatrix::vacuum(space));
    REQUIRE(r.size() == 10000);
    const double n = static_cast<double>(r.size());
    const double mean = std::accumulate(r.x_meas.begin(), r.x_meas.end(), 0.0) / n;
    const double sigma = std::sqrt(2.0 / (p.kappa * opts.dt));
    CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(n));
    for (double v : r.n_mean) CHECK(v < 1e-12);
}

TEST_CASE("same stream reproduces the record bit for bit") {
    const SystemParams p = monitored();
    TrajectoryOptions opts;
    opts.samples = 50;
    NoiseStream n1(5, 2), n2(5, 2);
    const TrajectoryRecord a = integrate_heterodyne(p, SweepSchedule{2.0, 1.0, 0.5}, n1, FockSpace(12), opts);
    const TrajectoryRecord b = integrate_heterodyne(p, SweepSchedule{2.0, 1.0, 0.5}, n2, FockSpace(12), opts);
    CHECK(a.x_meas == b.x_meas);
    CHECK(a.phi_smooth == b.phi_smooth);
    CHECK(a.n_mean == b.n_mean);
    CHECK(a.max_trace_drift < 1e-6);
}

TEST_CASE("ensemble average follows the unconditional master equation") {
    const SystemParams p = monitored();
    const FockSpace space(14);
    const SweepSchedule schedule{3.0, 1.0, 2.0};
    const int checkpoints = 20;
    const int shots = 200;
    TrajectoryOptions opts;
    opts.samples = checkpoints;
    // The split Kraus map is weak order one: at dt = 1e-3 the ensemble <n>
    // sits ~0.1 photon low early on, about 3 standard errors at 200 shots.
    opts.dt = 2.5e-4;

    SweepOptions det_opts;
    det_opts.samples = checkpoints;
    det_opts.include_measurement = true;
    const SweepResult det = integrate_sweep(p, schedule, std::nullopt, space, {}, det_opts);

    const auto runs = run_ensemble<std::vector<double>>(shots, 2, [&](int i) {
        NoiseStream noise(2024, static_cast<std::uint64_t>(i));
        return integrate_heterodyne(p, schedule, noise, space, opts).n_mean;
    });
    int outside = 0;
    for (int k = 0; k < checkpoints; ++k) {
        double sum = 0.0, sq = 0.0;
        for (const auto& r : runs) {
            sum += r[static_cast<std::size_t>(k)];
            sq += r[static_cast<std::size_t>(k)] * r[static_cast<std::size_t>(k)];
        }
        const double mean = sum / shots;
        const double var = (sq - shots * mean * mean) / (shots - 1);
        const double stderr_ = std::sqrt(std::max(var, 0.0) / shots);
        // The first checkpoint is the shared initial state: zero spread.
        const double tol = std::max(3.0 * stderr_, 1e-9 * (1.0 + mean));
        if (std::abs(mean - det.record.n_mean[static_cast<std::size_t>(k)]) > tol) ++outside;
    }
    CHECK(outside == 0);
}

TEST_CASE("ensemble results do not depend on the thread count") {
    auto fn = [](int i) {
        NoiseStream s(9, static_cast<std::uint64_t>(i));
        return s.normal();
    };
    CHECK(run_ensemble<double>(17, 1, fn) == run_ensemble<double>(17, 4, fn));
}
