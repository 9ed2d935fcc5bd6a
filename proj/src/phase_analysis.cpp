#include "kpo/phase_analysis.hpp"

#include "kpo/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace kpo {

namespace {
constexpr double kPi = std::numbers::pi;
}

HusimiGridSpec HusimiGridSpec::enclosing(const Matrix& rho, int points) {
    const double n = std::max(0.0, measure(rho).n_mean);
    const double half = std::max(4.0, 2.0 * std::sqrt(n) + 3.0);
    return {-half, half, -half, half, points, points};
}

HusimiGrid husimi_q(const Matrix& rho, const HusimiGridSpec& spec, double* coverage) {
    if (spec.nx < 1 || spec.np < 1 || !(spec.x_max > spec.x_min) || !(spec.p_max > spec.p_min)) {
        throw Error(ErrorCode::invalid_config, "husimi grid needs positive extent and point counts");
    }
    const int dim = static_cast<int>(rho.rows());
    HusimiGrid q{spec, Eigen::MatrixXd(spec.nx, spec.np)};

    // <n|alpha> without normalizing the truncated vector: this is the exact
    // coherent-state overlap for a state supported on the truncated space.
    Vector c(dim);
    Vector rc(dim);
    for (int ix = 0; ix < spec.nx; ++ix) {
        for (int ip = 0; ip < spec.np; ++ip) {
            const Complex alpha(q.x_at(ix), q.p_at(ip));
            c(0) = std::exp(-0.5 * std::norm(alpha));
            for (int k = 1; k < dim; ++k) c(k) = c(k - 1) * alpha / std::sqrt(static_cast<double>(k));
            rc.noalias() = rho * c;
            q.values(ix, ip) = std::max(0.0, c.dot(rc).real()) / kPi;
        }
    }
    if (coverage) *coverage = q.mass();
    return q;
}

double half_plane_probability(const HusimiGrid& q) {
    const double mass = q.mass();
    if (std::abs(mass - 1.0) > 1e-2) {
        std::ostringstream msg;
        msg << "Husimi grid mass " << mass << " deviates from 1 by more than 1e-2; enlarge the grid";
        throw Error(ErrorCode::unnormalized_grid, msg.str());
    }
    double left = 0.0;
    for (int ix = 0; ix < q.spec.nx; ++ix) {
        // Fraction of the cell lying at x < 0.
        const double frac = std::clamp(-(q.x_at(ix) - 0.5 * q.dx()) / q.dx(), 0.0, 1.0);
        if (frac > 0.0) left += frac * q.values.row(ix).sum();
    }
    return std::clamp(left * q.dx() * q.dp() / mass, 0.0, 1.0);
}

Matrix half_plane_projector(int dim) {
    // K_mn = (1/pi) int_{x<0} conj(<m|alpha>) <n|alpha> d^2 alpha
    //      = Gamma((m+n)/2 + 1) / (2 pi sqrt(m! n!)) * int_{pi/2}^{3pi/2} e^{i(n-m)t} dt
    Matrix k(dim, dim);
    for (int m = 0; m < dim; ++m) {
        for (int n = 0; n < dim; ++n) {
            const int d = n - m;
            Complex angular;
            if (d == 0) {
                angular = kPi;
            } else {
                angular = (std::polar(1.0, 1.5 * kPi * d) - std::polar(1.0, 0.5 * kPi * d)) / Complex(0.0, d);
            }
            const double radial =
                std::exp(std::lgamma(0.5 * (m + n) + 1.0) - 0.5 * (std::lgamma(m + 1.0) + std::lgamma(n + 1.0)));
            k(m, n) = 0.5 * radial * angular / kPi;
        }
    }
    return k;
}

double half_plane_probability(const Matrix& rho) {
    const Matrix k = half_plane_projector(static_cast<int>(rho.rows()));
    return std::clamp(rho.cwiseProduct(k).sum().real(), 0.0, 1.0);
}

double SwitchPdf::mean() const {
    double w = 0.0, s = 0.0;
    for (std::size_t i = 0; i < p_tr.size(); ++i) {
        w += p_tr[i];
        s += p_tr[i] * delta_grid[i];
    }
    return w > 0.0 ? s / w : std::numeric_limits<double>::quiet_NaN();
}

double SwitchPdf::mode() const {
    if (pdf.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto it = std::max_element(pdf.begin(), pdf.end());
    return delta_grid[static_cast<std::size_t>(it - pdf.begin())];
}

SwitchPdf transition_pdf_from_probabilities(std::span<const double> deltas, std::span<const double> p_left,
                                            std::optional<std::pair<double, double>> window) {
    if (deltas.size() != p_left.size() || deltas.size() < 2) {
        throw Error(ErrorCode::invalid_config, "transition_pdf needs at least two matching samples");
    }
    SwitchPdf out;
    out.p_left.assign(p_left.begin(), p_left.end());
    const std::size_t steps = deltas.size() - 1;

    // Transitions Phi- -> Phi+ are counted between the maximum of P_{Phi-}
    // and its subsequent minimum. Before the maximum the left half-plane is
    // still being populated; after the minimum the Phi+ state decays toward
    // the origin and leaks back across x = 0 without switching.
    out.window_end = steps;
    if (!window) {
        const auto peak = std::max_element(p_left.begin(), p_left.end());
        const auto trough = std::min_element(peak, p_left.end());
        out.window_begin = std::min(static_cast<std::size_t>(peak - p_left.begin()), steps - 1);
        out.window_end = std::max(static_cast<std::size_t>(trough - p_left.begin()), out.window_begin + 1);
    }
    for (std::size_t i = 0; i < steps; ++i) {
        const double mid = 0.5 * (deltas[i] + deltas[i + 1]);
        const double raw = p_left[i] - p_left[i + 1];
        bool inside = i >= out.window_begin && i < out.window_end;
        if (window) {
            inside = mid >= std::min(window->first, window->second) && mid <= std::max(window->first, window->second);
        }
        out.delta_grid.push_back(mid);
        out.p_tr_raw.push_back(raw);
        const double clipped = inside ? std::max(0.0, raw) : 0.0;
        out.p_tr.push_back(clipped);
        if (inside && raw < 0.0) out.clipped_mass += -raw;
        out.total_probability += clipped;
    }
    out.pdf.resize(steps, 0.0);
    if (out.total_probability > 0.0) {
        for (std::size_t i = 0; i < steps; ++i) {
            const double width = std::abs(deltas[i + 1] - deltas[i]);
            out.pdf[i] = width > 0.0 ? out.p_tr[i] / (out.total_probability * width) : 0.0;
        }
    }
    out.model_violation = out.clipped_mass > 0.1;
    return out;
}

SwitchPdf transition_pdf(const SystemParams& params, const SweepSchedule& schedule, FockSpace space,
                         const ThermalEnvironment& env, const TransitionPdfOptions& options) {
    const Matrix k = half_plane_projector(space.dim());
    std::vector<double> deltas(static_cast<std::size_t>(options.samples));
    std::vector<double> p_left(deltas.size());
    SweepOptions sweep;
    sweep.samples = options.samples;
    sweep.include_measurement = options.include_measurement;
    sweep.observer = [&](std::size_t i, double, double delta, const Matrix& rho) {
        deltas[i] = delta;
        p_left[i] = std::clamp(rho.cwiseProduct(k).sum().real(), 0.0, 1.0);
    };
    integrate_sweep(params, schedule, std::nullopt, space, env, sweep);
    return transition_pdf_from_probabilities(deltas, p_left, options.window);
}

namespace {

struct FitData {
    std::vector<double> d;
    std::vector<double> phi;
};

double model(double a, double ds, double c, double d) { return std::atan(a * (d - ds)) + c; }

double sse(const FitData& f, double a, double ds, double c) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.d.size(); ++i) {
        const double r = f.phi[i] - model(a, ds, c, f.d[i]);
        s += r * r;
    }
    return s;
}

// Offset minimizing the squared error for fixed (A, delta*).
double best_offset(const FitData& f, double a, double ds) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.d.size(); ++i) s += f.phi[i] - std::atan(a * (f.d[i] - ds));
    return s / static_cast<double>(f.d.size());
}

double circular_axis(std::span<const double> phi) {
    Complex sum = 0.0;
    for (double v : phi) sum += std::polar(1.0, 2.0 * v);
    return 0.5 * std::arg(sum);
}

} // namespace

ArctanFit fit_arctan(std::span<const double> deltas, std::span<const double> phases,
                     std::optional<std::pair<double, double>> window, const ArctanFitOptions& options) {
    if (deltas.size() != phases.size()) throw Error(ErrorCode::invalid_config, "fit_arctan: size mismatch");
    FitData f;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!std::isfinite(phases[i]) || !std::isfinite(deltas[i])) continue;
        if (window && (deltas[i] < std::min(window->first, window->second) ||
                       deltas[i] > std::max(window->first, window->second))) {
            continue;
        }
        f.d.push_back(deltas[i]);
        f.phi.push_back(phases[i]);
    }
    if (f.d.size() < 8) throw Error(ErrorCode::fit_failed, "fit_arctan: fewer than 8 samples in the window");

    // Order by delta so "low" and "high" plateaus are well defined.
    std::vector<std::size_t> order(f.d.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f.d[a] < f.d[b]; });
    FitData s;
    for (std::size_t i : order) {
        s.d.push_back(f.d[i]);
        s.phi.push_back(f.phi[i]);
    }
    f = std::move(s);
    const std::size_t n = f.d.size();
    const double lo = f.d.front(), hi = f.d.back();
    const double width = hi - lo;
    if (!(width > 0.0)) throw Error(ErrorCode::fit_failed, "fit_arctan: window has zero width");
    const std::size_t tail = std::max<std::size_t>(2, static_cast<std::size_t>(options.plateau_fraction * n));

    ArctanFit out;
    if (options.rotate_branch) {
        // Put the axis through both plateaus on the imaginary axis, so they sit
        // near +-pi/2 and the branch cut lies between them.
        std::vector<double> plateaus(f.phi.begin(), f.phi.begin() + tail);
        plateaus.insert(plateaus.end(), f.phi.end() - tail, f.phi.end());
        double rotation = std::remainder(circular_axis(plateaus) - kPi / 2, kPi);
        // The axis fixes the rotation only mod pi. Of the two choices, keep
        // the one that routes the transition through 0 rather than +-pi.
        const bool has_middle = n > 2 * tail;
        double through_zero = 0.0;
        for (std::size_t i = has_middle ? tail : 0; i < (has_middle ? n - tail : n); ++i) {
            through_zero += std::cos(f.phi[i] - rotation);
        }
        if (through_zero < 0.0) rotation = principal_phase(rotation + kPi);
        out.phase_rotation = rotation;
        for (double& v : f.phi) v = principal_phase(v - out.phase_rotation);
    }

    const double low_tail = std::accumulate(f.phi.begin(), f.phi.begin() + tail, 0.0) / tail;
    const double high_tail = std::accumulate(f.phi.end() - tail, f.phi.end(), 0.0) / tail;
    const double sign = high_tail >= low_tail ? 1.0 : -1.0;

    // Initial guess: coarse scan over delta* and a few slopes scaled to the
    // window width, each with its least-squares offset.
    double a0 = sign * 10.0 / width, d0 = 0.5 * (lo + hi), c0 = 0.5 * (low_tail + high_tail);
    double best = sse(f, a0, d0, c0);
    const std::size_t stride = std::max<std::size_t>(1, n / 100);
    for (double k : {2.0, 5.0, 10.0, 20.0, 50.0, 200.0}) {
        const double a = sign * k / width;
        for (std::size_t i = 0; i < n; i += stride) {
            const double c = best_offset(f, a, f.d[i]);
            const double e = sse(f, a, f.d[i], c);
            if (e < best) {
                best = e;
                a0 = a;
                d0 = f.d[i];
                c0 = c;
            }
        }
    }

    // Levenberg-Marquardt with Marquardt (diagonal) damping, which keeps the
    // iteration equivariant under rescaling of the delta axis.
    Eigen::Vector3d x(a0, d0, c0);
    double cost = best;
    double lambda = 1e-3;
    std::vector<double> trace{cost};
    bool converged = false;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            const double u = x(0) * (f.d[i] - x(1));
            const double w = 1.0 / (1.0 + u * u);
            const Eigen::Vector3d j((f.d[i] - x(1)) * w, -x(0) * w, 1.0);
            const double r = f.phi[i] - (std::atan(u) + x(2));
            jtj += j * j.transpose();
            jtr += j * r;
        }
        bool improved = false;
        while (lambda < 1e16) {
            Eigen::Matrix3d m = jtj;
            for (int k = 0; k < 3; ++k) m(k, k) *= 1.0 + lambda;
            const Eigen::Vector3d step = m.ldlt().solve(jtr);
            const Eigen::Vector3d trial = x + step;
            const double c = sse(f, trial(0), trial(1), trial(2));
            if (std::isfinite(c) && c <= cost) {
                const double rel = (cost - c) / std::max(cost, 1e-300);
                const bool small = (step.array().abs() <= 1e-12 * (x.array().abs() + 1e-12)).all();
                x = trial;
                cost = c;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (small || rel < 1e-10) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        trace.push_back(cost);
        // No downhill step at any damping: we are at a (numerical) minimum.
        if (!improved) converged = true;
        if (converged) break;
    }
    if (!converged || !std::isfinite(cost)) {
        std::ostringstream msg;
        msg << "arctan fit did not converge in " << options.max_iterations << " iterations; initial guess (A, delta*, C) = ("
            << a0 << ", " << d0 << ", " << c0 << "); residual trace:";
        for (std::size_t i = 0; i < trace.size(); i += std::max<std::size_t>(1, trace.size() / 10)) {
            msg << ' ' << trace[i];
        }
        throw Error(ErrorCode::fit_failed, msg.str());
    }

    out.slope_a = x(0);
    out.delta_star = x(1);
    out.offset_c = principal_phase(x(2) + out.phase_rotation);
    out.fit_rms = std::sqrt(cost / static_cast<double>(n));
    out.iterations = it + 1;

    const double change = std::abs(std::atan(x(0) * (hi - x(1))) - std::atan(x(0) * (lo - x(1))));
    if (!(change >= options.min_phase_change)) {
        std::ostringstream msg;
        msg << "fitted arctan changes by only " << change << " rad across the window (A = " << x(0) << ")";
        throw Error(ErrorCode::no_switch, msg.str());
    }
    if (!(out.delta_star >= lo && out.delta_star <= hi)) {
        std::ostringstream msg;
        msg << "fitted delta* = " << out.delta_star << " lies outside the window [" << lo << ", " << hi << "]";
        throw Error(ErrorCode::fit_failed, msg.str());
    }
    return out;
}

ArctanFit fit_arctan(const SweepRecord& record, std::optional<std::pair<double, double>> window,
                     const ArctanFitOptions& options) {
    return fit_arctan(record.deltas, record.phi, window, options);
}

} // namespace kpo
