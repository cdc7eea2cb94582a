#pragma once

// Structure extraction and analytic checks: the noisy-saddle stationary orbit,
// manifold-cross localization on descriptor fields, gradient singularity
// masks, trajectory clouds and the diagonal-cocycle Lyapunov spectrum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sld/descriptor.hpp"
#include "sld/error.hpp"
#include "sld/integrator.hpp"
#include "sld/parallel.hpp"
#include "sld/systems.hpp"
#include "sld/wiener.hpp"

namespace sld {

struct StationaryOrbitEstimate {
    double x_tilde = 0.0;
    double y_tilde = 0.0;
    double truncation_horizon = 0.0;
    double quadrature_dt = 0.0;
    std::uint64_t path_id = 0;
};

// Truncated improper integrals
//   x~ = -int_0^T e^{-a1 s} b1 dW^1,   y~ = int_{-T}^0 e^{a2 s} b2 dW^2
// as left-endpoint sums. horizon_steps = 0 uses every stored increment on
// each side; the tail bound e^{-min(a1,a2) T} must be below 1e-6.
inline StationaryOrbitEstimate stationary_orbit_estimate(const NoisySaddleParams& q, const WienerPath& path,
                                                         long horizon_steps = 0)
{
    if (path.n_components() != 2) {
        throw ConfigError("stationary_orbit_estimate: needs a 2-component path");
    }
    const double dt = path.dt();
    const long nf = horizon_steps > 0 ? horizon_steps : path.forward_steps();
    const long nb = horizon_steps > 0 ? horizon_steps : path.backward_steps();
    if (nf > path.forward_steps() || nb > path.backward_steps()) {
        throw RangeError("stationary_orbit_estimate: horizon exceeds the path");
    }
    const double horizon = static_cast<double>(std::min(nf, nb)) * dt;
    if (!(std::exp(-std::min(q.a1, q.a2) * horizon) < 1e-6)) {
        throw ConfigError("stationary_orbit_estimate: path too short, exp(-a T) >= 1e-6 at T = " +
                          std::to_string(horizon));
    }
    StationaryOrbitEstimate est;
    // 0 - I rather than -I so that zero noise gives +0.
    est.x_tilde = 0.0 - ito_quadrature(
        path, 0, [&](long j) { return std::exp(-q.a1 * static_cast<double>(j) * dt) * q.b1; }, 0, nf);
    est.y_tilde = ito_quadrature(
        path, 1, [&](long j) { return std::exp(q.a2 * static_cast<double>(j) * dt) * q.b2; }, -nb, 0);
    est.truncation_horizon = horizon;
    est.quadrature_dt = dt;
    est.path_id = path.path_id();
    return est;
}

struct StationaryStatistics {
    double mean[2] = {0.0, 0.0};
    double variance[2] = {0.0, 0.0};
    std::vector<StationaryOrbitEstimate> samples;
};

// Sample mean and unbiased variance of the orbit over paths 0..n_paths-1.
inline StationaryStatistics stationary_statistics(const NoisySaddleParams& q, std::size_t n_paths,
                                                  std::uint64_t seed, double dt = 0.05, long n_steps = 300,
                                                  unsigned threads = 1)
{
    if (n_paths < 2) {
        throw ConfigError("stationary_statistics: need at least two paths");
    }
    StationaryStatistics st;
    st.samples.resize(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t k) {
        st.samples[k] = stationary_orbit_estimate(q, generate_path(seed, k, 2, n_steps, dt));
    });
    const double n = static_cast<double>(n_paths);
    for (const auto& s : st.samples) {
        st.mean[0] += s.x_tilde;
        st.mean[1] += s.y_tilde;
    }
    st.mean[0] /= n;
    st.mean[1] /= n;
    for (const auto& s : st.samples) {
        st.variance[0] += (s.x_tilde - st.mean[0]) * (s.x_tilde - st.mean[0]);
        st.variance[1] += (s.y_tilde - st.mean[1]) * (s.y_tilde - st.mean[1]);
    }
    st.variance[0] /= n - 1.0;
    st.variance[1] /= n - 1.0;
    return st;
}

namespace detail {

inline double median(std::vector<double> v)
{
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
    return 0.5 * (lower + upper);
}

// Linear-interpolated percentile (0..100) of an unsorted sample.
inline double percentile(std::vector<double> v, double pct)
{
    if (v.empty()) {
        throw ConfigError("percentile of an empty sample");
    }
    std::sort(v.begin(), v.end());
    const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + (v[hi] - v[lo]) * frac;
}

} // namespace detail

struct CrossLocation {
    double x_star = 0.0;
    double y_star = 0.0;
};

// Median over rows of the per-row argmin x, and over columns of the
// per-column argmin y. Escaped cells are skipped.
inline CrossLocation locate_cross(const ScalarField& field)
{
    const GridSpec& g = field.grid;
    const auto [lo, hi] = std::minmax_element(field.values.begin(), field.values.end());
    if (field.values.empty() || *lo == *hi) {
        throw ConfigError("locate_cross: field is constant");
    }
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < g.ny; ++i) {
        std::optional<std::size_t> best;
        for (std::size_t j = 0; j < g.nx; ++j) {
            if (!field.escaped_at(i, j) && (!best || field.at(i, j) < field.at(i, *best))) {
                best = j;
            }
        }
        if (best) {
            xs.push_back(g.x(*best));
        }
    }
    for (std::size_t j = 0; j < g.nx; ++j) {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < g.ny; ++i) {
            if (!field.escaped_at(i, j) && (!best || field.at(i, j) < field.at(*best, j))) {
                best = i;
            }
        }
        if (best) {
            ys.push_back(g.y(*best));
        }
    }
    if (xs.empty() || ys.empty()) {
        throw ConfigError("locate_cross: every cell escaped");
    }
    return {detail::median(std::move(xs)), detail::median(std::move(ys))};
}

// Central-difference gradient magnitude on interior cells (boundary = 0).
inline std::vector<double> gradient_magnitude(const ScalarField& field)
{
    const GridSpec& g = field.grid;
    if (g.nx < 3 || g.ny < 3) {
        throw ConfigError("gradient needs at least a 3x3 field");
    }
    std::vector<double> mag(g.nx * g.ny, 0.0);
    const double hx = 2.0 * g.dx();
    const double hy = 2.0 * g.dy();
    for (std::size_t i = 1; i + 1 < g.ny; ++i) {
        for (std::size_t j = 1; j + 1 < g.nx; ++j) {
            const double gx = (field.at(i, j + 1) - field.at(i, j - 1)) / hx;
            const double gy = (field.at(i + 1, j) - field.at(i - 1, j)) / hy;
            mag[i * g.nx + j] = std::hypot(gx, gy);
        }
    }
    return mag;
}

// True on interior cells whose gradient magnitude exceeds the given
// percentile of all interior magnitudes.
inline std::vector<std::uint8_t> singularity_map(const ScalarField& field, double percentile)
{
    if (!(percentile > 0.0 && percentile < 100.0)) {
        throw ConfigError("singularity_map: percentile must lie in (0, 100)");
    }
    const GridSpec& g = field.grid;
    const std::vector<double> mag = gradient_magnitude(field);
    std::vector<double> interior;
    interior.reserve((g.nx - 2) * (g.ny - 2));
    for (std::size_t i = 1; i + 1 < g.ny; ++i) {
        for (std::size_t j = 1; j + 1 < g.nx; ++j) {
            interior.push_back(mag[i * g.nx + j]);
        }
    }
    const double threshold = detail::percentile(std::move(interior), percentile);
    std::vector<std::uint8_t> mask(g.nx * g.ny, 0);
    for (std::size_t i = 1; i + 1 < g.ny; ++i) {
        for (std::size_t j = 1; j + 1 < g.nx; ++j) {
            mask[i * g.nx + j] = mag[i * g.nx + j] > threshold ? 1 : 0;
        }
    }
    return mask;
}

struct CloudPoint {
    std::uint64_t path_id = 0;
    long node = 0;
    double t = 0.0;
    State state;
    bool escaped = false;
};

// Integrates one initial condition under n_paths independent realizations
// (path ids 0..n_paths-1) and samples the states at the requested nodes.
// Without explicit nodes the terminal node(s) of `direction` are returned.
inline std::vector<CloudPoint> trajectory_cloud(const SdeSystem& sys, std::span<const double> x0, double t0,
                                                double tau, double dt, std::size_t n_paths, std::uint64_t seed,
                                                Direction direction, std::vector<long> snapshot_nodes = {},
                                                double escape_radius = kDefaultEscapeRadius,
                                                unsigned threads = 1)
{
    const long n = descriptor_steps(tau, dt);
    if (snapshot_nodes.empty()) {
        if (direction != Direction::backward) snapshot_nodes.push_back(n);
        if (direction != Direction::forward) snapshot_nodes.push_back(-n);
    }
    for (long node : snapshot_nodes) {
        const bool ok = (node >= 0 && node <= n && direction != Direction::backward) ||
                        (node <= 0 && -node <= n && direction != Direction::forward);
        if (!ok) {
            throw ConfigError("trajectory_cloud: snapshot node " + std::to_string(node) +
                              " outside the integrated range");
        }
    }
    std::vector<CloudPoint> out(n_paths * snapshot_nodes.size());
    parallel_for(n_paths, threads, [&](std::size_t k) {
        const WienerPath path = generate_path(seed, k, sys.m(), n, dt);
        const Trajectory traj = integrate(sys, x0, t0, path, n, escape_radius, direction);
        for (std::size_t s = 0; s < snapshot_nodes.size(); ++s) {
            const long node = snapshot_nodes[s];
            const auto st = traj.state(node);
            const bool esc = node >= 0 ? (traj.escaped_forward && *traj.escaped_forward <= node)
                                       : (traj.escaped_backward && *traj.escaped_backward >= node);
            out[k * snapshot_nodes.size() + s] =
                CloudPoint{k, node, traj.time(node), State(st.begin(), st.end()), esc};
        }
    });
    return out;
}

struct LyapunovExponent {
    double lambda = 0.0;
    std::size_t multiplicity = 1;
};

struct LyapunovSpectrum {
    std::vector<LyapunovExponent> exponents;  // descending
    std::vector<double> analytic;             // descending
    double max_abs_error = 0.0;
    bool hyperbolic = false;
};

// Spectrum for the linear cocycle Phi(t) = diag(e^{a1 t}, e^{-a2 t}):
// lambda_i = lim (1/2t) log eig_i(Phi^T Phi), evaluated at finite t. The small
// eigenvalue comes from det / large to avoid cancellation.
inline LyapunovSpectrum lyapunov_spectrum_diagonal(double a1, double a2, double t = 50.0)
{
    const double p11 = std::exp(a1 * t);
    const double p22 = std::exp(-a2 * t);
    // Phi^T Phi, symmetric 2x2 [[a, b], [b, d]] with b = 0 for a diagonal cocycle.
    const double a = p11 * p11;
    const double d = p22 * p22;
    const double b = 0.0;
    const double half_trace = 0.5 * (a + d);
    const double r = std::hypot(0.5 * (a - d), b);
    const double big = half_trace + r;
    const double small = (a * d - b * b) / big;

    LyapunovSpectrum s;
    std::vector<double> lambdas{std::log(big) / (2.0 * t), std::log(small) / (2.0 * t)};
    s.analytic = {std::max(a1, -a2), std::min(a1, -a2)};
    if (std::abs(lambdas[0] - lambdas[1]) == 0.0) {
        s.exponents.push_back({lambdas[0], 2});
    } else {
        s.exponents.push_back({lambdas[0], 1});
        s.exponents.push_back({lambdas[1], 1});
    }
    for (std::size_t i = 0; i < 2; ++i) {
        s.max_abs_error = std::max(s.max_abs_error, std::abs(lambdas[i] - s.analytic[i]));
    }
    s.hyperbolic = std::all_of(s.exponents.begin(), s.exponents.end(),
                               [](const LyapunovExponent& e) { return e.lambda != 0.0; });
    return s;
}

// sup over 0 <= t <= 1 of ln+ ||Phi(sign*t)|| for the diagonal cocycle,
// sampled on `samples` points; the operator norm of a diagonal matrix is its
// largest entry in magnitude.
inline double log_norm_sup(double a1, double a2, int sign, int samples = 1001)
{
    double sup = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t = sign * static_cast<double>(k) / static_cast<double>(samples - 1);
        const double norm = std::max(std::exp(a1 * t), std::exp(-a2 * t));
        sup = std::max(sup, std::max(0.0, std::log(norm)));
    }
    return sup;
}

} // namespace sld
