#pragma once

// Euler-Maruyama stepping on the fixed grid t_i = t_0 + i*dt, forward and
// backward from the anchor, plus the closed-form noisy-saddle solution used
// as an oracle and a strong-convergence study driver.

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sld/error.hpp"
#include "sld/parallel.hpp"
#include "sld/systems.hpp"
#include "sld/wiener.hpp"

namespace sld {

enum class Direction : std::uint8_t { both = 0, forward = 1, backward = 2 };

inline const char* to_string(Direction d) noexcept
{
    switch (d) {
    case Direction::forward: return "forward";
    case Direction::backward: return "backward";
    default: return "both";
    }
}

inline Direction parse_direction(const std::string& s)
{
    if (s == "both") return Direction::both;
    if (s == "forward") return Direction::forward;
    if (s == "backward") return Direction::backward;
    throw ConfigError("direction must be one of both|forward|backward, got '" + s + "'");
}

inline constexpr double kDefaultEscapeRadius = 1e6;

// Node time without accumulated drift.
inline double node_time(double t0, double dt, long node) noexcept
{
    return std::fma(static_cast<double>(node), dt, t0);
}

class Trajectory {
public:
    Trajectory(std::size_t n, double t0, double dt, long n_backward, long n_forward, double escape_radius)
        : n_(n), t0_(t0), dt_(dt), n_bwd_(n_backward), n_fwd_(n_forward), escape_radius_(escape_radius),
          states_(n * static_cast<std::size_t>(n_backward + n_forward + 1))
    {}

    std::size_t n() const noexcept { return n_; }
    double t0() const noexcept { return t0_; }
    double dt() const noexcept { return dt_; }
    long forward_steps() const noexcept { return n_fwd_; }
    long backward_steps() const noexcept { return n_bwd_; }
    double escape_radius() const noexcept { return escape_radius_; }
    double time(long node) const noexcept { return node_time(t0_, dt_, node); }

    std::span<const double> state(long node) const
    {
        check(node);
        return {states_.data() + index(node), n_};
    }

    std::span<double> state(long node)
    {
        check(node);
        return {states_.data() + index(node), n_};
    }

    // First node, per direction, whose state left the escape box.
    std::optional<long> escaped_forward;
    std::optional<long> escaped_backward;

    bool escaped() const noexcept { return escaped_forward.has_value() || escaped_backward.has_value(); }

private:
    std::size_t index(long node) const noexcept { return static_cast<std::size_t>(node + n_bwd_) * n_; }

    void check(long node) const
    {
        if (node < -n_bwd_ || node > n_fwd_) {
            throw RangeError("trajectory: node " + std::to_string(node) + " outside stored range");
        }
    }

    std::size_t n_;
    double t0_;
    double dt_;
    long n_bwd_;
    long n_fwd_;
    double escape_radius_;
    std::vector<double> states_;
};

namespace detail {

inline bool outside_box(std::span<const double> x, double radius) noexcept
{
    for (double v : x) {
        if (std::abs(v) > radius) {
            return true;
        }
    }
    return false;
}

inline void check_finite(std::span<const double> x, long node)
{
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw IntegrationFault("non-finite state", node);
        }
    }
}

// sign = +1 for a forward step, -1 for the backward inversion.
inline void em_sweep(const SdeSystem& sys, const WienerPath& path, Trajectory& traj, long n_steps, int sign,
                     std::optional<long>& escaped_at)
{
    const std::size_t n = sys.n();
    const std::size_t m = sys.m();
    const double dt = traj.dt();
    std::vector<double> drift(n), sigma(n * m), dw(m);
    const bool cache_sigma = sys.constant_diffusion();
    if (cache_sigma) {
        sys.diffusion(traj.state(0), traj.t0(), sigma);
    }
    std::vector<std::span<const double>> inc(m);
    for (std::size_t k = 0; k < m; ++k) {
        inc[k] = path.increments(k);
    }
    const long base = path.backward_steps();

    for (long step = 0; step < n_steps; ++step) {
        const long from = sign * step;
        const long to = from + sign;
        std::span<const double> x = traj.state(from);
        std::span<double> y = traj.state(to);
        if (escaped_at) {
            std::copy(x.begin(), x.end(), y.begin());
            continue;
        }
        const double t = traj.time(from);
        sys.drift(x, t, drift);
        if (!cache_sigma) {
            sys.diffusion(x, t, sigma);
        }
        // Forward uses dW over [t_i, t_{i+1}]; backward uses [t_{i-1}, t_i].
        const long j = sign > 0 ? from : to;
        for (std::size_t k = 0; k < m; ++k) {
            dw[k] = inc[k][static_cast<std::size_t>(j + base)];
        }
        for (std::size_t r = 0; r < n; ++r) {
            double noise = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                noise += sigma[r * m + k] * dw[k];
            }
            if (sign > 0) {
                y[r] = x[r] + drift[r] * dt + noise;
            } else {
                y[r] = x[r] - drift[r] * dt - noise;
            }
        }
        check_finite(y, to);
        if (outside_box(y, traj.escape_radius())) {
            escaped_at = to;
        }
    }
}

} // namespace detail

// Euler-Maruyama trajectory over nodes [-n_steps, n_steps] (or one side only).
// The backward step inverts the forward step algebraically, evaluating b and
// sigma at the right node:
//   X_{i-1} = X_i - b(X_i, t_i) dt - sigma(X_i, t_i) dW_{[t_{i-1}, t_i]}.
inline Trajectory integrate(const SdeSystem& sys, std::span<const double> x0, double t0, const WienerPath& path,
                            long n_steps, double escape_radius = kDefaultEscapeRadius,
                            Direction direction = Direction::both)
{
    if (x0.size() != sys.n()) {
        throw ConfigError("integrate: initial state has dimension " + std::to_string(x0.size()) +
                          ", system needs " + std::to_string(sys.n()));
    }
    if (path.n_components() != sys.m()) {
        throw ConfigError("integrate: path has " + std::to_string(path.n_components()) +
                          " components, system needs " + std::to_string(sys.m()));
    }
    if (n_steps < 0) {
        throw ConfigError("integrate: n_steps must be >= 0");
    }
    const bool fwd = direction != Direction::backward;
    const bool bwd = direction != Direction::forward;
    if ((fwd && path.forward_steps() < n_steps) || (bwd && path.backward_steps() < n_steps)) {
        throw RangeError("integrate: path too short for " + std::to_string(n_steps) + " steps");
    }
    Trajectory traj(sys.n(), t0, path.dt(), bwd ? n_steps : 0, fwd ? n_steps : 0, escape_radius);
    auto s0 = traj.state(0);
    std::copy(x0.begin(), x0.end(), s0.begin());
    if (fwd) {
        detail::em_sweep(sys, path, traj, n_steps, +1, traj.escaped_forward);
    }
    if (bwd) {
        detail::em_sweep(sys, path, traj, n_steps, -1, traj.escaped_backward);
    }
    return traj;
}

// Variation-of-constants solution of the noisy saddle at `node`:
//   X_t = e^{a1 t} (x0 + int_0^t e^{-a1 s} b1 dW^1),
//   Y_t = e^{-a2 t} (y0 + int_0^t e^{a2 s} b2 dW^2),
// with t measured from the path anchor and the stochastic integrals taken as
// left-endpoint sums on the path grid.
inline State closed_form_noisy_saddle(const NoisySaddleParams& q, std::span<const double> x0,
                                      const WienerPath& path, long node)
{
    if (x0.size() != 2 || path.n_components() != 2) {
        throw ConfigError("closed_form_noisy_saddle: needs a 2-d state and a 2-component path");
    }
    if (node < -path.backward_steps() || node > path.forward_steps()) {
        throw RangeError("closed_form_noisy_saddle: node " + std::to_string(node) + " outside path");
    }
    const double dt = path.dt();
    const double t = static_cast<double>(node) * dt;
    double ix = 0.0;
    double iy = 0.0;
    if (node != 0) {
        auto kx = [&](long j) { return std::exp(-q.a1 * static_cast<double>(j) * dt) * q.b1; };
        auto ky = [&](long j) { return std::exp(q.a2 * static_cast<double>(j) * dt) * q.b2; };
        if (node > 0) {
            ix = ito_quadrature(path, 0, kx, 0, node);
            iy = ito_quadrature(path, 1, ky, 0, node);
        } else {
            ix = -ito_quadrature(path, 0, kx, node, 0);
            iy = -ito_quadrature(path, 1, ky, node, 0);
        }
    }
    return {std::exp(q.a1 * t) * (x0[0] + ix), std::exp(-q.a2 * t) * (x0[1] + iy)};
}

// Oracle evaluated on the same (possibly coarsened) path the scheme sees.
using TerminalOracle =
    std::function<State(std::span<const double> x0, double t0, const WienerPath& path, long node)>;

struct ConvergenceResult {
    std::vector<double> dts;
    std::vector<double> mean_errors;
    std::optional<double> slope;
};

// Least-squares slope of log(error) against log(dt); empty when fewer than two
// points or any error is zero.
inline std::optional<double> loglog_slope(std::span<const double> dts, std::span<const double> errors)
{
    if (dts.size() < 2 || dts.size() != errors.size()) {
        return std::nullopt;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(dts.size());
    for (std::size_t i = 0; i < dts.size(); ++i) {
        if (!(errors[i] > 0.0)) {
            return std::nullopt;
        }
        const double x = std::log(dts[i]);
        const double y = std::log(errors[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = k * sxx - sx * sx;
    if (denom == 0.0) {
        return std::nullopt;
    }
    return (k * sxy - sx * sy) / denom;
}

// Strong (pathwise) error study. One fine path per sample at dts.back() is
// generated; coarser steps sum the fine increments, so the scheme and the
// oracle see the same Brownian motion at every resolution. The error metric is
// the mean over paths of the Euclidean terminal error.
inline ConvergenceResult convergence_order(const SdeSystem& sys, const TerminalOracle& oracle,
                                           std::span<const double> x0, std::vector<double> dts,
                                           std::size_t n_paths, double horizon, std::uint64_t seed,
                                           double t0 = 0.0, unsigned threads = 1)
{
    if (dts.empty() || n_paths == 0) {
        throw ConfigError("convergence_order: need at least one dt and one path");
    }
    for (std::size_t i = 0; i < dts.size(); ++i) {
        if (!(dts[i] > 0.0)) {
            throw ConfigError("convergence_order: timesteps must be > 0");
        }
        if (i > 0 && !(dts[i] < dts[i - 1])) {
            throw ConfigError("convergence_order: timesteps must be sorted descending");
        }
    }
    const double fine_dt = dts.back();
    std::vector<long> factors, steps;
    for (double dt : dts) {
        const double ratio = dt / fine_dt;
        const long factor = std::lround(ratio);
        const double nsteps = horizon / dt;
        const long n = std::lround(nsteps);
        if (std::abs(ratio - static_cast<double>(factor)) > 1e-9 * ratio) {
            throw ConfigError("convergence_order: each dt must be an integer multiple of the finest");
        }
        if (n < 1 || std::abs(nsteps - static_cast<double>(n)) > 1e-9 * nsteps) {
            throw ConfigError("convergence_order: horizon must be a positive multiple of every dt");
        }
        factors.push_back(factor);
        steps.push_back(n);
    }
    const long fine_steps = steps.back();

    std::vector<double> per_path(n_paths * dts.size());
    parallel_for(n_paths, threads, [&](std::size_t p) {
        const WienerPath fine = generate_path(seed, p, sys.m(), fine_steps, fine_dt);
        for (std::size_t d = 0; d < dts.size(); ++d) {
            const WienerPath coarse = factors[d] == 1 ? fine : coarsen_path(fine, factors[d]);
            const Trajectory traj =
                integrate(sys, x0, t0, coarse, steps[d], std::numeric_limits<double>::infinity(),
                          Direction::forward);
            const State exact = oracle(x0, t0, coarse, steps[d]);
            const auto approx = traj.state(steps[d]);
            double e2 = 0.0;
            for (std::size_t r = 0; r < approx.size(); ++r) {
                const double diff = approx[r] - exact[r];
                e2 += diff * diff;
            }
            per_path[p * dts.size() + d] = std::sqrt(e2);
        }
    });

    ConvergenceResult result;
    result.dts = dts;
    result.mean_errors.assign(dts.size(), 0.0);
    for (std::size_t p = 0; p < n_paths; ++p) {
        for (std::size_t d = 0; d < dts.size(); ++d) {
            result.mean_errors[d] += per_path[p * dts.size() + d];
        }
    }
    for (double& e : result.mean_errors) {
        e /= static_cast<double>(n_paths);
    }
    result.slope = loglog_slope(result.dts, result.mean_errors);
    return result;
}

inline TerminalOracle noisy_saddle_oracle(const NoisySaddleParams& q)
{
    return [q](std::span<const double> x0, double, const WienerPath& path, long node) {
        return closed_form_noisy_saddle(q, x0, path, node);
    };
}

} // namespace sld
