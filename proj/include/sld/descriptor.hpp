#pragma once

// Stochastic Lagrangian descriptor
//   MS_p(x0, t0, tau, omega) = sum_{i=-N}^{N-1} sum_c |X^c_{i+1} - X^c_i|^p
// with tau = N*dt and p in (0, 1]. The inner p-power sum has no outer root.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sld/error.hpp"
#include "sld/integrator.hpp"
#include "sld/parallel.hpp"
#include "sld/systems.hpp"
#include "sld/wiener.hpp"

namespace sld {

struct GridSpec {
    double xmin = -1.0;
    double xmax = 1.0;
    double ymin = -1.0;
    double ymax = 1.0;
    std::size_t nx = 2;
    std::size_t ny = 2;

    // Column j -> x; the last column lands exactly on xmax.
    double x(std::size_t j) const noexcept
    {
        if (j + 1 == nx) {
            return xmax;
        }
        return xmin + static_cast<double>(j) * ((xmax - xmin) / static_cast<double>(nx - 1));
    }

    double y(std::size_t i) const noexcept
    {
        if (i + 1 == ny) {
            return ymax;
        }
        return ymin + static_cast<double>(i) * ((ymax - ymin) / static_cast<double>(ny - 1));
    }

    double dx() const noexcept { return (xmax - xmin) / static_cast<double>(nx - 1); }
    double dy() const noexcept { return (ymax - ymin) / static_cast<double>(ny - 1); }

    void validate() const
    {
        if (nx < 2 || ny < 2) {
            throw ConfigError("grid: nx and ny must be >= 2");
        }
        if (!(xmax > xmin) || !(ymax > ymin)) {
            throw ConfigError("grid: bounds must satisfy xmin < xmax and ymin < ymax");
        }
    }

    bool operator==(const GridSpec&) const = default;
};

struct FieldMeta {
    double p = 1.0;
    double tau = 0.0;
    double dt = 0.0;
    double t0 = 0.0;
    std::string system;
    ParamMap params;
    std::uint64_t seed = 0;
    std::uint64_t path_id = 0;
    std::uint32_t ensemble_size = 1;
    Direction direction = Direction::both;
};

// Row-major ny x nx grid of descriptor values; row i is y(i), column j is x(j).
struct ScalarField {
    GridSpec grid;
    std::vector<double> values;
    std::vector<std::uint8_t> escaped;
    FieldMeta meta;

    ScalarField() = default;
    explicit ScalarField(const GridSpec& g)
        : grid(g), values(g.nx * g.ny, 0.0), escaped(g.nx * g.ny, 0)
    {}

    double& at(std::size_t i, std::size_t j) { return values[i * grid.nx + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * grid.nx + j]; }
    bool escaped_at(std::size_t i, std::size_t j) const { return escaped[i * grid.nx + j] != 0; }

    std::size_t escaped_count() const
    {
        std::size_t k = 0;
        for (auto e : escaped) {
            k += e != 0;
        }
        return k;
    }
};

struct DescriptorValue {
    double value = 0.0;
    bool escaped = false;
};

// Number of grid steps N with tau = N*dt; rejects tau that is not a multiple.
inline long descriptor_steps(double tau, double dt)
{
    if (!(dt > 0.0)) {
        throw ConfigError("dt must be > 0");
    }
    const double ratio = tau / dt;
    const long n = std::lround(ratio);
    if (n < 1) {
        throw ConfigError("tau must be at least one timestep (tau/dt >= 1)");
    }
    if (std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio)) {
        throw ConfigError("tau must be an integer multiple of dt");
    }
    return n;
}

inline void check_exponent(double p)
{
    if (!(p > 0.0 && p <= 1.0)) {
        throw ConfigError("p must lie in the interval (0, 1], got " + std::to_string(p));
    }
}

namespace detail {

inline double increment_term(std::span<const double> a, std::span<const double> b, double p) noexcept
{
    double term = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double d = std::abs(b[c] - a[c]);
        term += p == 1.0 ? d : std::pow(d, p);
    }
    return term;
}

} // namespace detail

struct DescriptorSums {
    double forward = 0.0;
    double backward = 0.0;
};

// Forward part sums i = 0..N-1 outward, backward part i = -1..-N outward, so
// each partial sum is nondecreasing in N.
inline DescriptorSums descriptor_sums(const Trajectory& traj, double p)
{
    DescriptorSums s;
    for (long i = 0; i < traj.forward_steps(); ++i) {
        s.forward += detail::increment_term(traj.state(i), traj.state(i + 1), p);
    }
    for (long i = -1; i >= -traj.backward_steps(); --i) {
        s.backward += detail::increment_term(traj.state(i), traj.state(i + 1), p);
    }
    return s;
}

inline double combine(const DescriptorSums& s, Direction d) noexcept
{
    switch (d) {
    case Direction::forward: return s.forward;
    case Direction::backward: return s.backward;
    default: return s.forward + s.backward;
    }
}

inline DescriptorValue msp_point(const SdeSystem& sys, std::span<const double> x0, double t0, double tau, double p,
                                 const WienerPath& path, Direction direction = Direction::both,
                                 double escape_radius = kDefaultEscapeRadius)
{
    check_exponent(p);
    const long n = descriptor_steps(tau, path.dt());
    const Trajectory traj = integrate(sys, x0, t0, path, n, escape_radius, direction);
    return {combine(descriptor_sums(traj, p), direction), traj.escaped()};
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

namespace detail {

template <typename PointFn>
ScalarField fill_field(const GridSpec& grid, unsigned threads, const ProgressFn& progress, PointFn&& point)
{
    grid.validate();
    ScalarField field(grid);
    std::atomic<std::size_t> rows_done{0};
    std::mutex progress_mutex;
    parallel_for(grid.ny, threads, [&](std::size_t i) {
        State x0(2);
        x0[1] = grid.y(i);
        for (std::size_t j = 0; j < grid.nx; ++j) {
            x0[0] = grid.x(j);
            const DescriptorValue v = point(x0);
            field.values[i * grid.nx + j] = v.value;
            field.escaped[i * grid.nx + j] = v.escaped ? 1 : 0;
        }
        const std::size_t done = rows_done.fetch_add(1) + 1;
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(done, grid.ny);
        }
    });
    return field;
}

} // namespace detail

// One realization omega for the whole grid. Rows are independent work units.
inline ScalarField msp_field(const SdeSystem& sys, const GridSpec& grid, double t0, double tau, double p,
                             const WienerPath& path, Direction direction = Direction::both,
                             double escape_radius = kDefaultEscapeRadius, unsigned threads = 1,
                             const ProgressFn& progress = {})
{
    check_exponent(p);
    if (sys.n() != 2) {
        throw ConfigError("msp_field: grids need a 2-d system");
    }
    const long n = descriptor_steps(tau, path.dt());
    if ((direction != Direction::backward && path.forward_steps() < n) ||
        (direction != Direction::forward && path.backward_steps() < n)) {
        throw RangeError("msp_field: path shorter than tau");
    }
    ScalarField field = detail::fill_field(grid, threads, progress, [&](const State& x0) {
        const Trajectory traj = integrate(sys, x0, t0, path, n, escape_radius, direction);
        return DescriptorValue{combine(descriptor_sums(traj, p), direction), traj.escaped()};
    });
    field.meta = {p, tau, path.dt(), t0, sys.name(), sys.params(), path.seed(), path.path_id(), 1, direction};
    return field;
}

// Explicit Euler orbit of a deterministic field, same grid and stepping rule
// as the stochastic integrator with sigma = 0.
inline Trajectory euler_orbit(const DeterministicField& field, std::span<const double> x0, double t0, double dt,
                              long n_steps, double escape_radius = kDefaultEscapeRadius,
                              Direction direction = Direction::both)
{
    if (x0.size() != field.n) {
        throw ConfigError("euler_orbit: dimension mismatch");
    }
    const bool fwd = direction != Direction::backward;
    const bool bwd = direction != Direction::forward;
    Trajectory traj(field.n, t0, dt, bwd ? n_steps : 0, fwd ? n_steps : 0, escape_radius);
    std::copy(x0.begin(), x0.end(), traj.state(0).begin());
    std::vector<double> v(field.n);
    for (int sign : {+1, -1}) {
        if ((sign > 0 && !fwd) || (sign < 0 && !bwd)) {
            continue;
        }
        std::optional<long>& escaped_at = sign > 0 ? traj.escaped_forward : traj.escaped_backward;
        for (long step = 0; step < n_steps; ++step) {
            const long from = sign * step;
            const long to = from + sign;
            auto x = std::as_const(traj).state(from);
            auto y = traj.state(to);
            if (escaped_at) {
                std::copy(x.begin(), x.end(), y.begin());
                continue;
            }
            field.velocity(x, traj.time(from), v);
            for (std::size_t r = 0; r < field.n; ++r) {
                y[r] = sign > 0 ? x[r] + v[r] * dt : x[r] - v[r] * dt;
            }
            detail::check_finite(y, to);
            if (detail::outside_box(y, escape_radius)) {
                escaped_at = to;
            }
        }
    }
    return traj;
}

// Discrete M_p of a deterministic field (MD_p of its Euler orbit).
inline ScalarField mp_deterministic_field(const DeterministicField& velocity, const GridSpec& grid, double t0,
                                          double tau, double p, double dt, Direction direction = Direction::both,
                                          double escape_radius = kDefaultEscapeRadius, unsigned threads = 1)
{
    check_exponent(p);
    if (velocity.n != 2) {
        throw ConfigError("mp_deterministic_field: grids need a 2-d field");
    }
    const long n = descriptor_steps(tau, dt);
    ScalarField field = detail::fill_field(grid, threads, {}, [&](const State& x0) {
        const Trajectory traj = euler_orbit(velocity, x0, t0, dt, n, escape_radius, direction);
        return DescriptorValue{combine(descriptor_sums(traj, p), direction), traj.escaped()};
    });
    field.meta = {p, tau, dt, t0, velocity.name, {}, 0, 0, 1, direction};
    return field;
}

inline void check_same_shape(const ScalarField& a, const ScalarField& b, const char* what)
{
    if (!(a.grid == b.grid) || a.values.size() != b.values.size()) {
        throw ConfigError(std::string(what) + ": fields have different grids");
    }
}

// Pointwise mean in member order, computed as a running mean so that the mean
// of identical members reproduces them exactly. A cell is flagged escaped if
// any member escaped there.
inline ScalarField ensemble_mean(std::span<const ScalarField> fields)
{
    if (fields.empty()) {
        throw ConfigError("ensemble_mean: no fields");
    }
    const ScalarField& first = fields.front();
    for (const ScalarField& f : fields) {
        check_same_shape(first, f, "ensemble_mean");
        const FieldMeta& a = first.meta;
        const FieldMeta& b = f.meta;
        if (a.p != b.p || a.tau != b.tau || a.dt != b.dt || a.t0 != b.t0 || a.system != b.system ||
            a.direction != b.direction) {
            throw ConfigError("ensemble_mean: members differ in p, tau, dt, t0, system or direction");
        }
    }
    ScalarField mean = first;
    for (std::size_t k = 1; k < fields.size(); ++k) {
        const double weight = 1.0 / static_cast<double>(k + 1);
        const ScalarField& f = fields[k];
        for (std::size_t c = 0; c < mean.values.size(); ++c) {
            mean.values[c] += (f.values[c] - mean.values[c]) * weight;
            mean.escaped[c] = static_cast<std::uint8_t>(mean.escaped[c] | f.escaped[c]);
        }
    }
    mean.meta.ensemble_size = static_cast<std::uint32_t>(fields.size());
    mean.meta.path_id = 0;
    return mean;
}

inline double frobenius_distance(const ScalarField& a, const ScalarField& b)
{
    check_same_shape(a, b, "frobenius_distance");
    double s = 0.0;
    for (std::size_t c = 0; c < a.values.size(); ++c) {
        const double d = a.values[c] - b.values[c];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace sld
