#pragma once

// Two-sided Wiener process realizations on a uniform grid anchored at t_0.
//
// A path stores increments, not positions. Increment j covers the interval
// [t_0 + j*dt, t_0 + (j+1)*dt] for j in [-backward_steps, forward_steps).
// Positions are prefix sums away from the anchor, so W(t_0) = 0 exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sld/binary_io.hpp"
#include "sld/error.hpp"
#include "sld/philox.hpp"

namespace sld {

enum class PathSide : std::uint64_t { forward = 0, backward = 1 };

// Substream tag for one (component, side) pair.
constexpr std::uint64_t path_stream_tag(std::size_t component, PathSide side) noexcept
{
    return (static_cast<std::uint64_t>(component) << 1) | static_cast<std::uint64_t>(side);
}

class WienerPath {
public:
    // `forward[c][i]` covers [t_0+i dt, t_0+(i+1) dt]; `backward[c][i]` covers
    // [t_0-(i+1) dt, t_0-i dt]. All components must have equal lengths.
    static WienerPath from_increments(double dt,
                                      const std::vector<std::vector<double>>& forward,
                                      const std::vector<std::vector<double>>& backward,
                                      std::uint64_t seed = 0, std::uint64_t path_id = 0)
    {
        if (!(dt > 0.0)) {
            throw ConfigError("wiener path: dt must be > 0");
        }
        if (forward.empty() || forward.size() != backward.size()) {
            throw ConfigError("wiener path: need matching, nonempty component lists");
        }
        const long n_fwd = static_cast<long>(forward.front().size());
        const long n_bwd = static_cast<long>(backward.front().size());
        const std::size_t stride = static_cast<std::size_t>(n_fwd + n_bwd);
        auto data = std::make_shared<std::vector<double>>(forward.size() * stride);
        for (std::size_t c = 0; c < forward.size(); ++c) {
            if (static_cast<long>(forward[c].size()) != n_fwd ||
                static_cast<long>(backward[c].size()) != n_bwd) {
                throw ConfigError("wiener path: ragged component arrays");
            }
            double* base = data->data() + c * stride + n_bwd;
            for (long i = 0; i < n_fwd; ++i) {
                base[i] = forward[c][static_cast<std::size_t>(i)];
            }
            for (long i = 0; i < n_bwd; ++i) {
                base[-i - 1] = backward[c][static_cast<std::size_t>(i)];
            }
        }
        return WienerPath(std::move(data), forward.size(), stride, n_bwd, n_fwd, n_bwd, dt, seed, path_id);
    }

    std::size_t n_components() const noexcept { return n_components_; }
    double dt() const noexcept { return dt_; }
    long forward_steps() const noexcept { return n_fwd_; }
    long backward_steps() const noexcept { return n_bwd_; }
    // Symmetric usable range; equals N for a freshly generated path.
    long n_steps() const noexcept { return std::min(n_fwd_, n_bwd_); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t path_id() const noexcept { return path_id_; }

    // Increment over [t_j, t_{j+1}].
    double increment(std::size_t component, long j) const
    {
        check_component(component);
        if (j < -n_bwd_ || j >= n_fwd_) {
            throw RangeError("wiener path: increment " + std::to_string(j) + " outside [" +
                             std::to_string(-n_bwd_) + ", " + std::to_string(n_fwd_) + ")");
        }
        return anchor(component)[j];
    }

    double forward_increment(std::size_t component, long i) const { return increment(component, i); }
    double backward_increment(std::size_t component, long i) const { return increment(component, -i - 1); }

    // All increments of one component, index 0 of the span is increment -backward_steps.
    std::span<const double> increments(std::size_t component) const
    {
        check_component(component);
        return {anchor(component) - n_bwd_, static_cast<std::size_t>(n_bwd_ + n_fwd_)};
    }

    // W(t_0 + node*dt).
    double value_at(std::size_t component, long node) const
    {
        check_component(component);
        if (node < -n_bwd_ || node > n_fwd_) {
            throw RangeError("wiener path: node " + std::to_string(node) + " outside [" +
                             std::to_string(-n_bwd_) + ", " + std::to_string(n_fwd_) + "]");
        }
        const double* a = anchor(component);
        double w = 0.0;
        if (node > 0) {
            for (long j = 0; j < node; ++j) {
                w += a[j];
            }
        } else {
            for (long j = -1; j >= node; --j) {
                w += a[j];
            }
            w = -w;
        }
        return w;
    }

    // Path view for the shifted realization theta_t omega, t = shift*dt:
    // new node s sits at old node s + shift. Storage is shared.
    WienerPath shifted(long shift) const
    {
        if (shift < -n_bwd_ || shift > n_fwd_) {
            throw RangeError("wiener path: shift " + std::to_string(shift) + " exceeds stored range");
        }
        WienerPath out = *this;
        out.offset_ = offset_ + shift;
        out.n_fwd_ = n_fwd_ - shift;
        out.n_bwd_ = n_bwd_ + shift;
        return out;
    }

private:
    WienerPath(std::shared_ptr<const std::vector<double>> data, std::size_t m, std::size_t stride,
               long offset, long n_fwd, long n_bwd, double dt, std::uint64_t seed, std::uint64_t path_id)
        : data_(std::move(data)), n_components_(m), stride_(stride), offset_(offset),
          n_fwd_(n_fwd), n_bwd_(n_bwd), dt_(dt), seed_(seed), path_id_(path_id)
    {}

    const double* anchor(std::size_t c) const noexcept
    {
        return data_->data() + c * stride_ + offset_;
    }

    void check_component(std::size_t c) const
    {
        if (c >= n_components_) {
            throw RangeError("wiener path: component " + std::to_string(c) + " out of range");
        }
    }

    friend WienerPath generate_path(std::uint64_t, std::uint64_t, std::size_t, long, double);
    friend WienerPath coarsen_path(const WienerPath&, long);

    std::shared_ptr<const std::vector<double>> data_;
    std::size_t n_components_;
    std::size_t stride_;
    long offset_;
    long n_fwd_;
    long n_bwd_;
    double dt_;
    std::uint64_t seed_;
    std::uint64_t path_id_;
};

// Deterministic in (seed, path_id): each (component, side) pair reads its own
// Philox substream, so the two sides are independent Brownian motions.
inline WienerPath generate_path(std::uint64_t seed, std::uint64_t path_id, std::size_t n_components,
                                long n_steps, double dt)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw ConfigError("generate_path: dt must be finite and > 0");
    }
    if (n_steps < 1) {
        throw ConfigError("generate_path: n_steps must be >= 1");
    }
    if (n_components < 1) {
        throw ConfigError("generate_path: n_components must be >= 1");
    }
    const std::size_t stride = 2 * static_cast<std::size_t>(n_steps);
    auto data = std::make_shared<std::vector<double>>(n_components * stride);
    const double scale = std::sqrt(dt);
    const std::uint64_t key = derive_key(seed, path_id);
    for (std::size_t c = 0; c < n_components; ++c) {
        double* base = data->data() + c * stride + n_steps;
        GaussianStream fwd(key, path_stream_tag(c, PathSide::forward));
        for (long i = 0; i < n_steps; ++i) {
            base[i] = scale * fwd();
        }
        GaussianStream bwd(key, path_stream_tag(c, PathSide::backward));
        for (long i = 0; i < n_steps; ++i) {
            base[-i - 1] = scale * bwd();
        }
    }
    return WienerPath(std::move(data), n_components, stride, n_steps, n_steps, n_steps, dt, seed, path_id);
}

inline WienerPath shift_path(const WienerPath& path, long shift_nodes) { return path.shifted(shift_nodes); }

// Coarse path with step factor*dt whose increments are sums of `factor`
// consecutive fine increments, grouped outward from the anchor.
inline WienerPath coarsen_path(const WienerPath& path, long factor)
{
    if (factor < 1) {
        throw ConfigError("coarsen_path: factor must be >= 1");
    }
    const long n_fwd = path.forward_steps() / factor;
    const long n_bwd = path.backward_steps() / factor;
    const std::size_t stride = static_cast<std::size_t>(n_fwd + n_bwd);
    auto data = std::make_shared<std::vector<double>>(path.n_components() * stride);
    for (std::size_t c = 0; c < path.n_components(); ++c) {
        const double* src = path.anchor(c);
        double* dst = data->data() + c * stride + n_bwd;
        for (long i = 0; i < n_fwd; ++i) {
            double s = 0.0;
            for (long k = 0; k < factor; ++k) {
                s += src[i * factor + k];
            }
            dst[i] = s;
        }
        for (long i = 0; i < n_bwd; ++i) {
            double s = 0.0;
            for (long k = 0; k < factor; ++k) {
                s += src[-(i * factor + k) - 1];
            }
            dst[-i - 1] = s;
        }
    }
    return WienerPath(std::move(data), path.n_components(), stride, n_bwd, n_fwd, n_bwd,
                      path.dt() * static_cast<double>(factor), path.seed(), path.path_id());
}

// Left-endpoint Ito sum  sum_{j=from}^{to-1} kernel(j) * dW_j.
// `kernel` receives the signed node index of the left endpoint.
template <typename Kernel>
double ito_quadrature(const WienerPath& path, std::size_t component, Kernel&& kernel, long from_node,
                      long to_node)
{
    if (from_node >= to_node) {
        throw RangeError("ito_quadrature: from_node must be < to_node");
    }
    if (from_node < -path.backward_steps() || to_node > path.forward_steps()) {
        throw RangeError("ito_quadrature: node range outside path");
    }
    const auto inc = path.increments(component);
    const long base = path.backward_steps();
    double sum = 0.0;
    for (long j = from_node; j < to_node; ++j) {
        sum += kernel(j) * inc[static_cast<std::size_t>(j + base)];
    }
    return sum;
}

// Path dump: "SLDW", version, m, N, dt, seed, path_id, then per component the
// N forward increments followed by the N backward increments.
inline constexpr std::uint32_t kPathFileVersion = 1;

inline void write_path(const std::string& file, const WienerPath& path)
{
    if (path.forward_steps() != path.backward_steps()) {
        throw ConfigError("write_path: only symmetric (unshifted) paths can be dumped");
    }
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + file + " for writing");
    }
    const long n = path.n_steps();
    binary::put_magic(out, "SLDW");
    binary::put<std::uint32_t>(out, kPathFileVersion);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(path.n_components()));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(n));
    binary::put<double>(out, path.dt());
    binary::put<std::uint64_t>(out, path.seed());
    binary::put<std::uint64_t>(out, path.path_id());
    for (std::size_t c = 0; c < path.n_components(); ++c) {
        for (long i = 0; i < n; ++i) {
            binary::put<double>(out, path.forward_increment(c, i));
        }
        for (long i = 0; i < n; ++i) {
            binary::put<double>(out, path.backward_increment(c, i));
        }
    }
    if (!out) {
        throw IoError("write failed: " + file);
    }
}

inline WienerPath read_path(const std::string& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + file);
    }
    binary::expect_magic(in, "SLDW");
    const auto version = binary::get<std::uint32_t>(in, "header");
    if (version != kPathFileVersion) {
        throw FormatError("unsupported path file version " + std::to_string(version));
    }
    const auto m = binary::get<std::uint32_t>(in, "header");
    const auto n = binary::get<std::uint32_t>(in, "header");
    const auto dt = binary::get<double>(in, "header");
    const auto seed = binary::get<std::uint64_t>(in, "header");
    const auto path_id = binary::get<std::uint64_t>(in, "header");
    std::vector<std::vector<double>> fwd(m, std::vector<double>(n)), bwd(m, std::vector<double>(n));
    for (std::uint32_t c = 0; c < m; ++c) {
        for (auto& v : fwd[c]) {
            v = binary::get<double>(in, "increments");
        }
        for (auto& v : bwd[c]) {
            v = binary::get<double>(in, "increments");
        }
    }
    return WienerPath::from_increments(dt, fwd, bwd, seed, path_id);
}

} // namespace sld
