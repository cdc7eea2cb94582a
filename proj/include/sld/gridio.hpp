#pragma once

// Field persistence, CSV export and PPM rendering.
//
// Field file layout (little endian):
//   "SLDF" | version u32 | nx u32 | ny u32 | xmin xmax ymin ymax f64
//   | p tau dt t0 f64 | name length u32 | name bytes | seed u64
//   | ensemble size u32 | direction u8
//   then nx*ny f64 values row-major, then the escape mask row-major as packed
//   bits, least significant bit first.
// Convert PPM output with any image tool, e.g. `convert field.ppm field.png`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sld/analysis.hpp"
#include "sld/binary_io.hpp"
#include "sld/colormap.hpp"
#include "sld/descriptor.hpp"
#include "sld/error.hpp"

namespace sld {

inline constexpr std::uint32_t kFieldFileVersion = 1;

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

inline void write_field(std::ostream& out, const ScalarField& f)
{
    const GridSpec& g = f.grid;
    binary::put_magic(out, "SLDF");
    binary::put<std::uint32_t>(out, kFieldFileVersion);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.nx));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.ny));
    for (double b : {g.xmin, g.xmax, g.ymin, g.ymax}) {
        binary::put<double>(out, b);
    }
    for (double v : {f.meta.p, f.meta.tau, f.meta.dt, f.meta.t0}) {
        binary::put<double>(out, v);
    }
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.meta.system.size()));
    out.write(f.meta.system.data(), static_cast<std::streamsize>(f.meta.system.size()));
    binary::put<std::uint64_t>(out, f.meta.seed);
    binary::put<std::uint32_t>(out, f.meta.ensemble_size);
    binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(f.meta.direction));
    for (double v : f.values) {
        binary::put<double>(out, v);
    }
    std::vector<std::uint8_t> bits((f.escaped.size() + 7) / 8, 0);
    for (std::size_t k = 0; k < f.escaped.size(); ++k) {
        if (f.escaped[k]) {
            bits[k / 8] = static_cast<std::uint8_t>(bits[k / 8] | (1u << (k % 8)));
        }
    }
    out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
}

inline void write_field(const std::string& file, const ScalarField& f)
{
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + file + " for writing");
    }
    write_field(out, f);
    if (!out.flush()) {
        throw IoError("write failed: " + file);
    }
}

inline ScalarField read_field(std::istream& in)
{
    binary::expect_magic(in, "SLDF");
    const auto version = binary::get<std::uint32_t>(in, "header");
    if (version != kFieldFileVersion) {
        throw VersionError("unsupported field file version " + std::to_string(version) + " (expected " +
                           std::to_string(kFieldFileVersion) + ")");
    }
    GridSpec g;
    g.nx = binary::get<std::uint32_t>(in, "header");
    g.ny = binary::get<std::uint32_t>(in, "header");
    g.xmin = binary::get<double>(in, "header");
    g.xmax = binary::get<double>(in, "header");
    g.ymin = binary::get<double>(in, "header");
    g.ymax = binary::get<double>(in, "header");
    ScalarField f(g);
    f.meta.p = binary::get<double>(in, "header");
    f.meta.tau = binary::get<double>(in, "header");
    f.meta.dt = binary::get<double>(in, "header");
    f.meta.t0 = binary::get<double>(in, "header");
    const auto name_len = binary::get<std::uint32_t>(in, "system name");
    f.meta.system.resize(name_len);
    if (name_len > 0 && !in.read(f.meta.system.data(), name_len)) {
        throw FormatError("truncated file: missing system name");
    }
    f.meta.seed = binary::get<std::uint64_t>(in, "header");
    f.meta.ensemble_size = binary::get<std::uint32_t>(in, "header");
    const auto dir = binary::get<std::uint8_t>(in, "header");
    if (dir > 2) {
        throw FormatError("bad direction code " + std::to_string(dir));
    }
    f.meta.direction = static_cast<Direction>(dir);
    for (double& v : f.values) {
        v = binary::get<double>(in, "values");
    }
    std::vector<std::uint8_t> bits((f.escaped.size() + 7) / 8);
    if (!bits.empty() &&
        !in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()))) {
        throw FormatError("truncated file: missing escape mask");
    }
    for (std::size_t k = 0; k < f.escaped.size(); ++k) {
        f.escaped[k] = (bits[k / 8] >> (k % 8)) & 1u;
    }
    return f;
}

inline ScalarField read_field(const std::string& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + file);
    }
    return read_field(in);
}

enum class Normalization { minmax, percentile };
enum class Colormap { gray, viridis };

struct RenderOptions {
    Normalization normalization = Normalization::percentile;
    double lo_percentile = 2.0;
    double hi_percentile = 98.0;
    Colormap colormap = Colormap::viridis;
    Rgb escaped_color{192, 192, 192};
};

inline Normalization parse_normalization(const std::string& s)
{
    if (s == "minmax") return Normalization::minmax;
    if (s == "percentile") return Normalization::percentile;
    throw ConfigError("normalization must be minmax or percentile, got '" + s + "'");
}

inline Colormap parse_colormap(const std::string& s)
{
    if (s == "gray") return Colormap::gray;
    if (s == "viridis") return Colormap::viridis;
    throw ConfigError("colormap must be gray or viridis, got '" + s + "'");
}

// Binary PPM (P6), one pixel per cell, image row 0 = ymax.
inline std::string render_ppm(const ScalarField& f, const RenderOptions& opt = {})
{
    const GridSpec& g = f.grid;
    if (g.nx < 2 || g.ny < 2) {
        throw ConfigError("render: field must be at least 2x2");
    }
    std::vector<double> live;
    live.reserve(f.values.size());
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        if (!f.escaped[k]) {
            live.push_back(f.values[k]);
        }
    }
    double lo = 0.0, hi = 0.0;
    if (!live.empty()) {
        if (opt.normalization == Normalization::minmax) {
            const auto [a, b] = std::minmax_element(live.begin(), live.end());
            lo = *a;
            hi = *b;
        } else {
            if (!(opt.lo_percentile >= 0.0 && opt.lo_percentile < opt.hi_percentile && opt.hi_percentile <= 100.0)) {
                throw ConfigError("render: percentiles must satisfy 0 <= lo < hi <= 100");
            }
            lo = detail::percentile(live, opt.lo_percentile);
            hi = detail::percentile(live, opt.hi_percentile);
        }
    }
    const bool degenerate = !(hi > lo);
    std::string out = "P6\n" + std::to_string(g.nx) + " " + std::to_string(g.ny) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + 3 * g.nx * g.ny);
    char* px = out.data() + header;
    for (std::size_t r = 0; r < g.ny; ++r) {
        const std::size_t i = g.ny - 1 - r;
        for (std::size_t j = 0; j < g.nx; ++j) {
            Rgb c;
            if (f.escaped_at(i, j)) {
                c = opt.escaped_color;
            } else if (degenerate) {
                c = {128, 128, 128};
            } else {
                const double t = std::clamp((f.at(i, j) - lo) / (hi - lo), 0.0, 1.0);
                const auto idx = static_cast<std::size_t>(std::lround(t * 255.0));
                if (opt.colormap == Colormap::gray) {
                    const auto v = static_cast<std::uint8_t>(idx);
                    c = {v, v, v};
                } else {
                    c = kViridis[idx];
                }
            }
            *px++ = static_cast<char>(c.r);
            *px++ = static_cast<char>(c.g);
            *px++ = static_cast<char>(c.b);
        }
    }
    return out;
}

inline void render_image(const ScalarField& f, const std::string& file, const RenderOptions& opt = {})
{
    const std::string bytes = render_ppm(f, opt);
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + file + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) {
        throw IoError("write failed: " + file);
    }
}

inline std::string format_real(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void export_csv(const ScalarField& f, std::ostream& out)
{
    out << "x,y,value,escaped\n";
    for (std::size_t i = 0; i < f.grid.ny; ++i) {
        const std::string y = format_real(f.grid.y(i));
        for (std::size_t j = 0; j < f.grid.nx; ++j) {
            out << format_real(f.grid.x(j)) << ',' << y << ',' << format_real(f.at(i, j)) << ','
                << (f.escaped_at(i, j) ? 1 : 0) << '\n';
        }
    }
}

inline void export_csv(const ScalarField& f, const std::string& file)
{
    std::ofstream out(file);
    if (!out) {
        throw IoError("cannot open " + file + " for writing");
    }
    export_csv(f, out);
    if (!out.flush()) {
        throw IoError("write failed: " + file);
    }
}

// node,t,<x0..x{n-1}>,escaped
inline void export_trajectory_csv(const Trajectory& traj, std::ostream& out)
{
    out << "node,t";
    for (std::size_t c = 0; c < traj.n(); ++c) {
        out << ",x" << c;
    }
    out << ",escaped\n";
    for (long node = -traj.backward_steps(); node <= traj.forward_steps(); ++node) {
        const bool esc = node >= 0 ? (traj.escaped_forward && *traj.escaped_forward <= node)
                                   : (traj.escaped_backward && *traj.escaped_backward >= node);
        out << node << ',' << format_real(traj.time(node));
        for (double v : traj.state(node)) {
            out << ',' << format_real(v);
        }
        out << ',' << (esc ? 1 : 0) << '\n';
    }
}

// path_id,t,x,y,escaped for 2-d clouds.
inline void export_cloud_csv(std::span<const CloudPoint> cloud, std::ostream& out)
{
    out << "path_id,t,x,y,escaped\n";
    for (const CloudPoint& c : cloud) {
        if (c.state.size() != 2) {
            throw ConfigError("cloud csv needs 2-d states");
        }
        out << c.path_id << ',' << format_real(c.t) << ',' << format_real(c.state[0]) << ','
            << format_real(c.state[1]) << ',' << (c.escaped ? 1 : 0) << '\n';
    }
}

} // namespace sld
