#pragma once

// Run configuration for the sld command-line driver: a JSON document plus
// flag overrides (flags win). Validation errors name the offending field and,
// when it came from the document, its line.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sld/sld.hpp"

namespace sld::cli {

struct RunConfig {
    std::string system = "noisy_saddle";
    ParamMap params;
    GridSpec grid{-2.0, 2.0, -2.0, 2.0, 200, 200};
    double t0 = 0.0;
    double tau = 15.0;
    double dt = 0.05;
    double p = 0.5;
    std::uint64_t seed = 1;
    std::uint64_t path_id = 0;
    std::size_t M = 1;
    Direction direction = Direction::both;
    double escape_radius = kDefaultEscapeRadius;
    unsigned threads = 0;  // 0 = auto
    std::string out_dir = ".";
    bool quiet = false;

    bool write_image = true;
    bool write_csv = false;
    RenderOptions render;

    // ensemble
    bool save_members = false;
    bool distances = false;
    bool same_path = false;

    // cloud / convergence
    State x0{1.0, 1.0};
    std::size_t n_paths = 1000;
    std::vector<double> snapshots;

    // convergence
    std::vector<double> dts{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512};
    double horizon = 1.0;
    bool zero_noise = false;

    // render
    std::string input;
    std::string output;
};

// Line of the JSON member reached by following `keys` through `text`, or 0.
inline int locate_line(const std::string& text, const std::vector<std::string>& keys)
{
    std::size_t pos = 0;
    for (const auto& k : keys) {
        const std::size_t hit = text.find("\"" + k + "\"", pos);
        if (hit == std::string::npos) {
            return 0;
        }
        pos = hit + 1;
    }
    int line = 1;
    for (std::size_t i = 0; i + 1 < pos; ++i) {
        line += text[i] == '\n';
    }
    return line;
}

class ConfigReader {
public:
    explicit ConfigReader(std::string text) : text_(std::move(text)) {}

    [[noreturn]] void fail(const std::vector<std::string>& keys, const std::string& msg) const
    {
        std::string name;
        for (const auto& k : keys) {
            name += (name.empty() ? "" : ".") + k;
        }
        const int line = locate_line(text_, keys);
        throw ConfigError("config" + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": field '" +
                          name + "': " + msg);
    }

    template <typename T>
    T as(const nlohmann::json& j, const std::vector<std::string>& keys) const
    {
        try {
            return j.get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(keys, "wrong type (" + std::string(j.type_name()) + ")");
        }
    }

    double real(const nlohmann::json& j, const std::vector<std::string>& keys) const
    {
        if (!j.is_number()) {
            fail(keys, "expected a number");
        }
        return j.get<double>();
    }

    std::uint64_t count(const nlohmann::json& j, const std::vector<std::string>& keys) const
    {
        if (!j.is_number_integer() || (j.is_number_integer() && j.get<long long>() < 0)) {
            fail(keys, "expected a non-negative integer");
        }
        return j.get<std::uint64_t>();
    }

    const std::string& text() const noexcept { return text_; }

private:
    std::string text_;
};

inline std::vector<double> real_list(const ConfigReader& r, const nlohmann::json& j,
                                     const std::vector<std::string>& keys)
{
    if (!j.is_array()) {
        r.fail(keys, "expected an array of numbers");
    }
    std::vector<double> out;
    for (const auto& v : j) {
        out.push_back(r.real(v, keys));
    }
    return out;
}

// Applies every member of the JSON document onto `cfg`.
inline void apply_json(RunConfig& cfg, const std::string& text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    const ConfigReader r(text);
    for (const auto& [key, v] : doc.items()) {
        const std::vector<std::string> k{key};
        if (key == "system") {
            if (v.is_string()) {
                cfg.system = v.get<std::string>();
            } else if (v.is_object()) {
                for (const auto& [sk, sv] : v.items()) {
                    if (sk == "name") {
                        cfg.system = r.as<std::string>(sv, {key, sk});
                    } else if (sk == "params") {
                        if (!sv.is_object()) {
                            r.fail({key, sk}, "expected an object of numbers");
                        }
                        for (const auto& [pk, pv] : sv.items()) {
                            cfg.params[pk] = r.real(pv, {key, sk, pk});
                        }
                    } else {
                        r.fail({key, sk}, "unknown key");
                    }
                }
            } else {
                r.fail(k, "expected a name or {name, params}");
            }
        } else if (key == "grid") {
            if (!v.is_object()) {
                r.fail(k, "expected an object");
            }
            for (const auto& [gk, gv] : v.items()) {
                const std::vector<std::string> gkeys{key, gk};
                if (gk == "xmin") cfg.grid.xmin = r.real(gv, gkeys);
                else if (gk == "xmax") cfg.grid.xmax = r.real(gv, gkeys);
                else if (gk == "ymin") cfg.grid.ymin = r.real(gv, gkeys);
                else if (gk == "ymax") cfg.grid.ymax = r.real(gv, gkeys);
                else if (gk == "nx") cfg.grid.nx = r.count(gv, gkeys);
                else if (gk == "ny") cfg.grid.ny = r.count(gv, gkeys);
                else r.fail(gkeys, "unknown key");
            }
        } else if (key == "t0") cfg.t0 = r.real(v, k);
        else if (key == "tau") cfg.tau = r.real(v, k);
        else if (key == "dt") cfg.dt = r.real(v, k);
        else if (key == "p") cfg.p = r.real(v, k);
        else if (key == "seed") cfg.seed = r.count(v, k);
        else if (key == "path_id") cfg.path_id = r.count(v, k);
        else if (key == "M") cfg.M = r.count(v, k);
        else if (key == "direction") {
            try {
                cfg.direction = parse_direction(r.as<std::string>(v, k));
            } catch (const ConfigError& e) {
                r.fail(k, e.what());
            }
        } else if (key == "escape_radius") cfg.escape_radius = r.real(v, k);
        else if (key == "threads") {
            if (v.is_string() && v.get<std::string>() == "auto") {
                cfg.threads = 0;
            } else {
                cfg.threads = static_cast<unsigned>(r.count(v, k));
            }
        } else if (key == "out_dir") cfg.out_dir = r.as<std::string>(v, k);
        else if (key == "image") cfg.write_image = r.as<bool>(v, k);
        else if (key == "csv") cfg.write_csv = r.as<bool>(v, k);
        else if (key == "render") {
            if (!v.is_object()) {
                r.fail(k, "expected an object");
            }
            for (const auto& [rk, rv] : v.items()) {
                const std::vector<std::string> rkeys{key, rk};
                try {
                    if (rk == "normalization") cfg.render.normalization = parse_normalization(r.as<std::string>(rv, rkeys));
                    else if (rk == "colormap") cfg.render.colormap = parse_colormap(r.as<std::string>(rv, rkeys));
                    else if (rk == "lo") cfg.render.lo_percentile = r.real(rv, rkeys);
                    else if (rk == "hi") cfg.render.hi_percentile = r.real(rv, rkeys);
                    else r.fail(rkeys, "unknown key");
                } catch (const ConfigError& e) {
                    if (std::string(e.what()).rfind("config", 0) == 0) throw;
                    r.fail(rkeys, e.what());
                }
            }
        } else if (key == "save_members") cfg.save_members = r.as<bool>(v, k);
        else if (key == "distances") cfg.distances = r.as<bool>(v, k);
        else if (key == "same_path") cfg.same_path = r.as<bool>(v, k);
        else if (key == "x0") cfg.x0 = real_list(r, v, k);
        else if (key == "n_paths") cfg.n_paths = r.count(v, k);
        else if (key == "snapshots") cfg.snapshots = real_list(r, v, k);
        else if (key == "dts") cfg.dts = real_list(r, v, k);
        else if (key == "horizon") cfg.horizon = r.real(v, k);
        else if (key == "zero_noise") cfg.zero_noise = r.as<bool>(v, k);
        else if (key == "input") cfg.input = r.as<std::string>(v, k);
        else if (key == "output") cfg.output = r.as<std::string>(v, k);
        else r.fail(k, "unknown key");
    }
}

// Checks the invariants shared by every command. `source` is the config text
// (possibly empty) used to attach line numbers.
inline void validate(const RunConfig& cfg, const std::string& source = {})
{
    const ConfigReader r(source);
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) {
        r.fail({"dt"}, "must be > 0");
    }
    if (!(cfg.p > 0.0 && cfg.p <= 1.0)) {
        r.fail({"p"}, "must lie in the interval (0, 1], got " + format_real(cfg.p));
    }
    const double ratio = cfg.tau / cfg.dt;
    if (!(std::lround(ratio) >= 1)) {
        r.fail({"tau"}, "must be at least one timestep (tau/dt >= 1), got " + format_real(cfg.tau));
    }
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
        r.fail({"tau"}, "must be an integer multiple of dt");
    }
    if (cfg.grid.nx < 2) r.fail({"grid", "nx"}, "must be >= 2");
    if (cfg.grid.ny < 2) r.fail({"grid", "ny"}, "must be >= 2");
    if (!(cfg.grid.xmax > cfg.grid.xmin)) r.fail({"grid", "xmax"}, "must exceed xmin");
    if (!(cfg.grid.ymax > cfg.grid.ymin)) r.fail({"grid", "ymax"}, "must exceed ymin");
    if (cfg.M < 1) r.fail({"M"}, "must be >= 1");
    if (!(cfg.escape_radius > 0.0)) r.fail({"escape_radius"}, "must be > 0");
    if (cfg.n_paths < 1) r.fail({"n_paths"}, "must be >= 1");
    if (!(cfg.horizon > 0.0)) r.fail({"horizon"}, "must be > 0");
    if (cfg.dts.empty()) r.fail({"dts"}, "must list at least one timestep");
    try {
        (void)make_system(cfg.system, cfg.params);
    } catch (const ConfigError& e) {
        r.fail({"system"}, e.what());
    }
}

} // namespace sld::cli
