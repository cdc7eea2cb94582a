#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"

namespace {

using namespace sld;
using namespace sld::cli;

struct Overrides {
    std::string config;
    std::optional<std::string> system;
    std::vector<std::string> params;
    std::optional<double> p, tau, dt, t0, escape_radius, horizon, lo, hi;
    std::optional<std::uint64_t> seed, path_id;
    std::optional<std::size_t> nx, ny, M, n_paths;
    std::vector<double> bounds, x0, snapshots, dts;
    std::optional<std::string> direction, threads, out_dir, input, output, normalization, colormap;
    bool zero_noise = false, csv = false, no_image = false, save_members = false, distances = false,
         same_path = false, quiet = false;
};

void add_options(CLI::App* sub, Overrides& o)
{
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--system", o.system, "noisy_saddle | duffing | double_gyre");
    sub->add_option("--param", o.params, "system parameter override key=value (repeatable)");
    sub->add_option("--p", o.p, "descriptor exponent in (0, 1]");
    sub->add_option("--tau", o.tau, "integration half-window");
    sub->add_option("--dt", o.dt, "time step");
    sub->add_option("--t0", o.t0, "anchor time");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--path-id", o.path_id, "first realization index");
    sub->add_option("--nx", o.nx, "grid columns");
    sub->add_option("--ny", o.ny, "grid rows");
    sub->add_option("--bounds", o.bounds, "xmin xmax ymin ymax")->expected(4);
    sub->add_option("--M", o.M, "ensemble size");
    sub->add_option("--direction", o.direction, "both | forward | backward");
    sub->add_option("--escape-radius", o.escape_radius, "freeze trajectories beyond this magnitude");
    sub->add_option("--threads", o.threads, "worker count or 'auto'");
    sub->add_option("--out-dir", o.out_dir, "output directory");
    sub->add_option("--n-paths", o.n_paths, "number of realizations");
    sub->add_option("--x0", o.x0, "initial state")->expected(2);
    sub->add_option("--snapshots", o.snapshots, "cloud snapshot times");
    sub->add_option("--dts", o.dts, "convergence time steps, descending");
    sub->add_option("--horizon", o.horizon, "convergence horizon");
    sub->add_option("--input", o.input, "field file to render");
    sub->add_option("--output", o.output, "image file to write");
    sub->add_option("--normalization", o.normalization, "minmax | percentile");
    sub->add_option("--lo", o.lo, "low percentile");
    sub->add_option("--hi", o.hi, "high percentile");
    sub->add_option("--colormap", o.colormap, "gray | viridis");
    sub->add_flag("--zero-noise", o.zero_noise, "convergence without diffusion");
    sub->add_flag("--csv", o.csv, "also export CSV");
    sub->add_flag("--no-image", o.no_image, "skip the PPM rendering");
    sub->add_flag("--save-members", o.save_members, "write every ensemble member");
    sub->add_flag("--distances", o.distances, "write pairwise Frobenius distances");
    sub->add_flag("--same-path", o.same_path, "use one realization for every member");
    sub->add_flag("--quiet", o.quiet, "no progress output");
}

double parse_flag_real(const std::string& flag, const std::string& text)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("flag '" + flag + "': not a number: " + text);
}

std::pair<RunConfig, std::string> build_config(const Overrides& o)
{
    RunConfig cfg;
    std::string text;
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) {
            throw IoError("cannot open config " + o.config);
        }
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
        apply_json(cfg, text);
    }
    if (o.system) cfg.system = *o.system;
    for (const auto& kv : o.params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("flag '--param': expected key=value, got " + kv);
        }
        cfg.params[kv.substr(0, eq)] = parse_flag_real("--param", kv.substr(eq + 1));
    }
    if (o.p) cfg.p = *o.p;
    if (o.tau) cfg.tau = *o.tau;
    if (o.dt) cfg.dt = *o.dt;
    if (o.t0) cfg.t0 = *o.t0;
    if (o.seed) cfg.seed = *o.seed;
    if (o.path_id) cfg.path_id = *o.path_id;
    if (o.nx) cfg.grid.nx = *o.nx;
    if (o.ny) cfg.grid.ny = *o.ny;
    if (o.bounds.size() == 4) {
        cfg.grid.xmin = o.bounds[0];
        cfg.grid.xmax = o.bounds[1];
        cfg.grid.ymin = o.bounds[2];
        cfg.grid.ymax = o.bounds[3];
    }
    if (o.M) cfg.M = *o.M;
    if (o.direction) {
        try {
            cfg.direction = parse_direction(*o.direction);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("flag '--direction': ") + e.what());
        }
    }
    if (o.escape_radius) cfg.escape_radius = *o.escape_radius;
    if (o.threads) {
        if (*o.threads == "auto") {
            cfg.threads = 0;
        } else {
            const double t = parse_flag_real("--threads", *o.threads);
            if (t < 1 || t != std::floor(t)) {
                throw ConfigError("flag '--threads': must be a positive integer or 'auto'");
            }
            cfg.threads = static_cast<unsigned>(t);
        }
    }
    if (o.out_dir) cfg.out_dir = *o.out_dir;
    if (o.n_paths) cfg.n_paths = *o.n_paths;
    if (!o.x0.empty()) cfg.x0 = o.x0;
    if (!o.snapshots.empty()) cfg.snapshots = o.snapshots;
    if (!o.dts.empty()) cfg.dts = o.dts;
    if (o.horizon) cfg.horizon = *o.horizon;
    if (o.input) cfg.input = *o.input;
    if (o.output) cfg.output = *o.output;
    if (o.normalization) cfg.render.normalization = parse_normalization(*o.normalization);
    if (o.colormap) cfg.render.colormap = parse_colormap(*o.colormap);
    if (o.lo) cfg.render.lo_percentile = *o.lo;
    if (o.hi) cfg.render.hi_percentile = *o.hi;
    if (o.zero_noise) cfg.zero_noise = true;
    if (o.csv) cfg.write_csv = true;
    if (o.no_image) cfg.write_image = false;
    if (o.save_members) cfg.save_members = true;
    if (o.distances) cfg.distances = true;
    if (o.same_path) cfg.same_path = true;
    if (o.quiet) cfg.quiet = true;
    return {cfg, text};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Stochastic Lagrangian descriptor fields for SDEs"};
    app.require_subcommand(1);
    Overrides o;
    using Command = int (*)(const RunConfig&, std::ostream&);
    const std::vector<std::tuple<std::string, std::string, Command>> commands{
        {"field", "single-realization descriptor field", cmd_field},
        {"ensemble", "ensemble mean field and distances", cmd_ensemble},
        {"cloud", "trajectory cloud CSV", cmd_cloud},
        {"convergence", "Euler-Maruyama strong error study", cmd_convergence},
        {"stationary", "noisy-saddle stationary orbit statistics", cmd_stationary},
        {"render", "re-image an existing field file", cmd_render},
    };
    std::map<CLI::App*, Command> dispatch;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        add_options(sub, o);
        dispatch[sub] = fn;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }
    try {
        auto [cfg, text] = build_config(o);
        validate(cfg, text);
        for (auto& [sub, fn] : dispatch) {
            if (sub->parsed()) {
                return fn(cfg, std::cout);
            }
        }
        return kConfigError;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const RangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const IntegrationFault& e) {
        std::cerr << "numeric fault: " << e.what() << "\n";
        return kNumericFault;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIoError;
    } catch (const FormatError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIoError;
    }
}
