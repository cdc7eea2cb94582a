#pragma once

// Subcommand implementations. Each returns a process exit code:
// 0 success, 2 config error, 3 numeric fault, 4 IO error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "run_config.hpp"
#include "sld/sld.hpp"

namespace sld::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericFault = 3, kIoError = 4 };

namespace detail {

inline std::string out_path(const RunConfig& cfg, const std::string& name)
{
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline void ensure_out_dir(const RunConfig& cfg)
{
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
    }
}

inline ProgressFn progress_reporter(const RunConfig& cfg, const std::string& label)
{
    if (cfg.quiet) {
        return {};
    }
    return [label](std::size_t done, std::size_t total) {
        const std::size_t step = std::max<std::size_t>(1, total / 10);
        if (done % step == 0 || done == total) {
            std::cerr << label << ": rows " << done << "/" << total << "\n";
        }
    };
}

inline void field_summary(std::ostream& out, const ScalarField& f)
{
    const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
    out << " nx=" << f.grid.nx << " ny=" << f.grid.ny << " min=" << format_real(*lo)
        << " max=" << format_real(*hi) << " escaped=" << f.escaped_count();
}

inline long steps_for(const RunConfig& cfg) { return descriptor_steps(cfg.tau, cfg.dt); }

inline NoisySaddleParams saddle_params(const RunConfig& cfg)
{
    if (cfg.system != "noisy_saddle") {
        throw ConfigError("config: field 'system': this command needs the closed-form noisy_saddle, got '" +
                          cfg.system + "'");
    }
    const SdeSystem sys = make_system(cfg.system, cfg.params);
    return {sys.params().at("a1"), sys.params().at("a2"), sys.params().at("b1"), sys.params().at("b2")};
}

inline ScalarField compute_field(const RunConfig& cfg, const SdeSystem& sys, std::uint64_t path_id,
                                 const std::string& label)
{
    const long n = steps_for(cfg);
    const WienerPath path = generate_path(cfg.seed, path_id, sys.m(), n, cfg.dt);
    return msp_field(sys, cfg.grid, cfg.t0, cfg.tau, cfg.p, path, cfg.direction, cfg.escape_radius, cfg.threads,
                     progress_reporter(cfg, label));
}

} // namespace detail

inline int cmd_field(const RunConfig& cfg, std::ostream& out)
{
    const SdeSystem sys = make_system(cfg.system, cfg.params);
    detail::ensure_out_dir(cfg);
    const ScalarField f = detail::compute_field(cfg, sys, cfg.path_id, "field");
    const std::string file = detail::out_path(cfg, "field.sldf");
    write_field(file, f);
    out << "command=field file=" << file;
    if (cfg.write_image) {
        const std::string img = detail::out_path(cfg, "field.ppm");
        render_image(f, img, cfg.render);
        out << " image=" << img;
    }
    if (cfg.write_csv) {
        const std::string csv = detail::out_path(cfg, "field.csv");
        export_csv(f, csv);
        out << " csv=" << csv;
    }
    detail::field_summary(out, f);
    out << "\n";
    return kOk;
}

inline int cmd_ensemble(const RunConfig& cfg, std::ostream& out)
{
    const SdeSystem sys = make_system(cfg.system, cfg.params);
    detail::ensure_out_dir(cfg);
    std::vector<ScalarField> members;
    members.reserve(cfg.M);
    for (std::size_t k = 0; k < cfg.M; ++k) {
        const std::uint64_t id = cfg.same_path ? cfg.path_id : cfg.path_id + k;
        members.push_back(detail::compute_field(cfg, sys, id, "member " + std::to_string(k)));
        if (cfg.save_members) {
            char name[32];
            std::snprintf(name, sizeof name, "member_%03zu.sldf", k);
            write_field(detail::out_path(cfg, name), members.back());
        }
    }
    const ScalarField mean = ensemble_mean(members);
    const std::string file = detail::out_path(cfg, "ensemble_mean.sldf");
    write_field(file, mean);
    out << "command=ensemble file=" << file << " M=" << cfg.M;
    if (cfg.write_image) {
        const std::string img = detail::out_path(cfg, "ensemble_mean.ppm");
        render_image(mean, img, cfg.render);
        out << " image=" << img;
    }
    if (cfg.write_csv) {
        export_csv(mean, detail::out_path(cfg, "ensemble_mean.csv"));
    }
    if (cfg.distances) {
        const std::string dfile = detail::out_path(cfg, "distances.csv");
        std::ofstream d(dfile);
        if (!d) {
            throw IoError("cannot open " + dfile + " for writing");
        }
        d << "i,j,distance\n";
        double max_d = 0.0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                const double dist = frobenius_distance(members[i], members[j]);
                max_d = std::max(max_d, dist);
                d << i << ',' << j << ',' << format_real(dist) << '\n';
            }
        }
        out << " distances=" << dfile << " max_distance=" << format_real(max_d);
    }
    detail::field_summary(out, mean);
    out << "\n";
    return kOk;
}

inline int cmd_cloud(const RunConfig& cfg, std::ostream& out)
{
    const SdeSystem sys = make_system(cfg.system, cfg.params);
    if (cfg.x0.size() != sys.n()) {
        throw ConfigError("config: field 'x0': needs " + std::to_string(sys.n()) + " components");
    }
    detail::ensure_out_dir(cfg);
    std::vector<long> nodes;
    double tau = cfg.tau;
    Direction dir = cfg.direction;
    if (!cfg.snapshots.empty()) {
        double reach = 0.0;
        bool neg = false, pos = false;
        for (double t : cfg.snapshots) {
            const double ratio = t / cfg.dt;
            if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, std::abs(ratio))) {
                throw ConfigError("config: field 'snapshots': times must be multiples of dt");
            }
            nodes.push_back(std::lround(ratio));
            reach = std::max(reach, std::abs(t));
            neg = neg || t < 0;
            pos = pos || t > 0;
        }
        if (reach == 0.0) {
            throw ConfigError("config: field 'snapshots': need at least one nonzero time");
        }
        tau = reach;
        dir = neg && pos ? Direction::both : (neg ? Direction::backward : Direction::forward);
    }
    const auto cloud = trajectory_cloud(sys, cfg.x0, cfg.t0, tau, cfg.dt, cfg.n_paths, cfg.seed, dir, nodes,
                                        cfg.escape_radius, cfg.threads);
    const std::string file = detail::out_path(cfg, "cloud.csv");
    std::ofstream csv(file);
    if (!csv) {
        throw IoError("cannot open " + file + " for writing");
    }
    export_cloud_csv(cloud, csv);
    std::size_t escaped = 0;
    for (const auto& c : cloud) {
        escaped += c.escaped;
    }
    out << "command=cloud file=" << file << " rows=" << cloud.size() << " n_paths=" << cfg.n_paths
        << " escaped=" << escaped << "\n";
    return kOk;
}

inline int cmd_convergence(const RunConfig& cfg, std::ostream& out)
{
    NoisySaddleParams q = detail::saddle_params(cfg);
    if (cfg.zero_noise) {
        q.b1 = 0.0;
        q.b2 = 0.0;
    }
    if (cfg.x0.size() != 2) {
        throw ConfigError("config: field 'x0': needs 2 components");
    }
    detail::ensure_out_dir(cfg);
    const SdeSystem sys = noisy_saddle(q);
    const ConvergenceResult res = convergence_order(sys, noisy_saddle_oracle(q), cfg.x0, cfg.dts,
                                                    cfg.n_paths, cfg.horizon, cfg.seed, cfg.t0, cfg.threads);
    const std::string file = detail::out_path(cfg, "convergence.csv");
    std::ofstream csv(file);
    if (!csv) {
        throw IoError("cannot open " + file + " for writing");
    }
    csv << "dt,mean_error\n";
    for (std::size_t i = 0; i < res.dts.size(); ++i) {
        csv << format_real(res.dts[i]) << ',' << format_real(res.mean_errors[i]) << '\n';
    }
    out << "command=convergence file=" << file << " n_dts=" << res.dts.size() << " n_paths=" << cfg.n_paths
        << " slope=" << (res.slope ? format_real(*res.slope) : std::string("undefined")) << "\n";
    return kOk;
}

inline int cmd_stationary(const RunConfig& cfg, std::ostream& out)
{
    const NoisySaddleParams q = detail::saddle_params(cfg);
    detail::ensure_out_dir(cfg);
    const long n = detail::steps_for(cfg);
    const StationaryOrbitEstimate own = stationary_orbit_estimate(q, generate_path(cfg.seed, cfg.path_id, 2, n, cfg.dt));
    out << "command=stationary x_tilde=" << format_real(own.x_tilde) << " y_tilde=" << format_real(own.y_tilde)
        << " path_id=" << cfg.path_id;
    if (cfg.n_paths >= 2) {
        const StationaryStatistics st = stationary_statistics(q, cfg.n_paths, cfg.seed, cfg.dt, n, cfg.threads);
        const std::string file = detail::out_path(cfg, "stationary.csv");
        std::ofstream csv(file);
        if (!csv) {
            throw IoError("cannot open " + file + " for writing");
        }
        csv << "path_id,x_tilde,y_tilde\n";
        for (const auto& s : st.samples) {
            csv << s.path_id << ',' << format_real(s.x_tilde) << ',' << format_real(s.y_tilde) << '\n';
        }
        out << " file=" << file << " n_paths=" << cfg.n_paths << " mean_x=" << format_real(st.mean[0])
            << " mean_y=" << format_real(st.mean[1]) << " var_x=" << format_real(st.variance[0])
            << " var_y=" << format_real(st.variance[1]);
    }
    out << "\n";
    return kOk;
}

inline int cmd_render(const RunConfig& cfg, std::ostream& out)
{
    if (cfg.input.empty()) {
        throw ConfigError("config: field 'input': render needs an input field file");
    }
    const ScalarField f = read_field(cfg.input);
    std::string target = cfg.output;
    if (target.empty()) {
        detail::ensure_out_dir(cfg);
        target = detail::out_path(cfg, std::filesystem::path(cfg.input).stem().string() + ".ppm");
    }
    render_image(f, target, cfg.render);
    out << "command=render input=" << cfg.input << " image=" << target;
    detail::field_summary(out, f);
    out << "\n";
    return kOk;
}

} // namespace sld::cli
