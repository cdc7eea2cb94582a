#pragma once

// SDE right-hand sides  dX = b(X,t) dt + sigma(X,t) dW  and the built-in
// benchmark systems. Diffusion is always evaluated as a dense n x m matrix,
// row-major: out[j*m + k] is the coefficient of dW^k in component j.

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sld/error.hpp"

namespace sld {

using State = std::vector<double>;
using ParamMap = std::map<std::string, double>;

using DriftFn = std::function<void(std::span<const double> x, double t, std::span<double> out)>;
using DiffusionFn = std::function<void(std::span<const double> x, double t, std::span<double> out)>;

class SdeSystem {
public:
    SdeSystem(std::string name, std::size_t n, std::size_t m, DriftFn drift, DiffusionFn diffusion,
              ParamMap params = {}, bool constant_diffusion = false)
        : name_(std::move(name)), n_(n), m_(m), drift_(std::move(drift)),
          diffusion_(std::move(diffusion)), params_(std::move(params)),
          constant_diffusion_(constant_diffusion)
    {
        if (n_ == 0 || m_ == 0) {
            throw ConfigError("system '" + name_ + "': dimensions must be positive");
        }
        if (!drift_ || !diffusion_) {
            throw ConfigError("system '" + name_ + "': drift and diffusion must be set");
        }
    }

    const std::string& name() const noexcept { return name_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t m() const noexcept { return m_; }
    const ParamMap& params() const noexcept { return params_; }
    // Diffusion independent of state and time; the integrator may cache it.
    bool constant_diffusion() const noexcept { return constant_diffusion_; }

    void drift(std::span<const double> x, double t, std::span<double> out) const { drift_(x, t, out); }
    void diffusion(std::span<const double> x, double t, std::span<double> out) const
    {
        diffusion_(x, t, out);
    }

    State drift(std::span<const double> x, double t) const
    {
        State out(n_);
        drift_(x, t, out);
        return out;
    }

    std::vector<double> diffusion(std::span<const double> x, double t) const
    {
        std::vector<double> out(n_ * m_);
        diffusion_(x, t, out);
        return out;
    }

    const DriftFn& drift_fn() const noexcept { return drift_; }

private:
    std::string name_;
    std::size_t n_;
    std::size_t m_;
    DriftFn drift_;
    DiffusionFn diffusion_;
    ParamMap params_;
    bool constant_diffusion_;
};

// Deterministic velocity field dx/dt = v(x, t).
struct DeterministicField {
    std::string name;
    std::size_t n = 0;
    DriftFn velocity;

    State operator()(std::span<const double> x, double t) const
    {
        State out(n);
        velocity(x, t, out);
        return out;
    }
};

struct NoisySaddleParams {
    double a1 = 1.0;
    double a2 = 1.0;
    double b1 = -1.0;
    double b2 = 1.0;
};

inline SdeSystem noisy_saddle(const NoisySaddleParams& q)
{
    if (!(q.a1 > 0.0) || !(q.a2 > 0.0)) {
        throw ConfigError("noisy_saddle: a1 and a2 must be > 0");
    }
    auto drift = [a1 = q.a1, a2 = q.a2](std::span<const double> x, double, std::span<double> out) {
        out[0] = a1 * x[0];
        out[1] = -a2 * x[1];
    };
    auto diffusion = [b1 = q.b1, b2 = q.b2](std::span<const double>, double, std::span<double> out) {
        out[0] = b1;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = b2;
    };
    return SdeSystem("noisy_saddle", 2, 2, drift, diffusion,
                     {{"a1", q.a1}, {"a2", q.a2}, {"b1", q.b1}, {"b2", q.b2}}, true);
}

inline SdeSystem noisy_saddle(double a1, double a2, double b1, double b2)
{
    return noisy_saddle(NoisySaddleParams{a1, a2, b1, b2});
}

// dX = alpha Y dt,  dY = (beta X + gamma X^3) dt + eps dW.
inline SdeSystem duffing_stochastic(double alpha, double beta, double gamma, double eps)
{
    auto drift = [alpha, beta, gamma](std::span<const double> x, double, std::span<double> out) {
        out[0] = alpha * x[1];
        out[1] = beta * x[0] + gamma * x[0] * x[0] * x[0];
    };
    auto diffusion = [eps](std::span<const double>, double, std::span<double> out) {
        out[0] = 0.0;
        out[1] = eps;
    };
    return SdeSystem("duffing", 2, 1, drift, diffusion,
                     {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"eps", eps}}, true);
}

// First-order form of  x'' = alpha x' + beta x + gamma x^3 + eps cos t.
inline DeterministicField duffing_deterministic(double alpha, double beta, double gamma, double eps)
{
    return {"duffing_deterministic", 2,
            [alpha, beta, gamma, eps](std::span<const double> x, double t, std::span<double> out) {
                out[0] = x[1];
                out[1] = alpha * x[1] + beta * x[0] + gamma * x[0] * x[0] * x[0] + eps * std::cos(t);
            }};
}

struct GyreForcing {
    double f;
    double df_dx;
};

// f(x,t) = eps sin(phi t + psi) x^2 + (1 - 2 eps sin(phi t + psi)) x
inline GyreForcing double_gyre_f(double x, double t, double eps, double phi, double psi)
{
    const double e = eps * std::sin(phi * t + psi);
    return {e * x * x + (1.0 - 2.0 * e) * x, 2.0 * e * x + (1.0 - 2.0 * e)};
}

struct DoubleGyreParams {
    double A = 0.25;
    double phi = 2.0 * std::numbers::pi;
    double psi = 0.0;
    double mu = 0.0;
    double s = 1.0;
    double alpha = 0.1;
    double eps = 0.25;
};

inline SdeSystem double_gyre_stochastic(const DoubleGyreParams& q)
{
    if (q.s == 0.0) {
        throw ConfigError("double_gyre: s must be nonzero");
    }
    auto drift = [q](std::span<const double> x, double t, std::span<double> out) {
        constexpr double pi = std::numbers::pi;
        const GyreForcing g = double_gyre_f(x[0], t, q.eps, q.phi, q.psi);
        const double arg_f = pi * g.f / q.s;
        const double arg_y = pi * x[1] / q.s;
        out[0] = -pi * q.A * std::sin(arg_f) * std::cos(arg_y) - q.mu * x[0];
        out[1] = pi * q.A * std::cos(arg_f) * std::sin(arg_y) * g.df_dx - q.mu * x[1];
    };
    auto diffusion = [alpha = q.alpha](std::span<const double>, double, std::span<double> out) {
        out[0] = alpha;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = alpha;
    };
    return SdeSystem("double_gyre", 2, 2, drift, diffusion,
                     {{"A", q.A}, {"phi", q.phi}, {"psi", q.psi}, {"mu", q.mu},
                      {"s", q.s}, {"alpha", q.alpha}, {"eps", q.eps}},
                     true);
}

inline SdeSystem double_gyre_stochastic(double A, double phi, double psi, double mu, double s,
                                        double alpha, double eps)
{
    return double_gyre_stochastic(DoubleGyreParams{A, phi, psi, mu, s, alpha, eps});
}

// Same drift, diffusion identically zero.
inline SdeSystem without_noise(const SdeSystem& sys)
{
    auto zero = [](std::span<const double>, double, std::span<double> out) {
        for (double& v : out) {
            v = 0.0;
        }
    };
    return SdeSystem(sys.name(), sys.n(), sys.m(), sys.drift_fn(), zero, sys.params(), true);
}

// The drift of an SDE viewed as a deterministic velocity field.
inline DeterministicField drift_field(const SdeSystem& sys)
{
    return {sys.name(), sys.n(), sys.drift_fn()};
}

namespace detail {

inline double take_param(ParamMap& given, const std::string& key, double fallback)
{
    auto it = given.find(key);
    if (it == given.end()) {
        return fallback;
    }
    const double v = it->second;
    given.erase(it);
    return v;
}

inline void reject_leftovers(const std::string& system, const ParamMap& leftovers)
{
    if (!leftovers.empty()) {
        throw ConfigError("system '" + system + "': unknown parameter '" + leftovers.begin()->first + "'");
    }
}

} // namespace detail

// Built-in system by name; missing parameters take the benchmark defaults.
inline SdeSystem make_system(const std::string& name, ParamMap params = {})
{
    using detail::take_param;
    if (name == "noisy_saddle") {
        NoisySaddleParams q;
        q.a1 = take_param(params, "a1", q.a1);
        q.a2 = take_param(params, "a2", q.a2);
        q.b1 = take_param(params, "b1", q.b1);
        q.b2 = take_param(params, "b2", q.b2);
        detail::reject_leftovers(name, params);
        return noisy_saddle(q);
    }
    if (name == "duffing") {
        const double alpha = take_param(params, "alpha", 1.0);
        const double beta = take_param(params, "beta", 1.0);
        const double gamma = take_param(params, "gamma", -1.0);
        const double eps = take_param(params, "eps", 0.25);
        detail::reject_leftovers(name, params);
        return duffing_stochastic(alpha, beta, gamma, eps);
    }
    if (name == "double_gyre") {
        DoubleGyreParams q;
        q.A = take_param(params, "A", q.A);
        q.phi = take_param(params, "phi", q.phi);
        q.psi = take_param(params, "psi", q.psi);
        q.mu = take_param(params, "mu", q.mu);
        q.s = take_param(params, "s", q.s);
        q.alpha = take_param(params, "alpha", q.alpha);
        q.eps = take_param(params, "eps", q.eps);
        detail::reject_leftovers(name, params);
        return double_gyre_stochastic(q);
    }
    if (name == "custom") {
        throw ConfigError("system 'custom' is reserved for library users and cannot be built by name");
    }
    throw ConfigError("unknown system '" + name + "' (expected noisy_saddle, duffing or double_gyre)");
}

} // namespace sld
