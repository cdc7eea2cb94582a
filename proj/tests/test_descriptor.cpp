#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "sld/descriptor.hpp"

using namespace sld;

namespace {

SdeSystem zero_system()
{
    return SdeSystem(
        "zero", 2, 2, [](std::span<const double>, double, std::span<double> out) { out[0] = out[1] = 0.0; },
        [](std::span<const double>, double, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); });
}

ScalarField filled(const GridSpec& g, std::uint64_t seed)
{
    ScalarField f(g);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 5);
    for (double& v : f.values) {
        v = u(rng);
    }
    return f;
}

// Independent MD_p oracle: plain loop over a stored orbit.
double md_p(const std::vector<State>& orbit, double p)
{
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < orbit.size(); ++i) {
        for (std::size_t c = 0; c < orbit[i].size(); ++c) {
            s += std::pow(std::abs(orbit[i + 1][c] - orbit[i][c]), p);
        }
    }
    return s;
}

} // namespace

TEST(GridSpec, NodesHitBoundsExactly)
{
    const GridSpec g{-2, 2, -1, 3, 201, 7};
    EXPECT_EQ(g.x(0), -2.0);
    EXPECT_EQ(g.x(200), 2.0);
    EXPECT_EQ(g.y(0), -1.0);
    EXPECT_EQ(g.y(6), 3.0);
    EXPECT_NEAR(g.x(100), 0.0, 1e-15);
    EXPECT_THROW((GridSpec{0, 1, 0, 1, 1, 5}.validate()), ConfigError);
    EXPECT_THROW((GridSpec{1, 0, 0, 1, 5, 5}.validate()), ConfigError);
}

TEST(DescriptorSteps, ValidatesTau)
{
    EXPECT_EQ(descriptor_steps(15.0, 0.05), 300);
    EXPECT_EQ(descriptor_steps(0.05, 0.05), 1);
    EXPECT_THROW(descriptor_steps(0.0, 0.05), ConfigError);
    EXPECT_THROW(descriptor_steps(0.12, 0.05), ConfigError);
    EXPECT_THROW(descriptor_steps(1.0, 0.0), ConfigError);
}

TEST(MspPoint, ZeroSystemGivesZero)
{
    const WienerPath p = generate_path(1, 0, 2, 20, 0.05);
    const DescriptorValue v = msp_point(zero_system(), State{0.1, 0.2}, 0.0, 1.0, 0.5, p);
    EXPECT_EQ(v.value, 0.0);
    EXPECT_FALSE(v.escaped);
}

TEST(MspPoint, RejectsBadExponent)
{
    const WienerPath p = generate_path(1, 0, 2, 20, 0.05);
    for (double bad : {0.0, -0.5, 1.5}) {
        EXPECT_THROW(msp_point(zero_system(), State{0, 0}, 0.0, 1.0, bad, p), ConfigError);
    }
    try {
        check_exponent(1.5);
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("(0, 1]"), std::string::npos);
    }
    EXPECT_NO_THROW(msp_point(zero_system(), State{0, 0}, 0.0, 1.0, 1.0, p));
}

TEST(MspPoint, MatchesLoopOracle)
{
    const double dt = 0.05;
    const WienerPath p = generate_path(9, 0, 1, 60, dt);
    const SdeSystem d = duffing_stochastic(1, 1, -1, 0.25);
    const Trajectory tr = integrate(d, State{0.3, -0.1}, 0.0, p, 60);
    std::vector<State> fwd, bwd;
    for (long k = 0; k <= 60; ++k) {
        fwd.emplace_back(tr.state(k).begin(), tr.state(k).end());
        bwd.emplace_back(tr.state(-k).begin(), tr.state(-k).end());
    }
    for (double pexp : {0.5, 1.0, 0.1}) {
        const double f = msp_point(d, State{0.3, -0.1}, 0.0, 3.0, pexp, p, Direction::forward).value;
        const double b = msp_point(d, State{0.3, -0.1}, 0.0, 3.0, pexp, p, Direction::backward).value;
        EXPECT_NEAR(f, md_p(fwd, pexp), 1e-12 * f);
        EXPECT_NEAR(b, md_p(bwd, pexp), 1e-12 * b);
    }
}

TEST(MspPoint, ReducesToDeterministicDescriptorWithoutNoise)
{
    const SdeSystem g = double_gyre_stochastic(0.25, 2 * std::numbers::pi, 0, 0, 1, 0.0, 0.25);
    const DeterministicField v = drift_field(g);
    const WienerPath p = generate_path(2, 0, 2, 100, 0.05);
    const GridSpec grid{0, 2, 0, 1, 21, 11};
    const ScalarField a = msp_field(g, grid, 0.3, 5.0, 0.5, p);
    const ScalarField b = mp_deterministic_field(v, grid, 0.3, 5.0, 0.5, 0.05);
    ASSERT_EQ(a.values.size(), b.values.size());
    EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)), 0);
}

TEST(MspField, ZeroSystemZeroField)
{
    const WienerPath p = generate_path(1, 0, 2, 10, 0.1);
    const ScalarField f = msp_field(zero_system(), GridSpec{0, 1, 0, 1, 2, 2}, 0.0, 1.0, 0.5, p);
    EXPECT_EQ(f.values, (std::vector<double>{0, 0, 0, 0}));
    EXPECT_EQ(f.escaped_count(), 0u);
}

TEST(MspField, IndependentOfThreadCount)
{
    const WienerPath p = generate_path(42, 0, 2, 100, 0.05);
    const SdeSystem s = make_system("double_gyre");
    const GridSpec grid{0, 2, 0, 1, 37, 23};
    const ScalarField a = msp_field(s, grid, 0.0, 5.0, 0.5, p, Direction::both, 1e6, 1);
    for (unsigned threads : {2u, 3u, 8u}) {
        const ScalarField b = msp_field(s, grid, 0.0, 5.0, 0.5, p, Direction::both, 1e6, threads);
        EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)), 0);
        EXPECT_EQ(a.escaped, b.escaped);
    }
}

TEST(MspField, MatchesPointwiseEvaluation)
{
    const WienerPath p = generate_path(3, 0, 2, 60, 0.05);
    const SdeSystem s = noisy_saddle(1, 1, -1, 1);
    const GridSpec grid{-1, 1, -0.5, 0.5, 5, 4};
    const ScalarField f = msp_field(s, grid, 0.0, 3.0, 0.5, p, Direction::both, 1e12);
    for (std::size_t i = 0; i < grid.ny; ++i) {
        for (std::size_t j = 0; j < grid.nx; ++j) {
            EXPECT_EQ(f.at(i, j), msp_point(s, State{grid.x(j), grid.y(i)}, 0.0, 3.0, 0.5, p, Direction::both, 1e12).value);
        }
    }
    EXPECT_EQ(f.meta.seed, 3u);
    EXPECT_EQ(f.meta.tau, 3.0);
    EXPECT_EQ(f.meta.system, "noisy_saddle");
}

TEST(MspField, NoisySaddleMinimumNearStationaryOrbit)
{
    // Global minimum within two cells of (x~, y~) on a 201x201 grid.
    const WienerPath p = generate_path(5, 0, 2, 300, 0.05);
    const GridSpec grid{-2, 2, -2, 2, 201, 201};
    const ScalarField f = msp_field(noisy_saddle(1, 1, -1, 1), grid, 0.0, 15.0, 0.5, p, Direction::both, 1e12, 0);
    const NoisySaddleParams q{1, 1, -1, 1};
    // Oracle: direct left-endpoint sums, written out independently.
    double xt = 0.0, yt = 0.0;
    {
        double s = 0.0;
        for (long i = 0; i < 300; ++i) {
            s += std::exp(-q.a1 * i * 0.05) * q.b1 * p.forward_increment(0, i);
        }
        xt = -s;
        s = 0.0;
        for (long i = 0; i < 300; ++i) {
            s += std::exp(-q.a2 * (i + 1) * 0.05) * q.b2 * p.backward_increment(1, i);
        }
        yt = s;
    }
    ASSERT_LT(std::abs(xt), 1.9);
    ASSERT_LT(std::abs(yt), 1.9);
    std::size_t best = 0;
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        if (!f.escaped[k] && f.values[k] < f.values[best]) {
            best = k;
        }
    }
    const double bx = grid.x(best % grid.nx), by = grid.y(best / grid.nx);
    EXPECT_LE(std::abs(bx - xt), 2 * grid.dx()) << "x~ = " << xt;
    EXPECT_LE(std::abs(by - yt), 2 * grid.dy()) << "y~ = " << yt;
}

TEST(Invariants, NonnegativeAdditiveMonotone)
{
    const SdeSystem d = duffing_stochastic(1, 1, -1, 0.25);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 30; ++trial) {
        const WienerPath p = generate_path(static_cast<std::uint64_t>(trial), 0, 1, 200, 0.05);
        const State x0{u(rng), u(rng)};
        for (double pexp : {0.25, 0.5, 1.0}) {
            const double f = msp_point(d, x0, 0.0, 10.0, pexp, p, Direction::forward).value;
            const double b = msp_point(d, x0, 0.0, 10.0, pexp, p, Direction::backward).value;
            const double both = msp_point(d, x0, 0.0, 10.0, pexp, p, Direction::both).value;
            EXPECT_GE(f, 0.0);
            EXPECT_GE(b, 0.0);
            EXPECT_EQ(both, f + b);
            double prev = 0.0;
            for (double tau : {0.05, 1.0, 2.5, 5.0, 10.0}) {
                const double v = msp_point(d, x0, 0.0, tau, pexp, p, Direction::both).value;
                EXPECT_GE(v, prev);
                prev = v;
            }
        }
    }
}

TEST(EnsembleMean, Properties)
{
    const GridSpec g{0, 1, 0, 1, 4, 3};
    const ScalarField a = filled(g, 1), b = filled(g, 2);
    const std::vector<ScalarField> one{a};
    EXPECT_EQ(ensemble_mean(one).values, a.values);
    const std::vector<ScalarField> same(7, a);
    EXPECT_EQ(ensemble_mean(same).values, a.values);
    EXPECT_EQ(ensemble_mean(same).meta.ensemble_size, 7u);

    ScalarField a2 = a, b2 = b;
    for (double& v : a2.values) v *= 2;
    for (double& v : b2.values) v *= 2;
    const std::vector<ScalarField> pair{a, b}, pair2{a2, b2};
    const ScalarField m = ensemble_mean(pair), m2 = ensemble_mean(pair2);
    for (std::size_t k = 0; k < m.values.size(); ++k) {
        EXPECT_EQ(m2.values[k], 2 * m.values[k]);
        EXPECT_NEAR(m.values[k], 0.5 * (a.values[k] + b.values[k]), 1e-15);
    }
}

TEST(EnsembleMean, EscapeMaskIsUnion)
{
    const GridSpec g{0, 1, 0, 1, 2, 2};
    ScalarField a(g), b(g);
    a.escaped = {1, 0, 0, 0};
    b.escaped = {0, 0, 1, 0};
    const std::vector<ScalarField> v{a, b};
    EXPECT_EQ(ensemble_mean(v).escaped, (std::vector<std::uint8_t>{1, 0, 1, 0}));
}

TEST(EnsembleMean, RejectsMismatch)
{
    const std::vector<ScalarField> none;
    EXPECT_THROW(ensemble_mean(none), ConfigError);
    const std::vector<ScalarField> grids{ScalarField(GridSpec{0, 1, 0, 1, 2, 2}), ScalarField(GridSpec{0, 1, 0, 1, 3, 2})};
    EXPECT_THROW(ensemble_mean(grids), ConfigError);
    ScalarField a(GridSpec{0, 1, 0, 1, 2, 2}), b = a;
    b.meta.p = 0.25;
    const std::vector<ScalarField> metas{a, b};
    EXPECT_THROW(ensemble_mean(metas), ConfigError);
}

TEST(Frobenius, Cases)
{
    const GridSpec g{0, 1, 0, 1, 3, 3};
    const ScalarField a = filled(g, 3);
    EXPECT_EQ(frobenius_distance(a, a), 0.0);
    ScalarField z(g), one(g);
    one.values[4] = -2.5;
    EXPECT_EQ(frobenius_distance(z, one), 2.5);
    const ScalarField b = filled(g, 4);
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            s += std::pow(a.at(i, j) - b.at(i, j), 2);
        }
    }
    EXPECT_NEAR(frobenius_distance(a, b), std::sqrt(s), 1e-12);
    EXPECT_EQ(frobenius_distance(a, b), frobenius_distance(b, a));
    EXPECT_THROW(frobenius_distance(a, ScalarField(GridSpec{0, 1, 0, 1, 3, 4})), ConfigError);
}

TEST(DeterministicField, DuffingSmoke)
{
    const GridSpec grid{-1.5, 1.5, -1, 1, 31, 21};
    const ScalarField f = mp_deterministic_field(duffing_deterministic(1, 1, -1, 0.25), grid, 0.0, 10.0, 0.5, 0.05);
    for (double v : f.values) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GT(v, 0.0);
    }
    // Systems with no motion are rejected by shape, not by value.
    EXPECT_THROW(mp_deterministic_field(DeterministicField{"one", 1, {}}, grid, 0.0, 1.0, 0.5, 0.05), ConfigError);
}
