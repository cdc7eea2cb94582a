#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "sld/gridio.hpp"

using namespace sld;

namespace {

ScalarField random_field(std::size_t nx, std::size_t ny, std::uint64_t seed)
{
    ScalarField f(GridSpec{-1.5, 2.25, 0.125, 3.0, nx, ny});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> u(0, 10);
    for (double& v : f.values) {
        v = u(rng);
    }
    for (std::size_t k = 0; k < f.escaped.size(); k += 3) {
        f.escaped[k] = 1;
    }
    f.meta = {0.5, 15.0, 0.05, 0.25, "double_gyre", {}, 123456789012345ull, 0, 4, Direction::backward};
    return f;
}

ScalarField ramp(std::size_t nx, std::size_t ny)
{
    ScalarField f(GridSpec{0, 1, 0, 1, nx, ny});
    for (std::size_t i = 0; i < ny; ++i) {
        for (std::size_t j = 0; j < nx; ++j) {
            f.at(i, j) = static_cast<double>(j);
        }
    }
    return f;
}

// Pixel (row r from top, column j) of a P6 image.
Rgb pixel(const std::string& ppm, std::size_t nx, std::size_t r, std::size_t j)
{
    std::size_t pos = 0;
    for (int lines = 0; lines < 3; ++lines) {
        pos = ppm.find('\n', pos) + 1;
    }
    const auto* p = reinterpret_cast<const unsigned char*>(ppm.data() + pos + 3 * (r * nx + j));
    return {p[0], p[1], p[2]};
}

} // namespace

TEST(FieldFile, RoundTripIsBitExact)
{
    const ScalarField f = random_field(7, 5, 1);
    std::stringstream buf;
    write_field(buf, f);
    const ScalarField g = read_field(buf);
    EXPECT_EQ(g.grid, f.grid);
    EXPECT_EQ(std::memcmp(g.values.data(), f.values.data(), f.values.size() * sizeof(double)), 0);
    EXPECT_EQ(g.escaped, f.escaped);
    EXPECT_EQ(g.meta.p, 0.5);
    EXPECT_EQ(g.meta.tau, 15.0);
    EXPECT_EQ(g.meta.dt, 0.05);
    EXPECT_EQ(g.meta.t0, 0.25);
    EXPECT_EQ(g.meta.system, "double_gyre");
    EXPECT_EQ(g.meta.seed, 123456789012345ull);
    EXPECT_EQ(g.meta.ensemble_size, 4u);
    EXPECT_EQ(g.meta.direction, Direction::backward);
}

TEST(FieldFile, LayoutSize)
{
    const ScalarField f = random_field(7, 5, 2);
    std::stringstream buf;
    write_field(buf, f);
    const std::size_t header = 4 + 4 + 4 + 4 + 8 * 4 + 8 * 4 + 4 + f.meta.system.size() + 8 + 4 + 1;
    EXPECT_EQ(buf.str().size(), header + 8 * 35 + (35 + 7) / 8);
    EXPECT_EQ(buf.str().substr(0, 4), "SLDF");
}

TEST(FieldFile, TruncationNamesTheSection)
{
    const ScalarField f = random_field(7, 5, 3);
    std::stringstream buf;
    write_field(buf, f);
    const std::string bytes = buf.str();
    auto message_at = [&](std::size_t len) {
        std::stringstream cut(bytes.substr(0, len));
        try {
            read_field(cut);
        } catch (const FormatError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message_at(20).find("header"), std::string::npos);
    EXPECT_NE(message_at(bytes.size() - 10).find("values"), std::string::npos);
    EXPECT_NE(message_at(bytes.size() - 1).find("escape mask"), std::string::npos);
    EXPECT_NE(message_at(2).find("magic"), std::string::npos) << message_at(2);
}

TEST(FieldFile, RejectsOtherVersionsAndMagic)
{
    const ScalarField f = random_field(3, 3, 4);
    std::stringstream buf;
    write_field(buf, f);
    std::string bytes = buf.str();
    bytes[4] = 2;
    std::stringstream v(bytes);
    EXPECT_THROW(read_field(v), VersionError);
    bytes[0] = 'X';
    std::stringstream m(bytes);
    EXPECT_THROW(read_field(m), FormatError);
    EXPECT_THROW(read_field(std::string("/nonexistent/dir/f.sldf")), IoError);
}

TEST(FieldFile, FileRoundTrip)
{
    const auto dir = std::filesystem::temp_directory_path() / "sld_test_gridio";
    std::filesystem::create_directories(dir);
    const std::string file = (dir / "f.sldf").string();
    const ScalarField f = random_field(11, 4, 5);
    write_field(file, f);
    EXPECT_EQ(read_field(file).values, f.values);
    std::filesystem::remove_all(dir);
}

TEST(Render, ConstantFieldIsMidGray)
{
    ScalarField f(GridSpec{0, 1, 0, 1, 4, 3});
    for (double& v : f.values) v = 2.5;
    for (Normalization n : {Normalization::minmax, Normalization::percentile}) {
        const std::string ppm = render_ppm(f, RenderOptions{n});
        EXPECT_EQ(ppm.substr(0, 11), "P6\n4 3\n255\n");
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t j = 0; j < 4; ++j) {
                EXPECT_EQ(pixel(ppm, 4, r, j), (Rgb{128, 128, 128}));
            }
        }
    }
}

TEST(Render, RampIsMonotoneLeftToRight)
{
    const ScalarField f = ramp(16, 4);
    RenderOptions opt;
    opt.normalization = Normalization::minmax;
    opt.colormap = Colormap::gray;
    const std::string ppm = render_ppm(f, opt);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_EQ(pixel(ppm, 16, r, 0).r, 0);
        EXPECT_EQ(pixel(ppm, 16, r, 15).r, 255);
        for (std::size_t j = 1; j < 16; ++j) {
            EXPECT_GT(pixel(ppm, 16, r, j).r, pixel(ppm, 16, r, j - 1).r);
        }
    }
}

TEST(Render, TopRowIsYmax)
{
    ScalarField f(GridSpec{0, 1, 0, 1, 2, 2});
    f.at(1, 0) = 1.0;  // y = ymax, x = xmin
    RenderOptions opt{Normalization::minmax, 2, 98, Colormap::gray};
    const std::string ppm = render_ppm(f, opt);
    EXPECT_EQ(pixel(ppm, 2, 0, 0).r, 255);
    EXPECT_EQ(pixel(ppm, 2, 1, 0).r, 0);
}

TEST(Render, PercentileIgnoresOutliers)
{
    ScalarField base(GridSpec{0, 1, 0, 1, 50, 50});
    for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t j = 0; j < 50; ++j) {
            base.at(i, j) = std::sin(3 * base.grid.x(j)) + 0.3 * base.grid.y(i) * base.grid.y(i);
        }
    }
    ScalarField spiked = base;
    spiked.at(7, 3) = 1e9;  // one cell in 2500
    RenderOptions opt;
    opt.colormap = Colormap::gray;
    const std::string a = render_ppm(base, opt), b = render_ppm(spiked, opt);
    for (std::size_t r = 0; r < 50; ++r) {
        for (std::size_t j = 0; j < 50; ++j) {
            if (r == 49 - 7 && j == 3) continue;
            EXPECT_LE(std::abs(int(pixel(a, 50, r, j).r) - int(pixel(b, 50, r, j).r)), 2);
        }
    }
}

TEST(Render, EscapedCellsUseEscapeColor)
{
    ScalarField f = ramp(4, 4);
    f.escaped[5] = 1;
    const std::string ppm = render_ppm(f);
    EXPECT_EQ(pixel(ppm, 4, 4 - 1 - 1, 1), (Rgb{192, 192, 192}));
    EXPECT_EQ(pixel(ppm, 4, 3, 0), kViridis[0]);
    EXPECT_EQ(pixel(ppm, 4, 3, 3), kViridis[255]);
    EXPECT_EQ(render_ppm(f), ppm);
}

TEST(Render, OptionParsing)
{
    EXPECT_EQ(parse_normalization("minmax"), Normalization::minmax);
    EXPECT_EQ(parse_colormap("gray"), Colormap::gray);
    EXPECT_THROW(parse_colormap("jet"), ConfigError);
    EXPECT_THROW(parse_normalization("zscore"), ConfigError);
}

TEST(Csv, RowsAndValues)
{
    ScalarField f(GridSpec{-1, 1, 0, 2, 2, 2});
    std::ostringstream out;
    export_csv(f, out);
    EXPECT_EQ(out.str(), "x,y,value,escaped\n-1,0,0,0\n1,0,0,0\n-1,2,0,0\n1,2,0,0\n");

    const ScalarField g = random_field(7, 5, 6);
    std::ostringstream big;
    export_csv(g, big);
    std::istringstream in(big.str());
    std::string line;
    std::getline(in, line);
    std::size_t k = 0;
    while (std::getline(in, line)) {
        double x, y, v;
        int e;
        ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf,%d", &x, &y, &v, &e), 4);
        EXPECT_EQ(x, g.grid.x(k % 7));
        EXPECT_EQ(y, g.grid.y(k / 7));
        EXPECT_EQ(v, g.values[k]);
        EXPECT_EQ(e, g.escaped[k]);
        ++k;
    }
    EXPECT_EQ(k, 35u);
}

TEST(Csv, TrajectoryAndCloud)
{
    Trajectory t(2, 0.0, 0.5, 1, 2, 1e6);
    std::ostringstream out;
    export_trajectory_csv(t, out);
    EXPECT_EQ(out.str(), "node,t,x0,x1,escaped\n-1,-0.5,0,0,0\n0,0,0,0,0\n1,0.5,0,0,0\n2,1,0,0,0\n");
    const std::vector<CloudPoint> cloud{{3, 4, 0.2, State{1.5, -2}, true}};
    std::ostringstream c;
    export_cloud_csv(cloud, c);
    EXPECT_EQ(c.str(), "path_id,t,x,y,escaped\n3,0.20000000000000001,1.5,-2,1\n");
}
