// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support/fixtures.hpp"

#include "relit/error.hpp"
#include "relit/lattice.hpp"
#include "relit/relighting.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace relit;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 6.283185307179586;

EnvironmentMap constant_env(int h, float value) {
    EnvironmentMap env;
    env.radiance = Image(2 * h, h, 3);
    std::fill(env.radiance.pixels.begin(), env.radiance.pixels.end(), value);
    return env;
}

EnvironmentMap random_env(int h, std::uint64_t seed) {
    EnvironmentMap env{Image(2 * h, h, 3)};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 4.0f);
    for (auto& p : env.radiance.pixels) p = u(rng);
    return env;
}

Vec3 rotate_y(const Vec3& d, double a) {
    return {d.x * std::cos(a) + d.z * std::sin(a), d.y, -d.x * std::sin(a) + d.z * std::cos(a)};
}

struct SweepFixture {
    OLATDataset ds = fixtures::tiny_dataset();
    Model model = make_model<float>(ModelConfig{}, ds.planes, 5);
    CameraModel camera = ds.cameras[0];
};

}  // namespace

TEST_CASE("fibonacci sphere directions are unit, balanced and follow the lattice offsets") {
    const auto two = fibonacci_sphere(2);
    REQUIRE(two.size() == 2);
    CHECK(two[0].z == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(two[1].z == doctest::Approx(-0.5).epsilon(1e-15));
    for (std::size_t n : {100u, 257u, 3096u}) {
        const auto dirs = fibonacci_sphere(n);
        CHECK(dirs.size() == n);
        Vec3 mean{};
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(std::abs(length(dirs[k]) - 1.0) < 1e-9);
            CHECK(dirs[k].z == doctest::Approx(1.0 - (2.0 * k + 1.0) / n).epsilon(1e-12));
            mean = mean + dirs[k];
        }
        CHECK(length(mean) / n < 0.05);
    }
    CHECK(fibonacci_sphere(64) == fibonacci_sphere(64));
    CHECK_THROWS_AS(fibonacci_sphere(0), DomainError);
    for (const auto& d : fibonacci_hemisphere(50)) CHECK(d.z >= 0.0);
}

TEST_CASE("environment map validation") {
    EnvironmentMap env = constant_env(8, 1.0f);
    CHECK_NOTHROW(env.validate());
    env.radiance = Image(10, 8, 3);
    CHECK_THROWS_AS(env.validate(), DomainError);
    env = constant_env(8, 1.0f);
    env.radiance.pixels[5] = -1.0f;
    CHECK_THROWS_AS(env.validate(), DomainError);
    env.radiance.pixels[5] = std::nanf("");
    CHECK_THROWS_AS(env.validate(), DomainError);
}

TEST_CASE("a constant white environment gives equal weights summing to 4 pi") {
    const EnvironmentMap env = constant_env(16, 1.0f);
    const auto dirs = fibonacci_sphere(2048);
    const auto w = envmap_weights(env, dirs);
    REQUIRE(w.size() == dirs.size());
    double sum = 0.0;
    for (const auto& x : w) {
        CHECK(x.x == doctest::Approx(2.0 * kTwoPi / 2048.0).epsilon(1e-12));
        CHECK(x.x == x.y);
        CHECK(x.y == x.z);
        sum += x.x;
    }
    CHECK(std::abs(sum - 2.0 * kTwoPi) <= 0.01 * 2.0 * kTwoPi);
}

TEST_CASE("a single bright texel only weights directions inside its bilinear support") {
    const int h = 16, w = 32, tx = 9, ty = 5;
    EnvironmentMap env{Image(w, h, 3)};
    env.radiance.set_rgb(tx, ty, {1.0, 1.0, 1.0});
    const auto dirs = fibonacci_sphere(20000);
    const auto weights = envmap_weights(env, dirs);
    int hits = 0;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        if (weights[i].x == 0.0) continue;
        ++hits;
        // Continuous texel coordinates of the direction.
        const double theta = std::acos(dirs[i].y);
        double u = std::atan2(dirs[i].x, dirs[i].z) / kTwoPi + 0.5;
        u -= std::floor(u);
        const double px = u * w - 0.5, py = theta / (kTwoPi / 2) * h - 0.5;
        CHECK(std::abs(px - tx) < 1.0);
        CHECK(std::abs(py - ty) < 1.0);
    }
    CHECK(hits > 0);
}

TEST_CASE("rotating the map and the directions together leaves the weights unchanged") {
    EnvironmentMap env = random_env(32, 3);
    const auto dirs = fibonacci_sphere(4096);
    const auto base = envmap_weights(env, dirs);
    for (double delta : {0.3, 1.7, -2.4}) {
        env.orientation = delta;
        std::vector<Vec3> turned;
        for (const auto& d : dirs) turned.push_back(rotate_y(d, delta));
        const auto w = envmap_weights(env, turned);
        double worst = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, length(w[i] - base[i]) / length(base[i]));
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("back-hemisphere weights are zeroed") {
    const auto dirs = fibonacci_sphere(100);
    auto w = envmap_weights(constant_env(8, 1.0f), dirs);
    const std::size_t zeroed = zero_back_hemisphere(w, dirs);
    std::size_t back = 0;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        if (dirs[i].z < 0.0) {
            ++back;
            CHECK(w[i].x == 0.0);
        } else {
            CHECK(w[i].x > 0.0);
        }
    }
    CHECK(zeroed == back);
    const auto front = front_hemisphere(dirs);
    CHECK(front.size() == dirs.size() - back);
    for (const auto& d : front) CHECK(d.z >= 0.0);
}

TEST_CASE("a sweep matches render_view for every direction and is deterministic") {
    SweepFixture f;
    const auto dirs = front_hemisphere(fibonacci_sphere(12));
    const OLATSweep sweep = olat_sweep(f.model, f.camera, f.ds.planes, dirs);
    REQUIRE(sweep.images.size() == dirs.size());
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        const Image direct = render_view(f.model, f.camera, f.ds.planes, dirs[i]).color;
        CHECK(sweep.images[i] == direct);
        CHECK(sweep.directions[i].z >= 0.0);
    }
    const OLATSweep again = olat_sweep(f.model, f.camera, f.ds.planes, dirs);
    CHECK(again.images == sweep.images);
}

TEST_CASE("one-hot weights reproduce an OLAT image exactly and relighting is linear") {
    SweepFixture f;
    const auto dirs = front_hemisphere(fibonacci_sphere(16));
    const OLATSweep sweep = olat_sweep(f.model, f.camera, f.ds.planes, dirs);
    const std::size_t n = dirs.size();
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<Rgb> onehot(n, Rgb{0.0, 0.0, 0.0});
        onehot[j] = {1.0, 1.0, 1.0};
        CHECK(relight_hdri(sweep, onehot) == sweep.images[j]);
    }
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<Rgb> w1(n), w2(n), w12(n);
        for (std::size_t i = 0; i < n; ++i) {
            w1[i] = {u(rng), u(rng), u(rng)};
            w2[i] = {u(rng), u(rng), u(rng)};
            w12[i] = w1[i] + w2[i];
        }
        const Image a = relight_hdri(sweep, w1), b = relight_hdri(sweep, w2), ab = relight_hdri(sweep, w12);
        for (std::size_t p = 0; p < ab.pixels.size(); ++p)
            CHECK(std::abs(ab.pixels[p] - (a.pixels[p] + b.pixels[p])) <= 1e-6 * std::max(1.0f, std::abs(ab.pixels[p])));
    }
    const Image black = relight_hdri(sweep, std::vector<Rgb>(n, Rgb{0.0, 0.0, 0.0}));
    for (float p : black.pixels) CHECK(p == 0.0f);
    CHECK_THROWS_AS(relight_hdri(sweep, std::vector<Rgb>(n + 1)), DomainError);
}

TEST_CASE("sweep cache round trip and weight table") {
    SweepFixture f;
    const auto dirs = front_hemisphere(fibonacci_sphere(8));
    const OLATSweep sweep = olat_sweep(f.model, f.camera, f.ds.planes, dirs);
    const fs::path dir = fs::temp_directory_path() / "relit_test_sweep";
    fs::remove_all(dir);
    save_sweep(sweep, dir);
    const OLATSweep back = load_sweep(dir);
    CHECK(back.directions == sweep.directions);
    CHECK(back.images == sweep.images);

    const auto w = envmap_weights(constant_env(8, 1.0f), dirs);
    write_weight_table(dir / "weights.csv", dirs, w);
    std::ifstream is(dir / "weights.csv");
    std::string line;
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) ++rows;
    CHECK(rows == static_cast<int>(dirs.size()));
    fs::remove_all(dir);
    CHECK_THROWS(load_sweep(dir));
}
