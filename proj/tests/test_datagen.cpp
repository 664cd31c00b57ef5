// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles/microfacet_oracle.hpp"
#include "support/checks.hpp"

#include "relit/calibration.hpp"
#include "relit/dataset.hpp"
#include "relit/error.hpp"
#include "relit/scene.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace relit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("relit_test_datagen_" + name);
    fs::remove_all(dir);
    return dir;
}

OLATDataset small_dataset(std::uint64_t seed = 3) {
    const auto cams = camera_grid(2, 10.0, 3.0, {0.0, 0.0, 0.0}, 8, 6, 10.0);
    GenerateOptions opts;
    opts.held_out_views = 1;
    opts.held_out_lights = 1;
    return generate_dataset(make_scene("reference"), {cams[0], cams[3]}, light_lattice(3, true), seed, opts);
}

oracle::V3 arr(const Vec3& v) { return {v.x, v.y, v.z}; }

}  // namespace

TEST_CASE("a ray that misses every primitive returns the background") {
    const Scene scene = make_scene("reference");
    const Ray up{{0.0, 0.0, 2.0}, {0.0, 0.0, 1.0}};
    CHECK_FALSE(intersect(scene, up).has_value());
    const Rgb c = trace_pixel(scene, up, normalized(Vec3{0.3, 0.1, 1.0}));
    CHECK(c.x == 0.0);
    CHECK(c.y == 0.0);
    CHECK(c.z == 0.0);
}

TEST_CASE("intersect returns the nearest hit with an outward unit normal") {
    const Scene scene = make_scene("reference");
    const Ray down{{0.0, 0.0, 3.0}, {0.0, 0.0, -1.0}};
    const auto hit = intersect(scene, down);
    REQUIRE(hit.has_value());
    CHECK(hit->primitive == 0);
    CHECK(hit->t == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(hit->normal.z == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a ground point behind the sphere from the light is black") {
    const Scene scene = make_scene("reference");
    const Vec3 eye{0.6, 0.0, 3.0};
    const Ray to_ground{eye, normalized(Vec3{0.6, 0.0, -0.5} - eye)};
    // The path from (0.6, 0, -0.5) toward this light passes through the sphere.
    const Vec3 light = normalized(Vec3{-1.0, 0.0, 0.4});
    const auto hit = intersect(scene, to_ground);
    REQUIRE(hit.has_value());
    CHECK(hit->primitive == 1);
    CHECK(occluded(scene, hit->point + 1e-6 * hit->normal, light));
    const Rgb c = trace_pixel(scene, to_ground, light);
    CHECK(c.x == 0.0);
    CHECK(c.y == 0.0);
    CHECK(c.z == 0.0);
    CHECK(trace_pixel(scene, to_ground, {0.0, 0.0, 1.0}).x > 0.0);
}

TEST_CASE("an unoccluded rough sphere point matches the diffuse term plus the specular residue") {
    Scene scene;
    scene.primitives.push_back({Sphere{{0.0, 0.0, 0.0}, 0.5}, Material{ConstantAlbedo{{0.6, 0.4, 0.2}}, 1.0}});
    scene.validate();
    const Vec3 l = normalized(Vec3{0.4, 0.3, 1.0});
    const Ray ray{{0.12, -0.05, 3.0}, normalized(Vec3{0.0, 0.02, -1.0})};
    const auto hit = intersect(scene, ray);
    REQUIRE(hit.has_value());
    const Vec3 n = hit->normal, v = -ray.direction;
    const double cosine = dot(n, l);
    REQUIRE(cosine > 0.0);
    const auto m = oracle::model(arr(n), {0.6, 0.4, 0.2}, 1.0, arr(v), arr(l));
    const Rgb c = trace_pixel(scene, ray, l);
    const double albedo[3] = {0.6, 0.4, 0.2};
    for (int k = 0; k < 3; ++k) {
        const double lambert = albedo[k] / oracle::kPi * cosine;
        const double residue = (m[k] - albedo[k] / oracle::kPi) * cosine;
        CHECK(c[k] == doctest::Approx(lambert + residue).epsilon(0.05));
        CHECK(c[k] == doctest::Approx(m[k] * cosine).epsilon(1e-9));
        // R = 1 keeps the specular part small against the diffuse part.
        CHECK(residue < 0.25 * lambert);
    }
}

TEST_CASE("renderer is linear in irradiance on random rays") {
    const Scene scene = make_scene("reference");
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int lit = 0;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 origin{u(rng), u(rng), 3.0};
        const Vec3 dir = normalized(Vec3{0.3 * u(rng), 0.3 * u(rng), -1.0});
        const Vec3 l = normalized(Vec3{u(rng), u(rng), 1.0 + u(rng)});
        const Rgb e{0.7, 1.3, 0.4};
        const Rgb a = trace_pixel(scene, {origin, dir}, l, e);
        const Rgb b = trace_pixel(scene, {origin, dir}, l, 2.0 * e);
        for (int k = 0; k < 3; ++k) CHECK(b[k] == 2.0 * a[k]);
        lit += a.x > 0.0;
    }
    CHECK(lit > 100);
}

TEST_CASE("ground shadow matches the analytic ellipse within one pixel") {
    const auto rep = checks::shadow_ellipse_check(128, normalized(Vec3{0.5, 0.2, 1.0}));
    CHECK(rep.plane_pixels > 4000);
    CHECK(rep.shadow_pixels > 200);
    CHECK(rep.far_mismatches == 0);
}

TEST_CASE("scene validation and the built-in scenes") {
    CHECK_THROWS_AS(make_scene("teapot"), DomainError);
    Scene bad;
    bad.primitives.push_back({Sphere{{0.0, 0.0, NAN}, 1.0}, Material{}});
    CHECK_THROWS_AS(bad.validate(), DomainError);
    Scene rough;
    rough.primitives.push_back({Sphere{{0.0, 0.0, 0.0}, 1.0}, Material{ConstantAlbedo{{0.5, 0.5, 0.5}}, 2.0}});
    CHECK_THROWS_AS(rough.validate(), DomainError);
    CHECK(scene_hash(make_scene("reference")) == scene_hash(make_scene("reference")));
    CHECK(scene_hash(make_scene("reference")) != scene_hash(make_scene("chrome_ball")));
    CHECK(scene_hash(make_scene("reference")).size() == 16);
}

TEST_CASE("a single camera sits on the axis and looks at the target") {
    const Vec3 target{0.1, -0.2, 0.3};
    const auto cams = camera_grid(1, 10.0, 3.0, target, 16, 16, 20.0);
    REQUIRE(cams.size() == 1);
    const Vec3 c = cams[0].center();
    CHECK(c.x == doctest::Approx(target.x));
    CHECK(c.y == doctest::Approx(target.y));
    CHECK(c.z == doctest::Approx(target.z + 3.0));
    const Vec3 to_target = normalized(target - c);
    CHECK(dot(cams[0].forward(), to_target) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adjacent grid cameras are exactly one spacing apart") {
    const auto cams = camera_grid(3, 10.0, 3.0, {0.0, 0.0, 0.0}, 16, 16, 20.0);
    REQUIRE(cams.size() == 9);
    const double step = degrees_to_radians(10.0);
    // Columns of the row-major grid, and the central row.
    for (int col = 0; col < 3; ++col)
        for (int row = 0; row < 2; ++row) {
            const auto& a = cams[static_cast<std::size_t>(row * 3 + col)];
            const auto& b = cams[static_cast<std::size_t>((row + 1) * 3 + col)];
            CHECK(std::abs(angle_between(a.forward(), b.forward()) - step) < 1e-6);
        }
    for (int col = 0; col < 2; ++col)
        CHECK(std::abs(angle_between(cams[3 + col].forward(), cams[4 + col].forward()) - step) < 1e-6);
    for (const auto& cam : cams) {
        const Mat3 rrt = cam.rotation * cam.rotation.transposed();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(std::abs(rrt(i, j) - (i == j ? 1.0 : 0.0)) < 1e-9);
        CHECK(cam.center().z > 0.0);
        CHECK(dot(cam.forward(), normalized(-cam.center())) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(length(cam.center()) == doctest::Approx(3.0).epsilon(1e-12));
    }
}

TEST_CASE("camera grid preconditions") {
    CHECK_THROWS_AS(camera_grid(0, 10.0, 3.0, {}, 8, 8, 10.0), DomainError);
    CHECK_THROWS_AS(camera_grid(3, 0.0, 3.0, {}, 8, 8, 10.0), DomainError);
    CHECK_THROWS_AS(camera_grid(3, 10.0, -1.0, {}, 8, 8, 10.0), DomainError);
    // 5 per axis at 45 degrees reaches 90 degrees from the axis.
    CHECK_THROWS_AS(camera_grid(5, 45.0, 3.0, {}, 8, 8, 10.0), DomainError);
    CHECK_NOTHROW(camera_grid(5, 10.0, 3.0, {}, 8, 8, 10.0));
}

TEST_CASE("light sphere grid is unit length, respects the hemisphere and has the expected density") {
    for (double spacing : {10.0, 25.0, 60.0, 90.0}) {
        for (bool hemi : {false, true}) {
            const LightRig rig = light_sphere_grid(spacing, hemi);
            CHECK_NOTHROW(rig.validate());
            for (const auto& d : rig.directions) {
                CHECK(std::abs(length(d) - 1.0) < 1e-9);
                if (hemi) CHECK(d.z >= 0.0);
            }
        }
    }
    // Caps of radius 12.5 degrees have solid angle 2 pi (1 - cos 12.5deg).
    const double cap = 2.0 * oracle::kPi * (1.0 - std::cos(12.5 * oracle::kPi / 180.0));
    const double expected = 4.0 * oracle::kPi / cap;
    const auto n = static_cast<double>(light_sphere_grid(25.0, false).size());
    CHECK(n >= 84.0);
    CHECK(n <= 105.0);
    CHECK(std::abs(n - expected) <= 0.2 * expected);
    CHECK_THROWS_AS(light_sphere_grid(0.0, false), DomainError);
    CHECK_THROWS_AS(light_sphere_grid(91.0, false), DomainError);
}

TEST_CASE("light rig validation rejects non-unit and duplicate directions") {
    LightRig rig{{{0.0, 0.0, 1.0}, {0.0, 0.0, 1.0}}};
    CHECK_THROWS_AS(rig.validate(), DomainError);
    rig.directions = {{0.0, 0.0, 2.0}};
    CHECK_THROWS_AS(rig.validate(), DomainError);
}

TEST_CASE("generate_dataset renders one image per camera and light") {
    const OLATDataset ds = small_dataset();
    CHECK(ds.images.size() == 6);
    CHECK(ds.camera_count() == 2);
    CHECK(ds.light_count() == 3);
    for (int c = 0; c < 2; ++c)
        for (int l = 0; l < 3; ++l) {
            const Image& img = ds.image(c, l);
            CHECK(img.width == 8);
            CHECK(img.height == 6);
            CHECK(img.channels == 3);
        }
    CHECK_THROWS_AS(ds.image(2, 0), DomainError);
    CHECK(ds.split.held_out_views.size() == 1);
    CHECK(ds.split.held_out_lights.size() == 1);
    CHECK(ds.scene_hash == scene_hash(make_scene("reference")));
}

TEST_CASE("generate_dataset is a pure function of its arguments") {
    CHECK(small_dataset(3) == small_dataset(3));
    const OLATDataset a = small_dataset(3);
    const OLATDataset b = small_dataset(3);
    for (const auto& [key, img] : a.images)
        CHECK(std::memcmp(img.pixels.data(), b.images.at(key).pixels.data(), img.pixels.size() * sizeof(float)) == 0);
}

TEST_CASE("doubling irradiance doubles every stored pixel without clamping") {
    const auto cams = camera_grid(1, 10.0, 3.0, {}, 10, 10, 12.0);
    GenerateOptions one;
    one.clamp = false;
    GenerateOptions two = one;
    two.irradiance = {2.0, 2.0, 2.0};
    const auto rig = light_lattice(4, true);
    const auto a = generate_dataset(make_scene("reference"), cams, rig, 1, one);
    const auto b = generate_dataset(make_scene("reference"), cams, rig, 1, two);
    for (const auto& [key, img] : a.images) {
        const Image& twice = b.images.at(key);
        for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(twice.pixels[i] == 2.0f * img.pixels[i]);
    }
}

TEST_CASE("generate_dataset preconditions") {
    const auto cams = camera_grid(1, 10.0, 3.0, {}, 4, 4, 5.0);
    CHECK_THROWS_AS(generate_dataset(make_scene("reference"), {}, light_lattice(2, true), 0), DomainError);
    CHECK_THROWS_AS(generate_dataset(make_scene("reference"), cams, LightRig{}, 0), DomainError);
    auto mixed = cams;
    mixed.push_back(look_at_camera({0.0, 0.5, 3.0}, {}, 5, 4, 5.0));
    CHECK_THROWS_AS(generate_dataset(make_scene("reference"), mixed, light_lattice(2, true), 0), DomainError);
}

TEST_CASE("save then load returns an equal dataset") {
    const auto dir = scratch_dir("roundtrip");
    const OLATDataset ds = small_dataset();
    save_dataset(ds, dir);
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "images" / "c000_l000.pfm"));
    const OLATDataset back = load_dataset(dir);
    CHECK(back == ds);
    fs::remove_all(dir);
}

TEST_CASE("a manifest listing a pair twice is a parse error") {
    const auto dir = scratch_dir("duplicate");
    save_dataset(small_dataset(), dir);
    nlohmann::json m;
    {
        std::ifstream is(dir / "manifest.json");
        is >> m;
    }
    m["images"].push_back(m["images"][0]);
    {
        std::ofstream os(dir / "manifest.json");
        os << m.dump(2);
    }
    CHECK_THROWS_AS(load_dataset(dir), ParseError);
    fs::remove_all(dir);
}

TEST_CASE("a missing image file is an I/O error naming the pair") {
    const auto dir = scratch_dir("missing");
    save_dataset(small_dataset(), dir);
    fs::remove(dir / "images" / "c001_l002.pfm");
    try {
        load_dataset(dir);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        const std::string what = e.what();
        CHECK(what.find("camera 1") != std::string::npos);
        CHECK(what.find("light 2") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("malformed manifests report a line or a field") {
    const auto dir = scratch_dir("malformed");
    save_dataset(small_dataset(), dir);
    {
        std::ofstream os(dir / "manifest.json");
        os << "{\n  \"format\": \"relit-olat\",\n  \"version\": \n}\n";
    }
    try {
        load_dataset(dir);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
    {
        std::ofstream os(dir / "manifest.json");
        os << R"({"format": "relit-olat"})";
    }
    try {
        load_dataset(dir);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("field") != std::string::npos);
    }
    CHECK_THROWS_AS(load_dataset(dir / "nowhere"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("split validation and round trip") {
    const SplitSpec s = make_split(9, 16, 1, 2, 42);
    CHECK(s == make_split(9, 16, 1, 2, 42));
    CHECK(s.held_out_views.size() == 1);
    CHECK(s.held_out_lights.size() == 2);
    CHECK_NOTHROW(s.validate(9, 16));
    CHECK(s.is_held_out_view(s.held_out_views[0]));
    CHECK_THROWS_AS(make_split(2, 2, 2, 0, 1), DomainError);

    SplitSpec bad;
    bad.held_out_views = {0, 0};
    CHECK_THROWS_AS(bad.validate(3, 3), DomainError);
    bad.held_out_views = {5};
    CHECK_THROWS_AS(bad.validate(3, 3), DomainError);
    bad.held_out_views = {};
    bad.held_out_lights = {0, 1, 2};
    CHECK_THROWS_AS(bad.validate(3, 3), DomainError);

    const auto dir = scratch_dir("split");
    fs::create_directories(dir);
    save_split(s, dir / "split.json");
    CHECK(load_split(dir / "split.json") == s);
    fs::remove_all(dir);
}

TEST_CASE("a light along the camera axis is recovered at the ball centre") {
    checks::ChromeRig rig;
    const Vec3 axis{0.0, 0.0, 1.0};
    const Image img = render_image(rig.scene, rig.camera, axis);
    const auto cal = chrome_ball_light_dir(img, rig.ball, rig.camera);
    CHECK(std::abs(cal.spot_x - rig.ball.cx) < 0.5);
    CHECK(std::abs(cal.spot_y - rig.ball.cy) < 0.5);
    CHECK(angle_between(cal.direction, axis) < 1e-3);
    CHECK(std::abs(length(cal.direction) - 1.0) < 1e-12);
    CHECK_FALSE(cal.low_confidence);
}

TEST_CASE("chrome ball round trip over random front-hemisphere lights") {
    const auto errors = checks::chrome_round_trip(20, 42);
    CHECK(checks::median(errors) < degrees_to_radians(2.0));
}

TEST_CASE("chrome ball failure modes") {
    checks::ChromeRig rig;
    const Image black(rig.camera.width, rig.camera.height, 3);
    CHECK_THROWS_AS(chrome_ball_light_dir(black, rig.ball, rig.camera), CalibrationError);
    BallCircle outside = rig.ball;
    outside.cx = 10.0;
    CHECK_THROWS_AS(chrome_ball_light_dir(black, outside, rig.camera), DomainError);
    // A light 160 degrees from the view puts the mirror normal 80 degrees off it.
    const double a = degrees_to_radians(160.0);
    const Vec3 grazing{std::sin(a), 0.0, std::cos(a)};
    const Image img = render_image(rig.scene, rig.camera, grazing);
    const auto cal = chrome_ball_light_dir(img, rig.ball, rig.camera);
    CHECK(cal.low_confidence);
}
