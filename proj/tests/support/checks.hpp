// SPDX-License-Identifier: Apache-2.0
//
// Renderer and calibration checks shared by the unit tests and the
// acceptance runner. The analytic parts use only closed-form geometry.

#pragma once

#include "relit/calibration.hpp"
#include "relit/geometry.hpp"
#include "relit/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace checks {

/// Smallest t > 0 where origin + t dir meets the sphere, or -1.
inline double sphere_t(const relit::Vec3& origin, const relit::Vec3& dir, const relit::Vec3& c, double r) {
    const relit::Vec3 oc = origin - c;
    const double b = relit::dot(oc, dir);
    const double disc = b * b - (relit::dot(oc, oc) - r * r);
    if (disc < 0.0) return -1.0;
    const double s = std::sqrt(disc);
    if (-b - s > 0.0) return -b - s;
    if (-b + s > 0.0) return -b + s;
    return -1.0;
}

struct ShadowReport {
    int plane_pixels = 0;
    int shadow_pixels = 0;      // analytic
    int mismatches = 0;         // rendered zero != analytic shadow
    int far_mismatches = 0;     // mismatches with no differing analytic neighbour within 1 px
};

/// Renders the reference scene from an oblique camera and compares the
/// ground's zero-radiance region with the analytic shadow of the sphere.
/// A pixel is analytically shadowed when the ray from its ground point
/// toward the light meets the sphere.
inline ShadowReport shadow_ellipse_check(int resolution, const relit::Vec3& light) {
    const relit::Scene scene = relit::make_scene("reference");
    const auto geo = relit::reference_geometry();
    const double focal = resolution * 0.5 / std::tan(relit::degrees_to_radians(25.0));
    const auto cam = relit::look_at_camera({-1.6, -2.2, 3.0}, {-0.6, 0.0, -0.5}, resolution, resolution, focal);
    const relit::Image img = relit::render_image(scene, cam, light);

    // -1: not the ground, 0: lit ground, 1: shadowed ground
    std::vector<int> analytic(static_cast<std::size_t>(resolution * resolution), -1);
    const auto idx = [&](int x, int y) { return static_cast<std::size_t>(y * resolution + x); };
    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            const relit::Ray ray = relit::ray_from_pixel(cam, x + 0.5, y + 0.5);
            if (!(ray.direction.z < 0.0)) continue;
            const double t_plane = (geo.ground.point.z - ray.origin.z) / ray.direction.z;
            const double t_sphere = sphere_t(ray.origin, ray.direction, geo.sphere.center, geo.sphere.radius);
            if (t_sphere > 0.0 && t_sphere < t_plane) continue;
            const relit::Vec3 p = ray.origin + t_plane * ray.direction;
            analytic[idx(x, y)] = sphere_t(p, light, geo.sphere.center, geo.sphere.radius) > 0.0 ? 1 : 0;
        }
    }

    ShadowReport rep;
    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            const int a = analytic[idx(x, y)];
            if (a < 0) continue;
            ++rep.plane_pixels;
            rep.shadow_pixels += a;
            const relit::Rgb c = img.rgb(x, y);
            const int rendered = (c.x == 0.0 && c.y == 0.0 && c.z == 0.0) ? 1 : 0;
            if (rendered == a) continue;
            ++rep.mismatches;
            bool near_boundary = false;
            for (int dy = -1; dy <= 1 && !near_boundary; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= resolution || yy >= resolution) continue;
                    const int b = analytic[idx(xx, yy)];
                    if (b >= 0 && b != a) {
                        near_boundary = true;
                        break;
                    }
                }
            if (!near_boundary) ++rep.far_mismatches;
        }
    }
    return rep;
}

/// Chrome ball viewed head-on from +z; returns the camera and the silhouette circle.
struct ChromeRig {
    relit::Scene scene = relit::make_scene("chrome_ball");
    relit::CameraModel camera;
    relit::BallCircle ball;

    explicit ChromeRig(int resolution = 128, double distance = 3.0) {
        const double focal = 300.0 * resolution / 128.0;
        camera = relit::look_at_camera({0.0, 0.0, distance}, {0.0, 0.0, 0.0}, resolution, resolution, focal);
        // Silhouette cone half-angle asin(r/d) projects to f tan(asin(r/d)).
        const double half = std::asin(0.5 / distance);
        ball = {resolution * 0.5, resolution * 0.5, focal * std::tan(half)};
    }
};

/// Angular errors (radians) of the recovered direction for `count` random
/// lights on the front hemisphere.
inline std::vector<double> chrome_round_trip(int count, std::uint64_t seed) {
    ChromeRig rig;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> errors;
    while (static_cast<int>(errors.size()) < count) {
        relit::Vec3 l{g(rng), g(rng), g(rng)};
        if (relit::length(l) < 1e-6) continue;
        l = relit::normalized(l);
        if (l.z < 0.0) l.z = -l.z;
        const relit::Image img = relit::render_image(rig.scene, rig.camera, l);
        const auto cal = relit::chrome_ball_light_dir(img, rig.ball, rig.camera);
        errors.push_back(relit::angle_between(cal.direction, l));
    }
    return errors;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace checks
