// SPDX-License-Identifier: Apache-2.0

#include "relit/scene.hpp"

#include "relit/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace relit {

namespace {

constexpr double kShadowOffset = 1e-6;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::optional<double> hit_sphere(const Sphere& s, const Ray& ray, double t_min, double t_max) {
    const Vec3 oc = ray.origin - s.center;
    const double b = dot(oc, ray.direction);
    const double c = dot(oc, oc) - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double root = std::sqrt(disc);
    for (double t : {-b - root, -b + root})
        if (t > t_min && t < t_max) return t;
    return std::nullopt;
}

std::optional<double> hit_plane(const Plane& p, const Ray& ray, double t_min, double t_max) {
    const double denom = dot(p.normal, ray.direction);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double t = dot(p.point - ray.origin, p.normal) / denom;
    if (t > t_min && t < t_max) return t;
    return std::nullopt;
}

std::optional<double> hit_box(const Box& b, const Ray& ray, double t_min, double t_max) {
    double lo = t_min, hi = t_max;
    for (int a = 0; a < 3; ++a) {
        const double inv = 1.0 / ray.direction[a];
        double t0 = (b.min[a] - ray.origin[a]) * inv;
        double t1 = (b.max[a] - ray.origin[a]) * inv;
        if (t0 > t1) std::swap(t0, t1);
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
        if (hi < lo) return std::nullopt;
    }
    if (lo > t_min) return lo;
    if (hi > t_min && hi < t_max) return hi;
    return std::nullopt;
}

Vec3 box_normal(const Box& b, const Vec3& p) {
    const Vec3 c = 0.5 * (b.min + b.max);
    const Vec3 half = 0.5 * (b.max - b.min);
    int axis = 0;
    double best = -1.0;
    for (int a = 0; a < 3; ++a) {
        const double d = std::abs((p[a] - c[a]) / half[a]);
        if (d > best) {
            best = d;
            axis = a;
        }
    }
    Vec3 n{};
    n[axis] = p[axis] > c[axis] ? 1.0 : -1.0;
    return n;
}

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

}  // namespace

SvbrdfSample Material::sample_at(const Vec3& point, const Vec3& normal) const {
    SvbrdfSample s;
    s.normal = normal;
    s.roughness = roughness;
    s.albedo = std::visit(overloaded{
                              [](const ConstantAlbedo& c) { return c.value; },
                              [&](const CheckerAlbedo& c) {
                                  const auto cell = static_cast<long long>(std::floor(point.x / c.scale)) +
                                                    static_cast<long long>(std::floor(point.y / c.scale)) +
                                                    static_cast<long long>(std::floor(point.z / c.scale));
                                  return (cell % 2 == 0) ? c.even : c.odd;
                              },
                          },
                          albedo);
    return s;
}

void Scene::validate() const {
    for (const auto& p : primitives) {
        const bool ok = std::visit(overloaded{
                                       [](const Sphere& s) { return is_finite(s.center) && std::isfinite(s.radius) && s.radius > 0; },
                                       [](const Plane& pl) { return is_finite(pl.point) && is_finite(pl.normal) && length(pl.normal) > 0; },
                                       [](const Box& b) {
                                           return is_finite(b.min) && is_finite(b.max) && b.min.x < b.max.x &&
                                                  b.min.y < b.max.y && b.min.z < b.max.z;
                                       },
                                   },
                                   p.shape);
        if (!ok) throw DomainError("scene '" + name + "': invalid primitive parameters");
        if (!(p.material.roughness >= kMinRoughness && p.material.roughness <= 1.0))
            throw DomainError("scene '" + name + "': roughness outside [0.01, 1]");
    }
}

std::optional<Hit> intersect(const Scene& scene, const Ray& ray, double t_min, double t_max) {
    std::optional<Hit> best;
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        const auto& prim = scene.primitives[i];
        const double limit = best ? best->t : t_max;
        const auto t = std::visit(overloaded{
                                      [&](const Sphere& s) { return hit_sphere(s, ray, t_min, limit); },
                                      [&](const Plane& p) { return hit_plane(p, ray, t_min, limit); },
                                      [&](const Box& b) { return hit_box(b, ray, t_min, limit); },
                                  },
                                  prim.shape);
        if (!t) continue;
        Hit h;
        h.t = *t;
        h.point = ray.origin + *t * ray.direction;
        h.primitive = i;
        h.normal = std::visit(overloaded{
                                  [&](const Sphere& s) { return (h.point - s.center) / s.radius; },
                                  [&](const Plane& p) { return normalized(p.normal); },
                                  [&](const Box& b) { return box_normal(b, h.point); },
                              },
                              prim.shape);
        if (std::holds_alternative<Plane>(prim.shape) && dot(h.normal, ray.direction) > 0.0) h.normal = -h.normal;
        best = h;
    }
    return best;
}

bool occluded(const Scene& scene, const Vec3& origin, const Vec3& light_dir) {
    return intersect(scene, Ray{origin, light_dir}, 0.0).has_value();
}

Rgb trace_pixel(const Scene& scene, const Ray& ray, const Vec3& light_dir, const Rgb& irradiance) {
    const auto hit = intersect(scene, ray);
    if (!hit) return scene.background;
    if (dot(hit->normal, light_dir) <= 0.0) return {0.0, 0.0, 0.0};
    if (occluded(scene, hit->point + kShadowOffset * hit->normal, light_dir)) return {0.0, 0.0, 0.0};
    const SvbrdfSample sample = scene.primitives[hit->primitive].material.sample_at(hit->point, hit->normal);
    return shade_directional(sample, -ray.direction, light_dir, irradiance, true);
}

Image render_image(const Scene& scene, const CameraModel& camera, const Vec3& light_dir, const Rgb& irradiance) {
    Image img(camera.width, camera.height, 3);
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x)
            img.set_rgb(x, y, trace_pixel(scene, ray_from_pixel(camera, x + 0.5, y + 0.5), light_dir, irradiance));
    return img;
}

ReferenceGeometry reference_geometry() {
    return {Sphere{{0.0, 0.0, 0.0}, 0.5}, Plane{{0.0, 0.0, -0.5}, {0.0, 0.0, 1.0}}};
}

Scene make_scene(const std::string& name) {
    Scene scene;
    scene.name = name;
    if (name == "reference") {
        const auto geo = reference_geometry();
        scene.primitives.push_back(
            {geo.sphere, Material{CheckerAlbedo{{0.85, 0.45, 0.20}, {0.20, 0.45, 0.85}, 0.15}, 0.3}});
        scene.primitives.push_back(
            {geo.ground, Material{CheckerAlbedo{{0.80, 0.80, 0.75}, {0.30, 0.30, 0.35}, 0.2}, 0.8}});
    } else if (name == "chrome_ball") {
        scene.primitives.push_back({Sphere{{0.0, 0.0, 0.0}, 0.5}, Material{ConstantAlbedo{{0.0, 0.0, 0.0}}, kMinRoughness}});
    } else {
        throw DomainError("unknown scene '" + name + "' (expected reference or chrome_ball)");
    }
    scene.validate();
    return scene;
}

std::string describe_scene(const Scene& scene) {
    using nlohmann::json;
    json prims = json::array();
    for (const auto& p : scene.primitives) {
        json j;
        std::visit(overloaded{
                       [&](const Sphere& s) { j = {{"type", "sphere"}, {"center", vec_json(s.center)}, {"radius", s.radius}}; },
                       [&](const Plane& pl) { j = {{"type", "plane"}, {"point", vec_json(pl.point)}, {"normal", vec_json(pl.normal)}}; },
                       [&](const Box& b) { j = {{"type", "box"}, {"min", vec_json(b.min)}, {"max", vec_json(b.max)}}; },
                   },
                   p.shape);
        std::visit(overloaded{
                       [&](const ConstantAlbedo& c) { j["albedo"] = {{"constant", vec_json(c.value)}}; },
                       [&](const CheckerAlbedo& c) {
                           j["albedo"] = {{"even", vec_json(c.even)}, {"odd", vec_json(c.odd)}, {"scale", c.scale}};
                       },
                   },
                   p.material.albedo);
        j["roughness"] = p.material.roughness;
        prims.push_back(std::move(j));
    }
    const json out = {{"name", scene.name}, {"background", vec_json(scene.background)}, {"primitives", prims}};
    return out.dump();
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string scene_hash(const Scene& scene) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(describe_scene(scene))));
    return buf;
}

}  // namespace relit
