// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/geometry.hpp"
#include "relit/image.hpp"
#include "relit/microfacet.hpp"

#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace relit {

struct ConstantAlbedo {
    Rgb value;
};

/// Solid 3D checker: parity of floor(x/scale) + floor(y/scale) + floor(z/scale).
struct CheckerAlbedo {
    Rgb even;
    Rgb odd;
    double scale = 0.2;
};

struct Material {
    std::variant<ConstantAlbedo, CheckerAlbedo> albedo = ConstantAlbedo{{0.5, 0.5, 0.5}};
    double roughness = 0.5;

    SvbrdfSample sample_at(const Vec3& point, const Vec3& normal) const;
};

struct Sphere {
    Vec3 center;
    double radius = 1.0;
};

struct Plane {
    Vec3 point;
    Vec3 normal{0.0, 0.0, 1.0};
};

struct Box {
    Vec3 min;
    Vec3 max;
};

struct Primitive {
    std::variant<Sphere, Plane, Box> shape;
    Material material;
};

struct Scene {
    std::string name;
    std::vector<Primitive> primitives;
    Rgb background{};

    /// Throws DomainError on non-finite parameters or invalid materials.
    void validate() const;
};

struct Hit {
    double t = 0.0;
    Vec3 point;
    Vec3 normal;  // unit, facing the incoming ray
    std::size_t primitive = 0;
};

std::optional<Hit> intersect(const Scene& scene, const Ray& ray, double t_min = 1e-9,
                             double t_max = std::numeric_limits<double>::infinity());

/// True if anything blocks the path from `origin` toward the directional light.
bool occluded(const Scene& scene, const Vec3& origin, const Vec3& light_dir);

/// Single-bounce direct lighting with a binary shadow ray. Not clamped.
Rgb trace_pixel(const Scene& scene, const Ray& ray, const Vec3& light_dir, const Rgb& irradiance = {1.0, 1.0, 1.0});

/// One primary ray through each pixel center. Not clamped.
Image render_image(const Scene& scene, const CameraModel& camera, const Vec3& light_dir,
                   const Rgb& irradiance = {1.0, 1.0, 1.0});

/// Built-in scenes: "reference" (checker sphere, roughness 0.3, resting on a
/// checker ground plane) and "chrome_ball" (mirror-like sphere, no albedo).
Scene make_scene(const std::string& name);

/// Sphere and ground plane of the reference scene, for analytic checks.
struct ReferenceGeometry {
    Sphere sphere;
    Plane ground;
};
ReferenceGeometry reference_geometry();

/// Canonical text description (JSON) and its FNV-1a 64 hash in hex.
std::string describe_scene(const Scene& scene);
std::string scene_hash(const Scene& scene);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace relit
