// SPDX-License-Identifier: Apache-2.0

#include "relit/geometry.hpp"

#include "relit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace relit {

namespace {

constexpr double kParallelEpsilon = 1e-9;
// Normalized coordinates may overshoot [-1,1] by rounding only.
constexpr double kBoundsSlack = 1e-12;

}  // namespace

void CameraModel::validate() const {
    if (width <= 0 || height <= 0) throw DomainError("camera: image dimensions must be positive");
    if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0))
        throw DomainError("camera: focal lengths must be positive");
    if (intrinsics(0, 1) != 0.0) throw DomainError("camera: skew must be zero");
    const Mat3 rtr = rotation.transposed() * rotation;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (std::abs(rtr(r, c) - (r == c ? 1.0 : 0.0)) > 1e-9)
                throw DomainError("camera: rotation is not orthonormal");
}

CameraModel look_at_camera(const Vec3& position, const Vec3& target, int width, int height,
                           double focal_px) {
    const Vec3 forward = normalized(target - position);
    Vec3 up{0.0, 1.0, 0.0};
    if (length(cross(forward, up)) < 1e-9) up = Vec3{0.0, 0.0, -1.0};
    const Vec3 right = normalized(cross(forward, up));
    const Vec3 down = cross(forward, right);

    CameraModel cam;
    cam.rotation = Mat3::from_rows(right, down, forward);
    cam.translation = -(cam.rotation * position);
    cam.intrinsics = Mat3{{focal_px, 0.0, 0.5 * width, 0.0, focal_px, 0.5 * height, 0.0, 0.0, 1.0}};
    cam.width = width;
    cam.height = height;
    return cam;
}

void TwoPlaneConfig::validate() const {
    if (z_uv == z_st) throw DomainError("two-plane config: planes coincide");
    for (const auto& b : bounds)
        if (!(b.min < b.max)) throw DomainError("two-plane config: bounds min must be below max");
}

std::array<double, 4> TwoPlaneConfig::normalize(const std::array<double, 4>& raw) const {
    std::array<double, 4> out{};
    for (std::size_t i = 0; i < 4; ++i)
        out[i] = 2.0 * (raw[i] - bounds[i].min) / (bounds[i].max - bounds[i].min) - 1.0;
    return out;
}

std::array<double, 4> TwoPlaneConfig::denormalize(const std::array<double, 4>& normalized) const {
    std::array<double, 4> out{};
    for (std::size_t i = 0; i < 4; ++i)
        out[i] = bounds[i].min + 0.5 * (normalized[i] + 1.0) * (bounds[i].max - bounds[i].min);
    return out;
}

Ray ray_from_pixel(const CameraModel& camera, double px, double py) {
    if (!(px >= 0.0 && px < camera.width && py >= 0.0 && py < camera.height))
        throw DomainError("ray_from_pixel: pixel (" + std::to_string(px) + ", " + std::to_string(py) +
                          ") outside the image");
    const Mat3& k = camera.intrinsics;
    const Vec3 dir_cam{(px - k(0, 2)) / k(0, 0), (py - k(1, 2)) / k(1, 1), 1.0};
    const Mat3 rt = camera.rotation.transposed();
    return Ray{camera.center(), normalized(rt * dir_cam)};
}

std::array<double, 4> two_plane_intersections(const Ray& ray, const TwoPlaneConfig& cfg) {
    if (std::abs(ray.direction.z) < kParallelEpsilon)
        throw DegenerateRayError("two_plane_param: ray is parallel to the light-field planes");
    const double t_uv = (cfg.z_uv - ray.origin.z) / ray.direction.z;
    const double t_st = (cfg.z_st - ray.origin.z) / ray.direction.z;
    if (t_uv < 0.0 || t_st < 0.0)
        throw OutOfBoundsError("two_plane_param: light-field plane behind the ray origin");
    const Vec3 p_uv = ray.origin + t_uv * ray.direction;
    const Vec3 p_st = ray.origin + t_st * ray.direction;
    return {p_uv.x, p_uv.y, p_st.x, p_st.y};
}

Ray4D two_plane_param(const Ray& ray, const TwoPlaneConfig& cfg) {
    auto n = cfg.normalize(two_plane_intersections(ray, cfg));
    for (double& c : n) {
        if (!std::isfinite(c) || std::abs(c) > 1.0 + kBoundsSlack)
            throw OutOfBoundsError("two_plane_param: intersection outside the normalization bounds");
        c = std::clamp(c, -1.0, 1.0);
    }
    return Ray4D::from_array(n);
}

Ray ray_from_intersections(const std::array<double, 4>& raw, const TwoPlaneConfig& cfg) {
    const Vec3 p_uv{raw[0], raw[1], cfg.z_uv};
    const Vec3 p_st{raw[2], raw[3], cfg.z_st};
    return Ray{p_uv, normalized(p_st - p_uv)};
}

std::vector<PixelRay> batch_rays_for_view(const CameraModel& camera, const TwoPlaneConfig& cfg) {
    std::vector<PixelRay> out;
    out.reserve(static_cast<std::size_t>(camera.width) * static_cast<std::size_t>(camera.height));
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            PixelRay pr;
            pr.x = x;
            pr.y = y;
            pr.ray = ray_from_pixel(camera, x + 0.5, y + 0.5);
            try {
                pr.coords = two_plane_param(pr.ray, cfg);
                pr.valid = true;
            } catch (const DomainError&) {
                pr.valid = false;
            }
            out.push_back(pr);
        }
    }
    return out;
}

TwoPlaneConfig fit_two_plane_bounds(std::span<const CameraModel> cameras, double z_uv, double z_st,
                                    double padding) {
    TwoPlaneConfig cfg;
    cfg.z_uv = z_uv;
    cfg.z_st = z_st;
    std::array<double, 4> lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    bool any = false;
    for (const auto& cam : cameras) {
        for (int y = 0; y < cam.height; ++y) {
            for (int x = 0; x < cam.width; ++x) {
                const Ray r = ray_from_pixel(cam, x + 0.5, y + 0.5);
                std::array<double, 4> raw;
                try {
                    raw = two_plane_intersections(r, cfg);
                } catch (const DomainError&) {
                    continue;
                }
                any = true;
                for (std::size_t i = 0; i < 4; ++i) {
                    lo[i] = std::min(lo[i], raw[i]);
                    hi[i] = std::max(hi[i], raw[i]);
                }
            }
        }
    }
    if (!any) throw DomainError("fit_two_plane_bounds: no camera ray reaches both planes");
    for (std::size_t i = 0; i < 4; ++i) {
        const double extent = std::max(hi[i] - lo[i], 1e-6);
        cfg.bounds[i] = AxisRange{lo[i] - padding * extent, hi[i] + padding * extent};
    }
    return cfg;
}

}  // namespace relit
