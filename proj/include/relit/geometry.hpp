// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/vec3.hpp"

#include <array>
#include <span>
#include <vector>

namespace relit {

/// Pinhole camera. `rotation` maps world to camera coordinates
/// (x right, y down, z forward); a world point X projects to K (R X + t).
struct CameraModel {
    Mat3 intrinsics = Mat3::identity();
    Mat3 rotation = Mat3::identity();
    Vec3 translation{};
    int width = 0;
    int height = 0;

    /// Camera center in world coordinates.
    Vec3 center() const { return -(rotation.transposed() * translation); }
    /// Optical axis in world coordinates.
    Vec3 forward() const { return rotation.row(2); }

    /// Throws DomainError unless R is orthonormal (1e-9), focal lengths are
    /// positive, skew is zero and the image is non-empty.
    void validate() const;

    friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

/// Builds a camera at `position` looking at `target`. World up is +y.
CameraModel look_at_camera(const Vec3& position, const Vec3& target, int width, int height,
                           double focal_px);

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
};

struct AxisRange {
    double min = -1.0;
    double max = 1.0;
    friend bool operator==(const AxisRange&, const AxisRange&) = default;
};

/// Two parallel planes z = z_uv and z = z_st plus the per-axis ranges that
/// map raw intersection coordinates (u, v, s, t) into [-1, 1].
struct TwoPlaneConfig {
    double z_uv = 1.0;
    double z_st = 0.0;
    std::array<AxisRange, 4> bounds{};

    void validate() const;

    std::array<double, 4> normalize(const std::array<double, 4>& raw) const;
    std::array<double, 4> denormalize(const std::array<double, 4>& normalized) const;

    friend bool operator==(const TwoPlaneConfig&, const TwoPlaneConfig&) = default;
};

/// Normalized light-field ray coordinates, each in [-1, 1].
struct Ray4D {
    double u = 0, v = 0, s = 0, t = 0;

    std::array<double, 4> as_array() const { return {u, v, s, t}; }
    static Ray4D from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
    friend bool operator==(const Ray4D&, const Ray4D&) = default;
};

/// Back-projects a continuous pixel position (pixel centers at i + 0.5).
/// Throws DomainError if the position lies outside [0,width) x [0,height).
Ray ray_from_pixel(const CameraModel& camera, double px, double py);

/// Unnormalized plane intersections (x,y at z_uv, then x,y at z_st).
/// Throws DegenerateRayError when |direction.z| < 1e-9 and OutOfBoundsError
/// when a plane lies behind the ray origin.
std::array<double, 4> two_plane_intersections(const Ray& ray, const TwoPlaneConfig& cfg);

/// Full parameterization: intersections mapped through cfg.bounds.
/// Throws OutOfBoundsError if a coordinate leaves [-1, 1].
Ray4D two_plane_param(const Ray& ray, const TwoPlaneConfig& cfg);

/// The ray through the two (unnormalized) plane points, oriented uv -> st.
Ray ray_from_intersections(const std::array<double, 4>& raw, const TwoPlaneConfig& cfg);

struct PixelRay {
    int x = 0;
    int y = 0;
    Ray ray;
    Ray4D coords;
    bool valid = false;  // false: ray missed the bounds or the planes
};

/// One entry per pixel in row-major order. Invalid rays are flagged, never dropped.
std::vector<PixelRay> batch_rays_for_view(const CameraModel& camera, const TwoPlaneConfig& cfg);

/// Axis-aligned extent of every pixel ray's plane intersections over the
/// given cameras, padded by `padding` (fraction of the extent) on each side.
TwoPlaneConfig fit_two_plane_bounds(std::span<const CameraModel> cameras, double z_uv, double z_st,
                                    double padding = 0.05);

}  // namespace relit
