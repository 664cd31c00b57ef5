// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/image.hpp"
#include "relit/model.hpp"

#include <filesystem>
#include <vector>

namespace relit {

/// Equirectangular radiance map. Row 0 looks along +y (polar angle 0);
/// column u covers azimuth atan2(x, z) = 2 pi (u - 1/2) + orientation.
struct EnvironmentMap {
    Image radiance;
    double orientation = 0.0;  // rotation about +y, radians

    /// Throws DomainError unless width = 2 height and radiance is finite and >= 0.
    void validate() const;
    /// Bilinear lookup, wrapping in azimuth and clamping at the poles.
    Rgb sample(const Vec3& direction) const;
};

/// Reads a PFM and validates it.
EnvironmentMap load_environment(const std::filesystem::path& path, double orientation = 0.0);

/// weight_i = env(direction_i) * 4 pi / n.
std::vector<Rgb> envmap_weights(const EnvironmentMap& env, const std::vector<Vec3>& directions);

/// Zeroes weights of directions with z < 0 (behind the trained light
/// hemisphere). Returns how many were zeroed.
std::size_t zero_back_hemisphere(std::vector<Rgb>& weights, const std::vector<Vec3>& directions);

/// Directions with z >= 0, in order.
std::vector<Vec3> front_hemisphere(const std::vector<Vec3>& directions);

struct OLATSweep {
    std::vector<Vec3> directions;
    std::vector<Image> images;
    CameraModel camera;
};

/// One rendered view per direction. Encoder features are computed once and
/// shared, so entry i is bit-identical to render_view(model, camera, cfg, d_i).
OLATSweep olat_sweep(const Model& model, const CameraModel& camera, const TwoPlaneConfig& cfg,
                     const std::vector<Vec3>& directions);

/// Pixelwise sum of weight_i * image_i in a fixed order, accumulated in double
/// and clamped to >= 0. Throws DomainError on length or shape mismatch.
Image relight_hdri(const OLATSweep& sweep, const std::vector<Rgb>& weights);

/// Cache layout: directions.csv (id,x,y,z) plus olat_#####.pfm per direction.
void save_sweep(const OLATSweep& sweep, const std::filesystem::path& dir);
/// The camera is not stored; the loaded sweep carries a default camera.
OLATSweep load_sweep(const std::filesystem::path& dir);

/// Delimited dump: id,x,y,z,r,g,b.
void write_weight_table(const std::filesystem::path& path, const std::vector<Vec3>& directions,
                        const std::vector<Rgb>& weights);

}  // namespace relit
