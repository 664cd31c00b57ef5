// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/geometry.hpp"
#include "relit/image.hpp"
#include "relit/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace relit {

/// Unit light directions, surface -> light, each with unit white irradiance.
struct LightRig {
    std::vector<Vec3> directions;

    std::size_t size() const { return directions.size(); }
    /// Throws DomainError unless every direction is unit length and distinct.
    void validate() const;

    friend bool operator==(const LightRig&, const LightRig&) = default;
};

/// n x n cameras on the front (+z) hemisphere around `target`, row-major by
/// elevation then azimuth. Camera (row, col) sits along
/// Ry(azimuth_col) Rx(-elevation_row) (0,0,1), so cameras in a column, and
/// in the central row, are exactly `spacing_deg` apart. Throws DomainError
/// when the grid would reach the hemisphere boundary.
std::vector<CameraModel> camera_grid(int n_per_axis, double spacing_deg, double radius, const Vec3& target, int width,
                                     int height, double focal_px);

/// Fibonacci lattice sized so each light owns a cap of angular radius
/// spacing/2: n = round(2 / (1 - cos(spacing/2))) on the sphere, half that
/// on the z >= 0 hemisphere.
LightRig light_sphere_grid(double spacing_deg, bool hemisphere);

/// Exactly `count` lattice lights.
LightRig light_lattice(std::size_t count, bool hemisphere);

/// Held-out views and lights for testing; everything else trains.
struct SplitSpec {
    std::vector<int> held_out_views;
    std::vector<int> held_out_lights;
    std::uint64_t seed = 0;

    bool is_held_out_view(int id) const;
    bool is_held_out_light(int id) const;
    /// Throws DomainError for unknown or duplicate ids, or when nothing is left to train on.
    void validate(int n_views, int n_lights) const;

    friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

/// Seeded random choice of `views_out` views and `lights_out` lights.
SplitSpec make_split(int n_views, int n_lights, int views_out, int lights_out, std::uint64_t seed);

void save_split(const SplitSpec& split, const std::filesystem::path& path);
SplitSpec load_split(const std::filesystem::path& path);

struct OLATDataset {
    std::string scene_name;
    std::string scene_hash;
    std::uint64_t seed = 0;
    int width = 0;
    int height = 0;
    std::vector<CameraModel> cameras;
    LightRig lights;
    TwoPlaneConfig planes;
    SplitSpec split;
    std::map<std::pair<int, int>, Image> images;  // (camera id, light id)

    const Image& image(int camera, int light) const;
    int camera_count() const { return static_cast<int>(cameras.size()); }
    int light_count() const { return static_cast<int>(lights.size()); }

    friend bool operator==(const OLATDataset&, const OLATDataset&) = default;
};

struct GenerateOptions {
    Rgb irradiance{1.0, 1.0, 1.0};
    /// Clamp stored pixels to [0, 1].
    bool clamp = true;
    double z_uv = 1.0;
    double z_st = 0.0;
    int held_out_views = 0;
    int held_out_lights = 0;
};

/// Renders one image per (camera, light) pair. The only randomness is the
/// seeded split, so the result is a pure function of the arguments.
OLATDataset generate_dataset(const Scene& scene, const std::vector<CameraModel>& cameras, const LightRig& rig,
                             std::uint64_t seed, const GenerateOptions& options = {});

/// Directory layout: manifest.json plus images/c###_l###.pfm.
void save_dataset(const OLATDataset& dataset, const std::filesystem::path& dir);
/// Throws ParseError (with line or field) for malformed manifests and IoError
/// naming the (camera, light) pair for missing images.
OLATDataset load_dataset(const std::filesystem::path& dir);

}  // namespace relit
