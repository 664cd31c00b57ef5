// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/dataset.hpp"

#include <array>
#include <vector>

namespace relit {

/// Index into `directions` maximizing dot(d, query); ties go to the lowest index.
/// Throws DomainError for an empty list.
std::size_t nearest_direction(const std::vector<Vec3>& directions, const Vec3& query);

/// Faces of the convex hull of a set of unit directions whose planes keep the
/// origin on their inner side, i.e. the triangles of the spherical cover.
struct SphericalTriangulation {
    std::vector<Vec3> directions;
    std::vector<std::array<int, 3>> faces;
};

/// Throws DomainError with fewer than three directions or when they span no triangle.
SphericalTriangulation triangulate_directions(const std::vector<Vec3>& directions);

struct BlendWeights {
    std::array<int, 3> ids{-1, -1, -1};  // indices into the triangulated directions
    std::array<double, 3> weights{};
    bool inside = false;  // false: query outside every face
};

/// Barycentric weights of the face containing `query`, from the gnomonic
/// projection of the query onto the face plane. Weights are non-negative and sum to 1.
BlendWeights barycentric_weights(const SphericalTriangulation& tri, const Vec3& query);

/// Training lights (not held out) of a dataset, in id order.
std::vector<int> training_lights(const OLATDataset& dataset);

struct BaselineImage {
    Image image;
    std::array<int, 3> lights{-1, -1, -1};  // dataset light ids used
    std::array<double, 3> weights{};
    /// Barycentric query outside the hull: the nearest light image was used instead.
    bool fallback = false;
};

/// The training image of `camera` whose light is closest to `light`.
/// Throws DomainError for an unknown camera.
BaselineImage nearest_light_baseline(const OLATDataset& dataset, int camera, const Vec3& light);

/// Blend of the three training images spanning the triangle that contains
/// `light`, falling back to the nearest image outside the hull. Throws
/// DomainError for an unknown camera or fewer than three usable lights.
BaselineImage barycentric_baseline(const OLATDataset& dataset, int camera, const Vec3& light);

}  // namespace relit
