// SPDX-License-Identifier: Apache-2.0

#include "relit/baselines.hpp"

#include "relit/error.hpp"

#include <cmath>

namespace relit {

namespace {

constexpr double kPlaneEps = 1e-12;
constexpr double kInsideEps = 1e-12;

void check_camera(const OLATDataset& ds, int camera) {
    if (camera < 0 || camera >= ds.camera_count())
        throw DomainError("baseline: unknown camera id " + std::to_string(camera));
}

Image blend(const OLATDataset& ds, int camera, const std::array<int, 3>& lights, const std::array<double, 3>& w) {
    const Image& first = ds.image(camera, lights[0]);
    Image out(first.width, first.height, first.channels);
    for (std::size_t p = 0; p < out.pixels.size(); ++p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 3; ++k) acc += w[k] * ds.image(camera, lights[k]).pixels[p];
        out.pixels[p] = static_cast<float>(acc);
    }
    return out;
}

}  // namespace

std::size_t nearest_direction(const std::vector<Vec3>& directions, const Vec3& query) {
    if (directions.empty()) throw DomainError("nearest_direction: no directions");
    std::size_t best = 0;
    double best_dot = dot(directions[0], query);
    for (std::size_t i = 1; i < directions.size(); ++i) {
        const double d = dot(directions[i], query);
        if (d > best_dot) {
            best_dot = d;
            best = i;
        }
    }
    return best;
}

SphericalTriangulation triangulate_directions(const std::vector<Vec3>& dirs) {
    if (dirs.size() < 3) throw DomainError("triangulation: need at least three directions");
    SphericalTriangulation tri;
    tri.directions = dirs;
    const int n = static_cast<int>(dirs.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                Vec3 normal = cross(dirs[j] - dirs[i], dirs[k] - dirs[i]);
                const double len = length(normal);
                if (len < 1e-12) continue;
                normal = normal / len;
                bool pos = false, neg = false;
                for (int m = 0; m < n && !(pos && neg); ++m) {
                    if (m == i || m == j || m == k) continue;
                    const double s = dot(normal, dirs[m] - dirs[i]);
                    if (s > kPlaneEps) pos = true;
                    if (s < -kPlaneEps) neg = true;
                }
                if (pos && neg) continue;
                // Orient outward; keep faces with the origin on the inner side.
                if (pos) normal = -normal;
                if (dot(normal, dirs[i]) > kPlaneEps) tri.faces.push_back({i, j, k});
            }
    if (tri.faces.empty()) throw DomainError("triangulation: directions span no spherical triangle");
    return tri;
}

BlendWeights barycentric_weights(const SphericalTriangulation& tri, const Vec3& q) {
    BlendWeights out;
    for (const auto& f : tri.faces) {
        const Vec3& a = tri.directions[static_cast<std::size_t>(f[0])];
        const Vec3& b = tri.directions[static_cast<std::size_t>(f[1])];
        const Vec3& c = tri.directions[static_cast<std::size_t>(f[2])];
        const Vec3 normal = cross(b - a, c - a);
        const double denom = dot(normal, q);
        const double num = dot(normal, a);
        if (std::abs(denom) < 1e-15 || num / denom <= 0.0) continue;
        const Vec3 p = (num / denom) * q;
        const double area = dot(normal, normal);
        const double wa = dot(cross(b - p, c - p), normal) / area;
        const double wb = dot(cross(c - p, a - p), normal) / area;
        const double wc = 1.0 - wa - wb;
        if (wa < -kInsideEps || wb < -kInsideEps || wc < -kInsideEps) continue;
        std::array<double, 3> w{std::max(wa, 0.0), std::max(wb, 0.0), std::max(wc, 0.0)};
        const double sum = w[0] + w[1] + w[2];
        for (double& x : w) x /= sum;
        out.ids = f;
        out.weights = w;
        out.inside = true;
        return out;
    }
    return out;
}

std::vector<int> training_lights(const OLATDataset& ds) {
    std::vector<int> ids;
    for (int l = 0; l < ds.light_count(); ++l)
        if (!ds.split.is_held_out_light(l)) ids.push_back(l);
    return ids;
}

BaselineImage nearest_light_baseline(const OLATDataset& ds, int camera, const Vec3& light) {
    check_camera(ds, camera);
    const std::vector<int> ids = training_lights(ds);
    if (ids.empty()) throw DomainError("nearest baseline: no training lights");
    std::vector<Vec3> dirs;
    for (int id : ids) dirs.push_back(ds.lights.directions[static_cast<std::size_t>(id)]);
    const int best = ids[nearest_direction(dirs, light)];
    BaselineImage out;
    out.image = ds.image(camera, best);
    out.lights = {best, -1, -1};
    out.weights = {1.0, 0.0, 0.0};
    return out;
}

BaselineImage barycentric_baseline(const OLATDataset& ds, int camera, const Vec3& light) {
    check_camera(ds, camera);
    const std::vector<int> ids = training_lights(ds);
    if (ids.size() < 3) throw DomainError("barycentric baseline: need at least three training lights");
    std::vector<Vec3> dirs;
    for (int id : ids) dirs.push_back(ds.lights.directions[static_cast<std::size_t>(id)]);
    const SphericalTriangulation tri = triangulate_directions(dirs);
    const BlendWeights bw = barycentric_weights(tri, light);
    if (!bw.inside) {
        BaselineImage out = nearest_light_baseline(ds, camera, light);
        out.fallback = true;
        return out;
    }
    BaselineImage out;
    for (std::size_t k = 0; k < 3; ++k) out.lights[k] = ids[static_cast<std::size_t>(bw.ids[k])];
    out.weights = bw.weights;
    out.image = blend(ds, camera, out.lights, out.weights);
    return out;
}

}  // namespace relit
