// SPDX-License-Identifier: Apache-2.0

#include "relit/dataset.hpp"

#include "relit/error.hpp"
#include "relit/lattice.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace relit {

using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
json mat_json(const Mat3& m) { return json(m.m); }

// Field access with the JSON pointer of the failing field in the error.
template <typename T>
T field(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ParseError("manifest: missing field " + where + "/" + key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError("manifest: field " + where + "/" + key + " has the wrong type");
    }
}

Vec3 vec_field(const json& j, const std::string& key, const std::string& where) {
    const auto a = field<std::vector<double>>(j, key, where);
    if (a.size() != 3) throw ParseError("manifest: field " + where + "/" + key + " must have 3 entries");
    return {a[0], a[1], a[2]};
}

Mat3 mat_field(const json& j, const std::string& key, const std::string& where) {
    const auto a = field<std::vector<double>>(j, key, where);
    if (a.size() != 9) throw ParseError("manifest: field " + where + "/" + key + " must have 9 entries");
    Mat3 m;
    std::copy(a.begin(), a.end(), m.m.begin());
    return m;
}

json split_json(const SplitSpec& s) {
    return {{"seed", s.seed}, {"held_out_views", s.held_out_views}, {"held_out_lights", s.held_out_lights}};
}

SplitSpec split_from_json(const json& j, const std::string& where) {
    SplitSpec s;
    s.seed = field<std::uint64_t>(j, "seed", where);
    s.held_out_views = field<std::vector<int>>(j, "held_out_views", where);
    s.held_out_lights = field<std::vector<int>>(j, "held_out_lights", where);
    return s;
}

std::string image_name(int cam, int light) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "images/c%03d_l%03d.pfm", cam, light);
    return buf;
}

int line_of_offset(const std::string& text, std::size_t offset) {
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(std::min(offset, text.size())), '\n'));
}

}  // namespace

void LightRig::validate() const {
    for (std::size_t i = 0; i < directions.size(); ++i) {
        if (std::abs(length(directions[i]) - 1.0) > 1e-9) throw DomainError("light rig: direction not unit length");
        for (std::size_t j = 0; j < i; ++j)
            if (length(directions[i] - directions[j]) < 1e-12) throw DomainError("light rig: duplicate direction");
    }
}

std::vector<CameraModel> camera_grid(int n_per_axis, double spacing_deg, double radius, const Vec3& target, int width,
                                     int height, double focal_px) {
    if (n_per_axis < 1) throw DomainError("camera_grid: need at least one camera per axis");
    if (!(spacing_deg > 0.0)) throw DomainError("camera_grid: spacing must be positive");
    if (!(radius > 0.0)) throw DomainError("camera_grid: radius must be positive");
    const double half_extent = 0.5 * (n_per_axis - 1) * spacing_deg;
    if (half_extent >= 90.0) throw DomainError("camera_grid: grid exceeds the front hemisphere");

    std::vector<CameraModel> cams;
    for (int row = 0; row < n_per_axis; ++row) {
        const double elevation = degrees_to_radians((row - 0.5 * (n_per_axis - 1)) * spacing_deg);
        for (int col = 0; col < n_per_axis; ++col) {
            const double azimuth = degrees_to_radians((col - 0.5 * (n_per_axis - 1)) * spacing_deg);
            const Vec3 dir = rotation_y(azimuth) * (rotation_x(-elevation) * Vec3{0.0, 0.0, 1.0});
            cams.push_back(look_at_camera(target + radius * dir, target, width, height, focal_px));
        }
    }
    return cams;
}

LightRig light_sphere_grid(double spacing_deg, bool hemisphere) {
    if (!(spacing_deg > 0.0 && spacing_deg <= 90.0)) throw DomainError("light_sphere_grid: spacing must be in (0, 90]");
    const double cap = 1.0 - std::cos(degrees_to_radians(0.5 * spacing_deg));
    const double full = 2.0 / cap;
    const auto n = static_cast<std::size_t>(std::max(1.0, std::round(hemisphere ? 0.5 * full : full)));
    return light_lattice(n, hemisphere);
}

LightRig light_lattice(std::size_t count, bool hemisphere) {
    return LightRig{hemisphere ? fibonacci_hemisphere(count) : fibonacci_sphere(count)};
}

bool SplitSpec::is_held_out_view(int id) const {
    return std::find(held_out_views.begin(), held_out_views.end(), id) != held_out_views.end();
}

bool SplitSpec::is_held_out_light(int id) const {
    return std::find(held_out_lights.begin(), held_out_lights.end(), id) != held_out_lights.end();
}

void SplitSpec::validate(int n_views, int n_lights) const {
    auto check = [](const std::vector<int>& ids, int n, const char* what) {
        std::set<int> seen;
        for (int id : ids) {
            if (id < 0 || id >= n) throw DomainError(std::string("split: ") + what + " id " + std::to_string(id) + " out of range");
            if (!seen.insert(id).second) throw DomainError(std::string("split: duplicate ") + what + " id " + std::to_string(id));
        }
        if (static_cast<int>(seen.size()) >= n) throw DomainError(std::string("split: no training ") + what + "s left");
    };
    check(held_out_views, n_views, "view");
    check(held_out_lights, n_lights, "light");
}

SplitSpec make_split(int n_views, int n_lights, int views_out, int lights_out, std::uint64_t seed) {
    if (views_out < 0 || lights_out < 0 || views_out >= n_views || lights_out >= n_lights)
        throw DomainError("make_split: held-out counts must leave training data");
    std::mt19937_64 rng(seed);
    auto pick = [&](int n, int k) {
        std::vector<int> ids(static_cast<std::size_t>(n));
        std::iota(ids.begin(), ids.end(), 0);
        // Explicit Fisher-Yates so the choice does not depend on the standard library.
        for (int i = n - 1; i > 0; --i) {
            const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
            std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
        }
        ids.resize(static_cast<std::size_t>(k));
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    SplitSpec s;
    s.seed = seed;
    s.held_out_views = pick(n_views, views_out);
    s.held_out_lights = pick(n_lights, lights_out);
    return s;
}

void save_split(const SplitSpec& split, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << split_json(split).dump(2) << '\n';
}

SplitSpec load_split(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open split file: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string text = ss.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": line " + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
    }
    return split_from_json(j, "");
}

const Image& OLATDataset::image(int camera, int light) const {
    const auto it = images.find({camera, light});
    if (it == images.end())
        throw DomainError("dataset: no image for camera " + std::to_string(camera) + ", light " + std::to_string(light));
    return it->second;
}

OLATDataset generate_dataset(const Scene& scene, const std::vector<CameraModel>& cameras, const LightRig& rig,
                             std::uint64_t seed, const GenerateOptions& options) {
    if (cameras.empty()) throw DomainError("generate_dataset: no cameras");
    if (rig.directions.empty()) throw DomainError("generate_dataset: no lights");
    scene.validate();
    rig.validate();
    for (const auto& c : cameras) {
        c.validate();
        if (c.width != cameras.front().width || c.height != cameras.front().height)
            throw DomainError("generate_dataset: cameras must share one resolution");
    }

    OLATDataset ds;
    ds.scene_name = scene.name;
    ds.scene_hash = scene_hash(scene);
    ds.seed = seed;
    ds.width = cameras.front().width;
    ds.height = cameras.front().height;
    ds.cameras = cameras;
    ds.lights = rig;
    ds.split = make_split(ds.camera_count(), ds.light_count(), options.held_out_views, options.held_out_lights, seed);
    ds.planes = fit_two_plane_bounds(cameras, options.z_uv, options.z_st);

    for (int c = 0; c < ds.camera_count(); ++c) {
        for (int l = 0; l < ds.light_count(); ++l) {
            Image img = render_image(scene, cameras[static_cast<std::size_t>(c)], rig.directions[static_cast<std::size_t>(l)],
                                     options.irradiance);
            if (options.clamp)
                for (float& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
            ds.images.emplace(std::make_pair(c, l), std::move(img));
        }
    }
    return ds;
}

void save_dataset(const OLATDataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec) throw IoError("cannot create dataset directory " + (dir / "images").string() + ": " + ec.message());

    json cams = json::array();
    for (std::size_t i = 0; i < ds.cameras.size(); ++i) {
        const auto& c = ds.cameras[i];
        cams.push_back({{"id", i}, {"K", mat_json(c.intrinsics)}, {"R", mat_json(c.rotation)}, {"t", vec_json(c.translation)},
                        {"width", c.width}, {"height", c.height}});
    }
    json lights = json::array();
    for (std::size_t i = 0; i < ds.lights.directions.size(); ++i)
        lights.push_back({{"id", i}, {"direction", vec_json(ds.lights.directions[i])}});
    json images = json::array();
    for (const auto& [key, img] : ds.images) {
        const std::string rel = image_name(key.first, key.second);
        write_pfm(dir / rel, img);
        images.push_back({{"camera", key.first}, {"light", key.second}, {"path", rel}});
    }
    json bounds = json::array();
    for (const auto& b : ds.planes.bounds) bounds.push_back(json::array({b.min, b.max}));

    const json manifest = {
        {"format", "relit-olat"},
        {"version", kManifestVersion},
        {"seed", ds.seed},
        {"scene", {{"name", ds.scene_name}, {"hash", ds.scene_hash}}},
        {"resolution", json::array({ds.width, ds.height})},
        {"two_plane", {{"z_uv", ds.planes.z_uv}, {"z_st", ds.planes.z_st}, {"bounds", bounds}}},
        {"cameras", cams},
        {"lights", lights},
        {"images", images},
        {"split", split_json(ds.split)},
    };
    const auto path = dir / "manifest.json";
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << manifest.dump(2) << '\n';
    if (!os) throw IoError("failed writing " + path.string());
}

OLATDataset load_dataset(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string text = ss.str();
    json m;
    try {
        m = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": line " + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
    }

    if (field<std::string>(m, "format", "") != "relit-olat") throw ParseError("manifest: field /format is not relit-olat");
    const int version = field<int>(m, "version", "");
    if (version != kManifestVersion) throw ParseError("manifest: unsupported version " + std::to_string(version));

    OLATDataset ds;
    ds.seed = field<std::uint64_t>(m, "seed", "");
    const json& scene = m.contains("scene") ? m["scene"] : json();
    ds.scene_name = field<std::string>(scene, "name", "/scene");
    ds.scene_hash = field<std::string>(scene, "hash", "/scene");
    const auto res = field<std::vector<int>>(m, "resolution", "");
    if (res.size() != 2 || res[0] <= 0 || res[1] <= 0) throw ParseError("manifest: field /resolution must be [width, height]");
    ds.width = res[0];
    ds.height = res[1];

    const json& tp = m.contains("two_plane") ? m["two_plane"] : json();
    ds.planes.z_uv = field<double>(tp, "z_uv", "/two_plane");
    ds.planes.z_st = field<double>(tp, "z_st", "/two_plane");
    const auto bounds = field<std::vector<std::vector<double>>>(tp, "bounds", "/two_plane");
    if (bounds.size() != 4) throw ParseError("manifest: field /two_plane/bounds must have 4 ranges");
    for (std::size_t i = 0; i < 4; ++i) {
        if (bounds[i].size() != 2) throw ParseError("manifest: field /two_plane/bounds/" + std::to_string(i) + " must be [min, max]");
        ds.planes.bounds[i] = {bounds[i][0], bounds[i][1]};
    }
    try {
        ds.planes.validate();
    } catch (const DomainError& e) {
        throw ParseError(std::string("manifest: /two_plane: ") + e.what());
    }

    const auto cams = field<json>(m, "cameras", "");
    if (!cams.is_array() || cams.empty()) throw ParseError("manifest: field /cameras must be a non-empty array");
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const std::string where = "/cameras/" + std::to_string(i);
        if (field<std::size_t>(cams[i], "id", where) != i) throw ParseError("manifest: field " + where + "/id out of order");
        CameraModel c;
        c.intrinsics = mat_field(cams[i], "K", where);
        c.rotation = mat_field(cams[i], "R", where);
        c.translation = vec_field(cams[i], "t", where);
        c.width = field<int>(cams[i], "width", where);
        c.height = field<int>(cams[i], "height", where);
        try {
            c.validate();
        } catch (const DomainError& e) {
            throw ParseError("manifest: " + where + ": " + e.what());
        }
        ds.cameras.push_back(c);
    }

    const auto lights = field<json>(m, "lights", "");
    if (!lights.is_array() || lights.empty()) throw ParseError("manifest: field /lights must be a non-empty array");
    for (std::size_t i = 0; i < lights.size(); ++i) {
        const std::string where = "/lights/" + std::to_string(i);
        if (field<std::size_t>(lights[i], "id", where) != i) throw ParseError("manifest: field " + where + "/id out of order");
        ds.lights.directions.push_back(vec_field(lights[i], "direction", where));
    }
    try {
        ds.lights.validate();
    } catch (const DomainError& e) {
        throw ParseError(std::string("manifest: /lights: ") + e.what());
    }

    ds.split = split_from_json(field<json>(m, "split", ""), "/split");
    try {
        ds.split.validate(ds.camera_count(), ds.light_count());
    } catch (const DomainError& e) {
        throw ParseError(std::string("manifest: /split: ") + e.what());
    }

    const auto images = field<json>(m, "images", "");
    if (!images.is_array()) throw ParseError("manifest: field /images must be an array");
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string where = "/images/" + std::to_string(i);
        const int cam = field<int>(images[i], "camera", where);
        const int light = field<int>(images[i], "light", where);
        const auto rel = field<std::string>(images[i], "path", where);
        if (cam < 0 || cam >= ds.camera_count() || light < 0 || light >= ds.light_count())
            throw ParseError("manifest: " + where + " references an unknown camera or light");
        if (ds.images.count({cam, light}))
            throw ParseError("manifest: " + where + " duplicates (camera " + std::to_string(cam) + ", light " +
                             std::to_string(light) + ")");
        const auto img_path = dir / rel;
        if (!std::filesystem::exists(img_path))
            throw IoError("dataset: image for (camera " + std::to_string(cam) + ", light " + std::to_string(light) +
                          ") missing: " + img_path.string());
        Image img = read_pfm(img_path);
        if (img.width != ds.width || img.height != ds.height || img.channels != 3)
            throw ParseError("manifest: " + where + " image dimensions do not match the resolution");
        ds.images.emplace(std::make_pair(cam, light), std::move(img));
    }
    if (static_cast<int>(ds.images.size()) != ds.camera_count() * ds.light_count())
        throw ParseError("manifest: /images must list exactly one image per (camera, light) pair");
    return ds;
}

}  // namespace relit
