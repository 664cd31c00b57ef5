// SPDX-License-Identifier: Apache-2.0

#include "relit/relighting.hpp"

#include "relit/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace relit {

void EnvironmentMap::validate() const {
    if (radiance.height <= 0 || radiance.width != 2 * radiance.height)
        throw DomainError("environment map: width must be twice the height");
    if (radiance.channels != 3 && radiance.channels != 1) throw DomainError("environment map: expected 1 or 3 channels");
    for (float v : radiance.pixels)
        if (!std::isfinite(v) || v < 0.0f) throw DomainError("environment map: radiance must be finite and non-negative");
    if (!std::isfinite(orientation)) throw DomainError("environment map: orientation must be finite");
}

Rgb EnvironmentMap::sample(const Vec3& d) const {
    const int w = radiance.width, h = radiance.height;
    const double theta = std::acos(std::clamp(d.y / length(d), -1.0, 1.0));
    double u = (std::atan2(d.x, d.z) - orientation) / (2.0 * kPi) + 0.5;
    u -= std::floor(u);
    const double px = u * w - 0.5;
    const double py = std::clamp(theta / kPi * h - 0.5, 0.0, static_cast<double>(h - 1));
    const double fx0 = std::floor(px), fy0 = std::floor(py);
    const double tx = px - fx0, ty = py - fy0;
    const int x0 = ((static_cast<int>(fx0) % w) + w) % w;
    const int x1 = (x0 + 1) % w;
    const int y0 = static_cast<int>(fy0);
    const int y1 = std::min(y0 + 1, h - 1);
    return (1 - ty) * ((1 - tx) * radiance.rgb(x0, y0) + tx * radiance.rgb(x1, y0)) +
           ty * ((1 - tx) * radiance.rgb(x0, y1) + tx * radiance.rgb(x1, y1));
}

EnvironmentMap load_environment(const std::filesystem::path& path, double orientation) {
    EnvironmentMap env{read_pfm(path), orientation};
    env.validate();
    return env;
}

std::vector<Rgb> envmap_weights(const EnvironmentMap& env, const std::vector<Vec3>& directions) {
    env.validate();
    std::vector<Rgb> out;
    out.reserve(directions.size());
    const double share = 4.0 * kPi / static_cast<double>(directions.size());
    for (const auto& d : directions) out.push_back(share * env.sample(d));
    return out;
}

std::size_t zero_back_hemisphere(std::vector<Rgb>& weights, const std::vector<Vec3>& directions) {
    if (weights.size() != directions.size()) throw DomainError("zero_back_hemisphere: length mismatch");
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i)
        if (directions[i].z < 0.0) {
            weights[i] = {};
            ++n;
        }
    return n;
}

std::vector<Vec3> front_hemisphere(const std::vector<Vec3>& directions) {
    std::vector<Vec3> out;
    std::copy_if(directions.begin(), directions.end(), std::back_inserter(out), [](const Vec3& d) { return d.z >= 0.0; });
    return out;
}

OLATSweep olat_sweep(const Model& model, const CameraModel& camera, const TwoPlaneConfig& cfg,
                     const std::vector<Vec3>& directions) {
    OLATSweep sweep;
    sweep.camera = camera;
    sweep.directions = directions;
    const ViewFeatures features = prepare_view(model, camera, cfg);
    sweep.images.reserve(directions.size());
    for (const auto& d : directions) sweep.images.push_back(shade_view(model, features, d));
    return sweep;
}

Image relight_hdri(const OLATSweep& sweep, const std::vector<Rgb>& weights) {
    if (weights.size() != sweep.images.size() || sweep.images.size() != sweep.directions.size())
        throw DomainError("relight_hdri: weight count does not match the sweep");
    if (sweep.images.empty()) throw DomainError("relight_hdri: empty sweep");
    const Image& first = sweep.images.front();
    if (first.channels != 3) throw DomainError("relight_hdri: sweep images must be RGB");
    for (const auto& img : sweep.images)
        if (!img.same_shape(first)) throw DomainError("relight_hdri: sweep images differ in size");

    std::vector<double> acc(first.pixels.size(), 0.0);
    for (std::size_t i = 0; i < sweep.images.size(); ++i) {
        const auto& px = sweep.images[i].pixels;
        const Rgb& w = weights[i];
        for (std::size_t p = 0; p < px.size(); p += 3) {
            acc[p] += w.x * px[p];
            acc[p + 1] += w.y * px[p + 1];
            acc[p + 2] += w.z * px[p + 2];
        }
    }
    Image out(first.width, first.height, 3);
    for (std::size_t p = 0; p < acc.size(); ++p) out.pixels[p] = static_cast<float>(std::max(acc[p], 0.0));
    return out;
}

namespace {

std::string olat_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "olat_%05zu.pfm", i);
    return buf;
}

}  // namespace

void save_sweep(const OLATSweep& sweep, const std::filesystem::path& dir) {
    if (sweep.images.size() != sweep.directions.size()) throw DomainError("save_sweep: stack and directions differ");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create sweep directory " + dir.string() + ": " + ec.message());
    std::ofstream os(dir / "directions.csv");
    if (!os) throw IoError("cannot open for writing: " + (dir / "directions.csv").string());
    os << "id,x,y,z\n";
    char buf[128];
    for (std::size_t i = 0; i < sweep.directions.size(); ++i) {
        const Vec3& d = sweep.directions[i];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, d.x, d.y, d.z);
        os << buf;
        write_pfm(dir / olat_name(i), sweep.images[i]);
    }
}

OLATSweep load_sweep(const std::filesystem::path& dir) {
    const auto path = dir / "directions.csv";
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(is, line);
    if (line != "id,x,y,z") throw ParseError(path.string() + ": line 1: unexpected header");
    OLATSweep sweep;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t id = 0;
        Vec3 d;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf", &id, &d.x, &d.y, &d.z) != 4 || id != sweep.directions.size())
            throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": malformed direction row");
        sweep.directions.push_back(d);
        sweep.images.push_back(read_pfm(dir / olat_name(id)));
    }
    return sweep;
}

void write_weight_table(const std::filesystem::path& path, const std::vector<Vec3>& directions,
                        const std::vector<Rgb>& weights) {
    if (directions.size() != weights.size()) throw DomainError("write_weight_table: length mismatch");
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "id,x,y,z,r,g,b\n";
    char buf[256];
    for (std::size_t i = 0; i < directions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", i, directions[i].x, directions[i].y,
                      directions[i].z, weights[i].x, weights[i].y, weights[i].z);
        os << buf;
    }
}

}  // namespace relit
