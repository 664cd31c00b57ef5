// SPDX-License-Identifier: Apache-2.0

#include "relit/calibration.hpp"

#include "relit/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace relit {

namespace {

constexpr double kTopFraction = 0.001;
constexpr double kTieTolerance = 1e-9;

struct DiscPixel {
    double lum;
    int x;
    int y;
};

}  // namespace

double luminance(const Rgb& c) { return 0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z; }

LightCalibration chrome_ball_light_dir(const Image& image, const BallCircle& ball, const CameraModel& camera,
                                       double luminance_floor) {
    camera.validate();
    if (image.width != camera.width || image.height != camera.height)
        throw DomainError("chrome ball: image size does not match the camera");
    if (!(ball.radius > 0.0) || ball.cx - ball.radius < 0.0 || ball.cy - ball.radius < 0.0 ||
        ball.cx + ball.radius > image.width || ball.cy + ball.radius > image.height)
        throw DomainError("chrome ball: the ball must lie fully inside the image");

    std::vector<DiscPixel> disc;
    const int x0 = static_cast<int>(std::floor(ball.cx - ball.radius));
    const int x1 = static_cast<int>(std::ceil(ball.cx + ball.radius));
    const int y0 = static_cast<int>(std::floor(ball.cy - ball.radius));
    const int y1 = static_cast<int>(std::ceil(ball.cy + ball.radius));
    for (int y = std::max(0, y0); y < std::min(image.height, y1); ++y) {
        for (int x = std::max(0, x0); x < std::min(image.width, x1); ++x) {
            const double dx = x + 0.5 - ball.cx, dy = y + 0.5 - ball.cy;
            if (dx * dx + dy * dy > ball.radius * ball.radius) continue;
            disc.push_back({luminance(image.rgb(x, y)), x, y});
        }
    }
    if (disc.empty()) throw CalibrationError("chrome ball: the disc contains no pixels");

    std::sort(disc.begin(), disc.end(), [](const DiscPixel& a, const DiscPixel& b) {
        if (a.lum != b.lum) return a.lum > b.lum;
        return a.y != b.y ? a.y < b.y : a.x < b.x;
    });
    if (!(disc.front().lum > luminance_floor))
        throw CalibrationError("chrome ball: no pixel inside the ball exceeds the luminance floor");
    // Pixels tied with the cutoff join the set, so symmetric highlights stay symmetric.
    auto top = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(kTopFraction * disc.size())));
    const double cutoff = disc[top - 1].lum * (1.0 - kTieTolerance);
    while (top < disc.size() && disc[top].lum >= cutoff) ++top;

    double wsum = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < top; ++i) {
        const double w = std::max(disc[i].lum, 0.0);
        wsum += w;
        sx += w * (disc[i].x + 0.5);
        sy += w * (disc[i].y + 0.5);
    }

    LightCalibration out;
    out.spot_x = sx / wsum;
    out.spot_y = sy / wsum;

    const Vec3 eye = camera.center();
    const Vec3 center = eye + ray_from_pixel(camera, ball.cx, ball.cy).direction;
    const double fx = camera.intrinsics.m[0];
    const double rho = std::sin(std::atan(ball.radius / fx));
    const Vec3 dir = ray_from_pixel(camera, out.spot_x, out.spot_y).direction;

    // Nearest intersection with the ball; a ray that just misses (rim pixel)
    // takes the closest point on the silhouette instead.
    const Vec3 oc = eye - center;
    const double b = dot(oc, dir);
    const double disc_term = b * b - (dot(oc, oc) - rho * rho);
    const double t = disc_term > 0.0 ? -b - std::sqrt(disc_term) : -b;
    out.normal = normalized(eye + t * dir - center);
    const Vec3 view = -dir;
    const double nv = dot(out.normal, view);
    out.direction = normalized(2.0 * nv * out.normal - view);
    out.low_confidence = nv < kRimCosine;
    return out;
}

}  // namespace relit
