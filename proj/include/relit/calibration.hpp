// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/geometry.hpp"
#include "relit/image.hpp"

namespace relit {

/// Ball silhouette in pixel coordinates (continuous, pixel centers at i + 0.5).
struct BallCircle {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
};

struct LightCalibration {
    Vec3 direction;  // unit, surface -> light, world coordinates
    Vec3 normal;     // mirror normal at the highlight
    double spot_x = 0.0;
    double spot_y = 0.0;
    /// Highlight close to the silhouette, where small pixel errors swing the normal.
    bool low_confidence = false;
};

/// Rec.709 luminance of a linear RGB value.
double luminance(const Rgb& c);

/// Light direction from the highlight on a mirror ball: the luminance-weighted
/// centroid of the brightest 0.1% of disc pixels (ties at the cutoff included) is back-projected onto the
/// ball (placed at unit distance along the ray through its centre, with the
/// angular radius implied by `ball.radius`), and the view direction is
/// reflected about the normal there.
///
/// Throws DomainError when the disc leaves the image and CalibrationError
/// when no disc pixel is brighter than `luminance_floor`.
LightCalibration chrome_ball_light_dir(const Image& image, const BallCircle& ball, const CameraModel& camera,
                                       double luminance_floor = 1e-4);

/// n.v below this flags the estimate as low confidence (75 degrees from the view).
inline constexpr double kRimCosine = 0.25881904510252074;

}  // namespace relit
