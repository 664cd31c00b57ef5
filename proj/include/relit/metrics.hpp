// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/image.hpp"

namespace relit {

/// Returned by psnr when the images are identical.
inline constexpr double kPsnrCapDb = 99.0;

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// 10 log10(peak^2 / MSE) over every channel. Throws DomainError on shape mismatch.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over all fully contained windows of the Rec.709 luma images.
/// Throws DomainError on shape mismatch or when the image is smaller than the window.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

/// Rec.709 luma plane (1 channel). Single-channel inputs are copied.
Image luma(const Image& image);

}  // namespace relit
