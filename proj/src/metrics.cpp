// SPDX-License-Identifier: Apache-2.0

#include "relit/metrics.hpp"

#include "relit/error.hpp"

#include <cmath>
#include <vector>

namespace relit {

double psnr(const Image& a, const Image& b, double peak) {
    if (!a.same_shape(b)) throw DomainError("psnr: image dimensions differ");
    if (a.pixels.empty()) throw DomainError("psnr: empty images");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.pixels.size());
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

Image luma(const Image& image) {
    if (image.channels == 1) return image;
    Image out(image.width, image.height, 1);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const Rgb c = image.rgb(x, y);
            out.at(x, y) = static_cast<float>(0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z);
        }
    return out;
}

double ssim(const Image& a, const Image& b, const SsimParams& p) {
    if (!a.same_shape(b)) throw DomainError("ssim: image dimensions differ");
    if (p.window < 1 || !(p.sigma > 0.0)) throw DomainError("ssim: invalid window parameters");
    if (a.width < p.window || a.height < p.window) throw DomainError("ssim: image smaller than the window");

    const Image la = luma(a), lb = luma(b);
    const int w = p.window, half = w / 2;
    std::vector<double> kernel(static_cast<std::size_t>(w * w));
    double ksum = 0.0;
    for (int dy = 0; dy < w; ++dy)
        for (int dx = 0; dx < w; ++dx) {
            const double r2 = (dx - half) * (dx - half) + (dy - half) * (dy - half);
            ksum += kernel[static_cast<std::size_t>(dy * w + dx)] = std::exp(-r2 / (2.0 * p.sigma * p.sigma));
        }
    for (double& k : kernel) k /= ksum;

    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    double total = 0.0;
    int count = 0;
    for (int y = 0; y + w <= a.height; ++y) {
        for (int x = 0; x + w <= a.width; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int dy = 0; dy < w; ++dy)
                for (int dx = 0; dx < w; ++dx) {
                    const double k = kernel[static_cast<std::size_t>(dy * w + dx)];
                    const double va = la.at(x + dx, y + dy), vb = lb.at(x + dx, y + dy);
                    ma += k * va;
                    mb += k * vb;
                    saa += k * va * va;
                    sbb += k * vb * vb;
                    sab += k * va * vb;
                }
            const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            ++count;
        }
    }
    return total / count;
}

}  // namespace relit
