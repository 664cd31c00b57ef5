// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/vec3.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace relit {

/// Interleaved float image, row 0 at the top.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<float> pixels;

    Image() = default;
    Image(int w, int h, int c = 3, float fill = 0.0f);

    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    float& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
    float at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }

    Rgb rgb(int x, int y) const;
    void set_rgb(int x, int y, const Rgb& value);

    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height && channels == other.channels;
    }
    friend bool operator==(const Image&, const Image&) = default;
};

/// Portable float map ("PF" colour, "Pf" greyscale). Written little-endian
/// (negative scale), rows stored bottom to top as the format requires.
void write_pfm(const std::filesystem::path& path, const Image& image);
/// Reads either byte order. The magnitude of the scale field is ignored.
Image read_pfm(const std::filesystem::path& path);

/// Radiance RGBE (.hdr). Reads flat and run-length encoded scanlines in the
/// standard "-Y H +X W" orientation; decodes as (byte + 0.5) * 2^(e - 136).
Image read_rgbe(const std::filesystem::path& path);
/// Writes flat (non run-length encoded) RGBE scanlines.
void write_rgbe(const std::filesystem::path& path, const Image& image);

struct RgbeBytes {
    std::uint8_t r, g, b, e;
};
RgbeBytes encode_rgbe(const Rgb& c);
Rgb decode_rgbe(const RgbeBytes& b);

float srgb_encode(float linear);
/// 8-bit binary PPM after exposure scaling and the sRGB transfer curve.
void write_ppm_preview(const std::filesystem::path& path, const Image& image, double exposure = 1.0);

}  // namespace relit
