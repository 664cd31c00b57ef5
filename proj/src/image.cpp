// SPDX-License-Identifier: Apache-2.0

#include "relit/image.hpp"

#include "relit/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace relit {

Image::Image(int w, int h, int c, float fill) : width(w), height(h), channels(c) {
    if (w < 0 || h < 0 || c <= 0) throw DomainError("image: invalid dimensions");
    pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill);
}

Rgb Image::rgb(int x, int y) const {
    if (channels == 1) {
        const double v = at(x, y, 0);
        return {v, v, v};
    }
    return {at(x, y, 0), at(x, y, 1), at(x, y, 2)};
}

void Image::set_rgb(int x, int y, const Rgb& value) {
    if (channels == 1) {
        at(x, y, 0) = static_cast<float>(value.x);
        return;
    }
    at(x, y, 0) = static_cast<float>(value.x);
    at(x, y, 1) = static_cast<float>(value.y);
    at(x, y, 2) = static_cast<float>(value.z);
}

// ---------------------------------------------------------------------------
// PFM

namespace {

std::string read_token(std::istream& is) {
    std::string tok;
    int c = is.get();
    while (c != EOF && std::isspace(c)) c = is.get();
    while (c == '#') {  // comment line
        while (c != EOF && c != '\n') c = is.get();
        while (c != EOF && std::isspace(c)) c = is.get();
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = is.get();
    }
    return tok;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3) throw DomainError("write_pfm: only 1 or 3 channels supported");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << (image.channels == 3 ? "PF" : "Pf") << '\n' << image.width << ' ' << image.height << '\n' << "-1.0\n";
    const std::size_t row = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.channels);
    std::vector<char> buf(row * 4);
    for (int y = image.height - 1; y >= 0; --y) {
        const float* src = image.pixels.data() + static_cast<std::size_t>(y) * row;
        for (std::size_t i = 0; i < row; ++i) {
            const std::uint32_t bits = std::bit_cast<std::uint32_t>(src[i]);
            for (int b = 0; b < 4; ++b) buf[4 * i + static_cast<std::size_t>(b)] = static_cast<char>(bits >> (8 * b));
        }
        os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!os) throw IoError("failed writing " + path.string());
}

Image read_pfm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    const std::string magic = read_token(is);
    int channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw ParseError(path.string() + ": not a PFM file");
    int w = 0, h = 0;
    double scale = 0;
    try {
        w = std::stoi(read_token(is));
        h = std::stoi(read_token(is));
        scale = std::stod(read_token(is));  // consumes exactly one whitespace byte after the token
    } catch (const std::exception&) {
        throw ParseError(path.string() + ": malformed PFM header");
    }
    if (w <= 0 || h <= 0 || scale == 0.0) throw ParseError(path.string() + ": malformed PFM header");
    const bool little = scale < 0.0;

    Image img(w, h, channels);
    const std::size_t row = static_cast<std::size_t>(w) * static_cast<std::size_t>(channels);
    std::vector<unsigned char> buf(row * 4);
    for (int y = h - 1; y >= 0; --y) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw ParseError(path.string() + ": truncated PFM data");
        float* dst = img.pixels.data() + static_cast<std::size_t>(y) * row;
        for (std::size_t i = 0; i < row; ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                const int shift = little ? 8 * b : 8 * (3 - b);
                bits |= static_cast<std::uint32_t>(buf[4 * i + static_cast<std::size_t>(b)]) << shift;
            }
            dst[i] = std::bit_cast<float>(bits);
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// RGBE

RgbeBytes encode_rgbe(const Rgb& c) {
    const double v = std::max({c.x, c.y, c.z});
    if (v < 1e-32) return {0, 0, 0, 0};
    int e = 0;
    const double m = std::frexp(v, &e) * 256.0 / v;
    auto byte = [&](double x) { return static_cast<std::uint8_t>(std::clamp(x * m, 0.0, 255.0)); };
    return {byte(c.x), byte(c.y), byte(c.z), static_cast<std::uint8_t>(e + 128)};
}

Rgb decode_rgbe(const RgbeBytes& b) {
    if (b.e == 0) return {0.0, 0.0, 0.0};
    const double f = std::ldexp(1.0, static_cast<int>(b.e) - (128 + 8));
    return {(b.r + 0.5) * f, (b.g + 0.5) * f, (b.b + 0.5) * f};
}

Image read_rgbe(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(is, line);
    if (line.rfind("#?", 0) != 0) throw ParseError(path.string() + ": missing RGBE signature");
    bool format_ok = true;
    while (std::getline(is, line)) {
        if (line.empty()) break;
        if (line.rfind("FORMAT=", 0) == 0) format_ok = line == "FORMAT=32-bit_rle_rgbe";
    }
    if (!format_ok) throw ParseError(path.string() + ": unsupported RGBE pixel format");
    if (!std::getline(is, line)) throw ParseError(path.string() + ": missing RGBE resolution line");
    std::istringstream res(line);
    std::string ya, xa;
    int h = 0, w = 0;
    res >> ya >> h >> xa >> w;
    if (ya != "-Y" || xa != "+X" || w <= 0 || h <= 0)
        throw ParseError(path.string() + ": unsupported RGBE resolution line '" + line + "'");

    Image img(w, h, 3);
    std::vector<unsigned char> scan(static_cast<std::size_t>(w) * 4);
    auto get = [&]() {
        const int c = is.get();
        if (c == EOF) throw ParseError(path.string() + ": truncated RGBE data");
        return static_cast<unsigned char>(c);
    };
    for (int y = 0; y < h; ++y) {
        unsigned char head[4] = {get(), get(), get(), get()};
        const bool rle = w >= 8 && w < 32768 && head[0] == 2 && head[1] == 2 && (head[2] & 0x80) == 0;
        if (rle) {
            if (((head[2] << 8) | head[3]) != w) throw ParseError(path.string() + ": RGBE scanline width mismatch");
            for (int ch = 0; ch < 4; ++ch) {
                int x = 0;
                while (x < w) {
                    int count = get();
                    if (count > 128) {
                        count -= 128;
                        const unsigned char value = get();
                        if (x + count > w) throw ParseError(path.string() + ": bad RGBE run length");
                        for (int i = 0; i < count; ++i) scan[static_cast<std::size_t>(4 * (x++) + ch)] = value;
                    } else {
                        if (count == 0 || x + count > w) throw ParseError(path.string() + ": bad RGBE run length");
                        for (int i = 0; i < count; ++i) scan[static_cast<std::size_t>(4 * (x++) + ch)] = get();
                    }
                }
            }
        } else {
            std::memcpy(scan.data(), head, 4);
            for (std::size_t i = 4; i < scan.size(); ++i) scan[i] = get();
        }
        for (int x = 0; x < w; ++x) {
            const auto* p = &scan[static_cast<std::size_t>(4 * x)];
            img.set_rgb(x, y, decode_rgbe({p[0], p[1], p[2], p[3]}));
        }
    }
    return img;
}

void write_rgbe(const std::filesystem::path& path, const Image& image) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " << image.height << " +X " << image.width << "\n";
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const RgbeBytes b = encode_rgbe(image.rgb(x, y));
            const char bytes[4] = {static_cast<char>(b.r), static_cast<char>(b.g), static_cast<char>(b.b),
                                   static_cast<char>(b.e)};
            os.write(bytes, 4);
        }
    if (!os) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------

float srgb_encode(float linear) {
    const float c = std::clamp(linear, 0.0f, 1.0f);
    return c <= 0.0031308f ? 12.92f * c : 1.055f * std::pow(c, 1.0f / 2.4f) - 0.055f;
}

void write_ppm_preview(const std::filesystem::path& path, const Image& image, double exposure) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const Rgb c = image.rgb(x, y);
            for (double v : {c.x, c.y, c.z}) {
                const float s = srgb_encode(static_cast<float>(v * exposure));
                os.put(static_cast<char>(static_cast<unsigned char>(std::lround(s * 255.0f))));
            }
        }
    if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace relit
