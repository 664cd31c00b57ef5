// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <ostream>

namespace relit {

/// Small fixed-size 3-vector. Templated so the shading code can run on
/// dual numbers as well as plain doubles.
template <typename T>
struct Vec3T {
    T x{};
    T y{};
    T z{};

    constexpr Vec3T() = default;
    constexpr Vec3T(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}

    constexpr T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3T operator-() const { return {-x, -y, -z}; }
    constexpr Vec3T& operator+=(const Vec3T& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3T& operator-=(const Vec3T& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3T& operator*=(const T& s) { x *= s; y *= s; z *= s; return *this; }

    friend constexpr bool operator==(const Vec3T&, const Vec3T&) = default;
};

template <typename T>
constexpr Vec3T<T> operator+(Vec3T<T> a, const Vec3T<T>& b) { return a += b; }
template <typename T>
constexpr Vec3T<T> operator-(Vec3T<T> a, const Vec3T<T>& b) { return a -= b; }
template <typename T>
constexpr Vec3T<T> operator*(Vec3T<T> a, const T& s) { return a *= s; }
template <typename T>
constexpr Vec3T<T> operator*(const T& s, Vec3T<T> a) { return a *= s; }
template <typename T>
constexpr Vec3T<T> operator/(const Vec3T<T>& a, const T& s) { return {a.x / s, a.y / s, a.z / s}; }

/// Componentwise product (used for RGB modulation).
template <typename T>
constexpr Vec3T<T> hadamard(const Vec3T<T>& a, const Vec3T<T>& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }

template <typename T>
constexpr T dot(const Vec3T<T>& a, const Vec3T<T>& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

template <typename T>
constexpr Vec3T<T> cross(const Vec3T<T>& a, const Vec3T<T>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T>
T length(const Vec3T<T>& a) {
    using std::sqrt;
    return sqrt(dot(a, a));
}

template <typename T>
Vec3T<T> normalized(const Vec3T<T>& a) { return a / length(a); }

using Vec3 = Vec3T<double>;
/// Linear RGB triple.
using Rgb = Vec3T<double>;

inline bool is_finite(const Vec3& a) { return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z); }

/// Angle between two directions in radians, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(length(cross(a, b)), dot(a, b));
}

inline std::ostream& operator<<(std::ostream& os, const Vec3& v) {
    return os << '(' << v.x << ", " << v.y << ", " << v.z << ')';
}

/// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{};

    static constexpr Mat3 identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }
    static constexpr Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
        return Mat3{{r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z}};
    }

    constexpr double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
    constexpr double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
    constexpr Vec3 row(int r) const { return {(*this)(r, 0), (*this)(r, 1), (*this)(r, 2)}; }

    constexpr Mat3 transposed() const {
        Mat3 t;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
        return t;
    }

    friend constexpr bool operator==(const Mat3&, const Mat3&) = default;
};

constexpr Vec3 operator*(const Mat3& a, const Vec3& v) {
    return {dot(a.row(0), v), dot(a.row(1), v), dot(a.row(2), v)};
}

constexpr Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
    return out;
}

/// Rotation about the world y axis by `angle` radians (right-handed).
inline Mat3 rotation_y(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}};
}

/// Rotation about the world x axis by `angle` radians (right-handed).
inline Mat3 rotation_x(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return Mat3{{1, 0, 0, 0, c, -s, 0, s, c}};
}

inline constexpr double kPi = 3.14159265358979323846;

constexpr double degrees_to_radians(double deg) { return deg * kPi / 180.0; }
constexpr double radians_to_degrees(double rad) { return rad * 180.0 / kPi; }

}  // namespace relit
