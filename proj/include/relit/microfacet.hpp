// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/dual.hpp"
#include "relit/vec3.hpp"

#include <algorithm>

namespace relit {

/// Roughness floor; D diverges as roughness -> 0 at N.h = 1.
inline constexpr double kMinRoughness = 0.01;
/// Specular reflectance at normal incidence.
inline constexpr double kFresnelF0 = 0.05;
/// N.l or N.v at or below this value shades to black.
inline constexpr double kGrazingEpsilon = 1e-4;
/// Floor on |N| when re-normalizing network-predicted normals.
inline constexpr double kMinNormalLength = 1e-6;

/// Per-point reflectance parameters.
struct SvbrdfSample {
    Vec3 normal{0.0, 0.0, 1.0};
    Rgb albedo{};
    double roughness = 1.0;
};

// GGX-style normal distribution with a = R^2.
template <typename T>
T ndf_ggx(const Vec3T<T>& h, const Vec3T<T>& n, const T& roughness) {
    const T a = roughness * roughness;
    const T a2 = a * a;
    const T nh = dot(n, h);
    const T denom = nh * nh * (a2 - 1.0) + 1.0;
    return a2 / (kPi * denom * denom);
}

// Schlick Fresnel with the spherical-Gaussian exponent fit.
template <typename T>
T fresnel_schlick_approx(const Vec3T<T>& v, const Vec3T<T>& h) {
    using std::exp2;
    const T vh = dot(v, h);
    return kFresnelF0 + (1.0 - kFresnelF0) * exp2((-5.55473 * vh - 6.98316) * vh);
}

// Separable Smith-Schlick masking/shadowing with k = (R+1)^2 / 8.
template <typename T>
T geometry_smith(const Vec3T<T>& l, const Vec3T<T>& v, const Vec3T<T>& n, const T& roughness) {
    const T k = (roughness + 1.0) * (roughness + 1.0) / 8.0;
    const T nv = dot(n, v);
    const T nl = dot(n, l);
    return nv / (nv * (1.0 - k) + k) * (nl / (nl * (1.0 - k) + k));
}

namespace detail {

template <typename T>
Vec3T<T> lift(const Vec3& a) {
    return {T(a.x), T(a.y), T(a.z)};
}

}  // namespace detail

/// Microfacet model A/pi + D F G / (4 (N.l)(N.v)) on raw inputs: the normal is
/// re-normalized, roughness clamped to [kMinRoughness, 1], and back-facing or
/// grazing configurations return black. Generic over the scalar so the same
/// code yields Jacobians when T is a Dual.
template <typename T>
Vec3T<T> microfacet_kernel(const Vec3T<T>& normal, const Vec3T<T>& albedo, const T& roughness,
                           const Vec3& view, const Vec3& light, bool include_cosine = false) {
    using std::sqrt;
    const T len_sq = dot(normal, normal);
    const T len = len_sq > T(kMinNormalLength * kMinNormalLength) ? sqrt(len_sq) : T(kMinNormalLength);
    const Vec3T<T> n = normal / len;

    T r = roughness;
    if (r < T(kMinRoughness)) r = T(kMinRoughness);
    if (r > T(1.0)) r = T(1.0);

    const Vec3T<T> v = detail::lift<T>(view);
    const Vec3T<T> l = detail::lift<T>(light);
    const T nl = dot(n, l);
    const T nv = dot(n, v);
    if (value_of(nl) <= kGrazingEpsilon || value_of(nv) <= kGrazingEpsilon) return {T(0.0), T(0.0), T(0.0)};

    const Vec3T<T> h = detail::lift<T>(normalized(view + light));
    const T specular = ndf_ggx(h, n, r) * fresnel_schlick_approx(v, h) * geometry_smith(l, v, n, r) /
                       (4.0 * nl * nv);
    Vec3T<T> out{albedo.x / kPi + specular, albedo.y / kPi + specular, albedo.z / kPi + specular};
    if (include_cosine) out *= nl;
    return out;
}

/// Evaluates the microfacet model for a sample. NaN inputs throw DomainError.
Rgb microfacet_eval(const SvbrdfSample& sample, const Vec3& view, const Vec3& light);

/// Shading under a directional light: M * irradiance, times max(N.l, 0)
/// when `include_cosine` is set. Clamped to be non-negative.
Rgb shade_directional(const SvbrdfSample& sample, const Vec3& view, const Vec3& light, const Rgb& irradiance,
                      bool include_cosine);

}  // namespace relit
