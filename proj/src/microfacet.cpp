// SPDX-License-Identifier: Apache-2.0

#include "relit/microfacet.hpp"

#include "relit/error.hpp"

#include <cmath>

namespace relit {

namespace {

void require_finite(const SvbrdfSample& s, const Vec3& view, const Vec3& light) {
    if (!is_finite(s.normal) || !is_finite(s.albedo) || !std::isfinite(s.roughness) || !is_finite(view) ||
        !is_finite(light))
        throw DomainError("microfacet_eval: non-finite input");
}

}  // namespace

Rgb microfacet_eval(const SvbrdfSample& sample, const Vec3& view, const Vec3& light) {
    require_finite(sample, view, light);
    return microfacet_kernel<double>(sample.normal, sample.albedo, sample.roughness, view, light, false);
}

Rgb shade_directional(const SvbrdfSample& sample, const Vec3& view, const Vec3& light, const Rgb& irradiance,
                      bool include_cosine) {
    require_finite(sample, view, light);
    const Rgb m = microfacet_kernel<double>(sample.normal, sample.albedo, sample.roughness, view, light,
                                            include_cosine);
    const Rgb out = hadamard(m, irradiance);
    return {std::max(out.x, 0.0), std::max(out.y, 0.0), std::max(out.z, 0.0)};
}

}  // namespace relit
