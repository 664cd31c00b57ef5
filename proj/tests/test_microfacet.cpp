// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles/microfacet_oracle.hpp"
#include "relit/dual.hpp"
#include "relit/error.hpp"
#include "relit/microfacet.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace relit;

namespace {

oracle::V3 arr(const Vec3& v) { return {v.x, v.y, v.z}; }

Vec3 random_hemisphere(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    for (;;) {
        Vec3 d{g(rng), g(rng), g(rng)};
        const double n = length(d);
        if (n < 1e-6) continue;
        d = d / n;
        if (d.z < 0.0) d.z = -d.z;
        return d;
    }
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    for (;;) {
        const Vec3 d{g(rng), g(rng), g(rng)};
        if (length(d) > 1e-6) return normalized(d);
    }
}

const Vec3 kZ{0.0, 0.0, 1.0};

}  // namespace

TEST_CASE("normal distribution worked values") {
    CHECK(ndf_ggx(kZ, kZ, 1.0) == doctest::Approx(1.0 / oracle::kPi).epsilon(1e-12));
    CHECK(ndf_ggx(kZ, kZ, 1.0) == doctest::Approx(0.31831).epsilon(1e-5));
    const Vec3 h{1.0, 0.0, 0.0};
    CHECK(ndf_ggx(h, kZ, 0.5) == doctest::Approx(0.0625 / oracle::kPi).epsilon(1e-12));
    CHECK(ndf_ggx(h, kZ, 0.5) == doctest::Approx(0.019894).epsilon(1e-4));
    // With a = 1 the distribution is uniform, so no direction beats the normal.
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) CHECK(ndf_ggx(random_hemisphere(rng), kZ, 1.0) <= ndf_ggx(kZ, kZ, 1.0) + 1e-15);
}

TEST_CASE("fresnel worked values and monotonicity") {
    const Vec3 h{1.0, 0.0, 0.0};
    CHECK(fresnel_schlick_approx(kZ, h) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(fresnel_schlick_approx(kZ, kZ) == doctest::Approx(0.050160).epsilon(1e-5));
    CHECK(fresnel_schlick_approx(kZ, kZ) == doctest::Approx(oracle::fresnel(1.0)).epsilon(1e-12));
    double prev = 2.0;
    for (int i = 0; i <= 1000; ++i) {
        const double c = i / 1000.0;
        const Vec3 v{std::sqrt(1.0 - c * c), 0.0, c};
        const double f = fresnel_schlick_approx(v, kZ);
        CHECK(f <= prev);
        CHECK(f >= kFresnelF0);
        CHECK(f <= 1.0 + 1e-15);
        prev = f;
    }
}

TEST_CASE("geometry term worked values") {
    CHECK(geometry_smith(kZ, kZ, kZ, 0.3) == doctest::Approx(1.0).epsilon(1e-15));
    const Vec3 d{std::sqrt(0.75), 0.0, 0.5};
    const Vec3 e{-std::sqrt(0.75), 0.0, 0.5};
    // R = 1 gives k = 0.5.
    CHECK(geometry_smith(d, e, kZ, 1.0) == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
    CHECK(geometry_smith(d, e, kZ, 1.0) == doctest::Approx(0.44444).epsilon(1e-5));
}

TEST_CASE("model at normal incidence") {
    const SvbrdfSample s{kZ, {1.0, 1.0, 1.0}, 1.0};
    const Rgb m = microfacet_eval(s, kZ, kZ);
    const double expected = 1.0 / oracle::kPi + (1.0 / oracle::kPi) * oracle::fresnel(1.0) * 1.0 / 4.0;
    for (double c : {m.x, m.y, m.z}) {
        CHECK(c == doctest::Approx(expected).epsilon(1e-12));
        CHECK(c == doctest::Approx(0.32230).epsilon(1e-5));
    }
}

TEST_CASE("back-facing and grazing configurations shade to black") {
    const SvbrdfSample s{kZ, {0.5, 0.5, 0.5}, 0.5};
    const Vec3 below = normalized(Vec3{0.3, 0.0, -0.5});
    CHECK(microfacet_eval(s, kZ, below) == Rgb{});
    CHECK(microfacet_eval(s, below, kZ) == Rgb{});
    CHECK(microfacet_eval(s, kZ, Vec3{1.0, 0.0, 0.0}) == Rgb{});
}

TEST_CASE("coplanar configuration with h perpendicular to N") {
    // h orthogonal to N forces N.l = -N.v, so one side is back-facing.
    const SvbrdfSample s{kZ, {0.0, 0.0, 0.0}, kMinRoughness};
    const Vec3 v = normalized(Vec3{1.0, 0.0, 0.4});
    const Vec3 l = normalized(Vec3{1.0, 0.0, -0.4});
    REQUIRE(std::abs(dot(normalized(v + l), kZ)) < 1e-12);
    CHECK(microfacet_eval(s, v, l) == Rgb{});
}

TEST_CASE("specular-only value equals the composed sub-terms") {
    const SvbrdfSample s{kZ, {0.0, 0.0, 0.0}, kMinRoughness};
    const Vec3 v = normalized(Vec3{0.6, 0.0, 0.8});
    const Vec3 l = normalized(Vec3{-0.6, 0.0, 0.8});
    const Vec3 h = normalized(v + l);
    const double nl = dot(kZ, l), nv = dot(kZ, v);
    const double expected = oracle::ndf(dot(kZ, h), kMinRoughness) * oracle::fresnel(dot(v, h)) *
                            oracle::smith(nl, nv, kMinRoughness) / (4.0 * nl * nv);
    const Rgb m = microfacet_eval(s, v, l);
    CHECK(m.x == doctest::Approx(expected).epsilon(1e-9));
    CHECK(m.y == m.x);
    CHECK(m.z == m.x);
}

TEST_CASE("agreement with the scalar oracle on random configurations") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> rr(kMinRoughness, 1.0);
    int shaded = 0;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 n = random_unit(rng);
        const Vec3 v = random_unit(rng);
        const Vec3 l = random_unit(rng);
        const double r = rr(rng);
        const Rgb a{u(rng), u(rng), u(rng)};
        if (length(v + l) < 1e-3) continue;
        const Vec3 h = normalized(v + l);

        CHECK(ndf_ggx(h, n, r) == doctest::Approx(oracle::ndf(dot(n, h), r)).epsilon(1e-9));
        CHECK(fresnel_schlick_approx(v, h) == doctest::Approx(oracle::fresnel(dot(v, h))).epsilon(1e-9));
        const double nl = dot(n, l), nv = dot(n, v);
        if (nl > 0.0 && nv > 0.0)
            CHECK(geometry_smith(l, v, n, r) == doctest::Approx(oracle::smith(nl, nv, r)).epsilon(1e-9));

        const Rgb m = microfacet_eval({n, a, r}, v, l);
        const auto o = oracle::model(arr(n), arr(a), r, arr(v), arr(l));
        CHECK(m.x == doctest::Approx(o[0]).epsilon(1e-9));
        CHECK(m.y == doctest::Approx(o[1]).epsilon(1e-9));
        CHECK(m.z == doctest::Approx(o[2]).epsilon(1e-9));
        if (o[0] > 0.0) ++shaded;
    }
    CHECK(shaded > 1000);
}

TEST_CASE("roughness and normal inputs are clamped and re-normalized") {
    const Vec3 v = normalized(Vec3{0.2, 0.1, 0.9});
    const Vec3 l = normalized(Vec3{-0.3, 0.2, 0.8});
    const Rgb a{0.2, 0.4, 0.6};
    CHECK(microfacet_eval({kZ, a, 0.0}, v, l) == microfacet_eval({kZ, a, kMinRoughness}, v, l));
    CHECK(microfacet_eval({kZ, a, 3.0}, v, l) == microfacet_eval({kZ, a, 1.0}, v, l));
    const Rgb scaled = microfacet_eval({3.0 * kZ, a, 0.4}, v, l);
    const Rgb unit = microfacet_eval({kZ, a, 0.4}, v, l);
    CHECK(scaled.x == doctest::Approx(unit.x).epsilon(1e-12));
}

TEST_CASE("reciprocity in view and light") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 n = random_hemisphere(rng);
        const Vec3 v = random_hemisphere(rng), l = random_hemisphere(rng);
        const SvbrdfSample s{n, {u(rng), u(rng), u(rng)}, kMinRoughness + (1.0 - kMinRoughness) * u(rng)};
        const Rgb a = microfacet_eval(s, v, l), b = microfacet_eval(s, l, v);
        CHECK(std::abs(a.x - b.x) <= 1e-9 * std::max(1.0, std::abs(a.x)));
        CHECK(std::abs(a.z - b.z) <= 1e-9 * std::max(1.0, std::abs(a.z)));
    }
}

TEST_CASE("output is finite and non-negative") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool ok = true;
    for (int i = 0; i < 100000; ++i) {
        const SvbrdfSample s{random_unit(rng), {u(rng), u(rng), u(rng)}, kMinRoughness + (1.0 - kMinRoughness) * u(rng)};
        const Rgb m = microfacet_eval(s, random_unit(rng), random_unit(rng));
        ok = ok && is_finite(m) && m.x >= 0.0 && m.y >= 0.0 && m.z >= 0.0;
    }
    CHECK(ok);
}

TEST_CASE("diffuse term is linear in albedo") {
    const Vec3 n = normalized(Vec3{0.1, -0.2, 1.0});
    const Vec3 v = normalized(Vec3{0.3, 0.1, 0.9});
    const Vec3 l = normalized(Vec3{-0.4, 0.2, 0.7});
    const Rgb a{0.3, 0.5, 0.7};
    const Rgb spec = microfacet_eval({n, Rgb{}, 0.35}, v, l);
    for (double c : {0.0, 0.5, 2.0}) {
        const Rgb m = microfacet_eval({n, c * a, 0.35}, v, l);
        CHECK(m.x == doctest::Approx(spec.x + c * a.x / oracle::kPi).epsilon(1e-9));
        CHECK(m.y == doctest::Approx(spec.y + c * a.y / oracle::kPi).epsilon(1e-9));
        CHECK(m.z == doctest::Approx(spec.z + c * a.z / oracle::kPi).epsilon(1e-9));
    }
}

TEST_CASE("NaN inputs are rejected") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(microfacet_eval({kZ, {nan, 0.0, 0.0}, 0.5}, kZ, kZ), DomainError);
    CHECK_THROWS_AS(microfacet_eval({kZ, {0.0, 0.0, 0.0}, nan}, kZ, kZ), DomainError);
    CHECK_THROWS_AS(microfacet_eval({kZ, {0.0, 0.0, 0.0}, 0.5}, Vec3{nan, 0.0, 1.0}, kZ), DomainError);
}

TEST_CASE("directional shading") {
    const SvbrdfSample s{kZ, {0.5, 0.5, 0.5}, 0.6};
    const Vec3 v = normalized(Vec3{0.2, 0.0, 1.0});
    const Vec3 l = normalized(Vec3{-0.5, 0.3, 0.8});
    const Rgb one{1.0, 1.0, 1.0};
    const Rgb m = microfacet_eval(s, v, l);
    const Rgb plain = shade_directional(s, v, l, one, false);
    const Rgb cosine = shade_directional(s, v, l, one, true);
    CHECK(plain == m);
    CHECK(cosine.x == doctest::Approx(m.x * dot(kZ, l)).epsilon(1e-12));
    CHECK(shade_directional(s, v, l, Rgb{}, true) == Rgb{});
    const Rgb twice = shade_directional(s, v, l, 2.0 * one, true);
    CHECK(twice.x == 2.0 * cosine.x);
    CHECK(twice.y == 2.0 * cosine.y);
    CHECK(shade_directional(s, v, Vec3{1.0, 0.0, 0.0}, one, true) == Rgb{});
}

TEST_CASE("dual-number kernel carries exact derivatives") {
    using D = Dual<7>;
    const Vec3 n0 = normalized(Vec3{0.1, 0.2, 1.0});
    const Rgb a0{0.3, 0.4, 0.5};
    const double r0 = 0.45;
    const Vec3 v = normalized(Vec3{0.3, -0.1, 0.9});
    const Vec3 l = normalized(Vec3{-0.2, 0.4, 0.8});
    const Vec3T<D> n{D::variable(n0.x, 0), D::variable(n0.y, 1), D::variable(n0.z, 2)};
    const Vec3T<D> a{D::variable(a0.x, 3), D::variable(a0.y, 4), D::variable(a0.z, 5)};
    const D r = D::variable(r0, 6);
    const Vec3T<D> out = microfacet_kernel(n, a, r, v, l);

    auto eval = [&](const std::array<double, 7>& p) {
        return oracle::model(oracle::unit3({p[0], p[1], p[2]}), {p[3], p[4], p[5]}, p[6], arr(v), arr(l))[0];
    };
    const std::array<double, 7> p0{n0.x, n0.y, n0.z, a0.x, a0.y, a0.z, r0};
    for (std::size_t k = 0; k < 7; ++k) {
        auto hi = p0, lo = p0;
        hi[k] += 1e-6;
        lo[k] -= 1e-6;
        const double fd = (eval(hi) - eval(lo)) / 2e-6;
        CHECK(out.x.d[k] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
}
