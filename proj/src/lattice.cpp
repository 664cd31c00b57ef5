// SPDX-License-Identifier: Apache-2.0

#include "relit/lattice.hpp"

#include "relit/error.hpp"

#include <cmath>

namespace relit {

namespace {

const double kGoldenAngle = kPi * (3.0 - std::sqrt(5.0));

Vec3 lattice_point(double z, std::size_t k) {
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = kGoldenAngle * static_cast<double>(k);
    return normalized(Vec3{r * std::cos(phi), r * std::sin(phi), z});
}

}  // namespace

std::vector<Vec3> fibonacci_sphere(std::size_t n) {
    if (n == 0) throw DomainError("fibonacci_sphere: n must be positive");
    std::vector<Vec3> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
        out.push_back(lattice_point(1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(n), k));
    return out;
}

std::vector<Vec3> fibonacci_hemisphere(std::size_t n) {
    if (n == 0) throw DomainError("fibonacci_hemisphere: n must be positive");
    std::vector<Vec3> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
        out.push_back(lattice_point(1.0 - (static_cast<double>(k) + 0.5) / static_cast<double>(n), k));
    return out;
}

}  // namespace relit
