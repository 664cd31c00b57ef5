// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/vec3.hpp"

#include <vector>

namespace relit {

/// n quasi-uniform unit directions: z_k = 1 - (2k+1)/n, azimuth advancing by
/// the golden angle. Throws DomainError for n == 0.
std::vector<Vec3> fibonacci_sphere(std::size_t n);

/// n quasi-uniform directions on the z >= 0 hemisphere: z_k = 1 - (k + 1/2)/n.
std::vector<Vec3> fibonacci_hemisphere(std::size_t n);

}  // namespace relit
