// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace relit {

/// Precondition violated by the caller (bad shape, out-of-range input, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Ray parallel to the light-field planes.
class DegenerateRayError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Ray intersects the light-field planes outside the normalization bounds.
class OutOfBoundsError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Non-finite loss or gradient during optimization.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed manifest, checkpoint or image header.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Light direction could not be recovered from a chrome-ball image.
class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace relit
