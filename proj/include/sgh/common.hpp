// Copyright 2026-present the sgh authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sgh {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied arguments that violate a precondition (shape, range).
class InputError : public Error {
public:
    using Error::Error;
};

/// A file on disk does not match the expected layout.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A requested computation is infeasible (e.g. enumeration over too many bits).
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// Value space of a hash bit: {0,1} or {-1,+1}.
enum class CodeDomain : std::uint32_t { ZeroOne = 0, PlusMinus = 1 };

inline const char* to_string(CodeDomain domain) {
    return domain == CodeDomain::ZeroOne ? "zero-one" : "plus-minus";
}

/// Probabilities are kept in [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double clamp_prob(double p) {
    if (p < kProbClamp) return kProbClamp;
    if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return p;
}

/// log(1 + exp(b)) without overflow.
inline double softplus(double b) {
    return std::max(b, 0.0) + std::log1p(std::exp(-std::abs(b)));
}

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InputError(message);
}

}  // namespace sgh
