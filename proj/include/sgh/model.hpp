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

// Hashing model: a linear-Gaussian decoder p(x|h) = N(Uh, rho^2 I)
// with a factorized Bernoulli prior on h, and a factorized Bernoulli encoder
// q(h|x) with per-bit probability sigmoid(w_k^T x).
//
// Shapes: W and U are d x l (one column per bit), beta has length l.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>

#include "sgh/common.hpp"
#include "sgh/hash_code.hpp"
#include "sgh/rng.hpp"

namespace sgh {

/// Largest code length for which 2^l enumeration is allowed.
inline constexpr std::size_t kMaxEnumerationBits = 20;

struct ModelParams {
    Matrix W;           // encoder weights, column k is w_k
    Matrix U;           // codebook, column k is u_k
    Vector beta;        // prior logits log(theta / (1 - theta))
    double log_rho = 0.0;
    CodeDomain domain = CodeDomain::ZeroOne;

    static ModelParams zeros(std::size_t d, std::size_t l, CodeDomain domain = CodeDomain::ZeroOne) {
        require(d > 0 && l > 0, "ModelParams: d and l must be positive");
        ModelParams p;
        p.W = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(l));
        p.U = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(l));
        p.beta = Vector::Zero(static_cast<Eigen::Index>(l));
        p.domain = domain;
        return p;
    }

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(W.rows()); }
    [[nodiscard]] std::size_t bits() const { return static_cast<std::size_t>(W.cols()); }
    [[nodiscard]] double rho() const { return std::exp(log_rho); }

    /// Throws InputError if shapes disagree or any entry is non-finite.
    void validate() const {
        require(W.rows() > 0 && W.cols() > 0, "ModelParams: empty W");
        require(U.rows() == W.rows() && U.cols() == W.cols(), "ModelParams: U must have the shape of W");
        require(beta.size() == W.cols(), "ModelParams: beta length must equal code length");
        require(W.allFinite() && U.allFinite() && beta.allFinite() && std::isfinite(log_rho),
                "ModelParams: non-finite entry");
    }
};

namespace detail {

inline void check_point(const ModelParams& params, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != params.dim()) {
        throw InputError("dimension mismatch: point has " + std::to_string(x.size()) + " entries, model expects " +
                         std::to_string(params.dim()));
    }
}

inline void check_code(const ModelParams& params, const HashCode& h) {
    if (h.size() != params.bits()) {
        throw InputError("code length mismatch: code has " + std::to_string(h.size()) + " bits, model expects " +
                         std::to_string(params.bits()));
    }
}

}  // namespace detail

/// z = W^T x.
inline Vector encode_logits(const ModelParams& params, const Vector& x) {
    detail::check_point(params, x);
    return params.W.transpose() * x;
}

/// Clamped sigmoid of the logits; every entry lies in [1e-7, 1 - 1e-7].
inline Vector encode_probs(const ModelParams& params, const Vector& x) {
    return encode_logits(params, x).unaryExpr([](double z) { return clamp_prob(sigmoid(z)); });
}

/// MAP code of the factorized encoder: bit k set iff w_k^T x >= 0.
inline HashCode encode_map(const ModelParams& params, const Vector& x) {
    const Vector z = encode_logits(params, x);
    HashCode code(params.bits());
    for (Eigen::Index k = 0; k < z.size(); ++k) code.set(static_cast<std::size_t>(k), z[k] >= 0.0);
    return code;
}

/// Deterministic thresholding of a uniform draw: returns p >= xi.
inline bool stochastic_neuron(double p, double xi) {
    require(p > 0.0 && p < 1.0, "stochastic_neuron: p must lie in (0, 1)");
    require(xi >= 0.0 && xi < 1.0, "stochastic_neuron: xi must lie in [0, 1)");
    return p >= xi;
}

inline HashCode encode_sample(const ModelParams& params, const Vector& x, std::span<const double> xi) {
    require(xi.size() == params.bits(), "encode_sample: need one uniform draw per bit");
    const Vector p = encode_probs(params, x);
    HashCode code(params.bits());
    for (std::size_t k = 0; k < xi.size(); ++k) {
        code.set(k, stochastic_neuron(p[static_cast<Eigen::Index>(k)], xi[k]));
    }
    return code;
}

inline HashCode encode_sample(const ModelParams& params, const Vector& x, Rng& rng) {
    std::vector<double> xi(params.bits());
    for (auto& v : xi) v = rng.uniform();
    return encode_sample(params, x, xi);
}

/// Decoder mean U h (signed sum of columns under the plus-minus domain).
inline Vector decode(const ModelParams& params, const HashCode& h) {
    detail::check_code(params, h);
    return params.U * h.values(params.domain);
}

/// log q(h|x) under the clamped encoder probabilities.
inline double log_posterior(const ModelParams& params, const HashCode& h, const Vector& x) {
    detail::check_code(params, h);
    const Vector p = encode_probs(params, x);
    double acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double pk = p[static_cast<Eigen::Index>(k)];
        acc += h.get(k) ? std::log(pk) : std::log1p(-pk);
    }
    return acc;
}

/// Per-sample description length -log p(x, h) + log q(h|x).
inline double loss(const ModelParams& params, const HashCode& h, const Vector& x) {
    detail::check_point(params, x);
    detail::check_code(params, h);
    const double rho2 = std::exp(2.0 * params.log_rho);
    const double d = static_cast<double>(params.dim());
    const Vector residual = x - params.U * h.values(params.domain);
    double value = residual.squaredNorm() / (2.0 * rho2) + 0.5 * d * std::log(2.0 * std::numbers::pi * rho2);
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double b = h.get(k) ? 1.0 : 0.0;
        value += softplus(params.beta[static_cast<Eigen::Index>(k)]) - params.beta[static_cast<Eigen::Index>(k)] * b;
    }
    return value + log_posterior(params, h, x);
}

/// Code whose bit k equals bit k of `index`; used for exhaustive enumeration.
inline HashCode code_from_index(std::size_t bits, std::uint64_t index) {
    HashCode code(bits);
    for (std::size_t k = 0; k < bits; ++k) code.set(k, (index >> k) & 1ULL);
    return code;
}

inline void require_enumerable(std::size_t bits, std::size_t limit = kMaxEnumerationBits) {
    if (bits > limit) {
        throw CapabilityError("enumeration over 2^" + std::to_string(bits) + " codes exceeds the limit of 2^" +
                              std::to_string(limit));
    }
}

/// Exact expected description length sum_h q(h|x) loss(h, x), by enumeration.
inline double exact_objective(const ModelParams& params, const Vector& x) {
    detail::check_point(params, x);
    require_enumerable(params.bits());
    const Vector p = encode_probs(params, x);
    const std::uint64_t count = 1ULL << params.bits();
    double total = 0.0;
    for (std::uint64_t idx = 0; idx < count; ++idx) {
        const HashCode h = code_from_index(params.bits(), idx);
        double q = 1.0;
        for (std::size_t k = 0; k < h.size(); ++k) {
            const double pk = p[static_cast<Eigen::Index>(k)];
            q *= h.get(k) ? pk : 1.0 - pk;
        }
        total += q * loss(params, h, x);
    }
    return total;
}

}  // namespace sgh
