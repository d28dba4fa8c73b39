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

// PCA and Iterative Quantization (ITQ) baselines.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sgh/common.hpp"
#include "sgh/dataset.hpp"
#include "sgh/hash_code.hpp"
#include "sgh/rng.hpp"

namespace sgh {

struct PcaModel {
    Vector mean;
    Matrix components;    // d x l, orthonormal columns, eigenvalue-descending
    Vector eigenvalues;   // length l
    std::size_t rank = 0; // numerically non-zero eigenvalues among the l kept
    bool rank_deficient = false;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(components.rows()); }
    [[nodiscard]] std::size_t bits() const { return static_cast<std::size_t>(components.cols()); }
};

/// Top-l principal directions of the mean-centered data. Each column is
/// signed so that its largest-magnitude entry is positive (first index wins
/// ties).
inline PcaModel pca_fit(const Dataset& data, std::size_t l) {
    require(l > 0 && l <= data.dim(), "pca_fit: need 0 < l <= d");
    require(data.size() >= 2, "pca_fit: need at least two points");
    PcaModel model;
    model.mean = data.column_mean();
    const Matrix centered = data.points.colwise() - model.mean;
    const Matrix cov = centered * centered.transpose() / static_cast<double>(data.size() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    require(solver.info() == Eigen::Success, "pca_fit: eigendecomposition failed");

    const auto d = static_cast<Eigen::Index>(data.dim());
    const auto cols = static_cast<Eigen::Index>(l);
    model.components.resize(d, cols);
    model.eigenvalues.resize(cols);
    // Eigen returns ascending eigenvalues.
    for (Eigen::Index j = 0; j < cols; ++j) {
        Vector v = solver.eigenvectors().col(d - 1 - j);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        model.components.col(j) = v;
        model.eigenvalues[j] = std::max(0.0, solver.eigenvalues()[d - 1 - j]);
    }
    const double top = std::max(solver.eigenvalues().maxCoeff(), 0.0);
    const double tol = std::max(top, 1.0) * static_cast<double>(data.dim()) * 1e-12;
    model.rank = 0;
    for (Eigen::Index j = 0; j < cols; ++j) {
        if (model.eigenvalues[j] > tol) ++model.rank;
    }
    model.rank_deficient = model.rank < l;
    return model;
}

/// mean + C C^T (x - mean).
inline Vector pca_reconstruct(const PcaModel& model, const Vector& x) {
    require(static_cast<std::size_t>(x.size()) == model.dim(), "pca_reconstruct: dimension mismatch");
    return model.mean + model.components * (model.components.transpose() * (x - model.mean));
}

struct ItqModel {
    Vector mean;
    Matrix W_pca;         // d x l
    Matrix R;             // l x l orthogonal
    Vector scale;         // per rotated dimension, mean |(V R)_k|; maps {-1,+1} back to data units
    std::size_t iterations = 0;
    std::vector<double> loss_history;  // ||B - V R||_F^2, entry 0 before any update
    bool rank_deficient = false;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(W_pca.rows()); }
    [[nodiscard]] std::size_t bits() const { return static_cast<std::size_t>(W_pca.cols()); }
};

struct ItqOptions {
    std::size_t iterations = 50;
    std::optional<std::uint64_t> random_rotation_seed;  // default: start from identity
};

namespace detail {

inline Matrix sign_pm(const Matrix& m) {
    return m.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

inline Matrix random_rotation(std::size_t l, Rng rng) {
    const auto n = static_cast<Eigen::Index>(l);
    Matrix g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
    }
    Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace detail

/// Orthogonal R minimizing ||B - V R||_F for fixed B: with B^T V = A S C^T,
/// R = C A^T.
inline Matrix procrustes_rotation(const Matrix& codes_pm, const Matrix& projected) {
    Eigen::JacobiSVD<Matrix> svd(codes_pm.transpose() * projected, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixV() * svd.matrixU().transpose();
}

inline double quantization_loss(const Matrix& projected, const Matrix& R) {
    const Matrix vr = projected * R;
    return (detail::sign_pm(vr) - vr).squaredNorm();
}

/// Alternates B = sign(V R) and the Procrustes update of R, where
/// V (N x l) is the centered data projected on the top-l PCA directions.
inline ItqModel itq_fit(const Dataset& data, std::size_t l, const ItqOptions& options = {}) {
    const PcaModel pca = pca_fit(data, l);
    ItqModel model;
    model.mean = pca.mean;
    model.W_pca = pca.components;
    model.rank_deficient = pca.rank_deficient;
    model.iterations = options.iterations;
    model.R = options.random_rotation_seed ? detail::random_rotation(l, Rng(*options.random_rotation_seed))
                                           : Matrix::Identity(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l));

    const Matrix projected = (data.points.colwise() - model.mean).transpose() * model.W_pca;
    model.loss_history.push_back(quantization_loss(projected, model.R));
    for (std::size_t it = 0; it < options.iterations; ++it) {
        const Matrix codes = detail::sign_pm(projected * model.R);
        model.R = procrustes_rotation(codes, projected);
        model.loss_history.push_back(quantization_loss(projected, model.R));
    }
    model.scale = (projected * model.R).cwiseAbs().colwise().mean().transpose();
    return model;
}

/// Rotated projection (x - mean)^T W_pca R.
inline Vector itq_project(const ItqModel& model, const Vector& x) {
    require(static_cast<std::size_t>(x.size()) == model.dim(), "itq: dimension mismatch");
    return model.R.transpose() * (model.W_pca.transpose() * (x - model.mean));
}

/// Bit k set iff the k-th rotated coordinate is >= 0.
inline HashCode itq_encode(const ItqModel& model, const Vector& x) {
    const Vector v = itq_project(model, x);
    HashCode code(model.bits());
    for (Eigen::Index k = 0; k < v.size(); ++k) code.set(static_cast<std::size_t>(k), v[k] >= 0.0);
    return code;
}

/// mean + W_pca R (scale .* (2b - 1)).
inline Vector itq_reconstruct(const ItqModel& model, const HashCode& code) {
    require(code.size() == model.bits(), "itq_reconstruct: code length mismatch");
    const Vector signed_bits = code.values(CodeDomain::PlusMinus);
    return model.mean + model.W_pca * (model.R * model.scale.cwiseProduct(signed_bits));
}

}  // namespace sgh
