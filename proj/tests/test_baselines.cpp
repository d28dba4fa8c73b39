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


#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sgh/sgh.hpp"

using namespace sgh;

namespace {

Dataset make_data(std::uint64_t seed, Eigen::Index d, Eigen::Index n, double anisotropy = 1.0) {
    auto rng = oracle::rng_for(seed, "data");
    Matrix m = oracle::random_matrix(rng, d, n);
    for (Eigen::Index i = 0; i < d; ++i) m.row(i) *= std::pow(anisotropy, static_cast<double>(i));
    return Dataset(m);
}

}  // namespace

TEST(Pca, LineYEqualsX) {
    Matrix pts(2, 5);
    pts << 1, 2, 3, 4, 5, 1, 2, 3, 4, 5;
    const auto m = pca_fit(Dataset(pts), 1);
    EXPECT_NEAR(m.components(0, 0), 1 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(m.components(1, 0), 1 / std::sqrt(2.0), 1e-12);
}

TEST(Pca, IsotropicDataStaysOrthonormal) {
    const auto m = pca_fit(make_data(40, 6, 20000), 6);
    EXPECT_TRUE((m.components.transpose() * m.components).isIdentity(1e-10));
    EXPECT_LT(m.eigenvalues.maxCoeff() / m.eigenvalues.minCoeff(), 1.15);
}

TEST(Pca, MatchesDenseEigensolverOracle) {
    const Dataset data = make_data(41, 8, 50, 0.8);
    const auto m = pca_fit(data, 4);
    // Covariance by explicit loops.
    Matrix cov = Matrix::Zero(8, 8);
    const Vector mu = data.column_mean();
    for (Eigen::Index n = 0; n < 50; ++n)
        for (Eigen::Index i = 0; i < 8; ++i)
            for (Eigen::Index j = 0; j < 8; ++j) cov(i, j) += (data.points(i, n) - mu[i]) * (data.points(j, n) - mu[j]) / 49.0;
    Eigen::EigenSolver<Matrix> es(cov);
    std::vector<double> ev;
    for (Eigen::Index i = 0; i < 8; ++i) ev.push_back(es.eigenvalues()[i].real());
    std::sort(ev.rbegin(), ev.rend());
    for (Eigen::Index k = 0; k < 4; ++k) {
        const Vector c = m.components.col(k);
        EXPECT_NEAR(c.dot(cov * c), ev[static_cast<std::size_t>(k)], 1e-8);
        EXPECT_NEAR(m.eigenvalues[k], ev[static_cast<std::size_t>(k)], 1e-8);
        Eigen::Index arg;
        c.cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(c[arg], 0.0);
    }
}

TEST(Pca, RankDeficiencyIsFlagged) {
    Matrix pts = Matrix::Zero(4, 10);
    for (int i = 0; i < 10; ++i) pts(0, i) = i;
    const auto m = pca_fit(Dataset(pts), 3);
    EXPECT_TRUE(m.rank_deficient);
    EXPECT_EQ(m.rank, 1u);
    EXPECT_EQ(m.components.cols(), 3);
}

TEST(Pca, Reconstruct) {
    const Dataset data = make_data(42, 5, 100);
    const auto m = pca_fit(data, 2);
    EXPECT_TRUE(pca_reconstruct(m, m.mean).isApprox(m.mean));
    const Vector in_span = m.mean + 0.3 * m.components.col(0) - 1.2 * m.components.col(1);
    EXPECT_TRUE(pca_reconstruct(m, in_span).isApprox(in_span, 1e-12));
    auto rng = oracle::rng_for(42, "x");
    const Vector x = oracle::random_vector(rng, 5);
    Vector ref = m.mean;
    for (int k = 0; k < 2; ++k) {
        double c = 0;
        for (int i = 0; i < 5; ++i) c += m.components(i, k) * (x[i] - m.mean[i]);
        for (int i = 0; i < 5; ++i) ref[i] += c * m.components(i, k);
    }
    EXPECT_TRUE(pca_reconstruct(m, x).isApprox(ref, 1e-12));
}

TEST(Itq, ZeroIterationsIsIdentity) {
    ItqOptions opts;
    opts.iterations = 0;
    const auto m = itq_fit(make_data(43, 6, 200), 4, opts);
    EXPECT_TRUE(m.R.isIdentity(0.0));
    EXPECT_EQ(m.loss_history.size(), 1u);
}

TEST(Itq, OneBitClosedForm) {
    const Dataset data = make_data(44, 3, 300);
    const auto m = itq_fit(data, 1);
    EXPECT_NEAR(std::abs(m.R(0, 0)), 1.0, 1e-12);
    const Matrix v = (data.points.colwise() - m.mean).transpose() * m.W_pca;
    double closed = 0.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) closed += (std::abs(v(i, 0)) - 1.0) * (std::abs(v(i, 0)) - 1.0);
    EXPECT_NEAR(m.loss_history.back(), closed, 1e-9);
}

TEST(Itq, LossNonIncreasingAndRotationOrthogonal) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto m = itq_fit(make_data(100 + s, 10, 400, 0.9), 6);
        for (std::size_t i = 1; i < m.loss_history.size(); ++i) {
            EXPECT_LE(m.loss_history[i], m.loss_history[i - 1] + 1e-9);
        }
        EXPECT_TRUE((m.R.transpose() * m.R).isIdentity(1e-8));
        EXPECT_TRUE((m.W_pca.transpose() * m.W_pca).isIdentity(1e-8));
    }
}

TEST(Itq, RandomRotationStartIsSeeded) {
    ItqOptions opts;
    opts.iterations = 0;
    opts.random_rotation_seed = 9;
    const Dataset data = make_data(45, 6, 100);
    const auto a = itq_fit(data, 4, opts);
    EXPECT_TRUE((a.R.transpose() * a.R).isIdentity(1e-10));
    EXPECT_FALSE(a.R.isIdentity(1e-3));
    EXPECT_EQ(a.R, itq_fit(data, 4, opts).R);
}

TEST(Itq, EncodeMatchesMatrixProduct) {
    const Dataset data = make_data(46, 7, 300);
    const auto m = itq_fit(data, 5);
    for (std::size_t i = 0; i < 20; ++i) {
        const Vector x = data.point(i);
        const Vector v = ((x - m.mean).transpose() * m.W_pca * m.R).transpose();
        const HashCode h = itq_encode(m, x);
        for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(h.get(k), v[static_cast<Eigen::Index>(k)] >= 0.0);
    }
    EXPECT_THROW(itq_encode(m, Vector::Zero(3)), InputError);
}

TEST(Itq, GridSearchTwoBits) {
    for (std::uint64_t s = 0; s < 3; ++s) {
        const Dataset data = make_data(200 + s, 4, 200, 0.7);
        const auto m = itq_fit(data, 2);
        const Matrix v = (data.points.colwise() - m.mean).transpose() * m.W_pca;
        EXPECT_LE(m.loss_history.back(), oracle::itq_grid_min_2d(v) + 1e-6);
    }
}
