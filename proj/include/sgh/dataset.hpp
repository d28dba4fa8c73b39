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

#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include "sgh/common.hpp"

namespace sgh {

/// Dense real-valued dataset. Stored one point per column (d x N) so a point
/// is a contiguous Eigen column; on disk it is the usual row-per-record layout.
struct Dataset {
    Matrix points;
    std::optional<Vector> mean;  // set when the points have been centered
    std::string source;

    Dataset() = default;
    Dataset(Matrix pts, std::string src = {}) : points(std::move(pts)), source(std::move(src)) {}

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(points.rows()); }
    [[nodiscard]] bool empty() const { return points.cols() == 0; }

    [[nodiscard]] Vector point(std::size_t i) const { return points.col(static_cast<Eigen::Index>(i)); }

    [[nodiscard]] Vector column_mean() const {
        require(!empty(), "Dataset: mean of an empty dataset");
        return points.rowwise().mean();
    }

    /// Mean per-dimension standard deviation (population form).
    [[nodiscard]] double mean_stddev() const {
        require(!empty(), "Dataset: stddev of an empty dataset");
        const Vector mu = column_mean();
        const Vector var = (points.colwise() - mu).array().square().rowwise().mean();
        return var.array().sqrt().mean();
    }

    /// Copy with `mu` subtracted from every point and recorded as the mean.
    [[nodiscard]] Dataset centered_with(const Vector& mu) const {
        require(static_cast<std::size_t>(mu.size()) == dim(), "Dataset: centering vector has wrong dimension");
        Dataset out(points.colwise() - mu, source);
        out.mean = mu;
        return out;
    }

    [[nodiscard]] Dataset centered() const { return centered_with(column_mean()); }

    /// Columns [first, first + count) as a new dataset.
    [[nodiscard]] Dataset slice(std::size_t first, std::size_t count) const {
        require(first + count <= size(), "Dataset: slice out of range");
        Dataset out(points.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)), source);
        out.mean = mean;
        return out;
    }
};

}  // namespace sgh
