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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "sgh/codec.hpp"
#include "sgh/common.hpp"
#include "sgh/dataset.hpp"
#include "sgh/search.hpp"

namespace sgh {

/// |top-n retrieved  intersect  top-k truth| / k.
inline double recall_k_at_n(std::span<const Id> retrieved, std::span<const Id> truth, std::size_t k, std::size_t n) {
    require(k > 0, "recall_k_at_n: k must be positive");
    require(truth.size() >= k, "recall_k_at_n: fewer than k ground-truth ids");
    const std::unordered_set<Id> wanted(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(k));
    const std::size_t top = std::min(n, retrieved.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < top; ++i) hits += wanted.count(retrieved[i]);
    return static_cast<double>(hits) / static_cast<double>(k);
}

/// {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000}, each clipped to the index size.
inline std::vector<std::size_t> default_n_grid(std::size_t index_size) {
    static constexpr std::size_t kGrid[] = {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
    std::vector<std::size_t> grid;
    for (std::size_t n : kGrid) {
        const std::size_t clipped = std::min(n, index_size);
        if (clipped > 0 && (grid.empty() || grid.back() != clipped)) grid.push_back(clipped);
    }
    return grid;
}

struct EvalReport {
    std::string method;
    std::string dataset;
    std::size_t bits = 0;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> n_grid;
    std::vector<double> recall;                   // mean over queries, one per grid entry
    std::vector<std::vector<double>> per_query;   // [query][grid entry]
    std::optional<double> mean_recon_error;

    [[nodiscard]] double recall_at(std::size_t n) const {
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            if (n_grid[i] == n) return recall[i];
        }
        throw InputError("EvalReport: N=" + std::to_string(n) + " is not on the grid");
    }
};

/// Mean RecallK@N over queries for each N of the grid, from precomputed
/// rankings (each at least max(grid) long, or the whole index).
inline EvalReport recall_curve(const std::vector<std::vector<Id>>& rankings,
                               const std::vector<std::vector<Id>>& truth, std::size_t k,
                               const std::vector<std::size_t>& n_grid) {
    require(k > 0, "recall_curve: k must be positive");
    require(rankings.size() == truth.size(), "recall_curve: missing ground truth for some queries");
    require(!rankings.empty(), "recall_curve: no queries");
    EvalReport report;
    report.k = k;
    report.n_grid = n_grid;
    report.recall.assign(n_grid.size(), 0.0);
    report.per_query.resize(rankings.size());
    for (std::size_t q = 0; q < rankings.size(); ++q) {
        require(truth[q].size() >= k, "recall_curve: ground truth list shorter than k");
        report.per_query[q].resize(n_grid.size());
        for (std::size_t g = 0; g < n_grid.size(); ++g) {
            report.per_query[q][g] = recall_k_at_n(rankings[q], truth[q], k, n_grid[g]);
        }
    }
    // Fixed query order keeps the mean bit-reproducible.
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        double acc = 0.0;
        for (const auto& row : report.per_query) acc += row[g];
        report.recall[g] = acc / static_cast<double>(rankings.size());
    }
    return report;
}

inline EvalReport recall_curve(const BinaryIndex& index, const std::vector<HashCode>& queries,
                               const std::vector<std::vector<Id>>& truth, std::size_t k,
                               std::vector<std::size_t> n_grid = {}, std::size_t threads = 1) {
    if (n_grid.empty()) n_grid = default_n_grid(index.size());
    require(!n_grid.empty(), "recall_curve: empty index");
    const std::size_t depth = *std::max_element(n_grid.begin(), n_grid.end());
    EvalReport report = recall_curve(knn_hamming_batch(index, queries, depth, threads), truth, k, n_grid);
    report.bits = index.bits();
    return report;
}

/// Rows: method,bits,K,N,recall.
inline void write_recall_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
    out << "method,bits,K,N,recall\n";
    out.precision(17);
    for (const auto& r : reports) {
        for (std::size_t g = 0; g < r.n_grid.size(); ++g) {
            out << r.method << ',' << r.bits << ',' << r.k << ',' << r.n_grid[g] << ',' << r.recall[g] << '\n';
        }
    }
}

/// Mean squared L2 distance between each point and its reconstruction.
inline double mean_recon_error(const AnyModel& model, const Dataset& data) {
    require(!data.empty(), "mean_recon_error: empty dataset");
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vector x = data.point(i);
        acc += (x - reconstruct_point(model, x)).squaredNorm();
    }
    return acc / static_cast<double>(data.size());
}

inline double mean_recon_error(const ModelParams& params, const Dataset& data) {
    return mean_recon_error(AnyModel(SghModel{params, std::nullopt}), data);
}

// ---------------------------------------------------------------------------
// Image grids

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
    [[nodiscard]] std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Min-max scaling to 0..255; a constant vector maps to mid gray (128).
inline std::vector<std::uint8_t> normalize_to_gray(const Vector& v) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(v.size()), 128);
    if (v.size() == 0) return out;
    const double lo = v.minCoeff();
    const double hi = v.maxCoeff();
    if (!(hi > lo)) return out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(255.0 * (v[i] - lo) / (hi - lo)));
    }
    return out;
}

struct TileShape {
    std::size_t rows = 0;
    std::size_t cols = 0;
};

/// Grid of tiles, `samples.size()` tiles per row: originals in row 0,
/// their reconstructions in row 1, then one template per codebook column.
/// Every tile is normalized on its own.
inline GrayImage reconstruction_grid(const SghModel& model, const Dataset& samples, TileShape shape) {
    require(shape.rows > 0 && shape.cols > 0, "reconstruction_grid: empty tile shape");
    require(shape.rows * shape.cols == model.params.dim(), "reconstruction_grid: tile shape does not match model dimension");
    require(!samples.empty(), "reconstruction_grid: need at least one sample");
    require(samples.dim() == model.params.dim(), "reconstruction_grid: sample dimension does not match model");

    const std::size_t per_row = samples.size();
    const std::size_t l = model.params.bits();
    const std::size_t template_rows = (l + per_row - 1) / per_row;
    GrayImage img;
    img.width = per_row * shape.cols;
    img.height = (2 + template_rows) * shape.rows;
    img.pixels.assign(img.width * img.height, 0);

    auto blit = [&](std::size_t tile_row, std::size_t tile_col, const Vector& v) {
        const auto gray = normalize_to_gray(v);
        for (std::size_t r = 0; r < shape.rows; ++r) {
            for (std::size_t c = 0; c < shape.cols; ++c) {
                img.at(tile_row * shape.rows + r, tile_col * shape.cols + c) = gray[r * shape.cols + c];
            }
        }
    };
    for (std::size_t i = 0; i < per_row; ++i) {
        const Vector x = samples.point(i);
        blit(0, i, x);
        blit(1, i, model.reconstruct(model.encode(x)));
    }
    for (std::size_t k = 0; k < l; ++k) blit(2 + k / per_row, k % per_row, model.params.U.col(static_cast<Eigen::Index>(k)));
    return img;
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + path + " for writing");
    const auto bytes = encode_pgm(img);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Reads the binary P5 files written above (single whitespace separators, maxval 255).
inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || maxval != 255 || !in) throw FormatError(path + ": unsupported PGM header");
    in.get();
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(w * h);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) throw FormatError(path + ": truncated PGM");
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes after PGM data");
    return img;
}

}  // namespace sgh
