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

// Linear-scan retrieval over bit-packed codes plus brute-force ground truth.
// Every ranking breaks ties by ascending id.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "sgh/common.hpp"
#include "sgh/dataset.hpp"
#include "sgh/hash_code.hpp"
#include "sgh/model.hpp"
#include "sgh/parallel.hpp"

namespace sgh {

using Id = std::int64_t;

/// Distances are accumulated in 32-bit integers.
inline constexpr std::size_t kMaxIndexBits = 4096;

inline std::uint32_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
    std::uint32_t dist = 0;
    for (std::size_t w = 0; w < a.size(); ++w) dist += static_cast<std::uint32_t>(std::popcount(a[w] ^ b[w]));
    return dist;
}

inline std::uint32_t hamming_distance(const HashCode& a, const HashCode& b) {
    require(a.size() == b.size(), "hamming_distance: code lengths differ");
    return hamming_distance(a.words(), b.words());
}

/// Immutable array of N codes of `bits` bits, stored contiguously.
class BinaryIndex {
public:
    BinaryIndex() = default;

    BinaryIndex(std::size_t bits, std::vector<std::uint64_t> words, std::vector<Id> id_map = {})
        : bits_(bits), words_per_code_(words_for_bits(bits)), words_(std::move(words)), id_map_(std::move(id_map)) {
        require(bits > 0 && bits <= kMaxIndexBits, "BinaryIndex: bit length must be in [1, 4096]");
        require(words_.size() % words_per_code_ == 0, "BinaryIndex: word count is not a multiple of the code size");
        count_ = words_.size() / words_per_code_;
        require(id_map_.empty() || id_map_.size() == count_, "BinaryIndex: id map has the wrong length");
        if (bits % 64 != 0) {
            for (std::size_t i = 0; i < count_; ++i) {
                require((words_[(i + 1) * words_per_code_ - 1] >> (bits % 64)) == 0,
                        "BinaryIndex: padding bits must be zero");
            }
        }
    }

    static BinaryIndex from_codes(std::size_t bits, const std::vector<HashCode>& codes, std::vector<Id> id_map = {}) {
        std::vector<std::uint64_t> words;
        words.reserve(codes.size() * words_for_bits(bits));
        for (const auto& c : codes) {
            require(c.size() == bits, "BinaryIndex: code length mismatch");
            words.insert(words.end(), c.words().begin(), c.words().end());
        }
        return BinaryIndex(bits, std::move(words), std::move(id_map));
    }

    [[nodiscard]] std::size_t size() const { return count_; }
    [[nodiscard]] std::size_t bits() const { return bits_; }
    [[nodiscard]] std::size_t words_per_code() const { return words_per_code_; }
    [[nodiscard]] std::span<const std::uint64_t> raw_words() const { return words_; }

    [[nodiscard]] std::span<const std::uint64_t> code_words(std::size_t i) const {
        return std::span<const std::uint64_t>(words_).subspan(i * words_per_code_, words_per_code_);
    }

    [[nodiscard]] HashCode code(std::size_t i) const { return HashCode(bits_, code_words(i)); }
    [[nodiscard]] Id id(std::size_t i) const { return id_map_.empty() ? static_cast<Id>(i) : id_map_[i]; }

private:
    std::size_t bits_ = 0;
    std::size_t words_per_code_ = 0;
    std::size_t count_ = 0;
    std::vector<std::uint64_t> words_;
    std::vector<Id> id_map_;
};

namespace detail {

// Keeps the n smallest (key, id) pairs seen; returns them ascending.
template <typename Key>
class BoundedTopN {
public:
    explicit BoundedTopN(std::size_t n) : n_(n) {}

    void push(Key key, Id id) {
        if (n_ == 0) return;
        if (heap_.size() < n_) {
            heap_.emplace(key, id);
        } else if (std::pair(key, id) < heap_.top()) {
            heap_.pop();
            heap_.emplace(key, id);
        }
    }

    std::vector<Id> sorted_ids() {
        std::vector<Id> out(heap_.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = heap_.top().second;
            heap_.pop();
        }
        return out;
    }

private:
    std::size_t n_;
    std::priority_queue<std::pair<Key, Id>> heap_;
};

}  // namespace detail

/// The n nearest codes by Hamming distance, single pass with a bounded max-heap.
inline std::vector<Id> knn_hamming(const BinaryIndex& index, const HashCode& query, std::size_t n) {
    require(query.size() == index.bits(), "knn_hamming: query code length does not match index");
    detail::BoundedTopN<std::uint32_t> top(n);
    const auto q = query.words();
    for (std::size_t i = 0; i < index.size(); ++i) top.push(hamming_distance(index.code_words(i), q), index.id(i));
    return top.sorted_ids();
}

/// Queries are partitioned across workers; the database order is never split.
inline std::vector<std::vector<Id>> knn_hamming_batch(const BinaryIndex& index, const std::vector<HashCode>& queries,
                                                      std::size_t n, std::size_t threads = 1) {
    std::vector<std::vector<Id>> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) { out[i] = knn_hamming(index, queries[i], n); });
    return out;
}

/// Brute-force k nearest points by squared Euclidean distance.
inline std::vector<Id> knn_exact_l2(const Dataset& data, const Vector& query, std::size_t k) {
    require(static_cast<std::size_t>(query.size()) == data.dim(), "knn_exact_l2: dimension mismatch");
    detail::BoundedTopN<double> top(k);
    for (std::size_t i = 0; i < data.size(); ++i) {
        top.push((data.points.col(static_cast<Eigen::Index>(i)) - query).squaredNorm(), static_cast<Id>(i));
    }
    return top.sorted_ids();
}

/// Brute-force k points with the largest inner product.
inline std::vector<Id> knn_exact_ip(const Dataset& data, const Vector& query, std::size_t k) {
    require(static_cast<std::size_t>(query.size()) == data.dim(), "knn_exact_ip: dimension mismatch");
    detail::BoundedTopN<double> top(k);
    for (std::size_t i = 0; i < data.size(); ++i) {
        top.push(-data.points.col(static_cast<Eigen::Index>(i)).dot(query), static_cast<Id>(i));
    }
    return top.sorted_ids();
}

enum class Metric { L2, InnerProduct };

inline std::vector<std::vector<Id>> ground_truth(const Dataset& base, const Dataset& queries, std::size_t k,
                                                 Metric metric, std::size_t threads = 1) {
    std::vector<std::vector<Id>> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        const Vector q = queries.point(i);
        out[i] = metric == Metric::L2 ? knn_exact_l2(base, q, k) : knn_exact_ip(base, q, k);
    });
    return out;
}

/// Asymmetric scores x^T U h for every indexed code.
inline std::vector<double> asymmetric_scores(const BinaryIndex& index, const ModelParams& params,
                                             const Vector& query) {
    require(index.bits() == params.bits(), "asymmetric_ip_search: code length does not match model");
    detail::check_point(params, query);
    const Vector s = params.U.transpose() * query;
    const double total = s.sum();
    const bool plus_minus = params.domain == CodeDomain::PlusMinus;
    std::vector<double> scores(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto words = index.code_words(i);
        double acc = 0.0;
        for (std::size_t w = 0; w < words.size(); ++w) {
            std::uint64_t bits = words[w];
            while (bits != 0) {
                const int b = std::countr_zero(bits);
                acc += s[static_cast<Eigen::Index>(w * 64 + static_cast<std::size_t>(b))];
                bits &= bits - 1;
            }
        }
        scores[i] = plus_minus ? 2.0 * acc - total : acc;
    }
    return scores;
}

/// Top n codes by asymmetric inner product x^T U h, descending.
inline std::vector<Id> asymmetric_ip_search(const BinaryIndex& index, const ModelParams& params, const Vector& query,
                                            std::size_t n) {
    const std::vector<double> scores = asymmetric_scores(index, params, query);
    detail::BoundedTopN<double> top(n);
    for (std::size_t i = 0; i < scores.size(); ++i) top.push(-scores[i], index.id(i));
    return top.sorted_ids();
}

}  // namespace sgh
