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

// File formats:
//   fvecs/bvecs/ivecs  per record: int32 d, then d float32 / uint8 / int32
//   MNIST IDX images   big-endian magic 0x00000803, count, rows, cols, pixels
//   checkpoint         header, float64 parameter blocks, FNV-1a checksum
//   packed codes       "SGHCODES", uint64 N, uint64 l, N * ceil(l/64) uint64
// Everything is little-endian unless noted.

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "sgh/baselines.hpp"
#include "sgh/codec.hpp"
#include "sgh/common.hpp"
#include "sgh/dataset.hpp"
#include "sgh/model.hpp"
#include "sgh/rng.hpp"
#include "sgh/search.hpp"

namespace sgh {

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("failed writing " + path);
}

template <typename UInt>
UInt load_le(const std::uint8_t* p) {
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(p[i]) << (8 * i);
    return v;
}

inline std::uint32_t load_be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

template <typename UInt>
void store_le(std::vector<std::uint8_t>& out, UInt v) {
    for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline float load_f32(const std::uint8_t* p) { return std::bit_cast<float>(load_le<std::uint32_t>(p)); }
inline double load_f64(const std::uint8_t* p) { return std::bit_cast<double>(load_le<std::uint64_t>(p)); }
inline void store_f32(std::vector<std::uint8_t>& out, float v) { store_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void store_f64(std::vector<std::uint8_t>& out, double v) { store_le(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Walks the common vecs container; `elem` is the element width in bytes and
// `on_record(offset, d)` consumes one record whose payload starts at offset.
template <typename OnRecord>
void scan_vecs(const std::vector<std::uint8_t>& bytes, std::size_t elem, const std::string& path,
               OnRecord&& on_record) {
    std::size_t offset = 0;
    std::int64_t dim = -1;
    while (offset < bytes.size()) {
        if (bytes.size() - offset < 4) {
            throw FormatError(path + ": truncated record header at byte " + std::to_string(offset));
        }
        const auto d = static_cast<std::int32_t>(load_le<std::uint32_t>(&bytes[offset]));
        if (d <= 0) throw FormatError(path + ": non-positive dimension at byte " + std::to_string(offset));
        if (dim >= 0 && d != dim) {
            throw FormatError(path + ": dimension " + std::to_string(d) + " at byte " + std::to_string(offset) +
                              " differs from " + std::to_string(dim));
        }
        dim = d;
        const std::size_t payload = static_cast<std::size_t>(d) * elem;
        if (bytes.size() - offset - 4 < payload) {
            throw FormatError(path + ": truncated record at byte " + std::to_string(offset));
        }
        on_record(offset + 4, static_cast<std::size_t>(d));
        offset += 4 + payload;
    }
}

template <typename ElemFn>
Dataset read_vecs_dataset(const std::string& path, std::size_t elem, ElemFn&& load_elem) {
    const auto bytes = read_file(path);
    std::vector<double> values;
    std::size_t dim = 0;
    std::size_t count = 0;
    scan_vecs(bytes, elem, path, [&](std::size_t off, std::size_t d) {
        dim = d;
        ++count;
        for (std::size_t j = 0; j < d; ++j) values.push_back(load_elem(&bytes[off + j * elem]));
    });
    Dataset ds(Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count)),
               path);
    return ds;
}

}  // namespace detail

inline Dataset read_fvecs(const std::string& path) {
    Dataset ds = detail::read_vecs_dataset(path, 4, [](const std::uint8_t* p) { return double(detail::load_f32(p)); });
    if (!ds.points.allFinite()) throw FormatError(path + ": non-finite value");
    return ds;
}

inline Dataset read_bvecs(const std::string& path) {
    return detail::read_vecs_dataset(path, 1, [](const std::uint8_t* p) { return double(*p); });
}

inline std::vector<std::vector<std::int32_t>> read_ivecs(const std::string& path) {
    const auto bytes = detail::read_file(path);
    std::vector<std::vector<std::int32_t>> rows;
    detail::scan_vecs(bytes, 4, path, [&](std::size_t off, std::size_t d) {
        std::vector<std::int32_t> row(d);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = static_cast<std::int32_t>(detail::load_le<std::uint32_t>(&bytes[off + 4 * j]));
        }
        rows.push_back(std::move(row));
    });
    return rows;
}

/// Writes points as float32 records.
inline void write_fvecs(const std::string& path, const Dataset& data) {
    std::vector<std::uint8_t> out;
    out.reserve(data.size() * (4 + 4 * data.dim()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        detail::store_le(out, static_cast<std::uint32_t>(data.dim()));
        for (std::size_t j = 0; j < data.dim(); ++j) {
            detail::store_f32(out, static_cast<float>(data.points(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))));
        }
    }
    detail::write_file(path, out);
}

/// Writes points as uint8 records; values must already be integers in [0, 255].
inline void write_bvecs(const std::string& path, const Dataset& data) {
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        detail::store_le(out, static_cast<std::uint32_t>(data.dim()));
        for (std::size_t j = 0; j < data.dim(); ++j) {
            const double v = data.points(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            require(v >= 0.0 && v <= 255.0 && v == std::floor(v), "write_bvecs: value is not a byte");
            out.push_back(static_cast<std::uint8_t>(v));
        }
    }
    detail::write_file(path, out);
}

/// Rows may not be empty and must share one length.
inline void write_ivecs(const std::string& path, const std::vector<std::vector<std::int32_t>>& rows) {
    std::vector<std::uint8_t> out;
    for (const auto& row : rows) {
        require(!row.empty(), "write_ivecs: empty record");
        require(row.size() == rows.front().size(), "write_ivecs: records must share one length");
        detail::store_le(out, static_cast<std::uint32_t>(row.size()));
        for (std::int32_t v : row) detail::store_le(out, static_cast<std::uint32_t>(v));
    }
    detail::write_file(path, out);
}

struct ImageShape {
    std::size_t rows = 0;
    std::size_t cols = 0;
};

/// IDX image file; pixels scaled to [0, 1].
inline Dataset read_mnist_idx(const std::string& path, ImageShape* shape = nullptr) {
    const auto bytes = detail::read_file(path);
    if (bytes.size() < 16) throw FormatError(path + ": IDX header truncated");
    const std::uint32_t magic = detail::load_be32(&bytes[0]);
    if (magic != 0x00000803u) throw FormatError(path + ": bad IDX magic");
    const std::size_t n = detail::load_be32(&bytes[4]);
    const std::size_t rows = detail::load_be32(&bytes[8]);
    const std::size_t cols = detail::load_be32(&bytes[12]);
    const std::size_t d = rows * cols;
    if (d == 0) throw FormatError(path + ": zero image size");
    if (bytes.size() - 16 != n * d) {
        throw FormatError(path + ": expected " + std::to_string(n * d) + " pixel bytes after the header, found " +
                          std::to_string(bytes.size() - 16));
    }
    Matrix pts(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            pts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = bytes[16 + i * d + j] / 255.0;
        }
    }
    if (shape) *shape = {rows, cols};
    return Dataset(std::move(pts), path);
}

struct SynthMixture {
    Dataset data;
    Matrix centers;                  // d x n_clusters
    std::vector<std::size_t> labels; // component of each point
};

/// Gaussian mixture with centers on a sphere of radius 10 * spread and
/// isotropic per-cluster stddev `spread`; components drawn uniformly.
inline SynthMixture synth_mixture_labeled(std::size_t n, std::size_t d, std::size_t n_clusters, double spread,
                                          std::uint64_t seed) {
    require(d > 0, "synth_mixture: d must be positive");
    require(n_clusters > 0, "synth_mixture: need at least one cluster");
    require(n_clusters <= n, "synth_mixture: more clusters than points");
    require(spread >= 0.0 && std::isfinite(spread), "synth_mixture: spread must be non-negative");
    const Rng root(seed);
    Rng center_rng = root.split("centers");
    Rng point_rng = root.split("points");
    SynthMixture out;
    out.centers.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n_clusters));
    for (Eigen::Index c = 0; c < out.centers.cols(); ++c) {
        Vector dir(static_cast<Eigen::Index>(d));
        do {
            for (auto& v : dir) v = center_rng.normal();
        } while (dir.norm() == 0.0);
        out.centers.col(c) = (10.0 * spread / dir.norm()) * dir;
    }
    Matrix pts(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = point_rng.below(n_clusters);
        out.labels[i] = c;
        for (Eigen::Index j = 0; j < pts.rows(); ++j) {
            pts(j, static_cast<Eigen::Index>(i)) = out.centers(j, static_cast<Eigen::Index>(c)) + spread * point_rng.normal();
        }
    }
    out.data = Dataset(std::move(pts), "synth");
    return out;
}

inline Dataset synth_mixture(std::size_t n, std::size_t d, std::size_t n_clusters, double spread, std::uint64_t seed) {
    return synth_mixture_labeled(n, d, n_clusters, spread, seed).data;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::array<char, 8> kCheckpointMagic = {'S', 'G', 'H', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 8 + 4 + 4 + 8 + 8 + 4 + 4 + 8;

namespace detail {

inline constexpr std::uint32_t kFlagHasMean = 1u;
inline constexpr std::uint32_t kFlagRankDeficient = 2u;

inline void put_block(std::vector<std::uint8_t>& out, const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) store_f64(out, data[i]);
}

class PayloadReader {
public:
    PayloadReader(std::span<const std::uint8_t> bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

    void fill(double* dst, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) dst[i] = next();
    }

    double next() {
        if (pos_ + 8 > bytes_.size()) throw FormatError(path_ + ": checkpoint payload truncated");
        const double v = load_f64(&bytes_[pos_]);
        pos_ += 8;
        return v;
    }

    [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const AnyModel& model) {
    std::vector<std::uint8_t> payload;
    std::uint64_t d = 0;
    std::uint64_t l = 0;
    CodeDomain domain = CodeDomain::ZeroOne;
    std::uint32_t flags = 0;
    if (const auto* m = std::get_if<SghModel>(&model)) {
        m->params.validate();
        d = m->params.dim();
        l = m->params.bits();
        domain = m->params.domain;
        detail::put_block(payload, m->params.W.data(), m->params.W.size());
        detail::put_block(payload, m->params.U.data(), m->params.U.size());
        detail::put_block(payload, m->params.beta.data(), m->params.beta.size());
        detail::store_f64(payload, m->params.log_rho);
        if (m->mean) {
            require(static_cast<std::uint64_t>(m->mean->size()) == d, "checkpoint: mean has wrong dimension");
            flags |= detail::kFlagHasMean;
            detail::put_block(payload, m->mean->data(), m->mean->size());
        }
    } else if (const auto* itq = std::get_if<ItqModel>(&model)) {
        d = itq->dim();
        l = itq->bits();
        domain = CodeDomain::ZeroOne;
        flags = detail::kFlagHasMean | (itq->rank_deficient ? detail::kFlagRankDeficient : 0u);
        require(itq->R.rows() == itq->R.cols() && static_cast<std::uint64_t>(itq->R.rows()) == l &&
                    static_cast<std::uint64_t>(itq->scale.size()) == l && static_cast<std::uint64_t>(itq->mean.size()) == d,
                "checkpoint: inconsistent ITQ model");
        detail::put_block(payload, itq->mean.data(), itq->mean.size());
        detail::put_block(payload, itq->W_pca.data(), itq->W_pca.size());
        detail::put_block(payload, itq->R.data(), itq->R.size());
        detail::put_block(payload, itq->scale.data(), itq->scale.size());
        detail::store_f64(payload, static_cast<double>(itq->iterations));
    } else {
        const auto& pca = std::get<PcaModel>(model);
        d = pca.dim();
        l = pca.bits();
        flags = detail::kFlagHasMean | (pca.rank_deficient ? detail::kFlagRankDeficient : 0u);
        require(static_cast<std::uint64_t>(pca.eigenvalues.size()) == l && static_cast<std::uint64_t>(pca.mean.size()) == d,
                "checkpoint: inconsistent PCA model");
        detail::put_block(payload, pca.mean.data(), pca.mean.size());
        detail::put_block(payload, pca.components.data(), pca.components.size());
        detail::put_block(payload, pca.eigenvalues.data(), pca.eigenvalues.size());
        detail::store_f64(payload, static_cast<double>(pca.rank));
    }

    std::vector<std::uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
    detail::store_le(out, kCheckpointVersion);
    detail::store_le(out, static_cast<std::uint32_t>(kind_of(model)));
    detail::store_le(out, d);
    detail::store_le(out, l);
    detail::store_le(out, static_cast<std::uint32_t>(domain));
    detail::store_le(out, flags);
    detail::store_le(out, static_cast<std::uint64_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    detail::store_le(out, detail::fnv1a64(payload));
    return out;
}

inline AnyModel deserialize_checkpoint(std::span<const std::uint8_t> bytes, const std::string& path = "checkpoint") {
    if (bytes.size() < kCheckpointHeaderBytes + 8) throw FormatError(path + ": checkpoint too short");
    if (!std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin())) {
        throw FormatError(path + ": not a checkpoint (bad magic)");
    }
    const auto version = detail::load_le<std::uint32_t>(&bytes[8]);
    if (version != kCheckpointVersion) {
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto kind_raw = detail::load_le<std::uint32_t>(&bytes[12]);
    if (kind_raw > 2) throw FormatError(path + ": unknown model kind " + std::to_string(kind_raw));
    const auto d = detail::load_le<std::uint64_t>(&bytes[16]);
    const auto l = detail::load_le<std::uint64_t>(&bytes[24]);
    const auto domain_raw = detail::load_le<std::uint32_t>(&bytes[32]);
    const auto flags = detail::load_le<std::uint32_t>(&bytes[36]);
    const auto payload_size = detail::load_le<std::uint64_t>(&bytes[40]);
    if (domain_raw > 1) throw FormatError(path + ": unknown code domain");
    if (d == 0 || l == 0 || d > (1u << 24) || l > (1u << 16)) throw FormatError(path + ": implausible dimensions");
    if (bytes.size() != kCheckpointHeaderBytes + payload_size + 8) {
        throw FormatError(path + ": file size does not match the declared payload");
    }
    const auto payload = bytes.subspan(kCheckpointHeaderBytes, payload_size);
    const auto stored = detail::load_le<std::uint64_t>(&bytes[kCheckpointHeaderBytes + payload_size]);
    if (stored != detail::fnv1a64(payload)) throw FormatError(path + ": checksum mismatch");

    const auto di = static_cast<Eigen::Index>(d);
    const auto li = static_cast<Eigen::Index>(l);
    const bool has_mean = flags & detail::kFlagHasMean;
    detail::PayloadReader reader(payload, path);
    AnyModel result;
    switch (static_cast<ModelKind>(kind_raw)) {
        case ModelKind::SGH: {
            SghModel m;
            m.params = ModelParams::zeros(d, l, static_cast<CodeDomain>(domain_raw));
            reader.fill(m.params.W.data(), di * li);
            reader.fill(m.params.U.data(), di * li);
            reader.fill(m.params.beta.data(), li);
            m.params.log_rho = reader.next();
            if (has_mean) {
                m.mean = Vector(di);
                reader.fill(m.mean->data(), di);
            }
            result = std::move(m);
            break;
        }
        case ModelKind::ITQ: {
            ItqModel m;
            m.mean.resize(di);
            m.W_pca.resize(di, li);
            m.R.resize(li, li);
            m.scale.resize(li);
            reader.fill(m.mean.data(), di);
            reader.fill(m.W_pca.data(), di * li);
            reader.fill(m.R.data(), li * li);
            reader.fill(m.scale.data(), li);
            m.iterations = static_cast<std::size_t>(reader.next());
            m.rank_deficient = flags & detail::kFlagRankDeficient;
            result = std::move(m);
            break;
        }
        case ModelKind::PCA: {
            PcaModel m;
            m.mean.resize(di);
            m.components.resize(di, li);
            m.eigenvalues.resize(li);
            reader.fill(m.mean.data(), di);
            reader.fill(m.components.data(), di * li);
            reader.fill(m.eigenvalues.data(), li);
            m.rank = static_cast<std::size_t>(reader.next());
            m.rank_deficient = flags & detail::kFlagRankDeficient;
            result = std::move(m);
            break;
        }
    }
    if (!reader.done()) throw FormatError(path + ": payload length does not match its dimensions");
    return result;
}

inline void save_checkpoint(const std::string& path, const AnyModel& model) {
    detail::write_file(path, serialize_checkpoint(model));
}

inline AnyModel load_checkpoint(const std::string& path) {
    const auto bytes = detail::read_file(path);
    return deserialize_checkpoint(bytes, path);
}

/// Loads a checkpoint and insists it holds a model of type T.
template <typename T>
T load_checkpoint_as(const std::string& path) {
    AnyModel any = load_checkpoint(path);
    if (auto* m = std::get_if<T>(&any)) return std::move(*m);
    throw FormatError(path + ": checkpoint holds a " + std::string(to_string(kind_of(any))) + " model");
}

// ---------------------------------------------------------------------------
// Packed code files

inline constexpr std::array<char, 8> kCodesMagic = {'S', 'G', 'H', 'C', 'O', 'D', 'E', 'S'};

inline std::vector<std::uint8_t> serialize_codes(const BinaryIndex& index) {
    std::vector<std::uint8_t> out(kCodesMagic.begin(), kCodesMagic.end());
    detail::store_le(out, static_cast<std::uint64_t>(index.size()));
    detail::store_le(out, static_cast<std::uint64_t>(index.bits()));
    for (std::uint64_t w : index.raw_words()) detail::store_le(out, w);
    return out;
}

inline void write_codes(const std::string& path, const BinaryIndex& index) {
    detail::write_file(path, serialize_codes(index));
}

inline BinaryIndex read_codes(const std::string& path) {
    const auto bytes = detail::read_file(path);
    if (bytes.size() < 24 || !std::equal(kCodesMagic.begin(), kCodesMagic.end(), bytes.begin())) {
        throw FormatError(path + ": not a packed code file");
    }
    const auto n = detail::load_le<std::uint64_t>(&bytes[8]);
    const auto l = detail::load_le<std::uint64_t>(&bytes[16]);
    if (l == 0 || l > kMaxIndexBits) throw FormatError(path + ": unsupported code length " + std::to_string(l));
    const std::uint64_t words = n * words_for_bits(l);
    if ((bytes.size() - 24) != words * 8) throw FormatError(path + ": size does not match header");
    std::vector<std::uint64_t> data(words);
    for (std::uint64_t i = 0; i < words; ++i) data[i] = detail::load_le<std::uint64_t>(&bytes[24 + 8 * i]);
    try {
        return BinaryIndex(l, std::move(data));
    } catch (const InputError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace sgh
