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

// Uniform encode / reconstruct over every model kind a checkpoint can hold.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "sgh/baselines.hpp"
#include "sgh/common.hpp"
#include "sgh/dataset.hpp"
#include "sgh/model.hpp"
#include "sgh/parallel.hpp"
#include "sgh/search.hpp"

namespace sgh {

enum class ModelKind : std::uint32_t { SGH = 0, ITQ = 1, PCA = 2 };

inline const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::SGH: return "sgh";
        case ModelKind::ITQ: return "itq";
        case ModelKind::PCA: return "pca";
    }
    return "unknown";
}

/// Trained hashing model plus the training-set mean subtracted before encoding.
struct SghModel {
    ModelParams params;
    std::optional<Vector> mean;

    [[nodiscard]] Vector center(const Vector& x) const { return mean ? Vector(x - *mean) : x; }

    [[nodiscard]] HashCode encode(const Vector& x) const { return encode_map(params, center(x)); }

    [[nodiscard]] Vector reconstruct(const HashCode& h) const {
        Vector out = decode(params, h);
        if (mean) out += *mean;
        return out;
    }
};

using AnyModel = std::variant<SghModel, ItqModel, PcaModel>;

inline ModelKind kind_of(const AnyModel& model) { return static_cast<ModelKind>(model.index()); }

inline std::size_t model_dim(const AnyModel& model) {
    return std::visit(
        [](const auto& m) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SghModel>) {
                return m.params.dim();
            } else {
                return m.dim();
            }
        },
        model);
}

inline std::size_t model_bits(const AnyModel& model) {
    return std::visit(
        [](const auto& m) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SghModel>) {
                return m.params.bits();
            } else {
                return m.bits();
            }
        },
        model);
}

/// MAP code for SGH, rotated sign code for ITQ. PCA has no binary code.
inline HashCode encode_point(const AnyModel& model, const Vector& x) {
    if (const auto* m = std::get_if<SghModel>(&model)) return m->encode(x);
    if (const auto* m = std::get_if<ItqModel>(&model)) return itq_encode(*m, x);
    throw InputError("PCA models produce real-valued projections, not binary codes");
}

/// Reconstruction of x from the model's representation of it.
inline Vector reconstruct_point(const AnyModel& model, const Vector& x) {
    if (const auto* m = std::get_if<SghModel>(&model)) return m->reconstruct(m->encode(x));
    if (const auto* m = std::get_if<ItqModel>(&model)) return itq_reconstruct(*m, itq_encode(*m, x));
    return pca_reconstruct(std::get<PcaModel>(model), x);
}

inline BinaryIndex encode_dataset(const AnyModel& model, const Dataset& data, std::size_t threads = 1) {
    require(data.empty() || data.dim() == model_dim(model), "encode: dataset dimension does not match model");
    const std::size_t bits = model_bits(model);
    const std::size_t wpc = words_for_bits(bits);
    std::vector<std::uint64_t> words(data.size() * wpc);
    parallel_for(data.size(), threads, [&](std::size_t i) {
        const HashCode code = encode_point(model, data.point(i));
        std::copy(code.words().begin(), code.words().end(), words.begin() + static_cast<std::ptrdiff_t>(i * wpc));
    });
    return BinaryIndex(bits, std::move(words));
}

inline std::vector<HashCode> encode_queries(const AnyModel& model, const Dataset& queries) {
    require(queries.empty() || queries.dim() == model_dim(model), "encode: query dimension does not match model");
    std::vector<HashCode> codes;
    codes.reserve(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) codes.push_back(encode_point(model, queries.point(i)));
    return codes;
}

}  // namespace sgh
