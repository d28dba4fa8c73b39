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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgh/common.hpp"

namespace sgh {

inline constexpr std::size_t words_for_bits(std::size_t bits) { return (bits + 63) / 64; }

/// Bit-packed code of `bits` bits. Bit k lives in word k/64 at position k%64;
/// padding bits of the last word are always zero.
class HashCode {
public:
    HashCode() = default;
    explicit HashCode(std::size_t bits) : bits_(bits), words_(words_for_bits(bits), 0) {}

    HashCode(std::size_t bits, std::span<const std::uint64_t> words) : bits_(bits) {
        require(words.size() == words_for_bits(bits), "HashCode: word count does not match bit length");
        words_.assign(words.begin(), words.end());
        require(padding_clear(), "HashCode: padding bits must be zero");
    }

    /// Builds a code from a 0/1 string, character k is bit k.
    static HashCode from_string(const std::string& bits01) {
        HashCode code(bits01.size());
        for (std::size_t k = 0; k < bits01.size(); ++k) {
            require(bits01[k] == '0' || bits01[k] == '1', "HashCode: expected '0' or '1'");
            code.set(k, bits01[k] == '1');
        }
        return code;
    }

    [[nodiscard]] std::size_t size() const { return bits_; }
    [[nodiscard]] std::span<const std::uint64_t> words() const { return words_; }

    [[nodiscard]] bool get(std::size_t k) const { return (words_[k >> 6] >> (k & 63)) & 1ULL; }

    void set(std::size_t k, bool value) {
        const std::uint64_t mask = 1ULL << (k & 63);
        if (value) {
            words_[k >> 6] |= mask;
        } else {
            words_[k >> 6] &= ~mask;
        }
    }

    /// Numeric value of bit k under the given domain (0/1 or -1/+1).
    [[nodiscard]] double value(std::size_t k, CodeDomain domain) const {
        const bool b = get(k);
        if (domain == CodeDomain::ZeroOne) return b ? 1.0 : 0.0;
        return b ? 1.0 : -1.0;
    }

    [[nodiscard]] Vector values(CodeDomain domain) const {
        Vector h(static_cast<Eigen::Index>(bits_));
        for (std::size_t k = 0; k < bits_; ++k) h[static_cast<Eigen::Index>(k)] = value(k, domain);
        return h;
    }

    /// The stored bits as 0/1 doubles regardless of domain.
    [[nodiscard]] Vector bit_vector() const { return values(CodeDomain::ZeroOne); }

    [[nodiscard]] std::string to_string() const {
        std::string s(bits_, '0');
        for (std::size_t k = 0; k < bits_; ++k) s[k] = get(k) ? '1' : '0';
        return s;
    }

    friend bool operator==(const HashCode&, const HashCode&) = default;

private:
    [[nodiscard]] bool padding_clear() const {
        if (bits_ % 64 == 0 || words_.empty()) return true;
        return (words_.back() >> (bits_ % 64)) == 0;
    }

    std::size_t bits_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace sgh
