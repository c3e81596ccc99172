/* Copyright 2026 The radchain Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "radchain/codec.hpp"

namespace radchain::crypto {

using Hash = std::array<std::uint8_t, 32>;
using PublicKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;
using Seed = std::array<std::uint8_t, 32>;

inline constexpr std::size_t kSignatureSize = 64;
inline constexpr Hash kZeroHash{};

/// SHA-256 digest.
Hash sha256(ByteView data);
inline Hash sha256(std::string_view data) { return sha256(as_bytes(data)); }

/// CRC-32 (IEEE 802.3 polynomial, as used by zlib and PNG).
std::uint32_t crc32(ByteView data);

void random_bytes(std::span<std::uint8_t> out);

template <std::size_t N>
std::array<std::uint8_t, N> random_array() {
    std::array<std::uint8_t, N> out{};
    random_bytes(out);
    return out;
}

std::string to_hex(ByteView data);
template <std::size_t N>
std::string to_hex(const std::array<std::uint8_t, N>& a) {
    return to_hex(ByteView(a));
}
/// Lowercase or uppercase hex; nullopt on odd length or non-hex characters.
std::optional<Bytes> from_hex(std::string_view hex);

template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> fixed_from_hex(std::string_view hex) {
    auto bytes = from_hex(hex);
    if (!bytes || bytes->size() != N) return std::nullopt;
    std::array<std::uint8_t, N> out{};
    std::copy(bytes->begin(), bytes->end(), out.begin());
    return out;
}

std::string to_base64(ByteView data);

/// Ed25519 signing key. The secret half stays inside this object and is
/// never part of any canonical encoding.
class KeyPair {
public:
    static KeyPair generate();
    static KeyPair from_seed(const Seed& seed);

    const PublicKey& public_key() const noexcept { return public_key_; }
    /// The 32-byte seed this key derives from (secret).
    Seed seed() const;
    Signature sign(ByteView message) const;
    Signature sign(std::string_view message) const { return sign(as_bytes(message)); }

private:
    KeyPair() = default;

    PublicKey public_key_{};
    std::array<std::uint8_t, 64> secret_key_{};
};

bool verify(const PublicKey& key, ByteView message, const Signature& signature) noexcept;

}  // namespace radchain::crypto
