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

#include "radchain/crypto.hpp"

#include <sodium.h>
#include <zlib.h>

#include <stdexcept>

namespace radchain::crypto {

namespace {

void ensure_sodium() {
    static const bool ready = [] {
        if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
        return true;
    }();
    (void)ready;
}

}  // namespace

Hash sha256(ByteView data) {
    ensure_sodium();
    Hash out{};
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

std::uint32_t crc32(ByteView data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in pieces.
    std::size_t offset = 0;
    while (offset < data.size()) {
        auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - offset, 1u << 30));
        crc = ::crc32(crc, data.data() + offset, chunk);
        offset += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

void random_bytes(std::span<std::uint8_t> out) {
    ensure_sodium();
    randombytes_buf(out.data(), out.size());
}

std::string to_hex(ByteView data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

std::optional<Bytes> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]);
        int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

std::string to_base64(ByteView data) {
    ensure_sodium();
    const auto variant = sodium_base64_VARIANT_ORIGINAL;
    std::string out(sodium_base64_encoded_len(data.size(), variant), '\0');
    sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), variant);
    out.resize(out.size() - 1);  // trailing NUL
    return out;
}

KeyPair KeyPair::generate() {
    ensure_sodium();
    KeyPair kp;
    crypto_sign_ed25519_keypair(kp.public_key_.data(), kp.secret_key_.data());
    return kp;
}

KeyPair KeyPair::from_seed(const Seed& seed) {
    ensure_sodium();
    KeyPair kp;
    crypto_sign_ed25519_seed_keypair(kp.public_key_.data(), kp.secret_key_.data(), seed.data());
    return kp;
}

Seed KeyPair::seed() const {
    Seed out{};
    crypto_sign_ed25519_sk_to_seed(out.data(), secret_key_.data());
    return out;
}

Signature KeyPair::sign(ByteView message) const {
    Signature sig{};
    crypto_sign_ed25519_detached(sig.data(), nullptr, message.data(), message.size(), secret_key_.data());
    return sig;
}

bool verify(const PublicKey& key, ByteView message, const Signature& signature) noexcept {
    ensure_sodium();
    return crypto_sign_ed25519_verify_detached(signature.data(), message.data(), message.size(), key.data()) == 0;
}

}  // namespace radchain::crypto
