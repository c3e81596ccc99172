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

// Canonical byte encoding shared by every signed or hashed structure.
//
//   integers   big-endian, fixed width
//   strings    4-byte big-endian length, then UTF-8 bytes
//   byte blobs 4-byte big-endian length, then raw bytes
//   sequences  4-byte big-endian element count, then elements
//   enums      1 byte
//   keys, signatures, hashes  raw fixed-width bytes
//
// The layout is the signing and hashing preimage, so it must never change
// without a format version bump.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radchain/error.hpp"

namespace radchain {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) noexcept {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_string(ByteView b) { return std::string(b.begin(), b.end()); }

class Encoder {
public:
    Encoder& u8(std::uint8_t v) {
        out_.push_back(v);
        return *this;
    }
    Encoder& u32(std::uint32_t v) {
        for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
        return *this;
    }
    Encoder& u64(std::uint64_t v) {
        for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
        return *this;
    }
    Encoder& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
    Encoder& boolean(bool v) { return u8(v ? 1 : 0); }
    Encoder& raw(ByteView b) {
        out_.insert(out_.end(), b.begin(), b.end());
        return *this;
    }
    template <std::size_t N>
    Encoder& raw(const std::array<std::uint8_t, N>& a) {
        return raw(ByteView(a));
    }
    Encoder& blob(ByteView b) {
        u32(static_cast<std::uint32_t>(b.size()));
        return raw(b);
    }
    Encoder& str(std::string_view s) { return blob(as_bytes(s)); }
    Encoder& count(std::size_t n) { return u32(static_cast<std::uint32_t>(n)); }

    const Bytes& bytes() const& noexcept { return out_; }
    Bytes bytes() && noexcept { return std::move(out_); }
    std::size_t size() const noexcept { return out_.size(); }

private:
    Bytes out_;
};

class Decoder {
public:
    explicit Decoder(ByteView in) noexcept : in_(in) {}

    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    bool boolean() {
        auto v = u8();
        if (v > 1) throw Error(ErrorCode::MalformedEncoding, "boolean out of range");
        return v == 1;
    }
    ByteView raw(std::size_t n) {
        need(n);
        auto view = in_.subspan(pos_, n);
        pos_ += n;
        return view;
    }
    template <std::size_t N>
    std::array<std::uint8_t, N> fixed() {
        auto view = raw(N);
        std::array<std::uint8_t, N> out{};
        std::copy(view.begin(), view.end(), out.begin());
        return out;
    }
    Bytes blob() {
        auto n = u32();
        auto view = raw(n);
        return Bytes(view.begin(), view.end());
    }
    std::string str() {
        auto n = u32();
        auto view = raw(n);
        return std::string(view.begin(), view.end());
    }
    /// Element count for a sequence; rejects counts that cannot fit in the remaining input.
    std::size_t count(std::size_t min_element_size = 1) {
        auto n = u32();
        if (min_element_size > 0 && n > remaining() / min_element_size)
            throw Error(ErrorCode::MalformedEncoding, "sequence count exceeds input");
        return n;
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }
    bool done() const noexcept { return pos_ == in_.size(); }
    void expect_done() const {
        if (!done()) throw Error(ErrorCode::MalformedEncoding, "trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw Error(ErrorCode::MalformedEncoding, "truncated input");
    }

    ByteView in_;
    std::size_t pos_ = 0;
};

}  // namespace radchain
