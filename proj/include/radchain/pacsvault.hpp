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

// Off-chain study vault. Pixel data stays here; the ledger holds only the
// content hashes (ExamRecord) and the access trail.
//
// Exam file ({hex(exam_id)}.exam), big-endian:
//
//   u32 count
//   count x { u32 len ∥ instance_id ∥ u32 len ∥ pixel bytes }
//
// A sidecar ({hex(exam_id)}.meta) holds the channel, the site protocol count
// and the content hashes recorded at ingest.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "radchain/clock.hpp"
#include "radchain/codec.hpp"
#include "radchain/contracts.hpp"
#include "radchain/crypto.hpp"
#include "radchain/network.hpp"

namespace radchain::pacsvault {

inline constexpr std::uint64_t kDefaultTtlSeconds = 15 * 60;

/// Decoded pixel payload: a tiny header and 16-bit grayscale samples.
struct Pixels {
    std::string instance_id;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint16_t> samples;  // row-major, width * height

    /// [str instance_id ∥ u32 width ∥ u32 height ∥ u16 samples...]
    Bytes encode() const;
    static Pixels decode(ByteView bytes);
    bool operator==(const Pixels&) const = default;
};

/// Deterministic test pattern.
Pixels synthetic_pixels(std::string instance_id, std::uint32_t width, std::uint32_t height, std::uint64_t seed);

struct Image {
    std::string instance_id;
    crypto::Hash content_hash{};
    Bytes pixel_bytes;

    /// Image with content_hash computed from the bytes.
    static Image from_bytes(std::string instance_id, Bytes pixel_bytes);
    bool operator==(const Image&) const = default;
};

struct StudyBlob {
    std::string exam_id;
    std::vector<Image> images;
    std::uint32_t site_protocol_image_count = 0;
};

/// Fields of the ExamRecord that do not come from the pixels.
struct StudyInfo {
    std::string modality;
    std::string referring_physician;
    std::vector<std::string> prior_exam_ids;
};

struct Completeness {
    bool complete = true;
    std::uint32_t missing = 0;

    bool operator==(const Completeness&) const = default;
};

using Token = std::array<std::uint8_t, 32>;

struct ViewToken {
    Token token{};
    std::string channel_id;
    std::string exam_id;
    std::string user_id;
    std::int64_t issued_at = 0;
    std::uint64_t ttl_seconds = 0;
    std::uint64_t consumed_count = 0;
    crypto::Hash data_access_tx{};  // the committed record_data_access

    crypto::Hash digest() const { return crypto::sha256(ByteView(token)); }
};

/// "/v1/images/{exam_id}?token={64 hex}"
std::string view_link(const std::string& exam_id, const Token& token);

struct FetchedImage {
    std::string instance_id;
    Bytes pixel_bytes;
};

/// One successful fetch.
struct FetchRecord {
    crypto::Hash token_digest{};
    crypto::Hash data_access_tx{};
    std::string channel_id;
    std::string exam_id;
    std::string user_id;
    std::int64_t at = 0;
};

/// Exam file codec.
Bytes encode_exam_file(const std::vector<Image>& images);
/// Hashes are recomputed from the stored bytes.
std::vector<Image> decode_exam_file(ByteView bytes);

struct VaultOptions {
    std::optional<std::filesystem::path> dir;
    std::uint64_t ttl_seconds = kDefaultTtlSeconds;
    Clock clock = system_clock();
};

class Vault {
public:
    /// reader_peer: the local peer whose committed state backs every check.
    Vault(network::Network& network, std::string reader_peer, VaultOptions options = {});

    /// Verify hashes, persist, anchor through site_admin. Throws
    /// HashMismatchImage(instance_id) before touching disk; AnchorRejected
    /// (after rolling back) when the anchor does not commit.
    contracts::ExamRecord ingest_study(network::Client& site_admin, const std::string& channel_id,
                                       const StudyBlob& study, const StudyInfo& info);

    /// Requires a committed grant for (user, exam). Throws NoGrant or
    /// UnknownExam with no transaction submitted.
    ViewToken issue_view_token(network::Client& user, const std::string& channel_id, const std::string& exam_id);

    /// Throws UnknownToken, ExpiredToken or IntegrityFailure(instance_id).
    std::vector<FetchedImage> fetch_images(const Token& token);

    /// Throws UnknownExam.
    Completeness check_completeness(const std::string& exam_id) const;

    bool has_exam(const std::string& exam_id) const;
    std::optional<std::string> channel_of(const std::string& exam_id) const;
    std::vector<std::string> exam_ids() const;
    std::size_t stored_count(const std::string& exam_id) const;

    /// Token state without the secret, by digest.
    std::optional<ViewToken> token_info(const crypto::Hash& digest) const;
    std::vector<ViewToken> tokens() const;
    std::vector<FetchRecord> fetch_log() const;

    /// Exams whose stored bytes did not match their recorded hashes at load.
    const std::set<std::string>& integrity_issues() const noexcept { return integrity_issues_; }

    /// Overwrite stored bytes of one instance, bypassing every check (fault injection).
    void tamper(const std::string& exam_id, const std::string& instance_id, Bytes pixel_bytes);

    std::uint64_t ttl_seconds() const noexcept { return options_.ttl_seconds; }
    void set_clock(Clock clock);

private:
    struct Study {
        std::string channel_id;
        std::vector<Image> images;
        std::uint32_t protocol_count = 0;
    };

    struct TokenState {
        ViewToken token;
        bool expired = false;
    };

    std::filesystem::path exam_path(const std::string& exam_id) const;
    std::filesystem::path meta_path(const std::string& exam_id) const;
    void persist(const std::string& exam_id, const Study& study) const;
    void erase_files(const std::string& exam_id) const;
    void load();
    std::optional<contracts::ExamRecord> anchored(const std::string& channel_id, const std::string& exam_id) const;
    std::int64_t now() const;

    network::Network& network_;
    std::string reader_peer_;
    VaultOptions options_;

    mutable std::shared_mutex studies_mutex_;
    std::map<std::string, Study> studies_;
    std::mutex ingest_mutex_;
    std::set<std::string> ingesting_;
    std::set<std::string> integrity_issues_;

    mutable std::mutex tokens_mutex_;
    std::map<crypto::Hash, TokenState> tokens_;  // by digest
    std::vector<FetchRecord> fetch_log_;
};

}  // namespace radchain::pacsvault
