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

// Smart contracts: exam anchoring, image access control and critical-results
// notification. Contracts are deterministic functions of (transaction draft,
// world state, membership state). They never touch I/O or clocks; time comes
// from the draft's proposal_time.
//
// World-state keys:
//
//   exam/{channel}/{exam_id}             ExamRecord
//   req/{channel}/{request_id hex}       AccessRequest
//   grant/{channel}/{exam_id}/{user_id}  AccessGrant
//   report/{channel}/{report_id}         RadiologyReport
//   alert/{channel}/{alert_id}           CriticalAlert
//   kwcfg/{channel}                      KeywordConfig
//   access/{channel}/{exam_id}           DataAccessRecord (latest image-link issuance)

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "radchain/codec.hpp"
#include "radchain/crypto.hpp"
#include "radchain/identity.hpp"
#include "radchain/ledger.hpp"

namespace radchain::contracts {

namespace op {
inline constexpr std::string_view kAnchorExam = "anchor_exam";
inline constexpr std::string_view kRequestAccess = "request_access";
inline constexpr std::string_view kEvaluateAccess = "evaluate_access";
inline constexpr std::string_view kRecordDataAccess = "record_data_access";
inline constexpr std::string_view kSubmitReport = "submit_report";
inline constexpr std::string_view kAcknowledgeAlert = "acknowledge_alert";
inline constexpr std::string_view kConfigureKeywords = "configure_keywords";
}  // namespace op

namespace keys {
std::string exam(std::string_view channel, std::string_view exam_id);
std::string request(std::string_view channel, std::string_view request_id_hex);
std::string grant(std::string_view channel, std::string_view exam_id, std::string_view user_id);
std::string grant_prefix(std::string_view channel, std::string_view exam_id);
std::string report(std::string_view channel, std::string_view report_id);
std::string alert(std::string_view channel, std::string_view alert_id);
std::string keyword_config(std::string_view channel);
std::string data_access(std::string_view channel, std::string_view exam_id);
}  // namespace keys

enum class AccessReason : std::uint8_t { Interpretation = 0, PriorComparison = 1, MissingImages = 2 };
enum class AccessStatus : std::uint8_t { Pending = 0, Granted = 1, Denied = 2 };

std::string_view to_string(AccessReason r) noexcept;
std::string_view to_string(AccessStatus s) noexcept;
std::optional<AccessReason> parse_reason(std::string_view s) noexcept;

/// Reasons a role may cite. Radiologists may cite any reason; physicians
/// only PriorComparison (viewing their own patients' studies).
bool role_permits_reason(identity::Role role, AccessReason reason) noexcept;

using ImageHash = crypto::Hash;

struct ExamRecord {
    std::string exam_id;
    std::string org_id;
    std::string modality;
    std::string referring_physician;
    std::vector<ImageHash> image_hashes;
    std::uint32_t image_count = 0;
    std::vector<std::string> prior_exam_ids;
    std::int64_t created_at = 0;

    Bytes encode() const;
    static ExamRecord decode(ByteView bytes);
    bool operator==(const ExamRecord&) const = default;
};

struct AccessRequest {
    crypto::Hash request_id{};
    std::string exam_id;
    std::string requester;
    AccessReason reason = AccessReason::Interpretation;
    AccessStatus status = AccessStatus::Pending;
    std::optional<std::int64_t> decided_at;

    std::string id_hex() const { return crypto::to_hex(request_id); }
    Bytes encode() const;
    static AccessRequest decode(ByteView bytes);
    bool operator==(const AccessRequest&) const = default;
};

struct AccessGrant {
    std::string exam_id;
    std::string user_id;
    crypto::Hash request_id{};
    std::int64_t granted_at = 0;

    Bytes encode() const;
    static AccessGrant decode(ByteView bytes);
    bool operator==(const AccessGrant&) const = default;
};

struct RadiologyReport {
    std::string report_id;
    std::string exam_id;
    std::string author;
    std::string body_text;
    std::string impression_text;
    std::int64_t finalized_at = 0;
    bool is_critical = false;
    std::vector<std::string> matched_keywords;
    std::uint64_t keyword_config_version = 0;

    Bytes encode() const;
    static RadiologyReport decode(ByteView bytes);
    bool operator==(const RadiologyReport&) const = default;
};

struct CriticalAlert {
    std::string alert_id;
    std::string report_id;
    std::string exam_id;
    std::string recipient;
    std::vector<std::string> matched_keywords;
    std::int64_t raised_at = 0;
    bool acknowledged = false;
    std::optional<std::int64_t> acknowledged_at;

    Bytes encode() const;
    static CriticalAlert decode(ByteView bytes);
    bool operator==(const CriticalAlert&) const = default;
};

struct KeywordConfig {
    std::string channel_id;
    std::set<std::string> keywords;
    std::uint64_t version = 0;

    Bytes encode() const;
    static KeywordConfig decode(ByteView bytes);
    bool operator==(const KeywordConfig&) const = default;
};

/// Record of one image-link issuance. The bearer token itself never reaches
/// the ledger; only its SHA-256 digest does.
struct DataAccessRecord {
    std::string exam_id;
    std::string user_id;
    crypto::Hash token_digest{};
    std::int64_t issued_at = 0;
    std::uint64_t ttl_seconds = 0;

    Bytes encode() const;
    static DataAccessRecord decode(ByteView bytes);
    bool operator==(const DataAccessRecord&) const = default;
};

/// Lowercase and trim; throws InvalidKeyword for empty results or characters
/// outside [a-z0-9 -].
std::string normalize_keyword(std::string_view raw);

/// Every configured keyword found case-insensitively as a whole-word
/// occurrence in either text, in ascending keyword order. An occurrence
/// counts when the characters immediately before and after it (if any) are
/// not ASCII letters or digits. Negation is not understood: "no hemorrhage"
/// matches "hemorrhage".
std::vector<std::string> detect_keywords(std::string_view impression_text, std::string_view body_text,
                                         const KeywordConfig& config);

crypto::Hash make_request_id(std::string_view exam_id, std::string_view requester, std::int64_t proposal_time,
                             ByteView nonce);
std::string make_report_id(std::string_view exam_id, std::string_view author, std::int64_t proposal_time,
                           ByteView nonce);
std::string make_alert_id(std::string_view report_id);

// ---------------------------------------------------------------------------
// Draft builders: the args layout of each operation.
// ---------------------------------------------------------------------------

struct Draft {
    ledger::ContractKind contract;
    std::string operation;
    std::vector<Bytes> args;
};

using Nonce = std::array<std::uint8_t, 8>;

Draft anchor_exam(const ExamRecord& record);
Draft request_access(std::string_view exam_id, AccessReason reason, const Nonce& nonce);
Draft evaluate_access(const crypto::Hash& request_id);
Draft record_data_access(std::string_view exam_id, const crypto::Hash& token_digest, std::uint64_t ttl_seconds);
Draft submit_report(std::string_view exam_id, std::string_view body_text, std::string_view impression_text,
                    const Nonce& nonce);
Draft acknowledge_alert(std::string_view alert_id);
Draft configure_keywords(const std::vector<std::string>& keywords);

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct Execution {
    std::vector<ledger::ReadEntry> reads;
    std::vector<ledger::WriteEntry> writes;
    Bytes response;

    bool operator==(const Execution&) const = default;
};

/// Simulate the draft against a state snapshot. Throws radchain::Error with
/// the operation's error code when the contract rejects the call.
Execution execute(const ledger::Transaction& draft, const ledger::WorldState& state,
                  const identity::Directory& directory);

/// Actions of which the creator's role must permit at least one.
std::vector<identity::Action> required_actions(const ledger::Transaction& tx);

/// Response payload of submit_report.
struct ReportOutcome {
    RadiologyReport report;
    std::optional<CriticalAlert> alert;

    Bytes encode() const;
    static ReportOutcome decode(ByteView bytes);
};

}  // namespace radchain::contracts
