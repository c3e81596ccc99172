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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace radchain {

/// Every failure the library reports. Each module raises a subset.
enum class ErrorCode : std::uint8_t {
    // codec / storage
    MalformedEncoding,
    CorruptBlockFile,
    PersistenceFailure,
    // identity
    DuplicateUserId,
    InvalidAdminSignature,
    UnknownOrganization,
    UnknownUser,
    // ledger
    EmptyBatch,
    UnknownChannel,
    // contracts
    Unauthorized,
    DuplicateExam,
    EmptyImageSet,
    UnknownExam,
    UnknownRequest,
    AlreadyDecided,
    NoAccessGrant,
    AlreadyAcknowledged,
    UnknownAlert,
    InvalidKeyword,
    ContractError,
    // network
    DuplicateChannel,
    UnknownOrg,
    BadThreshold,
    BadSignature,
    NotJoined,
    InsufficientEndorsements,
    MismatchedWriteSets,
    Backpressure,
    GapDetected,
    HashMismatch,
    TransactionInvalidated,
    // pacsvault
    HashMismatchImage,
    AnchorRejected,
    NoGrant,
    UnknownToken,
    ExpiredToken,
    IntegrityFailure,
    // worksim
    InvalidConfig,
    ConfigMismatch,
    // gateway
    BindFailure,
    NetworkUnreachable,
    Forbidden,
    BadRequest,
};

std::string_view to_string(ErrorCode code) noexcept;
std::optional<ErrorCode> parse_error_code(std::string_view name) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string detail = {})
        : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
          code_(code),
          detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace radchain
