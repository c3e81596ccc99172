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

#include "radchain/error.hpp"

namespace radchain {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedEncoding: return "MalformedEncoding";
        case ErrorCode::CorruptBlockFile: return "CorruptBlockFile";
        case ErrorCode::PersistenceFailure: return "PersistenceFailure";
        case ErrorCode::DuplicateUserId: return "DuplicateUserId";
        case ErrorCode::InvalidAdminSignature: return "InvalidAdminSignature";
        case ErrorCode::UnknownOrganization: return "UnknownOrganization";
        case ErrorCode::UnknownUser: return "UnknownUser";
        case ErrorCode::EmptyBatch: return "EmptyBatch";
        case ErrorCode::UnknownChannel: return "UnknownChannel";
        case ErrorCode::Unauthorized: return "Unauthorized";
        case ErrorCode::DuplicateExam: return "DuplicateExam";
        case ErrorCode::EmptyImageSet: return "EmptyImageSet";
        case ErrorCode::UnknownExam: return "UnknownExam";
        case ErrorCode::UnknownRequest: return "UnknownRequest";
        case ErrorCode::AlreadyDecided: return "AlreadyDecided";
        case ErrorCode::NoAccessGrant: return "NoAccessGrant";
        case ErrorCode::AlreadyAcknowledged: return "AlreadyAcknowledged";
        case ErrorCode::UnknownAlert: return "UnknownAlert";
        case ErrorCode::InvalidKeyword: return "InvalidKeyword";
        case ErrorCode::ContractError: return "ContractError";
        case ErrorCode::DuplicateChannel: return "DuplicateChannel";
        case ErrorCode::UnknownOrg: return "UnknownOrg";
        case ErrorCode::BadThreshold: return "BadThreshold";
        case ErrorCode::BadSignature: return "BadSignature";
        case ErrorCode::NotJoined: return "NotJoined";
        case ErrorCode::InsufficientEndorsements: return "InsufficientEndorsements";
        case ErrorCode::MismatchedWriteSets: return "MismatchedWriteSets";
        case ErrorCode::Backpressure: return "Backpressure";
        case ErrorCode::GapDetected: return "GapDetected";
        case ErrorCode::HashMismatch: return "HashMismatch";
        case ErrorCode::TransactionInvalidated: return "TransactionInvalidated";
        case ErrorCode::HashMismatchImage: return "HashMismatch";
        case ErrorCode::AnchorRejected: return "AnchorRejected";
        case ErrorCode::NoGrant: return "NoGrant";
        case ErrorCode::UnknownToken: return "UnknownToken";
        case ErrorCode::ExpiredToken: return "ExpiredToken";
        case ErrorCode::IntegrityFailure: return "IntegrityFailure";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::ConfigMismatch: return "ConfigMismatch";
        case ErrorCode::BindFailure: return "BindFailure";
        case ErrorCode::NetworkUnreachable: return "NetworkUnreachable";
        case ErrorCode::Forbidden: return "Forbidden";
        case ErrorCode::BadRequest: return "BadRequest";
    }
    return "Unknown";
}

std::optional<ErrorCode> parse_error_code(std::string_view name) noexcept {
    for (unsigned v = 0; v <= static_cast<unsigned>(ErrorCode::BadRequest); ++v) {
        auto code = static_cast<ErrorCode>(v);
        if (to_string(code) == name) return code;
    }
    return std::nullopt;
}

}  // namespace radchain
