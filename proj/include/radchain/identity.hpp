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

// Certificate authority and membership service.
//
// The directory is a view over the world state of the system channel:
// every registration, revocation, organisation and channel membership is a
// committed transaction there, and the in-memory maps are rebuilt from that
// state on open.
//
// Role-action matrix (authorize() is driven by this table and nothing else):
//
//   role          | permitted actions
//   --------------+----------------------------------------------------
//   Radiologist   | RequestAccess, ViewImages, SubmitReport
//   Physician     | ViewImages (own patients' exams), AckAlert, ReceiveAlert
//   SiteAdmin     | IngestStudy, ConfigureKeywords
//   SupportStaff  | ReadAudit
//   CaAdmin       | Register, Revoke

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "radchain/clock.hpp"
#include "radchain/codec.hpp"
#include "radchain/crypto.hpp"
#include "radchain/ledger.hpp"

namespace radchain::identity {

enum class Role : std::uint8_t { Radiologist = 0, Physician = 1, SupportStaff = 2, SiteAdmin = 3, CaAdmin = 4 };

enum class Action : std::uint8_t {
    RequestAccess,
    ViewImages,
    SubmitReport,
    AckAlert,
    ReceiveAlert,
    IngestStudy,
    ConfigureKeywords,
    ReadAudit,
    Register,
    Revoke,
};

inline constexpr Action kAllActions[] = {
    Action::RequestAccess, Action::ViewImages,        Action::SubmitReport, Action::AckAlert, Action::ReceiveAlert,
    Action::IngestStudy,   Action::ConfigureKeywords, Action::ReadAudit,    Action::Register, Action::Revoke,
};
inline constexpr Role kAllRoles[] = {Role::Radiologist, Role::Physician, Role::SupportStaff, Role::SiteAdmin,
                                     Role::CaAdmin};

enum class DenyReason : std::uint8_t { UnknownUser, Revoked, NotInChannel, RoleForbidden };

std::string_view to_string(Role role) noexcept;
std::string_view to_string(Action action) noexcept;
std::string_view to_string(DenyReason reason) noexcept;
std::optional<Role> parse_role(std::string_view name) noexcept;

/// The role-action matrix.
bool role_allows(Role role, Action action) noexcept;

/// Channel that carries identity transactions. Every organisation is a member.
inline constexpr std::string_view kSystemChannel = "system";
/// Creator id of transactions signed directly with the CA root key.
inline constexpr std::string_view kCaRootId = "ca-root";

struct EnrollmentCertificate {
    std::string user_id;
    std::string org_id;
    Role role = Role::Radiologist;
    crypto::PublicKey public_key{};
    std::int64_t issued_at = 0;
    bool revoked = false;
    crypto::Signature ca_signature{};

    /// Canonical encoding of every field before ca_signature.
    Bytes signing_preimage() const;
    Bytes encode() const;
    static EnrollmentCertificate decode(ByteView bytes);
    bool verify(const crypto::PublicKey& ca_root) const;

    bool operator==(const EnrollmentCertificate&) const = default;
};

class Decision {
public:
    static Decision permit() { return Decision(); }
    static Decision deny(DenyReason reason) { return Decision(reason); }

    bool permitted() const noexcept { return !reason_; }
    explicit operator bool() const noexcept { return permitted(); }
    /// Only meaningful when denied.
    DenyReason reason() const noexcept { return reason_.value_or(DenyReason::UnknownUser); }

    bool operator==(const Decision&) const = default;

private:
    Decision() = default;
    explicit Decision(DenyReason r) : reason_(r) {}
    std::optional<DenyReason> reason_;
};

/// Actions of which at least one must be permitted for a transaction's
/// creator. Supplied by the contract layer.
using ActionResolver = std::function<std::vector<Action>(const ledger::Transaction&)>;

/// Next block height per channel at the moment of a revocation. Transactions
/// at or above that height on that channel are rejected for the revoked key.
using HeightProvider = std::function<std::map<std::string, std::uint64_t>()>;

class Directory final : public ledger::TxVerifier {
public:
    explicit Directory(crypto::KeyPair ca_root, Clock clock = system_clock(), ledger::LedgerOptions system_ledger = {});
    /// Read-only replica: follows another directory's system channel through
    /// commit_system_block. Every signing operation throws Unauthorized.
    explicit Directory(const crypto::PublicKey& ca_root, ledger::LedgerOptions system_ledger = {});

    const crypto::PublicKey& root_key() const noexcept { return ca_public_; }
    bool is_replica() const noexcept { return !ca_root_; }

    /// Replica path. Throws GapDetected or HashMismatch like Ledger::commit_block.
    void commit_system_block(const ledger::Block& block);

    // Bootstrap operations, signed by the CA root itself.
    void add_organization(const std::string& org_id);
    EnrollmentCertificate bootstrap_admin(const std::string& user_id, const std::string& org_id,
                                          const crypto::PublicKey& key);
    void add_channel(const std::string& channel_id, const std::set<std::string>& member_orgs);

    /// admin_signature must be a CaAdmin's signature over register_request(...).
    EnrollmentCertificate register_user(const crypto::Signature& admin_signature, const std::string& user_id,
                                        const std::string& org_id, Role role, const crypto::PublicKey& key);
    /// admin_signature must be a CaAdmin's signature over revoke_request(user_id).
    EnrollmentCertificate revoke(const crypto::Signature& admin_signature, const std::string& user_id);

    static Bytes register_request(const std::string& user_id, const std::string& org_id, Role role,
                                  const crypto::PublicKey& key);
    static Bytes revoke_request(const std::string& user_id);

    Decision authorize(const std::string& user_id, Action action, const std::string& channel_id) const;
    /// As authorize, but a revoked key remains usable on the channel below
    /// the height recorded at revocation time.
    Decision authorize_at(const std::string& user_id, Action action, const std::string& channel_id,
                          std::uint64_t height) const;
    /// Like authorize without the role check.
    Decision check_membership(const std::string& user_id, const std::string& channel_id) const;

    bool verify_signature(ByteView message, const crypto::Signature& signature, const std::string& user_id) const;
    /// True if some unrevoked CaAdmin signed message.
    bool admin_signed(ByteView message, const crypto::Signature& signature) const;

    std::optional<EnrollmentCertificate> certificate(const std::string& user_id) const;
    std::vector<EnrollmentCertificate> certificates() const;
    bool has_organization(const std::string& org_id) const;
    std::set<std::string> organizations() const;
    std::set<std::string> channels_of(const std::string& org_id) const;
    std::set<std::string> members_of(const std::string& channel_id) const;
    bool channel_exists(const std::string& channel_id) const;

    void set_action_resolver(ActionResolver resolver);
    void set_height_provider(HeightProvider provider);

    ledger::Validity verify(const ledger::Transaction& tx, std::uint64_t height) const override;

    const ledger::Ledger& system_ledger() const noexcept { return system_ledger_; }

private:
    void commit_identity_tx(std::string operation, std::vector<Bytes> args, std::vector<ledger::ReadEntry> reads,
                            std::vector<ledger::WriteEntry> writes);
    void reload_from_state();
    Decision authorize_locked(const std::string& user_id, std::optional<Action> action, const std::string& channel_id,
                              std::optional<std::uint64_t> height) const;

    const crypto::KeyPair& signer() const;

    std::optional<crypto::KeyPair> ca_root_;
    crypto::PublicKey ca_public_{};
    Clock clock_;
    ledger::Ledger system_ledger_;
    ActionResolver resolver_;
    HeightProvider heights_;

    mutable std::shared_mutex mutex_;
    std::mutex write_mutex_;
    std::map<std::string, EnrollmentCertificate> certs_;
    std::map<std::string, std::set<std::string>> org_channels_;
    std::map<std::string, std::map<std::string, std::uint64_t>> revocation_cutoffs_;
};

}  // namespace radchain::identity
