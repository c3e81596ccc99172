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

#include "radchain/identity.hpp"

#include <algorithm>

namespace radchain::identity {

std::string_view to_string(Role role) noexcept {
    switch (role) {
        case Role::Radiologist: return "Radiologist";
        case Role::Physician: return "Physician";
        case Role::SupportStaff: return "SupportStaff";
        case Role::SiteAdmin: return "SiteAdmin";
        case Role::CaAdmin: return "CaAdmin";
    }
    return "?";
}

std::string_view to_string(Action action) noexcept {
    switch (action) {
        case Action::RequestAccess: return "RequestAccess";
        case Action::ViewImages: return "ViewImages";
        case Action::SubmitReport: return "SubmitReport";
        case Action::AckAlert: return "AckAlert";
        case Action::ReceiveAlert: return "ReceiveAlert";
        case Action::IngestStudy: return "IngestStudy";
        case Action::ConfigureKeywords: return "ConfigureKeywords";
        case Action::ReadAudit: return "ReadAudit";
        case Action::Register: return "Register";
        case Action::Revoke: return "Revoke";
    }
    return "?";
}

std::string_view to_string(DenyReason reason) noexcept {
    switch (reason) {
        case DenyReason::UnknownUser: return "UnknownUser";
        case DenyReason::Revoked: return "Revoked";
        case DenyReason::NotInChannel: return "NotInChannel";
        case DenyReason::RoleForbidden: return "RoleForbidden";
    }
    return "?";
}

std::optional<Role> parse_role(std::string_view name) noexcept {
    for (auto r : kAllRoles)
        if (to_string(r) == name) return r;
    return std::nullopt;
}

bool role_allows(Role role, Action action) noexcept {
    switch (role) {
        case Role::Radiologist:
            return action == Action::RequestAccess || action == Action::ViewImages || action == Action::SubmitReport;
        case Role::Physician:
            return action == Action::ViewImages || action == Action::AckAlert || action == Action::ReceiveAlert;
        case Role::SiteAdmin:
            return action == Action::IngestStudy || action == Action::ConfigureKeywords;
        case Role::SupportStaff:
            return action == Action::ReadAudit;
        case Role::CaAdmin:
            return action == Action::Register || action == Action::Revoke;
    }
    return false;
}

// ---------------------------------------------------------------------------
// EnrollmentCertificate
// ---------------------------------------------------------------------------

Bytes EnrollmentCertificate::signing_preimage() const {
    Encoder enc;
    enc.str(user_id).str(org_id).u8(static_cast<std::uint8_t>(role)).raw(public_key).i64(issued_at).boolean(revoked);
    return std::move(enc).bytes();
}

Bytes EnrollmentCertificate::encode() const {
    Encoder enc;
    enc.raw(signing_preimage()).raw(ca_signature);
    return std::move(enc).bytes();
}

EnrollmentCertificate EnrollmentCertificate::decode(ByteView bytes) {
    Decoder dec(bytes);
    EnrollmentCertificate c;
    c.user_id = dec.str();
    c.org_id = dec.str();
    auto role = dec.u8();
    if (role > static_cast<std::uint8_t>(Role::CaAdmin)) throw Error(ErrorCode::MalformedEncoding, "role");
    c.role = static_cast<Role>(role);
    c.public_key = dec.fixed<32>();
    c.issued_at = dec.i64();
    c.revoked = dec.boolean();
    c.ca_signature = dec.fixed<64>();
    dec.expect_done();
    return c;
}

bool EnrollmentCertificate::verify(const crypto::PublicKey& ca_root) const {
    return crypto::verify(ca_root, signing_preimage(), ca_signature);
}

// ---------------------------------------------------------------------------
// Directory
// ---------------------------------------------------------------------------

namespace {

const std::string kCertPrefix = "cert/";
const std::string kOrgPrefix = "org/";
const std::string kChannelPrefix = "chan/";
const std::string kCutoffPrefix = "revcut/";

Bytes encode_string_set(const std::set<std::string>& values) {
    Encoder enc;
    enc.count(values.size());
    for (const auto& v : values) enc.str(v);
    return std::move(enc).bytes();
}

std::set<std::string> decode_string_set(ByteView bytes) {
    Decoder dec(bytes);
    std::set<std::string> out;
    auto n = dec.count(4);
    for (std::size_t i = 0; i < n; ++i) out.insert(dec.str());
    dec.expect_done();
    return out;
}

Bytes encode_cutoffs(const std::map<std::string, std::uint64_t>& cutoffs) {
    Encoder enc;
    enc.count(cutoffs.size());
    for (const auto& [ch, h] : cutoffs) enc.str(ch).u64(h);
    return std::move(enc).bytes();
}

std::map<std::string, std::uint64_t> decode_cutoffs(ByteView bytes) {
    Decoder dec(bytes);
    std::map<std::string, std::uint64_t> out;
    auto n = dec.count(12);
    for (std::size_t i = 0; i < n; ++i) {
        auto ch = dec.str();
        out[ch] = dec.u64();
    }
    dec.expect_done();
    return out;
}

std::optional<ledger::Version> version_of(const ledger::Ledger& l, const std::string& key) {
    if (auto e = l.query_state(key)) return e->version;
    return std::nullopt;
}

}  // namespace

Directory::Directory(crypto::KeyPair ca_root, Clock clock, ledger::LedgerOptions system_ledger)
    : ca_root_(std::move(ca_root)),
      ca_public_(ca_root_->public_key()),
      clock_(std::move(clock)),
      system_ledger_(std::string(kSystemChannel), *this, std::move(system_ledger)) {
    reload_from_state();
}

Directory::Directory(const crypto::PublicKey& ca_root, ledger::LedgerOptions system_ledger)
    : ca_public_(ca_root),
      clock_(system_clock()),
      system_ledger_(std::string(kSystemChannel), *this, std::move(system_ledger)) {
    reload_from_state();
}

const crypto::KeyPair& Directory::signer() const {
    if (!ca_root_) throw Error(ErrorCode::Unauthorized, "replica directory holds no CA key");
    return *ca_root_;
}

void Directory::commit_system_block(const ledger::Block& block) {
    std::lock_guard write(write_mutex_);
    system_ledger_.commit_block(block);
    reload_from_state();
}

Bytes Directory::register_request(const std::string& user_id, const std::string& org_id, Role role,
                                  const crypto::PublicKey& key) {
    Encoder enc;
    enc.str("register").str(user_id).str(org_id).u8(static_cast<std::uint8_t>(role)).raw(key);
    return std::move(enc).bytes();
}

Bytes Directory::revoke_request(const std::string& user_id) {
    Encoder enc;
    enc.str("revoke").str(user_id);
    return std::move(enc).bytes();
}

void Directory::commit_identity_tx(std::string operation, std::vector<Bytes> args,
                                   std::vector<ledger::ReadEntry> reads, std::vector<ledger::WriteEntry> writes) {
    ledger::Transaction tx;
    tx.channel_id = std::string(kSystemChannel);
    tx.contract = ledger::ContractKind::Identity;
    tx.operation = std::move(operation);
    tx.args = std::move(args);
    tx.creator = std::string(kCaRootId);
    tx.read_set = std::move(reads);
    tx.write_set = std::move(writes);
    tx.proposal_time = clock_();
    tx.seal(signer());
    auto block = system_ledger_.append_block({tx});
    if (block.validity_flags.front() != ledger::Validity::Valid)
        throw Error(ErrorCode::PersistenceFailure,
                    "identity transaction flagged " + std::string(ledger::to_string(block.validity_flags.front())));
    reload_from_state();
}

void Directory::reload_from_state() {
    std::map<std::string, EnrollmentCertificate> certs;
    std::map<std::string, std::set<std::string>> orgs;
    std::map<std::string, std::map<std::string, std::uint64_t>> cutoffs;
    for (auto& [key, entry] : system_ledger_.scan(kCertPrefix))
        certs.emplace(key.substr(kCertPrefix.size()), EnrollmentCertificate::decode(entry.value));
    for (auto& [key, entry] : system_ledger_.scan(kOrgPrefix))
        orgs.emplace(key.substr(kOrgPrefix.size()), decode_string_set(entry.value));
    for (auto& [key, entry] : system_ledger_.scan(kCutoffPrefix))
        cutoffs.emplace(key.substr(kCutoffPrefix.size()), decode_cutoffs(entry.value));
    std::unique_lock lock(mutex_);
    certs_ = std::move(certs);
    org_channels_ = std::move(orgs);
    revocation_cutoffs_ = std::move(cutoffs);
}

void Directory::add_organization(const std::string& org_id) {
    std::lock_guard write(write_mutex_);
    if (has_organization(org_id)) return;
    const auto key = kOrgPrefix + org_id;
    commit_identity_tx("add_org", {to_bytes(org_id)}, {{key, std::nullopt}},
                       {{key, encode_string_set({std::string(kSystemChannel)})}});
}

EnrollmentCertificate Directory::bootstrap_admin(const std::string& user_id, const std::string& org_id,
                                                 const crypto::PublicKey& key) {
    std::lock_guard write(write_mutex_);
    if (!has_organization(org_id)) throw Error(ErrorCode::UnknownOrganization, org_id);
    if (certificate(user_id)) throw Error(ErrorCode::DuplicateUserId, user_id);
    EnrollmentCertificate cert{user_id, org_id, Role::CaAdmin, key, clock_(), false, {}};
    cert.ca_signature = signer().sign(cert.signing_preimage());
    const auto cert_key = kCertPrefix + user_id;
    commit_identity_tx("bootstrap_admin", {cert.encode()}, {{cert_key, std::nullopt}}, {{cert_key, cert.encode()}});
    return cert;
}

void Directory::add_channel(const std::string& channel_id, const std::set<std::string>& member_orgs) {
    std::lock_guard write(write_mutex_);
    std::vector<ledger::ReadEntry> reads;
    std::vector<ledger::WriteEntry> writes;
    const auto chan_key = kChannelPrefix + channel_id;
    reads.push_back({chan_key, version_of(system_ledger_, chan_key)});
    writes.push_back({chan_key, encode_string_set(member_orgs)});
    for (const auto& org : member_orgs) {
        const auto key = kOrgPrefix + org;
        auto channels = channels_of(org);
        channels.insert(channel_id);
        reads.push_back({key, version_of(system_ledger_, key)});
        writes.push_back({key, encode_string_set(channels)});
    }
    commit_identity_tx("add_channel", {to_bytes(channel_id), encode_string_set(member_orgs)}, std::move(reads),
                       std::move(writes));
}

bool Directory::admin_signed(ByteView message, const crypto::Signature& signature) const {
    std::shared_lock lock(mutex_);
    return std::any_of(certs_.begin(), certs_.end(), [&](const auto& kv) {
        const auto& c = kv.second;
        return c.role == Role::CaAdmin && !c.revoked && crypto::verify(c.public_key, message, signature);
    });
}

EnrollmentCertificate Directory::register_user(const crypto::Signature& admin_signature, const std::string& user_id,
                                               const std::string& org_id, Role role, const crypto::PublicKey& key) {
    std::lock_guard write(write_mutex_);
    if (!admin_signed(register_request(user_id, org_id, role, key), admin_signature))
        throw Error(ErrorCode::InvalidAdminSignature);
    if (!has_organization(org_id)) throw Error(ErrorCode::UnknownOrganization, org_id);
    if (certificate(user_id) || user_id == kCaRootId) throw Error(ErrorCode::DuplicateUserId, user_id);
    EnrollmentCertificate cert{user_id, org_id, role, key, clock_(), false, {}};
    cert.ca_signature = signer().sign(cert.signing_preimage());
    const auto cert_key = kCertPrefix + user_id;
    commit_identity_tx("register", {cert.encode(), Bytes(admin_signature.begin(), admin_signature.end())},
                       {{cert_key, std::nullopt}}, {{cert_key, cert.encode()}});
    return cert;
}

EnrollmentCertificate Directory::revoke(const crypto::Signature& admin_signature, const std::string& user_id) {
    std::lock_guard write(write_mutex_);
    if (!admin_signed(revoke_request(user_id), admin_signature)) throw Error(ErrorCode::InvalidAdminSignature);
    auto cert = certificate(user_id);
    if (!cert) throw Error(ErrorCode::UnknownUser, user_id);
    cert->revoked = true;
    cert->ca_signature = signer().sign(cert->signing_preimage());
    auto cutoffs = heights_ ? heights_() : std::map<std::string, std::uint64_t>{};
    const auto cert_key = kCertPrefix + user_id;
    const auto cut_key = kCutoffPrefix + user_id;
    commit_identity_tx("revoke", {to_bytes(user_id), Bytes(admin_signature.begin(), admin_signature.end())},
                       {{cert_key, version_of(system_ledger_, cert_key)}, {cut_key, version_of(system_ledger_, cut_key)}},
                       {{cert_key, cert->encode()}, {cut_key, encode_cutoffs(cutoffs)}});
    return *cert;
}

Decision Directory::authorize_locked(const std::string& user_id, std::optional<Action> action,
                                     const std::string& channel_id, std::optional<std::uint64_t> height) const {
    auto it = certs_.find(user_id);
    if (it == certs_.end()) return Decision::deny(DenyReason::UnknownUser);
    const auto& cert = it->second;
    if (cert.revoked) {
        bool still_usable = false;
        if (height) {
            auto cuts = revocation_cutoffs_.find(user_id);
            if (cuts != revocation_cutoffs_.end()) {
                auto ch = cuts->second.find(channel_id);
                still_usable = ch != cuts->second.end() && *height < ch->second;
            }
        }
        if (!still_usable) return Decision::deny(DenyReason::Revoked);
    }
    auto org = org_channels_.find(cert.org_id);
    if (org == org_channels_.end() || !org->second.contains(channel_id))
        return Decision::deny(DenyReason::NotInChannel);
    if (action && !role_allows(cert.role, *action)) return Decision::deny(DenyReason::RoleForbidden);
    return Decision::permit();
}

Decision Directory::authorize(const std::string& user_id, Action action, const std::string& channel_id) const {
    std::shared_lock lock(mutex_);
    return authorize_locked(user_id, action, channel_id, std::nullopt);
}

Decision Directory::authorize_at(const std::string& user_id, Action action, const std::string& channel_id,
                                 std::uint64_t height) const {
    std::shared_lock lock(mutex_);
    return authorize_locked(user_id, action, channel_id, height);
}

Decision Directory::check_membership(const std::string& user_id, const std::string& channel_id) const {
    std::shared_lock lock(mutex_);
    return authorize_locked(user_id, std::nullopt, channel_id, std::nullopt);
}

bool Directory::verify_signature(ByteView message, const crypto::Signature& signature,
                                 const std::string& user_id) const {
    std::shared_lock lock(mutex_);
    auto it = certs_.find(user_id);
    if (it == certs_.end() || it->second.revoked) return false;
    return crypto::verify(it->second.public_key, message, signature);
}

std::optional<EnrollmentCertificate> Directory::certificate(const std::string& user_id) const {
    std::shared_lock lock(mutex_);
    auto it = certs_.find(user_id);
    if (it == certs_.end()) return std::nullopt;
    return it->second;
}

std::vector<EnrollmentCertificate> Directory::certificates() const {
    std::shared_lock lock(mutex_);
    std::vector<EnrollmentCertificate> out;
    for (const auto& [_, c] : certs_) out.push_back(c);
    return out;
}

bool Directory::has_organization(const std::string& org_id) const {
    std::shared_lock lock(mutex_);
    return org_channels_.contains(org_id);
}

std::set<std::string> Directory::organizations() const {
    std::shared_lock lock(mutex_);
    std::set<std::string> out;
    for (const auto& [org, _] : org_channels_) out.insert(org);
    return out;
}

std::set<std::string> Directory::channels_of(const std::string& org_id) const {
    std::shared_lock lock(mutex_);
    auto it = org_channels_.find(org_id);
    return it == org_channels_.end() ? std::set<std::string>{} : it->second;
}

std::set<std::string> Directory::members_of(const std::string& channel_id) const {
    std::shared_lock lock(mutex_);
    std::set<std::string> out;
    for (const auto& [org, channels] : org_channels_)
        if (channels.contains(channel_id)) out.insert(org);
    return out;
}

bool Directory::channel_exists(const std::string& channel_id) const {
    return channel_id == kSystemChannel || system_ledger_.query_state(kChannelPrefix + channel_id).has_value();
}

void Directory::set_action_resolver(ActionResolver resolver) {
    std::unique_lock lock(mutex_);
    resolver_ = std::move(resolver);
}

void Directory::set_height_provider(HeightProvider provider) {
    std::lock_guard write(write_mutex_);
    heights_ = std::move(provider);
}

ledger::Validity Directory::verify(const ledger::Transaction& tx, std::uint64_t height) const {
    auto preimage = tx.signing_preimage();
    if (crypto::sha256(preimage) != tx.tx_id) return ledger::Validity::BadSignature;

    if (tx.creator == kCaRootId) {
        if (!crypto::verify(ca_public_, preimage, tx.creator_signature))
            return ledger::Validity::BadSignature;
        return tx.channel_id == kSystemChannel && tx.contract == ledger::ContractKind::Identity
                   ? ledger::Validity::Valid
                   : ledger::Validity::Unauthorized;
    }

    std::shared_lock lock(mutex_);
    auto it = certs_.find(tx.creator);
    if (it == certs_.end()) return ledger::Validity::BadSignature;
    if (!crypto::verify(it->second.public_key, preimage, tx.creator_signature)) return ledger::Validity::BadSignature;

    if (!authorize_locked(tx.creator, std::nullopt, tx.channel_id, height)) return ledger::Validity::Unauthorized;
    if (resolver_) {
        auto actions = resolver_(tx);
        bool any = std::any_of(actions.begin(), actions.end(),
                               [&](Action a) { return role_allows(it->second.role, a); });
        if (!any) return ledger::Validity::Unauthorized;
    }
    return ledger::Validity::Valid;
}

}  // namespace radchain::identity
