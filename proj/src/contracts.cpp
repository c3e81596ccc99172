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

#include "radchain/contracts.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace radchain::contracts {

using identity::Action;
using identity::Role;
using ledger::ContractKind;

// ---------------------------------------------------------------------------
// Keys
// ---------------------------------------------------------------------------

namespace keys {

std::string exam(std::string_view channel, std::string_view exam_id) {
    return "exam/" + std::string(channel) + "/" + std::string(exam_id);
}
std::string request(std::string_view channel, std::string_view request_id_hex) {
    return "req/" + std::string(channel) + "/" + std::string(request_id_hex);
}
std::string grant(std::string_view channel, std::string_view exam_id, std::string_view user_id) {
    return grant_prefix(channel, exam_id) + std::string(user_id);
}
std::string grant_prefix(std::string_view channel, std::string_view exam_id) {
    return "grant/" + std::string(channel) + "/" + std::string(exam_id) + "/";
}
std::string report(std::string_view channel, std::string_view report_id) {
    return "report/" + std::string(channel) + "/" + std::string(report_id);
}
std::string alert(std::string_view channel, std::string_view alert_id) {
    return "alert/" + std::string(channel) + "/" + std::string(alert_id);
}
std::string keyword_config(std::string_view channel) { return "kwcfg/" + std::string(channel); }
std::string data_access(std::string_view channel, std::string_view exam_id) {
    return "access/" + std::string(channel) + "/" + std::string(exam_id);
}

}  // namespace keys

std::string_view to_string(AccessReason r) noexcept {
    switch (r) {
        case AccessReason::Interpretation: return "Interpretation";
        case AccessReason::PriorComparison: return "PriorComparison";
        case AccessReason::MissingImages: return "MissingImages";
    }
    return "?";
}

std::string_view to_string(AccessStatus s) noexcept {
    switch (s) {
        case AccessStatus::Pending: return "Pending";
        case AccessStatus::Granted: return "Granted";
        case AccessStatus::Denied: return "Denied";
    }
    return "?";
}

std::optional<AccessReason> parse_reason(std::string_view s) noexcept {
    for (auto r : {AccessReason::Interpretation, AccessReason::PriorComparison, AccessReason::MissingImages})
        if (to_string(r) == s) return r;
    return std::nullopt;
}

bool role_permits_reason(Role role, AccessReason reason) noexcept {
    if (role == Role::Radiologist) return true;
    if (role == Role::Physician) return reason == AccessReason::PriorComparison;
    return false;
}

// ---------------------------------------------------------------------------
// Encodings
// ---------------------------------------------------------------------------

namespace {

void put_optional_time(Encoder& enc, const std::optional<std::int64_t>& t) {
    enc.boolean(t.has_value());
    if (t) enc.i64(*t);
}

std::optional<std::int64_t> get_optional_time(Decoder& dec) {
    if (!dec.boolean()) return std::nullopt;
    return dec.i64();
}

void put_strings(Encoder& enc, const std::vector<std::string>& v) {
    enc.count(v.size());
    for (const auto& s : v) enc.str(s);
}

std::vector<std::string> get_strings(Decoder& dec) {
    std::vector<std::string> v(dec.count(4));
    for (auto& s : v) s = dec.str();
    return v;
}

template <typename E>
E get_enum(Decoder& dec, E max) {
    auto v = dec.u8();
    if (v > static_cast<std::uint8_t>(max)) throw Error(ErrorCode::MalformedEncoding, "enum out of range");
    return static_cast<E>(v);
}

}  // namespace

Bytes ExamRecord::encode() const {
    Encoder enc;
    enc.str(exam_id).str(org_id).str(modality).str(referring_physician);
    enc.count(image_hashes.size());
    for (const auto& h : image_hashes) enc.raw(h);
    enc.u32(image_count);
    put_strings(enc, prior_exam_ids);
    enc.i64(created_at);
    return std::move(enc).bytes();
}

ExamRecord ExamRecord::decode(ByteView bytes) {
    Decoder dec(bytes);
    ExamRecord r;
    r.exam_id = dec.str();
    r.org_id = dec.str();
    r.modality = dec.str();
    r.referring_physician = dec.str();
    r.image_hashes.resize(dec.count(32));
    for (auto& h : r.image_hashes) h = dec.fixed<32>();
    r.image_count = dec.u32();
    r.prior_exam_ids = get_strings(dec);
    r.created_at = dec.i64();
    dec.expect_done();
    return r;
}

Bytes AccessRequest::encode() const {
    Encoder enc;
    enc.raw(request_id).str(exam_id).str(requester).u8(static_cast<std::uint8_t>(reason));
    enc.u8(static_cast<std::uint8_t>(status));
    put_optional_time(enc, decided_at);
    return std::move(enc).bytes();
}

AccessRequest AccessRequest::decode(ByteView bytes) {
    Decoder dec(bytes);
    AccessRequest r;
    r.request_id = dec.fixed<32>();
    r.exam_id = dec.str();
    r.requester = dec.str();
    r.reason = get_enum(dec, AccessReason::MissingImages);
    r.status = get_enum(dec, AccessStatus::Denied);
    r.decided_at = get_optional_time(dec);
    dec.expect_done();
    return r;
}

Bytes AccessGrant::encode() const {
    Encoder enc;
    enc.str(exam_id).str(user_id).raw(request_id).i64(granted_at);
    return std::move(enc).bytes();
}

AccessGrant AccessGrant::decode(ByteView bytes) {
    Decoder dec(bytes);
    AccessGrant g;
    g.exam_id = dec.str();
    g.user_id = dec.str();
    g.request_id = dec.fixed<32>();
    g.granted_at = dec.i64();
    dec.expect_done();
    return g;
}

Bytes RadiologyReport::encode() const {
    Encoder enc;
    enc.str(report_id).str(exam_id).str(author).str(body_text).str(impression_text).i64(finalized_at);
    enc.boolean(is_critical);
    put_strings(enc, matched_keywords);
    enc.u64(keyword_config_version);
    return std::move(enc).bytes();
}

RadiologyReport RadiologyReport::decode(ByteView bytes) {
    Decoder dec(bytes);
    RadiologyReport r;
    r.report_id = dec.str();
    r.exam_id = dec.str();
    r.author = dec.str();
    r.body_text = dec.str();
    r.impression_text = dec.str();
    r.finalized_at = dec.i64();
    r.is_critical = dec.boolean();
    r.matched_keywords = get_strings(dec);
    r.keyword_config_version = dec.u64();
    dec.expect_done();
    return r;
}

Bytes CriticalAlert::encode() const {
    Encoder enc;
    enc.str(alert_id).str(report_id).str(exam_id).str(recipient);
    put_strings(enc, matched_keywords);
    enc.i64(raised_at).boolean(acknowledged);
    put_optional_time(enc, acknowledged_at);
    return std::move(enc).bytes();
}

CriticalAlert CriticalAlert::decode(ByteView bytes) {
    Decoder dec(bytes);
    CriticalAlert a;
    a.alert_id = dec.str();
    a.report_id = dec.str();
    a.exam_id = dec.str();
    a.recipient = dec.str();
    a.matched_keywords = get_strings(dec);
    a.raised_at = dec.i64();
    a.acknowledged = dec.boolean();
    a.acknowledged_at = get_optional_time(dec);
    dec.expect_done();
    return a;
}

Bytes KeywordConfig::encode() const {
    Encoder enc;
    enc.str(channel_id).count(keywords.size());
    for (const auto& k : keywords) enc.str(k);
    enc.u64(version);
    return std::move(enc).bytes();
}

KeywordConfig KeywordConfig::decode(ByteView bytes) {
    Decoder dec(bytes);
    KeywordConfig c;
    c.channel_id = dec.str();
    auto n = dec.count(4);
    for (std::size_t i = 0; i < n; ++i) c.keywords.insert(dec.str());
    c.version = dec.u64();
    dec.expect_done();
    return c;
}

Bytes DataAccessRecord::encode() const {
    Encoder enc;
    enc.str(exam_id).str(user_id).raw(token_digest).i64(issued_at).u64(ttl_seconds);
    return std::move(enc).bytes();
}

DataAccessRecord DataAccessRecord::decode(ByteView bytes) {
    Decoder dec(bytes);
    DataAccessRecord r;
    r.exam_id = dec.str();
    r.user_id = dec.str();
    r.token_digest = dec.fixed<32>();
    r.issued_at = dec.i64();
    r.ttl_seconds = dec.u64();
    dec.expect_done();
    return r;
}

Bytes ReportOutcome::encode() const {
    Encoder enc;
    enc.blob(report.encode()).boolean(alert.has_value());
    if (alert) enc.blob(alert->encode());
    return std::move(enc).bytes();
}

ReportOutcome ReportOutcome::decode(ByteView bytes) {
    Decoder dec(bytes);
    ReportOutcome out;
    out.report = RadiologyReport::decode(dec.blob());
    if (dec.boolean()) out.alert = CriticalAlert::decode(dec.blob());
    dec.expect_done();
    return out;
}

// ---------------------------------------------------------------------------
// Keywords
// ---------------------------------------------------------------------------

namespace {

constexpr bool is_alnum(unsigned char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

constexpr char ascii_lower(char c) noexcept { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lowered(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
    return out;
}

bool contains_whole(const std::string& text, const std::string& keyword) {
    const auto searcher = std::boyer_moore_horspool_searcher(keyword.begin(), keyword.end());
    auto it = text.begin();
    while (true) {
        auto [first, last] = searcher(it, text.end());
        if (first == text.end()) return false;
        bool left_ok = first == text.begin() || !is_alnum(static_cast<unsigned char>(*(first - 1)));
        bool right_ok = last == text.end() || !is_alnum(static_cast<unsigned char>(*last));
        if (left_ok && right_ok) return true;
        it = first + 1;
    }
}

}  // namespace

std::string normalize_keyword(std::string_view raw) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (!raw.empty() && is_space(raw.front())) raw.remove_prefix(1);
    while (!raw.empty() && is_space(raw.back())) raw.remove_suffix(1);
    if (raw.empty()) throw Error(ErrorCode::InvalidKeyword, "empty keyword");
    auto out = lowered(raw);
    for (char c : out) {
        if (!(is_alnum(static_cast<unsigned char>(c)) || c == ' ' || c == '-'))
            throw Error(ErrorCode::InvalidKeyword, "character not allowed in \"" + out + "\"");
    }
    return out;
}

std::vector<std::string> detect_keywords(std::string_view impression_text, std::string_view body_text,
                                         const KeywordConfig& config) {
    std::vector<std::string> matched;
    if (config.keywords.empty()) return matched;
    const auto impression = lowered(impression_text);
    const auto body = lowered(body_text);
    for (const auto& keyword : config.keywords) {
        if (keyword.empty()) continue;
        if (contains_whole(impression, keyword) || contains_whole(body, keyword)) matched.push_back(keyword);
    }
    return matched;
}

// ---------------------------------------------------------------------------
// Identifiers and drafts
// ---------------------------------------------------------------------------

crypto::Hash make_request_id(std::string_view exam_id, std::string_view requester, std::int64_t proposal_time,
                             ByteView nonce) {
    Encoder enc;
    enc.str(exam_id).str(requester).i64(proposal_time).raw(nonce);
    return crypto::sha256(enc.bytes());
}

std::string make_report_id(std::string_view exam_id, std::string_view author, std::int64_t proposal_time,
                           ByteView nonce) {
    Encoder enc;
    enc.str("report").str(exam_id).str(author).i64(proposal_time).raw(nonce);
    return crypto::to_hex(crypto::sha256(enc.bytes()));
}

std::string make_alert_id(std::string_view report_id) {
    Encoder enc;
    enc.str("alert").str(report_id);
    return crypto::to_hex(crypto::sha256(enc.bytes()));
}

Draft anchor_exam(const ExamRecord& record) {
    return {ContractKind::Anchor, std::string(op::kAnchorExam), {record.encode()}};
}

Draft request_access(std::string_view exam_id, AccessReason reason, const Nonce& nonce) {
    return {ContractKind::Access,
            std::string(op::kRequestAccess),
            {to_bytes(exam_id), Bytes{static_cast<std::uint8_t>(reason)}, Bytes(nonce.begin(), nonce.end())}};
}

Draft evaluate_access(const crypto::Hash& request_id) {
    return {ContractKind::Access, std::string(op::kEvaluateAccess), {Bytes(request_id.begin(), request_id.end())}};
}

Draft record_data_access(std::string_view exam_id, const crypto::Hash& token_digest, std::uint64_t ttl_seconds) {
    Encoder ttl;
    ttl.u64(ttl_seconds);
    return {ContractKind::Access,
            std::string(op::kRecordDataAccess),
            {to_bytes(exam_id), Bytes(token_digest.begin(), token_digest.end()), std::move(ttl).bytes()}};
}

Draft submit_report(std::string_view exam_id, std::string_view body_text, std::string_view impression_text,
                    const Nonce& nonce) {
    return {ContractKind::Report,
            std::string(op::kSubmitReport),
            {to_bytes(exam_id), to_bytes(body_text), to_bytes(impression_text), Bytes(nonce.begin(), nonce.end())}};
}

Draft acknowledge_alert(std::string_view alert_id) {
    return {ContractKind::Report, std::string(op::kAcknowledgeAlert), {to_bytes(alert_id)}};
}

Draft configure_keywords(const std::vector<std::string>& keywords) {
    Draft d{ContractKind::Report, std::string(op::kConfigureKeywords), {}};
    for (const auto& k : keywords) d.args.push_back(to_bytes(k));
    return d;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

namespace {

/// Read/write-set recording view over a state snapshot.
class TxContext {
public:
    TxContext(const ledger::Transaction& tx, const ledger::WorldState& state, const identity::Directory& dir)
        : tx(tx), dir(dir), state_(state) {}

    std::optional<Bytes> get(const std::string& key) {
        if (auto it = write_index_.find(key); it != write_index_.end()) return writes_[it->second].value;
        auto entry = state_.get(key);
        if (!read_keys_.contains(key)) {
            read_keys_.insert(key);
            reads_.push_back({key, entry ? std::optional(entry->version) : std::nullopt});
        }
        if (!entry) return std::nullopt;
        return entry->value;
    }

    void put(const std::string& key, Bytes value) {
        if (auto it = write_index_.find(key); it != write_index_.end()) {
            writes_[it->second].value = std::move(value);
            return;
        }
        write_index_[key] = writes_.size();
        writes_.push_back({key, std::move(value)});
    }

    Execution finish(Bytes response) && { return {std::move(reads_), std::move(writes_), std::move(response)}; }

    const std::string& channel() const { return tx.channel_id; }
    const std::string& caller() const { return tx.creator; }
    std::int64_t now() const { return tx.proposal_time; }

    bool permitted(Action a) const { return dir.authorize(tx.creator, a, tx.channel_id).permitted(); }
    void require(Action a) const {
        auto d = dir.authorize(tx.creator, a, tx.channel_id);
        if (!d) throw Error(ErrorCode::Unauthorized, std::string(identity::to_string(d.reason())));
    }

    const ledger::Transaction& tx;
    const identity::Directory& dir;

private:
    const ledger::WorldState& state_;
    std::vector<ledger::ReadEntry> reads_;
    std::set<std::string> read_keys_;
    std::vector<ledger::WriteEntry> writes_;
    std::map<std::string, std::size_t> write_index_;
};

const Bytes& arg(const ledger::Transaction& tx, std::size_t i) {
    if (i >= tx.args.size()) throw Error(ErrorCode::ContractError, "missing argument " + std::to_string(i));
    return tx.args[i];
}

std::string arg_string(const ledger::Transaction& tx, std::size_t i) { return radchain::to_string(ByteView(arg(tx, i))); }

template <std::size_t N>
std::array<std::uint8_t, N> arg_fixed(const ledger::Transaction& tx, std::size_t i) {
    const auto& a = arg(tx, i);
    if (a.size() != N) throw Error(ErrorCode::ContractError, "argument " + std::to_string(i) + " has wrong size");
    std::array<std::uint8_t, N> out{};
    std::copy(a.begin(), a.end(), out.begin());
    return out;
}

void check_identifier(std::string_view id, std::string_view what) {
    if (id.empty() || id.find('/') != std::string_view::npos)
        throw Error(ErrorCode::ContractError, std::string(what) + " must be non-empty and contain no '/'");
}

template <typename T>
T decode_or_contract_error(ByteView bytes, std::string_view what) {
    try {
        return T::decode(bytes);
    } catch (const Error&) {
        throw Error(ErrorCode::ContractError, "malformed " + std::string(what));
    }
}

std::optional<ExamRecord> load_exam(TxContext& ctx, const std::string& exam_id) {
    auto raw = ctx.get(keys::exam(ctx.channel(), exam_id));
    if (!raw) return std::nullopt;
    return ExamRecord::decode(*raw);
}

// A caller may ask for an exam either as a radiologist or as the exam's
// referring physician.
bool may_request(const identity::Directory& dir, const std::string& user, const std::string& channel,
                 const ExamRecord& exam) {
    if (dir.authorize(user, Action::RequestAccess, channel)) return true;
    return dir.authorize(user, Action::ViewImages, channel) && exam.referring_physician == user;
}

Execution run_anchor_exam(TxContext ctx) {
    ctx.require(Action::IngestStudy);
    auto record = decode_or_contract_error<ExamRecord>(arg(ctx.tx, 0), "exam record");
    auto cert = ctx.dir.certificate(ctx.caller());
    if (!cert || cert->org_id != record.org_id)
        throw Error(ErrorCode::Unauthorized, "caller is not a site admin of " + record.org_id);
    check_identifier(record.exam_id, "exam_id");
    if (record.image_hashes.empty() || record.image_count == 0) throw Error(ErrorCode::EmptyImageSet);
    if (record.image_count != record.image_hashes.size())
        throw Error(ErrorCode::ContractError, "image_count does not match image hashes");
    const auto key = keys::exam(ctx.channel(), record.exam_id);
    if (ctx.get(key)) throw Error(ErrorCode::DuplicateExam, record.exam_id);
    record.created_at = ctx.now();
    ctx.put(key, record.encode());
    return std::move(ctx).finish(to_bytes(key));
}

Execution run_request_access(TxContext ctx) {
    if (!ctx.permitted(Action::RequestAccess) && !ctx.permitted(Action::ViewImages))
        throw Error(ErrorCode::Unauthorized);
    const auto exam_id = arg_string(ctx.tx, 0);
    const auto& reason_arg = arg(ctx.tx, 1);
    if (reason_arg.size() != 1 || reason_arg[0] > static_cast<std::uint8_t>(AccessReason::MissingImages))
        throw Error(ErrorCode::ContractError, "bad reason");
    const auto& nonce = arg(ctx.tx, 2);
    if (nonce.size() != 8) throw Error(ErrorCode::ContractError, "nonce must be 8 bytes");

    auto exam = load_exam(ctx, exam_id);
    if (!exam) throw Error(ErrorCode::UnknownExam, exam_id);
    if (!may_request(ctx.dir, ctx.caller(), ctx.channel(), *exam))
        throw Error(ErrorCode::Unauthorized, "not the referring physician of " + exam_id);

    AccessRequest req;
    req.request_id = make_request_id(exam_id, ctx.caller(), ctx.now(), nonce);
    req.exam_id = exam_id;
    req.requester = ctx.caller();
    req.reason = static_cast<AccessReason>(reason_arg[0]);
    const auto key = keys::request(ctx.channel(), req.id_hex());
    if (ctx.get(key)) throw Error(ErrorCode::ContractError, "request id collision");
    ctx.put(key, req.encode());
    return std::move(ctx).finish(req.encode());
}

Execution run_evaluate_access(TxContext ctx) {
    if (!ctx.dir.check_membership(ctx.caller(), ctx.channel())) throw Error(ErrorCode::Unauthorized);
    const auto request_id = arg_fixed<32>(ctx.tx, 0);
    const auto key = keys::request(ctx.channel(), crypto::to_hex(request_id));
    auto raw = ctx.get(key);
    if (!raw) throw Error(ErrorCode::UnknownRequest, crypto::to_hex(request_id));
    auto req = AccessRequest::decode(*raw);
    if (req.status != AccessStatus::Pending) throw Error(ErrorCode::AlreadyDecided, req.id_hex());

    auto exam = load_exam(ctx, req.exam_id);
    auto cert = ctx.dir.certificate(req.requester);
    bool grant = exam && cert && may_request(ctx.dir, req.requester, ctx.channel(), *exam) &&
                 role_permits_reason(cert->role, req.reason);

    req.status = grant ? AccessStatus::Granted : AccessStatus::Denied;
    req.decided_at = ctx.now();
    ctx.put(key, req.encode());
    if (grant) {
        const auto grant_key = keys::grant(ctx.channel(), req.exam_id, req.requester);
        ctx.get(grant_key);
        ctx.put(grant_key, AccessGrant{req.exam_id, req.requester, req.request_id, ctx.now()}.encode());
    }
    return std::move(ctx).finish(req.encode());
}

Execution run_record_data_access(TxContext ctx) {
    ctx.require(Action::ViewImages);
    const auto exam_id = arg_string(ctx.tx, 0);
    const auto digest = arg_fixed<32>(ctx.tx, 1);
    const auto ttl_raw = arg_fixed<8>(ctx.tx, 2);
    Decoder ttl_dec(ttl_raw);
    const auto ttl = ttl_dec.u64();

    if (!load_exam(ctx, exam_id)) throw Error(ErrorCode::UnknownExam, exam_id);
    if (!ctx.get(keys::grant(ctx.channel(), exam_id, ctx.caller()))) throw Error(ErrorCode::NoGrant, exam_id);
    const auto key = keys::data_access(ctx.channel(), exam_id);
    ctx.get(key);
    DataAccessRecord rec{exam_id, ctx.caller(), digest, ctx.now(), ttl};
    ctx.put(key, rec.encode());
    return std::move(ctx).finish(rec.encode());
}

KeywordConfig load_keywords(TxContext& ctx) {
    auto raw = ctx.get(keys::keyword_config(ctx.channel()));
    if (!raw) return KeywordConfig{ctx.channel(), {}, 0};
    return KeywordConfig::decode(*raw);
}

Execution run_submit_report(TxContext ctx) {
    ctx.require(Action::SubmitReport);
    const auto exam_id = arg_string(ctx.tx, 0);
    const auto body = arg_string(ctx.tx, 1);
    const auto impression = arg_string(ctx.tx, 2);
    const auto& nonce = arg(ctx.tx, 3);

    auto exam = load_exam(ctx, exam_id);
    if (!exam) throw Error(ErrorCode::UnknownExam, exam_id);
    if (!ctx.get(keys::grant(ctx.channel(), exam_id, ctx.caller()))) throw Error(ErrorCode::NoAccessGrant, exam_id);
    auto config = load_keywords(ctx);

    ReportOutcome out;
    auto& report = out.report;
    report.report_id = make_report_id(exam_id, ctx.caller(), ctx.now(), nonce);
    report.exam_id = exam_id;
    report.author = ctx.caller();
    report.body_text = body;
    report.impression_text = impression;
    report.finalized_at = ctx.now();
    report.matched_keywords = detect_keywords(impression, body, config);
    report.is_critical = !report.matched_keywords.empty();
    report.keyword_config_version = config.version;

    const auto report_key = keys::report(ctx.channel(), report.report_id);
    if (ctx.get(report_key)) throw Error(ErrorCode::ContractError, "report id collision");
    ctx.put(report_key, report.encode());

    if (report.is_critical) {
        CriticalAlert alert;
        alert.alert_id = make_alert_id(report.report_id);
        alert.report_id = report.report_id;
        alert.exam_id = exam_id;
        alert.recipient = exam->referring_physician;
        alert.matched_keywords = report.matched_keywords;
        alert.raised_at = ctx.now();
        const auto alert_key = keys::alert(ctx.channel(), alert.alert_id);
        ctx.get(alert_key);
        ctx.put(alert_key, alert.encode());
        out.alert = std::move(alert);
    }
    auto response = out.encode();
    return std::move(ctx).finish(std::move(response));
}

Execution run_acknowledge_alert(TxContext ctx) {
    ctx.require(Action::AckAlert);
    const auto alert_id = arg_string(ctx.tx, 0);
    const auto key = keys::alert(ctx.channel(), alert_id);
    auto raw = ctx.get(key);
    if (!raw) throw Error(ErrorCode::UnknownAlert, alert_id);
    auto alert = CriticalAlert::decode(*raw);
    if (alert.recipient != ctx.caller()) throw Error(ErrorCode::Unauthorized, "not the alert recipient");
    if (alert.acknowledged) throw Error(ErrorCode::AlreadyAcknowledged, alert_id);
    alert.acknowledged = true;
    alert.acknowledged_at = ctx.now();
    ctx.put(key, alert.encode());
    return std::move(ctx).finish(alert.encode());
}

Execution run_configure_keywords(TxContext ctx) {
    ctx.require(Action::ConfigureKeywords);
    KeywordConfig next{ctx.channel(), {}, 0};
    for (const auto& raw : ctx.tx.args) next.keywords.insert(normalize_keyword(radchain::to_string(ByteView(raw))));
    auto current = load_keywords(ctx);
    next.version = current.version + 1;
    ctx.put(keys::keyword_config(ctx.channel()), next.encode());
    return std::move(ctx).finish(next.encode());
}

}  // namespace

Execution execute(const ledger::Transaction& draft, const ledger::WorldState& state,
                  const identity::Directory& directory) {
    TxContext ctx(draft, state, directory);
    const auto& name = draft.operation;
    switch (draft.contract) {
        case ContractKind::Anchor:
            if (name == op::kAnchorExam) return run_anchor_exam(std::move(ctx));
            break;
        case ContractKind::Access:
            if (name == op::kRequestAccess) return run_request_access(std::move(ctx));
            if (name == op::kEvaluateAccess) return run_evaluate_access(std::move(ctx));
            if (name == op::kRecordDataAccess) return run_record_data_access(std::move(ctx));
            break;
        case ContractKind::Report:
            if (name == op::kSubmitReport) return run_submit_report(std::move(ctx));
            if (name == op::kAcknowledgeAlert) return run_acknowledge_alert(std::move(ctx));
            if (name == op::kConfigureKeywords) return run_configure_keywords(std::move(ctx));
            break;
        case ContractKind::Identity:
            break;
    }
    throw Error(ErrorCode::ContractError, "unknown operation " + std::string(ledger::to_string(draft.contract)) +
                                              "/" + name);
}

std::vector<Action> required_actions(const ledger::Transaction& tx) {
    const auto& name = tx.operation;
    switch (tx.contract) {
        case ContractKind::Anchor:
            if (name == op::kAnchorExam) return {Action::IngestStudy};
            break;
        case ContractKind::Access:
            if (name == op::kRequestAccess) return {Action::RequestAccess, Action::ViewImages};
            if (name == op::kEvaluateAccess)
                return std::vector<Action>(std::begin(identity::kAllActions), std::end(identity::kAllActions));
            if (name == op::kRecordDataAccess) return {Action::ViewImages};
            break;
        case ContractKind::Report:
            if (name == op::kSubmitReport) return {Action::SubmitReport};
            if (name == op::kAcknowledgeAlert) return {Action::AckAlert};
            if (name == op::kConfigureKeywords) return {Action::ConfigureKeywords};
            break;
        case ContractKind::Identity:
            return {Action::Register, Action::Revoke};
    }
    return {};
}

}  // namespace radchain::contracts
