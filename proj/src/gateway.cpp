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

#include "radchain/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "radchain/identity.hpp"

namespace radchain::gateway {

using json = nlohmann::json;
using contracts::AccessStatus;

namespace {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::Unauthorized:
        case ErrorCode::NoAccessGrant:
        case ErrorCode::NoGrant:
        case ErrorCode::Forbidden: return 403;
        case ErrorCode::UnknownExam:
        case ErrorCode::UnknownRequest:
        case ErrorCode::UnknownAlert:
        case ErrorCode::UnknownToken:
        case ErrorCode::UnknownUser:
        case ErrorCode::UnknownChannel:
        case ErrorCode::UnknownOrganization:
        case ErrorCode::UnknownOrg: return 404;
        case ErrorCode::AlreadyDecided:
        case ErrorCode::AlreadyAcknowledged:
        case ErrorCode::DuplicateExam:
        case ErrorCode::DuplicateUserId:
        case ErrorCode::TransactionInvalidated:
        case ErrorCode::MismatchedWriteSets:
        case ErrorCode::IntegrityFailure:
        case ErrorCode::AnchorRejected: return 409;
        case ErrorCode::ExpiredToken: return 410;
        case ErrorCode::Backpressure: return 503;
        case ErrorCode::InvalidKeyword:
        case ErrorCode::ContractError:
        case ErrorCode::MalformedEncoding:
        case ErrorCode::BadRequest:
        case ErrorCode::EmptyImageSet:
        case ErrorCode::HashMismatchImage:
        case ErrorCode::InvalidConfig: return 400;
        default: return 500;
    }
}

ApiResponse error_response(int status, std::string_view code, const std::string& detail = {}) {
    json body = {{"error", code}};
    if (!detail.empty()) body["detail"] = detail;
    return {status, body.dump(), "application/json"};
}

ApiResponse error_response(const Error& e) { return error_response(http_status(e.code()), to_string(e.code()), e.detail()); }

ApiResponse ok(int status, const json& body) { return {status, body.dump(), "application/json"}; }

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> out;
    std::string part;
    std::istringstream in(path);
    while (std::getline(in, part, '/'))
        if (!part.empty()) out.push_back(part);
    return out;
}

json parse_body(const ApiRequest& r) {
    if (r.body.empty()) return json::object();
    auto j = json::parse(r.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::BadRequest, "body must be a JSON object");
    return j;
}

std::string require_string(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_string()) throw Error(ErrorCode::BadRequest, std::string("missing ") + field);
    return j[field].get<std::string>();
}

std::string tx_hex(const crypto::Hash& h) { return crypto::to_hex(h); }

contracts::Nonce random_nonce() { return crypto::random_array<8>(); }

json exam_json(const contracts::ExamRecord& r) {
    json hashes = json::array();
    for (const auto& h : r.image_hashes) hashes.push_back(crypto::to_hex(h));
    return {{"exam_id", r.exam_id},
            {"org_id", r.org_id},
            {"modality", r.modality},
            {"referring_physician", r.referring_physician},
            {"image_hashes", hashes},
            {"image_count", r.image_count},
            {"prior_exam_ids", r.prior_exam_ids},
            {"created_at", r.created_at}};
}

json request_json(const contracts::AccessRequest& r) {
    json j = {{"request_id", r.id_hex()},
              {"exam_id", r.exam_id},
              {"requester", r.requester},
              {"reason", contracts::to_string(r.reason)},
              {"status", contracts::to_string(r.status)},
              {"decided_at", nullptr}};
    if (r.decided_at) j["decided_at"] = *r.decided_at;
    return j;
}

json grant_json(const contracts::AccessGrant& g) {
    return {{"exam_id", g.exam_id},
            {"user_id", g.user_id},
            {"request_id", crypto::to_hex(g.request_id)},
            {"granted_at", g.granted_at}};
}

json access_json(const contracts::DataAccessRecord& a) {
    return {{"exam_id", a.exam_id},
            {"user_id", a.user_id},
            {"token_digest", crypto::to_hex(a.token_digest)},
            {"issued_at", a.issued_at},
            {"ttl_seconds", a.ttl_seconds}};
}

json report_json(const contracts::RadiologyReport& r) {
    return {{"report_id", r.report_id},
            {"exam_id", r.exam_id},
            {"author", r.author},
            {"body_text", r.body_text},
            {"impression_text", r.impression_text},
            {"finalized_at", r.finalized_at},
            {"is_critical", r.is_critical},
            {"matched_keywords", r.matched_keywords},
            {"keyword_config_version", r.keyword_config_version}};
}

json alert_json(const contracts::CriticalAlert& a) {
    json j = {{"alert_id", a.alert_id},
              {"report_id", a.report_id},
              {"exam_id", a.exam_id},
              {"recipient", a.recipient},
              {"matched_keywords", a.matched_keywords},
              {"raised_at", a.raised_at},
              {"acknowledged", a.acknowledged},
              {"acknowledged_at", nullptr}};
    if (a.acknowledged_at) j["acknowledged_at"] = *a.acknowledged_at;
    return j;
}

json completeness_json(const std::optional<pacsvault::Completeness>& c) {
    if (!c) return {{"status", "Unknown"}};
    if (c->complete) return {{"status", "Complete"}, {"missing", 0}};
    return {{"status", "Incomplete"}, {"missing", c->missing}};
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

// ---------------------------------------------------------------------------
// Wallet
// ---------------------------------------------------------------------------

Wallet::Wallet(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (!dir_) return;
    std::filesystem::create_directories(*dir_);
    for (const auto& entry : std::filesystem::directory_iterator(*dir_)) {
        if (entry.path().extension() != ".seed") continue;
        std::ifstream in(entry.path());
        std::string hex;
        in >> hex;
        auto seed = crypto::fixed_from_hex<32>(hex);
        if (!seed) throw Error(ErrorCode::MalformedEncoding, "wallet entry " + entry.path().string());
        keys_.insert_or_assign(entry.path().stem().string(), crypto::KeyPair::from_seed(*seed));
    }
}

void Wallet::put(const std::string& user_id, const crypto::KeyPair& key) {
    std::lock_guard lock(mutex_);
    keys_.insert_or_assign(user_id, key);
    if (dir_) {
        std::ofstream out(*dir_ / (user_id + ".seed"), std::ios::trunc);
        out << crypto::to_hex(key.seed()) << '\n';
        if (!out) throw Error(ErrorCode::PersistenceFailure, "wallet write for " + user_id);
    }
}

std::optional<crypto::KeyPair> Wallet::get(const std::string& user_id) const {
    std::lock_guard lock(mutex_);
    auto it = keys_.find(user_id);
    if (it == keys_.end()) return std::nullopt;
    return it->second;
}

bool Wallet::has(const std::string& user_id) const {
    std::lock_guard lock(mutex_);
    return keys_.count(user_id) > 0;
}

// ---------------------------------------------------------------------------
// Alert cursor
// ---------------------------------------------------------------------------

std::string AlertCursor::encode() const {
    std::string out;
    for (const auto& [channel, pos] : next) {
        if (!out.empty()) out += ',';
        out += channel + ":" + std::to_string(pos.first) + "." + std::to_string(pos.second);
    }
    return out;
}

AlertCursor AlertCursor::decode(const std::string& s) {
    AlertCursor c;
    std::istringstream in(s);
    std::string part;
    while (std::getline(in, part, ',')) {
        auto colon = part.rfind(':');
        auto dot = part.rfind('.');
        if (colon == std::string::npos || dot == std::string::npos || dot < colon) return {};
        try {
            std::size_t used = 0;
            auto h = std::stoull(part.substr(colon + 1, dot - colon - 1), &used);
            auto i = std::stoul(part.substr(dot + 1));
            c.next[part.substr(0, colon)] = {h, static_cast<std::uint32_t>(i)};
        } catch (const std::exception&) {
            return {};
        }
    }
    return c;
}

std::string format_sse(const AlertEvent& e) {
    auto data = alert_json(e.alert);
    data["channel"] = e.channel_id;
    data["height"] = e.height;
    data["tx_index"] = e.tx_index;
    return "id: " + e.id + "\nevent: alert\ndata: " + data.dump() + "\n\n";
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(network::Network& network, Wallet& wallet, std::map<std::string, pacsvault::Vault*> vaults,
                 GatewayOptions options)
    : network_(network), wallet_(wallet), vaults_(std::move(vaults)), options_(std::move(options)) {}

std::int64_t Gateway::now() const {
    std::lock_guard lock(mutex_);
    return options_.clock();
}

void Gateway::set_clock(Clock clock) {
    std::lock_guard lock(mutex_);
    options_.clock = std::move(clock);
}

network::Client Gateway::client_for(const std::string& user_id) {
    auto key = wallet_.get(user_id);
    if (!key) throw Error(ErrorCode::Forbidden, "no signing key held for " + user_id);
    return network::Client(network_, user_id, *key, options_.clock);
}

std::vector<std::string> Gateway::user_channels(const std::string& user_id) const {
    auto cert = network_.directory().certificate(user_id);
    if (!cert || cert->revoked) return {};
    std::vector<std::string> out;
    for (const auto& ch : network_.directory().channels_of(cert->org_id))
        if (ch != identity::kSystemChannel) out.push_back(ch);
    return out;
}

const network::Peer& Gateway::reader_for(const std::string& user_id, const std::string& channel_id) const {
    auto cert = network_.directory().certificate(user_id);
    std::lock_guard lock(network_.mutex());
    const network::Peer* fallback = nullptr;
    for (const auto& id : network_.peers_on(channel_id)) {
        const auto& p = network_.peer(id);
        if (cert && p.org_id() == cert->org_id) return p;
        if (!fallback) fallback = &p;
    }
    if (!fallback) throw Error(ErrorCode::UnknownChannel, channel_id);
    return *fallback;
}

std::optional<std::string> Gateway::find_exam_channel(const std::string& user_id, const std::string& exam_id) const {
    for (const auto& ch : user_channels(user_id)) {
        const auto& peer = reader_for(user_id, ch);
        if (peer.ledger(ch).query_state(contracts::keys::exam(ch, exam_id))) return ch;
    }
    return std::nullopt;
}

pacsvault::Vault* Gateway::vault_holding(const std::string& exam_id) const {
    for (const auto& [_, v] : vaults_)
        if (v && v->has_exam(exam_id)) return v;
    return nullptr;
}

std::optional<std::string> Gateway::authenticate(const ApiRequest& request) {
    auto it = request.headers.find("authorization");
    if (it == request.headers.end() || !starts_with(it->second, "Bearer ")) return std::nullopt;
    const auto sid = it->second.substr(7);
    std::string user;
    {
        std::lock_guard lock(mutex_);
        auto s = sessions_.find(sid);
        if (s == sessions_.end()) return std::nullopt;
        if (options_.clock() >= s->second.expires_at) {
            sessions_.erase(s);
            return std::nullopt;
        }
        user = s->second.user_id;
    }
    auto cert = network_.directory().certificate(user);
    if (!cert || cert->revoked) return std::nullopt;
    return user;
}

ApiResponse Gateway::handle(const ApiRequest& r) {
    try {
        const auto parts = split_path(r.path);
        if (parts.size() < 2 || parts[0] != "v1") return error_response(404, "NotFound");
        const auto& m = r.method;
        const auto n = parts.size();

        if (m == "POST" && n == 2 && parts[1] == "login") return login(r);
        if (m == "GET" && n == 3 && parts[1] == "images") return images(parts[2], r);

        auto user = authenticate(r);
        if (!user) return error_response(401, "Unauthenticated", "missing, expired or revoked session");

        if (m == "POST" && n == 2 && parts[1] == "access-requests") return access_request(*user, r);
        if (m == "GET" && n == 2 && parts[1] == "worklist") return worklist(*user);
        if (m == "GET" && n == 3 && parts[1] == "exams") return exam(*user, parts[2]);
        if (m == "POST" && n == 4 && parts[1] == "exams" && parts[3] == "view-link") return view_link(*user, parts[2]);
        if (m == "POST" && n == 2 && parts[1] == "reports") return report(*user, r);
        if (m == "GET" && n == 2 && parts[1] == "alerts") return alerts_backlog(*user, r);
        if (m == "POST" && n == 4 && parts[1] == "alerts" && parts[3] == "ack") return ack(*user, parts[2]);
        if (m == "GET" && n == 4 && parts[1] == "audit" && parts[2] == "exams") return audit(*user, parts[3]);
        if (m == "POST" && n == 3 && parts[1] == "admin" && parts[2] == "keywords") return keywords(*user, r);
        if (m == "POST" && n == 3 && parts[1] == "admin" && parts[2] == "register") return register_user(*user, r);
        if (m == "POST" && n == 3 && parts[1] == "admin" && parts[2] == "studies") return ingest(*user, r);
        return error_response(404, "NotFound");
    } catch (const Error& e) {
        return error_response(e);
    } catch (const json::exception& e) {
        return error_response(400, "BadRequest", e.what());
    }
}

ApiResponse Gateway::login(const ApiRequest& r) {
    auto body = parse_body(r);
    const auto user = require_string(body, "user_id");
    auto cert = network_.directory().certificate(user);

    if (!body.contains("signature")) {
        // Issue a challenge even for unknown users so the response does not reveal enrollment.
        auto challenge = crypto::to_hex(crypto::random_array<32>());
        std::lock_guard lock(mutex_);
        const auto t = options_.clock();
        std::erase_if(challenges_, [&](const auto& kv) { return kv.second.expires_at <= t; });
        challenges_[challenge] = {user, t + options_.challenge_ttl_seconds};
        return ok(200, {{"challenge", challenge},
                        {"message", "radchain-login:" + challenge},
                        {"expires_at", t + options_.challenge_ttl_seconds}});
    }

    const auto challenge = require_string(body, "challenge");
    const auto sig = crypto::fixed_from_hex<crypto::kSignatureSize>(require_string(body, "signature"));
    {
        std::lock_guard lock(mutex_);
        auto it = challenges_.find(challenge);
        bool valid = it != challenges_.end() && it->second.user_id == user && options_.clock() < it->second.expires_at;
        if (it != challenges_.end()) challenges_.erase(it);  // single use
        if (!valid) return error_response(401, "Unauthenticated", "unknown or expired challenge");
    }
    if (!sig || !cert || cert->revoked ||
        !network_.directory().verify_signature(as_bytes("radchain-login:" + challenge), *sig, user))
        return error_response(401, "Unauthenticated", "signature rejected");

    auto sid = crypto::to_hex(crypto::random_array<32>());
    std::int64_t expires = 0;
    {
        std::lock_guard lock(mutex_);
        expires = options_.clock() + options_.session_ttl_seconds;
        sessions_[sid] = {user, expires};
    }
    return ok(200, {{"session_id", sid},
                    {"user_id", user},
                    {"org_id", cert->org_id},
                    {"role", identity::to_string(cert->role)},
                    {"channels", user_channels(user)},
                    {"expires_at", expires}});
}

ApiResponse Gateway::access_request(const std::string& user, const ApiRequest& r) {
    auto body = parse_body(r);
    const auto exam_id = require_string(body, "exam_id");
    auto cert = network_.directory().certificate(user);
    auto reason = cert && cert->role == identity::Role::Physician ? contracts::AccessReason::PriorComparison
                                                                   : contracts::AccessReason::Interpretation;
    if (body.contains("reason")) {
        auto parsed = contracts::parse_reason(require_string(body, "reason"));
        if (!parsed) throw Error(ErrorCode::BadRequest, "unknown reason");
        reason = *parsed;
    }
    auto channel = find_exam_channel(user, exam_id);
    if (!channel) throw Error(ErrorCode::UnknownExam, exam_id);

    auto c = client_for(user);
    auto requested = c.invoke(*channel, contracts::request_access(exam_id, reason, random_nonce()));
    auto req = contracts::AccessRequest::decode(requested.response);
    // The decision is the deterministic policy; submit it right away.
    auto evaluated = c.invoke(*channel, contracts::evaluate_access(req.request_id));
    auto decided = contracts::AccessRequest::decode(evaluated.response);

    auto out = request_json(decided);
    out["channel"] = *channel;
    out["tx_id"] = tx_hex(requested.tx_id);
    out["evaluate_tx_id"] = tx_hex(evaluated.tx_id);
    return ok(201, out);
}

ApiResponse Gateway::worklist(const std::string& user) {
    auto cert = network_.directory().certificate(user);
    json entries = json::array();
    for (const auto& ch : user_channels(user)) {
        const auto& ledger = reader_for(user, ch).ledger(ch);
        std::map<std::string, std::set<AccessStatus>> mine;
        for (const auto& [key, entry] : ledger.scan("req/" + ch + "/")) {
            auto req = contracts::AccessRequest::decode(entry.value);
            if (req.requester == user) mine[req.exam_id].insert(req.status);
        }
        std::map<std::string, std::pair<bool, bool>> reports;  // exam -> (has report, critical)
        for (const auto& [key, entry] : ledger.scan("report/" + ch + "/")) {
            auto rep = contracts::RadiologyReport::decode(entry.value);
            auto& slot = reports[rep.exam_id];
            slot.first = true;
            slot.second = slot.second || rep.is_critical;
        }
        for (const auto& [key, entry] : ledger.scan("exam/" + ch + "/")) {
            auto rec = contracts::ExamRecord::decode(entry.value);
            if (cert->role == identity::Role::Physician && rec.referring_physician != user) continue;
            std::string access = "None";
            if (ledger.query_state(contracts::keys::grant(ch, rec.exam_id, user)))
                access = "Granted";
            else if (mine[rec.exam_id].count(AccessStatus::Pending))
                access = "Pending";
            else if (mine[rec.exam_id].count(AccessStatus::Denied))
                access = "Denied";
            std::optional<pacsvault::Completeness> completeness;
            if (auto* v = vault_holding(rec.exam_id)) completeness = v->check_completeness(rec.exam_id);
            auto rep = reports.find(rec.exam_id);
            entries.push_back({{"exam_id", rec.exam_id},
                               {"channel", ch},
                               {"modality", rec.modality},
                               {"created_at", rec.created_at},
                               {"completeness", completeness_json(completeness)},
                               {"access_status", access},
                               {"report_status", rep != reports.end() ? "Finalized" : "None"},
                               {"critical", rep != reports.end() && rep->second.second}});
        }
    }
    return ok(200, {{"entries", entries}});
}

ApiResponse Gateway::exam(const std::string& user, const std::string& exam_id) {
    auto channel = find_exam_channel(user, exam_id);
    if (!channel) throw Error(ErrorCode::UnknownExam, exam_id);
    const auto& ledger = reader_for(user, *channel).ledger(*channel);
    auto rec = contracts::ExamRecord::decode(ledger.query_state(contracts::keys::exam(*channel, exam_id))->value);
    auto cert = network_.directory().certificate(user);
    if (cert->role == identity::Role::Physician && rec.referring_physician != user)
        throw Error(ErrorCode::Forbidden, "not the referring physician");

    auto out = exam_json(rec);
    out["channel"] = *channel;
    std::optional<pacsvault::Completeness> completeness;
    if (auto* v = vault_holding(exam_id)) completeness = v->check_completeness(exam_id);
    out["completeness"] = completeness_json(completeness);
    out["access_status"] = ledger.query_state(contracts::keys::grant(*channel, exam_id, user)) ? "Granted" : "None";
    if (out["access_status"] == "None")
        for (const auto& [key, entry] : ledger.scan("req/" + *channel + "/")) {
            auto req = contracts::AccessRequest::decode(entry.value);
            if (req.exam_id != exam_id || req.requester != user) continue;
            if (req.status == AccessStatus::Pending) out["access_status"] = "Pending";
            if (req.status == AccessStatus::Denied && out["access_status"] == "None") out["access_status"] = "Denied";
        }
    json reports = json::array();
    for (const auto& [key, entry] : ledger.scan("report/" + *channel + "/")) {
        auto rep = contracts::RadiologyReport::decode(entry.value);
        if (rep.exam_id == exam_id) reports.push_back(report_json(rep));
    }
    out["reports"] = reports;
    return ok(200, out);
}

ApiResponse Gateway::view_link(const std::string& user, const std::string& exam_id) {
    auto channel = find_exam_channel(user, exam_id);
    if (!channel) throw Error(ErrorCode::UnknownExam, exam_id);
    auto* vault = vault_holding(exam_id);
    if (!vault) throw Error(ErrorCode::UnknownExam, "no vault holds " + exam_id);
    auto c = client_for(user);
    auto vt = vault->issue_view_token(c, *channel, exam_id);
    return ok(201, {{"exam_id", exam_id},
                    {"channel", *channel},
                    {"link", pacsvault::view_link(exam_id, vt.token)},
                    {"token", crypto::to_hex(vt.token)},
                    {"issued_at", vt.issued_at},
                    {"expires_at", vt.issued_at + static_cast<std::int64_t>(vt.ttl_seconds)},
                    {"tx_id", tx_hex(vt.data_access_tx)}});
}

ApiResponse Gateway::images(const std::string& exam_id, const ApiRequest& r) {
    auto it = r.query.find("token");
    if (it == r.query.end()) throw Error(ErrorCode::BadRequest, "token required");
    auto token = crypto::fixed_from_hex<32>(it->second);
    if (!token) throw Error(ErrorCode::BadRequest, "token must be 64 hex characters");
    const auto digest = crypto::sha256(ByteView(*token));
    for (const auto& [_, v] : vaults_) {
        if (!v) continue;
        auto info = v->token_info(digest);
        if (!info) continue;
        if (info->exam_id != exam_id) break;
        auto fetched = v->fetch_images(*token);
        std::vector<pacsvault::Image> images;
        for (auto& f : fetched) images.push_back({f.instance_id, {}, std::move(f.pixel_bytes)});
        auto bytes = pacsvault::encode_exam_file(images);
        return {200, std::string(bytes.begin(), bytes.end()), "application/octet-stream"};
    }
    throw Error(ErrorCode::UnknownToken);
}

ApiResponse Gateway::report(const std::string& user, const ApiRequest& r) {
    auto body = parse_body(r);
    const auto exam_id = require_string(body, "exam_id");
    const auto body_text = require_string(body, "body_text");
    const auto impression = require_string(body, "impression_text");
    auto channel = find_exam_channel(user, exam_id);
    if (!channel) throw Error(ErrorCode::UnknownExam, exam_id);
    auto c = client_for(user);
    auto res = c.invoke(*channel, contracts::submit_report(exam_id, body_text, impression, random_nonce()));
    auto outcome = contracts::ReportOutcome::decode(res.response);
    json out = report_json(outcome.report);
    out["channel"] = *channel;
    out["tx_id"] = tx_hex(res.tx_id);
    out["alert"] = outcome.alert ? alert_json(*outcome.alert) : json(nullptr);
    return ok(201, out);
}

ApiResponse Gateway::ack(const std::string& user, const std::string& alert_id) {
    std::optional<std::string> channel;
    for (const auto& ch : user_channels(user))
        if (reader_for(user, ch).ledger(ch).query_state(contracts::keys::alert(ch, alert_id))) channel = ch;
    if (!channel) throw Error(ErrorCode::UnknownAlert, alert_id);
    auto c = client_for(user);
    auto res = c.invoke(*channel, contracts::acknowledge_alert(alert_id));
    auto out = alert_json(contracts::CriticalAlert::decode(res.response));
    out["channel"] = *channel;
    out["tx_id"] = tx_hex(res.tx_id);
    return ok(200, out);
}

ApiResponse Gateway::audit(const std::string& user, const std::string& exam_id) {
    auto channel = find_exam_channel(user, exam_id);
    if (!channel) throw Error(ErrorCode::UnknownExam, exam_id);
    auto decision = network_.directory().authorize(user, identity::Action::ReadAudit, *channel);
    if (!decision) throw Error(ErrorCode::Forbidden, std::string(identity::to_string(decision.reason())));
    const auto& ch = *channel;
    const auto& ledger = reader_for(user, ch).ledger(ch);

    std::vector<std::pair<std::string, std::string>> keys;  // (key, kind)
    keys.emplace_back(contracts::keys::exam(ch, exam_id), "exam");
    for (const auto& [key, entry] : ledger.scan("req/" + ch + "/"))
        if (contracts::AccessRequest::decode(entry.value).exam_id == exam_id) keys.emplace_back(key, "request");
    for (const auto& [key, _] : ledger.scan(contracts::keys::grant_prefix(ch, exam_id))) keys.emplace_back(key, "grant");
    keys.emplace_back(contracts::keys::data_access(ch, exam_id), "access");
    for (const auto& [key, entry] : ledger.scan("report/" + ch + "/"))
        if (contracts::RadiologyReport::decode(entry.value).exam_id == exam_id) keys.emplace_back(key, "report");
    for (const auto& [key, entry] : ledger.scan("alert/" + ch + "/"))
        if (contracts::CriticalAlert::decode(entry.value).exam_id == exam_id) keys.emplace_back(key, "alert");

    struct Row {
        ledger::HistoryEntry h;
        std::string key, kind;
    };
    std::vector<Row> rows;
    for (const auto& [key, kind] : keys)
        for (auto& h : ledger.get_history(key)) rows.push_back({std::move(h), key, kind});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.h.height, a.h.tx_index, a.key) < std::tie(b.h.height, b.h.tx_index, b.key);
    });

    json entries = json::array();
    for (const auto& row : rows) {
        json value;
        if (row.kind == "exam") value = exam_json(contracts::ExamRecord::decode(row.h.value));
        if (row.kind == "request") value = request_json(contracts::AccessRequest::decode(row.h.value));
        if (row.kind == "grant") value = grant_json(contracts::AccessGrant::decode(row.h.value));
        if (row.kind == "access") value = access_json(contracts::DataAccessRecord::decode(row.h.value));
        if (row.kind == "report") value = report_json(contracts::RadiologyReport::decode(row.h.value));
        if (row.kind == "alert") value = alert_json(contracts::CriticalAlert::decode(row.h.value));
        entries.push_back({{"height", row.h.height},
                           {"tx_index", row.h.tx_index},
                           {"tx_id", tx_hex(row.h.tx_id)},
                           {"key", row.key},
                           {"kind", row.kind},
                           {"value", value}});
    }
    return ok(200, {{"exam_id", exam_id}, {"channel", ch}, {"entries", entries}});
}

ApiResponse Gateway::keywords(const std::string& user, const ApiRequest& r) {
    auto body = parse_body(r);
    if (!body.contains("keywords") || !body["keywords"].is_array()) throw Error(ErrorCode::BadRequest, "keywords array");
    std::vector<std::string> words;
    for (const auto& k : body["keywords"]) {
        if (!k.is_string()) throw Error(ErrorCode::BadRequest, "keywords must be strings");
        words.push_back(k.get<std::string>());
    }
    auto cert = network_.directory().certificate(user);
    if (!identity::role_allows(cert->role, identity::Action::ConfigureKeywords))
        throw Error(ErrorCode::Forbidden, "site administrators configure keywords");
    auto channels = user_channels(user);
    std::string channel;
    if (body.contains("channel")) {
        channel = require_string(body, "channel");
        if (std::find(channels.begin(), channels.end(), channel) == channels.end())
            throw Error(ErrorCode::UnknownChannel, channel);
    } else if (channels.size() == 1) {
        channel = channels.front();
    } else {
        throw Error(ErrorCode::BadRequest, "channel required");
    }
    auto c = client_for(user);
    auto res = c.invoke(channel, contracts::configure_keywords(words));
    auto cfg = contracts::KeywordConfig::decode(res.response);
    return ok(201, {{"channel", channel},
                    {"keywords", std::vector<std::string>(cfg.keywords.begin(), cfg.keywords.end())},
                    {"version", cfg.version},
                    {"tx_id", tx_hex(res.tx_id)}});
}

ApiResponse Gateway::register_user(const std::string& user, const ApiRequest& r) {
    auto cert = network_.directory().certificate(user);
    if (!cert || cert->role != identity::Role::CaAdmin) throw Error(ErrorCode::Forbidden, "CaAdmin only");
    auto admin_key = wallet_.get(user);
    if (!admin_key) throw Error(ErrorCode::Forbidden, "no signing key held for " + user);

    auto body = parse_body(r);
    const auto new_user = require_string(body, "user_id");
    const auto org = require_string(body, "org_id");
    auto role = identity::parse_role(require_string(body, "role"));
    if (!role) throw Error(ErrorCode::BadRequest, "unknown role");

    auto key = crypto::KeyPair::generate();
    auto& dir = network_.directory();
    auto sig = admin_key->sign(identity::Directory::register_request(new_user, org, *role, key.public_key()));
    auto issued = dir.register_user(sig, new_user, org, *role, key.public_key());
    wallet_.put(new_user, key);
    const auto& sys = dir.system_ledger();
    auto tip = sys.block_at(sys.height() - 1);
    return ok(201, {{"user_id", issued.user_id},
                    {"org_id", issued.org_id},
                    {"role", identity::to_string(issued.role)},
                    {"public_key", crypto::to_hex(issued.public_key)},
                    {"private_key_seed", crypto::to_hex(key.seed())},
                    {"issued_at", issued.issued_at},
                    {"tx_id", tx_hex(tip.transactions.back().tx_id)}});
}

ApiResponse Gateway::ingest(const std::string& user, const ApiRequest& r) {
    auto cert = network_.directory().certificate(user);
    auto vit = vaults_.find(cert->org_id);
    if (vit == vaults_.end() || !vit->second) throw Error(ErrorCode::Forbidden, "no vault for " + cert->org_id);
    auto body = parse_body(r);
    pacsvault::StudyBlob study;
    study.exam_id = require_string(body, "exam_id");
    pacsvault::StudyInfo info{require_string(body, "modality"), require_string(body, "referring_physician"), {}};
    if (body.contains("prior_exam_ids")) info.prior_exam_ids = body["prior_exam_ids"].get<std::vector<std::string>>();
    if (!body.contains("images") || !body["images"].is_array()) throw Error(ErrorCode::BadRequest, "images array");
    for (const auto& img : body["images"]) {
        auto pixels = crypto::from_hex(require_string(img, "pixels_hex"));
        if (!pixels) throw Error(ErrorCode::BadRequest, "pixels_hex");
        pacsvault::Pixels::decode(*pixels);  // header must parse
        study.images.push_back(pacsvault::Image::from_bytes(require_string(img, "instance_id"), std::move(*pixels)));
    }
    study.site_protocol_image_count = body.value("site_protocol_image_count", static_cast<std::uint32_t>(study.images.size()));

    auto channels = user_channels(user);
    std::string channel = body.contains("channel") ? require_string(body, "channel")
                                                   : (channels.size() == 1 ? channels.front() : std::string());
    if (std::find(channels.begin(), channels.end(), channel) == channels.end())
        throw Error(ErrorCode::BadRequest, "channel required");

    auto c = client_for(user);
    auto rec = vit->second->ingest_study(c, channel, study, info);
    auto history = reader_for(user, channel).ledger(channel).get_history(contracts::keys::exam(channel, rec.exam_id));
    auto out = exam_json(rec);
    out["channel"] = channel;
    out["completeness"] = completeness_json(vit->second->check_completeness(rec.exam_id));
    out["tx_id"] = history.empty() ? json(nullptr) : json(tx_hex(history.back().tx_id));
    return ok(201, out);
}

ApiResponse Gateway::alerts_backlog(const std::string& user, const ApiRequest& r) {
    auto cert = network_.directory().certificate(user);
    if (!identity::role_allows(cert->role, identity::Action::ReceiveAlert))
        throw Error(ErrorCode::Forbidden, "alerts are delivered to physicians");
    AlertCursor cursor;
    if (auto it = r.query.find("after"); it != r.query.end()) cursor = AlertCursor::decode(it->second);
    json alerts = json::array();
    for (const auto& e : alerts_after(user, cursor)) {
        // current state, which may carry the acknowledgment
        auto now_state = reader_for(user, e.channel_id)
                             .ledger(e.channel_id)
                             .query_state(contracts::keys::alert(e.channel_id, e.alert.alert_id));
        auto j = alert_json(now_state ? contracts::CriticalAlert::decode(now_state->value) : e.alert);
        j["channel"] = e.channel_id;
        j["event_id"] = e.id;
        alerts.push_back(j);
    }
    return ok(200, {{"alerts", alerts}, {"cursor", cursor.encode()}});
}

std::vector<AlertEvent> Gateway::alerts_after(const std::string& user_id, AlertCursor& cursor) const {
    std::vector<AlertEvent> out;
    const auto alert_prefix = std::string("alert/");
    for (const auto& ch : user_channels(user_id)) {
        const auto& ledger = reader_for(user_id, ch).ledger(ch);
        auto [h, i] = cursor.next.count(ch) ? cursor.next[ch] : std::pair<std::uint64_t, std::uint32_t>{0, 0};
        const auto tip = ledger.height();
        for (; h < tip; ++h, i = 0) {
            auto block = ledger.block_at(h);
            for (; i < block.transactions.size(); ++i) {
                const auto& tx = block.transactions[i];
                if (block.validity_flags[i] != ledger::Validity::Valid || tx.operation != contracts::op::kSubmitReport)
                    continue;
                for (const auto& w : tx.write_set) {
                    if (!starts_with(w.key, alert_prefix) || w.value.empty()) continue;
                    auto alert = contracts::CriticalAlert::decode(w.value);
                    if (alert.recipient != user_id) continue;
                    cursor.next[ch] = {h, i + 1};
                    out.push_back({cursor.encode(), ch, h, i, std::move(alert)});
                }
            }
        }
        cursor.next[ch] = {tip, 0};
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

struct HttpServer::Impl {
    httplib::Server server;
};

namespace {

ApiRequest to_api(const httplib::Request& req) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query[k] = v;
    for (const auto& [k, v] : req.headers) {
        std::string lower = k;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        r.headers[lower] = v;
    }
    r.body = req.body;
    return r;
}

void write_api(httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    res.set_content(api.body, api.content_type);
}

}  // namespace

HttpServer::HttpServer(Gateway& gateway) : gateway_(gateway), impl_(std::make_unique<Impl>()) {
    auto& s = impl_->server;
    s.set_tcp_nodelay(true);
    // SO_REUSEADDR only, never SO_REUSEPORT.
    s.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });

    s.Get("/v1/alerts/stream", [this](const httplib::Request& req, httplib::Response& res) {
        auto api = to_api(req);
        auto user = gateway_.authenticate(api);
        if (!user) return write_api(res, error_response(401, "Unauthenticated"));
        auto cert = gateway_.network().directory().certificate(*user);
        if (!cert || !identity::role_allows(cert->role, identity::Action::ReceiveAlert))
            return write_api(res, error_response(403, "Forbidden", "alerts are delivered to physicians"));

        auto cursor = std::make_shared<AlertCursor>();
        if (auto it = api.headers.find("last-event-id"); it != api.headers.end())
            *cursor = AlertCursor::decode(it->second);
        else if (auto q = api.query.find("lastEventId"); q != api.query.end())
            *cursor = AlertCursor::decode(q->second);

        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, api, user = *user, cursor](std::size_t, httplib::DataSink& sink) {
                if (stopping_ || !gateway_.authenticate(api)) {
                    sink.done();
                    return true;
                }
                std::string chunk;
                for (const auto& e : gateway_.alerts_after(user, *cursor)) chunk += format_sse(e);
                if (chunk.empty()) chunk = ": keepalive\n\n";
                if (!sink.write(chunk.data(), chunk.size())) return false;
                auto wait = std::chrono::milliseconds(gateway_.options().alert_poll_ms);
                for (auto slept = std::chrono::milliseconds(0); slept < wait && !stopping_;
                     slept += std::chrono::milliseconds(20))
                    std::this_thread::sleep_for(std::chrono::milliseconds(20));
                return true;
            });
    });

    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        write_api(res, gateway_.handle(to_api(req)));
    };
    s.Get(R"(/v1/.*)", forward);
    s.Post(R"(/v1/.*)", forward);
    s.Put(R"(/v1/.*)", forward);
    s.Delete(R"(/v1/.*)", forward);
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::mount_app(const std::filesystem::path& dir) { impl_->server.set_mount_point("/app", dir.string()); }

int HttpServer::start(const std::string& host, int port) {
    auto& s = impl_->server;
    int bound = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw Error(ErrorCode::BindFailure, host + ":" + std::to_string(port));
    port_ = bound;
    stopping_ = false;
    thread_ = std::thread([&s] { s.listen_after_bind(); });
    s.wait_until_ready();
    return port_;
}

void HttpServer::stop() {
    stopping_ = true;
    if (impl_) impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace radchain::gateway
