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

#include "radchain/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <toml.hpp>

namespace radchain::config {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& why) {
    throw Error(ErrorCode::InvalidConfig, where + ": " + why);
}

void only_keys(const toml::table& t, const std::string& where, std::initializer_list<std::string_view> allowed) {
    for (const auto& [k, _] : t) {
        if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end())
            bad(where + "." + std::string(k.str()), "unknown key");
    }
}

const toml::table* table_at(const toml::table& root, std::string_view key) {
    auto* node = root.get(key);
    if (!node) return nullptr;
    if (!node->is_table()) bad(std::string(key), "expected a table");
    return node->as_table();
}

template <typename T>
std::optional<T> get(const toml::table& t, std::string_view key, const std::string& where) {
    auto* node = t.get(key);
    if (!node) return std::nullopt;
    if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = node->value<std::string>()) return *v;
        bad(where + "." + std::string(key), "expected a string");
    } else if constexpr (std::is_same_v<T, double>) {
        if (auto v = node->value<double>()) return *v;
        bad(where + "." + std::string(key), "expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node->value<bool>()) return *v;
        bad(where + "." + std::string(key), "expected a boolean");
    } else {
        auto v = node->value<std::int64_t>();
        if (!v) bad(where + "." + std::string(key), "expected an integer");
        if (*v < 0) bad(where + "." + std::string(key), "must not be negative");
        return static_cast<T>(*v);
    }
}

std::vector<std::string> strings(const toml::table& t, std::string_view key, const std::string& where) {
    std::vector<std::string> out;
    auto* node = t.get(key);
    if (!node) return out;
    auto* arr = node->as_array();
    if (!arr) bad(where + "." + std::string(key), "expected an array of strings");
    for (const auto& el : *arr) {
        auto v = el.value<std::string>();
        if (!v) bad(where + "." + std::string(key), "expected an array of strings");
        out.push_back(*v);
    }
    return out;
}

std::optional<crypto::Seed> seed_at(const toml::table& t, std::string_view key, const std::string& where) {
    auto hex = get<std::string>(t, key, where);
    if (!hex) return std::nullopt;
    auto seed = crypto::fixed_from_hex<32>(*hex);
    if (!seed) bad(where + "." + std::string(key), "expected 64 hex characters");
    return seed;
}

void uniform_at(const toml::table& t, std::string_view key, const std::string& where, worksim::Uniform& out) {
    auto* node = t.get(key);
    if (!node) return;
    auto* arr = node->as_array();
    if (!arr || arr->size() != 2) bad(where + "." + std::string(key), "expected [lo, hi]");
    auto lo = (*arr)[0].value<double>();
    auto hi = (*arr)[1].value<double>();
    if (!lo || !hi) bad(where + "." + std::string(key), "expected [lo, hi]");
    out = {*lo, *hi};
}

std::filesystem::path rel(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void parse_sim(const toml::table& t, worksim::SimConfig& s) {
    const std::string w = "sim";
    only_keys(t, w,
              {"seed", "n_exams", "p_missing_images", "p_critical", "mean_interarrival_min", "inspect_min", "read_min",
               "ticket_resolution_min", "support_pool_size", "p_voicemail", "voicemail_retry_min",
               "conference_delay_min", "request_think_min", "ack_delay_min", "endorse_s", "order_s", "commit_s",
               "token_s", "latency", "images_per_exam", "radiologists"});
    if (auto v = get<std::uint64_t>(t, "seed", w)) s.rng_seed = *v;
    if (auto v = get<std::uint32_t>(t, "n_exams", w)) s.n_exams = *v;
    if (auto v = get<double>(t, "p_missing_images", w)) s.p_missing_images = *v;
    if (auto v = get<double>(t, "p_critical", w)) s.p_critical = *v;
    if (auto v = get<double>(t, "mean_interarrival_min", w)) s.mean_interarrival_min = *v;
    uniform_at(t, "inspect_min", w, s.inspect_min);
    uniform_at(t, "read_min", w, s.read_min);
    uniform_at(t, "ticket_resolution_min", w, s.ticket_resolution_min);
    if (auto v = get<std::uint32_t>(t, "support_pool_size", w)) s.support_pool_size = *v;
    if (auto v = get<double>(t, "p_voicemail", w)) s.p_voicemail = *v;
    uniform_at(t, "voicemail_retry_min", w, s.voicemail_retry_min);
    uniform_at(t, "conference_delay_min", w, s.conference_delay_min);
    uniform_at(t, "request_think_min", w, s.request_think_min);
    uniform_at(t, "ack_delay_min", w, s.ack_delay_min);
    uniform_at(t, "endorse_s", w, s.endorse_s);
    uniform_at(t, "order_s", w, s.order_s);
    uniform_at(t, "commit_s", w, s.commit_s);
    uniform_at(t, "token_s", w, s.token_s);
    if (auto v = get<std::string>(t, "latency", w)) {
        if (*v == "modeled")
            s.latency_mode = worksim::LatencyMode::Modeled;
        else if (*v == "measured")
            s.latency_mode = worksim::LatencyMode::Measured;
        else
            bad("sim.latency", "expected \"modeled\" or \"measured\"");
    }
    if (auto v = get<std::uint32_t>(t, "images_per_exam", w)) s.images_per_exam = *v;
    if (auto v = get<std::uint32_t>(t, "radiologists", w)) s.radiologists = *v;
}

}  // namespace

Address Address::parse(const std::string& s) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos || colon == 0) bad("address", "expected host:port, got \"" + s + "\"");
    Address a;
    a.host = s.substr(0, colon);
    try {
        std::size_t used = 0;
        a.port = std::stoi(s.substr(colon + 1), &used);
        if (used != s.size() - colon - 1) throw std::invalid_argument("port");
    } catch (const std::exception&) {
        bad("address", "bad port in \"" + s + "\"");
    }
    if (a.port < 0 || a.port > 65535) bad("address", "port out of range in \"" + s + "\"");
    return a;
}

std::string Address::to_string() const { return host + ":" + std::to_string(port); }

void Config::validate() const {
    std::set<std::string> org_ids, peer_ids, user_ids, channel_ids;
    for (const auto& o : orgs) {
        if (o.id.empty()) bad("orgs", "missing id");
        if (!org_ids.insert(o.id).second) bad("orgs." + o.id, "duplicate organisation");
        for (const auto& p : o.peers)
            if (!peer_ids.insert(p).second) bad("orgs." + o.id + ".peers", "duplicate peer " + p);
    }
    bool has_ca = false;
    for (const auto& u : users) {
        if (u.id.empty()) bad("users", "missing id");
        if (!user_ids.insert(u.id).second) bad("users." + u.id, "duplicate user");
        if (!org_ids.count(u.org)) bad("users." + u.id + ".org", "unknown organisation " + u.org);
        has_ca = has_ca || u.role == identity::Role::CaAdmin;
    }
    if (!users.empty() && !has_ca) bad("users", "at least one CaAdmin is required to enroll the rest");
    for (const auto& c : channels) {
        if (c.id.empty() || c.id == identity::kSystemChannel) bad("channels", "bad channel id \"" + c.id + "\"");
        if (!channel_ids.insert(c.id).second) bad("channels." + c.id, "duplicate channel");
        for (const auto& o : c.orgs)
            if (!org_ids.count(o)) bad("channels." + c.id + ".orgs", "unknown organisation " + o);
        if (c.endorsement_threshold < 1 || c.endorsement_threshold > c.orgs.size())
            bad("channels." + c.id + ".endorsement_threshold", "must be within 1.." + std::to_string(c.orgs.size()));
    }
    if (gateway.session_ttl_seconds <= 0) bad("gateway.session_ttl_seconds", "must be positive");
    if (gateway.challenge_ttl_seconds <= 0) bad("gateway.challenge_ttl_seconds", "must be positive");
    if (gateway.alert_poll_ms <= 0) bad("gateway.alert_poll_ms", "must be positive");
    if (token_ttl_seconds == 0) bad("vault.token_ttl_seconds", "must be positive");
    if (batch.max_transactions == 0) bad("orderer.batch_max_transactions", "must be positive");
    if (batch.queue_limit == 0) bad("orderer.queue_limit", "must be positive");
    try {
        sim.validate();
    } catch (const Error& e) {
        bad("sim", e.detail());
    }
}

Config parse(std::string_view text, const std::filesystem::path& base) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << e.description() << " at line " << e.source().begin.line;
        throw Error(ErrorCode::InvalidConfig, msg.str());
    }
    only_keys(root, "config", {"deployment", "gateway", "orderer", "vault", "orgs", "channels", "users", "node", "sim"});

    Config c;
    if (auto* t = table_at(root, "deployment")) {
        only_keys(*t, "deployment", {"data_dir", "ca_seed", "ca_public_key"});
        if (auto v = get<std::string>(*t, "data_dir", "deployment")) c.data_dir = rel(base, *v);
        c.ca_seed = seed_at(*t, "ca_seed", "deployment");
        if (auto v = get<std::string>(*t, "ca_public_key", "deployment")) {
            c.ca_public_key = crypto::fixed_from_hex<32>(*v);
            if (!c.ca_public_key) bad("deployment.ca_public_key", "expected 64 hex characters");
        }
        if (c.ca_seed && !c.ca_public_key) c.ca_public_key = crypto::KeyPair::from_seed(*c.ca_seed).public_key();
    }
    if (auto* t = table_at(root, "gateway")) {
        only_keys(*t, "gateway", {"listen", "session_ttl_seconds", "challenge_ttl_seconds", "alert_poll_ms", "app_dir"});
        if (auto v = get<std::string>(*t, "listen", "gateway")) c.gateway_listen = Address::parse(*v);
        if (auto v = get<std::int64_t>(*t, "session_ttl_seconds", "gateway")) c.gateway.session_ttl_seconds = *v;
        if (auto v = get<std::int64_t>(*t, "challenge_ttl_seconds", "gateway")) c.gateway.challenge_ttl_seconds = *v;
        if (auto v = get<std::int64_t>(*t, "alert_poll_ms", "gateway")) c.gateway.alert_poll_ms = *v;
        if (auto v = get<std::string>(*t, "app_dir", "gateway")) c.app_dir = rel(base, *v);
    }
    if (auto* t = table_at(root, "orderer")) {
        only_keys(*t, "orderer",
                  {"listen", "batch_max_transactions", "batch_max_wait_ms", "queue_limit", "retry_base_ms",
                   "retry_factor", "retry_cap_ms"});
        if (auto v = get<std::string>(*t, "listen", "orderer")) c.orderer_listen = Address::parse(*v);
        if (auto v = get<std::size_t>(*t, "batch_max_transactions", "orderer")) c.batch.max_transactions = *v;
        if (auto v = get<std::int64_t>(*t, "batch_max_wait_ms", "orderer")) c.batch.max_wait_ms = *v;
        if (auto v = get<std::size_t>(*t, "queue_limit", "orderer")) c.batch.queue_limit = *v;
        if (auto v = get<std::int64_t>(*t, "retry_base_ms", "orderer")) c.retry.base_ms = *v;
        if (auto v = get<std::int64_t>(*t, "retry_factor", "orderer")) c.retry.factor = *v;
        if (auto v = get<std::int64_t>(*t, "retry_cap_ms", "orderer")) c.retry.cap_ms = *v;
    }
    if (auto* t = table_at(root, "vault")) {
        only_keys(*t, "vault", {"token_ttl_seconds"});
        if (auto v = get<std::uint64_t>(*t, "token_ttl_seconds", "vault")) c.token_ttl_seconds = *v;
    }

    auto each = [&](std::string_view key, auto&& f) {
        auto* node = root.get(key);
        if (!node) return;
        auto* arr = node->as_array();
        if (!arr) bad(std::string(key), "expected an array of tables ([[" + std::string(key) + "]])");
        std::size_t i = 0;
        for (const auto& el : *arr) {
            auto* t = el.as_table();
            if (!t) bad(std::string(key), "expected an array of tables");
            f(*t, std::string(key) + "[" + std::to_string(i++) + "]");
        }
    };
    each("orgs", [&](const toml::table& t, const std::string& w) {
        only_keys(t, w, {"id", "key_seed", "peers"});
        OrgConfig o;
        o.id = get<std::string>(t, "id", w).value_or("");
        o.key_seed = seed_at(t, "key_seed", w);
        o.peers = strings(t, "peers", w);
        c.orgs.push_back(std::move(o));
    });
    each("channels", [&](const toml::table& t, const std::string& w) {
        only_keys(t, w, {"id", "orgs", "endorsement_threshold"});
        ChannelConfig ch;
        ch.id = get<std::string>(t, "id", w).value_or("");
        ch.orgs = strings(t, "orgs", w);
        ch.endorsement_threshold = get<std::uint32_t>(t, "endorsement_threshold", w).value_or(1);
        c.channels.push_back(std::move(ch));
    });
    each("users", [&](const toml::table& t, const std::string& w) {
        only_keys(t, w, {"id", "org", "role", "seed"});
        UserConfig u;
        u.id = get<std::string>(t, "id", w).value_or("");
        u.org = get<std::string>(t, "org", w).value_or("");
        auto role = get<std::string>(t, "role", w).value_or("");
        auto parsed = identity::parse_role(role);
        if (!parsed) bad(w + ".role", "unknown role \"" + role + "\"");
        u.role = *parsed;
        u.seed = seed_at(t, "seed", w);
        c.users.push_back(std::move(u));
    });
    if (auto* t = table_at(root, "node")) {
        only_keys(*t, "node", {"peer_id", "org", "connect", "data_dir"});
        NodeConfig n;
        n.peer_id = get<std::string>(*t, "peer_id", "node").value_or("");
        n.org = get<std::string>(*t, "org", "node").value_or("");
        if (auto v = get<std::string>(*t, "connect", "node")) n.connect = Address::parse(*v);
        if (auto v = get<std::string>(*t, "data_dir", "node")) n.data_dir = rel(base, *v);
        c.node = std::move(n);
    }
    if (auto* t = table_at(root, "sim")) parse_sim(*t, c.sim);

    c.validate();
    return c;
}

Config load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::filesystem::path resolve_path(const std::optional<std::string>& cli_path) {
    if (cli_path && !cli_path->empty()) return *cli_path;
    if (const char* env = std::getenv(std::string(kConfigEnv).c_str()); env && *env) return env;
    return std::string(kDefaultConfigFile);
}

// ---------------------------------------------------------------------------
// Deployment
// ---------------------------------------------------------------------------

Deployment::Deployment(const Config& config, Clock clock) : config_(config) {
    config_.validate();
    std::optional<std::filesystem::path> ledgers;
    if (config_.data_dir) {
        ledgers = *config_.data_dir / "ledgers";
        std::error_code ec;
        if (std::filesystem::exists(*ledgers) && !std::filesystem::is_empty(*ledgers, ec))
            throw Error(ErrorCode::InvalidConfig, "data_dir " + config_.data_dir->string() +
                                                      " holds an earlier deployment; use an empty directory");
        std::filesystem::create_directories(*ledgers);
    }

    auto ca = config_.ca_seed ? crypto::KeyPair::from_seed(*config_.ca_seed) : crypto::KeyPair::generate();
    ledger::LedgerOptions sys;
    if (ledgers) sys.directory = *ledgers / "directory";
    directory_ = std::make_unique<identity::Directory>(ca, clock, sys);

    network::NetworkOptions opts;
    opts.batch = config_.batch;
    opts.retry = config_.retry;
    if (ledgers) opts.data_dir = *ledgers / "peers";
    network_ = std::make_unique<network::Network>(*directory_, opts);

    wallet_ = std::make_unique<gateway::Wallet>(config_.data_dir ? std::optional(*config_.data_dir / "wallet")
                                                                  : std::nullopt);

    for (const auto& o : config_.orgs) {
        network_->add_organization(o.id, o.key_seed ? crypto::KeyPair::from_seed(*o.key_seed)
                                                    : crypto::KeyPair::generate());
        for (const auto& p : o.peers) network_->add_peer(p, o.id);
    }

    // The first CaAdmin is bootstrapped by the root; it enrolls everyone else.
    auto key_of = [&](const UserConfig& u) {
        return u.seed ? crypto::KeyPair::from_seed(*u.seed) : crypto::KeyPair::generate();
    };
    const UserConfig* ca_admin = nullptr;
    for (const auto& u : config_.users)
        if (u.role == identity::Role::CaAdmin) {
            ca_admin = &u;
            break;
        }
    std::optional<crypto::KeyPair> admin_key;
    if (ca_admin) {
        admin_key = key_of(*ca_admin);
        directory_->bootstrap_admin(ca_admin->id, ca_admin->org, admin_key->public_key());
        wallet_->put(ca_admin->id, *admin_key);
    }
    for (const auto& u : config_.users) {
        if (&u == ca_admin) continue;
        auto key = key_of(u);
        auto sig = admin_key->sign(identity::Directory::register_request(u.id, u.org, u.role, key.public_key()));
        directory_->register_user(sig, u.id, u.org, u.role, key.public_key());
        wallet_->put(u.id, key);
    }
    for (const auto& ch : config_.channels) {
        std::set<std::string> orgs(ch.orgs.begin(), ch.orgs.end());
        auto sig = admin_key->sign(network::Network::create_channel_request(ch.id, orgs, ch.endorsement_threshold));
        network_->create_channel(sig, ch.id, orgs, ch.endorsement_threshold);
    }

    std::map<std::string, pacsvault::Vault*> vault_ptrs;
    for (const auto& o : config_.orgs) {
        if (o.peers.empty()) continue;
        pacsvault::VaultOptions vo;
        if (config_.data_dir) vo.dir = *config_.data_dir / "vault" / o.id;
        vo.ttl_seconds = config_.token_ttl_seconds;
        vo.clock = clock;
        auto v = std::make_unique<pacsvault::Vault>(*network_, o.peers.front(), vo);
        vault_ptrs[o.id] = v.get();
        vaults_[o.id] = std::move(v);
    }
    auto gopts = config_.gateway;
    gopts.clock = clock;
    gateway_ = std::make_unique<gateway::Gateway>(*network_, *wallet_, vault_ptrs, gopts);
}

Deployment::~Deployment() { stop(); }

pacsvault::Vault* Deployment::vault(const std::string& org_id) {
    auto it = vaults_.find(org_id);
    return it == vaults_.end() ? nullptr : it->second.get();
}

int Deployment::serve_http() {
    http_ = std::make_unique<gateway::HttpServer>(*gateway_);
    if (config_.app_dir) http_->mount_app(*config_.app_dir);
    return http_->start(config_.gateway_listen.host, config_.gateway_listen.port);
}

int Deployment::serve_wire() {
    if (!config_.orderer_listen) return 0;
    endpoint_ = std::make_unique<wire::Endpoint>(*network_);
    return endpoint_->start(config_.orderer_listen->host, config_.orderer_listen->port);
}

void Deployment::stop() {
    if (http_) http_->stop();
    if (endpoint_) endpoint_->stop();
}

}  // namespace radchain::config
