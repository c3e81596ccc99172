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

// HTTP/JSON doorway to the network. Users authenticate by signing a server
// challenge with their enrollment key; afterwards every request carries
// "Authorization: Bearer <session_id>".
//
// The gateway is custodial: it keeps each enrolled user's signing key in a
// Wallet and signs proposals on the session user's behalf.

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "radchain/clock.hpp"
#include "radchain/contracts.hpp"
#include "radchain/crypto.hpp"
#include "radchain/network.hpp"
#include "radchain/pacsvault.hpp"

namespace radchain::gateway {

/// Custodial key store, optionally mirrored to {dir}/{user_id}.seed (hex).
class Wallet {
public:
    explicit Wallet(std::optional<std::filesystem::path> dir = std::nullopt);

    void put(const std::string& user_id, const crypto::KeyPair& key);
    std::optional<crypto::KeyPair> get(const std::string& user_id) const;
    bool has(const std::string& user_id) const;

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mutex_;
    std::map<std::string, crypto::KeyPair> keys_;
};

struct GatewayOptions {
    std::int64_t session_ttl_seconds = 3600;
    std::int64_t challenge_ttl_seconds = 60;
    std::int64_t alert_poll_ms = 200;
    Clock clock = system_clock();
};

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::map<std::string, std::string> headers;  // lower-case names
    std::string body;
};

struct ApiResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// One committed alert for the stream, with the per-channel cursor that
/// follows it. The cursor doubles as the SSE event id.
struct AlertEvent {
    std::string id;
    std::string channel_id;
    std::uint64_t height = 0;
    std::uint32_t tx_index = 0;
    contracts::CriticalAlert alert;
};

/// Per-channel resume positions: "chan:height.index" joined by ','.
struct AlertCursor {
    std::map<std::string, std::pair<std::uint64_t, std::uint32_t>> next;  // first unseen position

    std::string encode() const;
    static AlertCursor decode(const std::string& s);
};

std::string format_sse(const AlertEvent& e);

class Gateway {
public:
    Gateway(network::Network& network, Wallet& wallet, std::map<std::string, pacsvault::Vault*> vaults,
            GatewayOptions options = {});

    /// Every endpoint except the live alert stream.
    ApiResponse handle(const ApiRequest& request);

    /// Session user for a bearer header value; nullopt when missing, expired
    /// or bound to a revoked identity.
    std::optional<std::string> authenticate(const ApiRequest& request);

    /// Committed alerts for the user after cursor, in commit order per channel.
    std::vector<AlertEvent> alerts_after(const std::string& user_id, AlertCursor& cursor) const;

    network::Network& network() noexcept { return network_; }
    const GatewayOptions& options() const noexcept { return options_; }
    void set_clock(Clock clock);

private:
    struct Session {
        std::string user_id;
        std::int64_t expires_at = 0;
    };
    struct Challenge {
        std::string user_id;
        std::int64_t expires_at = 0;
    };

    std::int64_t now() const;
    network::Client client_for(const std::string& user_id);
    std::optional<std::string> find_exam_channel(const std::string& user_id, const std::string& exam_id) const;
    std::vector<std::string> user_channels(const std::string& user_id) const;
    pacsvault::Vault* vault_holding(const std::string& exam_id) const;
    const network::Peer& reader_for(const std::string& user_id, const std::string& channel_id) const;

    ApiResponse login(const ApiRequest& r);
    ApiResponse access_request(const std::string& user, const ApiRequest& r);
    ApiResponse worklist(const std::string& user);
    ApiResponse exam(const std::string& user, const std::string& exam_id);
    ApiResponse view_link(const std::string& user, const std::string& exam_id);
    ApiResponse images(const std::string& exam_id, const ApiRequest& r);
    ApiResponse report(const std::string& user, const ApiRequest& r);
    ApiResponse ack(const std::string& user, const std::string& alert_id);
    ApiResponse audit(const std::string& user, const std::string& exam_id);
    ApiResponse keywords(const std::string& user, const ApiRequest& r);
    ApiResponse register_user(const std::string& user, const ApiRequest& r);
    ApiResponse ingest(const std::string& user, const ApiRequest& r);
    ApiResponse alerts_backlog(const std::string& user, const ApiRequest& r);

    network::Network& network_;
    Wallet& wallet_;
    std::map<std::string, pacsvault::Vault*> vaults_;  // by org
    GatewayOptions options_;

    mutable std::mutex mutex_;
    std::map<std::string, Session> sessions_;
    std::map<std::string, Challenge> challenges_;
};

/// httplib front end. Streams alerts over SSE at /v1/alerts/stream.
class HttpServer {
public:
    explicit HttpServer(Gateway& gateway);
    ~HttpServer();

    /// Bind and serve on a background thread; port 0 picks a free port.
    /// Throws BindFailure.
    int start(const std::string& host, int port);
    void stop();
    int port() const noexcept { return port_; }

    /// Serve static files under /app from dir.
    void mount_app(const std::filesystem::path& dir);

private:
    struct Impl;
    Gateway& gateway_;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
    int port_ = 0;
};

}  // namespace radchain::gateway
