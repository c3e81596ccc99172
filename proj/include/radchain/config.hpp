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

// TOML deployment file and the process that boots from it.
//
// One "deployment" process hosts the directory, the ordering service, every
// configured peer, the site vaults and the gateway. Follower peers in other
// processes attach through the [orderer] TCP endpoint.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "radchain/gateway.hpp"
#include "radchain/network.hpp"
#include "radchain/pacsvault.hpp"
#include "radchain/wire.hpp"
#include "radchain/worksim.hpp"

namespace radchain::config {

inline constexpr std::string_view kConfigEnv = "RADCHAIN_CONFIG";
inline constexpr std::string_view kDefaultConfigFile = "radchain.toml";

struct Address {
    std::string host = "127.0.0.1";
    int port = 0;

    /// "host:port"; throws InvalidConfig.
    static Address parse(const std::string& s);
    std::string to_string() const;
};

struct OrgConfig {
    std::string id;
    std::optional<crypto::Seed> key_seed;  // generated when absent
    std::vector<std::string> peers;
};

struct ChannelConfig {
    std::string id;
    std::vector<std::string> orgs;
    std::uint32_t endorsement_threshold = 1;
};

struct UserConfig {
    std::string id;
    std::string org;
    identity::Role role = identity::Role::Radiologist;
    std::optional<crypto::Seed> seed;  // generated and kept in the wallet when absent
};

struct NodeConfig {
    std::string peer_id;
    std::string org;
    Address connect;
    std::optional<std::filesystem::path> data_dir;
};

struct Config {
    std::optional<std::filesystem::path> data_dir;
    std::optional<crypto::Seed> ca_seed;
    std::optional<crypto::PublicKey> ca_public_key;

    Address gateway_listen{"127.0.0.1", 8080};
    gateway::GatewayOptions gateway;
    std::optional<std::filesystem::path> app_dir;

    std::optional<Address> orderer_listen;
    network::BatchConfig batch;
    network::RetryPolicy retry;

    std::uint64_t token_ttl_seconds = pacsvault::kDefaultTtlSeconds;

    std::vector<OrgConfig> orgs;
    std::vector<ChannelConfig> channels;
    std::vector<UserConfig> users;
    std::optional<NodeConfig> node;
    worksim::SimConfig sim;

    /// Structural checks; throws InvalidConfig.
    void validate() const;
};

/// Parse TOML text; throws InvalidConfig naming the offending key.
Config parse(std::string_view toml_text, const std::filesystem::path& base_dir = ".");
Config load(const std::filesystem::path& path);

/// --config if given, else $RADCHAIN_CONFIG, else ./radchain.toml.
std::filesystem::path resolve_path(const std::optional<std::string>& cli_path);

/// Everything one deployment process hosts.
class Deployment {
public:
    /// Boots a fresh deployment. A data_dir that already holds ledgers is
    /// refused with InvalidConfig.
    explicit Deployment(const Config& config, Clock clock = system_clock());
    ~Deployment();

    identity::Directory& directory() noexcept { return *directory_; }
    network::Network& network() noexcept { return *network_; }
    gateway::Wallet& wallet() noexcept { return *wallet_; }
    gateway::Gateway& gateway() noexcept { return *gateway_; }
    pacsvault::Vault* vault(const std::string& org_id);
    const Config& config() const noexcept { return config_; }

    /// Start the HTTP gateway; returns the bound port.
    int serve_http();
    /// Start the TCP endpoint if [orderer] listen is set; returns the bound port or 0.
    int serve_wire();
    void stop();

private:
    Config config_;
    std::unique_ptr<identity::Directory> directory_;
    std::unique_ptr<network::Network> network_;
    std::unique_ptr<gateway::Wallet> wallet_;
    std::map<std::string, std::unique_ptr<pacsvault::Vault>> vaults_;
    std::unique_ptr<gateway::Gateway> gateway_;
    std::unique_ptr<gateway::HttpServer> http_;
    std::unique_ptr<wire::Endpoint> endpoint_;
};

}  // namespace radchain::config
