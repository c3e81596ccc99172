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

// Shared fixtures: a small network with deterministic keys, plus an
// independent SHA-256 (OpenSSL) for hash oracles.

#include <openssl/sha.h>

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "radchain/contracts.hpp"
#include "radchain/crypto.hpp"
#include "radchain/identity.hpp"
#include "radchain/network.hpp"

namespace radchain::testing {

inline crypto::Hash openssl_sha256(ByteView data) {
    crypto::Hash out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

inline crypto::KeyPair key_for(const std::string& name) {
    auto h = openssl_sha256(as_bytes("seed:" + name));
    return crypto::KeyPair::from_seed(h);
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("radchain-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Directory + network with one peer per org and a bootstrap CaAdmin.
struct TestNet {
    explicit TestNet(std::vector<std::string> orgs = {"hospitalA", "telerad"}, network::NetworkOptions options = {},
                     ledger::LedgerOptions system = {})
        : directory(key_for("ca-root"), clock.clock(), system), net(directory, options) {
        for (const auto& org : orgs) {
            net.add_organization(org, key_for("org:" + org));
            net.add_peer("peer0." + org, org);
        }
        keys.emplace("ca-admin", key_for("ca-admin"));
        directory.bootstrap_admin("ca-admin", orgs.front(), keys.at("ca-admin").public_key());
    }

    network::Channel channel(const std::string& id, const std::set<std::string>& orgs, std::uint32_t t = 1) {
        auto sig = keys.at("ca-admin").sign(network::Network::create_channel_request(id, orgs, t));
        return net.create_channel(sig, id, orgs, t);
    }

    identity::EnrollmentCertificate enroll(const std::string& user, const std::string& org, identity::Role role) {
        auto key = key_for("user:" + user);
        auto sig = keys.at("ca-admin").sign(identity::Directory::register_request(user, org, role, key.public_key()));
        auto cert = directory.register_user(sig, user, org, role, key.public_key());
        keys.insert_or_assign(user, key);
        return cert;
    }

    void revoke(const std::string& user) {
        directory.revoke(keys.at("ca-admin").sign(identity::Directory::revoke_request(user)), user);
    }

    network::Client client(const std::string& user) { return network::Client(net, user, keys.at(user), clock.clock()); }

    ManualClock clock;
    identity::Directory directory;
    network::Network net;
    std::map<std::string, crypto::KeyPair> keys;
};

inline std::vector<contracts::ImageHash> fake_hashes(const std::string& exam, std::size_t n) {
    std::vector<contracts::ImageHash> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(openssl_sha256(as_bytes(exam + "/" + std::to_string(i))));
    return out;
}

inline contracts::ExamRecord exam_record(const std::string& exam, const std::string& org,
                                         const std::string& physician, std::size_t images = 3) {
    contracts::ExamRecord r;
    r.exam_id = exam;
    r.org_id = org;
    r.modality = "CT";
    r.referring_physician = physician;
    r.image_hashes = fake_hashes(exam, images);
    r.image_count = static_cast<std::uint32_t>(images);
    return r;
}

inline contracts::Nonce nonce_of(std::uint64_t v) {
    contracts::Nonce n{};
    for (int i = 7; i >= 0; --i, v >>= 8) n[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
    return n;
}

/// Teleradiology topology: hospitalA (site admin, physician) and telerad
/// (radiologist) sharing channel "teleradA".
struct Telerad : TestNet {
    Telerad() : TestNet({"hospitalA", "telerad", "hospitalB"}) {
        channel("teleradA", {"hospitalA", "telerad"});
        channel("teleradB", {"hospitalB", "telerad"});
        enroll("admin-a", "hospitalA", identity::Role::SiteAdmin);
        enroll("doc-a", "hospitalA", identity::Role::Physician);
        enroll("doc-a2", "hospitalA", identity::Role::Physician);
        enroll("rad-001", "telerad", identity::Role::Radiologist);
        enroll("support-1", "telerad", identity::Role::SupportStaff);
        enroll("admin-b", "hospitalB", identity::Role::SiteAdmin);
        enroll("doc-b", "hospitalB", identity::Role::Physician);
    }

    network::InvokeResult anchor(const std::string& exam, std::size_t images = 3, const std::string& doc = "doc-a") {
        return client("admin-a").invoke("teleradA", contracts::anchor_exam(exam_record(exam, "hospitalA", doc, images)));
    }

    crypto::Hash request(const std::string& user, const std::string& exam,
                         contracts::AccessReason reason = contracts::AccessReason::Interpretation) {
        auto r = client(user).invoke("teleradA", contracts::request_access(exam, reason, nonce_of(++nonce)));
        return contracts::AccessRequest::decode(r.response).request_id;
    }

    contracts::AccessRequest evaluate(const std::string& user, const crypto::Hash& request_id) {
        auto r = client(user).invoke("teleradA", contracts::evaluate_access(request_id));
        return contracts::AccessRequest::decode(r.response);
    }

    void grant(const std::string& user, const std::string& exam) { evaluate(user, request(user, exam)); }

    std::uint64_t nonce = 0;
};

}  // namespace radchain::testing
