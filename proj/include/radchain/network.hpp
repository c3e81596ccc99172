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

// Permissioned peer network: endorsing peers per organisation, a single
// ordering service, and channels that partition ledgers between member
// organisations.
//
// Transaction flow:
//   client signs Proposal -> peers simulate and sign Endorsements ->
//   client seals Transaction -> Orderer checks policy, queues, cuts Block ->
//   Block delivered to every channel peer -> peer validates and commits.
//
// The in-process Network drives delivery on a millisecond clock supplied by
// the caller, so tests can run it on virtual time with injected delays,
// drops and gaps.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "radchain/contracts.hpp"
#include "radchain/crypto.hpp"
#include "radchain/identity.hpp"
#include "radchain/ledger.hpp"

namespace radchain::network {

struct Channel {
    std::string channel_id;
    std::set<std::string> member_orgs;
    std::uint32_t endorsement_threshold = 1;

    bool operator==(const Channel&) const = default;
};

/// A client-signed transaction draft. draft.read_set/write_set are empty.
struct Proposal {
    ledger::Transaction draft;
    crypto::Signature signature{};  // creator over draft.proposal_preimage()

    Bytes encode() const;
    static Proposal decode(ByteView bytes);
};

struct Endorsement {
    std::string peer_id;
    std::string org_id;
    std::vector<ledger::ReadEntry> read_set;
    std::vector<ledger::WriteEntry> write_set;
    Bytes response;
    crypto::Signature signature{};  // org key over signed_bytes()

    /// Proposal preimage followed by the simulated read and write sets.
    static Bytes signed_bytes(const ledger::Transaction& draft, const std::vector<ledger::ReadEntry>& reads,
                              const std::vector<ledger::WriteEntry>& writes);
    Bytes rw_bytes() const;

    Bytes encode() const;
    static Endorsement decode(Decoder& dec);
    static Endorsement decode(ByteView bytes);
    bool operator==(const Endorsement&) const = default;
};

enum class RejectReason : std::uint8_t { BadSignature, Unauthorized, ContractError, NotJoined };

std::string_view to_string(RejectReason r) noexcept;

struct Rejection {
    RejectReason reason = RejectReason::ContractError;
    ErrorCode code = ErrorCode::ContractError;
    std::string detail;
};

using EndorseResult = std::variant<Endorsement, Rejection>;

enum class DeliveryStatus : std::uint8_t { Committed, Duplicate, GapDetected, HashMismatch, NotJoined };

struct DeliveryResult {
    DeliveryStatus status = DeliveryStatus::Committed;
    std::uint64_t expected_height = 0;  // for GapDetected
};

struct BatchConfig {
    std::size_t max_transactions = 10;
    std::int64_t max_wait_ms = 500;
    std::size_t queue_limit = 10'000;
};

struct RetryPolicy {
    std::int64_t base_ms = 50;
    std::int64_t factor = 2;
    std::int64_t cap_ms = 2'000;

    std::int64_t delay(std::uint32_t attempt) const noexcept;
};

/// Endorsement verification keys by organisation.
using OrgKeys = std::map<std::string, crypto::PublicKey>;

class Peer {
public:
    Peer(std::string peer_id, std::string org_id, crypto::KeyPair org_key, const identity::Directory& directory,
         std::optional<std::filesystem::path> data_dir = std::nullopt, std::uint64_t snapshot_interval = 8);

    const std::string& peer_id() const noexcept { return peer_id_; }
    const std::string& org_id() const noexcept { return org_id_; }

    void join(const std::string& channel_id);
    bool joined(const std::string& channel_id) const;
    std::set<std::string> channels() const;

    /// Simulate against the local state and sign the result. Never commits.
    EndorseResult endorse(const Proposal& proposal) const;

    DeliveryResult deliver(const std::string& channel_id, const ledger::Block& block);

    ledger::Ledger& ledger(const std::string& channel_id);
    const ledger::Ledger& ledger(const std::string& channel_id) const;

private:
    std::string peer_id_;
    std::string org_id_;
    crypto::KeyPair org_key_;
    const identity::Directory& directory_;
    std::optional<std::filesystem::path> data_dir_;
    std::uint64_t snapshot_interval_;
    std::map<std::string, std::unique_ptr<ledger::Ledger>> ledgers_;
};

/// Single sequencer. FIFO by arrival, ties broken by ascending tx_id.
class Orderer {
public:
    explicit Orderer(BatchConfig config = {});

    void add_channel(const Channel& channel);
    void set_org_key(const std::string& org_id, const crypto::PublicKey& key);
    bool has_channel(const std::string& channel_id) const;
    const Channel& channel(const std::string& channel_id) const;

    /// Check the endorsement policy and enqueue. Throws InsufficientEndorsements,
    /// MismatchedWriteSets, Backpressure or UnknownChannel.
    crypto::Hash submit(const ledger::Transaction& tx, const std::vector<Endorsement>& endorsements,
                        std::int64_t arrival_ms);

    /// Cut every block that is due at now_ms (or all pending when forced).
    std::vector<std::pair<std::string, ledger::Block>> cut(std::int64_t now_ms, bool force = false);
    /// Earliest time at which a pending batch times out, if any.
    std::optional<std::int64_t> next_deadline() const;
    std::size_t pending() const;

    std::uint64_t next_height(const std::string& channel_id) const;
    std::map<std::string, std::uint64_t> next_heights() const;
    const std::vector<ledger::Block>& blocks(const std::string& channel_id) const;

private:
    struct Pending {
        std::int64_t arrival_ms;
        ledger::Transaction tx;
    };
    struct ChannelState {
        Channel channel;
        std::vector<Pending> queue;  // kept sorted by (arrival, tx_id)
        std::vector<ledger::Block> blocks;
    };
    ledger::Block cut_one(ChannelState& state, std::size_t count);

    BatchConfig config_;
    OrgKeys org_keys_;
    std::map<std::string, ChannelState> channels_;
};

/// Outcome of one delivery attempt, decided by the test harness.
struct DeliveryPlan {
    bool drop = false;
    std::int64_t delay_ms = 0;
};
using DeliveryModel = std::function<DeliveryPlan(const std::string& peer_id, const std::string& channel_id,
                                                 std::uint64_t height, std::uint32_t attempt)>;

struct CommitRecord {
    std::string channel_id;
    std::uint64_t height = 0;
    std::uint32_t tx_index = 0;
    ledger::Validity validity = ledger::Validity::Valid;
};

struct NetworkOptions {
    BatchConfig batch;
    RetryPolicy retry;
    std::optional<std::filesystem::path> data_dir;  // per-peer ledgers under data_dir/<peer_id>
    std::uint64_t snapshot_interval = 8;
};

class Network {
public:
    explicit Network(identity::Directory& directory, NetworkOptions options = {});

    identity::Directory& directory() noexcept { return directory_; }
    const identity::Directory& directory() const noexcept { return directory_; }

    void add_organization(const std::string& org_id, crypto::KeyPair org_key);
    Peer& add_peer(const std::string& peer_id, const std::string& org_id);

    static Bytes create_channel_request(const std::string& channel_id, const std::set<std::string>& member_orgs,
                                        std::uint32_t endorsement_threshold);
    /// admin_signature: a CaAdmin's signature over create_channel_request(...).
    Channel create_channel(const crypto::Signature& admin_signature, const std::string& channel_id,
                           const std::set<std::string>& member_orgs, std::uint32_t endorsement_threshold);

    EndorseResult endorse(const std::string& peer_id, const Proposal& proposal);
    crypto::Hash submit_for_ordering(const ledger::Transaction& tx, const std::vector<Endorsement>& endorsements);

    /// Advance the network clock, cutting due blocks and delivering due messages.
    void advance_to(std::int64_t now_ms);
    /// Run until the orderer queue is empty and every delivery is acknowledged,
    /// jumping the clock from event to event.
    void settle();
    /// Cut everything pending now and deliver it (honouring the delivery model).
    void flush();
    std::int64_t now_ms() const;

    void set_delivery_model(DeliveryModel model);

    Peer& peer(const std::string& peer_id);
    const Peer& peer(const std::string& peer_id) const;
    std::vector<std::string> peer_ids() const;
    std::vector<std::string> peers_on(const std::string& channel_id) const;
    std::vector<Channel> channels() const;
    const Channel& channel(const std::string& channel_id) const;
    const Orderer& orderer() const noexcept { return orderer_; }
    std::optional<crypto::PublicKey> org_key(const std::string& org_id) const;

    std::optional<CommitRecord> commit_of(const crypto::Hash& tx_id) const;
    /// Commit record as seen by one specific peer.
    std::optional<CommitRecord> commit_on(const std::string& peer_id, const crypto::Hash& tx_id) const;

    /// Membership-gated world-state read from a peer's replica.
    std::optional<ledger::StateEntry> query(const std::string& user_id, const std::string& channel_id,
                                            const std::string& key) const;

    struct Stats {
        std::uint64_t deliveries = 0;
        std::uint64_t drops = 0;
        std::uint64_t gaps = 0;
        std::uint64_t retries = 0;
    };
    Stats stats() const;

    /// Serialises compound operations from concurrent callers.
    std::recursive_mutex& mutex() noexcept { return mutex_; }

private:
    enum class EventKind : std::uint8_t { Arrive, Retry };
    struct Event {
        EventKind kind;
        std::int64_t due_ms;
        std::uint64_t seq;
        std::string peer_id;
        std::string channel_id;
        std::uint64_t height;
        std::uint32_t attempt;
        bool operator>(const Event& o) const { return std::tie(due_ms, seq) > std::tie(o.due_ms, o.seq); }
    };

    void broadcast(const std::string& channel_id, const ledger::Block& block);
    void schedule(const std::string& peer_id, const std::string& channel_id, std::uint64_t height,
                  std::uint32_t attempt, std::int64_t earliest_ms);
    void process(const Event& ev);
    void cut_due(bool force);
    void record_commit(const std::string& peer_id, const std::string& channel_id, const ledger::Block& block);

    identity::Directory& directory_;
    NetworkOptions options_;
    Orderer orderer_;
    std::map<std::string, crypto::KeyPair> org_keys_;
    std::map<std::string, std::unique_ptr<Peer>> peers_;
    DeliveryModel delivery_model_;

    std::int64_t now_ms_ = 0;
    std::uint64_t seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::set<std::tuple<std::string, std::string, std::uint64_t>> outstanding_;  // (peer, channel, height)
    std::map<crypto::Hash, CommitRecord> commits_;
    std::map<std::string, std::map<crypto::Hash, CommitRecord>> peer_commits_;
    Stats stats_;
    mutable std::recursive_mutex mutex_;
};

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

struct InvokeResult {
    crypto::Hash tx_id{};
    CommitRecord commit;
    Bytes response;
};

/// Signs proposals and transactions for one enrolled user and drives them
/// through endorsement, ordering and commit.
class Client {
public:
    Client(Network& network, std::string user_id, crypto::KeyPair key, Clock clock = system_clock());

    const std::string& user_id() const noexcept { return user_id_; }
    Network& network() noexcept { return network_; }

    Proposal make_proposal(const std::string& channel_id, const contracts::Draft& draft) const;

    /// Collect endorsements to threshold, seal, order, flush and wait for the
    /// commit. Throws the contract's error on rejection and
    /// TransactionInvalidated if the committed flag is not Valid.
    InvokeResult invoke(const std::string& channel_id, const contracts::Draft& draft);

    /// Endorse and seal without submitting.
    std::pair<ledger::Transaction, std::vector<Endorsement>> prepare(const std::string& channel_id,
                                                                    const contracts::Draft& draft);
    /// Reseal with this client's key. Used to assemble transactions from endorsements.
    ledger::Transaction seal(const Proposal& proposal, const Endorsement& endorsement) const;

    std::optional<ledger::StateEntry> query(const std::string& channel_id, const std::string& key) const;

    void set_clock(Clock clock) { clock_ = std::move(clock); }

private:
    Network& network_;
    std::string user_id_;
    crypto::KeyPair key_;
    Clock clock_;
};

}  // namespace radchain::network
