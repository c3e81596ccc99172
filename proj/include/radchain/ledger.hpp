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

// Hash-chained block store for one channel plus the world state derived
// from its valid transactions.
//
// Persisted layout, one file per channel:
//
//   <channel>.blocks  sequence of [u32 length | canonical block | u32 crc32(block)]
//   <channel>.state   snapshot [u32 length | u64 blocks covered | tip hash | state | u32 crc32]
//
// The block file is the source of truth. The snapshot only shortens
// recovery; a missing or stale snapshot is rebuilt by replaying blocks.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radchain/codec.hpp"
#include "radchain/crypto.hpp"

namespace radchain::ledger {

enum class ContractKind : std::uint8_t { Identity = 0, Access = 1, Report = 2, Anchor = 3 };

enum class Validity : std::uint8_t { Valid = 0, StaleRead = 1, BadSignature = 2, Unauthorized = 3 };

std::string_view to_string(ContractKind kind) noexcept;
std::string_view to_string(Validity validity) noexcept;

/// Position of a committed write: block height and index within the block.
struct Version {
    std::uint64_t height = 0;
    std::uint32_t tx_index = 0;

    auto operator<=>(const Version&) const = default;
};

struct ReadEntry {
    std::string key;
    std::optional<Version> version;  // nullopt: key was absent when read

    bool operator==(const ReadEntry&) const = default;
};

struct WriteEntry {
    std::string key;
    Bytes value;

    bool operator==(const WriteEntry&) const = default;
};

void encode_read_set(Encoder& enc, const std::vector<ReadEntry>& reads);
void encode_write_set(Encoder& enc, const std::vector<WriteEntry>& writes);
std::vector<ReadEntry> decode_read_set(Decoder& dec);
std::vector<WriteEntry> decode_write_set(Decoder& dec);

struct Transaction {
    crypto::Hash tx_id{};
    std::string channel_id;
    ContractKind contract = ContractKind::Access;
    std::string operation;
    std::vector<Bytes> args;
    std::string creator;
    crypto::Signature creator_signature{};
    std::vector<ReadEntry> read_set;
    std::vector<WriteEntry> write_set;
    std::int64_t proposal_time = 0;

    /// Every field except tx_id and creator_signature, in declared order.
    /// Both the id and the creator signature are computed over these bytes.
    Bytes signing_preimage() const;
    /// The proposal part only (no read/write sets): what a client signs
    /// before endorsement.
    Bytes proposal_preimage() const;
    crypto::Hash compute_id() const;
    /// Fill tx_id and creator_signature.
    void seal(const crypto::KeyPair& creator_key);

    Bytes encode() const;
    static Transaction decode(Decoder& dec);
    static Transaction decode(ByteView bytes);

    bool operator==(const Transaction&) const = default;
};

struct BlockHeader {
    std::uint64_t height = 0;
    crypto::Hash previous_hash{};
    crypto::Hash data_hash{};
    crypto::Hash block_hash{};

    crypto::Hash compute_hash() const;

    bool operator==(const BlockHeader&) const = default;
};

struct Block {
    BlockHeader header;
    std::vector<Transaction> transactions;
    std::vector<Validity> validity_flags;

    /// Hash over the transaction sequence only; validity flags are
    /// post-validation metadata and are not covered.
    static crypto::Hash data_hash_of(const std::vector<Transaction>& txs);
    /// Unvalidated block linked to the given predecessor (flags empty).
    static Block make(std::uint64_t height, const crypto::Hash& previous_hash, std::vector<Transaction> txs);

    Bytes encode() const;
    static Block decode(ByteView bytes);

    bool operator==(const Block&) const = default;
};

struct StateEntry {
    Bytes value;
    Version version;

    bool operator==(const StateEntry&) const = default;
};

class WorldState {
public:
    std::optional<StateEntry> get(const std::string& key) const;
    void put(std::string key, StateEntry entry) { entries_[std::move(key)] = std::move(entry); }
    const std::map<std::string, StateEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// Sorted-key canonical serialisation; two states are equal iff these bytes are.
    Bytes canonical() const;
    static WorldState decode(ByteView bytes);

    bool operator==(const WorldState&) const = default;

private:
    std::map<std::string, StateEntry> entries_;
};

/// Apply the valid transactions of one validated block.
void apply_block(WorldState& state, const Block& block);

/// State obtained by applying every block from genesis, trusting stored flags.
WorldState replay(const std::vector<Block>& blocks);

struct HistoryEntry {
    crypto::Hash tx_id{};
    Bytes value;
    std::uint64_t height = 0;
    std::uint32_t tx_index = 0;

    bool operator==(const HistoryEntry&) const = default;
};

/// Signature and authorization check applied to every transaction at commit.
class TxVerifier {
public:
    virtual ~TxVerifier() = default;
    /// Returns Valid, BadSignature or Unauthorized. Must be a pure function of
    /// the transaction, the block height and committed membership state.
    virtual Validity verify(const Transaction& tx, std::uint64_t height) const = 0;
};

/// Accepts any transaction whose tx_id recomputes. Useful for standalone stores.
class IdOnlyVerifier final : public TxVerifier {
public:
    Validity verify(const Transaction& tx, std::uint64_t height) const override;
};

/// Flags for one batch, given the state before it. Flag computation is
/// shared by leaders and followers so both arrive at the same answer.
std::vector<Validity> validate_batch(const WorldState& state, const std::vector<Transaction>& txs,
                                     std::uint64_t height, const TxVerifier& verifier);

struct ChainStatus {
    bool ok = true;
    std::uint64_t corrupt_height = 0;

    static ChainStatus good() { return {}; }
    static ChainStatus corrupt(std::uint64_t h) { return {false, h}; }
    bool operator==(const ChainStatus&) const = default;
};

/// Recompute every header and data hash and check the previous-hash links.
ChainStatus verify_blocks(const std::vector<Block>& blocks);

/// Frame-level scan of a block file: CRC, framing and decoding, followed by
/// the same hash checks as verify_blocks. A record that fails any check
/// reports its own index as the corrupt height.
ChainStatus verify_block_file(const std::filesystem::path& path);

struct BlockFileContents {
    std::vector<Block> blocks;
    std::optional<std::uint64_t> corrupt_offset;  // start of the first bad record
};

BlockFileContents read_block_file(const std::filesystem::path& path);
Bytes frame_block(const Block& block);

/// Where a simulated crash is raised inside commit.
enum class FaultPoint : std::uint8_t {
    None,
    BeforePersist,          // I/O failure while writing the block record
    AfterPersist,           // block durable, world state not yet updated
    AfterStateBeforeSnapshot,
};

/// Thrown by fault injection; the Ledger instance must be discarded.
struct SimulatedCrash : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LedgerOptions {
    std::optional<std::filesystem::path> directory;  // nullopt: memory only
    std::uint64_t snapshot_interval = 8;             // blocks between state snapshots
};

using CommitListener = std::function<void(const Block&)>;

class Ledger {
public:
    Ledger(std::string channel_id, const TxVerifier& verifier, LedgerOptions options = {});

    Ledger(const Ledger&) = delete;
    Ledger& operator=(const Ledger&) = delete;

    const std::string& channel_id() const noexcept { return channel_id_; }

    /// Link, validate, persist and apply a new block built from the batch.
    Block append_block(std::vector<Transaction> ordered_txs);

    /// Follower path: the block must extend the tip. Flags carried by the
    /// incoming block are ignored and recomputed locally.
    Block commit_block(const Block& incoming);

    std::optional<StateEntry> query_state(const std::string& key) const;
    std::vector<HistoryEntry> get_history(const std::string& key) const;
    std::vector<std::pair<std::string, StateEntry>> scan(std::string_view prefix) const;

    ChainStatus verify_chain() const;

    /// Reload blocks (and snapshot) from disk and recompute the state.
    WorldState rebuild_state();

    std::uint64_t height() const;  // number of committed blocks
    std::optional<BlockHeader> tip() const;
    Block block_at(std::uint64_t height) const;
    std::vector<Block> blocks() const;
    WorldState snapshot() const;
    Bytes canonical_state() const;

    /// Run f(const WorldState&) under the read lock.
    template <typename F>
    decltype(auto) with_state(F&& f) const {
        std::shared_lock lock(mutex_);
        return std::forward<F>(f)(state_);
    }

    void inject_fault(FaultPoint point) noexcept { fault_ = point; }
    void on_commit(CommitListener listener);

    std::filesystem::path block_file() const;
    std::filesystem::path snapshot_file() const;

private:
    Block commit_locked(Block block);
    void persist(const Block& block);
    void write_snapshot();
    void load_from_disk();
    void index_block(const Block& block);

    std::string channel_id_;
    const TxVerifier& verifier_;
    LedgerOptions options_;
    FaultPoint fault_ = FaultPoint::None;

    mutable std::shared_mutex mutex_;
    std::mutex commit_mutex_;  // single committer
    std::vector<Block> blocks_;
    WorldState state_;
    std::map<std::string, std::vector<HistoryEntry>> history_;
    std::vector<CommitListener> listeners_;
};

}  // namespace radchain::ledger
