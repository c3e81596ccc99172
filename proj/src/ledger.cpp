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

#include "radchain/ledger.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

namespace radchain::ledger {

std::string_view to_string(ContractKind kind) noexcept {
    switch (kind) {
        case ContractKind::Identity: return "Identity";
        case ContractKind::Access: return "Access";
        case ContractKind::Report: return "Report";
        case ContractKind::Anchor: return "Anchor";
    }
    return "?";
}

std::string_view to_string(Validity validity) noexcept {
    switch (validity) {
        case Validity::Valid: return "Valid";
        case Validity::StaleRead: return "StaleRead";
        case Validity::BadSignature: return "BadSignature";
        case Validity::Unauthorized: return "Unauthorized";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Canonical encodings
// ---------------------------------------------------------------------------

void encode_read_set(Encoder& enc, const std::vector<ReadEntry>& reads) {
    enc.count(reads.size());
    for (const auto& r : reads) {
        enc.str(r.key);
        enc.boolean(r.version.has_value());
        if (r.version) enc.u64(r.version->height).u32(r.version->tx_index);
    }
}

void encode_write_set(Encoder& enc, const std::vector<WriteEntry>& writes) {
    enc.count(writes.size());
    for (const auto& w : writes) enc.str(w.key).blob(w.value);
}

std::vector<ReadEntry> decode_read_set(Decoder& dec) {
    std::vector<ReadEntry> reads(dec.count(5));
    for (auto& r : reads) {
        r.key = dec.str();
        if (dec.boolean()) {
            Version v;
            v.height = dec.u64();
            v.tx_index = dec.u32();
            r.version = v;
        }
    }
    return reads;
}

std::vector<WriteEntry> decode_write_set(Decoder& dec) {
    std::vector<WriteEntry> writes(dec.count(8));
    for (auto& w : writes) {
        w.key = dec.str();
        w.value = dec.blob();
    }
    return writes;
}

namespace {

void encode_proposal_fields(Encoder& enc, const Transaction& tx) {
    enc.str(tx.channel_id).u8(static_cast<std::uint8_t>(tx.contract)).str(tx.operation);
    enc.count(tx.args.size());
    for (const auto& a : tx.args) enc.blob(a);
    enc.str(tx.creator);
}

ContractKind decode_contract(std::uint8_t v) {
    if (v > static_cast<std::uint8_t>(ContractKind::Anchor))
        throw Error(ErrorCode::MalformedEncoding, "contract kind out of range");
    return static_cast<ContractKind>(v);
}

Validity decode_validity(std::uint8_t v) {
    if (v > static_cast<std::uint8_t>(Validity::Unauthorized))
        throw Error(ErrorCode::MalformedEncoding, "validity flag out of range");
    return static_cast<Validity>(v);
}

}  // namespace

Bytes Transaction::signing_preimage() const {
    Encoder enc;
    encode_proposal_fields(enc, *this);
    encode_read_set(enc, read_set);
    encode_write_set(enc, write_set);
    enc.i64(proposal_time);
    return std::move(enc).bytes();
}

Bytes Transaction::proposal_preimage() const {
    Encoder enc;
    encode_proposal_fields(enc, *this);
    enc.i64(proposal_time);
    return std::move(enc).bytes();
}

crypto::Hash Transaction::compute_id() const { return crypto::sha256(signing_preimage()); }

void Transaction::seal(const crypto::KeyPair& creator_key) {
    auto preimage = signing_preimage();
    tx_id = crypto::sha256(preimage);
    creator_signature = creator_key.sign(preimage);
}

Bytes Transaction::encode() const {
    Encoder enc;
    enc.raw(tx_id);
    encode_proposal_fields(enc, *this);
    enc.raw(creator_signature);
    encode_read_set(enc, read_set);
    encode_write_set(enc, write_set);
    enc.i64(proposal_time);
    return std::move(enc).bytes();
}

Transaction Transaction::decode(Decoder& dec) {
    Transaction tx;
    tx.tx_id = dec.fixed<32>();
    tx.channel_id = dec.str();
    tx.contract = decode_contract(dec.u8());
    tx.operation = dec.str();
    tx.args.resize(dec.count(4));
    for (auto& a : tx.args) a = dec.blob();
    tx.creator = dec.str();
    tx.creator_signature = dec.fixed<64>();
    tx.read_set = decode_read_set(dec);
    tx.write_set = decode_write_set(dec);
    tx.proposal_time = dec.i64();
    return tx;
}

Transaction Transaction::decode(ByteView bytes) {
    Decoder dec(bytes);
    auto tx = decode(dec);
    dec.expect_done();
    return tx;
}

crypto::Hash BlockHeader::compute_hash() const {
    Encoder enc;
    enc.u64(height).raw(previous_hash).raw(data_hash);
    return crypto::sha256(enc.bytes());
}

crypto::Hash Block::data_hash_of(const std::vector<Transaction>& txs) {
    Encoder enc;
    enc.count(txs.size());
    for (const auto& tx : txs) enc.blob(tx.encode());
    return crypto::sha256(enc.bytes());
}

Block Block::make(std::uint64_t height, const crypto::Hash& previous_hash, std::vector<Transaction> txs) {
    Block b;
    b.header.height = height;
    b.header.previous_hash = previous_hash;
    b.header.data_hash = data_hash_of(txs);
    b.header.block_hash = b.header.compute_hash();
    b.transactions = std::move(txs);
    return b;
}

Bytes Block::encode() const {
    Encoder enc;
    enc.u64(header.height).raw(header.previous_hash).raw(header.data_hash).raw(header.block_hash);
    enc.count(transactions.size());
    for (const auto& tx : transactions) enc.blob(tx.encode());
    enc.count(validity_flags.size());
    for (auto f : validity_flags) enc.u8(static_cast<std::uint8_t>(f));
    return std::move(enc).bytes();
}

Block Block::decode(ByteView bytes) {
    Decoder dec(bytes);
    Block b;
    b.header.height = dec.u64();
    b.header.previous_hash = dec.fixed<32>();
    b.header.data_hash = dec.fixed<32>();
    b.header.block_hash = dec.fixed<32>();
    b.transactions.resize(dec.count(4));
    for (auto& tx : b.transactions) {
        auto raw = dec.blob();
        tx = Transaction::decode(raw);
    }
    b.validity_flags.resize(dec.count(1));
    for (auto& f : b.validity_flags) f = decode_validity(dec.u8());
    dec.expect_done();
    return b;
}

// ---------------------------------------------------------------------------
// World state
// ---------------------------------------------------------------------------

std::optional<StateEntry> WorldState::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

Bytes WorldState::canonical() const {
    Encoder enc;
    enc.count(entries_.size());
    for (const auto& [key, entry] : entries_)
        enc.str(key).blob(entry.value).u64(entry.version.height).u32(entry.version.tx_index);
    return std::move(enc).bytes();
}

WorldState WorldState::decode(ByteView bytes) {
    Decoder dec(bytes);
    WorldState s;
    auto n = dec.count(20);
    for (std::size_t i = 0; i < n; ++i) {
        auto key = dec.str();
        StateEntry e;
        e.value = dec.blob();
        e.version.height = dec.u64();
        e.version.tx_index = dec.u32();
        s.put(std::move(key), std::move(e));
    }
    dec.expect_done();
    return s;
}

void apply_block(WorldState& state, const Block& block) {
    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        if (i >= block.validity_flags.size() || block.validity_flags[i] != Validity::Valid) continue;
        Version v{block.header.height, static_cast<std::uint32_t>(i)};
        for (const auto& w : block.transactions[i].write_set) state.put(w.key, StateEntry{w.value, v});
    }
}

WorldState replay(const std::vector<Block>& blocks) {
    WorldState state;
    for (const auto& b : blocks) apply_block(state, b);
    return state;
}

namespace {

/// Transactions addressed to another channel never validate here.
class ChannelGuard final : public TxVerifier {
public:
    ChannelGuard(const TxVerifier& inner, const std::string& channel) : inner_(inner), channel_(channel) {}
    Validity verify(const Transaction& tx, std::uint64_t height) const override {
        return tx.channel_id == channel_ ? inner_.verify(tx, height) : Validity::Unauthorized;
    }

private:
    const TxVerifier& inner_;
    const std::string& channel_;
};

}  // namespace

Validity IdOnlyVerifier::verify(const Transaction& tx, std::uint64_t) const {
    return tx.compute_id() == tx.tx_id ? Validity::Valid : Validity::BadSignature;
}

std::vector<Validity> validate_batch(const WorldState& state, const std::vector<Transaction>& txs,
                                     std::uint64_t height, const TxVerifier& verifier) {
    std::vector<Validity> flags;
    flags.reserve(txs.size());
    std::map<std::string, Version> block_writes;
    auto current_version = [&](const std::string& key) -> std::optional<Version> {
        if (auto it = block_writes.find(key); it != block_writes.end()) return it->second;
        if (auto e = state.get(key)) return e->version;
        return std::nullopt;
    };
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const auto& tx = txs[i];
        auto flag = verifier.verify(tx, height);
        if (flag == Validity::Valid) {
            for (const auto& r : tx.read_set) {
                if (current_version(r.key) != r.version) {
                    flag = Validity::StaleRead;
                    break;
                }
            }
        }
        if (flag == Validity::Valid) {
            Version v{height, static_cast<std::uint32_t>(i)};
            for (const auto& w : tx.write_set) block_writes[w.key] = v;
        }
        flags.push_back(flag);
    }
    return flags;
}

// ---------------------------------------------------------------------------
// Chain verification and block files
// ---------------------------------------------------------------------------

namespace {

bool block_consistent(const Block& b, std::uint64_t expected_height, const crypto::Hash& expected_previous) {
    return b.header.height == expected_height && b.header.previous_hash == expected_previous &&
           b.header.data_hash == Block::data_hash_of(b.transactions) &&
           b.header.block_hash == b.header.compute_hash();
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t load_u32(const Bytes& data, std::size_t offset) {
    return (std::uint32_t{data[offset]} << 24) | (std::uint32_t{data[offset + 1]} << 16) |
           (std::uint32_t{data[offset + 2]} << 8) | std::uint32_t{data[offset + 3]};
}

struct ScannedRecord {
    std::uint64_t offset;
    Block block;
};

// Framing + CRC + decode. Stops at the first unreadable record.
std::pair<std::vector<ScannedRecord>, std::optional<std::uint64_t>> scan_records(const Bytes& data) {
    std::vector<ScannedRecord> records;
    std::size_t offset = 0;
    while (offset < data.size()) {
        if (data.size() - offset < 4) return {std::move(records), offset};
        auto len = load_u32(data, offset);
        if (data.size() - offset - 4 < std::uint64_t{len} + 4) return {std::move(records), offset};
        ByteView body(data.data() + offset + 4, len);
        if (crypto::crc32(body) != load_u32(data, offset + 4 + len)) return {std::move(records), offset};
        try {
            records.push_back({offset, Block::decode(body)});
        } catch (const Error&) {
            return {std::move(records), offset};
        }
        offset += 8 + std::size_t{len};
    }
    return {std::move(records), std::nullopt};
}

}  // namespace

ChainStatus verify_blocks(const std::vector<Block>& blocks) {
    crypto::Hash previous = crypto::kZeroHash;
    for (std::uint64_t i = 0; i < blocks.size(); ++i) {
        if (!block_consistent(blocks[i], i, previous)) return ChainStatus::corrupt(i);
        previous = blocks[i].header.block_hash;
    }
    return ChainStatus::good();
}

ChainStatus verify_block_file(const std::filesystem::path& path) {
    auto data = read_file(path);
    auto [records, bad_offset] = scan_records(data);
    crypto::Hash previous = crypto::kZeroHash;
    for (std::uint64_t i = 0; i < records.size(); ++i) {
        if (!block_consistent(records[i].block, i, previous)) return ChainStatus::corrupt(i);
        previous = records[i].block.header.block_hash;
    }
    if (bad_offset) return ChainStatus::corrupt(records.size());
    return ChainStatus::good();
}

BlockFileContents read_block_file(const std::filesystem::path& path) {
    auto data = read_file(path);
    auto [records, bad_offset] = scan_records(data);
    BlockFileContents out;
    out.corrupt_offset = bad_offset;
    crypto::Hash previous = crypto::kZeroHash;
    for (std::uint64_t i = 0; i < records.size(); ++i) {
        if (!block_consistent(records[i].block, i, previous)) {
            out.corrupt_offset = records[i].offset;
            break;
        }
        previous = records[i].block.header.block_hash;
        out.blocks.push_back(std::move(records[i].block));
    }
    return out;
}

Bytes frame_block(const Block& block) {
    auto body = block.encode();
    Encoder enc;
    enc.u32(static_cast<std::uint32_t>(body.size())).raw(body).u32(crypto::crc32(body));
    return std::move(enc).bytes();
}

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

Ledger::Ledger(std::string channel_id, const TxVerifier& verifier, LedgerOptions options)
    : channel_id_(std::move(channel_id)), verifier_(verifier), options_(std::move(options)) {
    if (options_.directory) {
        std::filesystem::create_directories(*options_.directory);
        load_from_disk();
    }
}

std::filesystem::path Ledger::block_file() const {
    return options_.directory ? *options_.directory / (channel_id_ + ".blocks") : std::filesystem::path{};
}

std::filesystem::path Ledger::snapshot_file() const {
    return options_.directory ? *options_.directory / (channel_id_ + ".state") : std::filesystem::path{};
}

void Ledger::on_commit(CommitListener listener) {
    std::lock_guard commit(commit_mutex_);
    listeners_.push_back(std::move(listener));
}

Block Ledger::append_block(std::vector<Transaction> ordered_txs) {
    if (ordered_txs.empty()) throw Error(ErrorCode::EmptyBatch);
    std::lock_guard commit(commit_mutex_);
    crypto::Hash previous = blocks_.empty() ? crypto::kZeroHash : blocks_.back().header.block_hash;
    return commit_locked(Block::make(blocks_.size(), previous, std::move(ordered_txs)));
}

Block Ledger::commit_block(const Block& incoming) {
    if (incoming.transactions.empty()) throw Error(ErrorCode::EmptyBatch);
    std::lock_guard commit(commit_mutex_);
    const std::uint64_t expected = blocks_.size();
    if (incoming.header.height > expected)
        throw Error(ErrorCode::GapDetected, std::to_string(expected));
    if (incoming.header.height < expected) {
        if (blocks_[incoming.header.height].header == incoming.header) return blocks_[incoming.header.height];
        throw Error(ErrorCode::HashMismatch, "conflicts with committed block " + std::to_string(incoming.header.height));
    }
    crypto::Hash previous = blocks_.empty() ? crypto::kZeroHash : blocks_.back().header.block_hash;
    if (!block_consistent(incoming, expected, previous))
        throw Error(ErrorCode::HashMismatch, "block " + std::to_string(expected) + " does not recompute");
    Block block;
    block.header = incoming.header;
    block.transactions = incoming.transactions;
    return commit_locked(std::move(block));
}

Block Ledger::commit_locked(Block block) {
    // Only the holder of commit_mutex_ mutates state_, so reading it here
    // without the shared lock is safe.
    block.validity_flags = validate_batch(state_, block.transactions, block.header.height,
                                          ChannelGuard(verifier_, channel_id_));

    persist(block);
    if (fault_ == FaultPoint::AfterPersist) throw SimulatedCrash("crash after block persist");

    {
        std::unique_lock lock(mutex_);
        apply_block(state_, block);
        index_block(block);
        blocks_.push_back(block);
    }
    if (fault_ == FaultPoint::AfterStateBeforeSnapshot) throw SimulatedCrash("crash before snapshot");

    if (options_.directory && options_.snapshot_interval > 0 && blocks_.size() % options_.snapshot_interval == 0)
        write_snapshot();

    for (const auto& listener : listeners_) listener(block);
    return block;
}

void Ledger::persist(const Block& block) {
    if (!options_.directory) {
        if (fault_ == FaultPoint::BeforePersist) throw Error(ErrorCode::PersistenceFailure, "injected");
        return;
    }
    auto path = block_file();
    auto record = frame_block(block);
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw Error(ErrorCode::PersistenceFailure, std::strerror(errno));
    off_t original = ::lseek(fd, 0, SEEK_END);

    auto fail = [&](std::string why) {
        // Roll the file back so no partial record survives.
        if (::ftruncate(fd, original) != 0) why += " (truncate failed)";
        ::close(fd);
        throw Error(ErrorCode::PersistenceFailure, why);
    };

    std::size_t to_write = record.size();
    if (fault_ == FaultPoint::BeforePersist) to_write /= 2;
    std::size_t written = 0;
    while (written < to_write) {
        auto n = ::write(fd, record.data() + written, to_write - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    if (fault_ == FaultPoint::BeforePersist) fail("injected write failure");
    if (::fsync(fd) != 0) fail(std::strerror(errno));
    ::close(fd);
}

void Ledger::write_snapshot() {
    Encoder payload;
    {
        std::shared_lock lock(mutex_);
        payload.u64(blocks_.size());
        payload.raw(blocks_.empty() ? crypto::kZeroHash : blocks_.back().header.block_hash);
        payload.raw(state_.canonical());
    }
    auto body = std::move(payload).bytes();
    Encoder framed;
    framed.u32(static_cast<std::uint32_t>(body.size())).raw(body).u32(crypto::crc32(body));

    auto tmp = snapshot_file();
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(framed.bytes().data()),
                  static_cast<std::streamsize>(framed.size()));
        if (!out) throw Error(ErrorCode::PersistenceFailure, "snapshot write failed");
    }
    std::filesystem::rename(tmp, snapshot_file());
}

void Ledger::load_from_disk() {
    auto contents = read_block_file(block_file());
    if (contents.corrupt_offset) throw Error(ErrorCode::CorruptBlockFile, std::to_string(*contents.corrupt_offset));

    WorldState state;
    std::size_t replay_from = 0;
    auto snap = read_file(snapshot_file());
    if (snap.size() >= 8) {
        auto len = load_u32(snap, 0);
        if (snap.size() == std::size_t{len} + 8) {
            ByteView body(snap.data() + 4, len);
            if (crypto::crc32(body) == load_u32(snap, 4 + len)) {
                try {
                    Decoder dec(body);
                    auto covered = dec.u64();
                    auto tip_hash = dec.fixed<32>();
                    auto rest = dec.raw(dec.remaining());
                    bool matches = covered <= contents.blocks.size() &&
                                   (covered == 0 ? tip_hash == crypto::kZeroHash
                                                 : contents.blocks[covered - 1].header.block_hash == tip_hash);
                    if (matches) {
                        state = WorldState::decode(rest);
                        replay_from = covered;
                    }
                } catch (const Error&) {
                    // unusable snapshot; fall back to full replay
                }
            }
        }
    }
    for (std::size_t i = replay_from; i < contents.blocks.size(); ++i) apply_block(state, contents.blocks[i]);

    std::unique_lock lock(mutex_);
    blocks_ = std::move(contents.blocks);
    state_ = std::move(state);
    history_.clear();
    for (const auto& b : blocks_) index_block(b);
}

WorldState Ledger::rebuild_state() {
    std::lock_guard commit(commit_mutex_);
    if (options_.directory) {
        load_from_disk();
    } else {
        std::unique_lock lock(mutex_);
        state_ = replay(blocks_);
        history_.clear();
        for (const auto& b : blocks_) index_block(b);
    }
    std::shared_lock lock(mutex_);
    return state_;
}

void Ledger::index_block(const Block& block) {
    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        if (i >= block.validity_flags.size() || block.validity_flags[i] != Validity::Valid) continue;
        const auto& tx = block.transactions[i];
        for (const auto& w : tx.write_set)
            history_[w.key].push_back(HistoryEntry{tx.tx_id, w.value, block.header.height, static_cast<std::uint32_t>(i)});
    }
}

std::optional<StateEntry> Ledger::query_state(const std::string& key) const {
    std::shared_lock lock(mutex_);
    return state_.get(key);
}

std::vector<HistoryEntry> Ledger::get_history(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = history_.find(key);
    return it == history_.end() ? std::vector<HistoryEntry>{} : it->second;
}

std::vector<std::pair<std::string, StateEntry>> Ledger::scan(std::string_view prefix) const {
    std::shared_lock lock(mutex_);
    std::vector<std::pair<std::string, StateEntry>> out;
    const auto& entries = state_.entries();
    for (auto it = entries.lower_bound(std::string(prefix)); it != entries.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.emplace_back(it->first, it->second);
    }
    return out;
}

ChainStatus Ledger::verify_chain() const {
    if (options_.directory) return verify_block_file(block_file());
    std::shared_lock lock(mutex_);
    return verify_blocks(blocks_);
}

std::uint64_t Ledger::height() const {
    std::shared_lock lock(mutex_);
    return blocks_.size();
}

std::optional<BlockHeader> Ledger::tip() const {
    std::shared_lock lock(mutex_);
    if (blocks_.empty()) return std::nullopt;
    return blocks_.back().header;
}

Block Ledger::block_at(std::uint64_t height) const {
    std::shared_lock lock(mutex_);
    if (height >= blocks_.size()) throw std::out_of_range("no block at height " + std::to_string(height));
    return blocks_[height];
}

std::vector<Block> Ledger::blocks() const {
    std::shared_lock lock(mutex_);
    return blocks_;
}

WorldState Ledger::snapshot() const {
    std::shared_lock lock(mutex_);
    return state_;
}

Bytes Ledger::canonical_state() const {
    std::shared_lock lock(mutex_);
    return state_.canonical();
}

}  // namespace radchain::ledger
