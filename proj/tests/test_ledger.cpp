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

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <thread>

#include "radchain/ledger.hpp"
#include "support.hpp"

namespace radchain::ledger {
namespace {

using testing::openssl_sha256;
using testing::TempDir;

const crypto::KeyPair& writer_key() {
    static const auto key = testing::key_for("writer");
    return key;
}

Transaction make_tx(std::vector<WriteEntry> writes, std::vector<ReadEntry> reads = {}, std::string channel = "ch",
                    std::int64_t t = 1'700'000'000) {
    Transaction tx;
    tx.channel_id = std::move(channel);
    tx.contract = ContractKind::Access;
    tx.operation = "put";
    tx.args = {to_bytes("arg")};
    tx.creator = "writer";
    tx.read_set = std::move(reads);
    tx.write_set = std::move(writes);
    tx.proposal_time = t;
    tx.seal(writer_key());
    return tx;
}

WriteEntry kv(const std::string& k, const std::string& v) { return {k, to_bytes(v)}; }

std::string value_of(const std::optional<StateEntry>& e) { return e ? radchain::to_string(ByteView(e->value)) : "<absent>"; }

// Independent hash recomputation over the documented layout.
bool oracle_chain_ok(const std::vector<Block>& blocks, std::uint64_t* first_bad) {
    crypto::Hash prev{};
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        Encoder data;
        data.count(b.transactions.size());
        for (const auto& tx : b.transactions) data.blob(tx.encode());
        auto data_hash = openssl_sha256(data.bytes());
        Encoder head;
        head.u64(b.header.height).raw(b.header.previous_hash).raw(data_hash);
        auto block_hash = openssl_sha256(head.bytes());
        bool ok = b.header.height == i && b.header.previous_hash == prev && b.header.data_hash == data_hash &&
                  b.header.block_hash == block_hash;
        if (!ok) {
            *first_bad = i;
            return false;
        }
        prev = b.header.block_hash;
    }
    return true;
}

TEST(Ledger, GenesisBlockHasZeroPreviousHash) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    auto b = l.append_block({make_tx({kv("a", "1")})});
    EXPECT_EQ(b.header.height, 0u);
    EXPECT_EQ(b.header.previous_hash, crypto::kZeroHash);
    EXPECT_EQ(b.header.block_hash, b.header.compute_hash());
    ASSERT_EQ(b.validity_flags.size(), 1u);
    EXPECT_EQ(b.validity_flags[0], Validity::Valid);
}

TEST(Ledger, EmptyBatchRejected) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    try {
        l.append_block({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyBatch);
    }
}

TEST(Ledger, StaleReadWithinSameBlockIsFlaggedAndDiscarded) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    l.append_block({make_tx({kv("k", "v0")})});
    auto committed = l.query_state("k")->version;
    auto first = make_tx({kv("k", "v1")}, {{"k", committed}});
    auto second = make_tx({kv("k", "v2"), kv("other", "x")}, {{"k", committed}});
    auto b = l.append_block({first, second});
    EXPECT_EQ(b.validity_flags, (std::vector<Validity>{Validity::Valid, Validity::StaleRead}));
    EXPECT_EQ(value_of(l.query_state("k")), "v1");
    EXPECT_FALSE(l.query_state("other"));
}

TEST(Ledger, DistinctKeysBothValid) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    auto b = l.append_block({make_tx({kv("a", "1")}, {{"a", std::nullopt}}), make_tx({kv("b", "2")}, {{"b", std::nullopt}})});
    EXPECT_EQ(b.validity_flags, (std::vector<Validity>{Validity::Valid, Validity::Valid}));
    EXPECT_EQ(value_of(l.query_state("a")), "1");
    EXPECT_EQ(value_of(l.query_state("b")), "2");
}

TEST(Ledger, TamperedIdIsBadSignature) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    auto tx = make_tx({kv("a", "1")});
    tx.tx_id[0] ^= 1;
    auto b = l.append_block({tx});
    EXPECT_EQ(b.validity_flags[0], Validity::BadSignature);
    EXPECT_FALSE(l.query_state("a"));
}

TEST(Ledger, ForeignChannelTransactionIsUnauthorized) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    auto b = l.append_block({make_tx({kv("a", "1")}, {}, "other"), make_tx({kv("a", "2")}, {{"a", std::nullopt}})});
    EXPECT_EQ(b.validity_flags, (std::vector<Validity>{Validity::Unauthorized, Validity::Valid}));
    EXPECT_EQ(value_of(l.query_state("a")), "2");
}

TEST(Ledger, QueryStateLatestValueAndVersion) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    EXPECT_FALSE(l.query_state("never"));
    l.append_block({make_tx({kv("k", "v1")})});
    l.append_block({make_tx({kv("x", "y")}), make_tx({kv("k", "v2")})});
    auto e = l.query_state("k");
    ASSERT_TRUE(e);
    EXPECT_EQ(value_of(e), "v2");
    EXPECT_EQ(e->version, (Version{1, 1}));
    // oracle: replay of the log
    EXPECT_EQ(replay(l.blocks()).get("k"), e);
}

TEST(Ledger, HistoryIsChronologicalAndExcludesInvalid) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    auto t1 = make_tx({kv("k", "v1")});
    l.append_block({t1});
    auto t2 = make_tx({kv("k", "v2")}, {}, "ch", 1'700'000'001);
    l.append_block({t2});
    auto h = l.get_history("k");
    ASSERT_EQ(h.size(), 2u);
    EXPECT_EQ(h[0].tx_id, t1.tx_id);
    EXPECT_EQ(radchain::to_string(ByteView(h[0].value)), "v1");
    EXPECT_EQ(h[1].tx_id, t2.tx_id);
    EXPECT_LE(h[0].height, h[1].height);
    EXPECT_TRUE(l.get_history("unknown").empty());

    // key touched only by a StaleRead transaction
    auto stale = make_tx({kv("lonely", "x")}, {{"k", Version{0, 0}}});
    auto b = l.append_block({stale});
    EXPECT_EQ(b.validity_flags[0], Validity::StaleRead);
    EXPECT_TRUE(l.get_history("lonely").empty());
}

TEST(Ledger, VerifyChainEmptyIsOk) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    EXPECT_EQ(l.verify_chain(), ChainStatus::good());
}

std::vector<Block> build_chain(Ledger& l, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        l.append_block({make_tx({kv("k" + std::to_string(i % 7), "v" + std::to_string(i))}, {}, "ch",
                                1'700'000'000 + static_cast<std::int64_t>(i))});
    return l.blocks();
}

TEST(Ledger, HundredBlockChainVerifiesAgainstIndependentHash) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    auto blocks = build_chain(l, 100);
    std::uint64_t bad = 0;
    EXPECT_TRUE(oracle_chain_ok(blocks, &bad));
    EXPECT_EQ(l.verify_chain(), ChainStatus::good());
}

TEST(Ledger, FlippedArgByteInBlock42IsCorrupt42) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    auto blocks = build_chain(l, 100);
    blocks[42].transactions[0].args[0][0] ^= 0x01;
    std::uint64_t bad = 0;
    EXPECT_FALSE(oracle_chain_ok(blocks, &bad));
    EXPECT_EQ(bad, 42u);
    EXPECT_EQ(verify_blocks(blocks), ChainStatus::corrupt(42));
}

TEST(Ledger, PersistedChainDetectsFlipAtBlock42) {
    TempDir dir;
    IdOnlyVerifier v;
    std::vector<std::uint64_t> offsets;
    {
        Ledger l("ch", v, {dir.path(), 8});
        build_chain(l, 100);
        EXPECT_EQ(l.verify_chain(), ChainStatus::good());
    }
    auto file = dir.path() / "ch.blocks";
    auto contents = read_block_file(file);
    ASSERT_EQ(contents.blocks.size(), 100u);
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < 42; ++i) offset += frame_block(contents.blocks[i]).size();
    {
        std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(static_cast<std::streamoff>(offset + 4 + 200));
        char c = 0;
        f.read(&c, 1);
        c ^= 0x10;
        f.seekp(static_cast<std::streamoff>(offset + 4 + 200));
        f.write(&c, 1);
    }
    EXPECT_EQ(verify_block_file(file), ChainStatus::corrupt(42));
}

TEST(Ledger, RebuildAfterCleanShutdownIsByteIdentical) {
    TempDir dir;
    IdOnlyVerifier v;
    Bytes before;
    {
        Ledger l("ch", v, {dir.path(), 4});
        build_chain(l, 23);
        before = l.canonical_state();
    }
    Ledger reopened("ch", v, {dir.path(), 4});
    EXPECT_EQ(reopened.canonical_state(), before);
    EXPECT_EQ(reopened.rebuild_state().canonical(), before);
    EXPECT_EQ(replay(reopened.blocks()).canonical(), before);
    EXPECT_EQ(reopened.height(), 23u);
}

TEST(Ledger, RebuildOfEmptyStoreIsEmpty) {
    TempDir dir;
    IdOnlyVerifier v;
    Ledger l("ch", v, {dir.path(), 4});
    EXPECT_EQ(l.rebuild_state().size(), 0u);
}

TEST(Ledger, TruncatedFinalRecordReportsOffset) {
    TempDir dir;
    IdOnlyVerifier v;
    std::uintmax_t full = 0;
    std::uint64_t last_offset = 0;
    {
        Ledger l("ch", v, {dir.path(), 4});
        auto blocks = build_chain(l, 5);
        for (std::size_t i = 0; i < 4; ++i) last_offset += frame_block(blocks[i]).size();
        full = std::filesystem::file_size(l.block_file());
    }
    std::filesystem::resize_file(dir.path() / "ch.blocks", full - 3);
    try {
        Ledger l("ch", v, {dir.path(), 4});
        FAIL() << "expected CorruptBlockFile";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CorruptBlockFile);
        EXPECT_EQ(e.detail(), std::to_string(last_offset));
    }
    EXPECT_EQ(read_block_file(dir.path() / "ch.blocks").corrupt_offset, last_offset);
}

TEST(Ledger, PersistenceFailureLeavesNoPartialState) {
    TempDir dir;
    IdOnlyVerifier v;
    Ledger l("ch", v, {dir.path(), 4});
    build_chain(l, 3);
    auto state = l.canonical_state();
    auto size = std::filesystem::file_size(l.block_file());
    l.inject_fault(FaultPoint::BeforePersist);
    try {
        l.append_block({make_tx({kv("new", "x")})});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PersistenceFailure);
    }
    EXPECT_EQ(l.canonical_state(), state);
    EXPECT_EQ(l.height(), 3u);
    EXPECT_EQ(std::filesystem::file_size(l.block_file()), size);
    l.inject_fault(FaultPoint::None);
    l.append_block({make_tx({kv("new", "x")})});
    EXPECT_EQ(l.height(), 4u);
    EXPECT_EQ(l.verify_chain(), ChainStatus::good());
}

TEST(Ledger, CrashAfterPersistRecoversFromBlocks) {
    TempDir dir;
    IdOnlyVerifier v;
    {
        Ledger l("ch", v, {dir.path(), 2});
        build_chain(l, 5);
        l.inject_fault(FaultPoint::AfterPersist);
        EXPECT_THROW(l.append_block({make_tx({kv("crash", "x")})}), SimulatedCrash);
    }
    Ledger l("ch", v, {dir.path(), 2});
    EXPECT_EQ(l.height(), 6u);
    EXPECT_EQ(value_of(l.query_state("crash")), "x");
    EXPECT_EQ(l.canonical_state(), replay(l.blocks()).canonical());
}

TEST(Ledger, FollowerCommitRules) {
    IdOnlyVerifier v;
    Ledger leader("ch", v);
    Ledger follower("ch", v);
    auto blocks = build_chain(leader, 3);
    try {
        follower.commit_block(blocks[1]);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GapDetected);
        EXPECT_EQ(e.detail(), "0");
    }
    follower.commit_block(blocks[0]);
    auto bad = blocks[1];
    bad.header.data_hash[3] ^= 0xff;
    EXPECT_THROW(follower.commit_block(bad), Error);
    EXPECT_EQ(follower.height(), 1u);
    follower.commit_block(blocks[1]);
    follower.commit_block(blocks[1]);  // idempotent redelivery
    follower.commit_block(blocks[2]);
    EXPECT_EQ(follower.canonical_state(), leader.canonical_state());
}

TEST(Ledger, ConcurrentQueriesSeeWholeBlocks) {
    IdOnlyVerifier v;
    Ledger l("ch", v);
    std::atomic<bool> done{false};
    std::atomic<int> torn{0};
    std::thread reader([&] {
        while (!done) {
            l.with_state([&](const WorldState& s) {
                auto a = s.get("a");
                auto b = s.get("b");
                if (value_of(a) != value_of(b)) ++torn;
            });
        }
    });
    for (int i = 0; i < 300; ++i) {
        auto v1 = std::to_string(i);
        l.append_block({make_tx({kv("a", v1), kv("b", v1)}, {}, "ch", i)});
    }
    done = true;
    reader.join();
    EXPECT_EQ(torn.load(), 0);
}

TEST(Ledger, CodecRoundTrips) {
    auto tx = make_tx({kv("a", "1")}, {{"a", Version{3, 2}}, {"b", std::nullopt}});
    EXPECT_EQ(Transaction::decode(tx.encode()), tx);
    auto b = Block::make(0, crypto::kZeroHash, {tx});
    b.validity_flags = {Validity::StaleRead};
    EXPECT_EQ(Block::decode(b.encode()), b);
    WorldState s;
    s.put("x", {to_bytes("y"), {1, 2}});
    EXPECT_EQ(WorldState::decode(s.canonical()), s);
    auto bytes = tx.encode();
    bytes.pop_back();
    EXPECT_THROW(Transaction::decode(bytes), Error);
}

TEST(Ledger, TransactionIdCoversAllFieldsButIdAndSignature) {
    auto tx = make_tx({kv("a", "1")});
    EXPECT_EQ(tx.tx_id, openssl_sha256(tx.signing_preimage()));
    EXPECT_TRUE(crypto::verify(writer_key().public_key(), tx.signing_preimage(), tx.creator_signature));
    auto other = tx;
    other.write_set[0].value = to_bytes("2");
    EXPECT_NE(other.compute_id(), tx.tx_id);
    other = tx;
    other.proposal_time += 1;
    EXPECT_NE(other.compute_id(), tx.tx_id);
}

// ---------------------------------------------------------------------------
// Property: production validator vs. a sequential reference validator.
// ---------------------------------------------------------------------------

std::vector<Validity> reference_validate(const WorldState& state, const std::vector<Transaction>& txs,
                                         std::uint64_t height) {
    std::map<std::string, Version> versions;
    for (const auto& [k, e] : state.entries()) versions[k] = e.version;
    std::vector<Validity> out;
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const auto& tx = txs[i];
        if (openssl_sha256(tx.signing_preimage()) != tx.tx_id) {
            out.push_back(Validity::BadSignature);
            continue;
        }
        bool fresh = true;
        for (const auto& r : tx.read_set) {
            auto it = versions.find(r.key);
            std::optional<Version> cur = it == versions.end() ? std::nullopt : std::optional(it->second);
            if (cur != r.version) fresh = false;
        }
        if (!fresh) {
            out.push_back(Validity::StaleRead);
            continue;
        }
        for (const auto& w : tx.write_set) versions[w.key] = Version{height, static_cast<std::uint32_t>(i)};
        out.push_back(Validity::Valid);
    }
    return out;
}

TEST(LedgerProperty, ValidatorAgreesWithReferenceOn10000Batches) {
    std::mt19937_64 rng(20261015);
    IdOnlyVerifier v;
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
    int disagreements = 0;
    for (int batch = 0; batch < 10'000; ++batch) {
        WorldState state;
        const int nkeys = 1 + pick(6);
        for (int k = 0; k < nkeys; ++k)
            if (pick(2)) state.put("k" + std::to_string(k), {to_bytes("x"), {static_cast<std::uint64_t>(pick(3)), static_cast<std::uint32_t>(pick(3))}});
        std::vector<Transaction> txs;
        const int ntx = 1 + pick(8);
        for (int i = 0; i < ntx; ++i) {
            std::vector<ReadEntry> reads;
            std::vector<WriteEntry> writes;
            for (int r = pick(3); r > 0; --r) {
                auto key = "k" + std::to_string(pick(nkeys));
                auto cur = state.get(key);
                std::optional<Version> ver = cur ? std::optional(cur->version) : std::nullopt;
                if (pick(4) == 0) ver = Version{static_cast<std::uint64_t>(pick(3)), static_cast<std::uint32_t>(pick(3))};
                if (pick(6) == 0) ver = std::nullopt;
                reads.push_back({key, ver});
            }
            for (int w = pick(3); w > 0; --w) writes.push_back(kv("k" + std::to_string(pick(nkeys)), std::to_string(batch)));
            auto tx = make_tx(writes, reads, "ch", batch * 16 + i);
            if (pick(12) == 0) tx.tx_id[5] ^= 0x40;
            txs.push_back(std::move(tx));
        }
        const std::uint64_t height = 3;
        if (validate_batch(state, txs, height, v) != reference_validate(state, txs, height)) ++disagreements;
    }
    EXPECT_EQ(disagreements, 0);
}

TEST(LedgerProperty, ReplayIsDeterministic) {
    IdOnlyVerifier v;
    Ledger a("ch", v), b("ch", v);
    std::mt19937 rng(7);
    for (int i = 0; i < 50; ++i) {
        std::vector<Transaction> txs;
        for (int j = 0; j < 1 + static_cast<int>(rng() % 4); ++j)
            txs.push_back(make_tx({kv("k" + std::to_string(rng() % 5), std::to_string(rng()))}, {}, "ch", i * 10 + j));
        a.append_block(txs);
        b.commit_block(a.blocks().back());
    }
    EXPECT_EQ(a.canonical_state(), b.canonical_state());
    EXPECT_EQ(replay(a.blocks()).canonical(), a.canonical_state());
}

}  // namespace
}  // namespace radchain::ledger
