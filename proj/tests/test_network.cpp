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

#include <random>

#include "radchain/network.hpp"
#include "support.hpp"

namespace radchain::network {
namespace {

using contracts::AccessReason;
using identity::Role;
using testing::nonce_of;
using testing::TestNet;

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::ContractError;
}

struct TwoOrg : TestNet {
    TwoOrg(std::uint32_t t = 2, NetworkOptions opts = {}) : TestNet({"hospitalA", "telerad", "hospitalB"}, opts) {
        channel("teleradA", {"hospitalA", "telerad"}, t);
        enroll("admin-a", "hospitalA", Role::SiteAdmin);
        enroll("rad-001", "telerad", Role::Radiologist);
        enroll("doc-a", "hospitalA", Role::Physician);
        enroll("doc-b", "hospitalB", Role::Physician);
    }
};

TEST(Network, CreateChannelInstantiatesEmptyLedgersOnMembersOnly) {
    TwoOrg n;
    EXPECT_TRUE(n.net.peer("peer0.hospitalA").joined("teleradA"));
    EXPECT_TRUE(n.net.peer("peer0.telerad").joined("teleradA"));
    EXPECT_FALSE(n.net.peer("peer0.hospitalB").joined("teleradA"));
    EXPECT_EQ(n.net.peer("peer0.hospitalA").ledger("teleradA").height(), 0u);
    EXPECT_EQ(n.net.channel("teleradA").endorsement_threshold, 2u);
}

TEST(Network, CreateChannelErrors) {
    TwoOrg n;
    EXPECT_EQ(code_of([&] { n.channel("bad", {"hospitalA"}, 0); }), ErrorCode::BadThreshold);
    EXPECT_EQ(code_of([&] { n.channel("bad", {"hospitalA"}, 2); }), ErrorCode::BadThreshold);
    EXPECT_EQ(code_of([&] { n.channel("teleradA", {"hospitalA"}, 1); }), ErrorCode::DuplicateChannel);
    EXPECT_EQ(code_of([&] { n.channel("x", {"hospitalA", "mars"}, 1); }), ErrorCode::UnknownOrg);
    auto sig = n.keys.at("rad-001").sign(Network::create_channel_request("y", {"hospitalA"}, 1));
    EXPECT_EQ(code_of([&] { n.net.create_channel(sig, "y", {"hospitalA"}, 1); }), ErrorCode::InvalidAdminSignature);
}

TEST(Network, NonMemberQueryDenied) {
    TwoOrg n;
    EXPECT_EQ(n.directory.check_membership("doc-b", "teleradA"),
              identity::Decision::deny(identity::DenyReason::NotInChannel));
    try {
        n.net.query("doc-b", "teleradA", "exam/teleradA/EX-1");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Unauthorized);
        EXPECT_EQ(e.detail(), "NotInChannel");
    }
}

TEST(Network, HonestPeersEndorseIdentically) {
    TestNet n({"o1", "o2", "o3"});
    n.channel("c", {"o1", "o2", "o3"}, 3);
    n.net.add_peer("peer1.o1", "o1");
    n.enroll("adm", "o1", Role::SiteAdmin);
    n.enroll("rad", "o2", Role::Radiologist);
    n.enroll("doc", "o1", Role::Physician);
    n.client("adm").invoke("c", contracts::anchor_exam(testing::exam_record("EX-1", "o1", "doc")));
    auto proposal = n.client("rad").make_proposal("c", contracts::request_access("EX-1", AccessReason::Interpretation,
                                                                                nonce_of(1)));
    std::vector<Bytes> sets;
    for (const auto& pid : n.net.peers_on("c")) {
        auto r = n.net.endorse(pid, proposal);
        ASSERT_TRUE(std::holds_alternative<Endorsement>(r)) << pid;
        sets.push_back(std::get<Endorsement>(r).rw_bytes());
    }
    ASSERT_EQ(sets.size(), 4u);
    for (const auto& s : sets) EXPECT_EQ(s, sets.front());
}

TEST(Network, EndorsementRejections) {
    TwoOrg n;
    n.revoke("rad-001");
    auto proposal = n.client("rad-001").make_proposal("teleradA",
                                                      contracts::request_access("EX-1", AccessReason::Interpretation, nonce_of(1)));
    auto r = n.net.endorse("peer0.telerad", proposal);
    ASSERT_TRUE(std::holds_alternative<Rejection>(r));
    EXPECT_EQ(std::get<Rejection>(r).reason, RejectReason::Unauthorized);

    auto doc = n.client("doc-b").make_proposal("teleradA", contracts::acknowledge_alert("x"));
    r = n.net.endorse("peer0.hospitalB", doc);
    ASSERT_TRUE(std::holds_alternative<Rejection>(r));
    EXPECT_EQ(std::get<Rejection>(r).reason, RejectReason::NotJoined);

    auto tampered = n.client("admin-a").make_proposal("teleradA", contracts::configure_keywords({"x"}));
    tampered.draft.args[0] = to_bytes("y");
    r = n.net.endorse("peer0.hospitalA", tampered);
    ASSERT_TRUE(std::holds_alternative<Rejection>(r));
    EXPECT_EQ(std::get<Rejection>(r).reason, RejectReason::BadSignature);

    auto bad = n.client("admin-a").make_proposal("teleradA", contracts::acknowledge_alert("nope"));
    r = n.net.endorse("peer0.hospitalA", bad);
    ASSERT_TRUE(std::holds_alternative<Rejection>(r));
    EXPECT_EQ(std::get<Rejection>(r).reason, RejectReason::Unauthorized);  // SiteAdmin cannot ack

    auto contract_err = n.client("doc-a").make_proposal("teleradA", contracts::acknowledge_alert("nope"));
    r = n.net.endorse("peer0.hospitalA", contract_err);
    ASSERT_TRUE(std::holds_alternative<Rejection>(r));
    EXPECT_EQ(std::get<Rejection>(r).reason, RejectReason::ContractError);
    EXPECT_EQ(std::get<Rejection>(r).code, ErrorCode::UnknownAlert);
}

struct Prepared {
    Proposal proposal;
    Endorsement a, b;
};

Prepared prepare_two(TwoOrg& n, const std::vector<std::string>& kws) {
    auto c = n.client("admin-a");
    Prepared p;
    p.proposal = c.make_proposal("teleradA", contracts::configure_keywords(kws));
    p.a = std::get<Endorsement>(n.net.endorse("peer0.hospitalA", p.proposal));
    p.b = std::get<Endorsement>(n.net.endorse("peer0.telerad", p.proposal));
    return p;
}

TEST(Network, TwoOfTwoAcceptedIntoNextBlock) {
    TwoOrg n;
    auto p = prepare_two(n, {"stroke"});
    auto tx = n.client("admin-a").seal(p.proposal, p.a);
    EXPECT_EQ(n.net.submit_for_ordering(tx, {p.a, p.b}), tx.tx_id);
    n.net.flush();
    auto rec = n.net.commit_of(tx.tx_id);
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->height, 0u);
    EXPECT_EQ(rec->validity, ledger::Validity::Valid);
    for (const auto& pid : n.net.peers_on("teleradA")) EXPECT_EQ(n.net.peer(pid).ledger("teleradA").height(), 1u);
}

TEST(Network, MismatchedWriteSetsRejected) {
    TwoOrg n;
    auto p = prepare_two(n, {"stroke"});
    auto tx = n.client("admin-a").seal(p.proposal, p.a);
    // an honestly signed endorsement of a different write set
    auto other = prepare_two(n, {"strokf"});
    Proposal same_draft = p.proposal;
    auto forged = p.b;
    forged.write_set = other.b.write_set;
    EXPECT_NE(forged.write_set, p.b.write_set);
    forged.signature = testing::key_for("org:telerad").sign(Endorsement::signed_bytes(tx, forged.read_set, forged.write_set));
    EXPECT_EQ(code_of([&] { n.net.submit_for_ordering(tx, {p.a, forged}); }), ErrorCode::MismatchedWriteSets);
}

TEST(Network, InsufficientEndorsements) {
    TwoOrg n;
    auto p = prepare_two(n, {"stroke"});
    auto tx = n.client("admin-a").seal(p.proposal, p.a);
    EXPECT_EQ(code_of([&] { n.net.submit_for_ordering(tx, {p.a}); }), ErrorCode::InsufficientEndorsements);
    // two endorsements from the same org count once
    EXPECT_EQ(code_of([&] { n.net.submit_for_ordering(tx, {p.a, p.a}); }), ErrorCode::InsufficientEndorsements);
    // a bad signature does not count
    auto bad = p.b;
    bad.signature[0] ^= 1;
    EXPECT_EQ(code_of([&] { n.net.submit_for_ordering(tx, {p.a, bad}); }), ErrorCode::InsufficientEndorsements);
}

TEST(Network, BackpressureBeyondQueueLimit) {
    NetworkOptions opts;
    opts.batch.queue_limit = 2;
    opts.batch.max_transactions = 100;
    TwoOrg n(1, opts);
    auto c = n.client("admin-a");
    for (int i = 0; i < 2; ++i) {
        auto [tx, e] = c.prepare("teleradA", contracts::configure_keywords({"k" + std::to_string(i)}));
        n.net.submit_for_ordering(tx, e);
    }
    auto [tx, e] = c.prepare("teleradA", contracts::configure_keywords({"k9"}));
    EXPECT_EQ(code_of([&] { n.net.submit_for_ordering(tx, e); }), ErrorCode::Backpressure);
}

TEST(Network, BatchCutBySizeAndTimeout) {
    TwoOrg n(1);
    auto c = n.client("admin-a");
    for (int i = 0; i < 23; ++i) {
        auto [tx, e] = c.prepare("teleradA", contracts::configure_keywords({"k" + std::to_string(i)}));
        n.net.submit_for_ordering(tx, e);
    }
    EXPECT_EQ(n.net.orderer().next_height("teleradA"), 2u);  // two full blocks of 10
    EXPECT_EQ(n.net.orderer().pending(), 3u);
    n.net.advance_to(n.net.now_ms() + 499);
    EXPECT_EQ(n.net.orderer().pending(), 3u);
    n.net.advance_to(n.net.now_ms() + 1);
    EXPECT_EQ(n.net.orderer().pending(), 0u);
    n.net.settle();
    const auto& l = n.net.peer("peer0.telerad").ledger("teleradA");
    ASSERT_EQ(l.height(), 3u);
    EXPECT_EQ(l.block_at(0).transactions.size(), 10u);
    EXPECT_EQ(l.block_at(2).transactions.size(), 3u);
}

TEST(Network, FifoWithTxIdTieBreak) {
    Orderer o;
    o.add_channel({"c", {"o"}, 1});
    auto key = testing::key_for("org:o");
    o.set_org_key("o", key.public_key());
    std::vector<ledger::Transaction> txs;
    for (int i = 0; i < 6; ++i) {
        ledger::Transaction tx;
        tx.channel_id = "c";
        tx.operation = "op";
        tx.creator = "u";
        tx.proposal_time = i;
        tx.seal(key);
        txs.push_back(tx);
    }
    auto endorse = [&](const ledger::Transaction& tx) {
        Endorsement e{"p", "o", {}, {}, {}, {}};
        e.signature = key.sign(Endorsement::signed_bytes(tx, {}, {}));
        return std::vector<Endorsement>{e};
    };
    // arrivals: 3 at t=5, 3 at t=1
    for (int i = 0; i < 6; ++i) o.submit(txs[i], endorse(txs[i]), i < 3 ? 5 : 1);
    auto blocks = o.cut(0, true);
    ASSERT_EQ(blocks.size(), 1u);
    const auto& got = blocks[0].second.transactions;
    std::vector<crypto::Hash> early = {txs[3].tx_id, txs[4].tx_id, txs[5].tx_id};
    std::vector<crypto::Hash> late = {txs[0].tx_id, txs[1].tx_id, txs[2].tx_id};
    std::sort(early.begin(), early.end());
    std::sort(late.begin(), late.end());
    for (int i = 0; i < 3; ++i) EXPECT_EQ(got[static_cast<std::size_t>(i)].tx_id, early[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(got[static_cast<std::size_t>(i) + 3].tx_id, late[static_cast<std::size_t>(i)]);
}

void expect_replicas_identical(Network& net, const std::string& channel) {
    auto peers = net.peers_on(channel);
    ASSERT_FALSE(peers.empty());
    const auto& ref = net.peer(peers.front()).ledger(channel);
    for (const auto& pid : peers) {
        const auto& l = net.peer(pid).ledger(channel);
        EXPECT_EQ(l.verify_chain(), ledger::ChainStatus::good()) << pid;
        EXPECT_EQ(l.blocks(), ref.blocks()) << pid;
        EXPECT_EQ(l.canonical_state(), ref.canonical_state()) << pid;
    }
}

TEST(Network, InOrderDeliveryToThreePeers) {
    TwoOrg n(1);
    n.net.add_peer("peer1.telerad", "telerad");
    auto c = n.client("admin-a");
    for (int i = 0; i < 5; ++i) c.invoke("teleradA", contracts::configure_keywords({"k" + std::to_string(i)}));
    EXPECT_EQ(n.net.peers_on("teleradA").size(), 3u);
    expect_replicas_identical(n.net, "teleradA");
}

TEST(Network, GapDetectedThenCatchUpConverges) {
    TwoOrg n(1);
    // hold back block 0 to one peer for a long time
    n.net.set_delivery_model([](const std::string& peer, const std::string&, std::uint64_t h, std::uint32_t attempt) {
        if (peer == "peer0.telerad" && h == 0 && attempt == 0) return DeliveryPlan{false, 60'000};
        return DeliveryPlan{false, 0};
    });
    auto c = n.client("admin-a");
    for (int i = 0; i < 3; ++i) {
        auto [tx, e] = c.prepare("teleradA", contracts::configure_keywords({"k" + std::to_string(i)}));
        n.net.submit_for_ordering(tx, e);
        n.net.advance_to(n.net.now_ms() + 600);
    }
    EXPECT_GT(n.net.stats().gaps, 0u);
    EXPECT_EQ(n.net.peer("peer0.telerad").ledger("teleradA").height(), 3u);  // caught up without waiting
    n.net.settle();
    expect_replicas_identical(n.net, "teleradA");
}

TEST(Network, CorruptedBlockIsHashMismatchAndChainUnchanged) {
    TwoOrg n(1);
    n.client("admin-a").invoke("teleradA", contracts::configure_keywords({"a"}));
    n.client("admin-a").invoke("teleradA", contracts::configure_keywords({"b"}));
    auto block = n.net.orderer().blocks("teleradA")[1];
    Peer fresh("peer9", "telerad", testing::key_for("org:telerad"), n.directory);
    fresh.join("teleradA");
    EXPECT_EQ(fresh.deliver("teleradA", block).status, DeliveryStatus::GapDetected);
    EXPECT_EQ(fresh.deliver("teleradA", block).expected_height, 0u);
    auto b0 = n.net.orderer().blocks("teleradA")[0];
    b0.header.data_hash[0] ^= 1;
    EXPECT_EQ(fresh.deliver("teleradA", b0).status, DeliveryStatus::HashMismatch);
    EXPECT_EQ(fresh.ledger("teleradA").height(), 0u);
    EXPECT_EQ(fresh.deliver("other", b0).status, DeliveryStatus::NotJoined);
}

TEST(Network, DropsAreRetriedWithBackoffUntilConvergence) {
    TwoOrg n(1);
    std::mt19937 rng(3);
    n.net.set_delivery_model([&](const std::string&, const std::string&, std::uint64_t, std::uint32_t) {
        return DeliveryPlan{rng() % 3 == 0, static_cast<std::int64_t>(rng() % 300)};
    });
    auto c = n.client("admin-a");
    for (int i = 0; i < 30; ++i) {
        auto [tx, e] = c.prepare("teleradA", contracts::configure_keywords({"k" + std::to_string(i)}));
        n.net.submit_for_ordering(tx, e);
        n.net.advance_to(n.net.now_ms() + static_cast<std::int64_t>(rng() % 200));
    }
    n.net.settle();
    EXPECT_GT(n.net.stats().drops, 0u);
    EXPECT_GT(n.net.stats().retries, 0u);
    expect_replicas_identical(n.net, "teleradA");
    EXPECT_EQ(n.net.peer("peer0.telerad").ledger("teleradA").height(), n.net.orderer().next_height("teleradA"));
}

TEST(Network, RetryPolicyValues) {
    RetryPolicy p;
    EXPECT_EQ(p.delay(0), 50);
    EXPECT_EQ(p.delay(1), 100);
    EXPECT_EQ(p.delay(5), 1600);
    EXPECT_EQ(p.delay(6), 2000);
    EXPECT_EQ(p.delay(40), 2000);
}

TEST(Network, RevokedKeyTransactionsOrderedAfterRevocationAreInvalidEverywhere) {
    TwoOrg n(1);
    auto c = n.client("admin-a");
    c.invoke("teleradA", contracts::configure_keywords({"a"}));
    // endorsed and sealed before revocation, ordered after it
    auto [tx, e] = c.prepare("teleradA", contracts::configure_keywords({"b"}));
    const auto revoke_height = n.net.orderer().next_height("teleradA");
    n.revoke("admin-a");
    n.net.submit_for_ordering(tx, e);
    n.net.flush();
    auto rec = n.net.commit_of(tx.tx_id);
    ASSERT_TRUE(rec);
    EXPECT_GE(rec->height, revoke_height);
    for (const auto& pid : n.net.peers_on("teleradA")) {
        auto b = n.net.peer(pid).ledger("teleradA").block_at(rec->height);
        EXPECT_EQ(b.validity_flags[rec->tx_index], ledger::Validity::Unauthorized) << pid;
    }
    // replaying the pre-revocation proposal is refused at endorsement
    auto replay = c.make_proposal("teleradA", contracts::configure_keywords({"c"}));
    auto r = n.net.endorse("peer0.hospitalA", replay);
    ASSERT_TRUE(std::holds_alternative<Rejection>(r));
    EXPECT_EQ(std::get<Rejection>(r).reason, RejectReason::Unauthorized);
    // no valid commit by the revoked key exists at or after the revocation height
    const auto& l = n.net.peer("peer0.telerad").ledger("teleradA");
    for (auto h = revoke_height; h < l.height(); ++h) {
        auto b = l.block_at(h);
        for (std::size_t i = 0; i < b.transactions.size(); ++i)
            if (b.transactions[i].creator == "admin-a") {
                EXPECT_NE(b.validity_flags[i], ledger::Validity::Valid);
            }
    }
}

TEST(Network, ClientSurfacesInvalidation) {
    TwoOrg n(1);
    auto c = n.client("admin-a");
    // two transactions from the same simulated state: the second is stale
    auto [t1, e1] = c.prepare("teleradA", contracts::configure_keywords({"a"}));
    auto [t2, e2] = c.prepare("teleradA", contracts::configure_keywords({"b"}));
    n.net.submit_for_ordering(t1, e1);
    n.net.submit_for_ordering(t2, e2);
    n.net.flush();
    EXPECT_EQ(n.net.commit_of(t1.tx_id)->validity, ledger::Validity::Valid);
    EXPECT_EQ(n.net.commit_of(t2.tx_id)->validity, ledger::Validity::StaleRead);
}

TEST(Network, MessagesRoundTrip) {
    TwoOrg n;
    auto p = prepare_two(n, {"stroke"});
    EXPECT_EQ(Proposal::decode(p.proposal.encode()).draft, p.proposal.draft);
    EXPECT_EQ(Endorsement::decode(p.a.encode()), p.a);
}

TEST(Network, PersistentPeersReloadLedgers) {
    testing::TempDir dir;
    NetworkOptions opts;
    opts.data_dir = dir.path();
    Bytes state;
    {
        TwoOrg n(1, opts);
        n.client("admin-a").invoke("teleradA", contracts::configure_keywords({"a"}));
        state = n.net.peer("peer0.telerad").ledger("teleradA").canonical_state();
    }
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "peer0.telerad" / "teleradA.blocks"));
    identity::Directory d(testing::key_for("ca-root"));
    Peer p("peer0.telerad", "telerad", testing::key_for("org:telerad"), d, dir.path() / "peer0.telerad");
    p.join("teleradA");
    EXPECT_EQ(p.ledger("teleradA").canonical_state(), state);
}

}  // namespace
}  // namespace radchain::network
