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

#include "radchain/wire.hpp"
#include "support.hpp"

namespace radchain::testing {
namespace {

using namespace std::chrono_literals;
using wire::Ack;
using wire::AckStatus;
using wire::Frame;
using wire::MessageType;

TEST(WireFrame, HeaderIsTypeThenBigEndianLength) {
    auto bytes = wire::encode_frame({MessageType::GapRequest, Bytes{0xaa, 0xbb, 0xcc}});
    EXPECT_EQ(bytes, (Bytes{0x05, 0x00, 0x00, 0x00, 0x03, 0xaa, 0xbb, 0xcc}));
    Bytes big(0x010203, 7);
    auto b2 = wire::encode_frame({MessageType::BlockDeliver, big});
    EXPECT_EQ((Bytes(b2.begin(), b2.begin() + 5)), (Bytes{0x04, 0x00, 0x01, 0x02, 0x03}));
    EXPECT_EQ(b2.size(), 5u + 0x010203);
}

TEST(WireFrame, DecoderReassemblesAnySplit) {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 200; ++round) {
        std::vector<Frame> frames;
        Bytes stream;
        const int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            Frame f{static_cast<MessageType>(1 + rng() % 6), Bytes(rng() % 300)};
            for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng());
            auto enc = wire::encode_frame(f);
            stream.insert(stream.end(), enc.begin(), enc.end());
            frames.push_back(std::move(f));
        }
        wire::FrameDecoder dec;
        std::vector<Frame> got;
        std::size_t pos = 0;
        while (pos < stream.size()) {
            auto step = std::min<std::size_t>(stream.size() - pos, 1 + rng() % 40);
            dec.feed(ByteView(stream.data() + pos, step));
            pos += step;
            while (auto f = dec.next()) got.push_back(std::move(*f));
        }
        EXPECT_EQ(got, frames);
        EXPECT_EQ(dec.buffered(), 0u);
    }
}

TEST(WireFrame, RejectsUnknownTypeAndOversizeLength) {
    for (std::uint8_t t : {0x00, 0x07, 0xff}) {
        wire::FrameDecoder dec;
        dec.feed(Bytes{t, 0, 0, 0, 0});
        EXPECT_THROW(dec.next(), Error);
    }
    wire::FrameDecoder dec;
    dec.feed(Bytes{0x04, 0x7f, 0xff, 0xff, 0xff});
    EXPECT_THROW(dec.next(), Error);
    wire::FrameDecoder partial;
    partial.feed(Bytes{0x06, 0x00, 0x00});
    EXPECT_FALSE(partial.next());
}

TEST(WirePayload, AckAndGapRequestRoundTrip) {
    Ack a;
    a.status = AckStatus::Rejected;
    a.channel_id = "teleradA";
    a.height = 42;
    a.tx_index = 3;
    a.tx_id = openssl_sha256(as_bytes("x"));
    a.validity = ledger::Validity::StaleRead;
    a.error = "Unauthorized";
    a.detail = "nope";
    EXPECT_EQ(Ack::decode(a.encode()), a);

    wire::GapRequest g{"teleradA", 9, "telerad", {}};
    g.signature = key_for("org:telerad").sign(g.signing_preimage());
    EXPECT_EQ(wire::GapRequest::decode(g.encode()), g);

    auto bytes = a.encode();
    for (std::size_t cut = 0; cut < bytes.size(); ++cut)
        EXPECT_THROW(Ack::decode(ByteView(bytes.data(), cut)), Error) << cut;
    bytes.push_back(0);
    EXPECT_THROW(Ack::decode(bytes), Error);
}

struct WireNet : Telerad, ::testing::Test {
    WireNet() : endpoint(net, 5ms) { port = endpoint.start("127.0.0.1", 0); }
    ~WireNet() override { endpoint.stop(); }

    wire::RemoteClient remote(const std::string& user) { return wire::RemoteClient("127.0.0.1", port, user, keys.at(user), clock.clock()); }

    wire::Endpoint endpoint;
    int port = 0;
};

TEST_F(WireNet, PayloadsRoundTripWithRealTransactions) {
    auto [tx, endorsements] =
        client("admin-a").prepare("teleradA", contracts::anchor_exam(exam_record("EX-W", "hospitalA", "doc-a")));
    wire::OrderSubmit s{tx, endorsements};
    auto back = wire::OrderSubmit::decode(s.encode());
    EXPECT_EQ(back.tx.encode(), tx.encode());
    ASSERT_EQ(back.endorsements.size(), endorsements.size());
    EXPECT_EQ(back.endorsements[0], endorsements[0]);

    anchor("EX-1");
    auto block = net.peer("peer0.telerad").ledger("teleradA").block_at(0);
    wire::BlockDeliver d{"teleradA", block};
    EXPECT_EQ(wire::BlockDeliver::decode(d.encode()).block.encode(), block.encode());
}

TEST_F(WireNet, RemoteInvokeCommitsOnTheNetwork) {
    auto c = remote("admin-a");
    auto r = c.invoke("teleradA", contracts::anchor_exam(exam_record("EX-R", "hospitalA", "doc-a")));
    EXPECT_EQ(r.commit.validity, ledger::Validity::Valid);
    EXPECT_EQ(r.commit.channel_id, "teleradA");
    for (const auto& pid : net.peers_on("teleradA")) {
        auto entry = net.peer(pid).ledger("teleradA").query_state(contracts::keys::exam("teleradA", "EX-R"));
        ASSERT_TRUE(entry) << pid;
    }
    auto on_chain = net.peer("peer0.telerad").ledger("teleradA").block_at(r.commit.height);
    EXPECT_EQ(on_chain.transactions[r.commit.tx_index].tx_id, r.tx_id);

    auto rad = remote("rad-001");
    auto req = rad.invoke("teleradA", contracts::request_access("EX-R", contracts::AccessReason::Interpretation, nonce_of(1)));
    EXPECT_EQ(contracts::AccessRequest::decode(req.response).exam_id, "EX-R");
}

TEST_F(WireNet, RemoteErrorsKeepTheirCode) {
    auto rad = remote("rad-001");
    try {
        rad.invoke("teleradA", contracts::anchor_exam(exam_record("EX-X", "hospitalA", "doc-a")));
        FAIL() << "radiologist anchored an exam";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Unauthorized);
    }
    try {
        rad.invoke("nochannel", contracts::anchor_exam(exam_record("EX-X", "hospitalA", "doc-a")));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownChannel);
    }
}

TEST(WireConnect, UnreachableEndpoint) {
    int port;
    {
        wire::Listener l("127.0.0.1", 0);
        port = l.port();
    }
    EXPECT_THROW(wire::Connection::connect("127.0.0.1", port, 500ms), Error);
}

TEST(WireConnect, BindFailureOnTakenPort) {
    wire::Listener l("127.0.0.1", 0);
    try {
        wire::Listener again("127.0.0.1", l.port());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BindFailure);
    }
}

void expect_identical(const ledger::Ledger& a, const ledger::Ledger& b) {
    ASSERT_EQ(a.height(), b.height()) << a.channel_id();
    for (std::uint64_t h = 0; h < a.height(); ++h) EXPECT_EQ(a.block_at(h).encode(), b.block_at(h).encode()) << h;
    EXPECT_EQ(a.canonical_state(), b.canonical_state());
    EXPECT_TRUE(b.verify_chain().ok);
}

TEST_F(WireNet, FollowerReplicatesChainsByteForByte) {
    anchor("EX-1");
    anchor("EX-2");
    grant("rad-001", "EX-1");
    client("admin-b").invoke("teleradB", contracts::anchor_exam(exam_record("EX-B", "hospitalB", "doc-b")));

    wire::Follower f("peer1.telerad", "telerad", key_for("org:telerad"), directory.root_key());
    f.connect("127.0.0.1", port);
    auto& src = net.peer("peer0.telerad");
    auto target = [&] {
        return std::map<std::string, std::uint64_t>{{"system", directory.system_ledger().height()},
                                                    {"teleradA", src.ledger("teleradA").height()},
                                                    {"teleradB", src.ledger("teleradB").height()}};
    };
    ASSERT_TRUE(f.sync_to(target(), 10s));
    expect_identical(directory.system_ledger(), f.directory().system_ledger());
    expect_identical(src.ledger("teleradA"), f.peer().ledger("teleradA"));
    expect_identical(src.ledger("teleradB"), f.peer().ledger("teleradB"));

    // live: a new user, their transaction, and a revocation arrive while connected
    enroll("rad-002", "telerad", identity::Role::Radiologist);
    anchor("EX-3");
    request("rad-002", "EX-3");
    auto late = client("rad-002").prepare("teleradA", contracts::request_access("EX-3", contracts::AccessReason::Interpretation, nonce_of(99)));
    revoke("rad-002");  // endorsed before, ordered after
    net.submit_for_ordering(late.first, late.second);
    net.flush();
    ASSERT_TRUE(f.sync_to(target(), 10s));
    expect_identical(directory.system_ledger(), f.directory().system_ledger());
    expect_identical(src.ledger("teleradA"), f.peer().ledger("teleradA"));
    auto tip = f.peer().ledger("teleradA").block_at(f.peer().ledger("teleradA").height() - 1);
    EXPECT_EQ(tip.validity_flags.back(), ledger::Validity::Unauthorized);
}

TEST_F(WireNet, FollowerOnlyReceivesItsOrgsChannels) {
    anchor("EX-1");
    wire::Follower f("peer1.hospitalB", "hospitalB", key_for("org:hospitalB"), directory.root_key());
    f.connect("127.0.0.1", port);
    ASSERT_TRUE(f.sync_to({{"system", directory.system_ledger().height()}}, 10s));
    f.pump(100ms);
    EXPECT_FALSE(f.peer().joined("teleradA"));
    EXPECT_TRUE(f.peer().joined("teleradB"));

    // asking for a foreign channel by hand is refused
    auto conn = wire::Connection::connect("127.0.0.1", port);
    wire::GapRequest g{"teleradA", 0, "hospitalB", {}};
    g.signature = key_for("org:hospitalB").sign(g.signing_preimage());
    conn.send({MessageType::GapRequest, g.encode()});
    auto reply = conn.receive(2s);
    ASSERT_TRUE(reply);
    ASSERT_EQ(reply->type, MessageType::Ack);
    auto a = Ack::decode(reply->payload);
    EXPECT_EQ(a.status, AckStatus::Rejected);
    EXPECT_EQ(a.error, "Unauthorized");
    EXPECT_FALSE(conn.receive(100ms));  // and no blocks follow
}

TEST_F(WireNet, FollowRequestNeedsTheOrgKey) {
    wire::Follower f("peer1.telerad", "telerad", key_for("someone-else"), directory.root_key());
    f.connect("127.0.0.1", port);
    try {
        f.pump(1s);
        FAIL() << "forged follow request accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BadSignature);
    }
}

TEST_F(WireNet, FollowerReportsGapsAndRecovers) {
    anchor("EX-1");
    anchor("EX-2");
    // Stand in for the endpoint so delivery order is under test control.
    wire::Listener fake("127.0.0.1", 0);
    wire::Follower f("peer1.telerad", "telerad", key_for("org:telerad"), directory.root_key());
    std::thread t([&] { f.connect("127.0.0.1", fake.port()); });
    auto conn = fake.accept(2s);
    t.join();
    ASSERT_TRUE(conn);
    auto first = conn->receive(1s);
    ASSERT_TRUE(first);
    EXPECT_EQ(wire::GapRequest::decode(first->payload).channel_id, "system");

    const auto& sys = directory.system_ledger();
    auto send_sys = [&](std::uint64_t h) {
        conn->send({MessageType::BlockDeliver, wire::BlockDeliver{"system", sys.block_at(h)}.encode()});
    };
    auto next_ack = [&] {
        for (;;) {
            f.pump(50ms);
            auto r = conn->receive(1s);
            if (!r) return Ack{};
            if (r->type == MessageType::Ack) return Ack::decode(r->payload);
        }
    };
    send_sys(2);
    auto gap = next_ack();
    EXPECT_EQ(gap.status, AckStatus::GapDetected);
    EXPECT_EQ(gap.height, 0u);

    send_sys(0);
    EXPECT_EQ(next_ack().status, AckStatus::Committed);
    auto corrupted = sys.block_at(1);
    corrupted.header.previous_hash[0] ^= 1;
    conn->send({MessageType::BlockDeliver, wire::BlockDeliver{"system", corrupted}.encode()});
    auto bad = next_ack();
    EXPECT_EQ(bad.status, AckStatus::HashMismatch);
    EXPECT_EQ(bad.height, 1u);
    send_sys(0);
    EXPECT_EQ(next_ack().status, AckStatus::Duplicate);
    for (std::uint64_t h = 1; h < sys.height(); ++h) send_sys(h);
    for (std::uint64_t h = 1; h < sys.height(); ++h) EXPECT_EQ(next_ack().status, AckStatus::Committed);
    expect_identical(sys, f.directory().system_ledger());
    EXPECT_TRUE(f.directory().certificate("rad-001"));
}

TEST(ReplicaDirectory, CannotSign) {
    TestNet t;
    identity::Directory replica(t.directory.root_key());
    EXPECT_TRUE(replica.is_replica());
    try {
        replica.add_organization("x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Unauthorized);
    }
    EXPECT_EQ(replica.system_ledger().height(), 0u);
}

}  // namespace
}  // namespace radchain::testing
