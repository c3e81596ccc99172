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

// TCP transport. Frames are [u8 type | u32 big-endian length | payload];
// payloads are the canonical encodings used in-process.
//
// One Endpoint fronts a Network: remote clients send Proposal and
// OrderSubmit frames, remote peers send GapRequest to follow a channel and
// Ack each delivered block.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "radchain/codec.hpp"
#include "radchain/network.hpp"

namespace radchain::wire {

enum class MessageType : std::uint8_t {
    Proposal = 0x01,
    Endorsement = 0x02,
    OrderSubmit = 0x03,
    BlockDeliver = 0x04,
    GapRequest = 0x05,
    Ack = 0x06,
};

std::string_view to_string(MessageType t) noexcept;

inline constexpr std::size_t kFrameHeaderSize = 5;
inline constexpr std::uint32_t kMaxPayload = 64u << 20;

struct Frame {
    MessageType type = MessageType::Ack;
    Bytes payload;

    bool operator==(const Frame&) const = default;
};

Bytes encode_frame(const Frame& frame);

/// Reassembles frames from an arbitrary split of the byte stream. Throws
/// MalformedEncoding on an unknown type or a length above kMaxPayload.
class FrameDecoder {
public:
    void feed(ByteView bytes);
    std::optional<Frame> next();
    std::size_t buffered() const noexcept { return buffer_.size() - offset_; }

private:
    Bytes buffer_;
    std::size_t offset_ = 0;
};

struct OrderSubmit {
    ledger::Transaction tx;
    std::vector<network::Endorsement> endorsements;

    Bytes encode() const;
    static OrderSubmit decode(ByteView bytes);
};

struct BlockDeliver {
    std::string channel_id;
    ledger::Block block;

    Bytes encode() const;
    static BlockDeliver decode(ByteView bytes);
};

/// Subscribe to (or rewind) a channel from a height. Signed by the
/// follower's organisation key; the channel must include that organisation.
struct GapRequest {
    std::string channel_id;
    std::uint64_t from_height = 0;
    std::string org_id;
    crypto::Signature signature{};

    Bytes signing_preimage() const;
    Bytes encode() const;
    static GapRequest decode(ByteView bytes);
    bool operator==(const GapRequest&) const = default;
};

enum class AckStatus : std::uint8_t {
    Ok = 0,             // end of an endorsement reply
    Committed = 1,      // ordered transaction committed, or block applied by a follower
    Duplicate = 2,      // follower already had the block
    GapDetected = 3,    // follower expects `height`
    HashMismatch = 4,   // follower rejected the block; resend from `height`
    Rejected = 5,       // request failed with `error`
};

std::string_view to_string(AckStatus s) noexcept;

struct Ack {
    AckStatus status = AckStatus::Ok;
    std::string channel_id;
    std::uint64_t height = 0;
    std::uint32_t tx_index = 0;
    crypto::Hash tx_id{};
    ledger::Validity validity = ledger::Validity::Valid;
    std::string error;  // ErrorCode name when Rejected
    std::string detail;

    Bytes encode() const;
    static Ack decode(ByteView bytes);
    bool operator==(const Ack&) const = default;
};

/// Blocking stream socket carrying frames.
class Connection {
public:
    /// Throws NetworkUnreachable.
    static Connection connect(const std::string& host, int port,
                              std::chrono::milliseconds timeout = std::chrono::seconds(5));

    Connection() = default;
    explicit Connection(int fd) : fd_(fd) {}
    Connection(Connection&& other) noexcept;
    Connection& operator=(Connection&& other) noexcept;
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;
    ~Connection();

    /// Throws NetworkUnreachable when the peer is gone.
    void send(const Frame& frame);
    /// Next frame, or nullopt if none arrived within timeout. Throws
    /// NetworkUnreachable once the peer has closed.
    std::optional<Frame> receive(std::chrono::milliseconds timeout);

    bool open() const noexcept { return fd_ >= 0; }
    void close() noexcept;

private:
    int fd_ = -1;
    FrameDecoder decoder_;
};

class Listener {
public:
    /// Port 0 picks a free port. Throws BindFailure.
    Listener(const std::string& host, int port);
    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    int port() const noexcept { return port_; }
    std::optional<Connection> accept(std::chrono::milliseconds timeout);
    void close() noexcept;

private:
    int fd_ = -1;
    int port_ = 0;
};

/// Serves a Network over TCP. Each connection gets its own thread.
class Endpoint {
public:
    explicit Endpoint(network::Network& network, std::chrono::milliseconds poll = std::chrono::milliseconds(20));
    ~Endpoint();

    int start(const std::string& host, int port);
    void stop();
    int port() const noexcept { return port_; }
    std::size_t connections() const noexcept { return active_.load(); }

private:
    void accept_loop();
    void serve(Connection conn);

    network::Network& network_;
    std::chrono::milliseconds poll_;
    std::unique_ptr<Listener> listener_;
    std::thread acceptor_;
    std::mutex workers_mutex_;
    std::vector<std::thread> workers_;
    std::atomic<bool> stopping_{false};
    std::atomic<std::size_t> active_{0};
    int port_ = 0;
};

/// Remote counterpart of network::Client.
class RemoteClient {
public:
    RemoteClient(const std::string& host, int port, std::string user_id, crypto::KeyPair key,
                 Clock clock = system_clock());

    /// Endorse, seal, order and wait for the commit. Throws the remote error
    /// code, or TransactionInvalidated for a non-Valid commit.
    network::InvokeResult invoke(const std::string& channel_id, const contracts::Draft& draft);

private:
    Ack await_ack();

    Connection conn_;
    std::string user_id_;
    crypto::KeyPair key_;
    Clock clock_;
};

/// A peer in another process. It keeps a replica of the identity channel and
/// re-validates every block it is sent against that replica.
class Follower {
public:
    Follower(std::string peer_id, std::string org_id, crypto::KeyPair org_key, const crypto::PublicKey& ca_root,
             std::optional<std::filesystem::path> data_dir = std::nullopt);

    /// Connect and request every channel from the local heights.
    void connect(const std::string& host, int port);
    /// Handle frames for up to `budget`; returns the number of blocks applied.
    std::size_t pump(std::chrono::milliseconds budget);
    /// Pump until every followed channel reaches the given heights or the timeout passes.
    bool sync_to(const std::map<std::string, std::uint64_t>& heights, std::chrono::milliseconds timeout);

    const identity::Directory& directory() const noexcept { return *directory_; }
    network::Peer& peer() noexcept { return *peer_; }
    std::map<std::string, std::uint64_t> heights() const;

private:
    void follow_new_channels();
    void request(const std::string& channel_id, std::uint64_t from);

    std::string org_id_;
    crypto::KeyPair org_key_;
    std::unique_ptr<identity::Directory> directory_;
    std::unique_ptr<network::Peer> peer_;
    Connection conn_;
    std::set<std::string> followed_;
};

}  // namespace radchain::wire
