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

#include "radchain/wire.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace radchain::wire {

using ledger::Block;
using ledger::Transaction;

std::string_view to_string(MessageType t) noexcept {
    switch (t) {
        case MessageType::Proposal: return "Proposal";
        case MessageType::Endorsement: return "Endorsement";
        case MessageType::OrderSubmit: return "OrderSubmit";
        case MessageType::BlockDeliver: return "BlockDeliver";
        case MessageType::GapRequest: return "GapRequest";
        case MessageType::Ack: return "Ack";
    }
    return "Unknown";
}

std::string_view to_string(AckStatus s) noexcept {
    switch (s) {
        case AckStatus::Ok: return "Ok";
        case AckStatus::Committed: return "Committed";
        case AckStatus::Duplicate: return "Duplicate";
        case AckStatus::GapDetected: return "GapDetected";
        case AckStatus::HashMismatch: return "HashMismatch";
        case AckStatus::Rejected: return "Rejected";
    }
    return "Unknown";
}

// ---------------------------------------------------------------------------
// Framing
// ---------------------------------------------------------------------------

Bytes encode_frame(const Frame& frame) {
    if (frame.payload.size() > kMaxPayload) throw Error(ErrorCode::MalformedEncoding, "frame payload too large");
    Encoder enc;
    enc.u8(static_cast<std::uint8_t>(frame.type)).blob(frame.payload);
    return std::move(enc).bytes();
}

void FrameDecoder::feed(ByteView bytes) {
    if (offset_ > 0 && offset_ == buffer_.size()) {
        buffer_.clear();
        offset_ = 0;
    }
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::next() {
    if (buffered() < kFrameHeaderSize) return std::nullopt;
    const auto* p = buffer_.data() + offset_;
    const auto type = p[0];
    if (type < 0x01 || type > 0x06) throw Error(ErrorCode::MalformedEncoding, "unknown frame type");
    const std::uint32_t len = (std::uint32_t(p[1]) << 24) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 8) | p[4];
    if (len > kMaxPayload) throw Error(ErrorCode::MalformedEncoding, "frame length above limit");
    if (buffered() < kFrameHeaderSize + len) return std::nullopt;
    Frame f{static_cast<MessageType>(type), Bytes(p + kFrameHeaderSize, p + kFrameHeaderSize + len)};
    offset_ += kFrameHeaderSize + len;
    if (offset_ > 1 << 20 && offset_ * 2 > buffer_.size()) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
        offset_ = 0;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Payloads
// ---------------------------------------------------------------------------

Bytes OrderSubmit::encode() const {
    Encoder enc;
    enc.blob(tx.encode()).count(endorsements.size());
    for (const auto& e : endorsements) enc.blob(e.encode());
    return std::move(enc).bytes();
}

OrderSubmit OrderSubmit::decode(ByteView bytes) {
    Decoder dec(bytes);
    OrderSubmit out;
    out.tx = Transaction::decode(dec.blob());
    const auto n = dec.count(4);
    for (std::size_t i = 0; i < n; ++i) out.endorsements.push_back(network::Endorsement::decode(dec.blob()));
    dec.expect_done();
    return out;
}

Bytes BlockDeliver::encode() const {
    Encoder enc;
    enc.str(channel_id).blob(block.encode());
    return std::move(enc).bytes();
}

BlockDeliver BlockDeliver::decode(ByteView bytes) {
    Decoder dec(bytes);
    BlockDeliver out;
    out.channel_id = dec.str();
    out.block = Block::decode(dec.blob());
    dec.expect_done();
    return out;
}

Bytes GapRequest::signing_preimage() const {
    Encoder enc;
    enc.str("radchain-follow").str(channel_id).u64(from_height).str(org_id);
    return std::move(enc).bytes();
}

Bytes GapRequest::encode() const {
    Encoder enc;
    enc.str(channel_id).u64(from_height).str(org_id).raw(signature);
    return std::move(enc).bytes();
}

GapRequest GapRequest::decode(ByteView bytes) {
    Decoder dec(bytes);
    GapRequest out;
    out.channel_id = dec.str();
    out.from_height = dec.u64();
    out.org_id = dec.str();
    out.signature = dec.fixed<crypto::kSignatureSize>();
    dec.expect_done();
    return out;
}

Bytes Ack::encode() const {
    Encoder enc;
    enc.u8(static_cast<std::uint8_t>(status))
        .str(channel_id)
        .u64(height)
        .u32(tx_index)
        .raw(tx_id)
        .u8(static_cast<std::uint8_t>(validity))
        .str(error)
        .str(detail);
    return std::move(enc).bytes();
}

Ack Ack::decode(ByteView bytes) {
    Decoder dec(bytes);
    Ack out;
    auto status = dec.u8();
    if (status > static_cast<std::uint8_t>(AckStatus::Rejected)) throw Error(ErrorCode::MalformedEncoding, "ack status");
    out.status = static_cast<AckStatus>(status);
    out.channel_id = dec.str();
    out.height = dec.u64();
    out.tx_index = dec.u32();
    out.tx_id = dec.fixed<32>();
    auto validity = dec.u8();
    if (validity > static_cast<std::uint8_t>(ledger::Validity::Unauthorized))
        throw Error(ErrorCode::MalformedEncoding, "ack validity");
    out.validity = static_cast<ledger::Validity>(validity);
    out.error = dec.str();
    out.detail = dec.str();
    dec.expect_done();
    return out;
}

namespace {

Frame frame_of(MessageType t, Bytes payload) { return {t, std::move(payload)}; }

Ack rejection(ErrorCode code, std::string detail, std::string channel = {}) {
    Ack a;
    a.status = AckStatus::Rejected;
    a.channel_id = std::move(channel);
    a.error = std::string(to_string(code));
    a.detail = std::move(detail);
    return a;
}

[[noreturn]] void throw_remote(const Ack& a) {
    auto code = parse_error_code(a.error).value_or(ErrorCode::ContractError);
    throw Error(code, a.detail);
}

bool wait_fd(int fd, short events, std::chrono::milliseconds timeout) {
    pollfd p{fd, events, 0};
    int rc;
    do {
        rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    } while (rc < 0 && errno == EINTR);
    return rc > 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sockets
// ---------------------------------------------------------------------------

Connection Connection::connect(const std::string& host, int port, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
        throw Error(ErrorCode::NetworkUnreachable, "cannot resolve " + host);
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);
    for (auto* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS && wait_fd(fd, POLLOUT, timeout)) {
            int err = 0;
            socklen_t len = sizeof(err);
            ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
            rc = err == 0 ? 0 : -1;
        }
        if (rc == 0) {
            ::fcntl(fd, F_SETFL, flags);
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            return Connection(fd);
        }
        ::close(fd);
    }
    throw Error(ErrorCode::NetworkUnreachable, host + ":" + std::to_string(port));
}

Connection::Connection(Connection&& other) noexcept : fd_(other.fd_), decoder_(std::move(other.decoder_)) {
    other.fd_ = -1;
}

Connection& Connection::operator=(Connection&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        decoder_ = std::move(other.decoder_);
        other.fd_ = -1;
    }
    return *this;
}

Connection::~Connection() { close(); }

void Connection::close() noexcept {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

void Connection::send(const Frame& frame) {
    if (fd_ < 0) throw Error(ErrorCode::NetworkUnreachable, "connection closed");
    const auto bytes = encode_frame(frame);
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        auto n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw Error(ErrorCode::NetworkUnreachable, std::strerror(errno));
        sent += static_cast<std::size_t>(n);
    }
}

std::optional<Frame> Connection::receive(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::uint8_t buf[64 * 1024];
    for (;;) {
        if (auto f = decoder_.next()) return f;
        if (fd_ < 0) throw Error(ErrorCode::NetworkUnreachable, "connection closed");
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() < 0) left = std::chrono::milliseconds(0);
        if (!wait_fd(fd_, POLLIN, left)) {
            if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
            continue;
        }
        auto n = ::recv(fd_, buf, sizeof(buf), 0);
        if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
        if (n <= 0) {
            close();
            throw Error(ErrorCode::NetworkUnreachable, "peer closed the connection");
        }
        decoder_.feed(ByteView(buf, static_cast<std::size_t>(n)));
    }
}

Listener::Listener(const std::string& host, int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) throw Error(ErrorCode::BindFailure, std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    const std::string ip = host == "localhost" ? "127.0.0.1" : host;
    if (::inet_pton(AF_INET, ip.c_str(), &addr.sin_addr) != 1 ||
        ::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 64) != 0) {
        auto why = std::string(std::strerror(errno));
        close();
        throw Error(ErrorCode::BindFailure, host + ":" + std::to_string(port) + " " + why);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Listener::~Listener() { close(); }

void Listener::close() noexcept {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

std::optional<Connection> Listener::accept(std::chrono::milliseconds timeout) {
    if (fd_ < 0 || !wait_fd(fd_, POLLIN, timeout)) return std::nullopt;
    int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) return std::nullopt;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Connection(fd);
}

// ---------------------------------------------------------------------------
// Endpoint
// ---------------------------------------------------------------------------

Endpoint::Endpoint(network::Network& network, std::chrono::milliseconds poll) : network_(network), poll_(poll) {}

Endpoint::~Endpoint() { stop(); }

int Endpoint::start(const std::string& host, int port) {
    listener_ = std::make_unique<Listener>(host, port);
    port_ = listener_->port();
    stopping_ = false;
    acceptor_ = std::thread([this] { accept_loop(); });
    return port_;
}

void Endpoint::stop() {
    stopping_ = true;
    if (acceptor_.joinable()) acceptor_.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(workers_mutex_);
        workers.swap(workers_);
    }
    for (auto& t : workers)
        if (t.joinable()) t.join();
    if (listener_) listener_->close();
}

void Endpoint::accept_loop() {
    while (!stopping_) {
        auto conn = listener_->accept(poll_);
        if (!conn) continue;
        std::lock_guard lock(workers_mutex_);
        workers_.emplace_back([this, c = std::move(*conn)]() mutable { serve(std::move(c)); });
    }
}

void Endpoint::serve(Connection conn) {
    ++active_;
    const std::string system(identity::kSystemChannel);
    std::map<std::string, std::uint64_t> next;  // subscriptions: channel -> next height to send
    auto& dir = network_.directory();

    auto handle = [&](const Frame& f) {
        switch (f.type) {
            case MessageType::Proposal: {
                auto proposal = network::Proposal::decode(f.payload);
                std::vector<network::Endorsement> endorsements;
                {
                    std::lock_guard lock(network_.mutex());
                    const auto& ch = network_.channel(proposal.draft.channel_id);
                    auto cert = dir.certificate(proposal.draft.creator);
                    const std::string own = cert ? cert->org_id : std::string();
                    std::vector<std::string> orgs;
                    if (ch.member_orgs.count(own)) orgs.push_back(own);
                    for (const auto& o : ch.member_orgs)
                        if (o != own) orgs.push_back(o);
                    const auto peers = network_.peers_on(ch.channel_id);
                    for (const auto& org : orgs) {
                        if (endorsements.size() >= ch.endorsement_threshold) break;
                        auto pid = std::find_if(peers.begin(), peers.end(), [&](const std::string& id) {
                            return network_.peer(id).org_id() == org;
                        });
                        if (pid == peers.end()) continue;
                        auto result = network_.endorse(*pid, proposal);
                        if (auto* rej = std::get_if<network::Rejection>(&result)) {
                            conn.send(frame_of(MessageType::Ack, rejection(rej->code, rej->detail).encode()));
                            return;
                        }
                        endorsements.push_back(std::get<network::Endorsement>(std::move(result)));
                    }
                }
                if (endorsements.empty()) {
                    conn.send(frame_of(MessageType::Ack,
                                       rejection(ErrorCode::InsufficientEndorsements, "no endorsing peer").encode()));
                    return;
                }
                for (const auto& e : endorsements) conn.send(frame_of(MessageType::Endorsement, e.encode()));
                conn.send(frame_of(MessageType::Ack, Ack{}.encode()));
                return;
            }
            case MessageType::OrderSubmit: {
                auto submit = OrderSubmit::decode(f.payload);
                if (submit.endorsements.empty())
                    return conn.send(frame_of(MessageType::Ack,
                                              rejection(ErrorCode::InsufficientEndorsements, "none").encode()));
                std::optional<network::CommitRecord> commit;
                {
                    std::lock_guard lock(network_.mutex());
                    network_.submit_for_ordering(submit.tx, submit.endorsements);
                    network_.flush();
                    commit = network_.commit_on(submit.endorsements.front().peer_id, submit.tx.tx_id);
                }
                if (!commit)
                    return conn.send(frame_of(MessageType::Ack,
                                              rejection(ErrorCode::PersistenceFailure, "not committed").encode()));
                Ack a;
                a.status = AckStatus::Committed;
                a.channel_id = commit->channel_id;
                a.height = commit->height;
                a.tx_index = commit->tx_index;
                a.tx_id = submit.tx.tx_id;
                a.validity = commit->validity;
                return conn.send(frame_of(MessageType::Ack, a.encode()));
            }
            case MessageType::GapRequest: {
                auto req = GapRequest::decode(f.payload);
                auto key = network_.org_key(req.org_id);
                if (!key || !crypto::verify(*key, req.signing_preimage(), req.signature))
                    return conn.send(frame_of(MessageType::Ack,
                                              rejection(ErrorCode::BadSignature, req.org_id, req.channel_id).encode()));
                bool member = req.channel_id == system || dir.channels_of(req.org_id).count(req.channel_id) > 0;
                bool exists = req.channel_id == system || dir.channel_exists(req.channel_id);
                if (!exists)
                    return conn.send(frame_of(MessageType::Ack,
                                              rejection(ErrorCode::UnknownChannel, {}, req.channel_id).encode()));
                if (!member)
                    return conn.send(frame_of(MessageType::Ack,
                                              rejection(ErrorCode::Unauthorized, {}, req.channel_id).encode()));
                next[req.channel_id] = req.from_height;
                return;
            }
            case MessageType::Ack: {
                auto ack = Ack::decode(f.payload);
                auto it = next.find(ack.channel_id);
                if (it != next.end() &&
                    (ack.status == AckStatus::GapDetected || ack.status == AckStatus::HashMismatch))
                    it->second = ack.height;
                return;
            }
            default:
                conn.send(frame_of(MessageType::Ack,
                                   rejection(ErrorCode::MalformedEncoding, "unexpected frame type").encode()));
        }
    };

    auto push = [&] {
        if (next.empty()) return;
        // Application tips are read before the identity tip so every
        // certificate a sent block depends on goes out ahead of it.
        std::vector<BlockDeliver> out;
        {
            std::lock_guard lock(network_.mutex());
            std::map<std::string, std::uint64_t> tips;
            for (const auto& [ch, _] : next)
                if (ch != system) tips[ch] = network_.orderer().blocks(ch).size();
            const auto& sys = dir.system_ledger();
            if (auto it = next.find(system); it != next.end()) {
                for (auto h = it->second, tip = sys.height(); h < tip; ++h) out.push_back({system, sys.block_at(h)});
                it->second = std::max(it->second, sys.height());
            }
            for (auto& [ch, h] : next) {
                if (ch == system) continue;
                const auto& blocks = network_.orderer().blocks(ch);
                for (; h < tips[ch]; ++h) out.push_back({ch, blocks[h]});
            }
        }
        for (const auto& d : out) conn.send(frame_of(MessageType::BlockDeliver, d.encode()));
    };

    try {
        while (!stopping_) {
            auto f = conn.receive(poll_);
            if (f) {
                try {
                    handle(*f);
                } catch (const Error& e) {
                    if (e.code() == ErrorCode::NetworkUnreachable) throw;
                    conn.send(frame_of(MessageType::Ack, rejection(e.code(), e.detail()).encode()));
                }
            }
            push();
        }
    } catch (const Error&) {
        // peer went away or sent an undecodable stream
    }
    --active_;
}

// ---------------------------------------------------------------------------
// RemoteClient
// ---------------------------------------------------------------------------

RemoteClient::RemoteClient(const std::string& host, int port, std::string user_id, crypto::KeyPair key, Clock clock)
    : conn_(Connection::connect(host, port)), user_id_(std::move(user_id)), key_(std::move(key)), clock_(std::move(clock)) {}

Ack RemoteClient::await_ack() {
    for (;;) {
        auto f = conn_.receive(std::chrono::seconds(30));
        if (!f) throw Error(ErrorCode::NetworkUnreachable, "timed out waiting for the endpoint");
        if (f->type == MessageType::Ack) return Ack::decode(f->payload);
    }
}

network::InvokeResult RemoteClient::invoke(const std::string& channel_id, const contracts::Draft& draft) {
    network::Proposal p;
    p.draft.channel_id = channel_id;
    p.draft.contract = draft.contract;
    p.draft.operation = draft.operation;
    p.draft.args = draft.args;
    p.draft.creator = user_id_;
    p.draft.proposal_time = clock_();
    p.signature = key_.sign(p.draft.proposal_preimage());
    conn_.send(frame_of(MessageType::Proposal, p.encode()));

    std::vector<network::Endorsement> endorsements;
    for (;;) {
        auto f = conn_.receive(std::chrono::seconds(30));
        if (!f) throw Error(ErrorCode::NetworkUnreachable, "timed out waiting for endorsements");
        if (f->type == MessageType::Endorsement) {
            endorsements.push_back(network::Endorsement::decode(f->payload));
            continue;
        }
        if (f->type != MessageType::Ack) continue;
        auto a = Ack::decode(f->payload);
        if (a.status == AckStatus::Rejected) throw_remote(a);
        break;
    }
    if (endorsements.empty()) throw Error(ErrorCode::InsufficientEndorsements, "endpoint returned none");

    OrderSubmit submit;
    submit.tx = p.draft;
    submit.tx.read_set = endorsements.front().read_set;
    submit.tx.write_set = endorsements.front().write_set;
    submit.tx.seal(key_);
    submit.endorsements = endorsements;
    conn_.send(frame_of(MessageType::OrderSubmit, submit.encode()));
    auto a = await_ack();
    if (a.status == AckStatus::Rejected) throw_remote(a);

    network::InvokeResult out;
    out.tx_id = submit.tx.tx_id;
    out.response = endorsements.front().response;
    out.commit = {a.channel_id, a.height, a.tx_index, a.validity};
    if (a.validity != ledger::Validity::Valid)
        throw Error(ErrorCode::TransactionInvalidated, std::string(ledger::to_string(a.validity)));
    return out;
}

// ---------------------------------------------------------------------------
// Follower
// ---------------------------------------------------------------------------

Follower::Follower(std::string peer_id, std::string org_id, crypto::KeyPair org_key, const crypto::PublicKey& ca_root,
                   std::optional<std::filesystem::path> data_dir)
    : org_id_(std::move(org_id)), org_key_(std::move(org_key)) {
    ledger::LedgerOptions sys;
    sys.directory = data_dir;
    directory_ = std::make_unique<identity::Directory>(ca_root, sys);
    directory_->set_action_resolver(contracts::required_actions);
    peer_ = std::make_unique<network::Peer>(std::move(peer_id), org_id_, org_key_, *directory_, data_dir);
    for (const auto& ch : directory_->channels_of(org_id_))
        if (ch != identity::kSystemChannel) peer_->join(ch);
}

void Follower::request(const std::string& channel_id, std::uint64_t from) {
    GapRequest req{channel_id, from, org_id_, {}};
    req.signature = org_key_.sign(req.signing_preimage());
    conn_.send(frame_of(MessageType::GapRequest, req.encode()));
    followed_.insert(channel_id);
}

void Follower::connect(const std::string& host, int port) {
    conn_ = Connection::connect(host, port);
    followed_.clear();
    request(std::string(identity::kSystemChannel), directory_->system_ledger().height());
    follow_new_channels();
}

void Follower::follow_new_channels() {
    for (const auto& ch : directory_->channels_of(org_id_)) {
        if (ch == identity::kSystemChannel || followed_.count(ch)) continue;
        peer_->join(ch);
        request(ch, peer_->ledger(ch).height());
    }
}

std::map<std::string, std::uint64_t> Follower::heights() const {
    std::map<std::string, std::uint64_t> out;
    out[std::string(identity::kSystemChannel)] = directory_->system_ledger().height();
    for (const auto& ch : peer_->channels()) out[ch] = peer_->ledger(ch).height();
    return out;
}

std::size_t Follower::pump(std::chrono::milliseconds budget) {
    const auto deadline = std::chrono::steady_clock::now() + budget;
    std::size_t applied = 0;
    while (std::chrono::steady_clock::now() < deadline) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        auto f = conn_.receive(left);
        if (!f) break;
        if (f->type == MessageType::Ack) {
            auto a = Ack::decode(f->payload);
            if (a.status == AckStatus::Rejected) throw_remote(a);
            continue;
        }
        if (f->type != MessageType::BlockDeliver) continue;
        auto d = BlockDeliver::decode(f->payload);
        Ack ack;
        ack.channel_id = d.channel_id;
        if (d.channel_id == identity::kSystemChannel) {
            const auto before = directory_->system_ledger().height();
            try {
                if (d.block.header.height < before) {
                    ack.status = AckStatus::Duplicate;
                } else {
                    directory_->commit_system_block(d.block);
                    ack.status = AckStatus::Committed;
                    ++applied;
                }
            } catch (const Error& e) {
                if (e.code() != ErrorCode::GapDetected && e.code() != ErrorCode::HashMismatch) throw;
                ack.status = e.code() == ErrorCode::GapDetected ? AckStatus::GapDetected : AckStatus::HashMismatch;
            }
            ack.height = directory_->system_ledger().height();
            follow_new_channels();
        } else {
            auto r = peer_->deliver(d.channel_id, d.block);
            switch (r.status) {
                case network::DeliveryStatus::Committed:
                    ack.status = AckStatus::Committed;
                    ++applied;
                    break;
                case network::DeliveryStatus::Duplicate: ack.status = AckStatus::Duplicate; break;
                case network::DeliveryStatus::GapDetected: ack.status = AckStatus::GapDetected; break;
                case network::DeliveryStatus::HashMismatch: ack.status = AckStatus::HashMismatch; break;
                case network::DeliveryStatus::NotJoined: continue;
            }
            ack.height = r.expected_height;
        }
        conn_.send(frame_of(MessageType::Ack, ack.encode()));
    }
    return applied;
}

bool Follower::sync_to(const std::map<std::string, std::uint64_t>& heights, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    auto reached = [&] {
        auto have = this->heights();
        return std::all_of(heights.begin(), heights.end(), [&](const auto& kv) {
            auto it = have.find(kv.first);
            return it != have.end() && it->second >= kv.second;
        });
    };
    while (!reached()) {
        if (std::chrono::steady_clock::now() >= deadline) return false;
        pump(std::chrono::milliseconds(50));
    }
    return true;
}

}  // namespace radchain::wire
