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

#include "radchain/network.hpp"

#include <algorithm>

namespace radchain::network {

using identity::Action;
using ledger::Block;
using ledger::Transaction;

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

Bytes Proposal::encode() const {
    Encoder enc;
    enc.blob(draft.encode()).raw(signature);
    return std::move(enc).bytes();
}

Proposal Proposal::decode(ByteView bytes) {
    Decoder dec(bytes);
    Proposal p;
    p.draft = Transaction::decode(dec.blob());
    p.signature = dec.fixed<crypto::kSignatureSize>();
    dec.expect_done();
    return p;
}

Bytes Endorsement::signed_bytes(const Transaction& draft, const std::vector<ledger::ReadEntry>& reads,
                                const std::vector<ledger::WriteEntry>& writes) {
    Encoder enc;
    enc.blob(draft.proposal_preimage());
    ledger::encode_read_set(enc, reads);
    ledger::encode_write_set(enc, writes);
    return std::move(enc).bytes();
}

Bytes Endorsement::rw_bytes() const {
    Encoder enc;
    ledger::encode_read_set(enc, read_set);
    ledger::encode_write_set(enc, write_set);
    return std::move(enc).bytes();
}

Bytes Endorsement::encode() const {
    Encoder enc;
    enc.str(peer_id).str(org_id);
    ledger::encode_read_set(enc, read_set);
    ledger::encode_write_set(enc, write_set);
    enc.blob(response).raw(signature);
    return std::move(enc).bytes();
}

Endorsement Endorsement::decode(Decoder& dec) {
    Endorsement e;
    e.peer_id = dec.str();
    e.org_id = dec.str();
    e.read_set = ledger::decode_read_set(dec);
    e.write_set = ledger::decode_write_set(dec);
    e.response = dec.blob();
    e.signature = dec.fixed<crypto::kSignatureSize>();
    return e;
}

Endorsement Endorsement::decode(ByteView bytes) {
    Decoder dec(bytes);
    auto e = decode(dec);
    dec.expect_done();
    return e;
}

std::string_view to_string(RejectReason r) noexcept {
    switch (r) {
        case RejectReason::BadSignature: return "BadSignature";
        case RejectReason::Unauthorized: return "Unauthorized";
        case RejectReason::ContractError: return "ContractError";
        case RejectReason::NotJoined: return "NotJoined";
    }
    return "?";
}

std::int64_t RetryPolicy::delay(std::uint32_t attempt) const noexcept {
    std::int64_t d = base_ms;
    for (std::uint32_t i = 0; i < attempt && d < cap_ms; ++i) d *= factor;
    return std::min(d, cap_ms);
}

// ---------------------------------------------------------------------------
// Peer
// ---------------------------------------------------------------------------

Peer::Peer(std::string peer_id, std::string org_id, crypto::KeyPair org_key, const identity::Directory& directory,
           std::optional<std::filesystem::path> data_dir, std::uint64_t snapshot_interval)
    : peer_id_(std::move(peer_id)),
      org_id_(std::move(org_id)),
      org_key_(std::move(org_key)),
      directory_(directory),
      data_dir_(std::move(data_dir)),
      snapshot_interval_(snapshot_interval) {}

void Peer::join(const std::string& channel_id) {
    if (ledgers_.count(channel_id)) return;
    ledger::LedgerOptions opts;
    opts.directory = data_dir_;
    opts.snapshot_interval = snapshot_interval_;
    ledgers_.emplace(channel_id, std::make_unique<ledger::Ledger>(channel_id, directory_, opts));
}

bool Peer::joined(const std::string& channel_id) const { return ledgers_.count(channel_id) > 0; }

std::set<std::string> Peer::channels() const {
    std::set<std::string> out;
    for (const auto& [id, _] : ledgers_) out.insert(id);
    return out;
}

ledger::Ledger& Peer::ledger(const std::string& channel_id) {
    auto it = ledgers_.find(channel_id);
    if (it == ledgers_.end()) throw Error(ErrorCode::NotJoined, peer_id_ + " on " + channel_id);
    return *it->second;
}

const ledger::Ledger& Peer::ledger(const std::string& channel_id) const {
    auto it = ledgers_.find(channel_id);
    if (it == ledgers_.end()) throw Error(ErrorCode::NotJoined, peer_id_ + " on " + channel_id);
    return *it->second;
}

EndorseResult Peer::endorse(const Proposal& proposal) const {
    const Transaction& tx = proposal.draft;
    auto it = ledgers_.find(tx.channel_id);
    if (it == ledgers_.end()) return Rejection{RejectReason::NotJoined, ErrorCode::NotJoined, tx.channel_id};

    auto cert = directory_.certificate(tx.creator);
    if (!cert || !crypto::verify(cert->public_key, tx.proposal_preimage(), proposal.signature))
        return Rejection{RejectReason::BadSignature, ErrorCode::BadSignature, tx.creator};
    if (auto d = directory_.check_membership(tx.creator, tx.channel_id); !d)
        return Rejection{RejectReason::Unauthorized, ErrorCode::Unauthorized, std::string(identity::to_string(d.reason()))};
    auto actions = contracts::required_actions(tx);
    if (std::none_of(actions.begin(), actions.end(), [&](Action a) { return identity::role_allows(cert->role, a); }))
        return Rejection{RejectReason::Unauthorized, ErrorCode::Unauthorized, "RoleForbidden"};

    contracts::Execution exec;
    try {
        exec = it->second->with_state(
            [&](const ledger::WorldState& state) { return contracts::execute(tx, state, directory_); });
    } catch (const Error& e) {
        auto reason = e.code() == ErrorCode::Unauthorized ? RejectReason::Unauthorized : RejectReason::ContractError;
        return Rejection{reason, e.code(), e.detail()};
    }

    Endorsement out;
    out.peer_id = peer_id_;
    out.org_id = org_id_;
    out.read_set = std::move(exec.reads);
    out.write_set = std::move(exec.writes);
    out.response = std::move(exec.response);
    out.signature = org_key_.sign(Endorsement::signed_bytes(tx, out.read_set, out.write_set));
    return out;
}

DeliveryResult Peer::deliver(const std::string& channel_id, const Block& block) {
    auto it = ledgers_.find(channel_id);
    if (it == ledgers_.end()) return {DeliveryStatus::NotJoined, 0};
    auto& l = *it->second;
    const bool duplicate = block.header.height < l.height();
    try {
        l.commit_block(block);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::GapDetected) return {DeliveryStatus::GapDetected, l.height()};
        if (e.code() == ErrorCode::HashMismatch) return {DeliveryStatus::HashMismatch, l.height()};
        throw;
    }
    return {duplicate ? DeliveryStatus::Duplicate : DeliveryStatus::Committed, l.height()};
}

// ---------------------------------------------------------------------------
// Orderer
// ---------------------------------------------------------------------------

Orderer::Orderer(BatchConfig config) : config_(config) {}

void Orderer::add_channel(const Channel& channel) {
    if (channels_.count(channel.channel_id)) throw Error(ErrorCode::DuplicateChannel, channel.channel_id);
    channels_[channel.channel_id].channel = channel;
}

void Orderer::set_org_key(const std::string& org_id, const crypto::PublicKey& key) { org_keys_[org_id] = key; }

bool Orderer::has_channel(const std::string& channel_id) const { return channels_.count(channel_id) > 0; }

const Channel& Orderer::channel(const std::string& channel_id) const {
    auto it = channels_.find(channel_id);
    if (it == channels_.end()) throw Error(ErrorCode::UnknownChannel, channel_id);
    return it->second.channel;
}

crypto::Hash Orderer::submit(const Transaction& tx, const std::vector<Endorsement>& endorsements,
                             std::int64_t arrival_ms) {
    auto it = channels_.find(tx.channel_id);
    if (it == channels_.end()) throw Error(ErrorCode::UnknownChannel, tx.channel_id);
    auto& state = it->second;

    std::set<std::string> orgs;
    for (const auto& e : endorsements) {
        if (!state.channel.member_orgs.count(e.org_id)) continue;
        auto key = org_keys_.find(e.org_id);
        if (key == org_keys_.end()) continue;
        if (!crypto::verify(key->second, Endorsement::signed_bytes(tx, e.read_set, e.write_set), e.signature))
            continue;
        if (e.read_set != tx.read_set || e.write_set != tx.write_set)
            throw Error(ErrorCode::MismatchedWriteSets, e.peer_id);
        orgs.insert(e.org_id);
    }
    if (orgs.size() < state.channel.endorsement_threshold)
        throw Error(ErrorCode::InsufficientEndorsements,
                    std::to_string(orgs.size()) + " of " + std::to_string(state.channel.endorsement_threshold));
    if (pending() >= config_.queue_limit) throw Error(ErrorCode::Backpressure);

    auto pos = std::upper_bound(state.queue.begin(), state.queue.end(), std::make_pair(arrival_ms, tx.tx_id),
                                [](const auto& key, const Pending& p) {
                                    return key < std::make_pair(p.arrival_ms, p.tx.tx_id);
                                });
    state.queue.insert(pos, Pending{arrival_ms, tx});
    return tx.tx_id;
}

Block Orderer::cut_one(ChannelState& state, std::size_t count) {
    std::vector<Transaction> txs;
    txs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) txs.push_back(std::move(state.queue[i].tx));
    state.queue.erase(state.queue.begin(), state.queue.begin() + static_cast<std::ptrdiff_t>(count));
    const auto height = state.blocks.size();
    auto prev = state.blocks.empty() ? crypto::kZeroHash : state.blocks.back().header.block_hash;
    state.blocks.push_back(Block::make(height, prev, std::move(txs)));
    return state.blocks.back();
}

std::vector<std::pair<std::string, Block>> Orderer::cut(std::int64_t now_ms, bool force) {
    std::vector<std::pair<std::string, Block>> out;
    const std::size_t max = std::max<std::size_t>(1, config_.max_transactions);
    for (auto& [id, state] : channels_) {
        while (state.queue.size() >= max) out.emplace_back(id, cut_one(state, max));
        if (!state.queue.empty() && (force || now_ms - state.queue.front().arrival_ms >= config_.max_wait_ms))
            out.emplace_back(id, cut_one(state, state.queue.size()));
    }
    return out;
}

std::optional<std::int64_t> Orderer::next_deadline() const {
    std::optional<std::int64_t> best;
    for (const auto& [_, state] : channels_) {
        if (state.queue.empty()) continue;
        auto d = state.queue.front().arrival_ms + config_.max_wait_ms;
        if (!best || d < *best) best = d;
    }
    return best;
}

std::size_t Orderer::pending() const {
    std::size_t n = 0;
    for (const auto& [_, state] : channels_) n += state.queue.size();
    return n;
}

std::uint64_t Orderer::next_height(const std::string& channel_id) const {
    auto it = channels_.find(channel_id);
    if (it == channels_.end()) throw Error(ErrorCode::UnknownChannel, channel_id);
    return it->second.blocks.size();
}

std::map<std::string, std::uint64_t> Orderer::next_heights() const {
    std::map<std::string, std::uint64_t> out;
    for (const auto& [id, state] : channels_) out[id] = state.blocks.size();
    return out;
}

const std::vector<Block>& Orderer::blocks(const std::string& channel_id) const {
    auto it = channels_.find(channel_id);
    if (it == channels_.end()) throw Error(ErrorCode::UnknownChannel, channel_id);
    return it->second.blocks;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Network::Network(identity::Directory& directory, NetworkOptions options)
    : directory_(directory), options_(std::move(options)), orderer_(options_.batch) {
    directory_.set_action_resolver(contracts::required_actions);
    directory_.set_height_provider([this] {
        std::lock_guard lock(mutex_);
        return orderer_.next_heights();
    });
}

void Network::add_organization(const std::string& org_id, crypto::KeyPair org_key) {
    std::lock_guard lock(mutex_);
    if (!directory_.has_organization(org_id)) directory_.add_organization(org_id);
    orderer_.set_org_key(org_id, org_key.public_key());
    org_keys_.insert_or_assign(org_id, std::move(org_key));
}

std::optional<crypto::PublicKey> Network::org_key(const std::string& org_id) const {
    std::lock_guard lock(mutex_);
    auto it = org_keys_.find(org_id);
    if (it == org_keys_.end()) return std::nullopt;
    return it->second.public_key();
}

Peer& Network::add_peer(const std::string& peer_id, const std::string& org_id) {
    std::lock_guard lock(mutex_);
    auto key = org_keys_.find(org_id);
    if (key == org_keys_.end()) throw Error(ErrorCode::UnknownOrg, org_id);
    if (peers_.count(peer_id)) throw Error(ErrorCode::InvalidConfig, "duplicate peer " + peer_id);
    std::optional<std::filesystem::path> dir;
    if (options_.data_dir) dir = *options_.data_dir / peer_id;
    auto& p = *peers_.emplace(peer_id, std::make_unique<Peer>(peer_id, org_id, key->second, directory_, dir,
                                                              options_.snapshot_interval))
                   .first->second;
    for (const auto& ch : channels()) {
        if (!ch.member_orgs.count(org_id)) continue;
        p.join(ch.channel_id);
        const auto have = p.ledger(ch.channel_id).height();
        const auto& blocks = orderer_.blocks(ch.channel_id);
        for (auto h = have; h < blocks.size(); ++h) schedule(peer_id, ch.channel_id, h, 0, now_ms_);
    }
    return p;
}

Bytes Network::create_channel_request(const std::string& channel_id, const std::set<std::string>& member_orgs,
                                      std::uint32_t endorsement_threshold) {
    Encoder enc;
    enc.str("create_channel").str(channel_id).count(member_orgs.size());
    for (const auto& o : member_orgs) enc.str(o);
    enc.u32(endorsement_threshold);
    return std::move(enc).bytes();
}

Channel Network::create_channel(const crypto::Signature& admin_signature, const std::string& channel_id,
                                const std::set<std::string>& member_orgs, std::uint32_t endorsement_threshold) {
    std::lock_guard lock(mutex_);
    if (!directory_.admin_signed(create_channel_request(channel_id, member_orgs, endorsement_threshold),
                                 admin_signature))
        throw Error(ErrorCode::InvalidAdminSignature);
    if (orderer_.has_channel(channel_id) || directory_.channel_exists(channel_id) ||
        channel_id == identity::kSystemChannel)
        throw Error(ErrorCode::DuplicateChannel, channel_id);
    for (const auto& o : member_orgs)
        if (!directory_.has_organization(o)) throw Error(ErrorCode::UnknownOrg, o);
    if (endorsement_threshold < 1 || endorsement_threshold > member_orgs.size())
        throw Error(ErrorCode::BadThreshold, std::to_string(endorsement_threshold));

    Channel ch{channel_id, member_orgs, endorsement_threshold};
    directory_.add_channel(channel_id, member_orgs);
    orderer_.add_channel(ch);
    for (auto& [_, p] : peers_)
        if (member_orgs.count(p->org_id())) p->join(channel_id);
    return ch;
}

EndorseResult Network::endorse(const std::string& peer_id, const Proposal& proposal) {
    std::lock_guard lock(mutex_);
    return peer(peer_id).endorse(proposal);
}

crypto::Hash Network::submit_for_ordering(const Transaction& tx, const std::vector<Endorsement>& endorsements) {
    std::lock_guard lock(mutex_);
    auto id = orderer_.submit(tx, endorsements, now_ms_);
    cut_due(false);
    return id;
}

void Network::cut_due(bool force) {
    for (const auto& [channel_id, block] : orderer_.cut(now_ms_, force)) broadcast(channel_id, block);
}

void Network::broadcast(const std::string& channel_id, const Block& block) {
    for (const auto& pid : peers_on(channel_id)) schedule(pid, channel_id, block.header.height, 0, now_ms_);
}

void Network::schedule(const std::string& peer_id, const std::string& channel_id, std::uint64_t height,
                       std::uint32_t attempt, std::int64_t earliest_ms) {
    outstanding_.emplace(peer_id, channel_id, height);
    DeliveryPlan plan;
    if (delivery_model_) plan = delivery_model_(peer_id, channel_id, height, attempt);
    if (attempt > 0) ++stats_.retries;
    if (plan.drop) {
        ++stats_.drops;
        events_.push(Event{EventKind::Retry, earliest_ms + options_.retry.delay(attempt), seq_++, peer_id, channel_id,
                           height, attempt + 1});
        return;
    }
    events_.push(Event{EventKind::Arrive, earliest_ms + std::max<std::int64_t>(0, plan.delay_ms), seq_++, peer_id,
                       channel_id, height, attempt});
}

void Network::process(const Event& ev) {
    const auto key = std::make_tuple(ev.peer_id, ev.channel_id, ev.height);
    if (!outstanding_.count(key)) return;  // acknowledged meanwhile
    if (ev.kind == EventKind::Retry) {
        schedule(ev.peer_id, ev.channel_id, ev.height, ev.attempt, now_ms_);
        return;
    }
    ++stats_.deliveries;
    auto& p = peer(ev.peer_id);
    const Block& block = orderer_.blocks(ev.channel_id).at(ev.height);
    auto result = p.deliver(ev.channel_id, block);
    switch (result.status) {
        case DeliveryStatus::Committed:
            record_commit(ev.peer_id, ev.channel_id, p.ledger(ev.channel_id).block_at(ev.height));
            [[fallthrough]];
        case DeliveryStatus::Duplicate:
        case DeliveryStatus::NotJoined:
            outstanding_.erase(key);
            break;
        case DeliveryStatus::GapDetected:
            // Gap request: the orderer resends the missing range, then this
            // block is retried after backoff.
            ++stats_.gaps;
            for (auto h = result.expected_height; h < ev.height; ++h) {
                outstanding_.emplace(ev.peer_id, ev.channel_id, h);
                events_.push(Event{EventKind::Arrive, now_ms_, seq_++, ev.peer_id, ev.channel_id, h, 0});
            }
            events_.push(Event{EventKind::Retry, now_ms_ + options_.retry.delay(ev.attempt), seq_++, ev.peer_id,
                               ev.channel_id, ev.height, ev.attempt + 1});
            break;
        case DeliveryStatus::HashMismatch:
            events_.push(Event{EventKind::Retry, now_ms_ + options_.retry.delay(ev.attempt), seq_++, ev.peer_id,
                               ev.channel_id, ev.height, ev.attempt + 1});
            break;
    }
}

void Network::record_commit(const std::string& peer_id, const std::string& channel_id, const Block& block) {
    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        CommitRecord rec{channel_id, block.header.height, static_cast<std::uint32_t>(i), block.validity_flags[i]};
        peer_commits_[peer_id][block.transactions[i].tx_id] = rec;
        commits_.try_emplace(block.transactions[i].tx_id, rec);
    }
}

void Network::advance_to(std::int64_t now_ms) {
    std::lock_guard lock(mutex_);
    for (;;) {
        cut_due(false);
        if (!events_.empty() && events_.top().due_ms <= now_ms) {
            auto ev = events_.top();
            events_.pop();
            now_ms_ = std::max(now_ms_, ev.due_ms);
            process(ev);
            continue;
        }
        auto deadline = orderer_.next_deadline();
        if (deadline && *deadline <= now_ms && *deadline > now_ms_) {
            now_ms_ = *deadline;
            continue;
        }
        break;
    }
    now_ms_ = std::max(now_ms_, now_ms);
    cut_due(false);
}

void Network::settle() {
    std::lock_guard lock(mutex_);
    for (;;) {
        cut_due(false);
        if (events_.empty()) {
            auto deadline = orderer_.next_deadline();
            if (!deadline) break;
            now_ms_ = std::max(now_ms_, *deadline);
            continue;
        }
        auto ev = events_.top();
        events_.pop();
        now_ms_ = std::max(now_ms_, ev.due_ms);
        process(ev);
    }
}

void Network::flush() {
    std::lock_guard lock(mutex_);
    cut_due(true);
    settle();
}

std::int64_t Network::now_ms() const {
    std::lock_guard lock(mutex_);
    return now_ms_;
}

void Network::set_delivery_model(DeliveryModel model) {
    std::lock_guard lock(mutex_);
    delivery_model_ = std::move(model);
}

Peer& Network::peer(const std::string& peer_id) {
    auto it = peers_.find(peer_id);
    if (it == peers_.end()) throw Error(ErrorCode::InvalidConfig, "unknown peer " + peer_id);
    return *it->second;
}

const Peer& Network::peer(const std::string& peer_id) const {
    auto it = peers_.find(peer_id);
    if (it == peers_.end()) throw Error(ErrorCode::InvalidConfig, "unknown peer " + peer_id);
    return *it->second;
}

std::vector<std::string> Network::peer_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : peers_) out.push_back(id);
    return out;
}

std::vector<std::string> Network::peers_on(const std::string& channel_id) const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, p] : peers_)
        if (p->joined(channel_id)) out.push_back(id);
    return out;
}

std::vector<Channel> Network::channels() const {
    std::lock_guard lock(mutex_);
    std::vector<Channel> out;
    for (const auto& [id, _] : orderer_.next_heights()) out.push_back(orderer_.channel(id));
    return out;
}

const Channel& Network::channel(const std::string& channel_id) const {
    std::lock_guard lock(mutex_);
    return orderer_.channel(channel_id);
}

std::optional<CommitRecord> Network::commit_of(const crypto::Hash& tx_id) const {
    std::lock_guard lock(mutex_);
    auto it = commits_.find(tx_id);
    if (it == commits_.end()) return std::nullopt;
    return it->second;
}

std::optional<CommitRecord> Network::commit_on(const std::string& peer_id, const crypto::Hash& tx_id) const {
    std::lock_guard lock(mutex_);
    auto p = peer_commits_.find(peer_id);
    if (p == peer_commits_.end()) return std::nullopt;
    auto it = p->second.find(tx_id);
    if (it == p->second.end()) return std::nullopt;
    return it->second;
}

std::optional<ledger::StateEntry> Network::query(const std::string& user_id, const std::string& channel_id,
                                                 const std::string& key) const {
    if (auto d = directory_.check_membership(user_id, channel_id); !d)
        throw Error(ErrorCode::Unauthorized, std::string(identity::to_string(d.reason())));
    auto cert = directory_.certificate(user_id);
    std::lock_guard lock(mutex_);
    const Peer* chosen = nullptr;
    for (const auto& [_, p] : peers_) {
        if (!p->joined(channel_id)) continue;
        if (!chosen || (cert && p->org_id() == cert->org_id && chosen->org_id() != cert->org_id)) chosen = p.get();
    }
    if (!chosen) throw Error(ErrorCode::UnknownChannel, channel_id);
    return chosen->ledger(channel_id).query_state(key);
}

Network::Stats Network::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

Client::Client(Network& network, std::string user_id, crypto::KeyPair key, Clock clock)
    : network_(network), user_id_(std::move(user_id)), key_(std::move(key)), clock_(std::move(clock)) {}

Proposal Client::make_proposal(const std::string& channel_id, const contracts::Draft& draft) const {
    Proposal p;
    p.draft.channel_id = channel_id;
    p.draft.contract = draft.contract;
    p.draft.operation = draft.operation;
    p.draft.args = draft.args;
    p.draft.creator = user_id_;
    p.draft.proposal_time = clock_();
    p.signature = key_.sign(p.draft.proposal_preimage());
    return p;
}

Transaction Client::seal(const Proposal& proposal, const Endorsement& endorsement) const {
    Transaction tx = proposal.draft;
    tx.read_set = endorsement.read_set;
    tx.write_set = endorsement.write_set;
    tx.seal(key_);
    return tx;
}

std::pair<Transaction, std::vector<Endorsement>> Client::prepare(const std::string& channel_id,
                                                                  const contracts::Draft& draft) {
    auto proposal = make_proposal(channel_id, draft);
    std::lock_guard lock(network_.mutex());
    const auto& ch = network_.channel(channel_id);
    auto cert = network_.directory().certificate(user_id_);
    const std::string own_org = cert ? cert->org_id : std::string();

    // One peer per org, own org first, until the threshold is met.
    std::vector<std::string> orgs;
    if (ch.member_orgs.count(own_org)) orgs.push_back(own_org);
    for (const auto& o : ch.member_orgs)
        if (o != own_org) orgs.push_back(o);
    const auto peers = network_.peers_on(channel_id);

    std::vector<Endorsement> endorsements;
    for (const auto& org : orgs) {
        if (endorsements.size() >= ch.endorsement_threshold) break;
        auto pid = std::find_if(peers.begin(), peers.end(),
                                [&](const std::string& id) { return network_.peer(id).org_id() == org; });
        if (pid == peers.end()) continue;
        auto result = network_.endorse(*pid, proposal);
        if (auto* rej = std::get_if<Rejection>(&result)) throw Error(rej->code, rej->detail);
        endorsements.push_back(std::get<Endorsement>(std::move(result)));
    }
    if (endorsements.empty()) throw Error(ErrorCode::InsufficientEndorsements, "no endorsing peer reachable");
    auto tx = seal(proposal, endorsements.front());
    return {std::move(tx), std::move(endorsements)};
}

InvokeResult Client::invoke(const std::string& channel_id, const contracts::Draft& draft) {
    std::lock_guard lock(network_.mutex());
    auto [tx, endorsements] = prepare(channel_id, draft);
    network_.submit_for_ordering(tx, endorsements);
    network_.flush();

    InvokeResult out;
    out.tx_id = tx.tx_id;
    out.response = endorsements.front().response;
    auto commit = network_.commit_on(endorsements.front().peer_id, tx.tx_id);
    if (!commit) throw Error(ErrorCode::PersistenceFailure, "transaction not committed");
    out.commit = *commit;
    if (commit->validity != ledger::Validity::Valid)
        throw Error(ErrorCode::TransactionInvalidated, std::string(ledger::to_string(commit->validity)));
    return out;
}

std::optional<ledger::StateEntry> Client::query(const std::string& channel_id, const std::string& key) const {
    return network_.query(user_id_, channel_id, key);
}

}  // namespace radchain::network
