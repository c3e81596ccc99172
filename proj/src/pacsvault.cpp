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

#include "radchain/pacsvault.hpp"

#include <fstream>
#include <iterator>
#include <random>

namespace radchain::pacsvault {

namespace fs = std::filesystem;

Bytes Pixels::encode() const {
    if (samples.size() != static_cast<std::size_t>(width) * height)
        throw Error(ErrorCode::MalformedEncoding, "sample count does not match dimensions");
    Encoder enc;
    enc.str(instance_id).u32(width).u32(height);
    for (auto s : samples) enc.u8(static_cast<std::uint8_t>(s >> 8)).u8(static_cast<std::uint8_t>(s));
    return std::move(enc).bytes();
}

Pixels Pixels::decode(ByteView bytes) {
    Decoder dec(bytes);
    Pixels p;
    p.instance_id = dec.str();
    p.width = dec.u32();
    p.height = dec.u32();
    const auto n = static_cast<std::uint64_t>(p.width) * p.height;
    if (n * 2 != dec.remaining()) throw Error(ErrorCode::MalformedEncoding, "pixel payload size");
    p.samples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        auto hi = dec.u8();
        auto lo = dec.u8();
        p.samples.push_back(static_cast<std::uint16_t>((hi << 8) | lo));
    }
    return p;
}

Pixels synthetic_pixels(std::string instance_id, std::uint32_t width, std::uint32_t height, std::uint64_t seed) {
    Pixels p{std::move(instance_id), width, height, {}};
    std::mt19937_64 rng(seed);
    p.samples.resize(static_cast<std::size_t>(width) * height);
    for (std::uint32_t y = 0; y < height; ++y)
        for (std::uint32_t x = 0; x < width; ++x)
            p.samples[y * width + x] = static_cast<std::uint16_t>(((x * 257 + y * 131) ^ rng()) & 0x0fff);
    return p;
}

Image Image::from_bytes(std::string instance_id, Bytes pixel_bytes) {
    Image img{std::move(instance_id), {}, std::move(pixel_bytes)};
    img.content_hash = crypto::sha256(img.pixel_bytes);
    return img;
}

std::string view_link(const std::string& exam_id, const Token& token) {
    return "/v1/images/" + exam_id + "?token=" + crypto::to_hex(token);
}

Bytes encode_exam_file(const std::vector<Image>& images) {
    Encoder enc;
    enc.count(images.size());
    for (const auto& img : images) enc.str(img.instance_id).blob(img.pixel_bytes);
    return std::move(enc).bytes();
}

std::vector<Image> decode_exam_file(ByteView bytes) {
    Decoder dec(bytes);
    auto n = dec.count(8);
    std::vector<Image> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto id = dec.str();
        out.push_back(Image::from_bytes(std::move(id), dec.blob()));
    }
    if (dec.remaining() != 0) throw Error(ErrorCode::MalformedEncoding, "trailing bytes in exam file");
    return out;
}

namespace {

Bytes encode_meta(const std::string& exam_id, const std::string& channel, std::uint32_t protocol,
                  const std::vector<Image>& images) {
    Encoder enc;
    enc.str(exam_id).str(channel).u32(protocol).count(images.size());
    for (const auto& img : images) enc.raw(img.content_hash);
    return std::move(enc).bytes();
}

Bytes read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::PersistenceFailure, "cannot read " + p.string());
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_atomic(const fs::path& p, ByteView data) {
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::PersistenceFailure, "cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

}  // namespace

Vault::Vault(network::Network& network, std::string reader_peer, VaultOptions options)
    : network_(network), reader_peer_(std::move(reader_peer)), options_(std::move(options)) {
    if (options_.dir) {
        fs::create_directories(*options_.dir);
        load();
    }
}

std::int64_t Vault::now() const {
    std::lock_guard lock(tokens_mutex_);
    return options_.clock();
}

void Vault::set_clock(Clock clock) {
    std::lock_guard lock(tokens_mutex_);
    options_.clock = std::move(clock);
}

fs::path Vault::exam_path(const std::string& exam_id) const {
    return *options_.dir / (crypto::to_hex(as_bytes(exam_id)) + ".exam");
}

fs::path Vault::meta_path(const std::string& exam_id) const {
    return *options_.dir / (crypto::to_hex(as_bytes(exam_id)) + ".meta");
}

void Vault::persist(const std::string& exam_id, const Study& study) const {
    if (!options_.dir) return;
    write_atomic(exam_path(exam_id), encode_exam_file(study.images));
    write_atomic(meta_path(exam_id), encode_meta(exam_id, study.channel_id, study.protocol_count, study.images));
}

void Vault::erase_files(const std::string& exam_id) const {
    if (!options_.dir) return;
    std::error_code ec;
    fs::remove(exam_path(exam_id), ec);
    fs::remove(meta_path(exam_id), ec);
}

void Vault::load() {
    for (const auto& entry : fs::directory_iterator(*options_.dir)) {
        if (entry.path().extension() != ".meta") continue;
        auto meta = read_file(entry.path());
        Decoder dec(meta);
        auto exam_id = dec.str();
        Study study;
        study.channel_id = dec.str();
        study.protocol_count = dec.u32();
        auto n = dec.count(32);
        std::vector<crypto::Hash> hashes;
        for (std::size_t i = 0; i < n; ++i) hashes.push_back(dec.fixed<32>());

        auto exam_file = exam_path(exam_id);
        if (!fs::exists(exam_file)) {
            integrity_issues_.insert(exam_id);
            continue;
        }
        bool ok = true;
        try {
            study.images = decode_exam_file(read_file(exam_file));
        } catch (const Error&) {
            ok = false;
        }
        ok = ok && study.images.size() == hashes.size();
        for (std::size_t i = 0; ok && i < hashes.size(); ++i) ok = study.images[i].content_hash == hashes[i];
        if (!ok) integrity_issues_.insert(exam_id);
        studies_[exam_id] = std::move(study);
    }
}

std::optional<contracts::ExamRecord> Vault::anchored(const std::string& channel_id, const std::string& exam_id) const {
    std::lock_guard lock(network_.mutex());
    auto& peer = network_.peer(reader_peer_);
    if (!peer.joined(channel_id)) return std::nullopt;
    auto entry = peer.ledger(channel_id).query_state(contracts::keys::exam(channel_id, exam_id));
    if (!entry) return std::nullopt;
    return contracts::ExamRecord::decode(entry->value);
}

contracts::ExamRecord Vault::ingest_study(network::Client& site_admin, const std::string& channel_id,
                                          const StudyBlob& study, const StudyInfo& info) {
    for (const auto& img : study.images)
        if (crypto::sha256(img.pixel_bytes) != img.content_hash) throw Error(ErrorCode::HashMismatchImage, img.instance_id);

    {
        std::lock_guard lock(ingest_mutex_);
        if (has_exam(study.exam_id) || !ingesting_.insert(study.exam_id).second)
            throw Error(ErrorCode::DuplicateExam, study.exam_id);
    }
    struct Release {
        Vault& v;
        const std::string& id;
        ~Release() {
            std::lock_guard lock(v.ingest_mutex_);
            v.ingesting_.erase(id);
        }
    } release{*this, study.exam_id};

    Study stored{channel_id, study.images, study.site_protocol_image_count};
    persist(study.exam_id, stored);

    contracts::ExamRecord record;
    record.exam_id = study.exam_id;
    if (auto cert = site_admin.network().directory().certificate(site_admin.user_id())) record.org_id = cert->org_id;
    record.modality = info.modality;
    record.referring_physician = info.referring_physician;
    for (const auto& img : study.images) record.image_hashes.push_back(img.content_hash);
    record.image_count = static_cast<std::uint32_t>(study.images.size());
    record.prior_exam_ids = info.prior_exam_ids;

    try {
        site_admin.invoke(channel_id, contracts::anchor_exam(record));
    } catch (const Error& e) {
        erase_files(study.exam_id);
        throw Error(ErrorCode::AnchorRejected, e.what());
    }

    {
        std::unique_lock lock(studies_mutex_);
        studies_[study.exam_id] = std::move(stored);
    }
    auto committed = anchored(channel_id, study.exam_id);
    return committed ? *committed : record;
}

ViewToken Vault::issue_view_token(network::Client& user, const std::string& channel_id, const std::string& exam_id) {
    if (!anchored(channel_id, exam_id)) throw Error(ErrorCode::UnknownExam, exam_id);
    {
        std::lock_guard lock(network_.mutex());
        auto& ledger = network_.peer(reader_peer_).ledger(channel_id);
        if (!ledger.query_state(contracts::keys::grant(channel_id, exam_id, user.user_id())))
            throw Error(ErrorCode::NoGrant, exam_id);
    }

    ViewToken vt;
    vt.token = crypto::random_array<32>();
    vt.channel_id = channel_id;
    vt.exam_id = exam_id;
    vt.user_id = user.user_id();
    vt.ttl_seconds = options_.ttl_seconds;

    auto result = user.invoke(channel_id, contracts::record_data_access(exam_id, vt.digest(), vt.ttl_seconds));
    vt.data_access_tx = result.tx_id;
    vt.issued_at = now();

    std::lock_guard lock(tokens_mutex_);
    tokens_[vt.digest()] = TokenState{vt, false};
    return vt;
}

std::vector<FetchedImage> Vault::fetch_images(const Token& token) {
    const auto digest = crypto::sha256(ByteView(token));
    ViewToken vt;
    {
        std::lock_guard lock(tokens_mutex_);
        auto it = tokens_.find(digest);
        if (it == tokens_.end()) throw Error(ErrorCode::UnknownToken);
        auto& state = it->second;
        const auto t = options_.clock();
        if (state.expired || t >= state.token.issued_at + static_cast<std::int64_t>(state.token.ttl_seconds)) {
            state.expired = true;
            throw Error(ErrorCode::ExpiredToken);
        }
        vt = state.token;
    }

    auto record = anchored(vt.channel_id, vt.exam_id);
    if (!record) throw Error(ErrorCode::UnknownExam, vt.exam_id);

    std::vector<FetchedImage> out;
    {
        std::shared_lock lock(studies_mutex_);
        auto it = studies_.find(vt.exam_id);
        if (it == studies_.end()) throw Error(ErrorCode::UnknownExam, vt.exam_id);
        const auto& images = it->second.images;
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (i >= record->image_hashes.size() || crypto::sha256(images[i].pixel_bytes) != record->image_hashes[i])
                throw Error(ErrorCode::IntegrityFailure, images[i].instance_id);
        }
        if (images.size() != record->image_hashes.size())
            throw Error(ErrorCode::IntegrityFailure, "instance count differs from anchor");
        for (const auto& img : images) out.push_back({img.instance_id, img.pixel_bytes});
    }

    std::lock_guard lock(tokens_mutex_);
    auto& state = tokens_.at(digest);
    if (state.expired) throw Error(ErrorCode::ExpiredToken);
    ++state.token.consumed_count;
    fetch_log_.push_back({digest, vt.data_access_tx, vt.channel_id, vt.exam_id, vt.user_id, options_.clock()});
    return out;
}

Completeness Vault::check_completeness(const std::string& exam_id) const {
    std::shared_lock lock(studies_mutex_);
    auto it = studies_.find(exam_id);
    if (it == studies_.end()) throw Error(ErrorCode::UnknownExam, exam_id);
    const auto stored = static_cast<std::uint32_t>(it->second.images.size());
    const auto protocol = it->second.protocol_count;
    if (stored >= protocol) return {true, 0};
    return {false, protocol - stored};
}

bool Vault::has_exam(const std::string& exam_id) const {
    std::shared_lock lock(studies_mutex_);
    return studies_.count(exam_id) > 0;
}

std::optional<std::string> Vault::channel_of(const std::string& exam_id) const {
    std::shared_lock lock(studies_mutex_);
    auto it = studies_.find(exam_id);
    if (it == studies_.end()) return std::nullopt;
    return it->second.channel_id;
}

std::vector<std::string> Vault::exam_ids() const {
    std::shared_lock lock(studies_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : studies_) out.push_back(id);
    return out;
}

std::size_t Vault::stored_count(const std::string& exam_id) const {
    std::shared_lock lock(studies_mutex_);
    auto it = studies_.find(exam_id);
    return it == studies_.end() ? 0 : it->second.images.size();
}

std::optional<ViewToken> Vault::token_info(const crypto::Hash& digest) const {
    std::lock_guard lock(tokens_mutex_);
    auto it = tokens_.find(digest);
    if (it == tokens_.end()) return std::nullopt;
    auto vt = it->second.token;
    vt.token = {};
    return vt;
}

std::vector<ViewToken> Vault::tokens() const {
    std::lock_guard lock(tokens_mutex_);
    std::vector<ViewToken> out;
    for (const auto& [_, state] : tokens_) {
        out.push_back(state.token);
        out.back().token = {};
    }
    return out;
}

std::vector<FetchRecord> Vault::fetch_log() const {
    std::lock_guard lock(tokens_mutex_);
    return fetch_log_;
}

void Vault::tamper(const std::string& exam_id, const std::string& instance_id, Bytes pixel_bytes) {
    std::unique_lock lock(studies_mutex_);
    auto& study = studies_.at(exam_id);
    for (auto& img : study.images)
        if (img.instance_id == instance_id) img.pixel_bytes = pixel_bytes;
    if (options_.dir) write_atomic(exam_path(exam_id), encode_exam_file(study.images));
}

}  // namespace radchain::pacsvault
