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

#include "radchain/worksim.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <iomanip>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "radchain/contracts.hpp"
#include "radchain/error.hpp"
#include "radchain/identity.hpp"
#include "radchain/network.hpp"
#include "radchain/pacsvault.hpp"

namespace radchain::worksim {

namespace {

constexpr std::array<std::string_view, 14> kKindNames = {
    "ExamArrives",     "TicketOpened",  "SupportPickup", "SiteContacted",   "ImagesResent",
    "TicketClosed",    "AccessRequested", "AccessGranted", "TokenIssued",   "ImagesViewed",
    "ReportFinalized", "AlertRaised",   "AlertAcked",    "ConferenceConnected"};

using Millis = std::int64_t;

/// Portable draws: the standard distributions differ between library vendors.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return unit() < p; }
    double uniform(const Uniform& u) { return u.lo + (u.hi - u.lo) * unit(); }
    double exponential(double mean) { return -mean * std::log1p(-unit()); }
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

private:
    std::mt19937_64 gen_;
};

Millis minutes(double m) { return static_cast<Millis>(std::llround(m * 60'000.0)); }
Millis seconds(double s) { return static_cast<Millis>(std::llround(s * 1'000.0)); }
double to_seconds(Millis ms) { return static_cast<double>(ms) / 1000.0; }

/// Per-exam draws shared by both workflows.
struct Scenario {
    std::string exam_id;
    Millis arrival = 0;
    bool missing = false;
    bool critical = false;
    Millis inspect = 0;
    Millis read = 0;
    std::string radiologist;
};

std::vector<Scenario> make_scenario(const SimConfig& c) {
    Rng rng(c.rng_seed);
    std::vector<Scenario> out;
    Millis t = 0;
    for (std::uint32_t i = 0; i < c.n_exams; ++i) {
        Scenario s;
        std::ostringstream id;
        id << "EX-" << std::setw(5) << std::setfill('0') << i + 1;
        s.exam_id = id.str();
        t += minutes(rng.exponential(c.mean_interarrival_min));
        s.arrival = t;
        s.missing = rng.bernoulli(c.p_missing_images);
        s.critical = rng.bernoulli(c.p_critical);
        s.inspect = minutes(rng.uniform(c.inspect_min));
        s.read = minutes(rng.uniform(c.read_min));
        std::ostringstream rad;
        rad << "rad-" << std::setw(3) << std::setfill('0') << (i % c.radiologists) + 1;
        s.radiologist = rad.str();
        out.push_back(std::move(s));
    }
    return out;
}

/// Single-threaded loop over (time, sequence).
class EventLoop {
public:
    void at(Millis t, std::function<void()> fn) { queue_.push(Item{t, seq_++, std::move(fn)}); }
    Millis now() const noexcept { return now_; }

    void log(EventKind kind, std::string actor, std::string exam_id) {
        log_.push_back({to_seconds(now_), kind, std::move(actor), std::move(exam_id)});
    }

    void run() {
        while (!queue_.empty()) {
            auto item = queue_.top();
            queue_.pop();
            now_ = item.time;
            item.fn();
        }
    }

    std::vector<WorkflowEvent> take_log() { return std::move(log_); }

private:
    struct Item {
        Millis time;
        std::uint64_t seq;
        std::function<void()> fn;
        bool operator>(const Item& o) const { return std::tie(time, seq) > std::tie(o.time, o.seq); }
    };
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue_;
    std::uint64_t seq_ = 0;
    Millis now_ = 0;
    std::vector<WorkflowEvent> log_;
};

const std::string kSiteAdmin = "admin-a";
const std::string kPhysician = "doc-a";
const std::string kSite = "site-hospitalA";
const std::string kChannel = "teleradA";

// ---------------------------------------------------------------------------
// Ticket workflow
// ---------------------------------------------------------------------------

class Baseline {
public:
    Baseline(const SimConfig& c, std::vector<Scenario> exams)
        : c_(c), exams_(std::move(exams)), rng_(c.rng_seed ^ 0x9e3779b97f4a7c15ULL), free_(c.support_pool_size) {
        for (std::uint32_t i = c.support_pool_size; i > 0; --i) free_[c.support_pool_size - i] = i;
    }

    std::vector<WorkflowEvent> run() {
        for (const auto& ex : exams_) loop_.at(ex.arrival, [this, &ex] { arrive(ex); });
        loop_.run();
        return loop_.take_log();
    }

private:
    struct Ticket {
        const Scenario* exam;
        bool critical;
        std::uint64_t seq;
    };

    void arrive(const Scenario& ex) {
        loop_.log(EventKind::ExamArrives, kSite, ex.exam_id);
        loop_.at(loop_.now() + ex.inspect, [this, &ex] {
            if (ex.missing) {
                open_ticket(ex, false);
            } else {
                read(ex);
            }
        });
    }

    void read(const Scenario& ex) {
        loop_.at(loop_.now() + ex.read, [this, &ex] {
            loop_.log(EventKind::ReportFinalized, ex.radiologist, ex.exam_id);
            if (ex.critical) open_ticket(ex, true);
        });
    }

    void open_ticket(const Scenario& ex, bool critical) {
        loop_.log(EventKind::TicketOpened, ex.radiologist, ex.exam_id);
        (critical ? critical_queue_ : normal_queue_).push_back(Ticket{&ex, critical, ticket_seq_++});
        dispatch();
    }

    /// Critical tickets jump the queue but never preempt a ticket in progress.
    void dispatch() {
        while (!free_.empty() && (!critical_queue_.empty() || !normal_queue_.empty())) {
            auto& q = critical_queue_.empty() ? normal_queue_ : critical_queue_;
            auto ticket = q.front();
            q.pop_front();
            auto member = free_.back();
            free_.pop_back();
            pickup(ticket, "support-" + std::to_string(member), member);
        }
    }

    void pickup(const Ticket& t, const std::string& staff, std::uint32_t member) {
        const auto& ex = *t.exam;
        loop_.log(EventKind::SupportPickup, staff, ex.exam_id);
        const bool voicemail = rng_.bernoulli(c_.p_voicemail);
        const Millis retry = voicemail ? minutes(rng_.uniform(c_.voicemail_retry_min)) : 0;
        const Millis start = loop_.now();

        auto close = [this, &ex, staff, member, critical = t.critical] {
            loop_.log(EventKind::TicketClosed, staff, ex.exam_id);
            free_.push_back(member);
            if (!critical) read(ex);
            dispatch();
        };

        if (t.critical) {
            const Millis contact = minutes(1);
            const Millis conference = minutes(rng_.uniform(c_.conference_delay_min));
            loop_.at(start + contact, [this, &ex, staff] { loop_.log(EventKind::SiteContacted, staff, ex.exam_id); });
            if (voicemail)
                loop_.at(start + contact + retry,
                         [this, &ex, staff] { loop_.log(EventKind::SiteContacted, staff, ex.exam_id); });
            loop_.at(start + contact + retry + conference,
                     [this, &ex] { loop_.log(EventKind::ConferenceConnected, kPhysician, ex.exam_id); });
            loop_.at(start + contact + retry + conference, close);
            return;
        }

        const Millis resolution = minutes(rng_.uniform(c_.ticket_resolution_min));
        loop_.at(start + resolution / 4, [this, &ex, staff] { loop_.log(EventKind::SiteContacted, staff, ex.exam_id); });
        if (voicemail)
            loop_.at(start + resolution / 4 + retry,
                     [this, &ex, staff] { loop_.log(EventKind::SiteContacted, staff, ex.exam_id); });
        loop_.at(start + resolution * 9 / 10 + retry,
                 [this, &ex] { loop_.log(EventKind::ImagesResent, kSite, ex.exam_id); });
        loop_.at(start + resolution + retry, close);
    }

    const SimConfig& c_;
    std::vector<Scenario> exams_;
    Rng rng_;
    EventLoop loop_;
    std::vector<std::uint32_t> free_;  // idle support staff, back is next
    std::deque<Ticket> normal_queue_;
    std::deque<Ticket> critical_queue_;
    std::uint64_t ticket_seq_ = 0;
};

// ---------------------------------------------------------------------------
// Ledger workflow
// ---------------------------------------------------------------------------

crypto::KeyPair sim_key(const std::string& name) { return crypto::KeyPair::from_seed(crypto::sha256("sim:" + name)); }

constexpr std::int64_t kEpoch = 1'767'225'600;  // 2026-01-01T00:00:00Z

const std::vector<std::string> kKeywords = {"intracranial hemorrhage", "pulmonary embolism", "aortic dissection",
                                            "tension pneumothorax"};

class Blockchain {
public:
    Blockchain(const SimConfig& c, std::vector<Scenario> exams)
        : c_(c),
          exams_(std::move(exams)),
          rng_(c.rng_seed ^ 0xc2b2ae3d27d4eb4fULL),
          clock_(kEpoch),
          directory_(sim_key("ca-root"), clock_.clock()),
          net_(directory_),
          vault_(net_, "peer0.hospitalA", {std::nullopt, pacsvault::kDefaultTtlSeconds, clock_.clock()}) {
        for (const std::string org : {"hospitalA", "telerad"}) {
            net_.add_organization(org, sim_key("org:" + org));
            net_.add_peer("peer0." + org, org);
        }
        auto ca = sim_key("ca-admin");
        directory_.bootstrap_admin("ca-admin", "hospitalA", ca.public_key());
        const std::set<std::string> orgs = {"hospitalA", "telerad"};
        net_.create_channel(ca.sign(network::Network::create_channel_request(kChannel, orgs, 2)), kChannel, orgs, 2);

        auto enroll = [&](const std::string& user, const std::string& org, identity::Role role) {
            auto key = sim_key("user:" + user);
            directory_.register_user(
                ca.sign(identity::Directory::register_request(user, org, role, key.public_key())), user, org, role,
                key.public_key());
            clients_.emplace(user, std::make_unique<network::Client>(net_, user, key, clock_.clock()));
        };
        enroll(kSiteAdmin, "hospitalA", identity::Role::SiteAdmin);
        enroll(kPhysician, "hospitalA", identity::Role::Physician);
        for (const auto& ex : exams_)
            if (!clients_.count(ex.radiologist)) enroll(ex.radiologist, "telerad", identity::Role::Radiologist);
        client(kSiteAdmin).invoke(kChannel, contracts::configure_keywords(kKeywords));
    }

    RunResult run() {
        for (const auto& ex : exams_) loop_.at(ex.arrival, [this, &ex] { arrive(ex); });
        loop_.run();
        RunResult out;
        out.log = loop_.take_log();
        auto& ledger = net_.peer("peer0.telerad").ledger(kChannel);
        for (std::uint64_t h = 0; h < ledger.height(); ++h) out.chain.push_back(ledger.block_at(h));
        return out;
    }

private:
    network::Client& client(const std::string& user) { return *clients_.at(user); }

    /// Run one real module call at the current simulated instant and return
    /// the simulated time it takes.
    template <typename Fn>
    Millis on_chain(Fn&& fn, bool token_step = false) {
        clock_.set(kEpoch + loop_.now() / 1000);
        const auto started = std::chrono::steady_clock::now();
        fn();
        if (c_.latency_mode == LatencyMode::Measured) {
            auto wall = std::chrono::steady_clock::now() - started;
            return std::max<Millis>(1, std::chrono::duration_cast<std::chrono::milliseconds>(wall).count());
        }
        Millis l = seconds(rng_.uniform(c_.endorse_s)) + seconds(rng_.uniform(c_.order_s)) +
                   seconds(rng_.uniform(c_.commit_s));
        if (token_step) l += seconds(rng_.uniform(c_.token_s));
        return l;
    }

    pacsvault::StudyBlob study(const Scenario& ex) {
        pacsvault::StudyBlob s;
        s.exam_id = ex.exam_id;
        s.site_protocol_image_count = c_.images_per_exam;
        for (std::uint32_t i = 0; i < c_.images_per_exam; ++i) {
            auto id = ex.exam_id + "." + std::to_string(i + 1);
            auto px = pacsvault::synthetic_pixels(id, 8, 8, c_.rng_seed * 7919 + i);
            s.images.push_back(pacsvault::Image::from_bytes(id, px.encode()));
        }
        return s;
    }

    /// Every exam is read through a view link; a missing-image exam needs a
    /// second, manual request once the radiologist notices the gap.
    void arrive(const Scenario& ex) {
        loop_.log(EventKind::ExamArrives, kSite, ex.exam_id);
        auto blob = study(ex);
        auto l = on_chain([&] { vault_.ingest_study(client(kSiteAdmin), kChannel, blob, {"CT", kPhysician, {}}); });
        loop_.at(loop_.now() + l, [this, &ex] {
            request(ex, contracts::AccessReason::Interpretation, [this, &ex] {
                loop_.at(loop_.now() + ex.inspect, [this, &ex] {
                    if (!ex.missing) return read(ex);
                    loop_.at(loop_.now() + minutes(rng_.uniform(c_.request_think_min)), [this, &ex] {
                        request(ex, contracts::AccessReason::MissingImages, [this, &ex] { read(ex); });
                    });
                });
            });
        });
    }

    /// request -> grant -> token -> view, then next() at the viewing instant.
    void request(const Scenario& ex, contracts::AccessReason reason, std::function<void()> next) {
        auto request_id = std::make_shared<crypto::Hash>();
        auto l = on_chain([&] {
            auto r = client(ex.radiologist).invoke(kChannel, contracts::request_access(ex.exam_id, reason, next_nonce()));
            *request_id = contracts::AccessRequest::decode(r.response).request_id;
        });
        loop_.at(loop_.now() + l, [this, &ex, request_id, next = std::move(next)] {
            loop_.log(EventKind::AccessRequested, ex.radiologist, ex.exam_id);
            contracts::AccessStatus status{};
            auto l2 = on_chain([&] {
                auto r = client(ex.radiologist).invoke(kChannel, contracts::evaluate_access(*request_id));
                status = contracts::AccessRequest::decode(r.response).status;
            });
            if (status != contracts::AccessStatus::Granted)
                throw Error(ErrorCode::ContractError, "access unexpectedly denied for " + ex.exam_id);
            loop_.at(loop_.now() + l2, [this, &ex, next] { granted(ex, next); });
        });
    }

    void granted(const Scenario& ex, std::function<void()> next) {
        loop_.log(EventKind::AccessGranted, ex.radiologist, ex.exam_id);
        auto token = std::make_shared<pacsvault::ViewToken>();
        auto l = on_chain([&] { *token = vault_.issue_view_token(client(ex.radiologist), kChannel, ex.exam_id); }, true);
        loop_.at(loop_.now() + l, [this, &ex, token, next = std::move(next)] {
            loop_.log(EventKind::TokenIssued, ex.radiologist, ex.exam_id);
            clock_.set(kEpoch + loop_.now() / 1000);
            vault_.fetch_images(token->token);
            loop_.log(EventKind::ImagesViewed, ex.radiologist, ex.exam_id);
            next();
        });
    }

    void read(const Scenario& ex) {
        loop_.at(loop_.now() + ex.read, [this, &ex] {
            std::optional<std::string> alert_id;
            auto l = on_chain([&] {
                auto r = client(ex.radiologist)
                             .invoke(kChannel, contracts::submit_report(ex.exam_id, body(ex), impression(ex),
                                                                        next_nonce()));
                auto outcome = contracts::ReportOutcome::decode(r.response);
                if (outcome.alert) alert_id = outcome.alert->alert_id;
            });
            loop_.at(loop_.now() + l, [this, &ex, alert_id] {
                loop_.log(EventKind::ReportFinalized, ex.radiologist, ex.exam_id);
                if (!alert_id) return;
                loop_.log(EventKind::AlertRaised, "contract", ex.exam_id);
                loop_.at(loop_.now() + minutes(rng_.uniform(c_.ack_delay_min)), [this, &ex, alert_id] {
                    auto l2 = on_chain([&] { client(kPhysician).invoke(kChannel, contracts::acknowledge_alert(*alert_id)); });
                    loop_.at(loop_.now() + l2, [this, &ex] { loop_.log(EventKind::AlertAcked, kPhysician, ex.exam_id); });
                });
            });
        });
    }

    static std::string impression(const Scenario& ex) {
        return ex.critical ? "Acute intracranial hemorrhage with 4 mm midline shift." : "No acute abnormality.";
    }
    static std::string body(const Scenario& ex) {
        return "Exam " + ex.exam_id + ": noncontrast CT head. Ventricles and sulci within normal limits for age.";
    }

    contracts::Nonce next_nonce() {
        contracts::Nonce n{};
        auto v = ++nonce_;
        for (int i = 7; i >= 0; --i, v >>= 8) n[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
        return n;
    }

    const SimConfig& c_;
    std::vector<Scenario> exams_;
    Rng rng_;
    EventLoop loop_;
    ManualClock clock_;
    identity::Directory directory_;
    network::Network net_;
    pacsvault::Vault vault_;
    std::map<std::string, std::unique_ptr<network::Client>> clients_;
    std::uint64_t nonce_ = 0;
};

double percentile_nearest_rank(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0;
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

void write_summary_row(std::ostream& out, std::string_view metric, Workflow w, const Summary& s) {
    out << metric << ',' << to_string(w) << ',' << s.n << ',' << std::fixed << std::setprecision(4) << s.mean << ','
        << s.median << ',' << s.p95 << '\n';
}

}  // namespace

std::string_view to_string(EventKind k) noexcept { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<EventKind> parse_event_kind(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == s) return static_cast<EventKind>(i);
    return std::nullopt;
}

std::string_view to_string(Workflow w) noexcept { return w == Workflow::Baseline ? "baseline" : "blockchain"; }

void SimConfig::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0 && p <= 1)) throw Error(ErrorCode::InvalidConfig, std::string(name) + " must lie in [0,1]");
    };
    auto range = [](const Uniform& u, const char* name) {
        if (!(u.lo >= 0 && u.lo <= u.hi)) throw Error(ErrorCode::InvalidConfig, std::string(name) + ": need 0 <= lo <= hi");
    };
    prob(p_missing_images, "p_missing_images");
    prob(p_critical, "p_critical");
    prob(p_voicemail, "p_voicemail");
    range(inspect_min, "inspect_min");
    range(read_min, "read_min");
    range(ticket_resolution_min, "ticket_resolution_min");
    range(voicemail_retry_min, "voicemail_retry_min");
    range(conference_delay_min, "conference_delay_min");
    range(request_think_min, "request_think_min");
    range(ack_delay_min, "ack_delay_min");
    range(endorse_s, "endorse_s");
    range(order_s, "order_s");
    range(commit_s, "commit_s");
    range(token_s, "token_s");
    if (!(mean_interarrival_min > 0)) throw Error(ErrorCode::InvalidConfig, "mean_interarrival_min must be positive");
    if (support_pool_size == 0) throw Error(ErrorCode::InvalidConfig, "support_pool_size must be positive");
    if (radiologists == 0) throw Error(ErrorCode::InvalidConfig, "radiologists must be positive");
    if (images_per_exam == 0) throw Error(ErrorCode::InvalidConfig, "images_per_exam must be positive");
}

Summary summarize(std::vector<double> values) {
    Summary s;
    s.n = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    double sum = 0;
    for (auto v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    const auto mid = values.size() / 2;
    s.median = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2;
    s.p95 = percentile_nearest_rank(values, 0.95);
    return s;
}

TurnaroundReport report_from_log(Workflow workflow, std::uint64_t seed, std::uint32_t n_exams,
                                 const std::vector<WorkflowEvent>& log) {
    struct Track {
        std::optional<double> arrived, finalized, notified;
        bool missing = false, critical = false;
        int requests = 0;
    };
    std::vector<std::string> order;
    std::map<std::string, Track> by_exam;
    for (const auto& e : log) {
        auto& t = by_exam[e.exam_id];
        switch (e.kind) {
            case EventKind::ExamArrives:
                order.push_back(e.exam_id);
                t.arrived = e.time;
                break;
            case EventKind::TicketOpened:
                if (t.finalized)
                    t.critical = true;
                else
                    t.missing = true;
                break;
            case EventKind::AccessRequested:
                // the first request is routine; a second one fetches missing images
                if (++t.requests > 1) t.missing = true;
                break;
            case EventKind::AlertRaised: t.critical = true; break;
            case EventKind::ReportFinalized:
                if (!t.finalized) t.finalized = e.time;
                break;
            case EventKind::AlertAcked:
            case EventKind::ConferenceConnected:
                if (!t.notified) t.notified = e.time;
                break;
            default: break;
        }
    }

    TurnaroundReport r;
    r.workflow = workflow;
    r.rng_seed = seed;
    r.n_exams = n_exams;
    std::vector<double> all, missing, notify;
    for (const auto& id : order) {
        const auto& t = by_exam[id];
        if (!t.arrived || !t.finalized) continue;
        ExamOutcome o{id, t.missing, t.critical, *t.finalized - *t.arrived, std::nullopt};
        if (t.critical && t.notified) o.notify_latency_s = *t.notified - *t.finalized;
        all.push_back(o.turnaround_s / 60);
        if (o.missing_images) missing.push_back(o.turnaround_s / 60);
        if (o.notify_latency_s) notify.push_back(*o.notify_latency_s / 60);
        r.exams.push_back(std::move(o));
    }
    r.turnaround = summarize(all);
    r.turnaround_missing = summarize(missing);
    r.notify_latency = summarize(notify);
    return r;
}

void TurnaroundReport::write_csv(std::ostream& out) const {
    out << "metric,workflow,n,mean_min,median_min,p95_min\n";
    write_summary_row(out, "turnaround", workflow, turnaround);
    write_summary_row(out, "turnaround_missing", workflow, turnaround_missing);
    write_summary_row(out, "notify_latency", workflow, notify_latency);
}

void TurnaroundReport::write_text(std::ostream& out) const {
    out << "workflow " << to_string(workflow) << ", seed " << rng_seed << ", " << n_exams << " exams\n";
    out << std::left << std::setw(20) << "metric" << std::right << std::setw(6) << "n" << std::setw(12) << "mean_min"
        << std::setw(12) << "median_min" << std::setw(12) << "p95_min" << '\n';
    auto row = [&](const char* name, const Summary& s) {
        out << std::left << std::setw(20) << name << std::right << std::setw(6) << s.n << std::fixed
            << std::setprecision(2) << std::setw(12) << s.mean << std::setw(12) << s.median << std::setw(12) << s.p95
            << '\n';
    };
    row("turnaround", turnaround);
    row("turnaround_missing", turnaround_missing);
    row("notify_latency", notify_latency);
}

RunResult run_baseline(const SimConfig& config) {
    config.validate();
    RunResult out;
    out.log = Baseline(config, make_scenario(config)).run();
    out.report = report_from_log(Workflow::Baseline, config.rng_seed, config.n_exams, out.log);
    return out;
}

RunResult run_blockchain(const SimConfig& config) {
    config.validate();
    auto out = Blockchain(config, make_scenario(config)).run();
    out.report = report_from_log(Workflow::Blockchain, config.rng_seed, config.n_exams, out.log);
    return out;
}

void write_event_log(std::ostream& out, const std::vector<WorkflowEvent>& log) {
    out << "time_s,kind,actor,exam_id\n";
    for (const auto& e : log)
        out << std::fixed << std::setprecision(3) << e.time << ',' << to_string(e.kind) << ',' << e.actor << ','
            << e.exam_id << '\n';
}

std::vector<WorkflowEvent> read_event_log(std::istream& in) {
    std::vector<WorkflowEvent> out;
    std::string line;
    if (!std::getline(in, line) || line != "time_s,kind,actor,exam_id")
        throw Error(ErrorCode::MalformedEncoding, "event log header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string col; std::getline(ss, col, ',');) cols.push_back(col);
        if (cols.size() != 4) throw Error(ErrorCode::MalformedEncoding, "event log row: " + line);
        auto kind = parse_event_kind(cols[1]);
        if (!kind) throw Error(ErrorCode::MalformedEncoding, "event kind: " + cols[1]);
        out.push_back({std::stod(cols[0]), *kind, cols[2], cols[3]});
    }
    return out;
}

std::vector<CausalityViolation> check_causality(const std::vector<WorkflowEvent>& log) {
    using K = EventKind;
    // all-of groups, each satisfied by any listed kind seen earlier for the exam
    static const std::map<K, std::vector<std::vector<K>>> requires_ = {
        {K::TicketOpened, {{K::ExamArrives}}},
        {K::SupportPickup, {{K::TicketOpened}}},
        {K::SiteContacted, {{K::SupportPickup}}},
        {K::ImagesResent, {{K::SiteContacted}}},
        {K::TicketClosed, {{K::ImagesResent, K::ConferenceConnected}}},
        {K::AccessRequested, {{K::ExamArrives}}},
        {K::AccessGranted, {{K::AccessRequested}}},
        {K::TokenIssued, {{K::AccessGranted}}},
        {K::ImagesViewed, {{K::TokenIssued}}},
        {K::ReportFinalized, {{K::ExamArrives}}},
        {K::AlertRaised, {{K::ReportFinalized}}},
        {K::AlertAcked, {{K::AlertRaised}}},
        {K::ConferenceConnected, {{K::ReportFinalized}, {K::SiteContacted}}},
    };
    struct Seen {
        std::map<K, std::size_t> count;
    };
    std::map<std::string, Seen> seen;
    std::vector<CausalityViolation> out;
    double last = -1;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& e = log[i];
        if (e.time < last) out.push_back({i, "time decreases"});
        last = std::max(last, e.time);
        auto& s = seen[e.exam_id];
        if (auto it = requires_.find(e.kind); it != requires_.end()) {
            for (const auto& group : it->second) {
                bool ok = std::any_of(group.begin(), group.end(), [&](K k) { return s.count[k] > 0; });
                if (!ok) out.push_back({i, std::string(to_string(e.kind)) + " without predecessor"});
            }
        }
        if (e.kind == K::ReportFinalized) {
            if (s.count[K::TicketOpened] > s.count[K::TicketClosed])
                out.push_back({i, "report finalized with an open ticket"});
            if (s.count[K::AccessRequested] > s.count[K::ImagesViewed])
                out.push_back({i, "report finalized before requested images were viewed"});
        }
        if (e.kind == K::ExamArrives && s.count[K::ExamArrives] > 0) out.push_back({i, "exam arrived twice"});
        ++s.count[e.kind];
    }
    return out;
}

const SavingsRow& SavingsTable::row(std::string_view metric) const {
    for (const auto& r : rows)
        if (r.metric == metric) return r;
    throw Error(ErrorCode::InvalidConfig, "no metric " + std::string(metric));
}

void SavingsTable::write_csv(std::ostream& out) const {
    out << "metric,n," << a_name << "_mean_min," << b_name << "_mean_min,delta_min,ci95_lo_min,ci95_hi_min\n";
    for (const auto& r : rows)
        out << r.metric << ',' << r.n << ',' << std::fixed << std::setprecision(4) << r.a_mean << ',' << r.b_mean << ','
            << r.delta << ',' << r.ci_lo << ',' << r.ci_hi << '\n';
}

void SavingsTable::write_text(std::ostream& out) const {
    out << "savings = " << a_name << " - " << b_name << " (minutes, paired by exam, bootstrap 95% CI)\n";
    out << std::left << std::setw(20) << "metric" << std::right << std::setw(6) << "n" << std::setw(12) << a_name
        << std::setw(12) << b_name << std::setw(10) << "delta" << std::setw(20) << "95% CI" << '\n';
    for (const auto& r : rows) {
        std::ostringstream ci;
        ci << std::fixed << std::setprecision(2) << '[' << r.ci_lo << ", " << r.ci_hi << ']';
        out << std::left << std::setw(20) << r.metric << std::right << std::setw(6) << r.n << std::fixed
            << std::setprecision(2) << std::setw(12) << r.a_mean << std::setw(12) << r.b_mean << std::setw(10)
            << r.delta << std::setw(20) << ci.str() << '\n';
    }
}

SavingsTable compare(const TurnaroundReport& a, const TurnaroundReport& b, std::size_t resamples) {
    if (a.rng_seed != b.rng_seed || a.n_exams != b.n_exams)
        throw Error(ErrorCode::ConfigMismatch, "reports come from different seeds or exam counts");
    std::map<std::string, const ExamOutcome*> b_by_id;
    for (const auto& o : b.exams) b_by_id[o.exam_id] = &o;

    SavingsTable table{std::string(to_string(a.workflow)), std::string(to_string(b.workflow)), {}};
    if (table.a_name == table.b_name) table.b_name += "_b";
    Rng rng(a.rng_seed ^ 0x5851f42d4c957f2dULL);

    auto add = [&](const char* metric, auto pick) {
        std::vector<double> av, bv, deltas;
        for (const auto& oa : a.exams) {
            auto it = b_by_id.find(oa.exam_id);
            if (it == b_by_id.end()) continue;
            auto x = pick(oa);
            auto y = pick(*it->second);
            if (!x || !y) continue;
            av.push_back(*x / 60);
            bv.push_back(*y / 60);
            deltas.push_back(*x / 60 - *y / 60);
        }
        SavingsRow row{metric, deltas.size(), 0, 0, 0, 0, 0};
        if (!deltas.empty()) {
            const auto n = deltas.size();
            auto mean = [](const std::vector<double>& v) {
                double s = 0;
                for (auto x : v) s += x;
                return s / static_cast<double>(v.size());
            };
            row.a_mean = mean(av);
            row.b_mean = mean(bv);
            row.delta = mean(deltas);
            std::vector<double> boot;
            boot.reserve(resamples);
            for (std::size_t r = 0; r < resamples; ++r) {
                double s = 0;
                for (std::size_t i = 0; i < n; ++i) s += deltas[rng.below(n)];
                boot.push_back(s / static_cast<double>(n));
            }
            std::sort(boot.begin(), boot.end());
            row.ci_lo = percentile_nearest_rank(boot, 0.025);
            row.ci_hi = percentile_nearest_rank(boot, 0.975);
        }
        table.rows.push_back(row);
    };

    add("turnaround", [](const ExamOutcome& o) { return std::optional<double>(o.turnaround_s); });
    add("turnaround_missing", [](const ExamOutcome& o) {
        return o.missing_images ? std::optional<double>(o.turnaround_s) : std::nullopt;
    });
    add("notify_latency", [](const ExamOutcome& o) { return o.notify_latency_s; });
    return table;
}

}  // namespace radchain::worksim
