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

// radchain command line: deployment process, follower node, workflow
// simulator, HTTP client and block file verifier.

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "radchain/config.hpp"

namespace {

using namespace radchain;
using json = nlohmann::json;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void install_signals() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

config::Config load_config(const std::string& cli_path) {
    auto path = config::resolve_path(cli_path.empty() ? std::nullopt : std::optional(cli_path));
    return config::load(path);
}

void wait_until(std::optional<double> seconds) {
    const auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds.value_or(0));
    while (!g_stop && (!seconds || std::chrono::steady_clock::now() < end))
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
}

// ---------------------------------------------------------------------------
// gateway / orderer

int run_deployment(const std::string& cfg_path, bool http, std::optional<double> duration) {
    auto cfg = load_config(cfg_path);
    if (!http && !cfg.orderer_listen) throw Error(ErrorCode::InvalidConfig, "[orderer] listen is required");
    install_signals();
    config::Deployment d(cfg);
    std::cout << "ca_public_key " << crypto::to_hex(d.directory().root_key()) << "\n";
    if (http) std::cout << "gateway listening on " << cfg.gateway_listen.host << ":" << d.serve_http() << "\n";
    if (int p = d.serve_wire()) std::cout << "orderer listening on " << cfg.orderer_listen->host << ":" << p << "\n";
    std::cout.flush();
    wait_until(duration);
    d.stop();
    return 0;
}

// ---------------------------------------------------------------------------
// node

struct NodeArgs {
    std::string config;
    std::string peer_id;
    std::string org;
    std::string connect;
    std::string data_dir;
    std::optional<double> duration;
};

int run_node(const NodeArgs& a) {
    auto cfg = load_config(a.config);
    config::NodeConfig node = cfg.node.value_or(config::NodeConfig{});
    if (!a.peer_id.empty()) node.peer_id = a.peer_id;
    if (!a.org.empty()) node.org = a.org;
    if (!a.connect.empty()) node.connect = config::Address::parse(a.connect);
    else if (!cfg.node && cfg.orderer_listen) node.connect = *cfg.orderer_listen;
    if (!a.data_dir.empty()) node.data_dir = a.data_dir;
    if (node.peer_id.empty() || node.org.empty()) throw Error(ErrorCode::InvalidConfig, "peer id and org are required");
    if (!cfg.ca_public_key) throw Error(ErrorCode::InvalidConfig, "deployment.ca_public_key is required");
    const config::OrgConfig* org = nullptr;
    for (const auto& o : cfg.orgs)
        if (o.id == node.org) org = &o;
    if (!org || !org->key_seed) throw Error(ErrorCode::InvalidConfig, "key_seed for org " + node.org + " is required");

    install_signals();
    wire::Follower f(node.peer_id, node.org, crypto::KeyPair::from_seed(*org->key_seed), *cfg.ca_public_key,
                     node.data_dir);
    f.connect(node.connect.host, node.connect.port);
    std::cout << node.peer_id << " following " << node.connect.to_string() << std::endl;
    const auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(a.duration.value_or(0));
    while (!g_stop && (!a.duration || std::chrono::steady_clock::now() < end)) {
        if (f.pump(std::chrono::milliseconds(200)) == 0) continue;
        for (const auto& [ch, h] : f.heights()) std::cout << ch << "=" << h << " ";
        std::cout << std::endl;
    }
    for (const auto& [ch, h] : f.heights()) std::cout << "final " << ch << " " << h << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sim

struct SimArgs {
    std::string config;
    std::string workflow = "both";
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> exams;
    std::string latency;
    std::string out = ".";
};

void write_file(const std::filesystem::path& p, const std::function<void(std::ostream&)>& f) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    f(out);
}

int run_sim(const SimArgs& a) {
    worksim::SimConfig sim;
    if (!a.config.empty()) sim = config::load(a.config).sim;
    if (a.seed) sim.rng_seed = *a.seed;
    if (a.exams) sim.n_exams = *a.exams;
    if (a.latency == "measured") sim.latency_mode = worksim::LatencyMode::Measured;
    if (a.latency == "modeled") sim.latency_mode = worksim::LatencyMode::Modeled;
    sim.validate();
    std::filesystem::create_directories(a.out);
    const std::filesystem::path out(a.out);

    std::optional<worksim::RunResult> base, chain;
    auto emit = [&](const worksim::RunResult& r) {
        const std::string name(worksim::to_string(r.report.workflow));
        write_file(out / (name + "_events.csv"), [&](std::ostream& o) { worksim::write_event_log(o, r.log); });
        write_file(out / (name + "_report.csv"), [&](std::ostream& o) { r.report.write_csv(o); });
        write_file(out / (name + "_report.txt"), [&](std::ostream& o) { r.report.write_text(o); });
        r.report.write_text(std::cout);
    };
    if (a.workflow == "baseline" || a.workflow == "both") emit(*(base = worksim::run_baseline(sim)));
    if (a.workflow == "blockchain" || a.workflow == "both") emit(*(chain = worksim::run_blockchain(sim)));
    if (base && chain) {
        auto table = worksim::compare(base->report, chain->report);
        write_file(out / "comparison.csv", [&](std::ostream& o) { table.write_csv(o); });
        write_file(out / "comparison.txt", [&](std::ostream& o) { table.write_text(o); });
        table.write_text(std::cout);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// client

struct ClientArgs {
    std::string config;
    std::string url;
    std::string session;
    std::string user;
    std::string key_file;
    std::string key_hex;
};

/// --url, else http:// plus [gateway] listen from the config, else the default port.
std::string base_url(const ClientArgs& a) {
    if (!a.url.empty()) return a.url;
    auto path = config::resolve_path(a.config.empty() ? std::nullopt : std::optional(a.config));
    if (!a.config.empty() || std::filesystem::exists(path)) {
        auto listen = config::load(path).gateway_listen;
        if (listen.host == "0.0.0.0") listen.host = "127.0.0.1";
        return "http://" + listen.to_string();
    }
    return "http://127.0.0.1:8080";
}

class Api {
public:
    explicit Api(const ClientArgs& a) : args_(a), http_(base_url(a)) {
        http_.set_connection_timeout(5);
        http_.set_tcp_nodelay(true);
        http_.set_read_timeout(30);
    }

    json call(const std::string& method, const std::string& path, const json& body = nullptr, bool auth = true) {
        httplib::Headers h;
        if (auth) h.emplace("Authorization", "Bearer " + session());
        httplib::Result res = method == "GET" ? http_.Get(path, h)
                                              : http_.Post(path, h, body.is_null() ? "{}" : body.dump(),
                                                           "application/json");
        if (!res) throw Error(ErrorCode::NetworkUnreachable, httplib::to_string(res.error()));
        last_status_ = res->status;
        return res->body.empty() ? json(nullptr) : json::parse(res->body, nullptr, false);
    }

    httplib::Result raw_get(const std::string& path) { return http_.Get(path); }
    httplib::Client& http() { return http_; }
    int status() const { return last_status_; }

    std::string session() {
        if (!args_.session.empty()) return args_.session;
        if (cached_.empty()) cached_ = login()["session_id"].get<std::string>();
        return cached_;
    }

    json login() {
        if (args_.user.empty()) throw Error(ErrorCode::BadRequest, "--user is required to log in");
        std::string hex = args_.key_hex;
        if (hex.empty() && !args_.key_file.empty()) {
            std::ifstream in(args_.key_file);
            in >> hex;
        }
        auto seed = crypto::fixed_from_hex<32>(hex);
        if (!seed) throw Error(ErrorCode::BadRequest, "--key or --key-file must hold a 64-hex-character seed");
        auto key = crypto::KeyPair::from_seed(*seed);
        auto c = call("POST", "/v1/login", {{"user_id", args_.user}}, false);
        if (last_status_ != 200) fail(c);
        auto challenge = c["challenge"].get<std::string>();
        auto sig = key.sign(as_bytes("radchain-login:" + challenge));
        auto s = call("POST", "/v1/login",
                      {{"user_id", args_.user}, {"challenge", challenge}, {"signature", crypto::to_hex(sig)}}, false);
        if (last_status_ != 200) fail(s);
        return s;
    }

    [[noreturn]] void fail(const json& body) {
        std::cerr << "HTTP " << last_status_ << " " << body.dump() << "\n";
        std::exit(2);
    }

private:
    ClientArgs args_;
    httplib::Client http_;
    std::string cached_;
    int last_status_ = 0;
};

int print(Api& api, const json& body) {
    std::cout << body.dump(2) << "\n";
    return api.status() >= 400 ? 2 : 0;
}

std::string hex_pixels(const std::string& id, std::uint32_t side, std::uint64_t seed) {
    return crypto::to_hex(pacsvault::synthetic_pixels(id, side, side, seed).encode());
}

void add_client(CLI::App& app, ClientArgs& ca, int& rc) {
    auto* client = app.add_subcommand("client", "Talk to a running gateway over HTTP");
    client->require_subcommand(1);
    client->add_option("--config", ca.config, "TOML file naming the gateway address");
    client->add_option("--url", ca.url, "Gateway base URL (default from --config, else http://127.0.0.1:8080)");
    client->add_option("--session", ca.session, "Existing session id");
    client->add_option("--user", ca.user, "User id for login");
    client->add_option("--key-file", ca.key_file, "File holding the user's hex seed");
    client->add_option("--key", ca.key_hex, "User's hex seed");

    client->add_subcommand("login", "Log in and print the session")->callback([&] {
        Api api(ca);
        rc = print(api, api.login());
    });
    client->add_subcommand("worklist", "Exams visible to the user")->callback([&] {
        Api api(ca);
        rc = print(api, api.call("GET", "/v1/worklist"));
    });

    static std::string exam, reason, token, out, body_text, impression, alert, channel, after, new_user, org, role,
        modality = "CT", physician = "referring", last_id;
    static std::vector<std::string> words;
    static std::uint32_t images = 2, protocol = 0, count = 1;
    static double timeout_s = 30;

    auto* e = client->add_subcommand("exam", "Exam detail");
    e->add_option("exam_id", exam)->required();
    e->callback([&] {
        Api api(ca);
        rc = print(api, api.call("GET", "/v1/exams/" + exam));
    });

    auto* ra = client->add_subcommand("request-access", "Request access to an exam");
    ra->add_option("exam_id", exam)->required();
    ra->add_option("--reason", reason, "Interpretation, PriorComparison or MissingImages");
    ra->callback([&] {
        Api api(ca);
        json b = {{"exam_id", exam}};
        if (!reason.empty()) b["reason"] = reason;
        rc = print(api, api.call("POST", "/v1/access-requests", b));
    });

    auto* vl = client->add_subcommand("view-link", "Issue an image view link");
    vl->add_option("exam_id", exam)->required();
    vl->callback([&] {
        Api api(ca);
        rc = print(api, api.call("POST", "/v1/exams/" + exam + "/view-link"));
    });

    auto* fe = client->add_subcommand("fetch", "Redeem an image token and save the exam file");
    fe->add_option("exam_id", exam)->required();
    fe->add_option("--token", token)->required();
    fe->add_option("--out", out, "Output file")->required();
    fe->callback([&] {
        Api api(ca);
        auto res = api.raw_get("/v1/images/" + exam + "?token=" + token);
        if (!res) throw Error(ErrorCode::NetworkUnreachable, httplib::to_string(res.error()));
        if (res->status != 200) {
            std::cerr << "HTTP " << res->status << " " << res->body << "\n";
            rc = 2;
            return;
        }
        std::ofstream(out, std::ios::binary) << res->body;
        auto decoded = pacsvault::decode_exam_file(as_bytes(res->body));
        std::cout << "wrote " << decoded.size() << " images (" << res->body.size() << " bytes) to " << out << "\n";
    });

    auto* rp = client->add_subcommand("report", "Submit a finalized report");
    rp->add_option("exam_id", exam)->required();
    rp->add_option("--body", body_text)->required();
    rp->add_option("--impression", impression)->required();
    rp->callback([&] {
        Api api(ca);
        rc = print(api, api.call("POST", "/v1/reports",
                                 {{"exam_id", exam}, {"body_text", body_text}, {"impression_text", impression}}));
    });

    auto* ak = client->add_subcommand("ack", "Acknowledge a critical alert");
    ak->add_option("alert_id", alert)->required();
    ak->callback([&] {
        Api api(ca);
        rc = print(api, api.call("POST", "/v1/alerts/" + alert + "/ack"));
    });

    auto* al = client->add_subcommand("alerts", "Alert backlog");
    al->add_option("--after", after, "Cursor from a previous call");
    al->callback([&] {
        Api api(ca);
        rc = print(api, api.call("GET", "/v1/alerts" + (after.empty() ? "" : "?after=" + after)));
    });

    auto* st = client->add_subcommand("stream", "Follow the live alert stream");
    st->add_option("--last-event-id", last_id);
    st->add_option("--count", count, "Stop after this many alerts")->capture_default_str();
    st->add_option("--timeout", timeout_s, "Seconds")->capture_default_str();
    st->callback([&] {
        Api api(ca);
        httplib::Headers h{{"Authorization", "Bearer " + api.session()}};
        if (!last_id.empty()) h.emplace("Last-Event-ID", last_id);
        auto& http = api.http();
        http.set_read_timeout(static_cast<time_t>(timeout_s));
        std::uint32_t seen = 0;
        std::string buf;
        const auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
        auto res = http.Get("/v1/alerts/stream", h, [&](const char* data, size_t len) {
            buf.append(data, len);
            for (auto pos = buf.find("\n\n"); pos != std::string::npos; pos = buf.find("\n\n")) {
                auto ev = buf.substr(0, pos);
                buf.erase(0, pos + 2);
                if (ev.rfind(":", 0) == 0) continue;
                std::cout << ev << "\n\n" << std::flush;
                ++seen;
            }
            return seen < count && std::chrono::steady_clock::now() < end;
        });
        if (res && res->status != 200) {
            std::cerr << "HTTP " << res->status << " " << res->body << "\n";
            rc = 2;
        } else {
            rc = seen >= count ? 0 : 3;
        }
    });

    auto* au = client->add_subcommand("audit", "Access history of an exam");
    au->add_option("exam_id", exam)->required();
    au->callback([&] {
        Api api(ca);
        rc = print(api, api.call("GET", "/v1/audit/exams/" + exam));
    });

    auto* kw = client->add_subcommand("keywords", "Set the critical-finding keywords of a channel");
    kw->add_option("words", words)->required();
    kw->add_option("--channel", channel);
    kw->callback([&] {
        Api api(ca);
        json b = {{"keywords", words}};
        if (!channel.empty()) b["channel"] = channel;
        rc = print(api, api.call("POST", "/v1/admin/keywords", b));
    });

    auto* rg = client->add_subcommand("register", "Enroll a user (CaAdmin)");
    rg->add_option("user_id", new_user)->required();
    rg->add_option("--org", org)->required();
    rg->add_option("--role", role)->required();
    rg->callback([&] {
        Api api(ca);
        rc = print(api, api.call("POST", "/v1/admin/register", {{"user_id", new_user}, {"org_id", org}, {"role", role}}));
    });

    auto* in = client->add_subcommand("ingest", "Store a synthetic study in the site vault (SiteAdmin)");
    in->add_option("exam_id", exam)->required();
    in->add_option("--modality", modality)->capture_default_str();
    in->add_option("--physician", physician, "Referring physician user id")->capture_default_str();
    in->add_option("--images", images, "Synthetic images to generate")->capture_default_str();
    in->add_option("--protocol", protocol, "Images the site protocol expects");
    in->callback([&] {
        Api api(ca);
        json imgs = json::array();
        for (std::uint32_t i = 0; i < images; ++i) {
            auto id = exam + ".i" + std::to_string(i);
            imgs.push_back({{"instance_id", id}, {"pixels_hex", hex_pixels(id, 16, i + 1)}});
        }
        json b = {{"exam_id", exam}, {"modality", modality}, {"referring_physician", physician}, {"images", imgs}};
        if (protocol) b["site_protocol_image_count"] = protocol;
        rc = print(api, api.call("POST", "/v1/admin/studies", b));
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radchain: permissioned ledger for teleradiology image access"};
    app.require_subcommand(1);
    int rc = 0;

    std::string cfg_path;
    std::optional<double> duration;
    auto* gw = app.add_subcommand("gateway", "Run a deployment with the HTTP gateway (and TCP endpoint if configured)");
    gw->add_option("--config", cfg_path, "TOML file (default $RADCHAIN_CONFIG, then ./radchain.toml)");
    gw->add_option("--duration", duration, "Exit after this many seconds");
    gw->callback([&] { rc = run_deployment(cfg_path, true, duration); });

    auto* ord = app.add_subcommand("orderer", "Run a deployment serving only the TCP endpoint");
    ord->add_option("--config", cfg_path, "TOML file");
    ord->add_option("--duration", duration, "Exit after this many seconds");
    ord->callback([&] { rc = run_deployment(cfg_path, false, duration); });

    NodeArgs na;
    auto* node = app.add_subcommand("node", "Run a follower peer that replicates over TCP");
    node->add_option("--config", na.config, "TOML file");
    node->add_option("--peer-id", na.peer_id);
    node->add_option("--org", na.org);
    node->add_option("--connect", na.connect, "host:port of the orderer endpoint");
    node->add_option("--data-dir", na.data_dir);
    node->add_option("--duration", na.duration, "Exit after this many seconds");
    node->callback([&] { rc = run_node(na); });

    SimArgs sa;
    auto* sim = app.add_subcommand("sim", "Simulate the ticket and ledger workflows");
    sim->add_option("--config", sa.config, "TOML file with a [sim] table");
    sim->add_option("--workflow", sa.workflow)
        ->check(CLI::IsMember({"baseline", "blockchain", "both"}))
        ->capture_default_str();
    sim->add_option("--seed", sa.seed);
    sim->add_option("--exams", sa.exams);
    sim->add_option("--latency", sa.latency)->check(CLI::IsMember({"modeled", "measured"}));
    sim->add_option("--out", sa.out, "Output directory")->capture_default_str();
    sim->callback([&] { rc = run_sim(sa); });

    std::string verify_path;
    auto* verify = app.add_subcommand("verify", "Check the hash chain of a block file");
    verify->add_option("block_file", verify_path)->required()->check(CLI::ExistingFile);
    verify->callback([&] {
        auto status = ledger::verify_block_file(verify_path);
        if (status.ok) {
            std::cout << "ok " << ledger::read_block_file(verify_path).blocks.size() << " blocks\n";
        } else {
            std::cout << "corrupt at height " << status.corrupt_height << "\n";
            rc = 1;
        }
    });

    ClientArgs ca;
    add_client(app, ca, rc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
