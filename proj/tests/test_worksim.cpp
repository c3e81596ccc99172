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

#include <cmath>
#include <map>
#include <sstream>

#include "radchain/contracts.hpp"
#include "radchain/worksim.hpp"

namespace radchain::worksim {
namespace {

std::string log_csv(const std::vector<WorkflowEvent>& log) {
    std::ostringstream out;
    write_event_log(out, log);
    return out.str();
}

std::size_t count_kind(const std::vector<WorkflowEvent>& log, EventKind k) {
    std::size_t n = 0;
    for (const auto& e : log) n += e.kind == k;
    return n;
}

/// Independent recomputation straight from CSV text: per-exam turnaround in minutes.
std::map<std::string, double> turnaround_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::map<std::string, double> arrive, done, out;
    while (std::getline(in, line)) {
        auto c1 = line.find(','), c2 = line.find(',', c1 + 1), c3 = line.find(',', c2 + 1);
        double t = std::strtod(line.substr(0, c1).c_str(), nullptr);
        auto kind = line.substr(c1 + 1, c2 - c1 - 1);
        auto exam = line.substr(c3 + 1);
        if (kind == "ExamArrives") arrive[exam] = t;
        if (kind == "ReportFinalized" && !done.count(exam)) done[exam] = t;
    }
    for (const auto& [exam, t] : done) out[exam] = (t - arrive.at(exam)) / 60.0;
    return out;
}

TEST(WorksimConfig, Validation) {
    SimConfig c;
    EXPECT_NO_THROW(c.validate());
    auto expect_invalid = [](SimConfig bad) {
        try {
            bad.validate();
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
        }
    };
    auto bad = c;
    bad.p_missing_images = 1.5;
    expect_invalid(bad);
    bad = c;
    bad.p_critical = -0.1;
    expect_invalid(bad);
    bad = c;
    bad.ticket_resolution_min = {30, 20};
    expect_invalid(bad);
    bad = c;
    bad.support_pool_size = 0;
    expect_invalid(bad);
    bad = c;
    bad.n_exams = 3;
    bad.p_voicemail = 2;
    EXPECT_THROW(run_baseline(bad), Error);
    EXPECT_THROW(run_blockchain(bad), Error);
}

TEST(WorksimStats, NearestRankAndMedian) {
    std::vector<double> v;
    for (int i = 20; i >= 1; --i) v.push_back(i);
    auto s = summarize(v);
    EXPECT_EQ(s.n, 20u);
    EXPECT_DOUBLE_EQ(s.mean, 10.5);
    EXPECT_DOUBLE_EQ(s.median, 10.5);
    EXPECT_DOUBLE_EQ(s.p95, 19);
    EXPECT_EQ(summarize({}).n, 0u);
    EXPECT_DOUBLE_EQ(summarize({3, 1, 2}).median, 2);
}

TEST(WorksimBaseline, OneMissingExamCarriesOneTicketDelay) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        SimConfig c;
        c.rng_seed = seed;
        c.n_exams = 1;
        c.p_missing_images = 1;
        c.p_critical = 0;
        auto run = run_baseline(c);
        std::vector<double> contacts;
        double pickup = 0, closed = 0;
        for (const auto& e : run.log) {
            if (e.kind == EventKind::SupportPickup) pickup = e.time;
            if (e.kind == EventKind::SiteContacted) contacts.push_back(e.time);
            if (e.kind == EventKind::TicketClosed) closed = e.time;
        }
        ASSERT_EQ(count_kind(run.log, EventKind::TicketOpened), 1u);
        ASSERT_FALSE(contacts.empty());
        double voicemail = contacts.size() == 2 ? contacts[1] - contacts[0] : 0;
        double ticket_min = (closed - pickup - voicemail) / 60;
        EXPECT_GE(ticket_min, 20 - 1e-6);
        EXPECT_LE(ticket_min, 30 + 1e-6);
        EXPECT_GE(run.report.turnaround.mean, ticket_min);
    }
}

TEST(WorksimBaseline, DegenerateConfigIsPureReadTime) {
    SimConfig c;
    c.n_exams = 50;
    c.p_missing_images = 0;
    c.p_critical = 0;
    auto run = run_baseline(c);
    for (const auto& e : run.log)
        EXPECT_TRUE(e.kind == EventKind::ExamArrives || e.kind == EventKind::ReportFinalized) << to_string(e.kind);
    for (const auto& o : run.report.exams) {
        EXPECT_GE(o.turnaround_s / 60, c.inspect_min.lo + c.read_min.lo - 1e-6);
        EXPECT_LE(o.turnaround_s / 60, c.inspect_min.hi + c.read_min.hi + 1e-6);
    }
}

TEST(WorksimBaseline, CriticalTicketsJumpTheQueue) {
    SimConfig c;
    c.n_exams = 300;
    c.support_pool_size = 1;
    c.p_missing_images = 0.5;
    c.p_critical = 0.3;
    c.mean_interarrival_min = 5;
    auto run = run_baseline(c);
    EXPECT_TRUE(check_causality(run.log).empty());
    EXPECT_GT(count_kind(run.log, EventKind::ConferenceConnected), 0u);
    // every critical exam has a notify latency
    for (const auto& o : run.report.exams)
        EXPECT_TRUE(!o.critical || o.notify_latency_s.has_value());
}

TEST(WorksimBaseline, FixedSeedIsByteIdentical) {
    SimConfig c;
    c.n_exams = 200;
    c.rng_seed = 77;
    EXPECT_EQ(log_csv(run_baseline(c).log), log_csv(run_baseline(c).log));
    c.rng_seed = 78;
    auto other = log_csv(run_baseline(c).log);
    c.rng_seed = 77;
    EXPECT_NE(log_csv(run_baseline(c).log), other);
}

TEST(WorksimBlockchain, NoSupportQueueEvents) {
    SimConfig c;
    c.n_exams = 1;
    c.p_missing_images = 1;
    c.p_critical = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        c.rng_seed = seed;
        auto run = run_blockchain(c);
        for (auto k : {EventKind::TicketOpened, EventKind::SupportPickup, EventKind::SiteContacted,
                       EventKind::ImagesResent, EventKind::TicketClosed, EventKind::ConferenceConnected})
            EXPECT_EQ(count_kind(run.log, k), 0u) << to_string(k);
        EXPECT_EQ(count_kind(run.log, EventKind::AccessRequested), 2u);
        EXPECT_EQ(count_kind(run.log, EventKind::ImagesViewed), 2u);
        EXPECT_TRUE(run.report.exams.at(0).missing_images);
        EXPECT_TRUE(check_causality(run.log).empty());
    }
}

TEST(WorksimBlockchain, EveryCriticalAlertSharesItsReportCommit) {
    SimConfig c;
    c.n_exams = 10;
    c.p_critical = 1;
    auto run = run_blockchain(c);
    EXPECT_EQ(count_kind(run.log, EventKind::AlertRaised), 10u);
    EXPECT_EQ(count_kind(run.log, EventKind::AlertAcked), 10u);

    std::map<std::string, double> finalized, raised;
    for (const auto& e : run.log) {
        if (e.kind == EventKind::ReportFinalized) finalized[e.exam_id] = e.time;
        if (e.kind == EventKind::AlertRaised) raised[e.exam_id] = e.time;
    }
    EXPECT_EQ(finalized, raised);

    // ledger side: each valid submit_report wrote its report and its alert together
    std::size_t reports = 0;
    for (const auto& block : run.chain)
        for (std::size_t i = 0; i < block.transactions.size(); ++i) {
            const auto& tx = block.transactions[i];
            if (tx.operation != contracts::op::kSubmitReport) continue;
            ASSERT_EQ(block.validity_flags[i], ledger::Validity::Valid);
            bool report = false, alert = false;
            for (const auto& w : tx.write_set) {
                report = report || w.key.rfind("report/", 0) == 0;
                alert = alert || w.key.rfind("alert/", 0) == 0;
            }
            EXPECT_TRUE(report && alert);
            ++reports;
        }
    EXPECT_EQ(reports, 10u);
}

TEST(WorksimBlockchain, FixedSeedIsByteIdentical) {
    SimConfig c;
    c.n_exams = 60;
    c.p_missing_images = 0.4;
    c.p_critical = 0.2;
    c.rng_seed = 9;
    EXPECT_EQ(log_csv(run_blockchain(c).log), log_csv(run_blockchain(c).log));
}

TEST(WorksimCompare, IdenticalReportsGiveZeroDeltas) {
    SimConfig c;
    c.n_exams = 100;
    auto r = run_baseline(c).report;
    auto table = compare(r, r);
    ASSERT_EQ(table.rows.size(), 3u);
    for (const auto& row : table.rows) {
        EXPECT_EQ(row.delta, 0);
        EXPECT_EQ(row.ci_lo, 0);
        EXPECT_EQ(row.ci_hi, 0);
    }
}

TEST(WorksimCompare, MismatchedSeedsRejected) {
    SimConfig c;
    c.n_exams = 20;
    auto a = run_baseline(c).report;
    c.rng_seed = 2;
    auto b = run_baseline(c).report;
    try {
        compare(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigMismatch);
    }
    c.rng_seed = 1;
    c.n_exams = 21;
    EXPECT_THROW(compare(a, run_baseline(c).report), Error);
}

TEST(WorksimCompare, SavingsMatchClosedFormExpectation) {
    SimConfig c;
    c.rng_seed = 3;
    c.p_missing_images = 0.3;
    c.p_critical = 0;
    c.support_pool_size = 64;  // no queueing: the closed form has no wait term
    auto base = run_baseline(c);
    auto chain = run_blockchain(c);
    auto table = compare(base.report, chain.report);
    const auto& row = table.row("turnaround_missing");

    const double tx_min = (c.endorse_s.mean() + c.order_s.mean() + c.commit_s.mean()) / 60;
    const double expected = c.ticket_resolution_min.mean() + c.p_voicemail * c.voicemail_retry_min.mean() -
                            c.request_think_min.mean() - 8 * tx_min - 2 * c.token_s.mean() / 60;
    EXPECT_GE(row.delta, 19);
    EXPECT_LE(row.delta, 30);
    EXPECT_NEAR(row.delta, expected, 1.5);
    EXPECT_LE(row.ci_lo, row.delta);
    EXPECT_GE(row.ci_hi, row.delta);
    EXPECT_GT(row.n, 100u);
}

TEST(WorksimProperties, StatisticsRecomputeFromRawLog) {
    SimConfig c;
    c.n_exams = 120;
    c.p_missing_images = 0.3;
    c.p_critical = 0.1;
    for (auto run : {run_baseline(c), run_blockchain(c)}) {
        auto csv = log_csv(run.log);
        auto oracle = turnaround_from_csv(csv);
        ASSERT_EQ(oracle.size(), run.report.exams.size());
        double sum = 0;
        for (const auto& o : run.report.exams) {
            EXPECT_NEAR(o.turnaround_s / 60, oracle.at(o.exam_id), 1e-9);
            sum += oracle.at(o.exam_id);
        }
        EXPECT_NEAR(run.report.turnaround.mean, sum / static_cast<double>(oracle.size()), 1e-9);

        std::istringstream in(csv);
        auto parsed = read_event_log(in);
        EXPECT_EQ(parsed, run.log);
        auto again = report_from_log(run.report.workflow, c.rng_seed, c.n_exams, parsed);
        EXPECT_EQ(again.turnaround, run.report.turnaround);
        EXPECT_EQ(again.turnaround_missing, run.report.turnaround_missing);
        EXPECT_EQ(again.notify_latency, run.report.notify_latency);
    }
}

TEST(WorksimProperties, CausalityHoldsAndViolationsAreCaught) {
    SimConfig c;
    c.n_exams = 150;
    c.p_missing_images = 0.4;
    c.p_critical = 0.2;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        c.rng_seed = seed;
        EXPECT_TRUE(check_causality(run_baseline(c).log).empty());
        EXPECT_TRUE(check_causality(run_blockchain(c).log).empty());
    }
    auto log = run_blockchain(c).log;
    for (std::size_t i = 0; i < log.size(); ++i)
        if (log[i].kind == EventKind::TokenIssued) {
            auto broken = log;
            broken.erase(broken.begin() + static_cast<std::ptrdiff_t>(i) - 1);  // drop AccessGranted
            EXPECT_FALSE(check_causality(broken).empty());
            break;
        }
    auto reordered = log;
    std::swap(reordered[0], reordered[1]);
    EXPECT_FALSE(check_causality(reordered).empty());
}

TEST(WorksimReport, CsvAndTextShapes) {
    SimConfig c;
    c.n_exams = 40;
    auto a = run_baseline(c).report;
    std::ostringstream csv, text, cmp_csv, cmp_text;
    a.write_csv(csv);
    a.write_text(text);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "metric,workflow,n,mean_min,median_min,p95_min");
    EXPECT_NE(text.str().find("turnaround_missing"), std::string::npos);
    auto table = compare(a, run_blockchain(c).report);
    table.write_csv(cmp_csv);
    table.write_text(cmp_text);
    EXPECT_EQ(cmp_csv.str().substr(0, cmp_csv.str().find('\n')),
              "metric,n,baseline_mean_min,blockchain_mean_min,delta_min,ci95_lo_min,ci95_hi_min");
    EXPECT_NE(cmp_text.str().find("95% CI"), std::string::npos);
}

}  // namespace
}  // namespace radchain::worksim
