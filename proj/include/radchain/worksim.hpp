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

// Discrete-event model of the ticket-based image workflow and its ledger
// replacement. Both runs share one per-exam scenario (arrival, missing
// images, criticality, read time) drawn from the seed, so their reports can
// be compared exam by exam.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "radchain/ledger.hpp"

namespace radchain::worksim {

enum class EventKind : std::uint8_t {
    ExamArrives,
    TicketOpened,
    SupportPickup,
    SiteContacted,
    ImagesResent,
    TicketClosed,
    AccessRequested,
    AccessGranted,
    TokenIssued,
    ImagesViewed,
    ReportFinalized,
    AlertRaised,
    AlertAcked,
    ConferenceConnected,
};

std::string_view to_string(EventKind k) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view s) noexcept;

struct WorkflowEvent {
    double time = 0;  // simulated seconds
    EventKind kind = EventKind::ExamArrives;
    std::string actor;
    std::string exam_id;

    bool operator==(const WorkflowEvent&) const = default;
};

/// Closed interval in minutes unless the field says otherwise.
struct Uniform {
    double lo = 0;
    double hi = 0;

    double mean() const noexcept { return (lo + hi) / 2; }
    bool operator==(const Uniform&) const = default;
};

enum class LatencyMode : std::uint8_t { Modeled, Measured };

struct SimConfig {
    std::uint64_t rng_seed = 1;
    std::uint32_t n_exams = 500;
    double p_missing_images = 0.15;
    double p_critical = 0.05;
    double mean_interarrival_min = 10;

    Uniform inspect_min{1, 3};
    Uniform read_min{10, 20};

    // ticket workflow
    Uniform ticket_resolution_min{20, 30};
    std::uint32_t support_pool_size = 2;
    double p_voicemail = 0.3;
    Uniform voicemail_retry_min{5, 10};
    Uniform conference_delay_min{5, 15};

    // ledger workflow
    Uniform request_think_min{0.25, 0.75};
    Uniform ack_delay_min{1, 5};
    Uniform endorse_s{0.05, 0.2};
    Uniform order_s{0.2, 0.5};
    Uniform commit_s{0.05, 0.2};
    Uniform token_s{0.1, 0.3};
    LatencyMode latency_mode = LatencyMode::Modeled;

    std::uint32_t images_per_exam = 2;
    std::uint32_t radiologists = 4;

    /// Throws InvalidConfig.
    void validate() const;
};

struct ExamOutcome {
    std::string exam_id;
    bool missing_images = false;
    bool critical = false;
    double turnaround_s = 0;                 // ExamArrives -> ReportFinalized
    std::optional<double> notify_latency_s;  // ReportFinalized -> AlertAcked | ConferenceConnected

    bool operator==(const ExamOutcome&) const = default;
};

struct Summary {
    std::size_t n = 0;
    double mean = 0;
    double median = 0;
    double p95 = 0;  // nearest rank

    bool operator==(const Summary&) const = default;
};

Summary summarize(std::vector<double> values);

enum class Workflow : std::uint8_t { Baseline, Blockchain };
std::string_view to_string(Workflow w) noexcept;

struct TurnaroundReport {
    Workflow workflow = Workflow::Baseline;
    std::uint64_t rng_seed = 0;
    std::uint32_t n_exams = 0;
    std::vector<ExamOutcome> exams;  // arrival order
    Summary turnaround;              // minutes, every exam
    Summary turnaround_missing;      // minutes, missing-image exams
    Summary notify_latency;          // minutes, critical exams

    /// metric,workflow,n,mean_min,median_min,p95_min
    void write_csv(std::ostream& out) const;
    void write_text(std::ostream& out) const;
};

/// Rebuild the report from a raw event log alone.
TurnaroundReport report_from_log(Workflow workflow, std::uint64_t seed, std::uint32_t n_exams,
                                 const std::vector<WorkflowEvent>& log);

struct RunResult {
    std::vector<WorkflowEvent> log;
    TurnaroundReport report;
    std::vector<ledger::Block> chain;  // ledger workflow only: the exam channel as committed
};

RunResult run_baseline(const SimConfig& config);
RunResult run_blockchain(const SimConfig& config);

/// time_s,kind,actor,exam_id
void write_event_log(std::ostream& out, const std::vector<WorkflowEvent>& log);
std::vector<WorkflowEvent> read_event_log(std::istream& in);

/// Events whose enabling predecessor (same exam) is missing or later.
struct CausalityViolation {
    std::size_t index = 0;
    std::string reason;
};
std::vector<CausalityViolation> check_causality(const std::vector<WorkflowEvent>& log);

struct SavingsRow {
    std::string metric;
    std::size_t n = 0;
    double a_mean = 0;  // minutes
    double b_mean = 0;
    double delta = 0;  // a - b
    double ci_lo = 0;
    double ci_hi = 0;
};

struct SavingsTable {
    std::string a_name;
    std::string b_name;
    std::vector<SavingsRow> rows;

    const SavingsRow& row(std::string_view metric) const;
    void write_csv(std::ostream& out) const;
    void write_text(std::ostream& out) const;
};

inline constexpr std::size_t kBootstrapResamples = 1000;

/// Paired per-exam deltas (a - b) with bootstrap 95% intervals. Throws
/// ConfigMismatch unless both reports share seed and n_exams.
SavingsTable compare(const TurnaroundReport& a, const TurnaroundReport& b,
                     std::size_t resamples = kBootstrapResamples);

}  // namespace radchain::worksim
