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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>

namespace radchain {

/// UTC seconds since the epoch. Recorded in ledger structures but never
/// used to order anything.
using Clock = std::function<std::int64_t()>;

inline std::int64_t wall_clock_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

inline Clock system_clock() { return wall_clock_seconds; }

/// Settable clock for tests and simulation.
class ManualClock {
public:
    explicit ManualClock(std::int64_t start = 1'700'000'000) : now_(std::make_shared<std::atomic<std::int64_t>>(start)) {}

    std::int64_t now() const { return now_->load(); }
    void set(std::int64_t t) { now_->store(t); }
    void advance(std::int64_t seconds) { now_->fetch_add(seconds); }

    Clock clock() const {
        return [state = now_] { return state->load(); };
    }

private:
    std::shared_ptr<std::atomic<std::int64_t>> now_;
};

}  // namespace radchain
