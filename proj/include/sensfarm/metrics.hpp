// Copyright 2026 The sensfarm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sensfarm/campaign.hpp"
#include "sensfarm/executor.hpp"
#include "sensfarm/worker.hpp"

namespace sensfarm {

inline constexpr double kDefaultTickMs = 100.0;

// Client view of one tick: how many runs are in each state after every event
// with t <= t_ms has been applied. Runs waiting for a retry count as queued.
struct TimelineRow {
  double t_ms = 0.0;
  std::size_t queued = 0;
  std::size_t submitted = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
};

struct Timeline {
  double tick_ms = kDefaultTickMs;
  std::size_t total = 0;
  // Exact maximum of in-flight requests over the whole event sequence.
  std::size_t peak_submitted = 0;
  std::vector<TimelineRow> rows;
};

Timeline build_timeline(std::span<const DispatchEvent> events, double tick_ms = kDefaultTickMs);

// Checks the per-run grammar ENQUEUED (SENT RETRY_SCHEDULED)* SENT
// (COMPLETED | FAILED), allowing an unfinished suffix when `allow_partial`.
// Returns a description of the first violation.
std::optional<std::string> check_event_grammar(std::span<const DispatchEvent> events,
                                               bool allow_partial = false);

struct ProviderTimelineRow {
  double t_ms = 0.0;
  std::size_t active = 0;     // between STARTED and FINISHED
  std::size_t completed = 0;  // FINISHED so far
};

struct ProviderTimeline {
  double tick_ms = kDefaultTickMs;
  std::size_t peak_active = 0;
  std::vector<ProviderTimelineRow> rows;
};

ProviderTimeline build_provider_timeline(std::span<const WorkerEvent> events,
                                         double tick_ms = kDefaultTickMs);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct OverheadStats {
  std::vector<double> overheads_ms;  // per completed run, in run_id order
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
  double bin_ms = 100.0;
  std::vector<HistogramBin> histogram;
};

// Nearest-rank quantile: the ceil(q*n)-th smallest value, q in (0, 1].
double nearest_rank_quantile(std::vector<double> values, double q);

// Throws Error(kNoData) without completed records.
OverheadStats overhead_stats(std::span<const RunRecord> records, double bin_ms = 100.0);

struct RuntimeRow {
  RunId run_id = 0;
  std::uint64_t request_id = 0;
  std::int64_t instance_id = -1;
  double received_ms = 0.0;
  double start_ms = 0.0;
  double end_ms = 0.0;
};

// Requests that actually executed, sorted by received time.
std::vector<RuntimeRow> runtime_table(std::span<const WorkerEvent> events);

// Peak number of concurrently executing requests per the worker log.
std::size_t peak_concurrent_executions(std::span<const WorkerEvent> events);

// sum(sim_time_ms) / wall_time_ms over completed records.
double speedup(std::span<const RunRecord> records, double wall_time_ms);

struct ReportInputs {
  std::optional<Timeline> client;
  std::optional<ProviderTimeline> provider;
  std::optional<OverheadStats> overhead;
  std::vector<RuntimeRow> runtime;
  nlohmann::json summary = nlohmann::json::object();
};

std::string timeline_csv(const Timeline& timeline);
std::string provider_timeline_csv(const ProviderTimeline& timeline);
std::string overhead_csv(const OverheadStats& stats);
std::string runtime_csv(std::span<const RuntimeRow> rows);
std::string report_svg(const ReportInputs& inputs);

// Writes timeline_client.csv, timeline_provider.csv, overhead.csv,
// runtime.csv, summary.json and report.svg into `out_dir`. Missing inputs
// produce header-only CSVs.
void render_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

}  // namespace sensfarm
