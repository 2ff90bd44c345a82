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

#include "sensfarm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "sensfarm/error.hpp"
#include "svg.hpp"

namespace sensfarm {

namespace fs = std::filesystem;

namespace {

enum class ClientState { kQueued, kSubmitted, kCompleted, kFailed };

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Event>
std::vector<Event> time_sorted(std::span<const Event> events) {
  std::vector<Event> sorted(events.begin(), events.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Event& a, const Event& b) { return a.t_ms < b.t_ms; });
  return sorted;
}

std::size_t tick_count(double last_t, double tick_ms) {
  return static_cast<std::size_t>(std::ceil(last_t / tick_ms)) + 1;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

}  // namespace

Timeline build_timeline(std::span<const DispatchEvent> events, double tick_ms) {
  if (!(tick_ms > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tick must be positive");
  const auto sorted = time_sorted(events);
  std::map<RunId, ClientState> state;
  for (const auto& e : sorted) state.emplace(e.run_id, ClientState::kQueued);

  Timeline tl;
  tl.tick_ms = tick_ms;
  tl.total = state.size();
  std::size_t counts[4] = {state.size(), 0, 0, 0};

  const double last_t = sorted.empty() ? 0.0 : sorted.back().t_ms;
  const std::size_t ticks = tick_count(last_t, tick_ms);
  std::size_t next = 0;
  for (std::size_t k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * tick_ms;
    while (next < sorted.size() && sorted[next].t_ms <= t) {
      const auto& e = sorted[next++];
      ClientState target = state[e.run_id];
      switch (e.kind) {
        case DispatchKind::kEnqueued:
        case DispatchKind::kRetryScheduled: target = ClientState::kQueued; break;
        case DispatchKind::kSent: target = ClientState::kSubmitted; break;
        case DispatchKind::kCompleted: target = ClientState::kCompleted; break;
        case DispatchKind::kFailed: target = ClientState::kFailed; break;
      }
      --counts[static_cast<int>(state[e.run_id])];
      ++counts[static_cast<int>(target)];
      state[e.run_id] = target;
      tl.peak_submitted = std::max(tl.peak_submitted, counts[1]);
    }
    tl.rows.push_back({t, counts[0], counts[1], counts[2], counts[3]});
  }
  return tl;
}

std::optional<std::string> check_event_grammar(std::span<const DispatchEvent> events, bool allow_partial) {
  enum class S { kStart, kEnqueued, kSent, kRetry, kDone };
  struct Progress {
    S state = S::kStart;
    int attempt = 0;
  };
  std::map<RunId, Progress> runs;
  for (const auto& e : events) {
    Progress& p = runs[e.run_id];
    const std::string where = "run " + std::to_string(e.run_id) + ": " + std::string(to_string(e.kind));
    switch (e.kind) {
      case DispatchKind::kEnqueued:
        if (p.state != S::kStart) return where + " after start";
        p.state = S::kEnqueued;
        break;
      case DispatchKind::kSent:
        if (p.state != S::kEnqueued && p.state != S::kRetry) return where + " out of order";
        if (e.attempt != p.attempt + 1) return where + " attempt not incremented";
        p.attempt = e.attempt;
        p.state = S::kSent;
        break;
      case DispatchKind::kRetryScheduled:
        if (p.state != S::kSent) return where + " without SENT";
        p.state = S::kRetry;
        break;
      case DispatchKind::kCompleted:
      case DispatchKind::kFailed:
        if (p.state != S::kSent) return where + " without SENT";
        p.state = S::kDone;
        break;
    }
  }
  if (!allow_partial) {
    for (const auto& [id, p] : runs) {
      if (p.state != S::kDone) return "run " + std::to_string(id) + " never reached a terminal event";
    }
  }
  return std::nullopt;
}

ProviderTimeline build_provider_timeline(std::span<const WorkerEvent> events, double tick_ms) {
  if (!(tick_ms > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tick must be positive");
  const auto sorted = time_sorted(events);
  ProviderTimeline tl;
  tl.tick_ms = tick_ms;
  const double last_t = sorted.empty() ? 0.0 : sorted.back().t_ms;
  const std::size_t ticks = tick_count(last_t, tick_ms);
  std::size_t active = 0, completed = 0, next = 0;
  for (std::size_t k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * tick_ms;
    while (next < sorted.size() && sorted[next].t_ms <= t) {
      const auto& e = sorted[next++];
      if (e.kind == WorkerEventKind::kStarted) {
        ++active;
        tl.peak_active = std::max(tl.peak_active, active);
      } else if (e.kind == WorkerEventKind::kFinished) {
        --active;
        ++completed;
      }
    }
    tl.rows.push_back({t, active, completed});
  }
  return tl;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::kNoData, "quantile of empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "quantile must be in (0, 1]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

OverheadStats overhead_stats(std::span<const RunRecord> records, double bin_ms) {
  if (!(bin_ms > 0.0)) throw Error(ErrorCode::kInvalidArgument, "bin width must be positive");
  OverheadStats s;
  s.bin_ms = bin_ms;
  std::vector<const RunRecord*> completed;
  for (const auto& r : records) {
    if (r.state == RunState::kCompleted && r.overhead_ms()) completed.push_back(&r);
  }
  if (completed.empty()) throw Error(ErrorCode::kNoData, "no completed runs");
  std::sort(completed.begin(), completed.end(),
            [](const RunRecord* a, const RunRecord* b) { return a->run_id < b->run_id; });
  for (const auto* r : completed) s.overheads_ms.push_back(*r->overhead_ms());

  double sum = 0.0;
  for (double v : s.overheads_ms) sum += v;
  s.mean = sum / static_cast<double>(s.overheads_ms.size());
  s.p50 = nearest_rank_quantile(s.overheads_ms, 0.50);
  s.p90 = nearest_rank_quantile(s.overheads_ms, 0.90);
  s.p99 = nearest_rank_quantile(s.overheads_ms, 0.99);
  s.max = nearest_rank_quantile(s.overheads_ms, 1.0);

  const auto bins = static_cast<std::size_t>(std::floor(std::max(s.max, 0.0) / bin_ms)) + 1;
  for (std::size_t b = 0; b < bins; ++b) {
    s.histogram.push_back({static_cast<double>(b) * bin_ms, static_cast<double>(b + 1) * bin_ms, 0});
  }
  for (double v : s.overheads_ms) {
    const auto b = static_cast<std::size_t>(std::floor(std::max(v, 0.0) / bin_ms));
    ++s.histogram[std::min(b, bins - 1)].count;
  }
  return s;
}

std::vector<RuntimeRow> runtime_table(std::span<const WorkerEvent> events) {
  struct Partial {
    RuntimeRow row;
    bool received = false, started = false, finished = false;
  };
  std::map<std::uint64_t, Partial> by_request;
  for (const auto& e : events) {
    Partial& p = by_request[e.request_id];
    p.row.request_id = e.request_id;
    p.row.run_id = e.run_id;
    switch (e.kind) {
      case WorkerEventKind::kReceived:
        p.row.received_ms = e.t_ms;
        p.received = true;
        break;
      case WorkerEventKind::kStarted:
        p.row.start_ms = e.t_ms;
        p.row.instance_id = e.instance_id;
        p.started = true;
        break;
      case WorkerEventKind::kFinished:
        p.row.end_ms = e.t_ms;
        p.finished = true;
        break;
      default:
        break;
    }
  }
  std::vector<RuntimeRow> rows;
  for (const auto& [id, p] : by_request) {
    if (p.received && p.started && p.finished) rows.push_back(p.row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RuntimeRow& a, const RuntimeRow& b) { return a.received_ms < b.received_ms; });
  return rows;
}

std::size_t peak_concurrent_executions(std::span<const WorkerEvent> events) {
  const auto sorted = time_sorted(events);
  std::size_t active = 0, peak = 0;
  for (const auto& e : sorted) {
    if (e.kind == WorkerEventKind::kStarted) peak = std::max(peak, ++active);
    if (e.kind == WorkerEventKind::kFinished) --active;
  }
  return peak;
}

double speedup(std::span<const RunRecord> records, double wall_time_ms) {
  if (!(wall_time_ms > 0.0)) throw Error(ErrorCode::kInvalidArgument, "wall time must be positive");
  double sim = 0.0;
  for (const auto& r : records) {
    if (r.state == RunState::kCompleted && r.sim_time_ms) sim += *r.sim_time_ms;
  }
  return sim / wall_time_ms;
}

std::string timeline_csv(const Timeline& timeline) {
  std::string out = "t_ms,queued,submitted,completed,failed\n";
  for (const auto& r : timeline.rows) {
    out += g17(r.t_ms) + "," + std::to_string(r.queued) + "," + std::to_string(r.submitted) + "," +
           std::to_string(r.completed) + "," + std::to_string(r.failed) + "\n";
  }
  return out;
}

std::string provider_timeline_csv(const ProviderTimeline& timeline) {
  std::string out = "t_ms,active,completed\n";
  for (const auto& r : timeline.rows) {
    out += g17(r.t_ms) + "," + std::to_string(r.active) + "," + std::to_string(r.completed) + "\n";
  }
  return out;
}

std::string overhead_csv(const OverheadStats& stats) {
  std::string out = "bin_lo_ms,bin_hi_ms,count\n";
  for (const auto& b : stats.histogram) {
    out += g17(b.lo) + "," + g17(b.hi) + "," + std::to_string(b.count) + "\n";
  }
  return out;
}

std::string runtime_csv(std::span<const RuntimeRow> rows) {
  std::string out = "run_id,request_id,instance_id,received_ms,start_ms,end_ms\n";
  for (const auto& r : rows) {
    out += std::to_string(r.run_id) + "," + std::to_string(r.request_id) + "," +
           std::to_string(r.instance_id) + "," + g17(r.received_ms) + "," + g17(r.start_ms) + "," +
           g17(r.end_ms) + "\n";
  }
  return out;
}

std::string report_svg(const ReportInputs& inputs) {
  svg::Document doc;
  bool any = false;
  if (inputs.client && !inputs.client->rows.empty()) {
    svg::LinePanel panel{"Client-side run states", "time [ms]", {{"queued", {}}, {"submitted", {}},
                                                                 {"completed", {}}, {"failed", {}}}};
    for (const auto& r : inputs.client->rows) {
      panel.series[0].points.emplace_back(r.t_ms, static_cast<double>(r.queued));
      panel.series[1].points.emplace_back(r.t_ms, static_cast<double>(r.submitted));
      panel.series[2].points.emplace_back(r.t_ms, static_cast<double>(r.completed));
      panel.series[3].points.emplace_back(r.t_ms, static_cast<double>(r.failed));
    }
    doc.add(panel);
    any = true;
  }
  if (inputs.provider && !inputs.provider->rows.empty()) {
    svg::LinePanel panel{"Provider-side executions", "time [ms]", {{"active", {}}, {"completed", {}}}};
    for (const auto& r : inputs.provider->rows) {
      panel.series[0].points.emplace_back(r.t_ms, static_cast<double>(r.active));
      panel.series[1].points.emplace_back(r.t_ms, static_cast<double>(r.completed));
    }
    doc.add(panel);
    any = true;
  }
  if (inputs.overhead) {
    svg::BarPanel panel{"Communication overhead histogram [ms]", {"runs"}, {}};
    for (const auto& b : inputs.overhead->histogram) {
      if (b.count == 0) continue;
      panel.groups.push_back({g17(b.lo) + "-" + g17(b.hi), {static_cast<double>(b.count)}});
    }
    doc.add(panel);
    any = true;
  }
  if (!any) doc.add_note("no data");
  return doc.str();
}

void render_report(const ReportInputs& inputs, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kUnwritableDirectory, out_dir.string() + ": " + ec.message());
  write_text(out_dir / "timeline_client.csv", inputs.client ? timeline_csv(*inputs.client)
                                                            : timeline_csv(Timeline{}));
  write_text(out_dir / "timeline_provider.csv", inputs.provider ? provider_timeline_csv(*inputs.provider)
                                                                : provider_timeline_csv(ProviderTimeline{}));
  write_text(out_dir / "overhead.csv", inputs.overhead ? overhead_csv(*inputs.overhead)
                                                       : overhead_csv(OverheadStats{}));
  write_text(out_dir / "runtime.csv", runtime_csv(inputs.runtime));
  write_text(out_dir / "summary.json", inputs.summary.dump(2) + "\n");
  write_text(out_dir / "report.svg", report_svg(inputs));
}

}  // namespace sensfarm
