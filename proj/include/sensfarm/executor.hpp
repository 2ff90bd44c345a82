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

#include <chrono>
#include <cstddef>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sensfarm/campaign.hpp"
#include "sensfarm/protocol.hpp"

namespace sensfarm {

// Capped exponential backoff with symmetric multiplicative jitter.
struct BackoffPolicy {
  double initial_ms = 100.0;
  double multiplier = 2.0;
  double max_ms = 5000.0;
  double jitter = 0.1;  // fraction in [0, 1]
};

// min(initial * multiplier^(attempt-1), max) scaled by
// 1 + jitter * (2 * unit_draw - 1). `unit_draw` is a uniform draw in [0, 1);
// 0.5 gives the un-jittered delay.
double backoff_delay(int attempt, const BackoffPolicy& policy, double unit_draw = 0.5);

struct HttpRequest {
  std::string method = "POST";
  std::string path = "/";
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;

  friend bool operator==(const HttpRequest&, const HttpRequest&) = default;
};

// Hook for provider credentials. Implementations may add headers only.
class RequestSigner {
 public:
  virtual ~RequestSigner() = default;
  virtual void sign(HttpRequest& request) const = 0;
};

class IdentitySigner final : public RequestSigner {
 public:
  void sign(HttpRequest&) const override {}
};

class StaticTokenSigner final : public RequestSigner {
 public:
  explicit StaticTokenSigner(std::string token, std::string header = "Authorization",
                             std::string scheme = "Bearer")
      : token_(std::move(token)), header_(std::move(header)), scheme_(std::move(scheme)) {}
  void sign(HttpRequest& request) const override;

 private:
  std::string token_;
  std::string header_;
  std::string scheme_;
};

// Applies `signer` to a copy of `request`. Throws Error(kSignerFailure) if the
// signer throws, or if it touched anything other than appending headers.
HttpRequest sign_request(HttpRequest request, const RequestSigner& signer);

struct ExecutorConfig {
  std::string endpoint_url;
  std::size_t max_load = 256;
  int request_timeout_ms = 30000;
  int max_retries = 3;
  BackoffPolicy backoff;
  std::shared_ptr<const RequestSigner> signer;  // null means identity
  std::uint64_t seed = 0;                       // jitter stream
  std::filesystem::path event_log_path;         // empty: keep events in memory only

  void validate() const;
};

struct Endpoint {
  std::string scheme_host_port;  // e.g. http://127.0.0.1:8080
  std::string path;              // e.g. /invoke
};
Endpoint parse_endpoint(const std::string& url);

enum class SendStatus { kSuccess, kRetryable, kFatal };

struct SendResult {
  SendStatus status = SendStatus::kFatal;
  WireResponse response;    // valid on success
  double wall_time_ms = 0;  // client-side round trip
  int http_status = 0;      // 0 when no response arrived
  std::string detail;
};

// One persistent HTTP/1.1 connection to the endpoint.
class HttpChannel {
 public:
  explicit HttpChannel(const ExecutorConfig& config);
  HttpChannel(HttpChannel&&) noexcept;
  HttpChannel& operator=(HttpChannel&&) noexcept;
  ~HttpChannel();

  SendResult send(const Sample& sample);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Sends one sample on a fresh connection. 200 with a valid echo is success;
// 429, 5xx and transport errors (timeouts, resets, signer failures) are
// retryable; any other status or an unparseable 200 body is fatal.
SendResult send_one(const Sample& sample, const ExecutorConfig& config);

// ---------------------------------------------------------------------------

enum class DispatchKind { kEnqueued, kSent, kRetryScheduled, kCompleted, kFailed };

std::string_view to_string(DispatchKind kind);
DispatchKind dispatch_kind_from_string(std::string_view text);

struct DispatchEvent {
  double t_ms = 0.0;  // monotonic, relative to the start of the run
  RunId run_id = 0;
  DispatchKind kind = DispatchKind::kEnqueued;
  int attempt = 0;
  std::string detail;

  friend bool operator==(const DispatchEvent&, const DispatchEvent&) = default;
};

std::string event_line(const DispatchEvent& event);
DispatchEvent parse_event_line(std::string_view line);
std::vector<DispatchEvent> read_events(const std::filesystem::path& path);

// Thread-safe event sink. Timestamps are taken under the lock, so the stored
// order is also time order.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path = {});
  ~EventLog();

  void record(RunId run_id, DispatchKind kind, int attempt = 0, std::string detail = {});
  std::vector<DispatchEvent> events() const;

 private:
  using Clock = std::chrono::steady_clock;
  mutable std::mutex mu_;
  Clock::time_point origin_;
  std::vector<DispatchEvent> events_;
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file_;
};

struct RunSummary {
  std::size_t total = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;  // samples already COMPLETED/FAILED in the campaign
  std::size_t retries_total = 0;
  std::vector<RunId> retried_run_ids;  // ascending
  std::vector<RunId> failed_run_ids;   // ascending
  double wall_time_ms = 0.0;
  double sum_sim_time_ms = 0.0;
  double speedup = 0.0;  // sum_sim_time_ms / wall_time_ms

  nlohmann::json to_json() const;
};

// Dispatches every QUEUED sample with at most config.max_load requests in
// flight, retrying failures with backoff and persisting each success before
// its COMPLETED event. Blocks until every sample is COMPLETED or FAILED.
// Samples whose runs are no longer QUEUED are skipped. A campaign write
// failure stops dispatch and is rethrown after in-flight requests return.
RunSummary run(std::span<const Sample> samples, const ExecutorConfig& config, Campaign& campaign,
               EventLog* log = nullptr);

}  // namespace sensfarm
