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

#include "sensfarm/executor.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <thread>

#include "httplib.h"
#include "sensfarm/error.hpp"

namespace sensfarm {

using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double, std::milli>(to - from).count();
}

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 200;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

double backoff_delay(int attempt, const BackoffPolicy& policy, double unit_draw) {
  if (attempt < 1) throw Error(ErrorCode::kInvalidArgument, "attempt must be >= 1");
  const double base = std::min(
      policy.initial_ms * std::pow(policy.multiplier, static_cast<double>(attempt - 1)),
      policy.max_ms);
  return std::max(0.0, base * (1.0 + policy.jitter * (2.0 * unit_draw - 1.0)));
}

void StaticTokenSigner::sign(HttpRequest& request) const {
  request.headers.emplace_back(header_, scheme_.empty() ? token_ : scheme_ + " " + token_);
}

HttpRequest sign_request(HttpRequest request, const RequestSigner& signer) {
  HttpRequest signed_request = request;
  try {
    signer.sign(signed_request);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kSignerFailure, e.what());
  }
  const bool prefix_kept =
      signed_request.headers.size() >= request.headers.size() &&
      std::equal(request.headers.begin(), request.headers.end(), signed_request.headers.begin());
  if (signed_request.body != request.body || signed_request.method != request.method ||
      signed_request.path != request.path || !prefix_kept) {
    throw Error(ErrorCode::kSignerFailure, "signer modified more than headers");
  }
  return signed_request;
}

void ExecutorConfig::validate() const {
  if (max_load < 1) throw Error(ErrorCode::kInvalidArgument, "max_load must be >= 1");
  if (request_timeout_ms < 1) throw Error(ErrorCode::kInvalidArgument, "timeout must be >= 1 ms");
  if (max_retries < 0) throw Error(ErrorCode::kInvalidArgument, "max_retries must be >= 0");
  if (backoff.initial_ms < 0 || backoff.multiplier < 1 || backoff.max_ms < 0 ||
      backoff.jitter < 0 || backoff.jitter > 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid backoff policy");
  }
  parse_endpoint(endpoint_url);
}

Endpoint parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(http://[^/\s:]+(?::\d{1,5})?)(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::kInvalidArgument, "endpoint must look like http://host[:port][/path]: " + url);
  }
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

// --- HttpChannel ---------------------------------------------------------------

struct HttpChannel::Impl {
  Endpoint endpoint;
  std::shared_ptr<const RequestSigner> signer;
  httplib::Client client;

  explicit Impl(const ExecutorConfig& config)
      : endpoint(parse_endpoint(config.endpoint_url)),
        signer(config.signer ? config.signer : std::make_shared<IdentitySigner>()),
        client(endpoint.scheme_host_port) {
    const auto timeout = std::chrono::milliseconds(config.request_timeout_ms);
    client.set_keep_alive(true);
    client.set_tcp_nodelay(true);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
  }
};

HttpChannel::HttpChannel(const ExecutorConfig& config) : impl_(std::make_unique<Impl>(config)) {}
HttpChannel::HttpChannel(HttpChannel&&) noexcept = default;
HttpChannel& HttpChannel::operator=(HttpChannel&&) noexcept = default;
HttpChannel::~HttpChannel() = default;

SendResult HttpChannel::send(const Sample& sample) {
  SendResult result;
  HttpRequest request{"POST", impl_->endpoint.path, {}, serialize_request(sample)};
  try {
    request = sign_request(std::move(request), *impl_->signer);
  } catch (const Error& e) {
    result.status = SendStatus::kRetryable;
    result.detail = e.what();
    return result;
  }
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  const auto t0 = Clock::now();
  auto res = impl_->client.Post(request.path, headers, request.body,
                                std::string(kJsonContentType));
  result.wall_time_ms = elapsed_ms(t0, Clock::now());

  if (!res) {
    result.status = SendStatus::kRetryable;
    result.detail = "transport: " + httplib::to_string(res.error());
    return result;
  }
  result.http_status = res->status;
  if (res->status == 200) {
    try {
      result.response = parse_response(res->body, sample.run_id);
    } catch (const Error& e) {
      result.status = SendStatus::kFatal;
      result.detail = std::string(e.what()) + " body: " + excerpt(res->body);
      return result;
    }
    if (result.response.sim_time_ms > result.wall_time_ms) {
      result.status = SendStatus::kFatal;
      result.detail = "reported sim_time_ms exceeds the observed round trip";
      return result;
    }
    result.status = SendStatus::kSuccess;
    result.detail = "HTTP 200";
    return result;
  }
  result.status = (res->status == 429 || res->status >= 500) ? SendStatus::kRetryable
                                                              : SendStatus::kFatal;
  result.detail = "HTTP " + std::to_string(res->status);
  if (!res->body.empty()) result.detail += ": " + excerpt(res->body);
  return result;
}

SendResult send_one(const Sample& sample, const ExecutorConfig& config) {
  config.validate();
  HttpChannel channel(config);
  return channel.send(sample);
}

// --- Events -------------------------------------------------------------------

std::string_view to_string(DispatchKind kind) {
  switch (kind) {
    case DispatchKind::kEnqueued: return "ENQUEUED";
    case DispatchKind::kSent: return "SENT";
    case DispatchKind::kRetryScheduled: return "RETRY_SCHEDULED";
    case DispatchKind::kCompleted: return "COMPLETED";
    case DispatchKind::kFailed: return "FAILED";
  }
  return "?";
}

DispatchKind dispatch_kind_from_string(std::string_view text) {
  for (auto k : {DispatchKind::kEnqueued, DispatchKind::kSent, DispatchKind::kRetryScheduled,
                 DispatchKind::kCompleted, DispatchKind::kFailed}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::kCorruptRecord, "unknown event kind '" + std::string(text) + "'");
}

std::string event_line(const DispatchEvent& event) {
  nlohmann::ordered_json j;
  j["t"] = event.t_ms;
  j["run_id"] = event.run_id;
  j["kind"] = to_string(event.kind);
  j["attempt"] = event.attempt;
  j["detail"] = event.detail.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(event.detail);
  return j.dump();
}

DispatchEvent parse_event_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    DispatchEvent e;
    e.t_ms = j.at("t").get<double>();
    e.run_id = j.at("run_id").get<RunId>();
    e.kind = dispatch_kind_from_string(j.at("kind").get<std::string>());
    e.attempt = j.value("attempt", 0);
    if (j.contains("detail") && !j.at("detail").is_null()) e.detail = j.at("detail").get<std::string>();
    return e;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, std::string("event line: ") + e.what());
  }
}

std::vector<DispatchEvent> read_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<DispatchEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_event_line(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kCorruptRecord,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

EventLog::EventLog(std::filesystem::path path) : origin_(Clock::now()), file_(nullptr, &std::fclose) {
  if (!path.empty()) {
    file_.reset(std::fopen(path.c_str(), "w"));
    if (!file_) throw Error(ErrorCode::kIo, "cannot open event log " + path.string());
  }
}

EventLog::~EventLog() = default;

void EventLog::record(RunId run_id, DispatchKind kind, int attempt, std::string detail) {
  std::lock_guard lock(mu_);
  DispatchEvent e{elapsed_ms(origin_, Clock::now()), run_id, kind, attempt, std::move(detail)};
  if (file_) {
    const std::string line = event_line(e) + "\n";
    std::fwrite(line.data(), 1, line.size(), file_.get());
    std::fflush(file_.get());
  }
  events_.push_back(std::move(e));
}

std::vector<DispatchEvent> EventLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

json RunSummary::to_json() const {
  return {{"total", total},
          {"completed", completed},
          {"failed", failed},
          {"skipped", skipped},
          {"retries_total", retries_total},
          {"retried_run_ids", retried_run_ids},
          {"failed_run_ids", failed_run_ids},
          {"wall_time_ms", wall_time_ms},
          {"sum_sim_time_ms", sum_sim_time_ms},
          {"speedup", speedup}};
}

// --- Dispatcher -----------------------------------------------------------------

namespace {

struct Pending {
  Sample sample;
  int attempts = 0;
  Clock::time_point ready_at;
};

class Dispatcher {
 public:
  Dispatcher(const ExecutorConfig& config, Campaign& campaign, EventLog& log)
      : config_(config), campaign_(campaign), log_(log), rng_(config.seed) {}

  RunSummary run(std::span<const Sample> samples) {
    std::set<RunId> seen;
    for (const auto& s : samples) {
      if (!seen.insert(s.run_id).second) throw Error(ErrorCode::kDuplicateRunId, std::to_string(s.run_id));
      const auto record = campaign_.record(s.run_id);
      if (!record) throw Error(ErrorCode::kUnknownRunId, std::to_string(s.run_id));
      if (record->state != RunState::kQueued) {
        ++summary_.skipped;
        continue;
      }
      queue_.push_back({s, 0, Clock::time_point::min()});
    }
    summary_.total = queue_.size();
    remaining_ = queue_.size();
    for (const auto& p : queue_) log_.record(p.sample.run_id, DispatchKind::kEnqueued);

    const auto start = Clock::now();
    const std::size_t n_threads = std::min(config_.max_load, queue_.size());
    {
      std::vector<std::jthread> senders;
      senders.reserve(n_threads);
      for (std::size_t i = 0; i < n_threads; ++i) senders.emplace_back([this] { sender_loop(); });
    }
    summary_.wall_time_ms = elapsed_ms(start, Clock::now());
    if (abort_error_) std::rethrow_exception(abort_error_);
    if (summary_.wall_time_ms > 0.0) summary_.speedup = summary_.sum_sim_time_ms / summary_.wall_time_ms;
    std::sort(summary_.retried_run_ids.begin(), summary_.retried_run_ids.end());
    std::sort(summary_.failed_run_ids.begin(), summary_.failed_run_ids.end());
    return summary_;
  }

 private:
  // Each sender owns one connection and at most one in-flight request, so the
  // number of senders is the semaphore capacity.
  void sender_loop() {
    std::optional<HttpChannel> channel;
    std::unique_lock lock(mu_);
    while (true) {
      if (aborted_ || remaining_ == 0) return;
      const auto now = Clock::now();
      auto it = std::find_if(queue_.begin(), queue_.end(),
                             [&](const Pending& p) { return p.ready_at <= now; });
      if (it == queue_.end()) {
        if (queue_.empty()) {
          cv_.wait(lock);
        } else {
          auto earliest = std::min_element(queue_.begin(), queue_.end(),
                                           [](const Pending& a, const Pending& b) {
                                             return a.ready_at < b.ready_at;
                                           })->ready_at;
          cv_.wait_until(lock, earliest);
        }
        continue;
      }
      Pending pending = std::move(*it);
      queue_.erase(it);
      ++pending.attempts;
      campaign_.mark_submitted(pending.sample.run_id);
      log_.record(pending.sample.run_id, DispatchKind::kSent, pending.attempts);
      lock.unlock();

      if (!channel) channel.emplace(config_);
      SendResult result = channel->send(pending.sample);
      if (result.http_status == 0) channel.reset();  // transport failure: reconnect

      lock.lock();
      if (aborted_) return;
      try {
        settle(std::move(pending), result);
      } catch (...) {
        aborted_ = true;
        abort_error_ = std::current_exception();
        cv_.notify_all();
        return;
      }
    }
  }

  // Called with mu_ held.
  void settle(Pending pending, const SendResult& result) {
    const RunId id = pending.sample.run_id;
    if (result.status == SendStatus::kSuccess) {
      if (!completed_.insert(id).second) return;  // late duplicate
      campaign_.record_result(id, result.response.outputs, result.response.sim_time_ms,
                              result.wall_time_ms, pending.attempts);
      log_.record(id, DispatchKind::kCompleted, pending.attempts);
      ++summary_.completed;
      summary_.sum_sim_time_ms += result.response.sim_time_ms;
      finish_one();
      return;
    }
    if (result.status == SendStatus::kRetryable && pending.attempts <= config_.max_retries) {
      campaign_.mark_requeued(id);
      log_.record(id, DispatchKind::kRetryScheduled, pending.attempts, result.detail);
      ++summary_.retries_total;
      if (retried_.insert(id).second) summary_.retried_run_ids.push_back(id);
      const double delay = backoff_delay(pending.attempts, config_.backoff,
                                         std::uniform_real_distribution<double>(0.0, 1.0)(rng_));
      pending.ready_at = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                            std::chrono::duration<double, std::milli>(delay));
      queue_.push_back(std::move(pending));
      cv_.notify_one();
      return;
    }
    std::string reason = result.detail;
    if (result.status == SendStatus::kRetryable) reason = "max retries exceeded; last: " + reason;
    campaign_.mark_failed(id, pending.attempts, reason);
    log_.record(id, DispatchKind::kFailed, pending.attempts, reason);
    ++summary_.failed;
    summary_.failed_run_ids.push_back(id);
    finish_one();
  }

  void finish_one() {
    if (--remaining_ == 0) cv_.notify_all();
  }

  const ExecutorConfig& config_;
  Campaign& campaign_;
  EventLog& log_;
  std::mt19937_64 rng_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Pending> queue_;
  std::size_t remaining_ = 0;
  std::set<RunId> completed_;
  std::set<RunId> retried_;
  bool aborted_ = false;
  std::exception_ptr abort_error_;
  RunSummary summary_;
};

}  // namespace

RunSummary run(std::span<const Sample> samples, const ExecutorConfig& config, Campaign& campaign,
               EventLog* log) {
  config.validate();
  std::optional<EventLog> own_log;
  if (!log) log = &own_log.emplace(config.event_log_path);
  Dispatcher dispatcher(config, campaign, *log);
  return dispatcher.run(samples);
}

}  // namespace sensfarm
