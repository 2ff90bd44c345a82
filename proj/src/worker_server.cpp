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

#include <algorithm>
#include <atomic>
#include <fstream>
#include <regex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "sensfarm/error.hpp"
#include "sensfarm/worker.hpp"

namespace sensfarm {

using json = nlohmann::json;

namespace {

constexpr WorkerEventKind kAllKinds[] = {
    WorkerEventKind::kReceived, WorkerEventKind::kInstanceColdStarted, WorkerEventKind::kStarted,
    WorkerEventKind::kFinished, WorkerEventKind::kThrottled,           WorkerEventKind::kInjectedFailure,
};

}  // namespace

std::string_view to_string(WorkerEventKind kind) {
  switch (kind) {
    case WorkerEventKind::kReceived: return "RECEIVED";
    case WorkerEventKind::kInstanceColdStarted: return "INSTANCE_COLD_STARTED";
    case WorkerEventKind::kStarted: return "STARTED";
    case WorkerEventKind::kFinished: return "FINISHED";
    case WorkerEventKind::kThrottled: return "THROTTLED";
    case WorkerEventKind::kInjectedFailure: return "INJECTED_FAILURE";
  }
  return "?";
}

WorkerEventKind worker_event_kind_from_string(std::string_view text) {
  for (auto k : kAllKinds) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::kCorruptRecord, "unknown worker event kind '" + std::string(text) + "'");
}

std::string worker_event_line(const WorkerEvent& event) {
  nlohmann::ordered_json j;
  j["t"] = event.t_ms;
  j["run_id"] = event.run_id;
  j["kind"] = to_string(event.kind);
  j["instance_id"] = event.instance_id;
  j["request_id"] = event.request_id;
  return j.dump();
}

WorkerEvent parse_worker_event_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    WorkerEvent e;
    e.t_ms = j.at("t").get<double>();
    e.run_id = j.at("run_id").get<RunId>();
    e.kind = worker_event_kind_from_string(j.at("kind").get<std::string>());
    e.instance_id = j.at("instance_id").get<std::int64_t>();
    e.request_id = j.value("request_id", std::uint64_t{0});
    return e;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, std::string("worker event line: ") + e.what());
  }
}

std::vector<WorkerEvent> read_worker_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<WorkerEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_worker_event_line(line));
  }
  return out;
}

WorkerEventLog::WorkerEventLog(std::filesystem::path path)
    : origin_(Clock::now()), file_(nullptr, &std::fclose) {
  if (!path.empty()) {
    file_.reset(std::fopen(path.c_str(), "w"));
    if (!file_) throw Error(ErrorCode::kIo, "cannot open worker event log " + path.string());
  }
}

void WorkerEventLog::record(RunId run_id, WorkerEventKind kind, std::int64_t instance_id,
                            std::uint64_t request_id) {
  std::lock_guard lock(mu_);
  WorkerEvent e{std::chrono::duration<double, std::milli>(Clock::now() - origin_).count(), run_id,
                kind, instance_id, request_id};
  if (file_) {
    const std::string line = worker_event_line(e) + "\n";
    std::fwrite(line.data(), 1, line.size(), file_.get());
    std::fflush(file_.get());
  }
  events_.push_back(e);
}

std::vector<WorkerEvent> WorkerEventLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

// --- Instance pool ----------------------------------------------------------

void MockCloudConfig::validate() const {
  if (!(cold_start_ms >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "cold_start_ms must be >= 0");
  if (max_instances < 1) throw Error(ErrorCode::kInvalidArgument, "max_instances must be >= 1");
  if (instance_concurrency < 1) {
    throw Error(ErrorCode::kInvalidArgument, "instance_concurrency must be >= 1");
  }
  if (!(idle_reclaim_ms > 0.0)) throw Error(ErrorCode::kInvalidArgument, "idle_reclaim_ms must be > 0");
  if (!(failure_rate >= 0.0 && failure_rate < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "failure_rate must be in [0, 1)");
  }
  if (!(provision_fraction > 0.0 && provision_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "provision_fraction must be in (0, 1]");
  }
  if (throttle_status < 400 || throttle_status > 599) {
    throw Error(ErrorCode::kInvalidArgument, "throttle_status must be an HTTP error status");
  }
}

std::size_t MockCloudConfig::effective_max_instances() const {
  const auto n = static_cast<std::size_t>(std::floor(static_cast<double>(max_instances) * provision_fraction));
  return std::max<std::size_t>(1, n);
}

InstancePool::InstancePool(const MockCloudConfig& config) : config_(config), rng_(config.seed) {
  config_.validate();
}

void InstancePool::reclaim_idle(Clock::time_point now) {
  const auto idle_limit = std::chrono::duration<double, std::milli>(config_.idle_reclaim_ms);
  std::erase_if(instances_, [&](const Instance& inst) {
    return inst.in_use == 0 && now - inst.idle_since >= idle_limit;
  });
}

InstancePool::Admission InstancePool::admit(Clock::time_point now) {
  std::unique_lock lock(mu_);
  while (true) {
    reclaim_idle(now);
    Instance* best = nullptr;
    for (auto& inst : instances_) {
      if (inst.in_use >= config_.instance_concurrency) continue;
      // Prefer instances that are already warm.
      if (!best || (inst.ready_at <= now && best->ready_at > now)) best = &inst;
    }
    if (best) {
      ++best->in_use;
      return {true, best->id, false, best->ready_at};
    }
    if (instances_.size() < config_.effective_max_instances()) {
      const auto ready = now + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double, std::milli>(config_.cold_start_ms));
      instances_.push_back({next_id_++, 1, ready, ready});
      return {true, instances_.back().id, true, ready};
    }
    if (!config_.queue_when_full) return {};
    released_.wait(lock);
    now = Clock::now();
  }
}

void InstancePool::release(std::int64_t instance_id, Clock::time_point now) {
  std::lock_guard lock(mu_);
  auto it = std::find_if(instances_.begin(), instances_.end(),
                         [&](const Instance& inst) { return inst.id == instance_id; });
  if (it == instances_.end() || it->in_use == 0) {
    throw Error(ErrorCode::kInvalidArgument, "release of idle instance " + std::to_string(instance_id));
  }
  if (--it->in_use == 0) it->idle_since = now;
  released_.notify_one();
}

bool InstancePool::inject_failure() {
  std::lock_guard lock(mu_);
  if (config_.failure_rate <= 0.0) return false;
  return std::bernoulli_distribution(config_.failure_rate)(rng_);
}

std::size_t InstancePool::active_instances() const {
  std::lock_guard lock(mu_);
  return instances_.size();
}

std::size_t InstancePool::busy_slots() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& inst : instances_) n += inst.in_use;
  return n;
}

std::size_t InstancePool::instances_created() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(next_id_);
}

// --- Server -----------------------------------------------------------------

ServerOptions parse_bind_address(const std::string& bind) {
  static const std::regex re(R"(^([^:\s]+):(\d{1,5})$)");
  std::smatch m;
  if (!std::regex_match(bind, m, re)) {
    throw Error(ErrorCode::kInvalidArgument, "bind address must be host:port, got '" + bind + "'");
  }
  ServerOptions options;
  options.host = m[1].str();
  options.port = std::stoi(m[2].str());
  if (options.port > 65535) throw Error(ErrorCode::kInvalidArgument, "port out of range");
  return options;
}

struct WorkerServer::Impl {
  std::shared_ptr<const Model> model;
  std::optional<MockCloudConfig> mock;
  std::optional<InstancePool> pool;
  ServerOptions options;
  WorkerEventLog log;
  httplib::Server server;
  std::thread listener;
  int port = -1;
  std::atomic<std::uint64_t> next_request{0};
  mutable std::mutex stats_mu;
  ServerStats stats;
  std::once_flag stopped;

  Impl(std::shared_ptr<const Model> m, ServerOptions o)
      : model(std::move(m)), options(std::move(o)), log(options.event_log_path) {}

  void count(std::size_t ServerStats::*field) {
    std::lock_guard lock(stats_mu);
    ++(stats.*field);
  }

  void reply(httplib::Response& res, int status, std::string body) {
    res.status = status;
    res.set_content(std::move(body), std::string(kJsonContentType));
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    const std::uint64_t request_id = next_request++;
    count(&ServerStats::requests);
    RunId run_id = -1;
    try {
      run_id = parse_request(req.body).run_id;
    } catch (const Error& e) {
      log.record(-1, WorkerEventKind::kReceived, -1, request_id);
      count(&ServerStats::bad_request);
      reply(res, 400, json{{"error", e.what()}}.dump());
      return;
    }
    log.record(run_id, WorkerEventKind::kReceived, -1, request_id);

    std::int64_t instance = static_cast<std::int64_t>(request_id);
    if (pool) {
      const auto admission = pool->admit();
      if (!admission.admitted) {
        log.record(run_id, WorkerEventKind::kThrottled, -1, request_id);
        count(&ServerStats::throttled);
        reply(res, mock->throttle_status, json{{"error", "too many requests"}}.dump());
        return;
      }
      instance = admission.instance_id;
      if (admission.cold) {
        log.record(run_id, WorkerEventKind::kInstanceColdStarted, instance, request_id);
        count(&ServerStats::instances_created);
      }
      std::this_thread::sleep_until(admission.ready_at);
      if (pool->inject_failure()) {
        log.record(run_id, WorkerEventKind::kInjectedFailure, instance, request_id);
        pool->release(instance);
        count(&ServerStats::injected_failures);
        reply(res, 500, json{{"error", "injected failure"}}.dump());
        return;
      }
    }

    log.record(run_id, WorkerEventKind::kStarted, instance, request_id);
    HandlerResult result = handle_request(*model, req.body);
    log.record(run_id, WorkerEventKind::kFinished, instance, request_id);
    if (pool) pool->release(instance);
    if (result.status == 200) {
      count(&ServerStats::ok);
    } else if (result.status == 400) {
      count(&ServerStats::bad_request);
    } else {
      count(&ServerStats::model_failures);
    }
    reply(res, result.status, std::move(result.body));
  }

  void start() {
    const std::size_t threads = std::max<std::size_t>(options.threads, 2);
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server.set_keep_alive_max_count(std::numeric_limits<int>::max());
    server.set_keep_alive_timeout(5);
    server.set_tcp_nodelay(true);
    server.set_payload_max_length(64 << 20);
    server.Post(".*", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    if (options.port == 0) {
      port = server.bind_to_any_port(options.host);
    } else {
      port = server.bind_to_port(options.host, options.port) ? options.port : -1;
    }
    if (port < 0) {
      throw Error(ErrorCode::kBindFailure,
                  "cannot bind " + options.host + ":" + std::to_string(options.port));
    }
    listener = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  void stop() {
    std::call_once(stopped, [this] {
      server.stop();
      if (listener.joinable()) listener.join();
    });
  }
};

WorkerServer::WorkerServer(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

WorkerServer::~WorkerServer() {
  if (impl_) impl_->stop();
}

int WorkerServer::port() const { return impl_->port; }

std::string WorkerServer::url() const {
  return "http://" + impl_->options.host + ":" + std::to_string(impl_->port) + "/";
}

std::vector<WorkerEvent> WorkerServer::events() const { return impl_->log.events(); }

ServerStats WorkerServer::stats() const {
  std::lock_guard lock(impl_->stats_mu);
  return impl_->stats;
}

void WorkerServer::stop() { impl_->stop(); }

std::unique_ptr<WorkerServer> serve(std::shared_ptr<const Model> model, ServerOptions options) {
  if (!model) throw Error(ErrorCode::kInvalidArgument, "no model");
  auto impl = std::make_unique<WorkerServer::Impl>(std::move(model), std::move(options));
  impl->start();
  return std::unique_ptr<WorkerServer>(new WorkerServer(std::move(impl)));
}

std::unique_ptr<WorkerServer> mock_cloud_serve(std::shared_ptr<const Model> model,
                                               MockCloudConfig mock, ServerOptions options) {
  if (!model) throw Error(ErrorCode::kInvalidArgument, "no model");
  mock.validate();
  auto impl = std::make_unique<WorkerServer::Impl>(std::move(model), std::move(options));
  impl->mock = mock;
  impl->pool.emplace(mock);
  impl->start();
  return std::unique_ptr<WorkerServer>(new WorkerServer(std::move(impl)));
}

}  // namespace sensfarm
