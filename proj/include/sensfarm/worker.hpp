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
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sensfarm/campaign.hpp"
#include "sensfarm/protocol.hpp"

namespace sensfarm {

// y = sin x1 + a sin^2 x2 + b x3^4 sin x1
double builtin_ishigami(double x1, double x2, double x3, double a = 7.0, double b = 0.1);
// y = sum_i a_i x_i
double builtin_linear(std::span<const double> coefficients, std::span<const double> x);

enum class BuiltInKind { kIshigami, kLinear, kSleep };

struct BuiltInModelConfig {
  BuiltInKind kind = BuiltInKind::kIshigami;
  double a = 7.0;  // Ishigami
  double b = 0.1;  // Ishigami
  std::vector<double> coefficients;  // Linear
  // Inputs read by the model, in formula order. Empty means x1, x2, ...
  // (three for Ishigami, one per coefficient for Linear, none for Sleep).
  std::vector<std::string> input_names;
  std::string output_name = "y";
  // Busy time added to every evaluation; the whole cost of the Sleep model.
  double sleep_ms = 0.0;
};

// Runs an external program per sample: the request JSON is written to its
// stdin and a JSON object is read from its stdout, either {"outputs": {...}}
// or a flat name -> number object. "{run_id}" in the command is substituted.
struct SubprocessModelConfig {
  std::string command;  // run through /bin/sh -c
  double timeout_ms = 30000.0;
};

using ModelAdapter = std::variant<BuiltInModelConfig, SubprocessModelConfig>;

class Model {
 public:
  virtual ~Model() = default;
  // Throws Error(kInputKeyMismatch) for missing inputs, other Errors for
  // model failures.
  virtual ValueMap evaluate(const Sample& sample) const = 0;
};

std::shared_ptr<const Model> make_model(const ModelAdapter& adapter);

ValueMap run_subprocess_model(const SubprocessModelConfig& config, const Sample& sample);

struct HandlerResult {
  int status = 200;
  std::string body;
  double sim_time_ms = 0.0;
};

// Request handler core: parse one sample, evaluate it, answer with the
// outputs and the model-only execution time. 400 for malformed payloads or
// inputs the model cannot use, 500 for model failures.
HandlerResult handle_request(const Model& model, std::string_view payload);

// ---------------------------------------------------------------------------

enum class WorkerEventKind {
  kReceived,
  kInstanceColdStarted,
  kStarted,
  kFinished,
  kThrottled,
  kInjectedFailure,
};

std::string_view to_string(WorkerEventKind kind);
WorkerEventKind worker_event_kind_from_string(std::string_view text);

struct WorkerEvent {
  double t_ms = 0.0;
  RunId run_id = -1;  // -1 when the payload could not be parsed
  WorkerEventKind kind = WorkerEventKind::kReceived;
  std::int64_t instance_id = -1;
  std::uint64_t request_id = 0;  // per-server request sequence number

  friend bool operator==(const WorkerEvent&, const WorkerEvent&) = default;
};

std::string worker_event_line(const WorkerEvent& event);
WorkerEvent parse_worker_event_line(std::string_view line);
std::vector<WorkerEvent> read_worker_events(const std::filesystem::path& path);

class WorkerEventLog {
 public:
  explicit WorkerEventLog(std::filesystem::path path = {});

  void record(RunId run_id, WorkerEventKind kind, std::int64_t instance_id,
              std::uint64_t request_id);
  std::vector<WorkerEvent> events() const;

 private:
  using Clock = std::chrono::steady_clock;
  mutable std::mutex mu_;
  Clock::time_point origin_;
  std::vector<WorkerEvent> events_;
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file_;
};

// ---------------------------------------------------------------------------

struct MockCloudConfig {
  double cold_start_ms = 0.0;
  std::size_t max_instances = 1000;
  std::size_t instance_concurrency = 1;
  double idle_reclaim_ms = 600000.0;
  double failure_rate = 0.0;  // in [0, 1)
  int throttle_status = 429;
  // Share of max_instances the platform actually provisions.
  double provision_fraction = 1.0;
  // Wait for capacity instead of throttling.
  bool queue_when_full = false;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t effective_max_instances() const;
};

// Serialized admission state of the simulated instance pool.
class InstancePool {
 public:
  using Clock = std::chrono::steady_clock;

  struct Admission {
    bool admitted = false;
    std::int64_t instance_id = -1;
    bool cold = false;  // a new instance was created for this request
    Clock::time_point ready_at;  // end of the instance's cold start
  };

  explicit InstancePool(const MockCloudConfig& config);

  // Warm idle capacity first, then a new instance if the quota allows,
  // otherwise a rejection (or a wait when queue_when_full is set).
  Admission admit(Clock::time_point now = Clock::now());
  void release(std::int64_t instance_id, Clock::time_point now = Clock::now());
  // Draws the failure-injection coin for one admitted request.
  bool inject_failure();

  std::size_t active_instances() const;
  std::size_t busy_slots() const;
  std::size_t instances_created() const;

 private:
  struct Instance {
    std::int64_t id;
    std::size_t in_use = 0;
    Clock::time_point ready_at;
    Clock::time_point idle_since;
  };
  void reclaim_idle(Clock::time_point now);

  MockCloudConfig config_;
  mutable std::mutex mu_;
  std::condition_variable released_;
  std::vector<Instance> instances_;
  std::int64_t next_id_ = 0;
  std::mt19937_64 rng_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::size_t threads = 512;
  std::filesystem::path event_log_path;
};

// Parses "host:port" (port may be 0).
ServerOptions parse_bind_address(const std::string& bind);

struct ServerStats {
  std::size_t requests = 0;
  std::size_t ok = 0;
  std::size_t bad_request = 0;
  std::size_t throttled = 0;
  std::size_t injected_failures = 0;
  std::size_t model_failures = 0;
  std::size_t instances_created = 0;
};

// A running HTTP worker. Accepts POST on any path. Destruction stops it.
class WorkerServer {
 public:
  ~WorkerServer();
  WorkerServer(const WorkerServer&) = delete;
  WorkerServer& operator=(const WorkerServer&) = delete;

  int port() const;
  // http://host:port/
  std::string url() const;
  std::vector<WorkerEvent> events() const;
  ServerStats stats() const;
  // Stops accepting connections and waits for in-flight requests.
  void stop();

 private:
  struct Impl;
  explicit WorkerServer(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;

  friend std::unique_ptr<WorkerServer> serve(std::shared_ptr<const Model>, ServerOptions);
  friend std::unique_ptr<WorkerServer> mock_cloud_serve(std::shared_ptr<const Model>,
                                                        MockCloudConfig, ServerOptions);
};

// Plain worker: every request runs the model immediately.
std::unique_ptr<WorkerServer> serve(std::shared_ptr<const Model> model, ServerOptions options);

// Serverless emulator in front of the model: instance quota, cold starts,
// throttling and injected failures.
std::unique_ptr<WorkerServer> mock_cloud_serve(std::shared_ptr<const Model> model,
                                               MockCloudConfig mock, ServerOptions options);

}  // namespace sensfarm
