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


// End-to-end acceptance checks at desk scale. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "sensfarm/analysis.hpp"
#include "sensfarm/campaign.hpp"
#include "sensfarm/cli.hpp"
#include "sensfarm/error.hpp"
#include "sensfarm/executor.hpp"
#include "sensfarm/metrics.hpp"
#include "sensfarm/protocol.hpp"
#include "sensfarm/sampling.hpp"
#include "sensfarm/worker.hpp"
#include "support.hpp"

using namespace sensfarm;
using nlohmann::json;
using sensfarm::testing::TempDir;
using sensfarm::testing::read_file;
using sensfarm::testing::write_file;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::shared_ptr<const Model> sleep_model(double ms) {
  BuiltInModelConfig m;
  m.kind = BuiltInKind::kSleep;
  m.sleep_ms = ms;
  return make_model(m);
}

std::vector<Sample> unit_samples(std::size_t n, std::uint64_t seed = 1) {
  const std::vector<ParameterSpec> specs{{"x1", Uniform{0.0, 1.0}, 0.5}};
  return monte_carlo(specs, {"x1"}, n, seed);
}

Campaign new_campaign(const fs::path& dir, const std::vector<ParameterSpec>& specs,
                      const std::vector<Sample>& samples, const json& design = nullptr) {
  Campaign c = Campaign::create(dir.filename().string(), specs, dir);
  if (!design.is_null()) c.set_design(design);
  c.add_samples(samples);
  return c;
}

struct Dispatch {
  RunSummary summary;
  std::vector<DispatchEvent> events;
};

Dispatch dispatch(Campaign& campaign, ExecutorConfig config, std::span<const Sample> samples) {
  EventLog log;
  Dispatch d;
  d.summary = run(samples, config, campaign, &log);
  d.events = log.events();
  return d;
}

Dispatch dispatch(Campaign& campaign, ExecutorConfig config) {
  const auto pending = campaign.pending_samples();
  return dispatch(campaign, std::move(config), pending);
}

ExecutorConfig executor(const std::string& url, std::size_t max_load, int max_retries) {
  ExecutorConfig e;
  e.endpoint_url = url;
  e.max_load = max_load;
  e.max_retries = max_retries;
  e.backoff = {10.0, 2.0, 200.0, 0.5};
  e.seed = 7;
  return e;
}

// Exact in-flight maximum from the event sequence.
std::size_t in_flight_peak(const std::vector<DispatchEvent>& events) {
  std::map<RunId, bool> flying;
  std::size_t now = 0, peak = 0;
  for (const auto& e : events) {
    const bool was = flying[e.run_id], is = e.kind == DispatchKind::kSent;
    now = now + (is ? 1 : 0) - (was ? 1 : 0);
    flying[e.run_id] = is;
    peak = std::max(peak, now);
  }
  return peak;
}

// Runs the CLI binary; returns the child pid.
pid_t spawn_cli(const std::vector<std::string>& args, const fs::path& log) {
  const pid_t pid = ::fork();
  if (pid == 0) {
    std::FILE* f = std::freopen(log.c_str(), "w", stdout);
    if (f) ::dup2(::fileno(stdout), STDERR_FILENO);
    std::vector<char*> argv;
    static std::string bin = SENSFARM_CLI;
    argv.push_back(bin.data());
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    ::execv(bin.c_str(), argv.data());
    ::_exit(127);
  }
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

int run_cli_process(const std::vector<std::string>& args, const fs::path& log) {
  return wait_exit(spawn_cli(args, log));
}

json cli_config(std::size_t count, double sleep_ms) {
  return {{"name", "acceptance"},
          {"parameters", {{{"name", "x1"}, {"distribution", "uniform"}, {"lo", 0.0}, {"hi", 1.0}}}},
          {"sampler", {{"kind", "monte_carlo"}, {"count", count}, {"seed", 3}}},
          {"executor", {{"backoff", {{"initial_ms", 10.0}, {"max_ms", 200.0}}}}},
          {"worker", {{"model", "sleep"}, {"sleep_ms", sleep_ms}}}};
}

std::size_t count_completed_lines(const fs::path& runs) {
  std::ifstream in(runs);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.find("\"state\":\"COMPLETED\"") != std::string::npos) ++n;
  }
  return n;
}

class Square final : public Model {
 public:
  ValueMap evaluate(const Sample& s) const override {
    const double x = s.inputs.at("x");
    return {{"y", x * x}};
  }
};

// ---------------------------------------------------------------------------

Verdict sobol_ishigami() {
  Verdict v;
  TempDir tmp;
  const auto t0 = Clock::now();
  const double pi = std::numbers::pi;
  const std::vector<ParameterSpec> specs{
      {"x1", Uniform{-pi, pi}, 0.0}, {"x2", Uniform{-pi, pi}, 0.0}, {"x3", Uniform{-pi, pi}, 0.0}};
  const auto design = saltelli_design(specs, {"x1", "x2", "x3"}, 8192);
  v.require(design.samples.size() == 40960, "40960 runs");
  Campaign campaign = new_campaign(tmp / "c", specs, design.samples, design.design.to_json());
  auto server = serve(make_model(BuiltInModelConfig{}), {});
  const auto d = dispatch(campaign, executor(server->url(), 64, 3));
  const auto result = sobol_indices(design.design, campaign.load_results(), 0);
  const double elapsed = ms_since(t0) / 1000.0;

  const double a = 7.0, b = 0.1, pi4 = std::pow(pi, 4);
  const double v1 = 0.5 * std::pow(1.0 + b * pi4 / 5.0, 2), v2 = a * a / 8.0;
  const double v13 = b * b * pi4 * pi4 * (1.0 / 18.0 - 1.0 / 50.0), var = v1 + v2 + v13;
  const double s[3] = {v1 / var, v2 / var, 0.0}, st[3] = {(v1 + v13) / var, v2 / var, v13 / var};
  double max_ds = 0.0, max_dst = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto& idx = result.outputs.at(0).indices.at(i);
    max_ds = std::max(max_ds, std::abs(idx.first - s[i]));
    max_dst = std::max(max_dst, std::abs(idx.total - st[i]));
  }
  v.require(d.summary.completed == 40960, "all runs completed");
  v.require(max_ds <= 0.02, "|dS| <= 0.02");
  v.require(max_dst <= 0.03, "|dST| <= 0.03");
  v.require(elapsed < 120.0, "under 120 s");
  v.detail << "max|dS|=" << max_ds << " max|dST|=" << max_dst << " time=" << elapsed << "s";
  return v;
}

Verdict sample_counts() {
  Verdict v;
  TempDir tmp;
  std::vector<ParameterSpec> specs;
  for (const char* n : {"a", "b", "c"}) specs.push_back({n, Uniform{0.0, 1.0}, 0.5});
  const auto sc = stochastic_collocation(specs, {"a", "b", "c"}, 9);
  const auto sal = saltelli_design(specs, {"a", "b", "c"}, 8);
  v.require(sc.nodes.size() == 1000, "collocation 1000");
  v.require(sal.samples.size() == 40, "saltelli 40");

  json config = cli_config(1, 0.0);
  config["parameters"] = json::array();
  for (const char* n : {"a", "b", "c"}) {
    config["parameters"].push_back({{"name", n}, {"distribution", "uniform"}, {"lo", 0.0}, {"hi", 1.0}});
  }
  config["sampler"] = {{"kind", "collocation"}, {"order", 9}};
  write_file(tmp / "sc.json", config.dump());
  const int rc = run_cli_process({"sample", "--config", (tmp / "sc.json").string(), "--campaign",
                                  (tmp / "sc").string()}, tmp / "sc.log");
  const std::string log = read_file(tmp / "sc.log");
  v.require(rc == 0 && log.rfind("1000 samples written", 0) == 0, "CLI prints 1000 samples");
  v.detail << "collocation=" << sc.nodes.size() << " saltelli=" << sal.samples.size() << " cli: "
           << log.substr(0, log.find('\n'));
  return v;
}

Verdict semaphore_bound() {
  Verdict v;
  struct Case {
    std::size_t max_load, runs;
    double sleep_ms;
  };
  for (const Case c : {Case{1, 100, 5.0}, Case{16, 400, 10.0}, Case{256, 2048, 20.0}}) {
    TempDir tmp;
    auto server = serve(sleep_model(c.sleep_ms), {});
    const auto samples = unit_samples(c.runs);
    Campaign campaign = new_campaign(tmp / "c", {{"x1", Uniform{0.0, 1.0}, 0.5}}, samples);
    const auto d = dispatch(campaign, executor(server->url(), c.max_load, 3));
    const auto tl = build_timeline(d.events, 1.0);
    const std::size_t peak = in_flight_peak(d.events);
    v.require(!check_event_grammar(d.events).has_value(), "event grammar");
    v.require(d.summary.completed == c.runs, "all completed");
    v.require(peak <= c.max_load && tl.peak_submitted <= c.max_load, "in-flight <= max_load");
    v.require(d.summary.speedup <= static_cast<double>(c.max_load), "speedup <= max_load");
    if (c.max_load == 1) {
      std::vector<RunId> sent;
      for (const auto& e : d.events) {
        if (e.kind == DispatchKind::kSent) sent.push_back(e.run_id);
      }
      v.require(std::is_sorted(sent.begin(), sent.end()) &&
                    std::adjacent_find(sent.begin(), sent.end()) == sent.end(),
                "sequential SENT order");
    }
    v.detail << "max_load=" << c.max_load << " peak=" << peak << " ";
  }
  return v;
}

Verdict fault_tolerance() {
  Verdict v;
  TempDir tmp;
  MockCloudConfig mock;
  mock.failure_rate = 0.05;
  mock.seed = 11;
  ServerOptions opts;
  opts.event_log_path = tmp / "worker_events.ndjson";
  auto server = mock_cloud_serve(sleep_model(20.0), mock, opts);

  const auto samples = unit_samples(1000);
  Campaign campaign = new_campaign(tmp / "retry", {{"x1", Uniform{0.0, 1.0}, 0.5}}, samples);
  const auto d = dispatch(campaign, executor(server->url(), 64, 5));
  std::set<RunId> retry_logged;
  for (const auto& e : d.events) {
    if (e.kind == DispatchKind::kRetryScheduled) retry_logged.insert(e.run_id);
  }
  const std::set<RunId> retried(d.summary.retried_run_ids.begin(), d.summary.retried_run_ids.end());
  v.require(d.summary.failed == 0 && d.summary.completed == 1000, "failed=0 with retries");
  v.require(!retried.empty(), "retried_run_ids non-empty");
  v.require(retried == retry_logged, "retries logged");
  v.detail << "max_retries=5: failed=" << d.summary.failed << " retried_runs=" << retried.size()
           << " retries=" << d.summary.retries_total << "; ";

  // Same platform, no retries, through the CLI binary.
  write_file(tmp / "config.json", cli_config(1000, 20.0).dump());
  const auto dir = (tmp / "noretry").string();
  run_cli_process({"sample", "--config", (tmp / "config.json").string(), "--campaign", dir}, tmp / "s.log");
  const int rc = run_cli_process({"run", "--campaign", dir, "--endpoint", server->url(), "--max-retries", "0",
                                  "--max-load", "64"},
                                 tmp / "r.log");
  const json summary = json::parse(read_file(fs::path(dir) / "run_summary.json"));
  const double failed = summary["failed"].get<double>();
  bool single_attempt = true;
  for (const auto& r : Campaign::open(dir).records()) {
    if (r.state == RunState::kFailed && r.attempts != 1) single_attempt = false;
  }
  v.require(rc == kExitRunFailures, "exit code 1");
  // Binomial(1000, 0.05): mean 50, sd 6.9.
  v.require(failed >= 25 && failed <= 80, "about 5% failed");
  v.require(summary["retries_total"] == 0 && single_attempt, "no retries");
  v.detail << "max_retries=0: failed=" << failed << "/1000 exit=" << rc;
  return v;
}

Verdict throttling() {
  Verdict v;
  TempDir tmp;
  MockCloudConfig mock;
  mock.max_instances = 32;
  auto server = mock_cloud_serve(sleep_model(50.0), mock, {});
  const auto samples = unit_samples(512);
  Campaign campaign = new_campaign(tmp / "c", {{"x1", Uniform{0.0, 1.0}, 0.5}}, samples);
  auto config = executor(server->url(), 256, 100);
  config.backoff = {20.0, 1.5, 500.0, 0.5};
  const auto d = dispatch(campaign, config);
  const auto stats = server->stats();
  std::size_t retry_429 = 0;
  for (const auto& e : d.events) {
    if (e.kind == DispatchKind::kRetryScheduled && e.detail.find("429") != std::string::npos) ++retry_429;
  }
  const auto provider_peak = peak_concurrent_executions(server->events());
  v.require(stats.throttled > 0 && retry_429 > 0, "429 observed");
  v.require(d.summary.completed == 512 && campaign.status().completed == 512, "all completed");
  v.require(provider_peak <= 32, "provider concurrency <= 32");
  v.require(d.summary.speedup <= 32.0, "speedup <= max_instances");
  v.detail << "throttled=" << stats.throttled << " completed=" << d.summary.completed
           << " provider_peak=" << provider_peak << " speedup=" << d.summary.speedup;
  return v;
}

Verdict speedup_analog() {
  Verdict v;
  TempDir tmp;
  MockCloudConfig mock;
  mock.max_instances = 256;
  mock.cold_start_ms = 0.0;
  auto server = mock_cloud_serve(sleep_model(200.0), mock, {});
  const auto samples = unit_samples(512);
  Campaign campaign = new_campaign(tmp / "c", {{"x1", Uniform{0.0, 1.0}, 0.5}}, samples);
  const auto d = dispatch(campaign, executor(server->url(), 256, 5));
  const auto overhead = overhead_stats(campaign.records());
  const double wall = d.summary.wall_time_ms;
  v.require(d.summary.completed == 512, "all completed");
  v.require(d.summary.speedup >= 100.0, "speedup >= 100");
  v.require(wall <= 3000.0 + overhead.p50, "wall <= 3 s + overhead");
  v.require(d.summary.speedup <= 256.0, "speedup <= min(max_load, max_instances)");
  v.detail << "speedup=" << d.summary.speedup << " wall=" << wall << "ms overhead_p50=" << overhead.p50 << "ms";
  return v;
}

Verdict cold_start() {
  Verdict v;
  TempDir tmp;
  MockCloudConfig mock;
  mock.cold_start_ms = 2000.0;
  mock.max_instances = 64;
  auto server = mock_cloud_serve(sleep_model(50.0), mock, {});
  const auto samples = unit_samples(32);
  Campaign campaign = new_campaign(tmp / "c", {{"x1", Uniform{0.0, 1.0}, 0.5}}, samples);
  const std::span<const Sample> all(samples);
  dispatch(campaign, executor(server->url(), 16, 3), all.first(16));
  dispatch(campaign, executor(server->url(), 16, 3), all.subspan(16));
  const auto records = campaign.records();
  const auto first = overhead_stats(std::span(records).first(16));
  const auto second = overhead_stats(std::span(records).subspan(16));
  const double diff = first.p50 - second.p50;
  v.require(campaign.status().completed == 32, "all completed");
  v.require(diff >= 1800.0 && diff <= 2200.0, "p50 difference in [1800, 2200] ms");
  v.detail << "wave1 p50=" << first.p50 << "ms wave2 p50=" << second.p50 << "ms diff=" << diff
           << "ms instances=" << server->stats().instances_created;
  return v;
}

Verdict local_exactness() {
  Verdict v;
  TempDir tmp;
  BuiltInModelConfig linear;
  linear.kind = BuiltInKind::kLinear;
  linear.coefficients = {2.0, 3.0, 5.0};
  auto server = serve(make_model(linear), {});
  const std::vector<ParameterSpec> specs{
      {"x1", Uniform{-5.0, 5.0}, 0.0}, {"x2", Uniform{-5.0, 5.0}, 0.0}, {"x3", Uniform{-5.0, 5.0}, 0.0}};
  const auto pert = perturbation_design(specs, {{"x1", 1.5}, {"x2", -2.0}, {"x3", 0.75}}, {"x1", "x2", "x3"}, 1e-4);
  Campaign campaign = new_campaign(tmp / "local", specs, pert.samples, pert.design.to_json());
  dispatch(campaign, executor(server->url(), 8, 3));
  const auto local = local_sensitivity(pert.design, campaign.load_results());
  const double want[3] = {2.0, 3.0, 5.0};
  double max_err = 0.0;
  for (int i = 0; i < 3; ++i) {
    max_err = std::max(max_err, std::abs(local.outputs.at(0).indices.at(i).derivative - want[i]));
  }
  v.require(max_err <= 1e-9, "derivatives within 1e-9");
  v.detail << "max|dY/dX - a|=" << max_err << "; ";

  auto square = serve(std::make_shared<Square>(), {});
  const std::vector<ParameterSpec> normal{{"x", Normal{0.0, 1.0}, 0.0}};
  for (std::size_t order : {2, 3, 6}) {
    const auto quad = stochastic_collocation(normal, {"x"}, order);
    Campaign c = new_campaign(tmp / ("quad" + std::to_string(order)), normal, quad.nodes, quad.to_json());
    dispatch(c, executor(square->url(), 8, 3));
    const auto m = quadrature_moments(quad, c.load_results());
    const double dm = std::abs(m.outputs.at(0).mean - 1.0), dv = std::abs(m.outputs.at(0).variance - 2.0);
    v.require(dm <= 1e-9 && dv <= 1e-9, "moments within 1e-9 at order " + std::to_string(order));
    v.detail << "p=" << order << " mean=" << m.outputs.at(0).mean << " var=" << m.outputs.at(0).variance << " ";
  }
  return v;
}

Verdict crash_resume() {
  Verdict v;
  TempDir tmp;
  auto server = serve(sleep_model(20.0), {});
  const std::size_t n = 400;
  write_file(tmp / "config.json", cli_config(n, 20.0).dump());
  const auto dir = tmp / "c";
  run_cli_process({"sample", "--config", (tmp / "config.json").string(), "--campaign", dir.string()},
                  tmp / "s.log");

  const pid_t child = spawn_cli({"run", "--campaign", dir.string(), "--endpoint", server->url(),
                                 "--max-load", "8"},
                                tmp / "r1.log");
  const auto t0 = Clock::now();
  while (count_completed_lines(dir / "runs.ndjson") < n / 2 && ms_since(t0) < 60000.0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  ::kill(child, SIGKILL);
  const int killed = wait_exit(child);
  v.require(killed == 128 + SIGKILL, "dispatcher killed");

  const std::size_t done_before = Campaign::open(dir).status().completed;
  const std::size_t requests_before = server->stats().requests;
  v.require(done_before > 0 && done_before < n, "killed mid-campaign");

  const int rc = run_cli_process({"run", "--campaign", dir.string(), "--endpoint", server->url(),
                                  "--max-load", "8"},
                                 tmp / "r2.log");
  const json summary = json::parse(read_file(dir / "run_summary.json"));
  const std::size_t second_requests = server->stats().requests - requests_before;
  v.require(rc == 0, "resume exit 0");
  v.require(summary["total"] == n - done_before && second_requests == n - done_before,
            "only remaining runs dispatched");

  // Completed multiset equals the sample set; at most one COMPLETED line per run.
  const auto expected = generate_samples(load_config(tmp / "config.json")).samples;
  const auto results = Campaign::open(dir).load_results();
  bool same = results.size() == expected.size();
  for (std::size_t i = 0; same && i < results.size(); ++i) {
    same = results[i].run_id == expected[i].run_id && results[i].inputs == expected[i].inputs;
  }
  std::map<RunId, int> completed_lines;
  std::ifstream in(dir / "runs.ndjson");
  std::string line;
  while (std::getline(in, line)) {
    const auto r = parse_record_line(line);
    if (r.state == RunState::kCompleted) ++completed_lines[r.run_id];
  }
  const bool unique = std::all_of(completed_lines.begin(), completed_lines.end(),
                                  [](const auto& kv) { return kv.second == 1; });
  v.require(same, "completed set equals sample set");
  v.require(unique && completed_lines.size() == n, "no duplicate results");
  v.detail << "completed before kill=" << done_before << "/" << n << " resumed=" << summary["total"]
           << " worker requests on resume=" << second_requests;
  return v;
}

Verdict protocol_golden() {
  Verdict v;
  const std::string fixtures = SENSFARM_FIXTURES;
  auto fixture = [&](const std::string& name) { return read_file(fs::path(fixtures) / name); };
  const double s1 = std::sin(1.0);
  v.require(serialize_request({0, {{"x", 1.5}}}) == fixture("request_minimal.json"), "request_minimal");
  v.require(serialize_request({7, {{"x3", std::numbers::pi}, {"x1", 1.5}, {"x2", -0.25}}}) ==
                fixture("request_ishigami.json"),
            "request_ishigami");
  v.require(serialize_response({7, {{"y", s1 + 7.0 * s1 * s1 + 0.1 * s1}}, 12.5}) ==
                fixture("response_ishigami.json"),
            "response_ishigami");
  v.require(serialize_response({0, {{"peak", 2.5e-07}, {"energy", -3.0}, {"flux", 0.0001}}, 0.0}) ==
                fixture("response_multi_output.json"),
            "response_multi_output");

  auto server = serve(make_model(BuiltInModelConfig{}), {});
  httplib::Client client("127.0.0.1", server->port());
  std::size_t rejected = 0;
  const std::vector<std::string> malformed{"", "{", "[]", R"({"inputs":{"x1":1}})",
                                           R"({"run_id":"7","inputs":{}})", R"({"run_id":1,"inputs":{"x1":"a"}})",
                                           R"({"run_id":1,"inputs":{"x1":1,"x2":2}})"};
  for (const auto& body : malformed) {
    const auto res = client.Post("/", body, "application/json");
    if (res && res->status == 400) ++rejected;
  }
  v.require(rejected == malformed.size(), "malformed payloads get 400");

  // The executor treats the 400 as fatal: one attempt, no retry.
  TempDir tmp;
  const auto samples = unit_samples(20);
  Campaign campaign = new_campaign(tmp / "c", {{"x1", Uniform{0.0, 1.0}, 0.5}}, samples);
  const auto before = server->stats().requests;
  const auto d = dispatch(campaign, executor(server->url(), 4, 5));
  bool single = true;
  for (const auto& r : campaign.records()) single = single && r.state == RunState::kFailed && r.attempts == 1;
  v.require(d.summary.failed == 20 && d.summary.retries_total == 0 && single, "fatal without retry");
  v.require(server->stats().requests - before == 20, "one request per run");
  v.detail << "golden files match; malformed rejected=" << rejected << "/" << malformed.size()
           << "; executor failed=" << d.summary.failed << " retries=" << d.summary.retries_total;
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"Sobol indices of Ishigami, N=8192", sobol_ishigami},
      {"sample counts (collocation 1000, Saltelli 40)", sample_counts},
      {"in-flight bound for max_load 1/16/256", semaphore_bound},
      {"fault tolerance with injected failures", fault_tolerance},
      {"throttling with 32 instances", throttling},
      {"speedup analog, 512 x 200 ms", speedup_analog},
      {"cold-start visibility", cold_start},
      {"local SA and quadrature exactness", local_exactness},
      {"crash resume", crash_resume},
      {"protocol golden files and malformed payloads", protocol_golden},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    bool ok = false;
    std::string detail;
    try {
      Verdict v = criteria[i].second();
      ok = v.ok;
      detail = v.detail.str();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::printf("%s criterion %zu: %s (%.1f s) %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                ms_since(t0) / 1000.0, detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
