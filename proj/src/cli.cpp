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

#include "sensfarm/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "sensfarm/analysis.hpp"
#include "sensfarm/error.hpp"
#include "sensfarm/metrics.hpp"
#include "sensfarm/sampling.hpp"

namespace sensfarm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConfigCopy = "config.json";
constexpr const char* kEventsFile = "events.ndjson";
constexpr const char* kWorkerEventsFile = "worker_events.ndjson";
constexpr const char* kRunSummaryFile = "run_summary.json";

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::kConfig, message); }

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) config_error(where + ": unknown key \"" + key + "\"");
  }
}

double number_at(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number()) config_error(where + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number_at(obj, key, where) : fallback;
}

std::uint64_t count_or(const json& obj, const char* key, std::uint64_t fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) config_error(where + "." + key + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string string_or(const json& obj, const char* key, const std::string& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) config_error(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

bool bool_or(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) config_error(where + "." + key + ": expected true or false");
  return v.get<bool>();
}

std::vector<double> numbers_or(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return {};
  const auto& v = obj.at(key);
  if (!v.is_array()) config_error(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) config_error(where + "." + key + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::string> strings_or(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return {};
  const auto& v = obj.at(key);
  if (!v.is_array()) config_error(where + "." + key + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) config_error(where + "." + key + ": expected an array of strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

bool is_identifier(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

ParameterSpec parse_parameter(const json& j, std::size_t index, bool& varied) {
  const std::string where = "parameters[" + std::to_string(index) + "]";
  check_keys(j, {"name", "distribution", "lo", "hi", "mean", "stddev", "default", "varied"}, where);
  ParameterSpec spec;
  spec.name = string_or(j, "name", "", where);
  if (!is_identifier(spec.name)) config_error(where + ": invalid parameter name \"" + spec.name + "\"");
  const std::string dist = string_or(j, "distribution", "uniform", where);
  if (dist == "uniform") {
    if (j.contains("mean") || j.contains("stddev")) config_error(where + ": uniform takes lo and hi");
    if (!j.contains("lo") || !j.contains("hi")) config_error(where + ": uniform needs lo and hi");
    const Uniform u{number_at(j, "lo", where), number_at(j, "hi", where)};
    spec.distribution = u;
    spec.default_value = 0.5 * (u.lo + u.hi);
  } else if (dist == "normal") {
    if (j.contains("lo") || j.contains("hi")) config_error(where + ": normal takes mean and stddev");
    if (!j.contains("mean") || !j.contains("stddev")) config_error(where + ": normal needs mean and stddev");
    const Normal n{number_at(j, "mean", where), number_at(j, "stddev", where)};
    spec.distribution = n;
    spec.default_value = n.mean;
  } else {
    config_error(where + ": unknown distribution \"" + dist + "\"");
  }
  try {
    validate(spec.distribution);
  } catch (const Error& e) {
    config_error(where + ": " + e.what());
  }
  spec.default_value = number_or(j, "default", spec.default_value, where);
  varied = bool_or(j, "varied", true, where);
  return spec;
}

SamplerConfig parse_sampler(const json& j) {
  const std::string where = "sampler";
  if (!j.is_object()) config_error("sampler: expected an object");
  SamplerConfig s;
  s.kind = string_or(j, "kind", "", where);
  if (s.kind == "saltelli") {
    check_keys(j, {"kind", "base_count", "skip"}, where);
    s.base_count = count_or(j, "base_count", 0, where);
    s.skip = count_or(j, "skip", 1, where);
    if (s.base_count < 1) config_error("sampler.base_count must be >= 1");
  } else if (s.kind == "monte_carlo") {
    check_keys(j, {"kind", "count", "seed"}, where);
    s.count = count_or(j, "count", 0, where);
    s.seed = count_or(j, "seed", 0, where);
    if (s.count < 1) config_error("sampler.count must be >= 1");
  } else if (s.kind == "collocation") {
    check_keys(j, {"kind", "order"}, where);
    s.order = count_or(j, "order", 0, where);
    if (s.order < 1) config_error("sampler.order must be >= 1");
  } else if (s.kind == "perturbation") {
    check_keys(j, {"kind", "rel_step", "reference"}, where);
    s.rel_step = number_or(j, "rel_step", s.rel_step, where);
    if (!(s.rel_step > 0.0)) config_error("sampler.rel_step must be positive");
    if (j.contains("reference")) {
      const auto& ref = j.at("reference");
      if (!ref.is_object()) config_error("sampler.reference: expected an object");
      for (const auto& [k, v] : ref.items()) {
        if (!v.is_number()) config_error("sampler.reference." + k + ": expected a number");
        s.reference[k] = v.get<double>();
      }
    }
  } else {
    config_error("sampler.kind must be saltelli, monte_carlo, collocation or perturbation");
  }
  return s;
}

void parse_executor(const json& j, CampaignConfigFile& config) {
  const std::string where = "executor";
  check_keys(j, {"endpoint", "max_load", "timeout_ms", "max_retries", "backoff", "seed", "token"}, where);
  auto& e = config.executor;
  e.endpoint_url = string_or(j, "endpoint", e.endpoint_url, where);
  e.max_load = count_or(j, "max_load", e.max_load, where);
  e.request_timeout_ms = static_cast<int>(count_or(j, "timeout_ms", e.request_timeout_ms, where));
  e.max_retries = static_cast<int>(count_or(j, "max_retries", e.max_retries, where));
  e.seed = count_or(j, "seed", e.seed, where);
  config.token = string_or(j, "token", "", where);
  if (j.contains("backoff")) {
    const auto& b = j.at("backoff");
    check_keys(b, {"initial_ms", "multiplier", "max_ms", "jitter"}, "executor.backoff");
    e.backoff.initial_ms = number_or(b, "initial_ms", e.backoff.initial_ms, "executor.backoff");
    e.backoff.multiplier = number_or(b, "multiplier", e.backoff.multiplier, "executor.backoff");
    e.backoff.max_ms = number_or(b, "max_ms", e.backoff.max_ms, "executor.backoff");
    e.backoff.jitter = number_or(b, "jitter", e.backoff.jitter, "executor.backoff");
  }
}

bool names_contain(const std::vector<ParameterSpec>& specs, const std::string& name) {
  for (const auto& s : specs) {
    if (s.name == name) return true;
  }
  return false;
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDuplicateParameter:
    case ErrorCode::kUnwritableDirectory:
    case ErrorCode::kUnsupportedDimension:
    case ErrorCode::kUnsupportedDistribution:
    case ErrorCode::kBindFailure:
      return true;
    default:
      return false;
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

fs::path default_campaign_dir() {
  if (const char* env = std::getenv(kCampaignEnvVar); env && *env) return env;
  return "campaign";
}

// Flags shared by serve and mock-cloud for choosing the model.
struct ModelFlags {
  std::string config_path;
  std::string model;
  double a = 7.0;
  double b = 0.1;
  std::vector<double> coefficients;
  std::vector<std::string> inputs;
  std::string output;
  double sleep_ms = 0.0;
  std::string command;
  double model_timeout_ms = 30000.0;
  CLI::Option* a_opt = nullptr;
  CLI::Option* b_opt = nullptr;
  CLI::Option* coefficients_opt = nullptr;
  CLI::Option* inputs_opt = nullptr;
  CLI::Option* output_opt = nullptr;
  CLI::Option* sleep_opt = nullptr;
  CLI::Option* command_opt = nullptr;
  CLI::Option* timeout_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Campaign config file; its worker section is the starting point");
    app->add_option("--model", model, "Model: ishigami, linear, sleep or subprocess")
        ->check(CLI::IsMember({"ishigami", "linear", "sleep", "subprocess"}));
    a_opt = app->add_option("--a", a, "Ishigami a coefficient");
    b_opt = app->add_option("--b", b, "Ishigami b coefficient");
    coefficients_opt = app->add_option("--coefficients", coefficients, "Linear model coefficients")
                           ->delimiter(',');
    inputs_opt = app->add_option("--inputs", inputs, "Input names read by the model, in formula order")
                     ->delimiter(',');
    output_opt = app->add_option("--output", output, "Output name of the built-in model");
    sleep_opt = app->add_option("--sleep-ms", sleep_ms, "Extra busy time per evaluation in ms");
    command_opt = app->add_option("--command", command, "Shell command of the subprocess model");
    timeout_opt = app->add_option("--model-timeout-ms", model_timeout_ms, "Subprocess model timeout in ms");
  }

  ModelAdapter resolve(const CampaignConfigFile* config) const {
    ModelAdapter adapter = config ? config->model : ModelAdapter{BuiltInModelConfig{}};
    if (!model.empty()) {
      if (model == "subprocess") {
        adapter = SubprocessModelConfig{};
      } else {
        BuiltInModelConfig m;
        m.kind = model == "linear" ? BuiltInKind::kLinear
                 : model == "sleep" ? BuiltInKind::kSleep
                                    : BuiltInKind::kIshigami;
        adapter = m;
      }
    }
    if (auto* m = std::get_if<BuiltInModelConfig>(&adapter)) {
      if (a_opt->count()) m->a = a;
      if (b_opt->count()) m->b = b;
      if (coefficients_opt->count()) m->coefficients = coefficients;
      if (inputs_opt->count()) m->input_names = inputs;
      if (output_opt->count()) m->output_name = output;
      if (sleep_opt->count()) m->sleep_ms = sleep_ms;
    } else if (auto* s = std::get_if<SubprocessModelConfig>(&adapter)) {
      if (command_opt->count()) s->command = command;
      if (timeout_opt->count()) s->timeout_ms = model_timeout_ms;
    }
    return adapter;
  }
};

struct ServerFlags {
  std::string bind = "127.0.0.1:8080";
  std::size_t threads = 512;
  std::string event_log;

  void attach(CLI::App* app) {
    app->add_option("--bind", bind, "Listen address host:port (port 0 picks a free port)")
        ->capture_default_str();
    app->add_option("--threads", threads, "HTTP worker threads")->capture_default_str();
    app->add_option("--event-log", event_log, "Write provider-side events to this NDJSON file");
  }

  ServerOptions resolve() const {
    ServerOptions options = parse_bind_address(bind);
    options.threads = threads;
    options.event_log_path = event_log;
    return options;
  }
};

std::optional<CampaignConfigFile> optional_config(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_config(path);
}

// Blocks until SIGINT or SIGTERM. The mask must be installed before the
// server threads start so that they inherit it.
class SignalWait {
 public:
  SignalWait() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, &old_);
  }
  ~SignalWait() { pthread_sigmask(SIG_SETMASK, &old_, nullptr); }
  int wait() {
    int sig = 0;
    sigwait(&set_, &sig);
    return sig;
  }

 private:
  sigset_t set_;
  sigset_t old_;
};

void print_stats(std::ostream& out, const ServerStats& s) {
  out << "requests=" << s.requests << " ok=" << s.ok << " bad_request=" << s.bad_request
      << " throttled=" << s.throttled << " injected_failures=" << s.injected_failures
      << " model_failures=" << s.model_failures << " instances_created=" << s.instances_created << "\n";
}

// ---- sample ----

int cmd_sample(const fs::path& config_path, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const CampaignConfigFile config = load_config(config_path);
  const GeneratedSamples generated = generate_samples(config);
  for (const auto& w : generated.warnings) err << "warning: " << w << "\n";

  if (fs::exists(dir / kManifestFile)) {
    Campaign existing = Campaign::open(dir);
    const CampaignManifest m = existing.manifest();
    json have = json::array(), want = json::array();
    for (const auto& p : m.parameters) have.push_back(to_json(p));
    for (const auto& p : config.parameters) want.push_back(to_json(p));
    bool same = have == want && m.design == generated.design &&
                existing.status().total() == generated.samples.size();
    for (std::size_t i = 0; same && i < generated.samples.size(); ++i) {
      const auto r = existing.record(generated.samples[i].run_id);
      same = r && r->inputs == generated.samples[i].inputs;
    }
    if (!same) config_error(dir.string() + " already holds a campaign with a different configuration");
    out << generated.samples.size() << " samples already present in " << dir.string() << "\n";
    return kExitOk;
  }

  const std::string name = config.name.empty() ? fs::absolute(dir).filename().string() : config.name;
  Campaign campaign = Campaign::create(name, config.parameters, dir);
  campaign.set_design(generated.design);
  campaign.add_samples(generated.samples);
  write_file(dir / kConfigCopy, config.source.dump(2) + "\n");
  out << generated.samples.size() << " samples written to " << dir.string() << "\n";
  return kExitOk;
}

// ---- run ----

struct RunFlags {
  std::string endpoint;
  std::size_t max_load = 0;
  int timeout_ms = 0;
  int max_retries = 0;
  std::string token;
  std::uint64_t seed = 0;
  CLI::Option* max_load_opt = nullptr;
  CLI::Option* timeout_opt = nullptr;
  CLI::Option* retries_opt = nullptr;
  CLI::Option* token_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--endpoint", endpoint, "Worker URL, e.g. http://127.0.0.1:8080/");
    max_load_opt = app->add_option("--max-load", max_load, "Maximum in-flight requests (default 256)");
    timeout_opt = app->add_option("--timeout-ms", timeout_ms, "Per-request timeout in ms (default 30000)");
    retries_opt = app->add_option("--max-retries", max_retries, "Retries per run after the first attempt (default 3)");
    token_opt = app->add_option("--token", token, "Static bearer token added to every request");
    seed_opt = app->add_option("--seed", seed, "Seed of the backoff jitter stream");
  }

  void apply(CampaignConfigFile& config) const {
    if (!endpoint.empty()) config.executor.endpoint_url = endpoint;
    if (max_load_opt->count()) config.executor.max_load = max_load;
    if (timeout_opt->count()) config.executor.request_timeout_ms = timeout_ms;
    if (retries_opt->count()) config.executor.max_retries = max_retries;
    if (token_opt->count()) config.token = token;
    if (seed_opt->count()) config.executor.seed = seed;
  }
};

ExecutorConfig executor_config(const CampaignConfigFile& config) {
  ExecutorConfig e = config.executor;
  if (e.endpoint_url.empty()) config_error("no endpoint given (--endpoint or executor.endpoint)");
  if (!config.token.empty()) e.signer = std::make_shared<StaticTokenSigner>(config.token);
  e.validate();
  return e;
}

int execute_campaign(const fs::path& dir, const ExecutorConfig& executor, std::ostream& out) {
  Campaign campaign = Campaign::open(dir);
  ExecutorConfig e = executor;
  e.event_log_path = dir / kEventsFile;
  const auto pending = campaign.pending_samples();
  const RunSummary summary = run(pending, e, campaign);
  json doc = summary.to_json();
  write_file(dir / kRunSummaryFile, doc.dump(2) + "\n");
  out << doc.dump(2) << "\n";
  const StatusCounts status = campaign.status();
  if (status.failed > 0) {
    out << status.failed << " runs FAILED\n";
    return kExitRunFailures;
  }
  return kExitOk;
}

int cmd_run(const fs::path& dir, const RunFlags& flags, std::ostream& out) {
  CampaignConfigFile config;
  if (fs::exists(dir / kConfigCopy)) config = load_config(dir / kConfigCopy);
  flags.apply(config);
  const ExecutorConfig executor = executor_config(config);
  if (!fs::exists(dir / kManifestFile)) config_error("no campaign in " + dir.string());
  return execute_campaign(dir, executor, out);
}

// ---- analyze ----

int cmd_analyze(const fs::path& dir, const std::string& method, std::size_t bootstrap, std::uint64_t seed,
                std::ostream& out) {
  if (!fs::exists(dir / kManifestFile)) config_error("no campaign in " + dir.string());
  Campaign campaign = Campaign::open(dir);
  const json design = campaign.manifest().design;
  const std::string kind = design.is_object() ? design.value("kind", "") : "";
  const std::string expected = method == "sobol" ? "saltelli" : method == "local" ? "perturbation" : "collocation";
  if (kind != expected) {
    config_error("method " + method + " needs a " + expected + " design, campaign has " +
                 (kind.empty() ? std::string("none") : kind));
  }
  const auto results = campaign.load_results();
  const fs::path out_dir = dir / "analysis";
  fs::create_directories(out_dir);
  if (method == "sobol") {
    const auto r = sobol_indices(SaltelliDesign::from_json(design), results, bootstrap, seed);
    write_file(out_dir / "sobol.csv", sobol_csv(r));
    write_file(out_dir / "report.svg", sobol_svg(r));
    out << sobol_text(r);
  } else if (method == "local") {
    const auto r = local_sensitivity(PerturbationDesign::from_json(design), results);
    write_file(out_dir / "local.csv", local_csv(r));
    write_file(out_dir / "report.svg", local_svg(r));
    out << local_text(r);
  } else {
    const auto r = quadrature_moments(QuadratureDesign::from_json(design), results);
    write_file(out_dir / "moments.csv", moments_csv(r));
    write_file(out_dir / "report.svg", moments_svg(r));
    out << moments_text(r);
  }
  out << "wrote " << (out_dir / (method == "moments" ? "moments.csv" : method + ".csv")).string() << "\n";
  return kExitOk;
}

// ---- report ----

int cmd_report(const fs::path& dir, const std::string& worker_events, double tick_ms, double bin_ms,
               std::ostream& out) {
  if (!fs::exists(dir / kManifestFile)) config_error("no campaign in " + dir.string());
  Campaign campaign = Campaign::open(dir);
  ReportInputs inputs;
  json summary = json::object();
  summary["campaign"] = campaign.manifest().name;
  const StatusCounts status = campaign.status();
  summary["status"] = {{"queued", status.queued},
                       {"completed", status.completed},
                       {"failed", status.failed},
                       {"total", status.total()}};

  if (fs::exists(dir / kEventsFile)) {
    const auto events = read_events(dir / kEventsFile);
    inputs.client = build_timeline(events, tick_ms);
    summary["peak_in_flight"] = inputs.client->peak_submitted;
  }
  const fs::path worker_path = worker_events.empty() ? dir / kWorkerEventsFile : fs::path(worker_events);
  if (fs::exists(worker_path)) {
    const auto events = read_worker_events(worker_path);
    inputs.provider = build_provider_timeline(events, tick_ms);
    inputs.runtime = runtime_table(events);
    summary["peak_provider_executions"] = inputs.provider->peak_active;
  } else if (!worker_events.empty()) {
    config_error("no worker event log at " + worker_path.string());
  }
  const auto records = campaign.records();
  if (status.completed > 0) {
    inputs.overhead = overhead_stats(records, bin_ms);
    const auto& o = *inputs.overhead;
    summary["overhead_ms"] = {{"mean", o.mean}, {"p50", o.p50}, {"p90", o.p90}, {"p99", o.p99}, {"max", o.max}};
  }
  if (fs::exists(dir / kRunSummaryFile)) summary["last_run"] = read_json_file(dir / kRunSummaryFile);
  inputs.summary = summary;
  render_report(inputs, dir / "report");
  out << summary.dump(2) << "\n";
  out << "wrote " << (dir / "report").string() << "\n";
  return kExitOk;
}

// ---- demo ----

json demo_config(const std::string& scale) {
  const double pi = std::numbers::pi;
  json params = json::array();
  for (const char* name : {"x1", "x2", "x3"}) {
    params.push_back({{"name", name}, {"distribution", "uniform"}, {"lo", -pi}, {"hi", pi}});
  }
  const bool medium = scale == "medium";
  return {{"name", "ishigami-" + scale},
          {"parameters", params},
          {"sampler", {{"kind", "saltelli"}, {"base_count", medium ? 8192 : 256}}},
          {"executor", {{"max_load", medium ? 256 : 64}, {"max_retries", 5}}},
          {"worker", {{"model", "ishigami"}, {"sleep_ms", 20.0}}},
          {"mock_cloud", {{"max_instances", 1000}}}};
}

int cmd_demo(const std::string& scale, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const json source = demo_config(scale);
  fs::create_directories(dir);
  const fs::path config_path = dir / "demo_config.json";
  write_file(config_path, source.dump(2) + "\n");
  const CampaignConfigFile config = load_config(config_path);

  int rc = cmd_sample(config_path, dir, out, err);
  if (rc != kExitOk) return rc;

  ServerOptions options;
  options.port = 0;
  options.event_log_path = dir / kWorkerEventsFile;
  auto server = mock_cloud_serve(make_model(config.model), config.mock_cloud, options);
  ExecutorConfig executor = config.executor;
  executor.endpoint_url = server->url();
  out << "mock cloud listening on " << server->url() << "\n";
  rc = execute_campaign(dir, executor, out);
  server->stop();
  print_stats(out, server->stats());
  if (rc != kExitOk) return rc;

  const json last = read_json_file(dir / kRunSummaryFile);
  out << "speedup: " << std::fixed << std::setprecision(1) << last.value("speedup", 0.0)
      << std::defaultfloat << std::setprecision(6) << "\n";
  cmd_analyze(dir, "sobol", 100, 0, out);

  const double a = 7.0, b = 0.1, pi = std::numbers::pi;
  const double v1 = 0.5 * std::pow(1.0 + b * std::pow(pi, 4) / 5.0, 2);
  const double v2 = a * a / 8.0;
  const double v13 = 8.0 * b * b * std::pow(pi, 8) / 225.0;
  const double v = v1 + v2 + v13;
  out << "analytic: S=(" << v1 / v << ", " << v2 / v << ", 0) ST=(" << (v1 + v13) / v << ", " << v2 / v
      << ", " << v13 / v << ")\n";
  cmd_report(dir, "", kDefaultTickMs, 100.0, out);
  return kExitOk;
}

}  // namespace

ModelAdapter parse_model(const json& j) {
  const std::string where = "worker";
  const std::string model = string_or(j, "model", "ishigami", where);
  if (model == "subprocess") {
    check_keys(j, {"model", "command", "timeout_ms"}, where);
    SubprocessModelConfig s;
    s.command = string_or(j, "command", "", where);
    s.timeout_ms = number_or(j, "timeout_ms", s.timeout_ms, where);
    if (s.command.empty()) config_error("worker.command is required for the subprocess model");
    if (!(s.timeout_ms > 0.0)) config_error("worker.timeout_ms must be positive");
    return s;
  }
  check_keys(j, {"model", "a", "b", "coefficients", "inputs", "output", "sleep_ms"}, where);
  BuiltInModelConfig m;
  if (model == "ishigami") {
    m.kind = BuiltInKind::kIshigami;
  } else if (model == "linear") {
    m.kind = BuiltInKind::kLinear;
  } else if (model == "sleep") {
    m.kind = BuiltInKind::kSleep;
  } else {
    config_error("worker.model must be ishigami, linear, sleep or subprocess");
  }
  m.a = number_or(j, "a", m.a, where);
  m.b = number_or(j, "b", m.b, where);
  m.coefficients = numbers_or(j, "coefficients", where);
  m.input_names = strings_or(j, "inputs", where);
  m.output_name = string_or(j, "output", m.output_name, where);
  m.sleep_ms = number_or(j, "sleep_ms", m.sleep_ms, where);
  if (m.kind == BuiltInKind::kLinear && m.coefficients.empty()) {
    config_error("worker.coefficients is required for the linear model");
  }
  if (m.sleep_ms < 0.0) config_error("worker.sleep_ms must be >= 0");
  return m;
}

MockCloudConfig parse_mock_cloud(const json& j) {
  const std::string where = "mock_cloud";
  check_keys(j, {"cold_start_ms", "max_instances", "instance_concurrency", "idle_reclaim_ms", "failure_rate",
                 "throttle_status", "provision_fraction", "queue_when_full", "seed"},
             where);
  MockCloudConfig m;
  m.cold_start_ms = number_or(j, "cold_start_ms", m.cold_start_ms, where);
  m.max_instances = count_or(j, "max_instances", m.max_instances, where);
  m.instance_concurrency = count_or(j, "instance_concurrency", m.instance_concurrency, where);
  m.idle_reclaim_ms = number_or(j, "idle_reclaim_ms", m.idle_reclaim_ms, where);
  m.failure_rate = number_or(j, "failure_rate", m.failure_rate, where);
  m.throttle_status = static_cast<int>(count_or(j, "throttle_status", m.throttle_status, where));
  m.provision_fraction = number_or(j, "provision_fraction", m.provision_fraction, where);
  m.queue_when_full = bool_or(j, "queue_when_full", m.queue_when_full, where);
  m.seed = count_or(j, "seed", m.seed, where);
  try {
    m.validate();
  } catch (const Error& e) {
    config_error(std::string("mock_cloud: ") + e.what());
  }
  return m;
}

CampaignConfigFile parse_config(const json& j) {
  check_keys(j, {"name", "parameters", "sampler", "executor", "worker", "mock_cloud"}, "config");
  CampaignConfigFile c;
  c.source = j;
  c.name = string_or(j, "name", "", "config");
  if (j.contains("parameters")) {
    const auto& params = j.at("parameters");
    if (!params.is_array()) config_error("parameters: expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < params.size(); ++i) {
      bool varied = true;
      ParameterSpec spec = parse_parameter(params[i], i, varied);
      if (!names.insert(spec.name).second) config_error("duplicate parameter \"" + spec.name + "\"");
      if (varied) c.varied.push_back(spec.name);
      c.parameters.push_back(std::move(spec));
    }
  }
  if (j.contains("sampler")) c.sampler = parse_sampler(j.at("sampler"));
  if (j.contains("executor")) parse_executor(j.at("executor"), c);
  if (j.contains("worker")) c.model = parse_model(j.at("worker"));
  if (j.contains("mock_cloud")) c.mock_cloud = parse_mock_cloud(j.at("mock_cloud"));

  ExecutorConfig probe = c.executor;
  if (probe.endpoint_url.empty()) probe.endpoint_url = "http://127.0.0.1/";
  try {
    probe.validate();
  } catch (const Error& e) {
    config_error(std::string("executor: ") + e.what());
  }
  for (const auto& [name, value] : c.sampler.reference) {
    if (!names_contain(c.parameters, name)) config_error("sampler.reference: unknown parameter \"" + name + "\"");
  }
  return c;
}

CampaignConfigFile load_config(const fs::path& path) { return parse_config(read_json_file(path)); }

GeneratedSamples generate_samples(const CampaignConfigFile& config) {
  if (config.parameters.empty()) config_error("config has no parameters");
  if (config.varied.empty()) config_error("no varied parameters");
  const auto& s = config.sampler;
  GeneratedSamples out;
  try {
    if (s.kind == "saltelli") {
      auto r = saltelli_design(config.parameters, config.varied, s.base_count, s.skip);
      out.samples = std::move(r.samples);
      out.design = r.design.to_json();
      out.warnings = std::move(r.warnings);
    } else if (s.kind == "monte_carlo") {
      out.samples = monte_carlo(config.parameters, config.varied, s.count, s.seed);
      out.design = {{"kind", "monte_carlo"}, {"count", s.count}, {"seed", s.seed}, {"varied_names", config.varied}};
    } else if (s.kind == "collocation") {
      auto d = stochastic_collocation(config.parameters, config.varied, s.order);
      out.samples = d.nodes;
      out.design = d.to_json();
    } else {
      ValueMap reference = default_point(config.parameters);
      for (const auto& [k, v] : s.reference) reference[k] = v;
      auto r = perturbation_design(config.parameters, reference, config.varied, s.rel_step);
      out.samples = std::move(r.samples);
      out.design = r.design.to_json();
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) throw;
    config_error(std::string("sampler: ") + e.what());
  }
  return out;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"sensfarm: sensitivity-analysis campaigns dispatched to HTTP workers", "sensfarm"};
  app.require_subcommand(1);
  const std::string campaign_help =
      std::string("Campaign directory (default: $") + kCampaignEnvVar + " or ./campaign)";

  std::string campaign_dir;
  auto* sample = app.add_subcommand("sample", "Draw the samples of a config into a new campaign");
  std::string config_path;
  sample->add_option("--config", config_path, "Campaign config file (JSON)")->required();
  sample->add_option("--campaign", campaign_dir, campaign_help);

  auto* serve_cmd = app.add_subcommand("serve", "Serve a model over HTTP until SIGINT/SIGTERM");
  ModelFlags serve_model;
  ServerFlags serve_server;
  serve_model.attach(serve_cmd);
  serve_server.attach(serve_cmd);

  auto* mock_cmd = app.add_subcommand("mock-cloud", "Serve a model behind an emulated serverless platform");
  ModelFlags mock_model;
  ServerFlags mock_server;
  mock_model.attach(mock_cmd);
  mock_server.attach(mock_cmd);
  MockCloudConfig mock_flags;
  auto* max_instances_opt = mock_cmd->add_option("--max-instances", mock_flags.max_instances,
                                                 "Instance quota; requests beyond it are throttled (default 1000)");
  auto* cold_opt = mock_cmd->add_option("--cold-start-ms", mock_flags.cold_start_ms,
                                        "Delay before a new instance serves its first request");
  auto* failure_opt = mock_cmd->add_option("--failure-rate", mock_flags.failure_rate,
                                           "Probability of an injected 500 per admitted request");
  auto* conc_opt = mock_cmd->add_option("--instance-concurrency", mock_flags.instance_concurrency,
                                        "Concurrent requests per instance (default 1)");
  auto* reclaim_opt = mock_cmd->add_option("--idle-reclaim-ms", mock_flags.idle_reclaim_ms,
                                           "Idle time after which an instance is reclaimed");
  auto* throttle_opt = mock_cmd->add_option("--throttle-status", mock_flags.throttle_status,
                                            "HTTP status of throttled requests (default 429)");
  auto* fraction_opt = mock_cmd->add_option("--provision-fraction", mock_flags.provision_fraction,
                                            "Share of the quota actually provisioned (default 1)");
  auto* queue_opt = mock_cmd->add_flag("--queue-when-full", mock_flags.queue_when_full,
                                       "Wait for capacity instead of throttling");
  auto* mock_seed_opt = mock_cmd->add_option("--seed", mock_flags.seed, "Seed of the failure injection stream");

  auto* run_cmd = app.add_subcommand("run", "Dispatch the pending runs of a campaign (resumes after a crash)");
  RunFlags run_flags;
  run_flags.attach(run_cmd);
  run_cmd->add_option("--campaign", campaign_dir, campaign_help);

  auto* analyze_cmd = app.add_subcommand("analyze", "Compute sensitivity indices or moments from results");
  std::string method;
  std::size_t bootstrap = 100;
  std::uint64_t analyze_seed = 0;
  analyze_cmd->add_option("--method", method, "sobol, local or moments")
      ->required()
      ->check(CLI::IsMember({"sobol", "local", "moments"}));
  analyze_cmd->add_option("--bootstrap", bootstrap, "Bootstrap resamples for Sobol intervals")->capture_default_str();
  analyze_cmd->add_option("--seed", analyze_seed, "Bootstrap seed")->capture_default_str();
  analyze_cmd->add_option("--campaign", campaign_dir, campaign_help);

  auto* report_cmd = app.add_subcommand("report", "Write timelines, overhead and runtime tables and report.svg");
  std::string worker_events;
  double tick_ms = kDefaultTickMs;
  double bin_ms = 100.0;
  report_cmd->add_option("--worker-events", worker_events,
                         "Provider event log (default: worker_events.ndjson in the campaign)");
  report_cmd->add_option("--tick-ms", tick_ms, "Timeline resolution in ms")->capture_default_str();
  report_cmd->add_option("--bin-ms", bin_ms, "Overhead histogram bin width in ms")->capture_default_str();
  report_cmd->add_option("--campaign", campaign_dir, campaign_help);

  auto* demo_cmd = app.add_subcommand("demo", "Ishigami campaign against an in-process mock cloud");
  std::string scale = "small";
  demo_cmd->add_option("--scale", scale, "small (N=256) or medium (N=8192)")
      ->capture_default_str()
      ->check(CLI::IsMember({"small", "medium"}));
  demo_cmd->add_option("--campaign", campaign_dir, "Campaign directory (default: ./sensfarm-demo-<scale>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  const fs::path dir = campaign_dir.empty() ? default_campaign_dir() : fs::path(campaign_dir);
  try {
    if (*sample) return cmd_sample(config_path, dir, out, err);
    if (*run_cmd) return cmd_run(dir, run_flags, out);
    if (*analyze_cmd) return cmd_analyze(dir, method, bootstrap, analyze_seed, out);
    if (*report_cmd) return cmd_report(dir, worker_events, tick_ms, bin_ms, out);
    if (*demo_cmd) {
      return cmd_demo(scale, campaign_dir.empty() ? fs::path("sensfarm-demo-" + scale) : dir, out, err);
    }
    if (*serve_cmd) {
      const auto config = optional_config(serve_model.config_path);
      const ModelAdapter adapter = serve_model.resolve(config ? &*config : nullptr);
      const ServerOptions options = serve_server.resolve();
      SignalWait signals;
      auto server = serve(make_model(adapter), options);
      out << "listening on " << server->url() << std::endl;
      const int sig = signals.wait();
      out << "signal " << sig << ", stopping" << std::endl;
      server->stop();
      print_stats(out, server->stats());
      return kExitOk;
    }
    if (*mock_cmd) {
      const auto config = optional_config(mock_model.config_path);
      const ModelAdapter adapter = mock_model.resolve(config ? &*config : nullptr);
      MockCloudConfig mock = config ? config->mock_cloud : MockCloudConfig{};
      if (max_instances_opt->count()) mock.max_instances = mock_flags.max_instances;
      if (cold_opt->count()) mock.cold_start_ms = mock_flags.cold_start_ms;
      if (failure_opt->count()) mock.failure_rate = mock_flags.failure_rate;
      if (conc_opt->count()) mock.instance_concurrency = mock_flags.instance_concurrency;
      if (reclaim_opt->count()) mock.idle_reclaim_ms = mock_flags.idle_reclaim_ms;
      if (throttle_opt->count()) mock.throttle_status = mock_flags.throttle_status;
      if (fraction_opt->count()) mock.provision_fraction = mock_flags.provision_fraction;
      if (queue_opt->count()) mock.queue_when_full = mock_flags.queue_when_full;
      if (mock_seed_opt->count()) mock.seed = mock_flags.seed;
      mock.validate();
      const ServerOptions options = mock_server.resolve();
      SignalWait signals;
      auto server = mock_cloud_serve(make_model(adapter), mock, options);
      out << "mock cloud listening on " << server->url() << std::endl;
      const int sig = signals.wait();
      out << "signal " << sig << ", stopping" << std::endl;
      server->stop();
      print_stats(out, server->stats());
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_config_error(e.code()) ? kExitConfig : kExitRunFailures;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRunFailures;
  }
  return kExitConfig;
}

}  // namespace sensfarm
