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

#include "sensfarm/campaign.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>

#include "sensfarm/error.hpp"

namespace sensfarm {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kFormatTag = "sensfarm-campaign/1";

bool is_identifier(const std::string& name) {
  static const std::regex re("[A-Za-z_][A-Za-z0-9_]*");
  return std::regex_match(name, re);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string errno_text() { return std::strerror(errno); }

void validate_parameters(const std::vector<ParameterSpec>& parameters) {
  std::set<std::string> seen;
  for (const auto& p : parameters) {
    if (!is_identifier(p.name)) {
      throw Error(ErrorCode::kInvalidArgument, "bad parameter name '" + p.name + "'");
    }
    if (!seen.insert(p.name).second) {
      throw Error(ErrorCode::kDuplicateParameter, p.name);
    }
    validate(p.distribution);
    if (const auto* u = std::get_if<Uniform>(&p.distribution)) {
      if (!(p.default_value >= u->lo && p.default_value <= u->hi)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "default of '" + p.name + "' outside its range");
      }
    } else if (!std::isfinite(p.default_value)) {
      throw Error(ErrorCode::kInvalidArgument, "default of '" + p.name + "' not finite");
    }
  }
}

json value_map_json(const ValueMap& values) {
  json j = json::object();
  for (const auto& [k, v] : values) j[k] = v;
  return j;
}

ValueMap value_map_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kCorruptRecord, "expected object");
  ValueMap out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) throw Error(ErrorCode::kCorruptRecord, "non-numeric value for " + k);
    out.emplace(k, v.get<double>());
  }
  return out;
}

bool same_keys(const ValueMap& values, const std::vector<std::string>& names) {
  if (values.size() != names.size()) return false;
  return std::all_of(names.begin(), names.end(),
                     [&](const std::string& n) { return values.count(n) == 1; });
}

// Append-only file handle; each append is one write(2) sequence of a whole
// newline-terminated chunk.
class AppendFile {
 public:
  AppendFile() = default;
  AppendFile(const fs::path& path, bool sync) : sync_(sync) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
      throw Error(ErrorCode::kUnwritableDirectory, path.string() + ": " + errno_text());
    }
  }
  AppendFile(const AppendFile&) = delete;
  AppendFile& operator=(const AppendFile&) = delete;
  AppendFile(AppendFile&& other) noexcept : fd_(std::exchange(other.fd_, -1)), sync_(other.sync_) {}
  AppendFile& operator=(AppendFile&& other) noexcept {
    if (this != &other) {
      close();
      fd_ = std::exchange(other.fd_, -1);
      sync_ = other.sync_;
    }
    return *this;
  }
  ~AppendFile() { close(); }

  void append(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::write(fd_, data.data(), data.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kIo, "append failed: " + errno_text());
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
    if (sync_ && ::fdatasync(fd_) != 0) {
      throw Error(ErrorCode::kIo, "fdatasync failed: " + errno_text());
    }
  }

 private:
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
  bool sync_ = false;
};

void write_file_atomically(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kUnwritableDirectory, tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "rename failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Replay {
  std::map<RunId, RunRecord> records;
  std::vector<LoadWarning> warnings;
  // Length of the newline-terminated prefix of the file.
  std::size_t complete_prefix = 0;
};

void corrupt(Replay& replay, bool strict, std::uint64_t offset, const std::string& message) {
  if (strict) {
    throw Error(ErrorCode::kCorruptRecord,
                "runs file offset " + std::to_string(offset) + ": " + message);
  }
  replay.warnings.push_back({offset, message});
}

void apply_line(Replay& replay, const RunRecord& line) {
  auto it = replay.records.find(line.run_id);
  switch (line.state) {
    case RunState::kQueued:
      if (it != replay.records.end()) throw Error(ErrorCode::kDuplicateRunId, std::to_string(line.run_id));
      replay.records.emplace(line.run_id, line);
      return;
    case RunState::kCompleted:
      if (it == replay.records.end()) throw Error(ErrorCode::kUnknownRunId, std::to_string(line.run_id));
      if (it->second.state == RunState::kCompleted) {
        throw Error(ErrorCode::kAlreadyCompleted, std::to_string(line.run_id));
      }
      if (it->second.state == RunState::kFailed) {
        throw Error(ErrorCode::kIllegalTransition, "FAILED -> COMPLETED");
      }
      it->second = line;
      return;
    case RunState::kFailed:
      if (it == replay.records.end()) throw Error(ErrorCode::kUnknownRunId, std::to_string(line.run_id));
      if (it->second.state == RunState::kCompleted || it->second.state == RunState::kFailed) {
        throw Error(ErrorCode::kIllegalTransition,
                    std::string(to_string(it->second.state)) + " -> FAILED");
      }
      it->second = line;
      return;
    case RunState::kSubmitted:
      throw Error(ErrorCode::kCorruptRecord, "SUBMITTED is never persisted");
  }
}

Replay replay_runs(std::string_view contents, bool strict) {
  Replay replay;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    const std::size_t nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) {
      corrupt(replay, strict, pos, "truncated record at end of file");
      break;
    }
    const std::string_view line = contents.substr(pos, nl - pos);
    if (!line.empty()) {
      try {
        apply_line(replay, parse_record_line(line));
      } catch (const Error& e) {
        if (strict) {
          throw Error(ErrorCode::kCorruptRecord,
                      "runs file offset " + std::to_string(pos) + ": " + e.what());
        }
        replay.warnings.push_back({pos, e.what()});
      }
    }
    pos = nl + 1;
    replay.complete_prefix = pos;
  }
  return replay;
}

}  // namespace

void validate(const Distribution& distribution) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Uniform>) {
          if (!(std::isfinite(d.lo) && std::isfinite(d.hi) && d.lo < d.hi)) {
            throw Error(ErrorCode::kInvalidArgument, "Uniform requires lo < hi");
          }
        } else {
          if (!(std::isfinite(d.mean) && std::isfinite(d.stddev) && d.stddev > 0.0)) {
            throw Error(ErrorCode::kInvalidArgument, "Normal requires stddev > 0");
          }
        }
      },
      distribution);
}

std::string_view to_string(RunState state) {
  switch (state) {
    case RunState::kQueued: return "QUEUED";
    case RunState::kSubmitted: return "SUBMITTED";
    case RunState::kCompleted: return "COMPLETED";
    case RunState::kFailed: return "FAILED";
  }
  return "?";
}

RunState run_state_from_string(std::string_view text) {
  if (text == "QUEUED") return RunState::kQueued;
  if (text == "SUBMITTED") return RunState::kSubmitted;
  if (text == "COMPLETED") return RunState::kCompleted;
  if (text == "FAILED") return RunState::kFailed;
  throw Error(ErrorCode::kCorruptRecord, "unknown state '" + std::string(text) + "'");
}

std::optional<double> RunRecord::overhead_ms() const {
  if (!sim_time_ms || !wall_time_ms) return std::nullopt;
  return *wall_time_ms - *sim_time_ms;
}

json to_json(const Distribution& distribution) {
  return std::visit(
      [](const auto& d) -> json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Uniform>) {
          return {{"kind", "uniform"}, {"lo", d.lo}, {"hi", d.hi}};
        } else {
          return {{"kind", "normal"}, {"mean", d.mean}, {"stddev", d.stddev}};
        }
      },
      distribution);
}

Distribution distribution_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  Distribution d;
  if (kind == "uniform") {
    d = Uniform{j.at("lo").get<double>(), j.at("hi").get<double>()};
  } else if (kind == "normal") {
    d = Normal{j.at("mean").get<double>(), j.at("stddev").get<double>()};
  } else {
    throw Error(ErrorCode::kUnsupportedDistribution, kind);
  }
  validate(d);
  return d;
}

json to_json(const ParameterSpec& spec) {
  return {{"name", spec.name},
          {"distribution", to_json(spec.distribution)},
          {"default", spec.default_value}};
}

ParameterSpec parameter_from_json(const json& j) {
  return {j.at("name").get<std::string>(), distribution_from_json(j.at("distribution")),
          j.at("default").get<double>()};
}

json to_json(const CampaignManifest& manifest) {
  json params = json::array();
  for (const auto& p : manifest.parameters) params.push_back(to_json(p));
  return {{"format", kFormatTag},
          {"name", manifest.name},
          {"created_at", manifest.created_at},
          {"parameters", params},
          {"output_names", manifest.output_names},
          {"design", manifest.design}};
}

CampaignManifest manifest_from_json(const json& j) {
  if (j.value("format", "") != kFormatTag) {
    throw Error(ErrorCode::kCorruptRecord, "not a campaign manifest");
  }
  CampaignManifest m;
  m.name = j.at("name").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  for (const auto& p : j.at("parameters")) m.parameters.push_back(parameter_from_json(p));
  m.output_names = j.at("output_names").get<std::vector<std::string>>();
  m.design = j.value("design", json());
  return m;
}

std::string record_line(const RunRecord& record) {
  ordered_json j;
  j["run_id"] = record.run_id;
  j["state"] = to_string(record.state);
  j["inputs"] = value_map_json(record.inputs);
  j["outputs"] = record.outputs ? ordered_json(value_map_json(*record.outputs)) : ordered_json();
  j["sim_time_ms"] = record.sim_time_ms ? ordered_json(*record.sim_time_ms) : ordered_json();
  j["wall_time_ms"] = record.wall_time_ms ? ordered_json(*record.wall_time_ms) : ordered_json();
  j["attempts"] = record.attempts;
  if (record.state == RunState::kFailed) j["reason"] = record.failure_reason;
  return j.dump();
}

RunRecord parse_record_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, e.what());
  }
  try {
    RunRecord r;
    r.run_id = j.at("run_id").get<RunId>();
    r.state = run_state_from_string(j.at("state").get<std::string>());
    r.inputs = value_map_from_json(j.at("inputs"));
    if (!j.at("outputs").is_null()) r.outputs = value_map_from_json(j.at("outputs"));
    if (!j.at("sim_time_ms").is_null()) r.sim_time_ms = j.at("sim_time_ms").get<double>();
    if (!j.at("wall_time_ms").is_null()) r.wall_time_ms = j.at("wall_time_ms").get<double>();
    r.attempts = j.at("attempts").get<int>();
    r.failure_reason = j.value("reason", "");
    if (r.state == RunState::kCompleted && !(r.outputs && r.sim_time_ms && r.wall_time_ms)) {
      throw Error(ErrorCode::kCorruptRecord, "COMPLETED record without outputs/timings");
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, e.what());
  }
}

struct Campaign::State {
  fs::path dir;
  StoreOptions options;
  mutable std::mutex mu;
  CampaignManifest manifest;
  std::map<RunId, RunRecord> records;
  std::vector<LoadWarning> warnings;
  AppendFile runs;

  void persist_manifest() {
    write_file_atomically(dir / kManifestFile, to_json(manifest).dump(2) + "\n");
  }

  RunRecord& find(RunId run_id) {
    auto it = records.find(run_id);
    if (it == records.end()) throw Error(ErrorCode::kUnknownRunId, std::to_string(run_id));
    return it->second;
  }
};

Campaign::Campaign(std::unique_ptr<State> state) : state_(std::move(state)) {}
Campaign::Campaign(Campaign&&) noexcept = default;
Campaign& Campaign::operator=(Campaign&&) noexcept = default;
Campaign::~Campaign() = default;

Campaign Campaign::create(const std::string& name, std::vector<ParameterSpec> parameters,
                          const fs::path& workdir, StoreOptions options) {
  validate_parameters(parameters);
  std::error_code ec;
  fs::create_directories(workdir, ec);
  if (ec || !fs::is_directory(workdir)) {
    throw Error(ErrorCode::kUnwritableDirectory,
                workdir.string() + (ec ? ": " + ec.message() : ""));
  }
  if (fs::exists(workdir / kManifestFile)) {
    throw Error(ErrorCode::kInvalidArgument, "campaign already exists in " + workdir.string());
  }
  auto state = std::make_unique<State>();
  state->dir = workdir;
  state->options = options;
  state->manifest.name = name;
  state->manifest.parameters = std::move(parameters);
  state->manifest.created_at = utc_now();
  try {
    state->persist_manifest();
  } catch (const Error& e) {
    throw Error(ErrorCode::kUnwritableDirectory, e.what());
  }
  // Truncate any stale run log left behind without a manifest.
  { std::ofstream(workdir / kRunsFile, std::ios::trunc); }
  state->runs = AppendFile(workdir / kRunsFile, options.sync_writes);
  return Campaign(std::move(state));
}

Campaign Campaign::open(const fs::path& workdir, StoreOptions options) {
  const fs::path manifest_path = workdir / kManifestFile;
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorCode::kInvalidArgument, "no campaign at " + workdir.string());
  }
  auto state = std::make_unique<State>();
  state->dir = workdir;
  state->options = options;
  try {
    state->manifest = manifest_from_json(json::parse(read_file(manifest_path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, std::string("manifest: ") + e.what());
  }
  const fs::path runs_path = workdir / kRunsFile;
  const std::string contents = read_file(runs_path);
  Replay replay = replay_runs(contents, options.strict);
  if (replay.complete_prefix < contents.size()) {
    // Drop the partial tail so later appends start on a fresh line.
    fs::resize_file(runs_path, replay.complete_prefix);
  }
  state->records = std::move(replay.records);
  state->warnings = std::move(replay.warnings);
  state->runs = AppendFile(runs_path, options.sync_writes);
  return Campaign(std::move(state));
}

const fs::path& Campaign::dir() const { return state_->dir; }

CampaignManifest Campaign::manifest() const {
  std::lock_guard lock(state_->mu);
  return state_->manifest;
}

void Campaign::set_design(json design) {
  std::lock_guard lock(state_->mu);
  state_->manifest.design = std::move(design);
  state_->persist_manifest();
}

std::size_t Campaign::add_samples(std::span<const Sample> samples) {
  std::lock_guard lock(state_->mu);
  std::vector<std::string> names;
  for (const auto& p : state_->manifest.parameters) names.push_back(p.name);
  std::set<RunId> batch;
  std::string chunk;
  for (const auto& s : samples) {
    if (s.run_id < 0) throw Error(ErrorCode::kInvalidArgument, "negative run_id");
    if (state_->records.count(s.run_id) || !batch.insert(s.run_id).second) {
      throw Error(ErrorCode::kDuplicateRunId, std::to_string(s.run_id));
    }
    if (!same_keys(s.inputs, names)) {
      throw Error(ErrorCode::kInputKeyMismatch, "run " + std::to_string(s.run_id));
    }
    for (const auto& [k, v] : s.inputs) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidArgument, "non-finite input " + k);
      }
    }
    RunRecord r;
    r.run_id = s.run_id;
    r.inputs = s.inputs;
    chunk += record_line(r);
    chunk += '\n';
  }
  state_->runs.append(chunk);
  for (const auto& s : samples) {
    RunRecord r;
    r.run_id = s.run_id;
    r.inputs = s.inputs;
    state_->records.emplace(s.run_id, std::move(r));
  }
  return samples.size();
}

void Campaign::mark_submitted(RunId run_id) {
  std::lock_guard lock(state_->mu);
  RunRecord& r = state_->find(run_id);
  if (r.state != RunState::kQueued) {
    throw Error(ErrorCode::kIllegalTransition,
                std::string(to_string(r.state)) + " -> SUBMITTED");
  }
  r.state = RunState::kSubmitted;
  ++r.attempts;
}

void Campaign::mark_requeued(RunId run_id) {
  std::lock_guard lock(state_->mu);
  RunRecord& r = state_->find(run_id);
  if (r.state != RunState::kSubmitted) {
    throw Error(ErrorCode::kIllegalTransition, std::string(to_string(r.state)) + " -> QUEUED");
  }
  r.state = RunState::kQueued;
}

void Campaign::record_result(RunId run_id, const ValueMap& outputs, double sim_time_ms,
                             double wall_time_ms, int attempts) {
  std::lock_guard lock(state_->mu);
  RunRecord& r = state_->find(run_id);
  if (r.state == RunState::kCompleted) {
    throw Error(ErrorCode::kAlreadyCompleted, std::to_string(run_id));
  }
  if (r.state == RunState::kFailed) {
    throw Error(ErrorCode::kIllegalTransition, "FAILED -> COMPLETED");
  }
  if (attempts < 1) throw Error(ErrorCode::kInvalidArgument, "attempts must be >= 1");
  if (!(sim_time_ms >= 0.0 && wall_time_ms >= sim_time_ms && std::isfinite(wall_time_ms))) {
    throw Error(ErrorCode::kInvalidArgument, "require 0 <= sim_time_ms <= wall_time_ms");
  }
  for (const auto& [k, v] : outputs) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite output " + k);
  }
  auto& names = state_->manifest.output_names;
  const bool first = names.empty();
  if (first) {
    if (outputs.empty()) throw Error(ErrorCode::kOutputKeyMismatch, "no outputs");
  } else if (!same_keys(outputs, names)) {
    throw Error(ErrorCode::kOutputKeyMismatch, "run " + std::to_string(run_id));
  }

  RunRecord next = r;
  next.state = RunState::kCompleted;
  next.outputs = outputs;
  next.sim_time_ms = sim_time_ms;
  next.wall_time_ms = wall_time_ms;
  next.attempts = attempts;
  if (first) {
    for (const auto& [k, v] : outputs) names.push_back(k);
    state_->persist_manifest();
  }
  state_->runs.append(record_line(next) + "\n");
  r = std::move(next);
}

void Campaign::mark_failed(RunId run_id, int attempts, const std::string& reason) {
  std::lock_guard lock(state_->mu);
  RunRecord& r = state_->find(run_id);
  if (r.state == RunState::kCompleted || r.state == RunState::kFailed) {
    throw Error(ErrorCode::kIllegalTransition, std::string(to_string(r.state)) + " -> FAILED");
  }
  RunRecord next = r;
  next.state = RunState::kFailed;
  next.attempts = attempts;
  next.failure_reason = reason;
  state_->runs.append(record_line(next) + "\n");
  r = std::move(next);
}

std::vector<RunRecord> Campaign::load_results(std::vector<LoadWarning>* warnings) const {
  return sensfarm::load_results(state_->dir, state_->options.strict, warnings);
}

StatusCounts Campaign::status() const {
  std::lock_guard lock(state_->mu);
  StatusCounts c;
  for (const auto& [id, r] : state_->records) {
    switch (r.state) {
      case RunState::kQueued: ++c.queued; break;
      case RunState::kSubmitted: ++c.submitted; break;
      case RunState::kCompleted: ++c.completed; break;
      case RunState::kFailed: ++c.failed; break;
    }
  }
  return c;
}

std::optional<RunRecord> Campaign::record(RunId run_id) const {
  std::lock_guard lock(state_->mu);
  auto it = state_->records.find(run_id);
  if (it == state_->records.end()) return std::nullopt;
  return it->second;
}

std::vector<RunRecord> Campaign::records() const {
  std::lock_guard lock(state_->mu);
  std::vector<RunRecord> out;
  out.reserve(state_->records.size());
  for (const auto& [id, r] : state_->records) out.push_back(r);
  return out;
}

std::vector<Sample> Campaign::pending_samples() const {
  std::lock_guard lock(state_->mu);
  std::vector<Sample> out;
  for (const auto& [id, r] : state_->records) {
    if (r.state == RunState::kQueued) out.push_back({id, r.inputs});
  }
  return out;
}

std::vector<LoadWarning> Campaign::open_warnings() const {
  std::lock_guard lock(state_->mu);
  return state_->warnings;
}

std::vector<RunRecord> load_results(const fs::path& workdir, bool strict,
                                    std::vector<LoadWarning>* warnings) {
  if (!fs::exists(workdir / kManifestFile)) {
    throw Error(ErrorCode::kInvalidArgument, "no campaign at " + workdir.string());
  }
  Replay replay = replay_runs(read_file(workdir / kRunsFile), strict);
  for (const auto& w : replay.warnings) {
    std::cerr << "warning: " << (workdir / kRunsFile).string() << " offset " << w.offset
              << ": " << w.message << "\n";
  }
  if (warnings) *warnings = replay.warnings;
  std::vector<RunRecord> out;
  for (auto& [id, r] : replay.records) {
    if (r.state == RunState::kCompleted) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sensfarm
