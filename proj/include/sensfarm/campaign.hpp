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
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace sensfarm {

using RunId = std::int64_t;

// Parameter or output name -> value. Iteration order is by name.
using ValueMap = std::map<std::string, double>;

struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
};

struct Normal {
  double mean = 0.0;
  double stddev = 1.0;
};

using Distribution = std::variant<Uniform, Normal>;

// Throws Error(kInvalidArgument) unless lo < hi (Uniform) or stddev > 0 (Normal).
void validate(const Distribution& distribution);

struct ParameterSpec {
  std::string name;
  Distribution distribution;
  // Value used when the parameter is held fixed.
  double default_value = 0.0;
};

struct Sample {
  RunId run_id = 0;
  ValueMap inputs;

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class RunState { kQueued, kSubmitted, kCompleted, kFailed };

std::string_view to_string(RunState state);
RunState run_state_from_string(std::string_view text);

struct RunRecord {
  RunId run_id = 0;
  RunState state = RunState::kQueued;
  ValueMap inputs;
  std::optional<ValueMap> outputs;
  std::optional<double> sim_time_ms;
  std::optional<double> wall_time_ms;
  int attempts = 0;
  std::string failure_reason;

  // wall_time_ms - sim_time_ms, when both are known.
  std::optional<double> overhead_ms() const;
};

struct StatusCounts {
  std::size_t queued = 0;
  std::size_t submitted = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;

  std::size_t total() const { return queued + submitted + completed + failed; }
  friend bool operator==(const StatusCounts&, const StatusCounts&) = default;
};

struct CampaignManifest {
  std::string name;
  std::vector<ParameterSpec> parameters;
  // Empty until the first result is recorded; fixed afterwards.
  std::vector<std::string> output_names;
  // Sampler metadata (see sampling.hpp); null when no design was attached.
  nlohmann::json design;
  std::string created_at;
};

struct LoadWarning {
  std::uint64_t offset = 0;  // byte offset of the offending line
  std::string message;
};

struct StoreOptions {
  // Corrupt lines in runs.ndjson are fatal instead of skipped with a warning.
  bool strict = false;
  // fdatasync after every append.
  bool sync_writes = false;
};

inline constexpr std::string_view kManifestFile = "campaign.json";
inline constexpr std::string_view kRunsFile = "runs.ndjson";

// A persistent campaign: manifest document plus an append-only run log.
//
// All member functions are safe to call concurrently; writes are serialized
// and every state change is appended to runs.ndjson before the call returns.
class Campaign {
 public:
  static Campaign create(const std::string& name,
                         std::vector<ParameterSpec> parameters,
                         const std::filesystem::path& workdir,
                         StoreOptions options = {});
  static Campaign open(const std::filesystem::path& workdir,
                       StoreOptions options = {});

  Campaign(Campaign&&) noexcept;
  Campaign& operator=(Campaign&&) noexcept;
  ~Campaign();

  const std::filesystem::path& dir() const;
  CampaignManifest manifest() const;
  void set_design(nlohmann::json design);

  // Stores each sample as a QUEUED record. All-or-nothing: on error nothing
  // is written.
  std::size_t add_samples(std::span<const Sample> samples);

  // In-memory lifecycle transitions used by the dispatcher. They are not
  // persisted; a reopened campaign sees SUBMITTED runs as QUEUED.
  void mark_submitted(RunId run_id);
  void mark_requeued(RunId run_id);

  void record_result(RunId run_id, const ValueMap& outputs, double sim_time_ms,
                     double wall_time_ms, int attempts);
  void mark_failed(RunId run_id, int attempts, const std::string& reason);

  // Re-reads runs.ndjson and returns COMPLETED records ordered by run_id.
  std::vector<RunRecord> load_results(
      std::vector<LoadWarning>* warnings = nullptr) const;

  StatusCounts status() const;
  std::optional<RunRecord> record(RunId run_id) const;
  std::vector<RunRecord> records() const;
  // QUEUED samples, ordered by run_id.
  std::vector<Sample> pending_samples() const;
  std::vector<LoadWarning> open_warnings() const;

 private:
  struct State;
  explicit Campaign(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

std::vector<RunRecord> load_results(const std::filesystem::path& workdir,
                                    bool strict = false,
                                    std::vector<LoadWarning>* warnings = nullptr);

nlohmann::json to_json(const Distribution& distribution);
Distribution distribution_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParameterSpec& spec);
ParameterSpec parameter_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CampaignManifest& manifest);
CampaignManifest manifest_from_json(const nlohmann::json& j);

// One runs.ndjson line (no trailing newline).
std::string record_line(const RunRecord& record);
RunRecord parse_record_line(std::string_view line);

}  // namespace sensfarm
