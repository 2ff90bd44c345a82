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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "sensfarm/campaign.hpp"
#include "sensfarm/executor.hpp"
#include "sensfarm/worker.hpp"

namespace sensfarm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailures = 1;
inline constexpr int kExitConfig = 2;

inline constexpr const char* kCampaignEnvVar = "SENSFARM_CAMPAIGN";

struct SamplerConfig {
  std::string kind = "saltelli";  // saltelli | monte_carlo | collocation | perturbation
  std::size_t base_count = 0;     // saltelli
  std::uint64_t skip = 1;         // saltelli
  std::size_t count = 0;          // monte_carlo
  std::uint64_t seed = 0;         // monte_carlo
  std::size_t order = 0;          // collocation
  double rel_step = 1e-4;         // perturbation
  ValueMap reference;             // perturbation; defaults fill the gaps
};

struct CampaignConfigFile {
  std::string name;
  std::vector<ParameterSpec> parameters;
  std::vector<std::string> varied;
  SamplerConfig sampler;
  ExecutorConfig executor;
  std::string token;  // static bearer token; empty means unsigned requests
  ModelAdapter model = BuiltInModelConfig{};
  MockCloudConfig mock_cloud;
  nlohmann::json source = nlohmann::json::object();
};

// Throws Error(kConfig) on unknown keys, wrong types or invalid values.
CampaignConfigFile parse_config(const nlohmann::json& j);
CampaignConfigFile load_config(const std::filesystem::path& path);

ModelAdapter parse_model(const nlohmann::json& j);
MockCloudConfig parse_mock_cloud(const nlohmann::json& j);

struct GeneratedSamples {
  std::vector<Sample> samples;
  nlohmann::json design;
  std::vector<std::string> warnings;
};

GeneratedSamples generate_samples(const CampaignConfigFile& config);

// Entry point of the sensfarm binary.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sensfarm
