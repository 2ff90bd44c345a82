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

#include <optional>
#include <string>
#include <string_view>

#include "sensfarm/campaign.hpp"

namespace sensfarm {

// Single-sample wire protocol shared by the dispatcher and the workers.
//
//   request:  {"run_id": <int>, "inputs": {"<name>": <number>, ...}}
//   response: {"run_id": <int>, "outputs": {"<name>": <number>, ...}, "sim_time_ms": <number>}
//
// Keys inside inputs/outputs are emitted in name order. Numbers use the
// shortest representation that round-trips, always with a fraction or an
// exponent (1.0, 0.1, 1e-05, 1.5e+16).

struct WireResponse {
  RunId run_id = 0;
  ValueMap outputs;
  double sim_time_ms = 0.0;

  friend bool operator==(const WireResponse&, const WireResponse&) = default;
};

inline constexpr std::string_view kJsonContentType = "application/json";

std::string format_number(double value);

std::string serialize_request(const Sample& sample);
Sample parse_request(std::string_view body);

std::string serialize_response(const WireResponse& response);
// Throws kSchemaViolation on malformed bodies and kRunIdMismatch when
// `expected_run_id` is given and differs from the echoed id.
WireResponse parse_response(std::string_view body,
                            std::optional<RunId> expected_run_id = std::nullopt);

}  // namespace sensfarm
