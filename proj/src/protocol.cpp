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

#include "sensfarm/protocol.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "json.hpp"
#include "sensfarm/error.hpp"

namespace sensfarm {

using json = nlohmann::json;

namespace {

std::string quote(const std::string& key) { return json(key).dump(); }

std::string serialize_map(const ValueMap& values) {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : values) {
    if (!first) out += ", ";
    first = false;
    out += quote(k);
    out += ": ";
    out += format_number(v);
  }
  out += "}";
  return out;
}

json parse_object(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kSchemaViolation, "payload is not an object");
  return j;
}

void require_keys(const json& j, const std::set<std::string>& keys) {
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw Error(ErrorCode::kSchemaViolation, "unexpected key '" + k + "'");
  }
  for (const auto& k : keys) {
    if (!j.contains(k)) throw Error(ErrorCode::kSchemaViolation, "missing key '" + k + "'");
  }
}

RunId parse_run_id(const json& j) {
  if (!j.is_number_integer()) throw Error(ErrorCode::kSchemaViolation, "run_id is not an integer");
  if (j.is_number_unsigned()) return static_cast<RunId>(j.get<std::uint64_t>());
  const auto id = j.get<std::int64_t>();
  if (id < 0) throw Error(ErrorCode::kSchemaViolation, "run_id is negative");
  return id;
}

ValueMap parse_values(const json& j, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::kSchemaViolation, std::string(what) + " is not an object");
  ValueMap out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      throw Error(ErrorCode::kSchemaViolation, std::string(what) + "." + k + " is not a number");
    }
    out.emplace(k, v.get<double>());
  }
  return out;
}

}  // namespace

std::string format_number(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::kSchemaViolation, "non-finite number");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::scientific);
  std::string_view sci(buf, static_cast<std::size_t>(res.ptr - buf));

  std::string sign;
  if (sci.front() == '-') {
    sign = "-";
    sci.remove_prefix(1);
  }
  const std::size_t e_pos = sci.find('e');
  std::string digits;
  for (char c : sci.substr(0, e_pos)) {
    if (c != '.') digits += c;
  }
  int exponent = 0;
  std::from_chars(sci.data() + e_pos + 1 + (sci[e_pos + 1] == '+'), sci.data() + sci.size(),
                  exponent);

  std::string out = sign;
  if (exponent >= -4 && exponent < 16) {
    if (exponent < 0) {
      out += "0.";
      out.append(static_cast<std::size_t>(-exponent - 1), '0');
      out += digits;
    } else {
      const auto int_len = static_cast<std::size_t>(exponent) + 1;
      if (digits.size() <= int_len) {
        out += digits;
        out.append(int_len - digits.size(), '0');
        out += ".0";
      } else {
        out += digits.substr(0, int_len);
        out += '.';
        out += digits.substr(int_len);
      }
    }
    return out;
  }
  out += digits.substr(0, 1);
  if (digits.size() > 1) {
    out += '.';
    out += digits.substr(1);
  }
  out += exponent < 0 ? "e-" : "e+";
  const int mag = std::abs(exponent);
  if (mag < 10) out += '0';
  out += std::to_string(mag);
  return out;
}

std::string serialize_request(const Sample& sample) {
  return "{\"run_id\": " + std::to_string(sample.run_id) +
         ", \"inputs\": " + serialize_map(sample.inputs) + "}";
}

Sample parse_request(std::string_view body) {
  const json j = parse_object(body);
  require_keys(j, {"run_id", "inputs"});
  return {parse_run_id(j.at("run_id")), parse_values(j.at("inputs"), "inputs")};
}

std::string serialize_response(const WireResponse& response) {
  return "{\"run_id\": " + std::to_string(response.run_id) +
         ", \"outputs\": " + serialize_map(response.outputs) +
         ", \"sim_time_ms\": " + format_number(response.sim_time_ms) + "}";
}

WireResponse parse_response(std::string_view body, std::optional<RunId> expected_run_id) {
  const json j = parse_object(body);
  require_keys(j, {"run_id", "outputs", "sim_time_ms"});
  WireResponse r;
  r.run_id = parse_run_id(j.at("run_id"));
  r.outputs = parse_values(j.at("outputs"), "outputs");
  const auto& sim = j.at("sim_time_ms");
  if (!sim.is_number() || !(sim.get<double>() >= 0.0) || !std::isfinite(sim.get<double>())) {
    throw Error(ErrorCode::kSchemaViolation, "sim_time_ms is not a non-negative number");
  }
  r.sim_time_ms = sim.get<double>();
  if (expected_run_id && *expected_run_id != r.run_id) {
    throw Error(ErrorCode::kRunIdMismatch, "expected run_id " + std::to_string(*expected_run_id) +
                                               ", got " + std::to_string(r.run_id));
  }
  return r;
}

}  // namespace sensfarm
