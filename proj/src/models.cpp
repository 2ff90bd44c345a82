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

#include <chrono>
#include <cmath>
#include <thread>

#include "json.hpp"
#include "sensfarm/error.hpp"
#include "sensfarm/worker.hpp"

namespace sensfarm {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> default_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

std::vector<double> gather(const Sample& sample, const std::vector<std::string>& names) {
  std::vector<double> x;
  x.reserve(names.size());
  for (const auto& n : names) {
    auto it = sample.inputs.find(n);
    if (it == sample.inputs.end()) {
      throw Error(ErrorCode::kInputKeyMismatch, "model input '" + n + "' missing from run " +
                                                    std::to_string(sample.run_id));
    }
    x.push_back(it->second);
  }
  return x;
}

class BuiltInModel final : public Model {
 public:
  explicit BuiltInModel(BuiltInModelConfig config) : config_(std::move(config)) {
    if (config_.input_names.empty()) {
      switch (config_.kind) {
        case BuiltInKind::kIshigami: config_.input_names = default_names(3); break;
        case BuiltInKind::kLinear: config_.input_names = default_names(config_.coefficients.size()); break;
        case BuiltInKind::kSleep: break;
      }
    }
    if (config_.kind == BuiltInKind::kIshigami && config_.input_names.size() != 3) {
      throw Error(ErrorCode::kInvalidArgument, "Ishigami takes exactly three inputs");
    }
    if (config_.kind == BuiltInKind::kLinear &&
        (config_.coefficients.empty() || config_.coefficients.size() != config_.input_names.size())) {
      throw Error(ErrorCode::kInvalidArgument, "linear model needs one coefficient per input");
    }
    if (!(config_.sleep_ms >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sleep_ms must be >= 0");
  }

  ValueMap evaluate(const Sample& sample) const override {
    const auto x = gather(sample, config_.input_names);
    double y = 0.0;
    switch (config_.kind) {
      case BuiltInKind::kIshigami: y = builtin_ishigami(x[0], x[1], x[2], config_.a, config_.b); break;
      case BuiltInKind::kLinear: y = builtin_linear(config_.coefficients, x); break;
      case BuiltInKind::kSleep:
        for (const auto& [k, v] : sample.inputs) y += v;
        break;
    }
    if (config_.sleep_ms > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(config_.sleep_ms));
    }
    return {{config_.output_name, y}};
  }

 private:
  BuiltInModelConfig config_;
};

class SubprocessModel final : public Model {
 public:
  explicit SubprocessModel(SubprocessModelConfig config) : config_(std::move(config)) {
    if (config_.command.empty()) throw Error(ErrorCode::kInvalidArgument, "empty command");
  }
  ValueMap evaluate(const Sample& sample) const override {
    return run_subprocess_model(config_, sample);
  }

 private:
  SubprocessModelConfig config_;
};

std::string error_body(const std::string& message) {
  return nlohmann::json{{"error", message}}.dump();
}

}  // namespace

double builtin_ishigami(double x1, double x2, double x3, double a, double b) {
  const double s1 = std::sin(x1);
  const double s2 = std::sin(x2);
  return s1 + a * s2 * s2 + b * x3 * x3 * x3 * x3 * s1;
}

double builtin_linear(std::span<const double> coefficients, std::span<const double> x) {
  if (coefficients.size() != x.size()) {
    throw Error(ErrorCode::kInvalidArgument, "coefficient and input lengths differ");
  }
  double y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) y += coefficients[i] * x[i];
  return y;
}

std::shared_ptr<const Model> make_model(const ModelAdapter& adapter) {
  return std::visit(
      [](const auto& config) -> std::shared_ptr<const Model> {
        using T = std::decay_t<decltype(config)>;
        if constexpr (std::is_same_v<T, BuiltInModelConfig>) {
          return std::make_shared<BuiltInModel>(config);
        } else {
          return std::make_shared<SubprocessModel>(config);
        }
      },
      adapter);
}

HandlerResult handle_request(const Model& model, std::string_view payload) {
  Sample sample;
  try {
    sample = parse_request(payload);
  } catch (const Error& e) {
    return {400, error_body(e.what()), 0.0};
  }
  ValueMap outputs;
  const auto t0 = Clock::now();
  try {
    outputs = model.evaluate(sample);
  } catch (const Error& e) {
    return {e.code() == ErrorCode::kInputKeyMismatch ? 400 : 500, error_body(e.what()), 0.0};
  } catch (const std::exception& e) {
    return {500, error_body(e.what()), 0.0};
  }
  const double sim_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  try {
    return {200, serialize_response({sample.run_id, outputs, sim_ms}), sim_ms};
  } catch (const Error& e) {
    // Non-finite model output.
    return {500, error_body(e.what()), sim_ms};
  }
}

}  // namespace sensfarm
