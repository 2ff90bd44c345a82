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

// Stand-in simulation for subprocess tests. Reads a request from stdin and
// prints {"outputs": {"sum": ..., "run_id": ...}}.
//   --fail N      exit with status N
//   --sleep MS    sleep before answering
//   --garbage     print something that is not JSON
//   --close       exit without reading stdin
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <iterator>
#include <string>
#include <thread>

#include "json.hpp"

int main(int argc, char** argv) {
  int fail = 0;
  long sleep_ms = 0;
  bool garbage = false;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--fail") && i + 1 < argc) fail = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--sleep") && i + 1 < argc) sleep_ms = std::atol(argv[++i]);
    else if (!std::strcmp(argv[i], "--garbage")) garbage = true;
    else if (!std::strcmp(argv[i], "--close")) {
      std::cout << "{\"outputs\": {\"sum\": 0}}\n";
      return 0;
    }
  }
  const std::string input((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
  if (sleep_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
  if (fail) {
    std::cerr << "echo_model: failing on purpose\n";
    return fail;
  }
  if (garbage) {
    std::cout << "not json\n";
    return 0;
  }
  const auto request = nlohmann::json::parse(input);
  double sum = 0.0;
  for (const auto& [k, v] : request.at("inputs").items()) sum += v.get<double>();
  nlohmann::json out = {{"outputs", {{"sum", sum}, {"run_id", request.at("run_id").get<double>()}}}};
  std::cout << out.dump() << "\n";
  return 0;
}
