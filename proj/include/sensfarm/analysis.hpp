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
#include <span>
#include <string>
#include <vector>

#include "sensfarm/campaign.hpp"
#include "sensfarm/sampling.hpp"

namespace sensfarm {

struct SobolIndex {
  std::string parameter;
  double first = 0.0;
  double total = 0.0;
  // Half-widths of bootstrap 95% percentile intervals; 0 without bootstrap.
  double first_ci = 0.0;
  double total_ci = 0.0;
};

struct SobolOutput {
  std::string output;
  // All design outputs equal: indices are undefined and left empty.
  bool zero_variance = false;
  double variance = 0.0;
  std::vector<SobolIndex> indices;  // in design order of varied parameters
};

struct SobolResult {
  std::size_t base_count = 0;
  std::size_t bootstrap_n = 0;
  std::vector<SobolOutput> outputs;  // ordered by output name
};

// First-order and total indices from a Saltelli design:
//   S_i  = mean_j f(B)_j (f(AB_i)_j - f(A)_j) / V
//   ST_i = mean_j (f(A)_j - f(AB_i)_j)^2 / (2 V)
// with V the unbiased variance of the pooled f(A) and f(B) values. Results
// are matched to design slots by run_id. Bootstrap resamples the rows j.
SobolResult sobol_indices(const SaltelliDesign& design, std::span<const RunRecord> results,
                          std::size_t bootstrap_n = 100, std::uint64_t seed = 0);

struct LocalIndex {
  std::string parameter;
  double derivative = 0.0;
  double step = 0.0;
};

struct LocalOutput {
  std::string output;
  std::vector<LocalIndex> indices;
};

struct LocalSensitivityResult {
  std::vector<LocalOutput> outputs;
};

// Central differences (Y(plus i) - Y(minus i)) / (2 step_i).
LocalSensitivityResult local_sensitivity(const PerturbationDesign& design,
                                         std::span<const RunRecord> results);

struct OutputMoments {
  std::string output;
  double mean = 0.0;
  double variance = 0.0;
};

struct MomentResult {
  std::vector<OutputMoments> outputs;
};

MomentResult quadrature_moments(const QuadratureDesign& design, std::span<const RunRecord> results);

// Tabular renderings. Rows are ordered by output, then parameter name; CSV
// values are written with 17 significant digits.
std::string sobol_csv(const SobolResult& result);
std::string local_csv(const LocalSensitivityResult& result);
std::string moments_csv(const MomentResult& result);
std::string sobol_text(const SobolResult& result);
std::string local_text(const LocalSensitivityResult& result);
std::string moments_text(const MomentResult& result);

// Grouped horizontal bars (S and ST per parameter), one panel per output.
std::string sobol_svg(const SobolResult& result);
std::string local_svg(const LocalSensitivityResult& result);
std::string moments_svg(const MomentResult& result);

}  // namespace sensfarm
