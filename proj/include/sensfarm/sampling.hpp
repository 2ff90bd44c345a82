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

#include "json.hpp"
#include "sensfarm/campaign.hpp"

namespace sensfarm {

// Gray-code ordered Sobol sequence (Joe-Kuo direction numbers, 32-bit).
class SobolSequence {
 public:
  static std::size_t max_dimension();

  explicit SobolSequence(std::size_t dimension);

  std::size_t dimension() const { return dimension_; }
  // Index of the point the next call to next() returns.
  std::uint64_t index() const { return index_; }

  // Repositions the generator so that the next point is `index`.
  void seek(std::uint64_t index);
  std::vector<double> next();

 private:
  std::size_t dimension_;
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> directions_;  // dimension_ x 32, row-major
  std::vector<std::uint32_t> state_;
};

// `count` consecutive points starting at sequence index `skip`.
std::vector<std::vector<double>> sobol_points(std::size_t dim, std::size_t count,
                                              std::uint64_t skip);

// Standard normal quantile; absolute error below 1e-9 on (0, 1).
double inverse_normal_cdf(double p);

// Maps a point of [0,1)^d onto the distributions of `specs` by inverse CDF.
std::vector<double> transform_point(std::span<const double> u,
                                    std::span<const ParameterSpec> specs);

// ---------------------------------------------------------------------------
// Saltelli design (first-order and total indices, N(d+2) runs).
//
// Runs are laid out in blocks of d+2 per base row j:
//   run_id = j*(d+2) + 0      -> A(j)
//   run_id = j*(d+2) + 1 + i  -> AB(i, j)
//   run_id = j*(d+2) + d + 1  -> B(j)

enum class SaltelliMatrix { kA, kB, kAB };

struct SaltelliSlot {
  SaltelliMatrix matrix = SaltelliMatrix::kA;
  std::size_t row = 0;     // j in [0, N)
  std::size_t column = 0;  // i in [0, d); only meaningful for kAB

  friend bool operator==(const SaltelliSlot&, const SaltelliSlot&) = default;
};

class SaltelliDesign {
 public:
  SaltelliDesign(std::size_t base_count, std::vector<std::string> varied_names);

  std::size_t base_count() const { return base_count_; }
  const std::vector<std::string>& varied_names() const { return varied_names_; }
  std::size_t dimension() const { return varied_names_.size(); }
  std::size_t total_runs() const { return base_count_ * (dimension() + 2); }

  SaltelliSlot slot(RunId run_id) const;
  RunId run_id(const SaltelliSlot& slot) const;

  nlohmann::json to_json() const;
  static SaltelliDesign from_json(const nlohmann::json& j);

 private:
  std::size_t base_count_;
  std::vector<std::string> varied_names_;
};

struct SaltelliSamples {
  std::vector<Sample> samples;
  SaltelliDesign design;
  std::vector<std::string> warnings;
};

// A comes from Sobol dimensions [0, d), B from [d, 2d) of one 2d-dimensional
// sequence starting at index `skip`. Fixed parameters sit at their defaults.
SaltelliSamples saltelli_design(std::span<const ParameterSpec> specs,
                                const std::vector<std::string>& varied_names,
                                std::size_t base_count, std::uint64_t skip = 1);

std::vector<Sample> monte_carlo(std::span<const ParameterSpec> specs,
                                const std::vector<std::string>& varied_names,
                                std::size_t count, std::uint64_t seed,
                                bool allow_empty = false);

// ---------------------------------------------------------------------------
// Tensor-grid stochastic collocation.

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // normalized to sum 1
};

// (n)-point Gauss-Legendre on [-1, 1], weights against density 1/2.
QuadratureRule gauss_legendre(std::size_t n);
// (n)-point Gauss-Hermite for the standard normal density (probabilists').
QuadratureRule gauss_hermite(std::size_t n);

struct QuadratureDesign {
  std::vector<Sample> nodes;
  std::vector<double> weights;  // one per node, summing to 1
  std::size_t order = 0;
  std::vector<std::string> varied_names;

  nlohmann::json to_json() const;
  static QuadratureDesign from_json(const nlohmann::json& j);
  // Weight of the node with this run_id.
  double weight(RunId run_id) const;
};

QuadratureDesign stochastic_collocation(std::span<const ParameterSpec> specs,
                                        const std::vector<std::string>& varied_names,
                                        std::size_t order);

// ---------------------------------------------------------------------------
// One-at-a-time perturbation around a reference point.
//
// run 0 is the center; run 1+2i is plus(i); run 2+2i is minus(i).

enum class PerturbationRole { kCenter, kPlus, kMinus };

struct PerturbationSlot {
  PerturbationRole role = PerturbationRole::kCenter;
  std::size_t column = 0;

  friend bool operator==(const PerturbationSlot&, const PerturbationSlot&) = default;
};

struct PerturbationDesign {
  Sample reference;
  std::vector<std::string> varied_names;
  std::vector<double> steps;  // absolute step per varied parameter

  std::size_t total_runs() const { return 2 * varied_names.size() + 1; }
  PerturbationSlot slot(RunId run_id) const;
  RunId run_id(const PerturbationSlot& slot) const;

  nlohmann::json to_json() const;
  static PerturbationDesign from_json(const nlohmann::json& j);
};

struct PerturbationSamples {
  std::vector<Sample> samples;
  PerturbationDesign design;
};

// Step for parameter i is rel_step*|reference_i|, or rel_step when the
// reference coordinate is zero.
PerturbationSamples perturbation_design(std::span<const ParameterSpec> specs,
                                        const ValueMap& reference,
                                        const std::vector<std::string>& varied_names,
                                        double rel_step);

// Defaults of every parameter.
ValueMap default_point(std::span<const ParameterSpec> specs);

}  // namespace sensfarm
