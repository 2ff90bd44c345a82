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

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "sensfarm/error.hpp"
#include "sensfarm/sampling.hpp"

namespace sensfarm {

using json = nlohmann::json;

namespace {

// Lower-tail quantile for p in (0, 0.5]: Acklam's rational approximation
// followed by one Halley step against erfc.
double lower_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

const ParameterSpec& find_spec(std::span<const ParameterSpec> specs, const std::string& name) {
  for (const auto& s : specs) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
}

std::vector<ParameterSpec> varied_specs(std::span<const ParameterSpec> specs,
                                        const std::vector<std::string>& varied_names) {
  std::set<std::string> seen;
  std::vector<ParameterSpec> out;
  for (const auto& name : varied_names) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kInvalidArgument, "parameter '" + name + "' varied twice");
    }
    out.push_back(find_spec(specs, name));
  }
  return out;
}

Sample make_sample(RunId run_id, const ValueMap& base, const std::vector<std::string>& names,
                   std::span<const double> values) {
  Sample s{run_id, base};
  for (std::size_t i = 0; i < names.size(); ++i) s.inputs[names[i]] = values[i];
  return s;
}

QuadratureRule golub_welsch(const Eigen::VectorXd& diagonal, const Eigen::VectorXd& offdiag) {
  const auto n = diagonal.size();
  QuadratureRule rule;
  if (n == 1) {
    rule.nodes = {diagonal[0]};
    rule.weights = {1.0};
    return rule;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diagonal, offdiag, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidArgument, "quadrature eigen-solve failed");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v0 = solver.eigenvectors()(0, i);
    rule.nodes.push_back(solver.eigenvalues()[i]);
    rule.weights.push_back(v0 * v0);
    total += v0 * v0;
  }
  for (auto& w : rule.weights) w /= total;
  // The rules used here are symmetric about zero; enforce it exactly.
  for (std::size_t i = 0; i < rule.nodes.size() / 2; ++i) {
    const std::size_t j = rule.nodes.size() - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (rule.nodes.size() % 2 == 1) rule.nodes[rule.nodes.size() / 2] = 0.0;
  return rule;
}

}  // namespace

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::kInvalidArgument, "probability outside [0, 1]");
  }
  return p <= 0.5 ? lower_quantile(p) : -lower_quantile(1.0 - p);
}

std::vector<double> transform_point(std::span<const double> u,
                                    std::span<const ParameterSpec> specs) {
  if (u.size() != specs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "point dimension does not match parameters");
  }
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] >= 0.0 && u[i] < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "coordinate outside [0, 1)");
    }
    if (const auto* uni = std::get_if<Uniform>(&specs[i].distribution)) {
      out[i] = uni->lo + u[i] * (uni->hi - uni->lo);
    } else {
      const auto& n = std::get<Normal>(specs[i].distribution);
      if (u[i] == 0.0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "u = 0 maps to -inf for Normal '" + specs[i].name + "'");
      }
      out[i] = n.mean + n.stddev * inverse_normal_cdf(u[i]);
    }
  }
  return out;
}

ValueMap default_point(std::span<const ParameterSpec> specs) {
  ValueMap out;
  for (const auto& s : specs) out[s.name] = s.default_value;
  return out;
}

// --- Saltelli ---------------------------------------------------------------

SaltelliDesign::SaltelliDesign(std::size_t base_count, std::vector<std::string> varied_names)
    : base_count_(base_count), varied_names_(std::move(varied_names)) {
  if (base_count_ == 0) throw Error(ErrorCode::kInvalidArgument, "base count must be positive");
  if (varied_names_.empty()) throw Error(ErrorCode::kInvalidArgument, "no varied parameters");
}

SaltelliSlot SaltelliDesign::slot(RunId run_id) const {
  if (run_id < 0 || static_cast<std::size_t>(run_id) >= total_runs()) {
    throw Error(ErrorCode::kUnknownRunId, std::to_string(run_id));
  }
  const std::size_t block = dimension() + 2;
  const std::size_t row = static_cast<std::size_t>(run_id) / block;
  const std::size_t k = static_cast<std::size_t>(run_id) % block;
  if (k == 0) return {SaltelliMatrix::kA, row, 0};
  if (k == block - 1) return {SaltelliMatrix::kB, row, 0};
  return {SaltelliMatrix::kAB, row, k - 1};
}

RunId SaltelliDesign::run_id(const SaltelliSlot& slot) const {
  if (slot.row >= base_count_ ||
      (slot.matrix == SaltelliMatrix::kAB && slot.column >= dimension())) {
    throw Error(ErrorCode::kInvalidArgument, "slot outside design");
  }
  const std::size_t block = dimension() + 2;
  std::size_t k = 0;
  switch (slot.matrix) {
    case SaltelliMatrix::kA: k = 0; break;
    case SaltelliMatrix::kAB: k = 1 + slot.column; break;
    case SaltelliMatrix::kB: k = block - 1; break;
  }
  return static_cast<RunId>(slot.row * block + k);
}

json SaltelliDesign::to_json() const {
  return {{"kind", "saltelli"}, {"base_count", base_count_}, {"varied_names", varied_names_}};
}

SaltelliDesign SaltelliDesign::from_json(const json& j) {
  if (j.at("kind") != "saltelli") throw Error(ErrorCode::kSchemaViolation, "not a Saltelli design");
  return SaltelliDesign(j.at("base_count").get<std::size_t>(),
                        j.at("varied_names").get<std::vector<std::string>>());
}

SaltelliSamples saltelli_design(std::span<const ParameterSpec> specs,
                                const std::vector<std::string>& varied_names,
                                std::size_t base_count, std::uint64_t skip) {
  const auto varied = varied_specs(specs, varied_names);
  SaltelliSamples out{{}, SaltelliDesign(base_count, varied_names), {}};
  if (!std::has_single_bit(base_count)) {
    out.warnings.push_back("base count " + std::to_string(base_count) +
                           " is not a power of two; Sobol balance is lost");
  }
  const std::size_t d = varied.size();
  const ValueMap base = default_point(specs);
  SobolSequence seq(2 * d);
  seq.seek(skip);
  out.samples.reserve(out.design.total_runs());
  std::vector<double> ab(d);
  for (std::size_t j = 0; j < base_count; ++j) {
    const auto u = seq.next();
    const auto a = transform_point(std::span(u).first(d), varied);
    const auto b = transform_point(std::span(u).subspan(d), varied);
    out.samples.push_back(
        make_sample(out.design.run_id({SaltelliMatrix::kA, j, 0}), base, varied_names, a));
    for (std::size_t i = 0; i < d; ++i) {
      ab = a;
      ab[i] = b[i];
      out.samples.push_back(
          make_sample(out.design.run_id({SaltelliMatrix::kAB, j, i}), base, varied_names, ab));
    }
    out.samples.push_back(
        make_sample(out.design.run_id({SaltelliMatrix::kB, j, 0}), base, varied_names, b));
  }
  return out;
}

// --- Monte Carlo ------------------------------------------------------------

std::vector<Sample> monte_carlo(std::span<const ParameterSpec> specs,
                                const std::vector<std::string>& varied_names,
                                std::size_t count, std::uint64_t seed, bool allow_empty) {
  if (count == 0 && !allow_empty) {
    throw Error(ErrorCode::kInvalidArgument, "Monte Carlo sample count must be positive");
  }
  const auto varied = varied_specs(specs, varied_names);
  const ValueMap base = default_point(specs);
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  out.reserve(count);
  std::vector<double> u(varied.size());
  for (std::size_t n = 0; n < count; ++n) {
    // Midpoints of 2^-53 cells: strictly inside (0, 1).
    for (auto& x : u) x = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    out.push_back(make_sample(static_cast<RunId>(n), base, varied_names,
                              transform_point(u, varied)));
  }
  return out;
}

// --- Stochastic collocation -------------------------------------------------

QuadratureRule gauss_legendre(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "rule needs at least one node");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd off(static_cast<Eigen::Index>(n > 1 ? n - 1 : 0));
  for (std::size_t k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    off[static_cast<Eigen::Index>(k - 1)] = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  return golub_welsch(diag, off);
}

QuadratureRule gauss_hermite(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "rule needs at least one node");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd off(static_cast<Eigen::Index>(n > 1 ? n - 1 : 0));
  for (std::size_t k = 1; k < n; ++k) {
    off[static_cast<Eigen::Index>(k - 1)] = std::sqrt(static_cast<double>(k));
  }
  return golub_welsch(diag, off);
}

json QuadratureDesign::to_json() const {
  return {{"kind", "collocation"},
          {"order", order},
          {"varied_names", varied_names},
          {"weights", weights}};
}

QuadratureDesign QuadratureDesign::from_json(const json& j) {
  if (j.at("kind") != "collocation") {
    throw Error(ErrorCode::kSchemaViolation, "not a collocation design");
  }
  QuadratureDesign d;
  d.order = j.at("order").get<std::size_t>();
  d.varied_names = j.at("varied_names").get<std::vector<std::string>>();
  d.weights = j.at("weights").get<std::vector<double>>();
  return d;
}

double QuadratureDesign::weight(RunId run_id) const {
  if (run_id < 0 || static_cast<std::size_t>(run_id) >= weights.size()) {
    throw Error(ErrorCode::kUnknownRunId, std::to_string(run_id));
  }
  return weights[static_cast<std::size_t>(run_id)];
}

QuadratureDesign stochastic_collocation(std::span<const ParameterSpec> specs,
                                        const std::vector<std::string>& varied_names,
                                        std::size_t order) {
  if (order < 1) throw Error(ErrorCode::kInvalidArgument, "collocation order must be >= 1");
  const auto varied = varied_specs(specs, varied_names);
  if (varied.empty()) throw Error(ErrorCode::kInvalidArgument, "no varied parameters");
  const std::size_t per_dim = order + 1;

  std::vector<QuadratureRule> rules;
  for (const auto& s : varied) {
    if (const auto* u = std::get_if<Uniform>(&s.distribution)) {
      auto rule = gauss_legendre(per_dim);
      for (auto& x : rule.nodes) x = u->lo + 0.5 * (x + 1.0) * (u->hi - u->lo);
      rules.push_back(std::move(rule));
    } else if (const auto* n = std::get_if<Normal>(&s.distribution)) {
      auto rule = gauss_hermite(per_dim);
      for (auto& x : rule.nodes) x = n->mean + n->stddev * x;
      rules.push_back(std::move(rule));
    } else {
      throw Error(ErrorCode::kUnsupportedDistribution, s.name);
    }
  }

  QuadratureDesign design;
  design.order = order;
  design.varied_names = varied_names;
  const ValueMap base = default_point(specs);
  const std::size_t d = varied.size();
  std::vector<std::size_t> index(d, 0);
  std::vector<double> values(d);
  double total = 0.0;
  for (RunId run_id = 0;; ++run_id) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      values[k] = rules[k].nodes[index[k]];
      w *= rules[k].weights[index[k]];
    }
    design.nodes.push_back(make_sample(run_id, base, varied_names, values));
    design.weights.push_back(w);
    total += w;
    // Odometer increment, last dimension fastest.
    std::size_t k = d;
    while (k > 0 && ++index[k - 1] == per_dim) index[--k] = 0;
    if (k == 0) break;
  }
  for (auto& w : design.weights) w /= total;
  return design;
}

// --- Perturbation -----------------------------------------------------------

PerturbationSlot PerturbationDesign::slot(RunId run_id) const {
  if (run_id < 0 || static_cast<std::size_t>(run_id) >= total_runs()) {
    throw Error(ErrorCode::kUnknownRunId, std::to_string(run_id));
  }
  if (run_id == 0) return {PerturbationRole::kCenter, 0};
  const auto k = static_cast<std::size_t>(run_id - 1);
  return {k % 2 == 0 ? PerturbationRole::kPlus : PerturbationRole::kMinus, k / 2};
}

RunId PerturbationDesign::run_id(const PerturbationSlot& slot) const {
  switch (slot.role) {
    case PerturbationRole::kCenter: return 0;
    case PerturbationRole::kPlus: return static_cast<RunId>(1 + 2 * slot.column);
    case PerturbationRole::kMinus: return static_cast<RunId>(2 + 2 * slot.column);
  }
  return 0;
}

json PerturbationDesign::to_json() const {
  json ref = json::object();
  for (const auto& [k, v] : reference.inputs) ref[k] = v;
  return {{"kind", "perturbation"},
          {"reference", ref},
          {"varied_names", varied_names},
          {"steps", steps}};
}

PerturbationDesign PerturbationDesign::from_json(const json& j) {
  if (j.at("kind") != "perturbation") {
    throw Error(ErrorCode::kSchemaViolation, "not a perturbation design");
  }
  PerturbationDesign d;
  d.reference.run_id = 0;
  for (const auto& [k, v] : j.at("reference").items()) d.reference.inputs[k] = v.get<double>();
  d.varied_names = j.at("varied_names").get<std::vector<std::string>>();
  d.steps = j.at("steps").get<std::vector<double>>();
  if (d.steps.size() != d.varied_names.size()) {
    throw Error(ErrorCode::kSchemaViolation, "steps and varied_names differ in length");
  }
  return d;
}

PerturbationSamples perturbation_design(std::span<const ParameterSpec> specs,
                                        const ValueMap& reference,
                                        const std::vector<std::string>& varied_names,
                                        double rel_step) {
  if (!(rel_step > 0.0 && std::isfinite(rel_step))) {
    throw Error(ErrorCode::kInvalidArgument, "rel_step must be positive");
  }
  varied_specs(specs, varied_names);
  if (reference.size() != specs.size()) {
    throw Error(ErrorCode::kInputKeyMismatch, "reference must cover every parameter");
  }
  for (const auto& s : specs) {
    if (!reference.count(s.name)) throw Error(ErrorCode::kInputKeyMismatch, s.name);
  }

  PerturbationSamples out;
  out.design.reference = {0, reference};
  out.design.varied_names = varied_names;
  out.samples.push_back(out.design.reference);
  for (std::size_t i = 0; i < varied_names.size(); ++i) {
    const std::string& name = varied_names[i];
    const double x = reference.at(name);
    const double step = x != 0.0 ? rel_step * std::abs(x) : rel_step;
    out.design.steps.push_back(step);
    Sample plus{out.design.run_id({PerturbationRole::kPlus, i}), reference};
    plus.inputs[name] = x + step;
    Sample minus{out.design.run_id({PerturbationRole::kMinus, i}), reference};
    minus.inputs[name] = x - step;
    out.samples.push_back(std::move(plus));
    out.samples.push_back(std::move(minus));
  }
  return out;
}

}  // namespace sensfarm
