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

#include "sensfarm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "sensfarm/error.hpp"
#include "svg.hpp"

namespace sensfarm {

namespace {

using RecordIndex = std::map<RunId, const RunRecord*>;

RecordIndex index_records(std::span<const RunRecord> results) {
  RecordIndex index;
  for (const auto& r : results) {
    if (r.state != RunState::kCompleted || !r.outputs) continue;
    index.emplace(r.run_id, &r);
  }
  return index;
}

const ValueMap& outputs_of(const RecordIndex& index, RunId run_id) {
  auto it = index.find(run_id);
  if (it == index.end()) throw Error(ErrorCode::kMissingRun, "run " + std::to_string(run_id) + " not completed");
  return *it->second->outputs;
}

std::vector<std::string> output_names(const ValueMap& outputs) {
  std::vector<std::string> names;
  for (const auto& [k, v] : outputs) names.push_back(k);
  return names;
}

double output_value(const ValueMap& outputs, const std::string& name, RunId run_id) {
  auto it = outputs.find(name);
  if (it == outputs.end()) {
    throw Error(ErrorCode::kOutputKeyMismatch, "run " + std::to_string(run_id) + " lacks output " + name);
  }
  return it->second;
}

struct SaltelliColumns {
  std::vector<double> a, b;
  std::vector<std::vector<double>> ab;  // [i][j]
};

struct Estimate {
  bool zero_variance = false;
  double variance = 0.0;
  std::vector<double> first, total;
};

Estimate estimate(const SaltelliColumns& f, std::span<const std::size_t> rows) {
  const std::size_t n = rows.size();
  const std::size_t d = f.ab.size();
  Estimate e;
  double mean = 0.0, max_abs = 0.0;
  for (std::size_t j : rows) {
    mean += f.a[j] + f.b[j];
    max_abs = std::max({max_abs, std::abs(f.a[j]), std::abs(f.b[j])});
  }
  mean /= static_cast<double>(2 * n);
  double ss = 0.0;
  for (std::size_t j : rows) {
    ss += (f.a[j] - mean) * (f.a[j] - mean) + (f.b[j] - mean) * (f.b[j] - mean);
  }
  e.variance = n > 0 ? ss / static_cast<double>(2 * n - 1) : 0.0;
  const double floor = 1e-12 * max_abs;
  if (!(e.variance > floor * floor)) {
    e.zero_variance = true;
    return e;
  }
  e.first.resize(d);
  e.total.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0, st = 0.0;
    for (std::size_t j : rows) {
      const double fab = f.ab[i][j];
      s += f.b[j] * (fab - f.a[j]);
      st += (f.a[j] - fab) * (f.a[j] - fab);
    }
    e.first[i] = s / static_cast<double>(n) / e.variance;
    e.total[i] = st / static_cast<double>(2 * n) / e.variance;
  }
  return e;
}

// Nearest-rank percentile of a sorted vector, q in (0, 1].
double nearest_rank(const std::vector<double>& sorted, double q) {
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fixed(double v, int width = 10, int precision = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%*.*f", width, precision, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

template <typename T>
std::vector<const T*> by_parameter(const std::vector<T>& indices) {
  std::vector<const T*> out;
  for (const auto& i : indices) out.push_back(&i);
  std::sort(out.begin(), out.end(), [](const T* x, const T* y) { return x->parameter < y->parameter; });
  return out;
}

}  // namespace

SobolResult sobol_indices(const SaltelliDesign& design, std::span<const RunRecord> results,
                          std::size_t bootstrap_n, std::uint64_t seed) {
  const RecordIndex index = index_records(results);
  const std::size_t n = design.base_count();
  const std::size_t d = design.dimension();
  for (std::size_t r = 0; r < design.total_runs(); ++r) outputs_of(index, static_cast<RunId>(r));

  SobolResult result;
  result.base_count = n;
  result.bootstrap_n = bootstrap_n;
  const auto names = output_names(outputs_of(index, 0));

  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});

  for (const auto& name : names) {
    SaltelliColumns f;
    f.a.resize(n);
    f.b.resize(n);
    f.ab.assign(d, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
      const RunId ida = design.run_id({SaltelliMatrix::kA, j, 0});
      const RunId idb = design.run_id({SaltelliMatrix::kB, j, 0});
      f.a[j] = output_value(outputs_of(index, ida), name, ida);
      f.b[j] = output_value(outputs_of(index, idb), name, idb);
      for (std::size_t i = 0; i < d; ++i) {
        const RunId id = design.run_id({SaltelliMatrix::kAB, j, i});
        f.ab[i][j] = output_value(outputs_of(index, id), name, id);
      }
    }

    SobolOutput out;
    out.output = name;
    const Estimate point = estimate(f, all_rows);
    out.variance = point.variance;
    out.zero_variance = point.zero_variance;
    if (!point.zero_variance) {
      std::vector<std::vector<double>> boot_first(d), boot_total(d);
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<std::size_t> rows(n);
      for (std::size_t b = 0; b < bootstrap_n; ++b) {
        for (auto& r : rows) r = pick(rng);
        const Estimate e = estimate(f, rows);
        if (e.zero_variance) continue;
        for (std::size_t i = 0; i < d; ++i) {
          boot_first[i].push_back(e.first[i]);
          boot_total[i].push_back(e.total[i]);
        }
      }
      for (std::size_t i = 0; i < d; ++i) {
        SobolIndex idx{design.varied_names()[i], point.first[i], point.total[i], 0.0, 0.0};
        if (!boot_first[i].empty()) {
          std::sort(boot_first[i].begin(), boot_first[i].end());
          std::sort(boot_total[i].begin(), boot_total[i].end());
          idx.first_ci = 0.5 * (nearest_rank(boot_first[i], 0.975) - nearest_rank(boot_first[i], 0.025));
          idx.total_ci = 0.5 * (nearest_rank(boot_total[i], 0.975) - nearest_rank(boot_total[i], 0.025));
        }
        out.indices.push_back(std::move(idx));
      }
    }
    result.outputs.push_back(std::move(out));
  }
  return result;
}

LocalSensitivityResult local_sensitivity(const PerturbationDesign& design,
                                         std::span<const RunRecord> results) {
  const RecordIndex index = index_records(results);
  for (std::size_t r = 0; r < design.total_runs(); ++r) outputs_of(index, static_cast<RunId>(r));
  LocalSensitivityResult result;
  for (const auto& name : output_names(outputs_of(index, 0))) {
    LocalOutput out{name, {}};
    for (std::size_t i = 0; i < design.varied_names.size(); ++i) {
      const RunId plus = design.run_id({PerturbationRole::kPlus, i});
      const RunId minus = design.run_id({PerturbationRole::kMinus, i});
      const double yp = output_value(outputs_of(index, plus), name, plus);
      const double ym = output_value(outputs_of(index, minus), name, minus);
      out.indices.push_back({design.varied_names[i], (yp - ym) / (2.0 * design.steps[i]), design.steps[i]});
    }
    result.outputs.push_back(std::move(out));
  }
  return result;
}

MomentResult quadrature_moments(const QuadratureDesign& design, std::span<const RunRecord> results) {
  const RecordIndex index = index_records(results);
  const std::size_t n = design.weights.size();
  if (n == 0) throw Error(ErrorCode::kNoData, "design has no nodes");
  for (std::size_t r = 0; r < n; ++r) outputs_of(index, static_cast<RunId>(r));
  MomentResult result;
  for (const auto& name : output_names(outputs_of(index, 0))) {
    std::vector<double> f(n);
    for (std::size_t r = 0; r < n; ++r) {
      f[r] = output_value(outputs_of(index, static_cast<RunId>(r)), name, static_cast<RunId>(r));
    }
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += design.weights[r] * f[r];
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += design.weights[r] * (f[r] - mean) * (f[r] - mean);
    result.outputs.push_back({name, mean, std::max(var, 0.0)});
  }
  return result;
}

std::string sobol_csv(const SobolResult& result) {
  std::string out = "output,parameter,S,S_ci,ST,ST_ci,variance,N,status\n";
  for (const auto& o : result.outputs) {
    if (o.zero_variance) {
      out += o.output + ",,,,,," + g17(o.variance) + "," + std::to_string(result.base_count) +
             ",zero_variance\n";
      continue;
    }
    for (const auto* i : by_parameter(o.indices)) {
      out += o.output + "," + i->parameter + "," + g17(i->first) + "," + g17(i->first_ci) + "," +
             g17(i->total) + "," + g17(i->total_ci) + "," + g17(o.variance) + "," +
             std::to_string(result.base_count) + ",ok\n";
    }
  }
  return out;
}

std::string local_csv(const LocalSensitivityResult& result) {
  std::string out = "output,parameter,derivative,step\n";
  for (const auto& o : result.outputs) {
    for (const auto* i : by_parameter(o.indices)) {
      out += o.output + "," + i->parameter + "," + g17(i->derivative) + "," + g17(i->step) + "\n";
    }
  }
  return out;
}

std::string moments_csv(const MomentResult& result) {
  std::string out = "output,mean,variance\n";
  for (const auto& o : result.outputs) out += o.output + "," + g17(o.mean) + "," + g17(o.variance) + "\n";
  return out;
}

std::string sobol_text(const SobolResult& result) {
  std::ostringstream out;
  for (const auto& o : result.outputs) {
    out << "output " << o.output << " (N=" << result.base_count << ", variance=" << o.variance << ")\n";
    if (o.zero_variance) {
      out << "  zero variance: indices undefined\n";
      continue;
    }
    out << "  " << pad("parameter", 16) << pad("S", 10) << pad("+/-", 10) << pad("ST", 10) << "+/-\n";
    for (const auto* i : by_parameter(o.indices)) {
      out << "  " << pad(i->parameter, 16) << fixed(i->first, -10) << fixed(i->first_ci, -10)
          << fixed(i->total, -10) << fixed(i->total_ci, 0) << "\n";
    }
  }
  return out.str();
}

std::string local_text(const LocalSensitivityResult& result) {
  std::ostringstream out;
  for (const auto& o : result.outputs) {
    out << "output " << o.output << "\n  " << pad("parameter", 16) << pad("dY/dX", 16) << "step\n";
    for (const auto* i : by_parameter(o.indices)) {
      out << "  " << pad(i->parameter, 16) << pad(g17(i->derivative), 16) << g17(i->step) << "\n";
    }
  }
  return out.str();
}

std::string moments_text(const MomentResult& result) {
  std::ostringstream out;
  out << pad("output", 16) << pad("mean", 24) << "variance\n";
  for (const auto& o : result.outputs) out << pad(o.output, 16) << pad(g17(o.mean), 24) << g17(o.variance) << "\n";
  return out.str();
}

std::string sobol_svg(const SobolResult& result) {
  svg::Document doc;
  if (result.outputs.empty()) doc.add_note("no outputs");
  for (const auto& o : result.outputs) {
    if (o.zero_variance) {
      doc.add_note(o.output + ": zero variance, indices undefined");
      continue;
    }
    svg::BarPanel panel{"Sobol indices: " + o.output, {"S", "ST"}, {}};
    for (const auto* i : by_parameter(o.indices)) panel.groups.push_back({i->parameter, {i->first, i->total}});
    doc.add(panel);
  }
  return doc.str();
}

std::string local_svg(const LocalSensitivityResult& result) {
  svg::Document doc;
  if (result.outputs.empty()) doc.add_note("no outputs");
  for (const auto& o : result.outputs) {
    svg::BarPanel panel{"Local derivatives: " + o.output, {"dY/dX"}, {}};
    for (const auto* i : by_parameter(o.indices)) panel.groups.push_back({i->parameter, {i->derivative}});
    doc.add(panel);
  }
  return doc.str();
}

std::string moments_svg(const MomentResult& result) {
  svg::Document doc;
  svg::BarPanel panel{"Quadrature moments", {"mean", "variance"}, {}};
  for (const auto& o : result.outputs) panel.groups.push_back({o.output, {o.mean, o.variance}});
  if (panel.groups.empty()) {
    doc.add_note("no outputs");
  } else {
    doc.add(panel);
  }
  return doc.str();
}

}  // namespace sensfarm
