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

#include <bit>
#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "sensfarm/error.hpp"
#include "sensfarm/sampling.hpp"

using namespace sensfarm;

namespace {

// Textbook Bratley-Fox construction of one Sobol coordinate, written
// independently of the library: direction numbers from the primitive
// polynomial recurrence, points by XOR over the Gray code of n.
struct ReferenceSobol {
  std::vector<std::uint32_t> v;  // v[k] for bit k, scaled by 2^32

  ReferenceSobol(unsigned degree, std::uint32_t a, std::vector<std::uint32_t> m) {
    if (degree == 0) {
      for (unsigned k = 0; k < 32; ++k) v.push_back(1u << (31 - k));
      return;
    }
    for (unsigned k = degree; k < 32; ++k) {
      std::uint32_t next = m[k - degree] ^ (m[k - degree] << degree);
      for (unsigned i = 1; i < degree; ++i) {
        if ((a >> (degree - 1 - i)) & 1u) next ^= m[k - i] << i;
      }
      m.push_back(next);
    }
    for (unsigned k = 0; k < 32; ++k) v.push_back(m[k] << (31 - k));
  }

  double at(std::uint64_t n) const {
    const std::uint64_t gray = n ^ (n >> 1);
    std::uint32_t x = 0;
    for (unsigned k = 0; k < 32; ++k) {
      if ((gray >> k) & 1u) x ^= v[k];
    }
    return static_cast<double>(x) / 4294967296.0;
  }
};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double bisect_quantile(double p) {
  // Upper half by symmetry; 1 - p is exact there.
  if (p > 0.5) return -bisect_quantile(1.0 - p);
  double lo = -40.0, hi = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<ParameterSpec> uniform_specs(std::size_t d) {
  std::vector<ParameterSpec> specs;
  for (std::size_t i = 0; i < d; ++i) {
    specs.push_back({"p" + std::to_string(i), Uniform{-1.0 - double(i), 2.0 + double(i)}, 0.5});
  }
  return specs;
}

std::vector<std::string> names_of(const std::vector<ParameterSpec>& specs) {
  std::vector<std::string> out;
  for (const auto& s : specs) out.push_back(s.name);
  return out;
}

double odd_double_factorial(int k) {
  double r = 1.0;
  for (int i = k - 1; i > 1; i -= 2) r *= i;
  return r;
}

}  // namespace

TEST_SUITE("sampling") {
  TEST_CASE("first Sobol coordinate after skipping the origin") {
    const auto pts = sobol_points(1, 3, 1);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0][0] == 0.5);
    CHECK(pts[1][0] == 0.75);
    CHECK(pts[2][0] == 0.25);
  }

  TEST_CASE("two-dimensional prefix matches the unscrambled reference generator") {
    // First eight points of the unscrambled Joe-Kuo sequence in Gray-code
    // order, as produced by scipy.stats.qmc.Sobol(2, scramble=False).
    const double expected[8][2] = {{0, 0},       {.5, .5},     {.75, .25},   {.25, .75},
                                   {.375, .375}, {.875, .875}, {.625, .125}, {.125, .625}};
    SobolSequence seq(2);
    for (const auto& e : expected) {
      const auto p = seq.next();
      CHECK(p[0] == e[0]);
      CHECK(p[1] == e[1]);
    }
  }

  TEST_CASE("library matches the Bratley-Fox recurrence on the first dimensions") {
    // Primitive polynomials and initial direction numbers of dimensions 2-6
    // in the Joe-Kuo table (degree, encoded coefficients, m_1..m_s).
    const std::vector<ReferenceSobol> ref = {
        ReferenceSobol(0, 0, {}),
        ReferenceSobol(1, 0, {1}),
        ReferenceSobol(2, 1, {1, 3}),
        ReferenceSobol(3, 1, {1, 3, 1}),
        ReferenceSobol(3, 2, {1, 1, 1}),
        ReferenceSobol(4, 1, {1, 1, 3, 3}),
    };
    SobolSequence seq(ref.size());
    for (std::uint64_t n = 0; n < 4096; ++n) {
      const auto p = seq.next();
      for (std::size_t d = 0; d < ref.size(); ++d) {
        REQUIRE_MESSAGE(p[d] == ref[d].at(n), "n=" << n << " d=" << d);
      }
    }
  }

  TEST_CASE("seek reproduces sequential generation") {
    SobolSequence a(7), b(7);
    for (int i = 0; i < 1000; ++i) a.next();
    b.seek(1000);
    CHECK(b.index() == 1000);
    for (int i = 0; i < 50; ++i) CHECK(a.next() == b.next());
  }

  TEST_CASE("every power-of-two prefix is stratified in each coordinate") {
    const std::size_t dim = 20;
    SobolSequence seq(dim);
    const std::size_t n = 1024;
    std::vector<std::vector<int>> bins(dim, std::vector<int>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = seq.next();
      for (std::size_t d = 0; d < dim; ++d) ++bins[d][static_cast<std::size_t>(p[d] * n)];
    }
    for (const auto& b : bins) {
      for (int c : b) CHECK(c == 1);
    }
  }

  TEST_CASE("Sobol argument errors") {
    CHECK_THROWS_AS(sobol_points(2, 0, 1), Error);
    try {
      SobolSequence seq(SobolSequence::max_dimension() + 1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUnsupportedDimension);
    }
    CHECK(SobolSequence::max_dimension() >= 84);
  }

  TEST_CASE("inverse normal CDF agrees with bisection on erfc") {
    for (double p : {1e-300, 1e-100, 1e-20, 1e-10, 1e-5, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.975002, 0.999,
                     1.0 - 1e-10}) {
      const double x = inverse_normal_cdf(p);
      CHECK_MESSAGE(std::abs(x - bisect_quantile(p)) <= 1e-9 * std::max(1.0, std::abs(x)), "p=" << p);
    }
    // Frozen from the bisection oracle above.
    CHECK(std::abs(inverse_normal_cdf(0.975002) - 1.9599982058538519) <= 1e-12);
    CHECK(std::abs(inverse_normal_cdf(0.975002) - 1.95996) <= 1e-4);
    CHECK(inverse_normal_cdf(0.5) == 0.0);
    CHECK_THROWS_AS(inverse_normal_cdf(1.5), Error);
  }

  TEST_CASE("transform maps unit coordinates through the marginals") {
    const std::vector<ParameterSpec> specs = {{"a", Uniform{-3.0, 5.0}, 0.0}, {"b", Normal{10.0, 2.0}, 0.0}};
    const std::vector<double> u = {0.25, 0.975002};
    const auto x = transform_point(u, specs);
    CHECK(x[0] == -1.0);
    CHECK(x[1] == doctest::Approx(10.0 + 2.0 * 1.95996).epsilon(1e-5));

    const std::vector<ParameterSpec> midpoints = {{"u", Uniform{0.0, 10.0}, 0.0}, {"n", Normal{2.0, 3.0}, 0.0}};
    const std::vector<double> half = {0.5, 0.5};
    CHECK(transform_point(half, midpoints) == std::vector<double>{5.0, 2.0});

    const std::vector<double> zero = {0.0, 0.5};
    CHECK(transform_point(zero, specs)[0] == -3.0);
    const std::vector<double> one = {1.0, 0.5};
    CHECK_THROWS_AS(transform_point(one, specs), Error);
    const std::vector<double> normal_zero = {0.5, 0.0};
    CHECK_THROWS_AS(transform_point(normal_zero, specs), Error);
    const std::vector<double> short_point = {0.5};
    CHECK_THROWS_AS(transform_point(short_point, specs), Error);
  }

  TEST_CASE("Saltelli design with three parameters and N=8 has 40 runs") {
    const auto specs = uniform_specs(3);
    const auto result = saltelli_design(specs, names_of(specs), 8);
    CHECK(result.samples.size() == 40);
    CHECK(result.design.total_runs() == 40);
    CHECK(result.warnings.empty());
    for (std::size_t k = 0; k < result.samples.size(); ++k) CHECK(result.samples[k].run_id == RunId(k));
  }

  TEST_CASE("Saltelli matrices are built from the two halves of the Sobol points") {
    const auto specs = uniform_specs(3);
    const auto names = names_of(specs);
    const std::size_t n = 16, d = 3;
    const auto result = saltelli_design(specs, names, n);
    const auto pts = sobol_points(2 * d, n, 1);
    for (std::size_t j = 0; j < n; ++j) {
      const std::vector<double> ua(pts[j].begin(), pts[j].begin() + d);
      const std::vector<double> ub(pts[j].begin() + d, pts[j].end());
      const auto a = transform_point(ua, specs);
      const auto b = transform_point(ub, specs);
      const auto& sa = result.samples[result.design.run_id({SaltelliMatrix::kA, j, 0})];
      const auto& sb = result.samples[result.design.run_id({SaltelliMatrix::kB, j, 0})];
      for (std::size_t i = 0; i < d; ++i) {
        CHECK(sa.inputs.at(names[i]) == a[i]);
        CHECK(sb.inputs.at(names[i]) == b[i]);
        const auto& ab = result.samples[result.design.run_id({SaltelliMatrix::kAB, j, i})];
        for (std::size_t c = 0; c < d; ++c) CHECK(ab.inputs.at(names[c]) == (c == i ? b[c] : a[c]));
      }
    }
  }

  TEST_CASE("fixed parameters keep their default value") {
    auto specs = uniform_specs(3);
    specs[1].default_value = 42.0;
    const auto result = saltelli_design(specs, {"p0", "p2"}, 4);
    CHECK(result.samples.size() == 16);
    for (const auto& s : result.samples) {
      CHECK(s.inputs.size() == 3);
      CHECK(s.inputs.at("p1") == 42.0);
    }
  }

  TEST_CASE("Saltelli warnings and errors") {
    const auto specs = uniform_specs(2);
    const auto result = saltelli_design(specs, names_of(specs), 6);
    CHECK(result.samples.size() == 24);
    CHECK(result.warnings.size() == 1);
    CHECK_THROWS_AS(saltelli_design(specs, names_of(specs), 0), Error);
    CHECK_THROWS_AS(saltelli_design(specs, {"nope"}, 4), Error);
    CHECK_THROWS_AS(saltelli_design(specs, {"p0", "p0"}, 4), Error);
    CHECK_THROWS_AS(result.design.slot(24), Error);
    CHECK_THROWS_AS(result.design.slot(-1), Error);
  }

  TEST_CASE("Saltelli design metadata round-trips through JSON") {
    const SaltelliDesign d(64, {"x", "y", "z"});
    const auto back = SaltelliDesign::from_json(d.to_json());
    CHECK(back.base_count() == 64);
    CHECK(back.varied_names() == d.varied_names());
  }

  TEST_CASE("Monte Carlo is reproducible under a fixed seed") {
    const auto specs = uniform_specs(4);
    const auto a = monte_carlo(specs, names_of(specs), 100, 7);
    const auto b = monte_carlo(specs, names_of(specs), 100, 7);
    const auto c = monte_carlo(specs, names_of(specs), 100, 8);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    for (const auto& s : a) {
      for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& u = std::get<Uniform>(specs[i].distribution);
        const double x = s.inputs.at(specs[i].name);
        CHECK(x >= u.lo);
        CHECK(x < u.hi);
      }
    }
    CHECK_THROWS_AS(monte_carlo(specs, names_of(specs), 0, 1), Error);
    CHECK(monte_carlo(specs, names_of(specs), 0, 1, true).empty());
  }

  TEST_CASE("two-point Gauss-Legendre rule") {
    const auto rule = gauss_legendre(2);
    REQUIRE(rule.nodes.size() == 2);
    CHECK(rule.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(rule.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(rule.weights[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rule.weights[1] == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("Gauss rules integrate monomials up to degree 2n-1 exactly") {
    for (std::size_t n = 1; n <= 12; ++n) {
      const auto legendre = gauss_legendre(n);
      const auto hermite = gauss_hermite(n);
      for (int k = 0; k <= int(2 * n - 1); ++k) {
        double ql = 0.0, qh = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          ql += legendre.weights[i] * std::pow(legendre.nodes[i], k);
          qh += hermite.weights[i] * std::pow(hermite.nodes[i], k);
          scale += hermite.weights[i] * std::abs(std::pow(hermite.nodes[i], k));
        }
        // Uniform(-1, 1) and standard normal moments.
        const double el = k % 2 ? 0.0 : 1.0 / (k + 1);
        const double eh = k % 2 ? 0.0 : odd_double_factorial(k);
        CHECK_MESSAGE(std::abs(ql - el) <= 1e-13, "legendre n=" << n << " k=" << k);
        CHECK_MESSAGE(std::abs(qh - eh) <= 1e-12 * std::max(1.0, scale), "hermite n=" << n << " k=" << k);
      }
    }
    CHECK_THROWS_AS(gauss_legendre(0), Error);
  }

  TEST_CASE("collocation with three parameters and order 9 yields 1000 nodes") {
    const auto specs = uniform_specs(3);
    const auto design = stochastic_collocation(specs, names_of(specs), 9);
    CHECK(design.nodes.size() == 1000);
    CHECK(design.weights.size() == 1000);
    double total = 0.0;
    for (double w : design.weights) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    std::set<ValueMap> distinct;
    for (const auto& s : design.nodes) distinct.insert(s.inputs);
    CHECK(distinct.size() == 1000);
  }

  TEST_CASE("collocation tensor grid runs the last parameter fastest") {
    const std::vector<ParameterSpec> specs = {{"a", Uniform{0.0, 1.0}, 0.0}, {"b", Normal{0.0, 1.0}, 0.0}};
    const auto design = stochastic_collocation(specs, {"a", "b"}, 1);
    REQUIRE(design.nodes.size() == 4);
    CHECK(design.nodes[0].inputs.at("a") == design.nodes[1].inputs.at("a"));
    CHECK(design.nodes[0].inputs.at("b") == doctest::Approx(-1.0));
    CHECK(design.nodes[1].inputs.at("b") == doctest::Approx(1.0));
    CHECK(design.nodes[2].inputs.at("a") > design.nodes[0].inputs.at("a"));
    const auto back = QuadratureDesign::from_json(design.to_json());
    CHECK(back.weights == design.weights);
    CHECK(back.weight(3) == design.weights[3]);
    CHECK_THROWS_AS(back.weight(4), Error);
  }

  TEST_CASE("perturbation design places a symmetric pair per parameter") {
    const std::vector<ParameterSpec> specs = {
        {"a", Uniform{0.0, 4.0}, 2.0}, {"b", Uniform{-1.0, 1.0}, 0.0}, {"c", Normal{3.0, 1.0}, 3.0}};
    const auto ref = default_point(specs);
    const auto r = perturbation_design(specs, ref, {"a", "b"}, 0.01);
    REQUIRE(r.samples.size() == 5);
    CHECK(r.samples[0].inputs == ref);
    CHECK(r.design.steps == std::vector<double>{0.02, 0.01});
    CHECK(r.samples[1].inputs.at("a") == 2.02);
    CHECK(r.samples[2].inputs.at("a") == 1.98);
    CHECK(r.samples[3].inputs.at("b") == 0.01);
    CHECK(r.samples[4].inputs.at("b") == -0.01);
    CHECK(r.samples[4].inputs.at("c") == 3.0);
    for (RunId id = 0; id < 5; ++id) CHECK(r.design.run_id(r.design.slot(id)) == id);
    CHECK_THROWS_AS(perturbation_design(specs, ref, {"a"}, 0.0), Error);
    CHECK_THROWS_AS(perturbation_design(specs, ValueMap{{"a", 1.0}}, {"a"}, 0.1), Error);
  }
}
