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

#include "sensfarm/error.hpp"
#include "sensfarm/sampling.hpp"

namespace sensfarm {

namespace {

constexpr int kBits = 32;

struct DirectionEntry {
  std::uint32_t polynomial;
  std::uint32_t initial[16];
};

constexpr DirectionEntry kDirectionTable[] = {
#include "sobol_direction_numbers.inc"
};

constexpr std::size_t kTableSize = sizeof(kDirectionTable) / sizeof(kDirectionTable[0]);

// v[k-1] = m_k << (32 - k), k = 1..32.
void fill_directions(const DirectionEntry& entry, std::uint32_t* v) {
  const int degree = std::bit_width(entry.polynomial) - 1;
  if (degree == 0) {
    for (int k = 1; k <= kBits; ++k) v[k - 1] = 1u << (kBits - k);
    return;
  }
  const std::uint32_t interior = (entry.polynomial >> 1) & ((1u << (degree - 1)) - 1u);
  for (int k = 1; k <= std::min(degree, kBits); ++k) {
    v[k - 1] = entry.initial[k - 1] << (kBits - k);
  }
  for (int k = degree + 1; k <= kBits; ++k) {
    std::uint32_t value = v[k - degree - 1] ^ (v[k - degree - 1] >> degree);
    for (int l = 1; l < degree; ++l) {
      if ((interior >> (degree - 1 - l)) & 1u) value ^= v[k - l - 1];
    }
    v[k - 1] = value;
  }
}

constexpr double kScale = 1.0 / 4294967296.0;  // 2^-32

}  // namespace

std::size_t SobolSequence::max_dimension() { return kTableSize; }

SobolSequence::SobolSequence(std::size_t dimension)
    : dimension_(dimension), directions_(dimension * kBits), state_(dimension, 0u) {
  if (dimension == 0 || dimension > kTableSize) {
    throw Error(ErrorCode::kUnsupportedDimension,
                "Sobol dimension " + std::to_string(dimension) + " not in [1, " +
                    std::to_string(kTableSize) + "]");
  }
  for (std::size_t d = 0; d < dimension; ++d) {
    fill_directions(kDirectionTable[d], &directions_[d * kBits]);
  }
}

void SobolSequence::seek(std::uint64_t index) {
  if (index >= (std::uint64_t{1} << kBits)) {
    throw Error(ErrorCode::kInvalidArgument, "Sobol index exceeds 2^32");
  }
  const std::uint64_t gray = index ^ (index >> 1);
  for (std::size_t d = 0; d < dimension_; ++d) {
    std::uint32_t x = 0;
    for (int b = 0; b < kBits; ++b) {
      if ((gray >> b) & 1u) x ^= directions_[d * kBits + b];
    }
    state_[d] = x;
  }
  index_ = index;
}

std::vector<double> SobolSequence::next() {
  if (index_ >= (std::uint64_t{1} << kBits)) {
    throw Error(ErrorCode::kInvalidArgument, "Sobol sequence exhausted");
  }
  std::vector<double> point(dimension_);
  for (std::size_t d = 0; d < dimension_; ++d) point[d] = state_[d] * kScale;
  const int c = std::countr_one(index_);
  if (c < kBits) {
    for (std::size_t d = 0; d < dimension_; ++d) state_[d] ^= directions_[d * kBits + c];
  }
  ++index_;
  return point;
}

std::vector<std::vector<double>> sobol_points(std::size_t dim, std::size_t count,
                                              std::uint64_t skip) {
  if (count == 0) throw Error(ErrorCode::kInvalidArgument, "count must be positive");
  SobolSequence seq(dim);
  seq.seek(skip);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(seq.next());
  return out;
}

}  // namespace sensfarm
