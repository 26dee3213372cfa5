/*
 * SPDX-FileCopyrightText: Copyright 2026 The power-attest Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Seed derivation and the counter-keyed Gaussian noise stream used by the
// synthetic trace source.
//
// Stream layout: a trace is split into blocks of kNoiseBlock samples; block b
// of a trace with seed s draws from SplitMix64 seeded with derive_seed(s, b)
// and maps the 64-bit outputs to standard normals with Boost.Random's
// ziggurat normal_distribution. Any window can therefore be regenerated
// without producing the samples before it.

#include <boost/random/normal_distribution.hpp>

#include <algorithm>

#include <cstddef>
#include <cstdint>
#include <span>

namespace power_attest {

/// SplitMix64 (Steele, Lea, Flood 2014). Satisfies UniformRandomBitGenerator.
class SplitMix64 {
public:
  using result_type = std::uint64_t;

  constexpr explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
  std::uint64_t state_;
};

/// Derives an independent child seed for stream `index` of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  SplitMix64 g(seed ^ (index * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
  g();
  return g();
}

inline constexpr std::size_t kNoiseBlock = 4096;

/// Writes sigma-scaled standard normals for absolute sample indices
/// [first, first + out.size()) of the stream identified by `seed`, added onto
/// the existing contents of `out`.
inline void add_gaussian_noise(std::span<double> out, std::uint64_t seed, std::size_t first,
                               double sigma) {
  if (sigma == 0.0 || out.empty())
    return;
  const std::size_t last = first + out.size();
  std::size_t block = first / kNoiseBlock;
  for (std::size_t base = block * kNoiseBlock; base < last; base += kNoiseBlock, ++block) {
    SplitMix64 engine(derive_seed(seed, block));
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t stop = std::min(last, base + kNoiseBlock);
    std::size_t i = base;
    for (; i < first; ++i)
      (void)normal(engine);
    for (; i < stop; ++i)
      out[i - first] += sigma * normal(engine);
  }
}

} // namespace power_attest
