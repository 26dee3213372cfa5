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

#include "power_attest/error.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace power_attest {

inline void check_filter_params(std::size_t window, std::size_t order) {
  if (window == 0 || window % 2 == 0)
    fail(Errc::bad_filter_params, "window must be odd and positive, got " + std::to_string(window));
  if (order >= window)
    fail(Errc::bad_filter_params, "order must be below the window length");
}

/// Convolution weights returning the center value of the least-squares
/// polynomial fit of degree `order` over `window` points.
inline std::vector<double> savitzky_golay_weights(std::size_t window, std::size_t order) {
  check_filter_params(window, order);
  const std::size_t m = window / 2;
  const std::size_t k = order + 1;
  // Orthonormal polynomial basis over the window; the center weights are the
  // center row of the projection onto its span.
  const long double scale = m > 0 ? static_cast<long double>(m) : 1.0L;
  std::vector<long double> z(window);
  for (std::size_t i = 0; i < window; ++i)
    z[i] = (static_cast<long double>(i) - static_cast<long double>(m)) / scale;
  std::vector<std::vector<long double>> basis;
  basis.reserve(k);
  std::vector<long double> v(window, 1.0L);
  for (std::size_t q = 0; q < k; ++q) {
    if (q > 0)
      for (std::size_t i = 0; i < window; ++i)
        v[i] = z[i] * basis.back()[i];
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) {
        long double dot = 0.0L;
        for (std::size_t i = 0; i < window; ++i)
          dot += v[i] * b[i];
        for (std::size_t i = 0; i < window; ++i)
          v[i] -= dot * b[i];
      }
    long double norm = 0.0L;
    for (long double x : v)
      norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v)
      x /= norm;
    basis.push_back(v);
  }
  std::vector<double> weights(window);
  for (std::size_t i = 0; i < window; ++i) {
    long double h = 0.0L;
    for (const auto& b : basis)
      h += b[m] * b[i];
    weights[i] = static_cast<double>(h);
  }
  return weights;
}

/// Savitzky-Golay smoothing with mirror padding at the edges (the edge sample
/// is not repeated). Output length equals input length.
inline std::vector<double> savitzky_golay(std::span<const double> samples, std::size_t window,
                                          std::size_t order) {
  check_filter_params(window, order);
  if (window > samples.size())
    fail(Errc::bad_filter_params, "window exceeds the number of samples");
  const std::vector<double> w = savitzky_golay_weights(window, order);
  const std::size_t n = samples.size();
  const std::size_t m = window / 2;
  std::vector<double> out(n);
  auto mirrored = [&](long i) {
    const long last = static_cast<long>(n) - 1;
    if (i < 0)
      i = -i;
    if (i > last)
      i = 2 * last - i;
    return samples[static_cast<std::size_t>(i)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    if (i >= m && i + m < n) {
      const double* x = samples.data() + (i - m);
      for (std::size_t j = 0; j < window; ++j)
        acc += w[j] * x[j];
    } else {
      for (std::size_t j = 0; j < window; ++j)
        acc += w[j] * mirrored(static_cast<long>(i + j) - static_cast<long>(m));
    }
    out[i] = acc;
  }
  return out;
}

} // namespace power_attest
