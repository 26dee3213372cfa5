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

// Pearson correlation in one pass over shifted data. Samples are summed in
// short blocks with independent lanes, and block totals are combined with
// Neumaier compensation, which keeps 2^21-sample sums accurate.

#include "power_attest/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace power_attest {

namespace detail {

class NeumaierSum {
public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline constexpr std::size_t kBlock = 1024;
inline constexpr std::size_t kLanes = 4;

struct CrossMoments {
  double sa, sb, saa, sbb, sab;
};

// Sums of (a - ka), (b - kb) and their products over [0, n).
inline CrossMoments cross_moments(const double* a, const double* b, std::size_t n, double ka,
                                  double kb) noexcept {
  NeumaierSum sa, sb, saa, sbb, sab;
  for (std::size_t base = 0; base < n; base += kBlock) {
    const std::size_t len = std::min(kBlock, n - base);
    std::array<double, kLanes> la{}, lb{}, laa{}, lbb{}, lab{};
    std::size_t i = 0;
    for (; i + kLanes <= len; i += kLanes) {
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double x = a[base + i + l] - ka;
        const double y = b[base + i + l] - kb;
        la[l] += x;
        lb[l] += y;
        laa[l] += x * x;
        lbb[l] += y * y;
        lab[l] += x * y;
      }
    }
    for (; i < len; ++i) {
      const double x = a[base + i] - ka;
      const double y = b[base + i] - kb;
      la[0] += x;
      lb[0] += y;
      laa[0] += x * x;
      lbb[0] += y * y;
      lab[0] += x * y;
    }
    for (std::size_t l = 0; l < kLanes; ++l) {
      sa.add(la[l]);
      sb.add(lb[l]);
      saa.add(laa[l]);
      sbb.add(lbb[l]);
      sab.add(lab[l]);
    }
  }
  return {sa.value(), sb.value(), saa.value(), sbb.value(), sab.value()};
}

struct ProjectionMoments {
  double sx, sxx, sxu;
};

inline ProjectionMoments projection_moments(const double* x, const double* u, std::size_t n,
                                            double kx) noexcept {
  NeumaierSum sx, sxx, sxu;
  for (std::size_t base = 0; base < n; base += kBlock) {
    const std::size_t len = std::min(kBlock, n - base);
    std::array<double, kLanes> lx{}, lxx{}, lxu{};
    std::size_t i = 0;
    for (; i + kLanes <= len; i += kLanes) {
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double d = x[base + i + l] - kx;
        lx[l] += d;
        lxx[l] += d * d;
        lxu[l] += d * u[base + i + l];
      }
    }
    for (; i < len; ++i) {
      const double d = x[base + i] - kx;
      lx[0] += d;
      lxx[0] += d * d;
      lxu[0] += d * u[base + i];
    }
    for (std::size_t l = 0; l < kLanes; ++l) {
      sx.add(lx[l]);
      sxx.add(lxx[l]);
      sxu.add(lxu[l]);
    }
  }
  return {sx.value(), sxx.value(), sxu.value()};
}

} // namespace detail

/// Sample Pearson correlation. Constant inputs are rejected rather than
/// mapped to zero.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    fail(Errc::length_mismatch,
         "pearson inputs differ in length: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.size() < 2)
    fail(Errc::length_mismatch, "pearson needs at least two samples");
  const double n = static_cast<double>(a.size());
  const auto m = detail::cross_moments(a.data(), b.data(), a.size(), a[0], b[0]);
  const double va = m.saa - m.sa * m.sa / n;
  const double vb = m.sbb - m.sb * m.sb / n;
  if (m.saa == 0.0 || m.sbb == 0.0 || !(va > 0.0) || !(vb > 0.0))
    fail(Errc::degenerate_input, "pearson input has zero variance");
  const double r = (m.sab - m.sa * m.sb / n) / std::sqrt(va * vb);
  return std::clamp(r, -1.0, 1.0);
}

/// A reference signal centered and scaled to unit norm once, so correlating
/// candidates against it needs three running sums instead of five.
class PreparedReference {
public:
  PreparedReference() = default;

  explicit PreparedReference(std::span<const double> reference) : unit_(reference.begin(), reference.end()) {
    if (unit_.size() < 2)
      fail(Errc::length_mismatch, "reference needs at least two samples");
    detail::NeumaierSum s;
    for (double v : unit_)
      s.add(v);
    const double mean = s.value() / static_cast<double>(unit_.size());
    detail::NeumaierSum ss;
    for (double& v : unit_) {
      v -= mean;
      ss.add(v * v);
    }
    const double norm = std::sqrt(ss.value());
    if (!(norm > 0.0))
      fail(Errc::degenerate_input, "reference has zero variance");
    for (double& v : unit_)
      v /= norm;
  }

  std::size_t size() const noexcept { return unit_.size(); }
  std::span<const double> unit() const noexcept { return unit_; }

  double correlate(std::span<const double> x) const {
    if (x.size() != unit_.size())
      fail(Errc::length_mismatch, "candidate length " + std::to_string(x.size()) +
                                      " differs from reference length " + std::to_string(unit_.size()));
    const auto m = detail::projection_moments(x.data(), unit_.data(), x.size(), x[0]);
    const double vx = m.sxx - m.sx * m.sx / static_cast<double>(x.size());
    if (m.sxx == 0.0 || !(vx > 0.0))
      fail(Errc::degenerate_input, "candidate has zero variance");
    return std::clamp(m.sxu / std::sqrt(vx), -1.0, 1.0);
  }

private:
  std::vector<double> unit_;
};

/// Several prepared references correlated against prefixes of one candidate
/// in a single pass. Each result is bitwise equal to the matching
/// PreparedReference::correlate on the prefix of the reference's length.
class ReferenceBank {
public:
  void add(const PreparedReference* reference) { refs_.push_back(reference); }
  std::size_t size() const noexcept { return refs_.size(); }

  /// Correlations in insertion order; references longer than `x` yield NaN.
  std::vector<double> correlate_all(std::span<const double> x) const {
    const std::size_t n = x.size();
    std::vector<double> out(refs_.size(), std::numeric_limits<double>::quiet_NaN());
    std::size_t longest = 0;
    for (std::size_t j = 0; j < refs_.size(); ++j) {
      const std::size_t m = refs_[j]->size();
      if (m > n)
        continue;
      if (m % detail::kBlock != 0)
        out[j] = refs_[j]->correlate(x.first(m));
      else
        longest = std::max(longest, m);
    }
    if (longest == 0)
      return out;
    const double kx = x[0];
    detail::NeumaierSum sx, sxx;
    std::vector<detail::NeumaierSum> sxu(refs_.size());
    for (std::size_t base = 0; base < longest; base += detail::kBlock) {
      const double* xb = x.data() + base;
      std::array<double, detail::kLanes> lx{}, lxx{};
      for (std::size_t i = 0; i < detail::kBlock; i += detail::kLanes)
        for (std::size_t l = 0; l < detail::kLanes; ++l) {
          const double d = xb[i + l] - kx;
          lx[l] += d;
          lxx[l] += d * d;
        }
      for (std::size_t l = 0; l < detail::kLanes; ++l) {
        sx.add(lx[l]);
        sxx.add(lxx[l]);
      }
      const std::size_t end = base + detail::kBlock;
      for (std::size_t j = 0; j < refs_.size(); ++j) {
        const std::size_t m = refs_[j]->size();
        if (m > n || m % detail::kBlock != 0 || base >= m)
          continue;
        const double* u = refs_[j]->unit().data() + base;
        std::array<double, detail::kLanes> lxu{};
        for (std::size_t i = 0; i < detail::kBlock; i += detail::kLanes)
          for (std::size_t l = 0; l < detail::kLanes; ++l)
            lxu[l] += (xb[i + l] - kx) * u[i + l];
        for (std::size_t l = 0; l < detail::kLanes; ++l)
          sxu[j].add(lxu[l]);
        if (m == end) {
          const double vx = sxx.value() - sx.value() * sx.value() / static_cast<double>(m);
          if (sxx.value() == 0.0 || !(vx > 0.0))
            fail(Errc::degenerate_input, "candidate has zero variance");
          out[j] = std::clamp(sxu[j].value() / std::sqrt(vx), -1.0, 1.0);
        }
      }
    }
    return out;
  }

private:
  std::vector<const PreparedReference*> refs_;
};

} // namespace power_attest
