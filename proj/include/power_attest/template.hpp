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

// Per-program templates: pointwise mean of trimmed traces, smoothed with a
// Savitzky-Golay filter, plus a correlation threshold calibrated at a
// percentile of self-correlations.

#include "power_attest/error.hpp"
#include "power_attest/pearson.hpp"
#include "power_attest/savitzky_golay.hpp"
#include "power_attest/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace power_attest {

inline constexpr std::size_t kDefaultFilterWindow = 51;
inline constexpr std::size_t kDefaultFilterOrder = 3;
inline constexpr double kDefaultPercentile = 25.0;

struct Template {
  std::string program_id;
  std::vector<double> samples;
  LengthBucket bucket{kMinBucketExponent};
  std::optional<double> corr_thres;
  std::uint32_t trace_count = 0;
  std::uint16_t filter_window = kDefaultFilterWindow;
  std::uint8_t filter_order = kDefaultFilterOrder;

  bool calibrated() const noexcept { return corr_thres.has_value(); }

  friend bool operator==(const Template&, const Template&) = default;
};

/// Running pointwise mean of equal-length windows.
class WindowAverager {
public:
  explicit WindowAverager(std::size_t length) : sum_(length, 0.0) {}

  void add(std::span<const double> window) {
    if (window.size() != sum_.size())
      fail(Errc::length_mismatch, "window length differs from the template bucket");
    for (std::size_t i = 0; i < sum_.size(); ++i)
      sum_[i] += window[i];
    ++count_;
  }

  std::size_t count() const noexcept { return count_; }

  std::vector<double> mean() const {
    std::vector<double> m(sum_);
    for (double& v : m)
      v /= static_cast<double>(count_);
    return m;
  }

private:
  std::vector<double> sum_;
  std::size_t count_ = 0;
};

namespace detail {

inline void check_template_filter(std::size_t window, std::size_t order, LengthBucket bucket) {
  check_filter_params(window, order);
  if (window > 0xFFFF || order > 0xFF || window > bucket.size())
    fail(Errc::bad_filter_params, "filter window/order out of range for the template header");
}

inline const std::string& common_label(std::span<const Trace> traces) {
  static const std::string unlabeled;
  if (traces.empty())
    return unlabeled;
  const auto& first = traces.front().program_id();
  for (const Trace& t : traces)
    if (t.program_id() != first)
      fail(Errc::mixed_labels, "traces carry different program ids");
  return first ? *first : unlabeled;
}

} // namespace detail

/// Builds a template from `count` windows written by `fill(i, out)`, each of
/// bucket length. Averages first, then filters.
inline Template build_template_from_windows(const std::string& program_id, std::size_t count,
                                            const std::function<void(std::size_t, std::span<double>)>& fill,
                                            LengthBucket bucket, std::size_t window = kDefaultFilterWindow,
                                            std::size_t order = kDefaultFilterOrder) {
  detail::check_template_filter(window, order, bucket);
  if (count < 2)
    fail(Errc::insufficient_traces, "a template needs at least two traces");
  WindowAverager avg(bucket.size());
  std::vector<double> window_buf(bucket.size());
  for (std::size_t i = 0; i < count; ++i) {
    fill(i, window_buf);
    avg.add(window_buf);
  }
  Template t;
  t.program_id = program_id;
  t.samples = savitzky_golay(avg.mean(), window, order);
  t.bucket = bucket;
  t.trace_count = static_cast<std::uint32_t>(count);
  t.filter_window = static_cast<std::uint16_t>(window);
  t.filter_order = static_cast<std::uint8_t>(order);
  return t;
}

inline Template build_template(std::span<const Trace> traces, LengthBucket bucket,
                               std::size_t window = kDefaultFilterWindow,
                               std::size_t order = kDefaultFilterOrder) {
  detail::check_template_filter(window, order, bucket);
  const std::string id = detail::common_label(traces);
  if (traces.size() < 2)
    fail(Errc::insufficient_traces, "a template needs at least two traces");
  return build_template_from_windows(
      id, traces.size(),
      [&](std::size_t i, std::span<double> out) {
        Trace w = trim_to_bucket(traces[i], bucket);
        std::copy(w.samples().begin(), w.samples().end(), out.begin());
      },
      bucket, window, order);
}

/// Value at index floor(percentile/100 * count) of the ascending order.
inline double percentile_threshold(std::vector<double> values, double percentile) {
  if (values.empty())
    fail(Errc::insufficient_traces, "no correlations to calibrate on");
  if (!(percentile >= 0.0 && percentile <= 100.0))
    fail(Errc::invalid_argument, "percentile must be within [0, 100]");
  std::sort(values.begin(), values.end());
  auto idx = static_cast<std::size_t>(std::floor(percentile / 100.0 * static_cast<double>(values.size())));
  idx = std::min(idx, values.size() - 1);
  return values[idx];
}

inline constexpr std::size_t kMinCalibrationTraces = 4;

inline Template calibrate_from_correlations(Template tpl, std::vector<double> correlations,
                                            double percentile = kDefaultPercentile) {
  if (correlations.size() < kMinCalibrationTraces)
    fail(Errc::insufficient_traces, "calibration needs at least 4 traces");
  tpl.corr_thres = percentile_threshold(std::move(correlations), percentile);
  return tpl;
}

inline std::vector<double> self_correlations(const Template& tpl, std::span<const Trace> traces) {
  PreparedReference ref(tpl.samples);
  std::vector<double> corrs;
  corrs.reserve(traces.size());
  for (const Trace& t : traces) {
    if (t.program_id() && *t.program_id() != tpl.program_id)
      fail(Errc::mixed_labels, "calibration trace labeled '" + *t.program_id() + "' for template '" +
                                   tpl.program_id + "'");
    Trace w = trim_to_bucket(t, tpl.bucket);
    corrs.push_back(ref.correlate(w.samples()));
  }
  return corrs;
}

inline Template calibrate_threshold(Template tpl, std::span<const Trace> traces,
                                    double percentile = kDefaultPercentile) {
  if (traces.size() < kMinCalibrationTraces)
    fail(Errc::insufficient_traces, "calibration needs at least 4 traces");
  auto corrs = self_correlations(tpl, traces);
  return calibrate_from_correlations(std::move(tpl), std::move(corrs), percentile);
}

} // namespace power_attest
