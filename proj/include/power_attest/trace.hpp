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

// Trace data model, raw XADC capture decoding, trigger location and
// length-bucket trimming.

#include "power_attest/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace power_attest {

inline constexpr std::uint32_t kSampleRateHz = 1'000'000;
inline constexpr int kMinBucketExponent = 17;
inline constexpr int kMaxBucketExponent = 21;
inline constexpr std::size_t kTraceLength = std::size_t{1} << kMaxBucketExponent;

// Samples are 16-bit with the 12 significant bits in the top positions.
inline constexpr unsigned kCaptureShift = 4;
inline constexpr std::uint16_t kCaptureMaxCode = 0x0FFF;

struct TriggerMarks {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const TriggerMarks&, const TriggerMarks&) = default;
};

class Trace {
public:
  explicit Trace(std::vector<double> samples, std::optional<TriggerMarks> triggers = std::nullopt,
                 std::optional<std::string> program_id = std::nullopt,
                 std::uint32_t sample_rate_hz = kSampleRateHz)
      : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz),
        program_id_(std::move(program_id)) {
    if (samples_.empty())
      fail(Errc::invalid_argument, "trace must contain at least one sample");
    if (sample_rate_hz_ == 0)
      fail(Errc::invalid_argument, "sample rate must be positive");
    for (double v : samples_)
      if (!std::isfinite(v))
        fail(Errc::invalid_argument, "trace samples must be finite");
    if (triggers)
      set_triggers(*triggers);
  }

  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::uint32_t sample_rate_hz() const noexcept { return sample_rate_hz_; }
  const std::optional<TriggerMarks>& triggers() const noexcept { return triggers_; }
  const std::optional<std::string>& program_id() const noexcept { return program_id_; }

  void set_triggers(TriggerMarks marks) {
    if (!(marks.start < marks.end && marks.end <= samples_.size()))
      fail(Errc::invalid_argument, "trigger marks must satisfy start < end <= length");
    triggers_ = marks;
  }
  void clear_triggers() noexcept { triggers_.reset(); }
  void set_program_id(std::optional<std::string> id) { program_id_ = std::move(id); }

  friend bool operator==(const Trace&, const Trace&) = default;

private:
  std::vector<double> samples_;
  std::uint32_t sample_rate_hz_;
  std::optional<TriggerMarks> triggers_;
  std::optional<std::string> program_id_;
};

class LengthBucket {
public:
  constexpr explicit LengthBucket(int exponent) : exponent_(exponent) {
    if (exponent < kMinBucketExponent || exponent > kMaxBucketExponent)
      fail(Errc::invalid_argument, "length bucket exponent must be in [17, 21]");
  }
  constexpr int exponent() const noexcept { return exponent_; }
  constexpr std::size_t size() const noexcept { return std::size_t{1} << exponent_; }

  /// Smallest bucket holding `samples`, saturating at the largest bucket.
  static LengthBucket covering(std::size_t samples) {
    int e = kMinBucketExponent;
    while (e < kMaxBucketExponent && (std::size_t{1} << e) < samples)
      ++e;
    return LengthBucket(e);
  }

  friend constexpr bool operator==(LengthBucket, LengthBucket) = default;

private:
  int exponent_;
};

/// DMA buffer contents: every 32-bit word holds two 16-bit samples.
struct RawCapture {
  std::vector<std::uint32_t> words;

  std::size_t word_count() const noexcept { return words.size(); }
};

struct TriggerConfig {
  double amplitude = 80.0;
  std::size_t width_samples = 16;
  double min_excursion = 30.0;
  std::size_t tolerance_samples = 16;

  void validate() const {
    if (width_samples < 1)
      fail(Errc::invalid_argument, "trigger width must be at least one sample");
    if (tolerance_samples < 1)
      fail(Errc::invalid_argument, "trigger tolerance must be positive");
    if (!std::isfinite(amplitude) || !std::isfinite(min_excursion) || min_excursion < 0.0)
      fail(Errc::invalid_argument, "trigger amplitude and min_excursion must be finite");
  }
};

// ---------------------------------------------------------------------------
// Raw capture format

inline RawCapture parse_capture_words(std::span<const std::uint8_t> bytes) {
  if (bytes.empty())
    fail(Errc::empty_capture, "capture buffer is empty");
  if (bytes.size() % 4 != 0)
    fail(Errc::malformed_capture, "capture length " + std::to_string(bytes.size()) +
                                      " is not a multiple of 4 bytes");
  RawCapture raw;
  raw.words.resize(bytes.size() / 4);
  for (std::size_t w = 0; w < raw.words.size(); ++w) {
    const std::uint8_t* p = bytes.data() + 4 * w;
    raw.words[w] = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
                   (std::uint32_t{p[3]} << 24);
  }
  return raw;
}

inline std::vector<double> decode_capture_samples(const RawCapture& raw) {
  std::vector<double> samples;
  samples.reserve(2 * raw.word_count());
  for (std::uint32_t w : raw.words) {
    samples.push_back(static_cast<double>((w & 0xFFFFu) >> kCaptureShift));
    samples.push_back(static_cast<double>((w >> 16) >> kCaptureShift));
  }
  return samples;
}

/// Decodes a little-endian XADC DMA dump. Low half-word first; no triggers set.
inline Trace decode_capture(std::span<const std::uint8_t> bytes) {
  return Trace(decode_capture_samples(parse_capture_words(bytes)));
}

/// Rounds and clamps real-valued samples to 12-bit ADC codes.
inline std::vector<std::uint16_t> quantize_codes(std::span<const double> samples) {
  std::vector<std::uint16_t> codes(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double v = std::nearbyint(samples[i]);
    v = std::clamp(v, 0.0, static_cast<double>(kCaptureMaxCode));
    codes[i] = static_cast<std::uint16_t>(v);
  }
  return codes;
}

/// In-place equivalent of decoding the packed capture of `samples`.
inline void to_capture_codes(std::span<double> samples) {
  for (double& v : samples)
    v = std::clamp(std::nearbyint(v), 0.0, static_cast<double>(kCaptureMaxCode));
}

/// Packs 12-bit codes into the capture byte layout. Odd lengths are padded
/// with a zero sample.
inline std::vector<std::uint8_t> pack_capture(std::span<const std::uint16_t> codes) {
  std::vector<std::uint8_t> bytes(((codes.size() + 1) / 2) * 4, 0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] > kCaptureMaxCode)
      fail(Errc::invalid_argument, "sample code exceeds 12 bits");
    const std::uint16_t half = static_cast<std::uint16_t>(codes[i] << kCaptureShift);
    bytes[2 * i] = static_cast<std::uint8_t>(half & 0xFF);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(half >> 8);
  }
  return bytes;
}

/// Inverse of decode_capture for traces of even length with integral 12-bit values.
inline std::vector<std::uint8_t> encode_capture(const Trace& trace) {
  if (trace.size() % 2 != 0)
    fail(Errc::invalid_argument, "capture encoding requires an even number of samples");
  std::vector<std::uint16_t> codes(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    double v = trace.samples()[i];
    if (v < 0.0 || v > kCaptureMaxCode || v != std::floor(v))
      fail(Errc::invalid_argument, "sample is not a 12-bit code: " + std::to_string(v));
    codes[i] = static_cast<std::uint16_t>(v);
  }
  return pack_capture(codes);
}

// ---------------------------------------------------------------------------
// Trigger detection

namespace detail {

// Centered moving average with the window clipped at the edges.
inline std::vector<double> moving_average(std::span<const double> x, std::size_t half_width) {
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half_width ? i - half_width : 0;
    const std::size_t hi = std::min(n, i + half_width + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

} // namespace detail

/// Locates the two strongest trigger pulses. The statistic is the detrended
/// signal averaged over one trigger width (a matched box filter); excursions
/// are measured above the median magnitude of that statistic.
inline TriggerMarks detect_trigger_marks(std::span<const double> samples, const TriggerConfig& config) {
  config.validate();
  const std::size_t n = samples.size();
  if (n < (std::size_t{1} << kMinBucketExponent))
    fail(Errc::too_short, "trigger detection needs at least 2^17 samples");

  const std::size_t width = config.width_samples;
  const std::vector<double> trend = detail::moving_average(samples, 4 * width);

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    prefix[i + 1] = prefix[i] + (samples[i] - trend[i]);
  std::vector<double> stat(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t hi = std::min(n, i + width);
    stat[i] = std::abs((prefix[hi] - prefix[i]) / static_cast<double>(hi - i));
  }

  std::vector<double> scratch(stat);
  auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(scratch.begin(), mid, scratch.end());
  const double floor = *mid;
  const double cut = floor + config.min_excursion;

  struct Cluster {
    std::size_t peak_index;
    double peak;
  };
  std::vector<Cluster> clusters;
  std::size_t last_hit = 0;
  bool open = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(stat[i] > cut))
      continue;
    if (open && i - last_hit <= width) {
      if (stat[i] > clusters.back().peak)
        clusters.back() = {i, stat[i]};
    } else {
      clusters.push_back({i, stat[i]});
      open = true;
    }
    last_hit = i;
  }
  if (clusters.size() < 2)
    fail(Errc::triggers_not_found,
         "found " + std::to_string(clusters.size()) + " excursion(s), two required");

  std::partial_sort(clusters.begin(), clusters.begin() + 2, clusters.end(),
                    [](const Cluster& a, const Cluster& b) {
                      return a.peak > b.peak || (a.peak == b.peak && a.peak_index < b.peak_index);
                    });
  std::size_t a = clusters[0].peak_index;
  std::size_t b = clusters[1].peak_index;
  if (a > b)
    std::swap(a, b);
  return {a, b};
}

/// Detects trigger marks and records them on the trace.
inline TriggerMarks detect_triggers(Trace& trace, const TriggerConfig& config) {
  TriggerMarks marks = detect_trigger_marks(trace.samples(), config);
  trace.set_triggers(marks);
  return marks;
}

// ---------------------------------------------------------------------------
// Trimming

/// The execution window: `bucket.size()` samples starting at the start trigger
/// (the trigger sample itself is included).
inline Trace trim_to_bucket(const Trace& trace, LengthBucket bucket) {
  if (!trace.triggers())
    fail(Errc::invalid_argument, "trace has no trigger marks");
  const TriggerMarks marks = *trace.triggers();
  const std::size_t len = bucket.size();
  if (marks.start + len > trace.size())
    fail(Errc::too_short, "window [" + std::to_string(marks.start) + ", " +
                              std::to_string(marks.start + len) + ") exceeds " +
                              std::to_string(trace.size()) + " samples");
  auto first = trace.samples().begin() + static_cast<std::ptrdiff_t>(marks.start);
  std::vector<double> window(first, first + static_cast<std::ptrdiff_t>(len));
  TriggerMarks local{0, std::min(marks.end - marks.start, len)};
  return Trace(std::move(window), local, trace.program_id(), trace.sample_rate_hz());
}

} // namespace power_attest
