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

// Labeled trace sources: anything that can hand out start-trigger-aligned
// execution windows by index.

#include "power_attest/error.hpp"
#include "power_attest/trace.hpp"

#include <algorithm>
#include <concepts>
#include <span>
#include <string>
#include <vector>

namespace power_attest {

/// A labeled set of traces that can hand out start-trigger-aligned windows.
template <class S>
concept LabeledWindowSource = requires(const S& s, std::size_t i, std::size_t len) {
  { s.size() } -> std::convertible_to<std::size_t>;
  { s.label(i) } -> std::convertible_to<std::string>;
  { s.window(i, len) } -> std::convertible_to<std::vector<double>>;
  { s.fits(i, len) } -> std::convertible_to<bool>;
};

/// Adapts in-memory labeled traces with trigger marks.
class TraceSetView {
public:
  explicit TraceSetView(std::span<const Trace> traces) : traces_(traces) {
    for (const Trace& t : traces_) {
      if (!t.program_id())
        fail(Errc::invalid_argument, "evaluation traces must be labeled");
      if (!t.triggers())
        fail(Errc::invalid_argument, "evaluation traces need trigger marks");
    }
  }
  std::size_t size() const noexcept { return traces_.size(); }
  const std::string& label(std::size_t i) const { return *traces_[i].program_id(); }
  bool fits(std::size_t i, std::size_t len) const {
    return traces_[i].triggers()->start + len <= traces_[i].size();
  }
  std::vector<double> window(std::size_t i, std::size_t len) const {
    auto s = traces_[i].samples().subspan(traces_[i].triggers()->start, len);
    return {s.begin(), s.end()};
  }

private:
  std::span<const Trace> traces_;
};

/// Writes window `i` of length `len` into `buffer`, reusing its storage when
/// the source supports in-place generation.
template <LabeledWindowSource Source>
void fetch_window(const Source& src, std::size_t i, std::size_t len, std::vector<double>& buffer) {
  if constexpr (requires(std::span<double> out) { src.window_into(i, out); }) {
    buffer.resize(len);
    src.window_into(i, std::span<double>(buffer));
  } else {
    buffer = src.window(i, len);
  }
}

/// Presents another source's windows as the 12-bit capture codes a TEE would
/// ship, so thresholds can be calibrated on transported traces.
template <LabeledWindowSource Source>
class CaptureCodes {
public:
  explicit CaptureCodes(const Source& src) : src_(src) {}
  std::size_t size() const { return src_.size(); }
  std::string label(std::size_t i) const { return src_.label(i); }
  bool fits(std::size_t i, std::size_t len) const { return src_.fits(i, len); }
  std::vector<double> window(std::size_t i, std::size_t len) const {
    std::vector<double> w;
    fetch_window(src_, i, len, w);
    to_capture_codes(w);
    return w;
  }
  void window_into(std::size_t i, std::span<double> out) const {
    if constexpr (requires { src_.window_into(i, out); }) {
      src_.window_into(i, out);
    } else {
      const std::vector<double> w = src_.window(i, out.size());
      std::copy(w.begin(), w.end(), out.begin());
    }
    to_capture_codes(out);
  }

private:
  const Source& src_;
};

} // namespace power_attest
