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

// Plot data: long-format CSV with columns series,index,value, readable by any
// plotting tool.

#include "power_attest/error.hpp"
#include "power_attest/template.hpp"
#include "power_attest/trace.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

namespace power_attest {

inline constexpr std::string_view kPlotHeader = "series,index,value";

class PlotWriter {
public:
  PlotWriter() { out_ += kPlotHeader; out_ += '\n'; }

  /// Every `stride`-th sample of `values`, indexed from `first_index`.
  void series(std::string_view name, std::span<const double> values, std::size_t stride = 1,
              std::size_t first_index = 0) {
    if (stride < 1)
      fail(Errc::invalid_argument, "plot stride must be positive");
    for (std::size_t i = 0; i < values.size(); i += stride)
      row(name, first_index + i, values[i]);
  }

  void row(std::string_view name, std::size_t index, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, ",%zu,%.17g\n", index, value);
    out_ += name;
    out_ += buf;
  }

  const std::string& str() const noexcept { return out_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!(f << out_))
      fail(Errc::io_error, "cannot write plot data " + path.string());
  }

private:
  std::string out_;
};

/// The trace as series "trace", plus one "trigger" row at each trigger index.
inline PlotWriter trace_plot(const Trace& trace, std::size_t stride = 1) {
  PlotWriter w;
  w.series("trace", trace.samples(), stride);
  if (const auto& t = trace.triggers()) {
    for (std::size_t i : {t->start, t->end})
      if (i < trace.size())
        w.row("trigger", i, trace.samples()[i]);
  }
  return w;
}

/// The template as series "template" and the candidate's bucket window from
/// its start trigger as series "candidate"; both have the bucket length.
inline PlotWriter overlay_plot(const Template& tpl, const Trace& candidate, std::size_t stride = 1) {
  const Trace window = trim_to_bucket(candidate, tpl.bucket);
  PlotWriter w;
  w.series("template", tpl.samples, stride);
  w.series("candidate", window.samples(), stride);
  return w;
}

} // namespace power_attest
