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

// Template construction and calibration driven by a labeled trace source,
// plus the end-to-end synthetic study used by the pipeline.

#include "power_attest/error.hpp"
#include "power_attest/eval.hpp"
#include "power_attest/pearson.hpp"
#include "power_attest/source.hpp"
#include "power_attest/synth.hpp"
#include "power_attest/template.hpp"

#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace power_attest {

struct TemplateOptions {
  std::size_t window = kDefaultFilterWindow;
  std::size_t order = kDefaultFilterOrder;
  double percentile = kDefaultPercentile;
};

namespace detail {
template <LabeledWindowSource Source>
void check_source_entries(const Source& src, std::span<const std::size_t> indices, const std::string& id,
                          LengthBucket bucket) {
  for (std::size_t i : indices) {
    if (src.label(i) != id)
      fail(Errc::mixed_labels, "trace labeled '" + std::string(src.label(i)) + "' used for '" + id + "'");
    if (!src.fits(i, bucket.size()))
      fail(Errc::too_short, "trace " + std::to_string(i) + " cannot be trimmed to bucket 2^" +
                                std::to_string(bucket.exponent()));
  }
}
} // namespace detail

template <LabeledWindowSource Source>
Template build_template_from_source(const Source& src, std::span<const std::size_t> indices,
                                    const std::string& program_id, LengthBucket bucket,
                                    const TemplateOptions& opt = {}) {
  detail::check_template_filter(opt.window, opt.order, bucket);
  detail::check_source_entries(src, indices, program_id, bucket);
  return build_template_from_windows(
      program_id, indices.size(),
      [&](std::size_t k, std::span<double> out) {
        std::vector<double> buf;
        if constexpr (requires { src.window_into(indices[k], out); })
          src.window_into(indices[k], out);
        else {
          buf = src.window(indices[k], out.size());
          std::copy(buf.begin(), buf.end(), out.begin());
        }
      },
      bucket, opt.window, opt.order);
}

template <LabeledWindowSource Source>
std::vector<double> correlations_from_source(const Source& src, std::span<const std::size_t> indices,
                                             const Template& tpl) {
  detail::check_source_entries(src, indices, tpl.program_id, tpl.bucket);
  const PreparedReference ref(tpl.samples);
  std::vector<double> out;
  out.reserve(indices.size());
  std::vector<double> buffer;
  for (std::size_t i : indices) {
    fetch_window(src, i, tpl.bucket.size(), buffer);
    out.push_back(ref.correlate(buffer));
  }
  return out;
}

template <LabeledWindowSource Source>
Template calibrate_from_source(const Source& src, std::span<const std::size_t> indices, Template tpl,
                               double percentile = kDefaultPercentile) {
  if (indices.size() < kMinCalibrationTraces)
    fail(Errc::insufficient_traces, "calibration needs at least 4 traces");
  auto corrs = correlations_from_source(src, indices, tpl);
  return calibrate_from_correlations(std::move(tpl), std::move(corrs), percentile);
}

// ---------------------------------------------------------------------------
// Synthetic study

struct StudyConfig {
  std::size_t per_program = 1000;   // traces captured per program for templates
  std::size_t eval_per_program = 1000;
  bool shared_calibration = false;  // calibrate on the template traces instead of a disjoint half
  TemplateOptions templates;
  std::uint64_t seed = 1;
};

/// Per-program corpora: a template corpus split into build and calibration
/// halves, and a separate evaluation corpus.
class SyntheticStudy {
public:
  SyntheticStudy(std::vector<ProgramProfile> profiles, TriggerConfig trigger, StudyConfig cfg)
      : cfg_(cfg), trigger_(trigger),
        capture_(profiles, trigger, cfg.per_program, derive_seed(cfg.seed, 0)),
        eval_(std::move(profiles), trigger, cfg.eval_per_program, derive_seed(cfg.seed, 1)) {
    if (cfg_.per_program < (cfg_.shared_calibration ? 4u : 8u))
      fail(Errc::insufficient_traces, "per_program too small to build and calibrate templates");
  }

  const SyntheticCorpus& capture_corpus() const noexcept { return capture_; }
  const SyntheticCorpus& eval_corpus() const noexcept { return eval_; }
  std::size_t program_count() const noexcept { return capture_.program_count(); }
  const ProgramProfile& profile(std::size_t k) const { return capture_.synthesizer(k).profile(); }

  std::vector<std::size_t> build_indices(std::size_t k) const {
    const std::size_t n = cfg_.shared_calibration ? cfg_.per_program : cfg_.per_program / 2;
    return range(k * cfg_.per_program, n);
  }
  std::vector<std::size_t> calibration_indices(std::size_t k) const {
    if (cfg_.shared_calibration)
      return range(k * cfg_.per_program, cfg_.per_program);
    const std::size_t half = cfg_.per_program / 2;
    return range(k * cfg_.per_program + half, cfg_.per_program - half);
  }

  Template uncalibrated_template(std::size_t k) const {
    const ProgramProfile& p = profile(k);
    return build_template_from_source(capture_, build_indices(k), p.program_id, execution_bucket(p, trigger_),
                                      cfg_.templates);
  }

  Template calibrate(std::size_t k, Template tpl) const {
    return calibrate_from_source(capture_, calibration_indices(k), std::move(tpl), cfg_.templates.percentile);
  }

  /// Calibrates on the 12-bit capture codes a TEE ships to the tray.
  Template capture_calibrate(std::size_t k, Template tpl) const {
    return calibrate_from_source(CaptureCodes(capture_), calibration_indices(k), std::move(tpl),
                                 cfg_.templates.percentile);
  }

  /// Index of the profile named `program_id`.
  std::size_t program_index(std::string_view program_id) const {
    for (std::size_t k = 0; k < program_count(); ++k)
      if (profile(k).program_id == program_id)
        return k;
    fail(Errc::unknown_application, "no profile named '" + std::string(program_id) + "'");
  }

  std::vector<Template> templates() const {
    std::vector<Template> out;
    for (std::size_t k = 0; k < program_count(); ++k)
      out.push_back(calibrate(k, uncalibrated_template(k)));
    return out;
  }

  EvaluationReport evaluate(std::span<const Template> templates) const {
    return power_attest::evaluate(templates, eval_);
  }

private:
  static std::vector<std::size_t> range(std::size_t first, std::size_t count) {
    std::vector<std::size_t> v(count);
    std::iota(v.begin(), v.end(), first);
    return v;
  }

  StudyConfig cfg_;
  TriggerConfig trigger_;
  SyntheticCorpus capture_;
  SyntheticCorpus eval_;
};

} // namespace power_attest
