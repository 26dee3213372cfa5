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

// Single- and multi-trace attestation against a calibrated template.

#include "power_attest/error.hpp"
#include "power_attest/pearson.hpp"
#include "power_attest/rng.hpp"
#include "power_attest/template.hpp"
#include "power_attest/trace.hpp"

#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace power_attest {

struct AttestDecision {
  enum class Kind { single, multi };

  Kind kind = Kind::single;
  double correlation = 0.0;    // single: Pearson r of the best alignment
  std::size_t pass_count = 0;  // multi: traces at or above corr_thres
  std::size_t trace_count = 0; // multi: batch size
  bool passed = false;
  double threshold_used = 0.0; // corr_thres (single) or x_th (multi)
  long lag = 0;                // single: chosen shift relative to the start trigger
};

/// A calibrated template with its reference prepared for repeated matching.
class Matcher {
public:
  explicit Matcher(Template tpl) : tpl_(std::move(tpl)) {
    if (!tpl_.calibrated())
      fail(Errc::uncalibrated_template, "template '" + tpl_.program_id + "' has no corr_thres");
    ref_ = PreparedReference(tpl_.samples);
  }

  const Template& templ() const noexcept { return tpl_; }
  const PreparedReference& reference() const noexcept { return ref_; }
  double threshold() const noexcept { return *tpl_.corr_thres; }

  double correlate(std::span<const double> window) const { return ref_.correlate(window); }

  bool passes(double correlation) const noexcept { return correlation >= threshold(); }

  /// Correlates a window already aligned to the start trigger.
  AttestDecision attest_window(std::span<const double> window) const {
    const double r = correlate(window);
    return {AttestDecision::Kind::single, r, 0, 1, passes(r), threshold(), 0};
  }

  /// Trims at the start trigger (shifted by up to +/- max_lag samples, keeping
  /// the best correlation) and compares against corr_thres.
  AttestDecision attest(const Trace& trace, std::size_t max_lag = 0) const {
    if (!trace.triggers())
      fail(Errc::invalid_argument, "trace has no trigger marks");
    const std::size_t len = tpl_.bucket.size();
    const long start = static_cast<long>(trace.triggers()->start);
    const long lag = static_cast<long>(max_lag);
    std::optional<AttestDecision> best;
    for (long d = -lag; d <= lag; ++d) {
      const long first = start + d;
      if (first < 0 || static_cast<std::size_t>(first) + len > trace.size()) {
        if (d == 0)
          fail(Errc::too_short, "trace cannot be trimmed to bucket 2^" +
                                    std::to_string(tpl_.bucket.exponent()));
        continue;
      }
      AttestDecision dec = attest_window(trace.samples().subspan(static_cast<std::size_t>(first), len));
      dec.lag = d;
      if (!best || dec.correlation > best->correlation)
        best = dec;
    }
    return *best;
  }

private:
  Template tpl_;
  PreparedReference ref_;
};

inline AttestDecision attest_single(const Trace& trace, const Template& tpl, std::size_t max_lag = 0) {
  return Matcher(tpl).attest(trace, max_lag);
}

inline AttestDecision multi_decision(std::size_t pass_count, std::size_t trace_count, std::size_t x_th) {
  AttestDecision d;
  d.kind = AttestDecision::Kind::multi;
  d.pass_count = pass_count;
  d.trace_count = trace_count;
  d.passed = pass_count >= x_th;
  d.threshold_used = static_cast<double>(x_th);
  return d;
}

inline AttestDecision attest_multi(std::span<const Trace> traces, const Template& tpl, std::size_t x_th) {
  if (x_th == 0)
    fail(Errc::invalid_argument, "x_th must be positive");
  if (x_th > traces.size())
    fail(Errc::threshold_exceeds_batch,
         "x_th " + std::to_string(x_th) + " exceeds batch of " + std::to_string(traces.size()));
  const Matcher m(tpl);
  std::size_t passes = 0;
  for (const Trace& t : traces)
    passes += m.attest(t).passed ? 1 : 0;
  return multi_decision(passes, traces.size(), x_th);
}

/// Exact sampling distribution of the Pearson correlation between a template
/// and `clean + N(0, sigma^2)` noise, without materializing the noise.
///
/// With u the centered unit template and c the centered clean window,
/// c = alpha*u + beta*v (v orthonormal to u, centered). Centered i.i.d. noise
/// has independent N(0, sigma^2) coordinates along u and v and a
/// sigma^2 * chi^2(L - 3) remainder, so
///   r = (alpha + s z1) / sqrt((alpha + s z1)^2 + (beta + s z2)^2 + s^2 W).
class CorrelationModel {
public:
  CorrelationModel(const PreparedReference& reference, std::span<const double> clean_window, double sigma)
      : sigma_(sigma), length_(clean_window.size()) {
    if (clean_window.size() != reference.size())
      fail(Errc::length_mismatch, "clean window and template differ in length");
    if (length_ < 4)
      fail(Errc::length_mismatch, "correlation model needs at least four samples");
    if (!(sigma >= 0.0))
      fail(Errc::invalid_argument, "sigma must be non-negative");
    detail::NeumaierSum s;
    for (double v : clean_window)
      s.add(v);
    const double mean = s.value() / static_cast<double>(length_);
    detail::NeumaierSum a, cc;
    const auto u = reference.unit();
    for (std::size_t i = 0; i < length_; ++i) {
      const double c = clean_window[i] - mean;
      a.add(c * u[i]);
      cc.add(c * c);
    }
    alpha_ = a.value();
    beta_ = std::sqrt(std::max(0.0, cc.value() - alpha_ * alpha_));
  }

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double sigma() const noexcept { return sigma_; }

  /// Correlation of the noiseless window.
  double clean_correlation() const noexcept { return alpha_ / std::hypot(alpha_, beta_); }

  template <class Engine>
  double sample(Engine& engine) const {
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    boost::random::chi_squared_distribution<double> chi2(static_cast<double>(length_ - 3));
    const double num = alpha_ + sigma_ * normal(engine);
    const double orth = beta_ + sigma_ * normal(engine);
    const double rest = sigma_ * sigma_ * chi2(engine);
    const double den = std::sqrt(num * num + orth * orth + rest);
    return den > 0.0 ? num / den : 0.0;
  }

  /// Monte-Carlo estimate of P(r >= threshold).
  double pass_probability(double threshold, std::size_t draws, std::uint64_t seed) const {
    SplitMix64 engine(seed);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < draws; ++i)
      hits += sample(engine) >= threshold ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(draws);
  }

private:
  double sigma_;
  std::size_t length_;
  double alpha_ = 0.0;
  double beta_ = 0.0;
};

} // namespace power_attest
